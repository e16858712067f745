//! Conductor arithmetic for representations of PGL2 over the local field:
//! principal series and Steinberg twists, the twisted-conductor bound, the
//! Sigma-family membership test with its chi_J-invariant criterion, and the
//! exact volume of the congruence subgroup J.

use serde::Serialize;

use crate::characters::MultChar;
use crate::error::Error;
#[cfg(test)]
use crate::scalar::R;

fn unit_group_order(chi: &MultChar) -> u64 {
    chi.p.pow(chi.n.saturating_sub(1)) * (chi.p - 1)
}

/// chi^2 = 1: quadratic unit part, theta in {0, 1/2}, unitary.
pub fn is_quadratic(chi: &MultChar) -> bool {
    let unit_ok = chi.n == 0 || (2 * chi.k) % unit_group_order(chi) == 0;
    unit_ok && (2.0 * chi.theta).fract().abs() < 1e-12 && chi.sigma == 0.0
}

#[derive(Debug, Clone)]
pub enum ReprKind {
    PrincipalSeries(MultChar),
    SteinbergTwist(MultChar),
    Unramified,
}

#[derive(Debug, Clone)]
pub struct ReprDescriptor {
    pub kind: ReprKind,
    pub conductor: u64,
}

impl ReprDescriptor {
    /// I(omega), induced from (omega, omega^-1); conductor C(omega)^2.
    pub fn principal_series(omega: MultChar) -> Self {
        let c = omega.conductor();
        Self {
            kind: ReprKind::PrincipalSeries(omega),
            conductor: c * c,
        }
    }

    /// Steinberg twisted by a quadratic eta: conductor q for unramified eta,
    /// C(eta)^2 otherwise.
    pub fn steinberg_twist(eta: MultChar) -> Result<Self, Error> {
        if !is_quadratic(&eta) {
            return Err(Error::BadSpec("Steinberg twist needs quadratic eta".into()));
        }
        let c = eta.conductor();
        Ok(Self {
            conductor: eta.p.max(c * c),
            kind: ReprKind::SteinbergTwist(eta),
        })
    }

    pub fn unramified(p: u64) -> Self {
        let _ = p;
        Self {
            kind: ReprKind::Unramified,
            conductor: 1,
        }
    }
}

/// Upper bound max(C(sigma) C(omega), C(omega)^2) on the conductor of a
/// twist sigma x omega.  An assertion helper, not an exact conductor.
pub fn twist_conductor_bound(c_sigma: u64, c_omega: u64) -> u64 {
    (c_sigma * c_omega).max(c_omega * c_omega)
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub member: bool,
    /// C(sigma x chi^-1), computed exactly from the descriptor.
    pub criterion_value: u64,
    /// Whether C(sigma x chi^-1) <= C(chi) holds.
    pub criterion_holds: bool,
}

/// Membership of sigma in the family attached to chi: sigma = I(omega) with
/// omega/chi unramified, or a quadratic Steinberg twist with the same ratio
/// condition.  Also reports the chi_J-invariant criterion
/// C(sigma x chi^-1) <= C(chi); for members this value is C(chi^-2)
/// (principal series) or q (Steinberg).
pub fn in_sigma_family(sigma: &ReprDescriptor, chi: &MultChar) -> Result<FamilyReport, Error> {
    if chi.is_unramified() {
        return Err(Error::BadSpec("family membership needs ramified chi".into()));
    }
    let chi_inv = chi.inverse();
    let (member, criterion_value) = match &sigma.kind {
        ReprKind::PrincipalSeries(omega) => {
            let ratio = omega.times(&chi_inv)?;
            let co_ratio = omega.inverse().times(&chi_inv)?;
            (
                ratio.is_unramified(),
                ratio.conductor() * co_ratio.conductor(),
            )
        }
        ReprKind::SteinbergTwist(eta) => {
            let ratio = eta.times(&chi_inv)?;
            let c = ratio.conductor();
            (ratio.is_unramified(), chi.p.max(c * c))
        }
        ReprKind::Unramified => {
            let c = chi.conductor();
            (false, c * c)
        }
    };
    Ok(FamilyReport {
        member,
        criterion_value,
        criterion_holds: criterion_value <= chi.conductor(),
    })
}

/// vol(J) = zeta_F(1)/Q = (1 - 1/q)^-1 / Q as an exact reduced rational.
pub fn vol_j(p: u64, n: u32) -> (u64, u64) {
    let q = p;
    let cap_q = p.pow(n);
    let (mut num, mut den) = (q, (q - 1) * cap_q);
    let g = gcd(num, den);
    num /= g;
    den /= g;
    (num, den)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twist_bound_examples() {
        let q = 7u64;
        assert_eq!(twist_conductor_bound(q * q, q), q * q * q);
        assert_eq!(twist_conductor_bound(1, q * q), q * q * q * q);
    }

    #[test]
    fn exact_twist_conductors_respect_bound() {
        let p = 5u64;
        for n_om in 0..=3u32 {
            for om in chars_at(p, n_om) {
                let sigma = ReprDescriptor::principal_series(om.clone());
                for n_chi in 1..=3u32 {
                    for chi in chars_at(p, n_chi) {
                        let rep = in_sigma_family(&sigma, &chi).unwrap();
                        let bound = twist_conductor_bound(sigma.conductor, chi.conductor());
                        assert!(rep.criterion_value <= bound);
                    }
                }
            }
        }
    }

    fn chars_at(p: u64, n: u32) -> Vec<MultChar> {
        if n == 0 {
            vec![MultChar::trivial(p), MultChar::new(p, 0, 0, 0.3, 0.0).unwrap()]
        } else {
            MultChar::all_primitive(p, n).unwrap()
        }
    }

    #[test]
    fn membership_examples() {
        let chi = MultChar::new(5, 3, 1, 0.0, 0.0).unwrap();
        // I(chi * unramified) is a member and satisfies the criterion
        let omega = chi.times(&MultChar::new(5, 0, 0, 0.4, 0.0).unwrap()).unwrap();
        let rep = in_sigma_family(&ReprDescriptor::principal_series(omega), &chi).unwrap();
        assert!(rep.member && rep.criterion_holds);
        assert_eq!(rep.criterion_value, chi.pow(-2).unwrap().conductor());

        // unramified sigma against ramified chi: criterion value Q^2 > Q
        let rep = in_sigma_family(&ReprDescriptor::unramified(5), &chi).unwrap();
        assert!(!rep.member && !rep.criterion_holds);
        assert_eq!(rep.criterion_value, chi.conductor() * chi.conductor());

        // C(omega/chi) > 1: not a member
        let other = MultChar::new(5, 3, 2, 0.0, 0.0).unwrap();
        let rep = in_sigma_family(&ReprDescriptor::principal_series(other), &chi).unwrap();
        assert!(!rep.member);
    }

    #[test]
    fn steinberg_twist_membership() {
        // quadratic ramified chi: the Steinberg twist by chi itself is a
        // member with criterion value q
        let chi = MultChar::legendre(7).unwrap();
        let sigma = ReprDescriptor::steinberg_twist(chi.clone()).unwrap();
        assert_eq!(sigma.conductor, 49);
        let rep = in_sigma_family(&sigma, &chi).unwrap();
        assert!(rep.member && rep.criterion_holds);
        assert_eq!(rep.criterion_value, 7);

        // non-quadratic eta is rejected at construction
        let bad = MultChar::new(7, 1, 1, 0.0, 0.0).unwrap();
        assert!(ReprDescriptor::steinberg_twist(bad).is_err());

        // quadratic eta whose ratio with chi ramifies: not a member
        let chi2 = MultChar::new(7, 2, 1, 0.0, 0.0).unwrap();
        let rep = in_sigma_family(&sigma, &chi2).unwrap();
        assert!(!rep.member);
    }

    #[test]
    fn chi_inverse_square_conductor_never_grows() {
        for p in [3u64, 5, 7] {
            for n in 1..=4u32 {
                for chi in MultChar::all_primitive(p, n).unwrap() {
                    assert!(chi.pow(-2).unwrap().conductor() <= chi.conductor());
                }
            }
        }
    }

    #[test]
    fn membership_ignores_unramified_twist_of_chi() {
        let chi = MultChar::new(5, 2, 3, 0.0, 0.0).unwrap();
        let chi_t = chi.times(&MultChar::new(5, 0, 0, 0.7, 0.1).unwrap()).unwrap();
        for sigma in [
            ReprDescriptor::principal_series(chi.clone()),
            ReprDescriptor::principal_series(MultChar::new(5, 2, 4, 0.0, 0.0).unwrap()),
            ReprDescriptor::unramified(5),
        ] {
            let a = in_sigma_family(&sigma, &chi).unwrap();
            let b = in_sigma_family(&sigma, &chi_t).unwrap();
            assert_eq!(a.member, b.member);
            assert_eq!(a.criterion_value, b.criterion_value);
        }
    }

    #[test]
    fn vol_j_values_and_identity() {
        assert_eq!(vol_j(5, 2), (1, 20));
        assert_eq!(vol_j(3, 1), (1, 2));
        for p in [3u64, 5, 7, 13] {
            for n in 1..=4u32 {
                let (num, den) = vol_j(p, n);
                let zeta1 = p as R / (p - 1) as R;
                let v = num as R / den as R;
                assert!((v * p.pow(n) as R - zeta1).abs() < 1e-12);
            }
        }
    }
}
