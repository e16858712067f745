//! Local zeta/L/epsilon/gamma factors for GL(1) and principal-series GL(2),
//! Gauss sums, and verification of the Tate local functional equation
//!
//!   Z(phi, chi, s) = Z(FT(phi), chi^-1, 1-s) / gamma(psi, chi, s).
//!
//! For ramified chi the epsilon factor is computed, not tabulated:
//! gamma(psi, chi, s) = g0 * chi(p)^n * q^(n(1-s)) with
//! g0 = gauss_sum(chi^-1, p^-n), the one convention that makes verify_tate
//! pass with the psi(xy) Fourier kernel used here.

use crate::characters::{AddChar, MultChar};
use crate::error::Error;
use crate::integrate::{mellin_with_tails, rpow, unit_sum, SchwartzBruhat};
use crate::padic::{Fx, ValuedUnit};
use crate::scalar::{Cx, R};

const POLE_DISTANCE: R = 1e-3;

/// zeta_F(s) = (1 - q^-s)^-1.
pub fn zeta_f(p: u64, s: Cx) -> Result<Cx, Error> {
    let den = Cx::new(1.0, 0.0) - rpow(p as R, -s);
    if den.norm() < POLE_DISTANCE {
        return Err(Error::NearPole(den.norm()));
    }
    Ok(den.inv())
}

/// L(s) = prod_j (1 - u_j q^-s)^-1 over the inverse roots u_j.
#[derive(Debug, Clone)]
pub struct LocalLFactor {
    pub p: u64,
    pub inv_roots: Vec<Cx>,
}

impl LocalLFactor {
    /// L(chi, s): one inverse root chi(p) when chi is unramified, none when
    /// ramified (n <= 1 Euler factors for GL(1)).
    pub fn gl1(chi: &MultChar) -> Self {
        let inv_roots = if chi.is_unramified() {
            vec![chi.eval_unif_pow(1)]
        } else {
            Vec::new()
        };
        Self {
            p: chi.p,
            inv_roots,
        }
    }

    /// Multiplicative under induction: L for I(mu1 x mu2) tensor chi is
    /// L(mu1 chi) L(mu2 chi).
    pub fn product(factors: &[LocalLFactor]) -> Self {
        assert!(!factors.is_empty());
        let p = factors[0].p;
        let mut inv_roots = Vec::new();
        for f in factors {
            assert_eq!(f.p, p);
            inv_roots.extend(f.inv_roots.iter().copied());
        }
        Self { p, inv_roots }
    }

    pub fn eval(&self, s: Cx) -> Result<Cx, Error> {
        let mut acc = Cx::new(1.0, 0.0);
        for u in &self.inv_roots {
            let den = Cx::new(1.0, 0.0) - u * rpow(self.p as R, -s);
            if den.norm() < POLE_DISTANCE {
                return Err(Error::NearPole(den.norm()));
            }
            acc /= den;
        }
        Ok(acc)
    }
}

/// gauss_sum(chi, xi) = integral over {|y| = 1} of chi(y) psi(xi y) dy with
/// additive measure (vol(o) = 1). Zero unless |xi| = C(chi) for ramified chi;
/// modulus q^(-n/2) on the support.
pub fn gauss_sum(chi: &MultChar, xi: &ValuedUnit) -> Cx {
    let p = chi.p;
    let psi = AddChar::unramified(p);
    let level = chi.cond_exp().max((-xi.v).max(0) as u32).max(1);
    unit_sum(p, level, |u| {
        let y = ValuedUnit {
            p,
            v: 0,
            unit: u,
            prec: level,
        };
        let cu = chi.eval_unit(y.unit_mod(chi.cond_exp().max(1)).unwrap()).unwrap();
        let ps = psi.eval(Fx::NonZero(xi.mul(&y))).unwrap();
        cu * ps
    })
}

/// gamma(psi^b, chi, s) = epsilon * L(chi^-1, 1-s) / L(chi, s), with epsilon
/// computed from the normalized Gauss sum for ramified chi and epsilon = 1
/// for unramified chi and unshifted psi. A shift b enters through the scaling
/// law gamma(psi^b, chi, s) = chi(b) |b|^(s-1) gamma(psi, chi, s).
pub fn gamma_gl1(psi: &AddChar, chi: &MultChar, s: Cx) -> Result<Cx, Error> {
    let p = chi.p;
    let q = p as R;
    let n = chi.cond_exp();
    let base = if n == 0 {
        let lnum = LocalLFactor::gl1(&chi.inverse()).eval(Cx::new(1.0, 0.0) - s)?;
        let lden = LocalLFactor::gl1(chi).eval(s)?;
        lnum / lden
    } else {
        let xi = ValuedUnit::new(p, -(n as i32), 1, n.max(1))?;
        let g0 = gauss_sum(&chi.inverse(), &xi);
        g0 * chi.eval_unif_pow(n as i64) * rpow(q, (Cx::new(1.0, 0.0) - s) * n as R)
    };
    match &psi.shift {
        None => Ok(base),
        Some(b) => {
            let chib = chi.eval(b)?;
            Ok(chib * rpow(q, -(s - Cx::new(1.0, 0.0)) * b.v as R) * base)
        }
    }
}

/// The local Tate integral Z(phi, chi, s), regularized via geometric tails.
pub fn tate_zeta(phi: &SchwartzBruhat, chi: &MultChar, s: Cx) -> Result<Cx, Error> {
    mellin_with_tails(phi, chi, s)
}

/// Relative residual of the functional equation at (phi, chi, s).
pub fn verify_tate(phi: &SchwartzBruhat, chi: &MultChar, s: Cx) -> Result<R, Error> {
    let psi = AddChar::unramified(phi.p);
    let lhs = tate_zeta(phi, chi, s)?;
    let rhs = tate_zeta(&phi.fourier()?, &chi.inverse(), Cx::new(1.0, 0.0) - s)?;
    // Cases where both sides vanish identically (character orthogonality)
    // leave only rounding noise; dividing noise by noise is meaningless.
    let zero_snap = 1e-12 * (1 + phi.term_count()) as R;
    if lhs.norm() < zero_snap && rhs.norm() < zero_snap {
        return Ok(0.0);
    }
    let gamma = gamma_gl1(&psi, chi, s)?;
    Ok((lhs - rhs / gamma).norm() / (lhs.norm() + rhs.norm() + 1e-30))
}
