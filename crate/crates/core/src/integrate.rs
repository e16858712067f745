//! Finite-level Haar integration on F and F^x and Schwartz-Bruhat functions
//! with exact Fourier transforms.
//!
//! Normalizations: additive vol(o) = 1 (psi-self-dual), multiplicative
//! vol(o^x, dy/|y|) = 1 - 1/q. On an annulus {|x| = q^-a} both reduce to
//! q^-level * sum over unit residues mod p^level (times q^-a additively).

use crate::characters::{AddChar, MultChar};
use crate::error::Error;
use crate::padic::{Fx, ResidueRing, ValuedUnit};
use crate::scalar::{Cx, R};

/// x^s for real x > 0 and complex s.
pub fn rpow(x: R, s: Cx) -> Cx {
    (s * x.ln()).exp()
}

/// q^(-a*s): the value of |x|^s on {|x| = q^-a}.
pub fn abs_pow(q: u64, a: i32, s: Cx) -> Cx {
    rpow(q as R, -s * a as R)
}

/// q^-level * sum of f over unit residues mod p^level, chunked so that the
/// reduction order (and hence the rounding) is identical for any thread count.
pub fn unit_sum<F: Fn(u64) -> Cx + Sync>(p: u64, level: u32, f: F) -> Cx {
    let ring = ResidueRing::new(p, level).expect("valid level");
    let pm = ring.modulus();
    let weight = (p as R).powi(-(level as i32));
    const CHUNK: u64 = 8192;
    let n_chunks = pm.div_ceil(CHUNK);
    let partials: Vec<Cx> = if n_chunks > 1 && rayon::current_num_threads() > 1 {
        use rayon::prelude::*;
        (0..n_chunks)
            .into_par_iter()
            .map(|c| chunk_sum(p, pm, c * CHUNK, ((c + 1) * CHUNK).min(pm), &f))
            .collect()
    } else {
        (0..n_chunks)
            .map(|c| chunk_sum(p, pm, c * CHUNK, ((c + 1) * CHUNK).min(pm), &f))
            .collect()
    };
    partials.into_iter().sum::<Cx>() * weight
}

fn chunk_sum<F: Fn(u64) -> Cx>(p: u64, _pm: u64, lo: u64, hi: u64, f: &F) -> Cx {
    let mut acc = Cx::new(0.0, 0.0);
    for u in lo..hi {
        if u % p != 0 {
            acc += f(u);
        }
    }
    acc
}

/// The annulus {|x| = q^-val}, sampled at unit residues mod p^level.
#[derive(Debug, Clone, Copy)]
pub struct Annulus {
    pub p: u64,
    pub val: i32,
    pub level: u32,
}

impl Annulus {
    pub fn new(p: u64, val: i32, level: u32) -> Self {
        Self { p, val, level }
    }

    fn point(&self, u: u64) -> ValuedUnit {
        ValuedUnit {
            p: self.p,
            v: self.val,
            unit: u,
            prec: self.level,
        }
    }

    /// Integral of f against multiplicative Haar dx/|x| (vol(o^x) = 1 - 1/q).
    /// `declared_level` is the caller's bound on f's level of constancy in
    /// the unit coordinate; raising the level silently is forbidden.
    pub fn integrate_mult<F: Fn(&ValuedUnit) -> Cx + Sync>(
        &self,
        declared_level: u32,
        f: F,
    ) -> Result<Cx, Error> {
        if declared_level > self.level {
            return Err(Error::LevelTooLow {
                level: self.level,
                need: declared_level,
            });
        }
        Ok(unit_sum(self.p, self.level, |u| f(&self.point(u))))
    }

    /// Integral of f against additive Haar dx (vol(o) = 1).
    pub fn integrate_add<F: Fn(&ValuedUnit) -> Cx + Sync>(
        &self,
        declared_level: u32,
        f: F,
    ) -> Result<Cx, Error> {
        let m = self.integrate_mult(declared_level, f)?;
        Ok(m * (self.p as R).powi(-self.val))
    }
}

/// One Schwartz-Bruhat building block: coeff * 1_{center + p^level o}(x) *
/// psi(freq * x). Level may be negative (large balls).
#[derive(Debug, Clone)]
pub struct SBTerm {
    pub coeff: Cx,
    pub center: Fx,
    pub level: i32,
    pub freq: Fx,
}

/// A Schwartz-Bruhat function: finite sum of twisted coset indicators.
#[derive(Debug, Clone)]
pub struct SchwartzBruhat {
    pub p: u64,
    pub terms: Vec<SBTerm>,
}

impl SchwartzBruhat {
    pub fn indicator_ball(p: u64, center: Fx, level: i32) -> Self {
        Self {
            p,
            terms: vec![SBTerm {
                coeff: Cx::new(1.0, 0.0),
                center,
                level,
                freq: Fx::Zero,
            }],
        }
    }

    /// 1_o.
    pub fn unit_ball(p: u64) -> Self {
        Self::indicator_ball(p, Fx::Zero, 0)
    }

    pub fn scale(&self, c: Cx) -> Self {
        Self {
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|t| SBTerm {
                    coeff: t.coeff * c,
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.p, rhs.p);
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        Self { p: self.p, terms }
    }

    pub fn eval(&self, x: Fx) -> Result<Cx, Error> {
        let psi = AddChar::unramified(self.p);
        let mut acc = Cx::new(0.0, 0.0);
        for t in &self.terms {
            let d = x.sub(t.center);
            let inside = match d {
                Fx::Zero => true,
                Fx::NonZero(u) => u.v >= t.level,
            };
            if inside {
                acc += t.coeff * psi.eval(t.freq.mul(x))?;
            }
        }
        Ok(acc)
    }

    /// Fourier transform with kernel psi(xy):
    /// FT(1_{x0 + p^m o} psi(xi x))(y) = q^-m psi(x0(y + xi)) 1_{-xi + p^-m o}(y).
    pub fn fourier(&self) -> Result<Self, Error> {
        let psi = AddChar::unramified(self.p);
        let q = self.p as R;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let phase = psi.eval(t.center.mul(t.freq))?;
            terms.push(SBTerm {
                coeff: t.coeff * phase * q.powi(-t.level),
                center: match t.freq {
                    Fx::Zero => Fx::Zero,
                    Fx::NonZero(u) => Fx::NonZero(u.neg()),
                },
                level: -t.level,
                freq: t.center,
            });
        }
        Ok(Self { p: self.p, terms })
    }

    /// Total variation style mass bound sum |coeff| * vol(support term).
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// Regularized Tate integral of one twisted-indicator term against
/// chi |.|^s dx/|x|, finite annuli plus a closed-form geometric tail.
fn mellin_term(term: &SBTerm, p: u64, chi: &MultChar, s: Cx) -> Result<Cx, Error> {
    let q = p as R;
    let psi = AddChar::unramified(p);
    let nu_freq: i32 = match term.freq {
        Fx::Zero => 0,
        Fx::NonZero(u) => (-u.v).max(0),
    };
    // z = chi(p) q^-s, ratio of consecutive annulus integrals.
    let z = chi.eval_unif_pow(1) * rpow(q, -s);
    let annulus_value = |a: i32| -> Result<Cx, Error> {
        // integral over {|x| = q^-a} inside the term's ball, d x / |x|
        let level = chi
            .cond_exp()
            .max((nu_freq - a).max(0) as u32)
            .max((term.level - a).max(0) as u32)
            .max(1);
        let val = unit_sum(p, level, |u| {
            let x = ValuedUnit {
                p,
                v: a,
                unit: u,
                prec: level,
            };
            // ball membership
            let inside = match Fx::NonZero(x).sub(term.center) {
                Fx::Zero => true,
                Fx::NonZero(d) => d.v >= term.level,
            };
            if !inside {
                return Cx::new(0.0, 0.0);
            }
            let cu = chi.eval_unit(x.unit_mod(chi.cond_exp().min(level)).unwrap_or(1));
            let cu = if chi.cond_exp() == 0 {
                Cx::new(1.0, 0.0)
            } else {
                cu.unwrap_or(Cx::new(0.0, 0.0))
            };
            let ps = psi
                .eval(term.freq.mul(Fx::NonZero(x)))
                .unwrap_or(Cx::new(0.0, 0.0));
            cu * ps
        });
        Ok(val * chi.eval_unif_pow(a as i64) * abs_pow(p, a, s))
    };
    match term.center {
        Fx::NonZero(c) if c.v < term.level => {
            // Ball avoids 0: single annulus |x| = |center|.
            annulus_value(c.v)
        }
        _ => {
            // Ball is p^K o.
            let k = term.level;
            let tail_start = k.max(-match term.freq {
                Fx::Zero => 0,
                Fx::NonZero(u) => u.v,
            });
            let mut acc = Cx::new(0.0, 0.0);
            for a in k..tail_start {
                acc += annulus_value(a)?;
            }
            // For a >= tail_start the twist is trivial on the annulus:
            // integral = (1 - 1/q) z^a for unramified chi, 0 otherwise.
            if chi.cond_exp() == 0 {
                if (Cx::new(1.0, 0.0) - z).norm() < 1e-3 {
                    return Err(Error::NearPole((Cx::new(1.0, 0.0) - z).norm()));
                }
                let za = rpow(q, -s * tail_start as R) * chi.eval_unif_pow(tail_start as i64);
                acc += (1.0 - 1.0 / q) * za / (Cx::new(1.0, 0.0) - z);
            }
            Ok(acc)
        }
    }
}

/// Meromorphically-continued integral of phi(x) chi(x) |x|^s dx/|x|.
pub fn mellin_with_tails(phi: &SchwartzBruhat, chi: &MultChar, s: Cx) -> Result<Cx, Error> {
    let mut acc = Cx::new(0.0, 0.0);
    for t in &phi.terms {
        acc += t.coeff * mellin_term(t, phi.p, chi, s)?;
    }
    Ok(acc)
}

/// L^2 mass at finite resolution: sum over the grid p^-extent * (Z/p^(level+extent))
/// of |phi|^2 with additive cell volume q^-level.
pub fn l2_mass(phi: &SchwartzBruhat, extent: u32, level: u32) -> Result<R, Error> {
    let p = phi.p;
    let total = ResidueRing::new(p, level + extent)?.modulus();
    let mut acc = 0.0;
    for j in 0..total {
        let x = if j == 0 {
            Fx::Zero
        } else {
            let u = ValuedUnit::from_integer(p, j as i64, level + extent)?;
            Fx::NonZero(ValuedUnit {
                v: u.v - extent as i32,
                ..u
            })
        };
        acc += phi.eval(x)?.norm_sqr();
    }
    Ok(acc * (p as R).powi(-(level as i32)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::MultChar;

    fn close(a: Cx, b: Cx, tol: R) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn unit_volume() {
        let dom = Annulus::new(5, 0, 1);
        let v = dom.integrate_mult(1, |_| Cx::new(1.0, 0.0)).unwrap();
        assert!(close(v, Cx::new(0.8, 0.0), 1e-14));
    }

    #[test]
    fn volume_off_one() {
        // {|x| = 1, |x - 1| = 1} has volume 1 - 2/q.
        let dom = Annulus::new(7, 0, 1);
        let v = dom
            .integrate_mult(1, |x| {
                if x.unit % 7 != 1 {
                    Cx::new(1.0, 0.0)
                } else {
                    Cx::new(0.0, 0.0)
                }
            })
            .unwrap();
        assert!(close(v, Cx::new(1.0 - 2.0 / 7.0, 0.0), 1e-14));
    }

    #[test]
    fn ramified_orthogonality() {
        let chi = MultChar::new(5, 2, 3, 0.0, 0.0).unwrap();
        let dom = Annulus::new(5, 0, 2);
        let v = dom
            .integrate_mult(2, |x| chi.eval(x).unwrap())
            .unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn level_too_low_is_an_error() {
        let dom = Annulus::new(5, 0, 1);
        assert!(matches!(
            dom.integrate_mult(3, |_| Cx::new(1.0, 0.0)),
            Err(Error::LevelTooLow { .. })
        ));
    }

    #[test]
    fn fourier_self_dual_unit_ball() {
        let phi = SchwartzBruhat::unit_ball(5);
        let hat = phi.fourier().unwrap();
        for j in [0i64, 1, 3, 5, 24, -2] {
            let x = Fx::from_integer(5, j, 6);
            assert!(close(phi.eval(x).unwrap(), hat.eval(x).unwrap(), 1e-14));
        }
        // and at a point outside o
        let x = Fx::NonZero(ValuedUnit::new(5, -1, 2, 4).unwrap());
        assert!(close(hat.eval(x).unwrap(), Cx::new(0.0, 0.0), 1e-14));
    }

    #[test]
    fn fourier_small_ball() {
        // FT(1_{p o}) = q^-1 1_{p^-1 o}.
        let phi = SchwartzBruhat::indicator_ball(3, Fx::Zero, 1);
        let hat = phi.fourier().unwrap();
        let inside = Fx::NonZero(ValuedUnit::new(3, -1, 1, 4).unwrap());
        assert!(close(hat.eval(inside).unwrap(), Cx::new(1.0 / 3.0, 0.0), 1e-14));
        let outside = Fx::NonZero(ValuedUnit::new(3, -2, 1, 4).unwrap());
        assert!(close(hat.eval(outside).unwrap(), Cx::new(0.0, 0.0), 1e-14));
    }

    fn random_sb(p: u64, seed: u64) -> SchwartzBruhat {
        // Small deterministic pseudo-random combination.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        let mut terms = Vec::new();
        for _ in 0..3 {
            let c = Cx::new(
                (next() % 100) as R / 50.0 - 1.0,
                (next() % 100) as R / 50.0 - 1.0,
            );
            let center = Fx::from_integer(p, (next() % 20) as i64 - 10, 8);
            let level = (next() % 3) as i32 - 1;
            let fr = (next() % 12) as i64 - 6;
            let freq = if fr == 0 {
                Fx::Zero
            } else {
                let u = ValuedUnit::from_integer(p, fr, 8).unwrap();
                Fx::NonZero(ValuedUnit { v: u.v - 2, ..u })
            };
            terms.push(SBTerm {
                coeff: c,
                center,
                level,
                freq,
            });
        }
        SchwartzBruhat { p, terms }
    }

    #[test]
    fn fourier_involution_is_reflection() {
        for seed in 1..=10u64 {
            let phi = random_sb(5, seed);
            let hh = phi.fourier().unwrap().fourier().unwrap();
            for j in [1i64, 2, 7, -3, 26, 125, -50] {
                let x = Fx::from_integer(5, j, 8);
                let xm = Fx::from_integer(5, -j, 8);
                let a = phi.eval(xm).unwrap();
                let b = hh.eval(x).unwrap();
                assert!(close(a, b, 1e-12), "seed={seed} j={j} {a} {b}");
            }
        }
    }

    #[test]
    fn plancherel_at_finite_level() {
        for seed in [3u64, 9] {
            let phi = random_sb(5, seed);
            let hat = phi.fourier().unwrap();
            let m1 = l2_mass(&phi, 3, 3).unwrap();
            let m2 = l2_mass(&hat, 3, 3).unwrap();
            assert!((m1 - m2).abs() < 1e-12 * (1.0 + m1.abs()), "{m1} {m2}");
        }
    }

    #[test]
    fn mellin_zeta_example() {
        // phi = 1_o, chi trivial, s = 2, p = 5: (1 - 1/5) zeta(2) = 5/6.
        let phi = SchwartzBruhat::unit_ball(5);
        let chi = MultChar::trivial(5);
        let v = mellin_with_tails(&phi, &chi, Cx::new(2.0, 0.0)).unwrap();
        assert!(close(v, Cx::new(5.0 / 6.0, 0.0), 1e-12), "{v}");
    }

    #[test]
    fn mellin_single_coset() {
        // phi = 1_{1 + p o}: q^-1 for chi trivial on 1 + p o.
        let phi = SchwartzBruhat::indicator_ball(5, Fx::from_integer(5, 1, 4), 1);
        let chi = MultChar::legendre(5).unwrap();
        let v = mellin_with_tails(&phi, &chi, Cx::new(0.7, 0.3)).unwrap();
        assert!(close(v, Cx::new(0.2, 0.0), 1e-12), "{v}");
    }

    #[test]
    fn mellin_ramified_kills_tail() {
        let phi = SchwartzBruhat::unit_ball(5);
        let chi = MultChar::new(5, 1, 2, 0.0, 0.0).unwrap();
        let v = mellin_with_tails(&phi, &chi, Cx::new(1.0, 0.0)).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn mellin_near_pole_detected() {
        let phi = SchwartzBruhat::unit_ball(5);
        let chi = MultChar::trivial(5);
        assert!(matches!(
            mellin_with_tails(&phi, &chi, Cx::new(1e-8, 0.0)),
            Err(Error::NearPole(_))
        ));
    }

    #[test]
    fn parallel_matches_serial() {
        let chi = MultChar::new(5, 3, 2, 0.0, 0.0).unwrap();
        let dom = Annulus::new(5, 0, 7);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| dom.integrate_mult(3, |x| chi.eval(x).unwrap()).unwrap());
        for deg in [4usize, 8] {
            let par = rayon::ThreadPoolBuilder::new()
                .num_threads(deg)
                .build()
                .unwrap()
                .install(|| dom.integrate_mult(3, |x| chi.eval(x).unwrap()).unwrap());
            assert!((serial - par).norm() < 1e-12);
        }
    }
}
