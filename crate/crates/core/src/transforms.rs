//! The kernel-to-dual-weight transform chain: V on the torus-times-unipotent
//! coordinates, its additive transform V-wedge, the double transform V-sharp,
//! and the weight h-sharp, with the s-deformed variants.

use std::collections::BTreeMap;

use crate::characters::{AddChar, MultChar};
use crate::error::Error;
use crate::integrate::{rpow, unit_sum};
use crate::padic::{Fx, ValuedUnit};
use crate::scalar::{Cx, R};

/// Deformation triple s = (s1, s2, s3), |Re s_i| < 1/6.
#[derive(Debug, Clone, Copy)]
pub struct DeformParams {
    pub s1: Cx,
    pub s2: Cx,
    pub s3: Cx,
}

impl DeformParams {
    pub fn new(s1: Cx, s2: Cx, s3: Cx) -> Self {
        for s in [s1, s2, s3] {
            assert!(s.re.abs() < 1.0 / 6.0, "deformation out of range: {s}");
        }
        Self { s1, s2, s3 }
    }

    pub fn zero() -> Self {
        Self {
            s1: Cx::new(0.0, 0.0),
            s2: Cx::new(0.0, 0.0),
            s3: Cx::new(0.0, 0.0),
        }
    }
}

/// Kernel V(a(y) n'(z)). The canonical kernel attached to a ramified chi of
/// conductor Q is 1_{|y| = 1} 1_{|z| <= 1/Q} chi(y). Generic kernels are
/// tabulated: supported on |y| = 1, locally constant at `level` in y, with
/// one row per z-valuation in [z_min, z_deep) and a shared row for all
/// |z| <= q^-z_deep (including z = 0).
#[derive(Debug, Clone)]
pub enum KernelSpec {
    Canonical { chi: MultChar },
    Tabulated {
        p: u64,
        level: u32,
        z_min: i32,
        z_deep: i32,
        rows: BTreeMap<i32, Vec<Cx>>,
    },
}

impl KernelSpec {
    pub fn canonical(chi: MultChar) -> Result<Self, Error> {
        if chi.is_unramified() {
            return Err(Error::BadSpec("canonical kernel needs ramified chi".into()));
        }
        Ok(KernelSpec::Canonical { chi })
    }

    pub fn p(&self) -> u64 {
        match self {
            KernelSpec::Canonical { chi } => chi.p,
            KernelSpec::Tabulated { p, .. } => *p,
        }
    }

    /// Level of constancy in the y coordinate.
    pub fn y_level(&self) -> u32 {
        match self {
            KernelSpec::Canonical { chi } => chi.cond_exp(),
            KernelSpec::Tabulated { level, .. } => *level,
        }
    }

    /// V(a(y) n'(z)); zero off |y| = 1.
    pub fn eval(&self, y: &ValuedUnit, z: Fx) -> Cx {
        if y.v != 0 {
            return Cx::new(0.0, 0.0);
        }
        match self {
            KernelSpec::Canonical { chi } => {
                let zn = chi.cond_exp() as i32;
                let inside = match z {
                    Fx::Zero => true,
                    Fx::NonZero(u) => u.v >= zn,
                };
                if inside {
                    chi.eval(y).expect("precision checked by caller")
                } else {
                    Cx::new(0.0, 0.0)
                }
            }
            KernelSpec::Tabulated {
                p,
                level,
                z_min,
                z_deep,
                rows,
            } => {
                let zv = match z {
                    Fx::Zero => *z_deep,
                    Fx::NonZero(u) => u.v.min(*z_deep),
                };
                if zv < *z_min {
                    return Cx::new(0.0, 0.0);
                }
                let row = match rows.get(&zv) {
                    Some(r) => r,
                    None => return Cx::new(0.0, 0.0),
                };
                let u = y.unit_mod(*level).expect("precision checked by caller");
                row[unit_index(*p, u)]
            }
        }
    }
}

/// Dense index of a unit residue (non-units excluded, ascending order).
pub fn unit_index(p: u64, u: u64) -> usize {
    debug_assert!(u % p != 0);
    let u = u as usize;
    u - 1 - (u / p as usize)
}

pub fn unit_count(p: u64, level: u32) -> usize {
    let pm = p.pow(level);
    (pm - pm / p) as usize
}

/// V-wedge[s](xi, z) = integral over y of |y|^(s1-s2) V(a(y) n'(z)) psi(xi y)
/// dy/|y|. The kernel is supported on |y| = 1, so this is a single annulus
/// (and the |y|^(s1-s2) weight is 1 there: V-wedge[s] = V-wedge[0]).
pub fn v_wedge(kernel: &KernelSpec, xi: &ValuedUnit, z: Fx, _s: &DeformParams) -> Cx {
    let p = kernel.p();
    let psi = AddChar::unramified(p);
    let level = kernel.y_level().max((-xi.v).max(0) as u32).max(1);
    unit_sum(p, level, |u| {
        let y = ValuedUnit {
            p,
            v: 0,
            unit: u,
            prec: level,
        };
        kernel.eval(&y, z) * psi.eval(Fx::NonZero(xi.mul(&y))).unwrap()
    })
}

/// V-sharp[s](x, y) = integral over xi of |xi|^(-2 s2) V-wedge[s](xi, -x/xi)
/// psi(-xi y) d xi. Canonical closed form:
/// Q^(-2 s2) 1_{|x| <= 1} 1_{|y| = 1} chi(y).
pub fn v_sharp(kernel: &KernelSpec, x: Fx, y: &ValuedUnit, s: &DeformParams) -> Cx {
    match kernel {
        KernelSpec::Canonical { chi } => {
            let inside_x = match x {
                Fx::Zero => true,
                Fx::NonZero(u) => u.v >= 0,
            };
            if !inside_x || y.v != 0 {
                return Cx::new(0.0, 0.0);
            }
            let q = chi.p as R;
            rpow(q, -s.s2 * 2.0 * chi.cond_exp() as R) * chi.eval(y).expect("precision")
        }
        KernelSpec::Tabulated { .. } => v_sharp_brute(kernel, x, y, s),
    }
}

/// Direct evaluation of the defining xi-integral; exact finite truncation:
/// V-wedge vanishes for |xi| > q^level (Fourier support) and the kernel's
/// z-support kills |xi| large relative to |x| (z = -x/xi leaves the support).
pub fn v_sharp_brute(kernel: &KernelSpec, x: Fx, y: &ValuedUnit, s: &DeformParams) -> Cx {
    let p = kernel.p();
    let q = p as R;
    let psi = AddChar::unramified(p);
    let z_min = match kernel {
        KernelSpec::Canonical { chi } => chi.cond_exp() as i32,
        KernelSpec::Tabulated { z_min, .. } => *z_min,
    };
    let a_lo = -(kernel.y_level() as i32);
    let a_hi = match x {
        Fx::Zero => a_lo - 1, // z = 0 for every xi: only if 0 >= z_min can
        Fx::NonZero(u) => u.v - z_min,
    };
    let mut acc = Cx::new(0.0, 0.0);
    // x = 0: z = 0 identically; the xi-integral only converges against the
    // kernel's deep-z row, summed as a geometric tail over annuli.
    if matches!(x, Fx::Zero) {
        for a in a_lo..=((-y.v).max(0) + kernel.y_level() as i32 + 2) {
            acc += annulus_term(kernel, p, a, Fx::Zero, y, s, &psi);
        }
        // |xi| <= q^-A with A past psi-triviality: constant integrand tail.
        let a_tail = (-y.v).max(0) + kernel.y_level() as i32 + 3;
        let deep = annulus_term(kernel, p, a_tail, Fx::Zero, y, s, &psi);
        // ratio between consecutive annuli: q^(-1 + 2 s2)
        let r = rpow(q, s.s2 * 2.0 - 1.0);
        acc += deep / (Cx::new(1.0, 0.0) - r);
        return acc;
    }
    for a in a_lo..=a_hi {
        let z_is_fixed_by_annulus = true;
        debug_assert!(z_is_fixed_by_annulus);
        acc += annulus_term(kernel, p, a, x, y, s, &psi);
    }
    acc
}

/// Contribution of {|xi| = q^-a} to the V-sharp integral (additive measure).
fn annulus_term(
    kernel: &KernelSpec,
    p: u64,
    a: i32,
    x: Fx,
    y: &ValuedUnit,
    s: &DeformParams,
    psi: &AddChar,
) -> Cx {
    let q = p as R;
    // Resolve the kernel's y-level, the psi(-xi y) oscillation, and (since
    // a >= -y_level) the xi-dependence of V-wedge.
    let level = kernel
        .y_level()
        .max((-(a + y.v)).max(0) as u32)
        .max(1);
    let v = unit_sum(p, level, |u| {
        let xi = ValuedUnit {
            p,
            v: a,
            unit: u,
            prec: level,
        };
        let z = x.mul(Fx::NonZero(xi.inv().neg()));
        let vw = v_wedge(kernel, &xi, z, s);
        let ps = psi.eval(Fx::NonZero(xi.mul(y)).mul(Fx::from_integer(p, -1, level)));
        vw * ps.unwrap()
    });
    // additive measure and the |xi|^(-2 s2) weight
    v * (q.powi(-a) as R) * rpow(q, s.s2 * 2.0 * a as R)
}

/// h-sharp(t) = integral over {|x| <= 1} of V-sharp(x, (x-t)/(x(1-x)))
/// dx / |x(1-x)|, summed over the strata |x| < 1, |x| = |1-x| = 1, |1-x| < 1.
/// The support constraint |x-t| = |x(1-x)| truncates each stratum exactly.
pub fn h_sharp(kernel: &KernelSpec, t: &ValuedUnit, s: &DeformParams) -> Result<Cx, Error> {
    let p = kernel.p();
    let n = kernel.y_level();
    let level = n + 2;
    if t.prec < level + 2 {
        return Err(Error::InsufficientPrecision {
            have: t.prec,
            need: level + 2,
        });
    }
    let tf = Fx::NonZero(*t);
    // |t| > 1 forces |x - t| = |t| > 1 > |x(1-x)|: empty support.
    if t.v < 0 {
        return Ok(Cx::new(0.0, 0.0));
    }
    let one = Fx::from_integer(p, 1, t.prec);
    let one_minus_t = one.sub(tf);
    let vt = t.v; // v(t) >= 0
    let ct = match one_minus_t {
        Fx::Zero => {
            return Err(Error::SingularArgument(format!(
                "t = 1 below working precision {}",
                t.prec
            )))
        }
        Fx::NonZero(u) => u.v,
    };
    let mut acc = Cx::new(0.0, 0.0);
    // stratum a = 0, c = 0 handled once; deeper strata bounded by the
    // support analysis: |x| strata need |t| <= |x|, |1-x| strata need
    // |1-t| <= |1-x|.
    for a in 0..=(vt.max(0) as u32) {
        acc += x_stratum_sum(kernel, t, s, level, a as i32, 0)?;
    }
    for c in 1..=(ct.max(0) as u32) {
        acc += x_stratum_sum(kernel, t, s, level, 0, c as i32)?;
    }
    Ok(acc)
}

/// Sum over one x-stratum: a >= 1 means x = p^a w, c >= 1 means x = 1 + p^c w,
/// a = c = 0 means |x| = |1-x| = 1. The measure dx/|x(1-x)| reduces to
/// q^-level * sum over unit residues w on every stratum.
fn x_stratum_sum(
    kernel: &KernelSpec,
    t: &ValuedUnit,
    s: &DeformParams,
    level: u32,
    a: i32,
    c: i32,
) -> Result<Cx, Error> {
    let p = kernel.p();
    let tf = Fx::NonZero(*t);
    let one = Fx::from_integer(p, 1, t.prec);
    Ok(unit_sum(p, level, |w| {
        let x = match (a, c) {
            (0, 0) => {
                if w % p == 1 {
                    return Cx::new(0.0, 0.0); // |1-x| < 1 belongs to c-strata
                }
                Fx::NonZero(ValuedUnit {
                    p,
                    v: 0,
                    unit: w,
                    prec: level,
                })
            }
            (a, 0) if a >= 1 => Fx::NonZero(ValuedUnit {
                p,
                v: a,
                unit: w,
                prec: level,
            }),
            (0, c) => one.add(Fx::NonZero(ValuedUnit {
                p,
                v: c,
                unit: w,
                prec: level,
            })),
            _ => unreachable!(),
        };
        let xu = match x {
            Fx::NonZero(u) => u,
            Fx::Zero => return Cx::new(0.0, 0.0),
        };
        let one_minus_x = one.sub(x);
        let omx = match one_minus_x {
            Fx::NonZero(u) => u,
            Fx::Zero => return Cx::new(0.0, 0.0),
        };
        // y = (x - t) / (x (1 - x)); the kernel needs |y| = 1.
        let diff = x.sub(tf);
        let y = match diff {
            Fx::Zero => return Cx::new(0.0, 0.0),
            Fx::NonZero(d) => d.mul(&xu.inv()).mul(&omx.inv()),
        };
        if y.v != 0 {
            return Cx::new(0.0, 0.0);
        }
        v_sharp(kernel, x, &y, s)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::MultChar;
    use crate::integrate::unit_sum;
    use crate::lfactors::gauss_sum;

    fn close(a: Cx, b: Cx, tol: R) -> bool {
        (a - b).norm() < tol
    }

    fn grid_s() -> Vec<DeformParams> {
        vec![
            DeformParams::zero(),
            DeformParams::new(Cx::new(0.05, 0.1), Cx::new(-0.03, 0.2), Cx::new(0.01, -0.1)),
            DeformParams::new(Cx::new(-0.1, 0.0), Cx::new(0.12, -0.3), Cx::new(0.0, 0.0)),
            DeformParams::new(Cx::new(0.0, 0.5), Cx::new(0.0, -0.5), Cx::new(0.1, 0.0)),
            DeformParams::new(Cx::new(0.15, 0.0), Cx::new(0.15, 0.0), Cx::new(-0.15, 0.0)),
        ]
    }

    #[test]
    fn v_wedge_support_and_value() {
        let chi = MultChar::new(5, 2, 3, 0.0, 0.0).unwrap();
        let kernel = KernelSpec::canonical(chi.clone()).unwrap();
        let s = DeformParams::zero();
        let z = Fx::Zero;
        // off-support |xi| != Q
        for v in [0i32, -1, -3, 1] {
            let xi = ValuedUnit::new(5, v, 1, 4).unwrap();
            assert!(v_wedge(&kernel, &xi, z, &s).norm() < 1e-12, "v={v}");
        }
        // |z| > 1/Q kills the kernel
        let xi = ValuedUnit::new(5, -2, 1, 4).unwrap();
        let zbig = Fx::NonZero(ValuedUnit::new(5, 1, 1, 4).unwrap());
        assert!(v_wedge(&kernel, &xi, zbig, &s).norm() < 1e-12);
        // on support: the integral is the Gauss sum (measures agree on units)
        let g = gauss_sum(&chi, &xi);
        assert!(close(v_wedge(&kernel, &xi, z, &s), g, 1e-12));
        assert!((g.norm() - 0.2).abs() < 1e-10); // q^(-n/2), q = 25 total
    }

    #[test]
    fn v_wedge_s_independent_on_support() {
        let chi = MultChar::new(5, 2, 7, 0.0, 0.0).unwrap();
        let kernel = KernelSpec::canonical(chi).unwrap();
        let xi = ValuedUnit::new(5, -2, 3, 4).unwrap();
        let z = Fx::NonZero(ValuedUnit::new(5, 2, 1, 4).unwrap());
        let base = v_wedge(&kernel, &xi, z, &DeformParams::zero());
        for s in grid_s() {
            assert!(close(v_wedge(&kernel, &xi, z, &s), base, 1e-12));
        }
    }

    #[test]
    fn v_sharp_canonical_closed_form_matches_brute() {
        let chi = MultChar::new(3, 2, 1, 0.0, 0.0).unwrap();
        let kernel = KernelSpec::canonical(chi).unwrap();
        for s in grid_s() {
            for (xv, yu) in [(0i32, 1u64), (1, 2), (2, 5), (0, 7)] {
                let x = if xv == 2 {
                    Fx::Zero
                } else {
                    Fx::NonZero(ValuedUnit::new(3, xv, 1, 6).unwrap())
                };
                let y = ValuedUnit::new(3, 0, yu, 6).unwrap();
                let closed = v_sharp(&kernel, x, &y, &s);
                let brute = v_sharp_brute(&kernel, x, &y, &s);
                assert!(
                    close(closed, brute, 1e-9),
                    "xv={xv} yu={yu} closed={closed} brute={brute}"
                );
            }
            // off-support y
            let y = ValuedUnit::new(3, 1, 1, 6).unwrap();
            let x = Fx::from_integer(3, 1, 6);
            assert!(v_sharp_brute(&kernel, x, &y, &s).norm() < 1e-9);
        }
    }

    #[test]
    fn v_sharp_closed_form_values() {
        let chi = MultChar::new(5, 2, 3, 0.0, 0.0).unwrap();
        let kernel = KernelSpec::canonical(chi.clone()).unwrap();
        let y = ValuedUnit::new(5, 0, 2, 4).unwrap();
        let x = Fx::from_integer(5, 3, 4);
        // s = 0: V-sharp = chi(y) on the support
        let v = v_sharp(&kernel, x, &y, &DeformParams::zero());
        assert!(close(v, chi.eval(&y).unwrap(), 1e-14));
        // |y| != 1 gives 0
        let ybad = ValuedUnit::new(5, -1, 1, 4).unwrap();
        assert!(v_sharp(&kernel, x, &ybad, &DeformParams::zero()).norm() < 1e-14);
    }

    fn small_tabulated_kernel() -> KernelSpec {
        // p = 3, level 2, z-rows at v(z) = 2 and deep; mildly oscillating.
        let p = 3u64;
        let level = 2u32;
        let count = unit_count(p, level);
        let mut rows = BTreeMap::new();
        for (zv, amp) in [(2i32, 0.7), (3, 1.0)] {
            let mut row = Vec::with_capacity(count);
            for u in 0..p.pow(level) {
                if u % p == 0 {
                    continue;
                }
                let ang = (u as R) * 2.4 + zv as R;
                row.push(Cx::from_polar(amp, ang));
            }
            rows.insert(zv, row);
        }
        KernelSpec::Tabulated {
            p,
            level,
            z_min: 2,
            z_deep: 3,
            rows,
        }
    }

    #[test]
    fn v_sharp_tabulated_matches_direct_double_sum() {
        // Independent direct evaluation of the defining double integral.
        let kernel = small_tabulated_kernel();
        let p = 3u64;
        let psi = AddChar::unramified(p);
        for s in grid_s().into_iter().take(3) {
            for (xv, yu) in [(0i32, 1u64), (1, 2), (0, 8)] {
                let x = Fx::NonZero(ValuedUnit::new(p, xv, 1, 8).unwrap());
                let y = ValuedUnit::new(p, 0, yu, 8).unwrap();
                let got = v_sharp(&kernel, x, &y, &s);
                // direct: sum over xi-annuli a, then over (xi, w) residues
                let mut want = Cx::new(0.0, 0.0);
                for a in -3i32..=3 {
                    let lev = 6u32;
                    let q = p as R;
                    let annulus = unit_sum(p, lev, |uxi| {
                        let xi = ValuedUnit {
                            p,
                            v: a,
                            unit: uxi,
                            prec: lev,
                        };
                        let z = x.mul(Fx::NonZero(xi.inv().neg()));
                        let inner = unit_sum(p, lev, |wy| {
                            let yy = ValuedUnit {
                                p,
                                v: 0,
                                unit: wy,
                                prec: lev,
                            };
                            kernel.eval(&yy, z)
                                * psi.eval(Fx::NonZero(xi.mul(&yy))).unwrap()
                        });
                        inner * psi
                            .eval(Fx::NonZero(xi.mul(&y).neg()))
                            .unwrap()
                    });
                    want += annulus * q.powi(-a) * rpow(q, s.s2 * 2.0 * a as R);
                }
                assert!(
                    close(got, want, 1e-9),
                    "xv={xv} yu={yu} got={got} want={want}"
                );
            }
        }
    }

    #[test]
    fn h_sharp_vanishes_for_large_t() {
        let chi = MultChar::new(5, 2, 3, 0.0, 0.0).unwrap();
        let kernel = KernelSpec::canonical(chi).unwrap();
        let t = ValuedUnit::new(5, -2, 1, 8).unwrap();
        let v = h_sharp(&kernel, &t, &DeformParams::zero()).unwrap();
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn h_sharp_matches_unstratified_brute_sum() {
        // Oracle: one flat sum over x mod p^L on {|x| <= 1} with the measure
        // and constraint applied pointwise, against the stratified evaluator.
        let p = 5u64;
        let chi = MultChar::new(p, 2, 3, 0.0, 0.0).unwrap();
        let kernel = KernelSpec::canonical(chi).unwrap();
        let s = DeformParams::new(Cx::new(0.05, 0.2), Cx::new(-0.08, 0.1), Cx::new(0.0, 0.0));
        for (tv, tu) in [(0i32, 2u64), (0, 7), (1, 1), (0, 6), (2, 3)] {
            let t = ValuedUnit::new(p, tv, tu, 10).unwrap();
            let got = h_sharp(&kernel, &t, &s).unwrap();
            let lev = 6u32;
            let q = p as R;
            let pm = p.pow(lev);
            let mut want = Cx::new(0.0, 0.0);
            for xr in 1..pm {
                let x = Fx::from_integer(p, xr as i64, lev);
                let xu = x.unit().unwrap();
                if xu.v < 0 {
                    continue;
                }
                let one = Fx::from_integer(p, 1, 10);
                let omx = match one.sub(x) {
                    Fx::Zero => continue,
                    Fx::NonZero(u) => u,
                };
                let y = match x.sub(Fx::NonZero(t)) {
                    Fx::Zero => continue,
                    Fx::NonZero(d) => d.mul(&xu.inv()).mul(&omx.inv()),
                };
                if y.v != 0 {
                    continue;
                }
                // additive cell volume q^-lev, measure divides |x(1-x)|
                let meas = q.powi(-(lev as i32)) * q.powi(xu.v + omx.v);
                want += v_sharp(&kernel, x, &y, &s) * meas;
            }
            assert!(
                close(got, want, 1e-9),
                "t=({tv},{tu}) got={got} want={want}"
            );
        }
    }
}
