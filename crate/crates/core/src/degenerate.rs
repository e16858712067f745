//! Local factors for the degenerate terms: the character integrals D_{U,V},
//! the constants c0, c1, c2 they concentrate into, the geometric-series
//! closed forms D_1, D_2, D_3, and the normalized double Hecke integral
//! D*(nu) with a brute-force cross-check.
//!
//! D* divides D_1 + D_2 - D_3 by the principal-series L-factors
//! L(I(s_i), 1/2 + nu_i) = zeta(1/2 + nu_i + s_i) zeta(1/2 + nu_i - s_i),
//! which clears every geometric denominator; the closed form is computed in
//! that cleared shape, so it is pole-free on the whole parameter region.

use serde::Serialize;

use crate::characters::MultChar;
use crate::dualweight::{rho_uv_brute, rho_uv_closed};
use crate::error::Error;
use crate::integrate::{abs_pow, rpow, unit_sum};
use crate::padic::ResidueRing;
use crate::scalar::{Cx, R};
use crate::transforms::DeformParams;

const ZERO: Cx = Cx::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Brute,
    Closed,
}

/// The single-variable integral of chi(1 - 1/u) over |u| = |1 - u| = U,
/// measure du/|u|: 0 for U <= Q/q^2, -1/q at U = Q/q, 1 - 1/q for U >= Q.
pub fn single_var(chi: &MultChar, ju: u32) -> Result<Cx, Error> {
    if chi.n == 0 {
        return Err(Error::BadSpec("single_var needs ramified chi".into()));
    }
    let q = chi.p as R;
    let v: R = if (ju as i64) <= chi.n as i64 - 2 {
        0.0
    } else if ju == chi.n - 1 {
        -1.0 / q
    } else {
        1.0 - 1.0 / q
    };
    Ok(Cx::new(v, 0.0))
}

/// Brute-force counterpart of `single_var` at the coset-constancy level.
pub fn single_var_brute(chi: &MultChar, ju: u32) -> Result<Cx, Error> {
    if chi.n == 0 {
        return Err(Error::BadSpec("single_var needs ramified chi".into()));
    }
    let p = chi.p;
    let level = chi.n;
    let ring = ResidueRing::new(p, level)?;
    let pju = if ju >= level { 0 } else { p.pow(ju) };
    Ok(unit_sum(p, level, |a| {
        if ju == 0 && a % p == 1 {
            return ZERO;
        }
        let arg = ring.mul(ring.sub(a, pju), ring.inv(a).expect("unit"));
        chi.eval_unit(arg).expect("unit")
    }))
}

/// D_{U,V}: the omega-free dyadic integral, U = q^ju, V = q^jv.
pub fn d_uv(chi: &MultChar, ju: u32, jv: u32, mode: EvalMode) -> Result<Cx, Error> {
    let triv = MultChar::trivial(chi.p);
    match mode {
        EvalMode::Brute => rho_uv_brute(chi, &triv, ju, jv, chi.n + ju + jv),
        EvalMode::Closed => rho_uv_closed(chi, &triv, ju, jv)
            .ok_or_else(|| Error::BadSpec("d_uv needs ramified chi".into())),
    }
}

/// (c0, c1, c2) read off the three nonvanishing D cells:
/// D_{Q/q,Q/q} = c0/q^2, D_{Q/q,V>=Q} = c1/q, D_{U,V>=Q} = c2.
pub fn c_constants(chi: &MultChar) -> Result<(R, R, R), Error> {
    if chi.n == 0 {
        return Err(Error::BadSpec("c-constants need ramified chi".into()));
    }
    let q = chi.p as R;
    let n = chi.n;
    let c0 = d_uv(chi, n - 1, n - 1, EvalMode::Closed)?.re * q * q;
    let c1 = d_uv(chi, n - 1, n, EvalMode::Closed)?.re * q;
    let c2 = d_uv(chi, n, n, EvalMode::Closed)?.re;
    Ok((c0, c1, c2))
}

fn chi_minus_one(chi: &MultChar) -> Result<R, Error> {
    Ok(chi.eval_unit(chi.conductor() - 1)?.re)
}

fn pick(i: usize, s: &DeformParams, nu: (Cx, Cx)) -> (Cx, Cx) {
    match i {
        1 => (s.s1, nu.0),
        2 => (s.s2, nu.1),
        _ => panic!("i must be 1 or 2"),
    }
}

/// D_i * P_i where P_i = (1 - q^(-1/2+s_i-nu_i))(1 - q^(-1/2-s_i-nu_i)) is
/// the reciprocal of L(I(s_i), 1/2 + nu_i).  Pole-free.
fn d_i_cleared(chi: &MultChar, i: usize, s: &DeformParams, nu: (Cx, Cx)) -> Result<Cx, Error> {
    let q = chi.p as R;
    let cap_q = q.powi(chi.n as i32);
    let (c0, c1, c2) = c_constants(chi)?;
    let (si, ni) = pick(i, s, nu);
    let sign = if i == 1 { chi_minus_one(chi)? } else { 1.0 };
    let a = rpow(q, -0.5 + si - ni);
    let b = rpow(q, -0.5 - si - ni);
    let bracket = c0 / (q * q) * rpow(q, 1.0 + 2.0 * ni) * (1.0 - a) * (1.0 - b)
        + c1 / q * (rpow(q, 0.5 + si + ni) * (1.0 - b) + rpow(q, 0.5 - si + ni) * (1.0 - a))
        + c2;
    Ok(sign * rpow(cap_q, -1.0 - 2.0 * ni - 2.0 * s.s2) * bracket)
}

/// Closed form for D_i (i = 1 or 2) with its geometric-series denominators.
pub fn d_i_closed(chi: &MultChar, i: usize, s: &DeformParams, nu: (Cx, Cx)) -> Result<Cx, Error> {
    let q = chi.p as R;
    let (si, ni) = pick(i, s, nu);
    let pi = (1.0 - rpow(q, -0.5 + si - ni)) * (1.0 - rpow(q, -0.5 - si - ni));
    if pi.norm() < 1e-3 {
        return Err(Error::NearPole(pi.norm()));
    }
    Ok(d_i_cleared(chi, i, s, nu)? / pi)
}

/// D_3 = Q^(-2 s_2) D_{1,1}: the all-units overlap contribution.
pub fn d3_closed(chi: &MultChar, s: &DeformParams) -> Result<Cx, Error> {
    let cap_q = (chi.p as R).powi(chi.n as i32);
    Ok(rpow(cap_q, -2.0 * s.s2) * d_uv(chi, 0, 0, EvalMode::Closed)?)
}

fn convergence_margin(s: &DeformParams, nu: (Cx, Cx)) -> R {
    let mut m = R::INFINITY;
    for i in [1, 2] {
        let (si, ni) = pick(i, s, nu);
        m = m.min(0.5 + ni.re - si.re.abs());
    }
    m
}

/// The D_0 double integral over (x, t), evaluated stratum by stratum as in
/// `dualweight::h_tilde_brute` but with the |.|-power weights of the
/// degenerate kernel.  Converges only for positive margin
/// min_i (1/2 + Re nu_i - |Re s_i|); tail is O(depth q^(-depth * margin)).
pub fn d0_brute(
    chi: &MultChar,
    s: &DeformParams,
    nu: (Cx, Cx),
    depth: u32,
) -> Result<Cx, Error> {
    if chi.n == 0 {
        return Err(Error::BadSpec("degenerate factor needs ramified chi".into()));
    }
    let p = chi.p;
    let q = p as R;
    let m = chi.n;
    let ring = ResidueRing::new(p, m)?;
    let pm = ring.modulus();
    let mut chi_tab = vec![ZERO; pm as usize];
    let mut inv = vec![0u64; pm as usize];
    for r in 1..pm {
        if r % p != 0 {
            chi_tab[r as usize] = chi.eval_unit(r)?;
            inv[r as usize] = ring.inv(r)?;
        }
    }
    let base = q.powi(-2 * (m as i32));
    let ppow = |e: u32| if e >= m { 0 } else { p.pow(e) };
    let mut total = ZERO;
    let mut overlap = ZERO;
    // region {|1-x| = |1-t| = 1}: x = p^a w, t = p^(a+e) w mu; weights in
    // (s_2, nu_2):  |t|^(1/2 + nu_2 - s_2) |x|^(2 s_2)
    for a in 0..=depth {
        for e in 0..=depth {
            let d = a + e;
            let (pa, pe) = (ppow(a), ppow(e));
            let mut sum = ZERO;
            for w in 1..pm {
                if w % p == 0 || (a == 0 && w % p == 1) {
                    continue;
                }
                let cden = inv[ring.sub(1, ring.mul(pa, w)) as usize];
                for mu in 1..pm {
                    if mu % p == 0 || (e == 0 && mu % p == 1) {
                        continue;
                    }
                    if d == 0 && ring.mul(w, mu) % p == 1 {
                        continue;
                    }
                    sum += chi_tab[ring.mul(ring.sub(1, ring.mul(pe, mu)), cden) as usize];
                }
            }
            let weight = abs_pow(p, d as i32, 0.5 + nu.1 - s.s2) * abs_pow(p, a as i32, 2.0 * s.s2);
            let scaled = sum * weight * base;
            total += scaled;
            if d == 0 {
                overlap = scaled;
            }
        }
    }
    // region {|x| = |t| = 1}: x = 1 - p^c nu, t = 1 - p^(c+d) nu tau;
    // weights in (s_1, nu_1):  |1-t|^(1/2 + nu_1 - s_1) |1-x|^(2 s_1)
    for c in 0..=depth {
        for d in 0..=depth {
            let dt = c + d;
            let (pc, pdl) = (ppow(c), ppow(d));
            let mut sum = ZERO;
            for nv in 1..pm {
                if nv % p == 0 || (c == 0 && nv % p == 1) {
                    continue;
                }
                let xinv = inv[ring.sub(1, ring.mul(pc, nv)) as usize];
                for tau in 1..pm {
                    if tau % p == 0 || (d == 0 && tau % p == 1) {
                        continue;
                    }
                    if dt == 0 && ring.mul(nv, tau) % p == 1 {
                        continue;
                    }
                    sum += chi_tab[ring.mul(ring.sub(ring.mul(pdl, tau), 1), xinv) as usize];
                }
            }
            let weight =
                abs_pow(p, dt as i32, 0.5 + nu.0 - s.s1) * abs_pow(p, c as i32, 2.0 * s.s1);
            total += sum * weight * base;
        }
    }
    let cap_q = q.powi(chi.n as i32);
    Ok(rpow(cap_q, -2.0 * s.s2) * (total - overlap))
}

/// The normalized double Hecke integral D*(nu).  Closed mode assembles the
/// cleared forms E_i = D_i / L(I(s_i), 1/2 + nu_i); brute mode integrates
/// D_0 directly and multiplies by the reciprocal L-factors.
pub fn d_f_star(
    chi: &MultChar,
    s: &DeformParams,
    nu: (Cx, Cx),
    mode: EvalMode,
) -> Result<Cx, Error> {
    let q = chi.p as R;
    let recip = |i: usize| -> Cx {
        let (si, ni) = pick(i, s, nu);
        (1.0 - rpow(q, -0.5 + si - ni)) * (1.0 - rpow(q, -0.5 - si - ni))
    };
    let (p1, p2) = (recip(1), recip(2));
    match mode {
        EvalMode::Closed => {
            let e1 = d_i_cleared(chi, 1, s, nu)?;
            let e2 = d_i_cleared(chi, 2, s, nu)?;
            Ok(e1 * p2 + e2 * p1 - d3_closed(chi, s)? * p1 * p2)
        }
        EvalMode::Brute => {
            let margin = convergence_margin(s, nu);
            if margin < 0.05 {
                return Err(Error::RegimeMismatch(format!(
                    "brute D_0 needs convergence margin >= 0.05, got {margin:.4}"
                )));
            }
            let depth = ((23.0 / (margin * q.ln())).ceil() as u32).clamp(40, 400);
            Ok(d0_brute(chi, s, nu, depth)? * p1 * p2)
        }
    }
}

/// One D* evaluation with its inputs and the c-constants, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct DegenEval {
    pub chi: String,
    pub s: [[R; 2]; 3],
    pub nu: [[R; 2]; 2],
    pub c0: R,
    pub c1: R,
    pub c2: R,
    pub d_star_re: R,
    pub d_star_im: R,
}

pub fn degen_eval(chi: &MultChar, s: &DeformParams, nu: (Cx, Cx)) -> Result<DegenEval, Error> {
    let (c0, c1, c2) = c_constants(chi)?;
    let d = d_f_star(chi, s, nu, EvalMode::Closed)?;
    Ok(DegenEval {
        chi: chi.spec_string(),
        s: [[s.s1.re, s.s1.im], [s.s2.re, s.s2.im], [s.s3.re, s.s3.im]],
        nu: [[nu.0.re, nu.0.im], [nu.1.re, nu.1.im]],
        c0,
        c1,
        c2,
        d_star_re: d.re,
        d_star_im: d.im,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightNormReport {
    pub chi: String,
    pub alpha: R,
    pub grid: String,
    pub sup_estimate: R,
    pub c0: R,
    pub c1: R,
    pub c2: R,
}

/// Grid points for one complex variable: the origin plus rings at the fixed
/// radius ladder 0.1 * 2^-k intersected with [0, alpha].  The ladder makes
/// point sets nested in alpha, so the reported sup is monotone in alpha.
fn disk_grid(alpha: R, density: u32) -> Vec<Cx> {
    let mut pts = vec![ZERO];
    let mut r: R = 0.1;
    for _ in 0..5 {
        if r <= alpha {
            for j in 0..density {
                let th = 2.0 * std::f64::consts::PI * j as R / density as R;
                pts.push(Cx::from_polar(r, th));
            }
        }
        r /= 2.0;
    }
    pts
}

/// Grid-sampled sup of |D*| over the weight-norm region: |s_i| <= alpha and,
/// for one of the two sign choices, |nu_1 -+ 1/2|, |nu_2 +- 1/2| <= alpha.
/// An approximation from below; the grid metadata rides along in the report.
/// The value does not depend on s_3, so only s_1 and s_2 are scanned.
pub fn n_alpha_weightnorm(
    chi: &MultChar,
    alpha: R,
    grid_density: u32,
) -> Result<WeightNormReport, Error> {
    assert!(alpha <= 0.1, "weight-norm region is defined for small alpha");
    let pts = disk_grid(alpha, grid_density);
    let mut sup: R = 0.0;
    for sign in [1.0, -1.0] {
        for s1 in &pts {
            for s2 in &pts {
                let s = DeformParams::new(*s1, *s2, ZERO);
                for n1 in &pts {
                    for n2 in &pts {
                        let nu = (n1 + sign * 0.5, n2 - sign * 0.5);
                        let v = d_f_star(chi, &s, nu, EvalMode::Closed)?.norm();
                        sup = sup.max(v);
                    }
                }
            }
        }
    }
    let (c0, c1, c2) = c_constants(chi)?;
    Ok(WeightNormReport {
        chi: chi.spec_string(),
        alpha,
        grid: format!(
            "origin + radius ladder 0.1*2^-k <= alpha, {grid_density} points per ring, vars s1,s2,nu1,nu2, both signs"
        ),
        sup_estimate: sup,
        c0,
        c1,
        c2,
    })
}
