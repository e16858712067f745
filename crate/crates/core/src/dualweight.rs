//! The dual weight h~(omega) and its dyadic pieces rho_{U,V}.
//!
//! rho_{U,V} integrates omega(uv-1) chi((1-1/u)/(1-1/v)) du dv/|uv| over the
//! annuli |u-1| = |u| = U, |v-1| = |v| = V, |uv-1| = UV.  The full weight is
//! assembled from the two-region split of the defining (x,t) integral:
//! h~ = S(omega) + chi(-1) S(omega^-1) - rho_{1,1}(omega), where S is the
//! dyadic sum over (U,V) weighted by (UV)^{-1/2} and the subtracted term is
//! the overlap {|x| = |t| = |1-x| = |1-t| = 1}.

use serde::Serialize;

use crate::characters::{is_atypical, MultChar, XiClass};
use crate::constants;
use crate::error::Error;
use crate::integrate::unit_sum;
use crate::padic::ResidueRing;
use crate::scalar::{Cx, R};

const ZERO: Cx = Cx::new(0.0, 0.0);

/// chi0 over residues mod p^level; zero at non-units.
fn char_table(chi: &MultChar, level: u32) -> Result<Vec<Cx>, Error> {
    let ring = ResidueRing::new(chi.p, level)?;
    let pm = ring.modulus();
    let mut tab = vec![ZERO; pm as usize];
    for r in 1..pm {
        if r % chi.p != 0 {
            tab[r as usize] = chi.eval_unit(r)?;
        }
    }
    Ok(tab)
}

fn inv_table(ring: &ResidueRing) -> Vec<u64> {
    let pm = ring.modulus();
    let mut tab = vec![0u64; pm as usize];
    for r in 1..pm {
        if ring.is_unit(r) {
            tab[r as usize] = ring.inv(r).expect("unit");
        }
    }
    tab
}

fn p_pow_mod(p: u64, e: u32, level: u32) -> u64 {
    if e >= level {
        0
    } else {
        p.pow(e)
    }
}

/// Exact residue double sum for rho_{U,V} at the given summation level.  The
/// integrand is constant on cosets mod p^max(cond chi, cond omega), so any
/// level at or above that maximum yields the same value.
pub(crate) fn rho_at_level(
    chi: &MultChar,
    omega: &MultChar,
    ju: u32,
    jv: u32,
    level: u32,
) -> Result<Cx, Error> {
    assert_eq!(chi.p, omega.p);
    let p = chi.p;
    let need = chi.n.max(omega.n).max(1);
    if level < need {
        return Err(Error::LevelTooLow { level, need });
    }
    let ring = ResidueRing::new(p, level)?;
    let pm = ring.modulus();
    let chi_tab = char_table(chi, level)?;
    let om_tab = char_table(omega, level)?;
    let inv = inv_table(&ring);
    let j = ju + jv;
    let pju = p_pow_mod(p, ju, level);
    let pjv = p_pow_mod(p, jv, level);
    let pj = p_pow_mod(p, j, level);
    let raw = unit_sum(p, level, |a| {
        if ju == 0 && a % p == 1 {
            return ZERO;
        }
        let amp = ring.sub(a, pju);
        let mut acc = ZERO;
        for b in 1..pm {
            if b % p == 0 || (jv == 0 && b % p == 1) {
                continue;
            }
            let w = ring.sub(ring.mul(a, b), pj);
            if j == 0 && w % p == 0 {
                continue;
            }
            let den = ring.mul(a, ring.sub(b, pjv));
            let arg = ring.mul(ring.mul(amp, b), inv[den as usize]);
            acc += om_tab[w as usize] * chi_tab[arg as usize];
        }
        acc
    });
    let q = p as R;
    Ok(omega.eval_unif_pow(-(j as i64)) * raw * q.powi(-(level as i32)))
}

/// rho_{U,V} by brute force, U = q^ju, V = q^jv.  The precision m covers the
/// dyadic shifts; the sum itself runs at the coset-constancy level.
pub fn rho_uv_brute(
    chi: &MultChar,
    omega: &MultChar,
    ju: u32,
    jv: u32,
    m: u32,
) -> Result<Cx, Error> {
    let need = chi.n.max(omega.n) + ju + jv;
    if m < need {
        return Err(Error::LevelTooLow { level: m, need });
    }
    let l = chi.n.max(omega.n).max(1);
    rho_at_level(chi, omega, ju, jv, m.min(l + 1))
}

/// Closed form for unramified omega: the exact value table times the phase
/// omega(p)^{-(ju+jv)} from omega(uv-1) on |uv-1| = UV.  None if omega is
/// ramified or chi is unramified.
pub fn rho_uv_closed(chi: &MultChar, omega: &MultChar, ju: u32, jv: u32) -> Option<Cx> {
    if omega.n != 0 || chi.n == 0 {
        return None;
    }
    let q = chi.p as R;
    let n = chi.n;
    let base: R = if (ju.min(jv) as i64) <= n as i64 - 2 {
        0.0
    } else if ju == 0 && jv == 0 {
        // reachable only at n = 1; the table's 2/q^2 presumes chi even
        let chi_m1 = chi.eval_unit(chi.conductor() - 1).expect("unit").re;
        (1.0 + chi_m1) / (q * q)
    } else if ju == jv && ju == n - 1 {
        1.0 / (q * q)
    } else if (ju == n - 1 && jv >= n) || (jv == n - 1 && ju >= n) {
        (-1.0 / q) * (1.0 - 1.0 / q)
    } else {
        (1.0 - 1.0 / q) * (1.0 - 1.0 / q)
    };
    Some(omega.eval_unif_pow(-((ju + jv) as i64)) * base)
}

/// For ramified omega, every piece vanishes except U = V = Q/C(omega).
pub fn rho_uv_vanishes(chi: &MultChar, omega: &MultChar, ju: u32, jv: u32) -> bool {
    omega.n >= 1 && !(ju == jv && omega.n <= chi.n && ju == chi.n - omega.n)
}

/// Stationary-phase evaluation of rho_{U,V} in the regime
/// q <= C(omega) <= Q/V, U <= V < Q, Q/U >= q^2.  Cosets mod p^h with
/// 2h >= level are exact characters in both lift directions, so a coset
/// contributes iff both probe ratios equal 1, and then contributes its base
/// value times the full lift count.
pub fn rho_uv_fast(chi: &MultChar, omega: &MultChar, ju: u32, jv: u32) -> Result<Cx, Error> {
    assert_eq!(chi.p, omega.p);
    if ju > jv {
        // rho_{U,V}(chi, omega) = rho_{V,U}(chi^-1, omega)
        return rho_uv_fast(&chi.inverse(), omega, jv, ju);
    }
    let n = chi.n;
    let c = omega.n;
    if !(c >= 1 && c + jv <= n && jv < n && n - ju >= 2) {
        return Err(Error::RegimeMismatch(format!(
            "need q <= C(omega) <= Q/V, U <= V < Q, Q/U >= q^2; got n={n}, c={c}, ju={ju}, jv={jv}"
        )));
    }
    let p = chi.p;
    let l = n.max(c);
    let h = l.div_ceil(2);
    let ring = ResidueRing::new(p, l)?;
    let chi_tab = char_table(chi, l)?;
    let om_tab = char_table(omega, l)?;
    let inv = inv_table(&ring);
    let j = ju + jv;
    let pju = p_pow_mod(p, ju, l);
    let pjv = p_pow_mod(p, jv, l);
    let pj = p_pow_mod(p, j, l);
    let f = |a: u64, b: u64| -> Cx {
        if (ju == 0 && a % p == 1) || (jv == 0 && b % p == 1) {
            return ZERO;
        }
        let w = ring.sub(ring.mul(a, b), pj);
        if j == 0 && w % p == 0 {
            return ZERO;
        }
        let den = ring.mul(a, ring.sub(b, pjv));
        let arg = ring.mul(ring.mul(ring.sub(a, pju), b), inv[den as usize]);
        om_tab[w as usize] * chi_tab[arg as usize]
    };
    let g = 1 + p.pow(h);
    let ph = p.pow(h);
    // probe ratios are p^(l-h)-th roots of unity: exactly 1 or well separated
    let tol = (std::f64::consts::PI / p.pow(l - h) as R).sin().max(1e-9);
    let q = p as R;
    let raw = unit_sum(p, h, |a0| {
        let f_a = |b: u64| f(a0, b);
        let f_ga = |b: u64| f(ring.mul(a0, g), b);
        let mut acc = ZERO;
        for b0 in 1..ph {
            if b0 % p == 0 {
                continue;
            }
            let f0 = f_a(b0);
            if f0 == ZERO {
                continue;
            }
            let za = f_ga(b0) / f0 - 1.0;
            let zb = f_a(ring.mul(b0, g)) / f0 - 1.0;
            if za.norm() < tol && zb.norm() < tol {
                acc += f0;
            }
        }
        acc
    });
    Ok(omega.eval_unif_pow(-(j as i64)) * raw * q.powi(-(h as i32)))
}

/// Sum of (UV)^{-1/2} rho_{U,V} over the full dyadic range for unramified
/// omega; with `grid` set, the partial sum over exponents 0..=jmax instead.
fn closed_s(chi: &MultChar, omega: &MultChar, grid: Option<u32>) -> Result<Cx, Error> {
    debug_assert_eq!(omega.n, 0);
    let q = chi.p as R;
    let n = chi.n;
    if let Some(jmax) = grid {
        let mut acc = ZERO;
        for ju in 0..=jmax {
            for jv in 0..=jmax {
                let w = q.powf(-((ju + jv) as R) / 2.0);
                acc += rho_uv_closed(chi, omega, ju, jv).expect("unramified") * w;
            }
        }
        return Ok(acc);
    }
    let y = omega.eval_unif_pow(-1) * q.powf(-0.5);
    if (y - 1.0).norm() < 1e-6 {
        return Err(Error::NearPole((y - 1.0).norm()));
    }
    let tail = y.powu(n) / (1.0 - y);
    let core = y.powu(n - 1) / q - (1.0 - 1.0 / q) * tail;
    let mut s = core * core;
    if n == 1 {
        // the (0,0) cell is (1 + chi(-1))/q^2, one q^-2 above the square
        s += chi.eval_unit(chi.conductor() - 1)?.re / (q * q);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundClass {
    #[serde(rename = "unramified-O(1)")]
    UnramifiedO1,
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "generic-O(1/Q)")]
    GenericOverQ,
    #[serde(rename = "atypical")]
    Atypical,
}

#[derive(Debug, Clone, Serialize)]
pub struct PieceEntry {
    pub ju: u32,
    pub jv: u32,
    pub rho_re: R,
    pub rho_im: R,
    pub rho_inv_re: R,
    pub rho_inv_im: R,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualWeightReport {
    pub chi: String,
    pub omega: String,
    pub value_re: R,
    pub value_im: R,
    pub pieces: Vec<PieceEntry>,
    pub atypical: Option<XiClass>,
    pub bound_class: BoundClass,
    pub max_ratio: R,
}

impl DualWeightReport {
    pub fn value(&self) -> Cx {
        Cx::new(self.value_re, self.value_im)
    }
}

/// h~(omega) with each grid piece evaluated by the cheapest exact route:
/// closed forms for unramified omega, the proved vanishing plus the
/// stationary-phase evaluator (brute force off its regime) otherwise.
pub fn dual_weight(chi: &MultChar, omega: &MultChar) -> Result<DualWeightReport, Error> {
    build_report(chi, omega, false)
}

/// h~(omega) with every grid piece evaluated by the brute-force double sum.
pub fn dual_weight_exhaustive(chi: &MultChar, omega: &MultChar) -> Result<DualWeightReport, Error> {
    build_report(chi, omega, true)
}

fn build_report(chi: &MultChar, omega: &MultChar, exhaustive: bool) -> Result<DualWeightReport, Error> {
    assert_eq!(chi.p, omega.p);
    if chi.n == 0 {
        return Err(Error::BadSpec("dual weight needs ramified chi".into()));
    }
    let p = chi.p;
    let q = p as R;
    let n = chi.n;
    let c = omega.n;
    let chi_m1 = chi.eval_unit(chi.conductor() - 1)?;
    let omi = omega.inverse();
    let jmax = n + 1;
    let piece = |om: &MultChar, ju: u32, jv: u32| -> Result<Cx, Error> {
        if exhaustive {
            return rho_uv_brute(chi, om, ju, jv, n.max(c) + ju + jv);
        }
        if c == 0 {
            return Ok(rho_uv_closed(chi, om, ju, jv).expect("unramified"));
        }
        if rho_uv_vanishes(chi, om, ju, jv) {
            return Ok(ZERO);
        }
        match rho_uv_fast(chi, om, ju, jv) {
            Err(Error::RegimeMismatch(_)) => rho_uv_brute(chi, om, ju, jv, n.max(c) + ju + jv),
            other => other,
        }
    };
    let mut pieces = Vec::new();
    let mut sum_o = ZERO;
    let mut sum_oi = ZERO;
    let mut rho11 = ZERO;
    let mut max_ratio: R = 0.0;
    for ju in 0..=jmax {
        for jv in 0..=jmax {
            let ro = piece(omega, ju, jv)?;
            let ri = piece(&omi, ju, jv)?;
            let w = q.powf(-((ju + jv) as R) / 2.0);
            sum_o += ro * w;
            sum_oi += ri * w;
            if ju == 0 && jv == 0 {
                rho11 = ro;
            }
            max_ratio = max_ratio.max(ro.norm().max(ri.norm()) * q.powi(n as i32) * w);
            pieces.push(PieceEntry {
                ju,
                jv,
                rho_re: ro.re,
                rho_im: ro.im,
                rho_inv_re: ri.re,
                rho_inv_im: ri.im,
            });
        }
    }
    let mut value = sum_o + chi_m1 * sum_oi - rho11;
    if c == 0 {
        // exact geometric tail beyond the grid
        let tail_o = closed_s(chi, omega, None)? - closed_s(chi, omega, Some(jmax))?;
        let tail_oi = closed_s(chi, &omi, None)? - closed_s(chi, &omi, Some(jmax))?;
        value += tail_o + chi_m1 * tail_oi;
    }
    let (atyp, cls) = is_atypical(chi, omega);
    let bound_class = if c == 0 {
        BoundClass::UnramifiedO1
    } else if c > n {
        BoundClass::Zero
    } else if atyp {
        BoundClass::Atypical
    } else {
        BoundClass::GenericOverQ
    };
    Ok(DualWeightReport {
        chi: chi.spec_string(),
        omega: omega.spec_string(),
        value_re: value.re,
        value_im: value.im,
        pieces,
        atypical: cls,
        bound_class,
        max_ratio,
    })
}

/// Check |h~| against the bound matching the report's class.  Returns pass
/// plus one ledger line per violated bound.
pub fn classify_bounds(report: &DualWeightReport) -> (bool, Vec<String>) {
    let chi = match crate::characters::parse_char_spec(&report.chi) {
        Ok(c) => c,
        Err(e) => return (false, vec![format!("bad chi spec in report: {e}")]),
    };
    let q = chi.p as R;
    let cap_q = q.powi(chi.n as i32);
    let v = report.value().norm();
    let mut ledger = Vec::new();
    let bound = match report.bound_class {
        BoundClass::Zero => constants::ZERO_TOL_PER_TERM * (report.pieces.len() + 1) as R,
        BoundClass::UnramifiedO1 => constants::HTILDE_UNRAMIFIED_MAX,
        BoundClass::GenericOverQ => constants::HTILDE_GENERIC_RATIO_MAX / cap_q,
        BoundClass::Atypical => {
            let cls = report.atypical.as_ref();
            let n_alpha = cls.map_or(0, |c| c.n_alpha) as R;
            let odd_boost = if chi.n % 2 == 1 { q.sqrt() } else { 1.0 };
            constants::HTILDE_ATYPICAL_RATIO_MAX * n_alpha * odd_boost / cap_q
        }
    };
    if v > bound {
        ledger.push(format!(
            "|h~| = {v:.6e} exceeds {:?} bound {bound:.6e} for chi={}, omega={}",
            report.bound_class, report.chi, report.omega
        ));
    }
    (ledger.is_empty(), ledger)
}

/// Full-domain evaluation of the defining (x,t) integral for the canonical
/// kernel, summed stratum by stratum to the given dyadic depth.  Region
/// {|1-x| = |1-t| = 1} is parametrized by x = p^a w, t = p^(a+e) w mu; region
/// {|x| = |t| = 1} by x = 1 - p^c nu, t = 1 - p^(c+d) nu tau; the overlap is
/// the (0,0) stratum.  Tail beyond `depth` is O(depth q^(-depth/2)).
pub fn h_tilde_brute(chi: &MultChar, omega: &MultChar, depth: u32) -> Result<Cx, Error> {
    assert_eq!(chi.p, omega.p);
    let p = chi.p;
    let m = chi.n.max(omega.n).max(1);
    let ring = ResidueRing::new(p, m)?;
    let pm = ring.modulus();
    let chi_tab = char_table(chi, m)?;
    let om_tab = char_table(omega, m)?;
    let inv = inv_table(&ring);
    let q = p as R;
    let mut total = ZERO;
    let mut overlap = ZERO;
    for a in 0..=depth {
        for e in 0..=depth {
            let d = a + e;
            let pa = p_pow_mod(p, a, m);
            let pe = p_pow_mod(p, e, m);
            let pd = p_pow_mod(p, d, m);
            let om_p = omega.eval_unif_pow(-(d as i64));
            let mut s = ZERO;
            for w in 1..pm {
                if w % p == 0 || (a == 0 && w % p == 1) {
                    continue;
                }
                let cden = inv[ring.sub(1, ring.mul(pa, w)) as usize];
                for mu in 1..pm {
                    if mu % p == 0 || (e == 0 && mu % p == 1) {
                        continue;
                    }
                    let wmu = ring.mul(w, mu);
                    if d == 0 && wmu % p == 1 {
                        continue;
                    }
                    // omega((1-t)/t), t = p^d w mu
                    let ou = ring.mul(ring.sub(1, ring.mul(pd, wmu)), inv[wmu as usize]);
                    // chi((x-t)/(x(1-x))) = chi((1 - p^e mu)/(1 - p^a w))
                    let carg = ring.mul(ring.sub(1, ring.mul(pe, mu)), cden);
                    s += om_p * om_tab[ou as usize] * chi_tab[carg as usize];
                }
            }
            let scaled = s * q.powf(-(d as R) / 2.0) * q.powi(-2 * (m as i32));
            total += scaled;
            if d == 0 {
                overlap = scaled;
            }
        }
    }
    for c in 0..=depth {
        for d in 0..=depth {
            let dt = c + d;
            let pc = p_pow_mod(p, c, m);
            let pdl = p_pow_mod(p, d, m);
            let pdt = p_pow_mod(p, dt, m);
            let om_p = omega.eval_unif_pow(dt as i64);
            let mut s = ZERO;
            for nu in 1..pm {
                if nu % p == 0 || (c == 0 && nu % p == 1) {
                    continue;
                }
                let xinv = inv[ring.sub(1, ring.mul(pc, nu)) as usize];
                for tau in 1..pm {
                    if tau % p == 0 || (d == 0 && tau % p == 1) {
                        continue;
                    }
                    let nutau = ring.mul(nu, tau);
                    if dt == 0 && nutau % p == 1 {
                        continue;
                    }
                    // omega((1-t)/t), 1 - t = p^(c+d) nu tau
                    let ou = ring.mul(nutau, inv[ring.sub(1, ring.mul(pdt, nutau)) as usize]);
                    // chi((x-t)/(x(1-x))) = chi((p^d tau - 1)/x)
                    let carg = ring.mul(ring.sub(ring.mul(pdl, tau), 1), xinv);
                    s += om_p * om_tab[ou as usize] * chi_tab[carg as usize];
                }
            }
            total += s * q.powf(-(dt as R) / 2.0) * q.powi(-2 * (m as i32));
        }
    }
    Ok(total - overlap)
}
