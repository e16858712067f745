//! Multiplicative characters of F^x and additive characters of F at finite
//! level, conductor arithmetic, and the xi-class / atypical-pair machinery.
//!
//! A character is stored by its rotation number at a fixed generator of the
//! cyclic group (Z/p^n)^x, with a precomputed discrete-log table so that
//! evaluation is O(1) after O(p^n) setup.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::Error;
use crate::padic::{exp_level, is_prime, quadratic_roots, val_unit, Fx, ResidueRing, ValuedUnit};
use crate::scalar::{e_frac, Cx, R};

/// Discrete logs on (Z/p^n)^x with respect to the least primitive root.
#[derive(Debug)]
pub struct DlogTable {
    pub p: u64,
    pub n: u32,
    pub modulus: u64,
    pub phi: u64,
    pub gen: u64,
    dlog: Vec<u32>,
}

const NON_UNIT: u32 = u32::MAX;

impl DlogTable {
    fn build(p: u64, n: u32) -> Result<Arc<Self>, Error> {
        let ring = ResidueRing::new(p, n)?;
        let pm = ring.modulus();
        let phi = pm / p * (p - 1);
        let gen = least_primitive_root(p, n)?;
        let mut dlog = vec![NON_UNIT; pm as usize];
        let mut x = 1u64;
        for e in 0..phi {
            debug_assert!(dlog[x as usize] == NON_UNIT || e == 0);
            if dlog[x as usize] != NON_UNIT {
                break;
            }
            dlog[x as usize] = e as u32;
            x = ring.mul(x, gen);
        }
        Ok(Arc::new(Self {
            p,
            n,
            modulus: pm,
            phi,
            gen,
            dlog,
        }))
    }

    /// Cached per (p, n); tables are immutable after construction.
    pub fn get(p: u64, n: u32) -> Result<Arc<Self>, Error> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, u32), Arc<DlogTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&(p, n)) {
            return Ok(t.clone());
        }
        let t = Self::build(p, n)?;
        cache.lock().unwrap().insert((p, n), t.clone());
        Ok(t)
    }

    pub fn dlog(&self, u: u64) -> Result<u64, Error> {
        let u = u % self.modulus;
        let d = self.dlog[u as usize];
        if d == NON_UNIT {
            return Err(Error::NotAUnit {
                a: u,
                p: self.p,
                m: self.n,
            });
        }
        Ok(d as u64)
    }
}

/// Least primitive root mod p^n (for n >= 2: least g primitive mod p with
/// g^(p-1) != 1 mod p^2, which is then primitive at every level).
fn least_primitive_root(p: u64, n: u32) -> Result<u64, Error> {
    if !is_prime(p) || p == 2 {
        return Err(Error::NotOddPrime(p));
    }
    let mut fac = Vec::new();
    let mut r = p - 1;
    let mut d = 2;
    while d * d <= r {
        if r % d == 0 {
            fac.push(d);
            while r % d == 0 {
                r /= d;
            }
        }
        d += 1;
    }
    if r > 1 {
        fac.push(r);
    }
    let ring1 = ResidueRing::new(p, 1)?;
    let ring2 = ResidueRing::new(p, 2)?;
    let limit = if n == 1 { p } else { p * p };
    for g in 2..limit {
        if g % p == 0 {
            continue;
        }
        if fac.iter().all(|&f| ring1.pow(g % p, (p - 1) / f) != 1)
            && (n == 1 || ring2.pow(g, p - 1) != 1)
        {
            return Ok(g);
        }
    }
    unreachable!("every odd prime power has a primitive root")
}

/// Character of F^x: chi(p^v u) = e(v*theta) q^(-v*sigma) chi0(u), with the
/// unit part chi0 determined by its rotation k: chi0(gen) = e(k/phi).
/// The conductor exponent n is always minimal for the stored k.
#[derive(Debug, Clone)]
pub struct MultChar {
    pub p: u64,
    pub n: u32,
    pub k: u64,
    pub theta: R,
    pub sigma: R,
    table: Option<Arc<DlogTable>>,
}

impl MultChar {
    pub fn new(p: u64, n: u32, k: u64, theta: R, sigma: R) -> Result<Self, Error> {
        if n == 0 {
            return Ok(Self {
                p,
                n: 0,
                k: 0,
                theta,
                sigma,
                table: None,
            });
        }
        let table = DlogTable::get(p, n)?;
        let k = k % table.phi;
        // Minimal conductor: trivial on 1 + p^j iff p^(n-j) | k.
        let n_min = if k == 0 {
            0
        } else {
            let (vk, _) = val_unit(p, k);
            n.saturating_sub(vk.min(n - 1)).max(1)
        };
        if n_min == 0 {
            return Ok(Self {
                p,
                n: 0,
                k: 0,
                theta,
                sigma,
                table: None,
            });
        }
        if n_min == n {
            return Ok(Self {
                p,
                n,
                k,
                theta,
                sigma,
                table: Some(table),
            });
        }
        // Re-express at the minimal level: evaluate at the new generator.
        let small = DlogTable::get(p, n_min)?;
        let rot = (k as u128 * table.dlog(small.gen % table.modulus)? as u128)
            % table.phi as u128;
        let scaled = rot * small.phi as u128;
        debug_assert_eq!(scaled % table.phi as u128, 0);
        let k_small = (scaled / table.phi as u128) as u64;
        Ok(Self {
            p,
            n: n_min,
            k: k_small,
            theta,
            sigma,
            table: Some(small),
        })
    }

    pub fn trivial(p: u64) -> Self {
        Self::new(p, 0, 0, 0.0, 0.0).expect("trivial character")
    }

    pub fn legendre(p: u64) -> Result<Self, Error> {
        Self::new(p, 1, (p - 1) / 2, 0.0, 0.0)
    }

    /// Conductor C(chi) = q^n.
    pub fn conductor(&self) -> u64 {
        self.p.pow(self.n)
    }

    pub fn cond_exp(&self) -> u32 {
        self.n
    }

    pub fn is_unramified(&self) -> bool {
        self.n == 0
    }

    /// Exact rotation of the unit part at u: chi0(u) = e(num/den).
    pub fn unit_rotation(&self, u: u64) -> Result<(u64, u64), Error> {
        match &self.table {
            None => Ok((0, 1)),
            Some(t) => {
                let d = t.dlog(u)?;
                Ok((((self.k as u128 * d as u128) % t.phi as u128) as u64, t.phi))
            }
        }
    }

    /// chi0(u) for a unit residue u mod p^n (reduction of finer residues ok).
    pub fn eval_unit(&self, u: u64) -> Result<Cx, Error> {
        let (num, den) = self.unit_rotation(u)?;
        Ok(e_frac(num as i64, den))
    }

    /// chi(p)^j including the non-unitary part.
    pub fn eval_unif_pow(&self, j: i64) -> Cx {
        let q = self.p as R;
        Cx::from_polar(
            q.powf(-self.sigma * j as R),
            2.0 * std::f64::consts::PI * self.theta * j as R,
        )
    }

    /// chi(x) for x = p^v u known to precision >= n.
    pub fn eval(&self, x: &ValuedUnit) -> Result<Cx, Error> {
        assert_eq!(self.p, x.p);
        if x.prec < self.n {
            return Err(Error::InsufficientPrecision {
                have: x.prec,
                need: self.n,
            });
        }
        let unit = if self.n == 0 {
            Cx::new(1.0, 0.0)
        } else {
            self.eval_unit(x.unit_mod(self.n)?)?
        };
        Ok(self.eval_unif_pow(x.v as i64) * unit)
    }

    /// Canonical spec-grammar form, parseable by `parse_char_spec`.
    pub fn spec_string(&self) -> String {
        let mut s = format!("p={},n={},k={}", self.p, self.n, self.k);
        if self.theta != 0.0 {
            s.push_str(&format!(",theta={}", self.theta));
        }
        if self.sigma != 0.0 {
            s.push_str(&format!(",sigma={}", self.sigma));
        }
        s
    }

    pub fn inverse(&self) -> Self {
        let k = match &self.table {
            None => 0,
            Some(t) => (t.phi - self.k) % t.phi,
        };
        Self {
            p: self.p,
            n: self.n,
            k,
            theta: -self.theta,
            sigma: -self.sigma,
            table: self.table.clone(),
        }
    }

    /// Pointwise product chi * rhs (conductor re-minimized).
    pub fn times(&self, rhs: &MultChar) -> Result<Self, Error> {
        assert_eq!(self.p, rhs.p);
        let n = self.n.max(rhs.n);
        if n == 0 {
            return Self::new(self.p, 0, 0, self.theta + rhs.theta, self.sigma + rhs.sigma);
        }
        let big = DlogTable::get(self.p, n)?;
        let lift = |c: &MultChar| -> Result<u128, Error> {
            match &c.table {
                None => Ok(0),
                Some(t) => {
                    let d = t.dlog(big.gen % t.modulus)?;
                    let rot = (c.k as u128 * d as u128) % t.phi as u128;
                    Ok(rot * (big.phi / t.phi) as u128)
                }
            }
        };
        let k = ((lift(self)? + lift(rhs)?) % big.phi as u128) as u64;
        Self::new(self.p, n, k, self.theta + rhs.theta, self.sigma + rhs.sigma)
    }

    /// chi^e for integer e.
    pub fn pow(&self, e: i64) -> Result<Self, Error> {
        match &self.table {
            None => Self::new(self.p, 0, 0, self.theta * e as R, self.sigma * e as R),
            Some(t) => {
                let ke = (self.k as i128 * e as i128).rem_euclid(t.phi as i128) as u64;
                Self::new(self.p, self.n, ke, self.theta * e as R, self.sigma * e as R)
            }
        }
    }

    /// Unitary twist |.|^s: shifts (theta, sigma) by s = sigma + i*tau with
    /// chi|.|^s (p) = chi(p) q^(-s).
    pub fn twist_abs(&self, s: Cx) -> Self {
        let q = self.p as R;
        // q^(-i*im(s)) = e(theta') with theta' = -im(s) ln q / (2 pi).
        let theta = self.theta - s.im * q.ln() / (2.0 * std::f64::consts::PI);
        Self {
            p: self.p,
            n: self.n,
            k: self.k,
            theta,
            sigma: self.sigma + s.re,
            table: self.table.clone(),
        }
    }

    /// All primitive characters with conductor exponent exactly n (unit parts
    /// only: theta = sigma = 0).
    pub fn all_primitive(p: u64, n: u32) -> Result<Vec<Self>, Error> {
        if n == 0 {
            return Ok(vec![Self::trivial(p)]);
        }
        let t = DlogTable::get(p, n)?;
        let mut out = Vec::new();
        for k in 1..t.phi {
            let primitive = if n == 1 { true } else { k % p != 0 };
            if primitive {
                out.push(Self::new(p, n, k, 0.0, 0.0)?);
            }
        }
        Ok(out)
    }
}

/// Additive character psi^b(x) = psi(b x) with psi unramified:
/// psi(p^-k a) = e(a / p^k), trivial on o.
#[derive(Debug, Clone)]
pub struct AddChar {
    pub p: u64,
    /// None is the base unramified psi (shift 1).
    pub shift: Option<ValuedUnit>,
}

impl AddChar {
    pub fn unramified(p: u64) -> Self {
        Self { p, shift: None }
    }

    pub fn shifted(b: ValuedUnit) -> Self {
        Self {
            p: b.p,
            shift: Some(b),
        }
    }

    pub fn eval(&self, x: Fx) -> Result<Cx, Error> {
        let bx = match &self.shift {
            None => x,
            Some(b) => Fx::NonZero(*b).mul(x),
        };
        let u = match bx {
            Fx::Zero => return Ok(Cx::new(1.0, 0.0)),
            Fx::NonZero(u) => u,
        };
        if u.v >= 0 {
            return Ok(Cx::new(1.0, 0.0));
        }
        let k = (-u.v) as u32;
        let a = u.unit_mod(k)?;
        let mut pk = 1u64;
        for _ in 0..k {
            pk *= self.p;
        }
        Ok(e_frac(a as i64, pk))
    }
}

/// The xi-invariant of a pair (chi, omega) with equal conductors q^(alpha +
/// alpha'), determined by omega(exp(a)) = chi(exp(xi a)) on p^alpha.
#[derive(Debug, Clone, Serialize)]
pub struct XiClass {
    pub xi: u64,
    pub alpha: u32,
    pub alpha_prime: u32,
    pub atypical: bool,
    pub n_alpha: u64,
    /// Set when p = 3: below the small-prime cutoff, never flagged atypical.
    pub small_prime_caveat: bool,
}

/// Rotation r with chi(exp(p^alpha t)) = e(r t / p^alpha') for integer t.
fn exp_rotation(chi: &MultChar, alpha: u32, alpha_prime: u32) -> Result<u64, Error> {
    let n = alpha + alpha_prime;
    debug_assert_eq!(chi.n, n);
    let e = exp_level(Fx::from_integer(chi.p, chi.p.pow(alpha) as i64, n), n)?;
    let (num, den) = chi.unit_rotation(e.unit)?;
    // num/den is a multiple of 1/p^alpha'.
    let pap = chi.p.pow(alpha_prime);
    let scaled = num as u128 * pap as u128;
    debug_assert_eq!(scaled % den as u128, 0);
    Ok(((scaled / den as u128) % pap as u128) as u64)
}

/// Solve omega(exp(a)) = chi(exp(xi a)) for xi mod p^alpha'. Both characters
/// must be primitive with the same conductor q^n, n >= 2.
pub fn xi_class(chi: &MultChar, omega: &MultChar) -> Result<XiClass, Error> {
    assert_eq!(chi.p, omega.p);
    if chi.conductor() != omega.conductor() {
        return Err(Error::ConductorMismatch(chi.conductor(), omega.conductor()));
    }
    let n = chi.n;
    assert!(n >= 2, "xi-class needs alpha >= 1, so conductor >= q^2");
    let alpha = n / 2;
    let alpha_prime = n - alpha;
    let r_chi = exp_rotation(chi, alpha, alpha_prime)?;
    let r_omega = exp_rotation(omega, alpha, alpha_prime)?;
    let ring = ResidueRing::new(chi.p, alpha_prime)?;
    let xi = ring.mul(r_omega % ring.modulus(), ring.inv(r_chi % ring.modulus())?);
    let p = chi.p;
    let small_prime_caveat = p < 5;
    let minus_one_square = p % 4 == 1;
    let disc_cond = (1 + 4 * ring.mul(xi, xi)) % p == 0;
    let atypical = !small_prime_caveat && minus_one_square && n >= 3 && disc_cond;
    let n_alpha = if atypical || disc_cond {
        quadratic_roots(ring.mul(xi, xi) as i64, -1, -1, p, alpha).len() as u64
    } else {
        0
    };
    Ok(XiClass {
        xi,
        alpha,
        alpha_prime,
        atypical,
        n_alpha,
        small_prime_caveat,
    })
}

/// Full atypicality test; false with no class when conductors differ or are
/// too small.
pub fn is_atypical(chi: &MultChar, omega: &MultChar) -> (bool, Option<XiClass>) {
    if chi.conductor() != omega.conductor() || chi.n < 2 {
        return (false, None);
    }
    match xi_class(chi, omega) {
        Ok(cls) => (cls.atypical, Some(cls)),
        Err(_) => (false, None),
    }
}

/// Parse `p=<prime>,n=<cond_exp>,k=<num>,theta=<float>,sigma=<float>`
/// (theta and sigma optional, default 0).
pub fn parse_char_spec(s: &str) -> Result<MultChar, Error> {
    let mut p = None;
    let mut n = None;
    let mut k = None;
    let mut theta = 0.0;
    let mut sigma = 0.0;
    for part in s.split(',') {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::BadSpec(format!("expected key=value, got `{part}`")))?;
        let bad = || Error::BadSpec(format!("bad value for {key}: `{val}`"));
        match key.trim() {
            "p" => p = Some(val.trim().parse::<u64>().map_err(|_| bad())?),
            "n" => n = Some(val.trim().parse::<u32>().map_err(|_| bad())?),
            "k" => k = Some(val.trim().parse::<u64>().map_err(|_| bad())?),
            "theta" => theta = val.trim().parse::<R>().map_err(|_| bad())?,
            "sigma" => sigma = val.trim().parse::<R>().map_err(|_| bad())?,
            other => return Err(Error::BadSpec(format!("unknown key `{other}`"))),
        }
    }
    let p = p.ok_or_else(|| Error::BadSpec("missing p".into()))?;
    let n = n.ok_or_else(|| Error::BadSpec("missing n".into()))?;
    let k = k.unwrap_or(if n == 0 { 0 } else { 1 });
    MultChar::new(p, n, k, theta, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Fx;

    fn close(a: Cx, b: Cx) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn legendre_values() {
        let chi = MultChar::legendre(5).unwrap();
        let x = ValuedUnit::from_integer(5, 2, 1).unwrap();
        assert!(close(chi.eval(&x).unwrap(), Cx::new(-1.0, 0.0)));
        let one = ValuedUnit::one(5, 1);
        assert!(close(chi.eval(&one).unwrap(), Cx::new(1.0, 0.0)));
        assert_eq!(chi.conductor(), 5);
    }

    #[test]
    fn conductor_minimality() {
        assert_eq!(MultChar::trivial(7).conductor(), 1);
        // k divisible by p drops the level: phi(25) = 20, k = 5 has
        // v_5(k) = 1, so conductor exponent 1.
        let chi = MultChar::new(5, 2, 5, 0.0, 0.0).unwrap();
        assert_eq!(chi.cond_exp(), 1);
        // Order-5 character on (Z/25)^x is nontrivial on 1 + 5Z/25.
        let chi = MultChar::new(5, 2, 4, 0.0, 0.0).unwrap();
        assert_eq!(chi.conductor(), 25);
        // k = phi collapses to the trivial character.
        let chi = MultChar::new(5, 2, 20, 0.0, 0.0).unwrap();
        assert_eq!(chi.conductor(), 1);
    }

    #[test]
    fn eval_is_multiplicative() {
        let chi = MultChar::new(7, 2, 3, 0.17, 0.02).unwrap();
        let xs = [
            ValuedUnit::new(7, 0, 3, 3).unwrap(),
            ValuedUnit::new(7, 1, 5, 3).unwrap(),
            ValuedUnit::new(7, -2, 46, 3).unwrap(),
        ];
        for x in &xs {
            for y in &xs {
                let lhs = chi.eval(&x.mul(y)).unwrap();
                let rhs = chi.eval(x).unwrap() * chi.eval(y).unwrap();
                assert!(close(lhs, rhs));
            }
        }
    }

    #[test]
    fn inverse_and_product() {
        let chi = MultChar::new(5, 3, 7, 0.3, 0.1).unwrap();
        let prod = chi.times(&chi.inverse()).unwrap();
        assert_eq!(prod.conductor(), 1);
        let x = ValuedUnit::new(5, 2, 13, 3).unwrap();
        assert!(close(prod.eval(&x).unwrap(), Cx::new(1.0, 0.0)));
        let sq = chi.times(&chi).unwrap();
        let direct = chi.pow(2).unwrap();
        assert!(close(sq.eval(&x).unwrap(), direct.eval(&x).unwrap()));
    }

    #[test]
    fn additive_character_levels() {
        let psi = AddChar::unramified(5);
        assert!(close(
            psi.eval(Fx::from_integer(5, 3, 2)).unwrap(),
            Cx::new(1.0, 0.0)
        ));
        // psi(1/5) = e(1/5).
        let x = Fx::NonZero(ValuedUnit::new(5, -1, 1, 2).unwrap());
        assert!(close(psi.eval(x).unwrap(), e_frac(1, 5)));
        // psi(2/25) = e(2/25).
        let x = Fx::NonZero(ValuedUnit::new(5, -2, 2, 2).unwrap());
        assert!(close(psi.eval(x).unwrap(), e_frac(2, 25)));
    }

    #[test]
    fn xi_class_basic_pairs() {
        let chi = MultChar::new(5, 3, 1, 0.0, 0.0).unwrap();
        assert_eq!(xi_class(&chi, &chi).unwrap().xi, 1);
        let inv = chi.inverse();
        let cls = xi_class(&chi, &inv).unwrap();
        assert_eq!(cls.xi, 5u64.pow(cls.alpha_prime) - 1);
        let sq = chi.pow(2).unwrap();
        assert_eq!(sq.conductor(), chi.conductor());
        assert_eq!(xi_class(&chi, &sq).unwrap().xi, 2);
    }

    #[test]
    fn xi_class_matches_characters_on_exp() {
        let chi = MultChar::new(13, 3, 2, 0.0, 0.0).unwrap();
        let omega = chi.pow(5).unwrap();
        let cls = xi_class(&chi, &omega).unwrap();
        assert_eq!(cls.xi % 13u64.pow(cls.alpha_prime), 5);
        let n = chi.n;
        for t in 1..20i64 {
            let a = Fx::from_integer(13, t * 13i64.pow(cls.alpha), n);
            let xia = a.mul(Fx::from_integer(13, cls.xi as i64, n));
            let lhs = omega.eval(&exp_level(a, n).unwrap()).unwrap();
            let rhs = chi.eval(&exp_level(xia, n).unwrap()).unwrap();
            assert!(close(lhs, rhs), "t={t}");
        }
    }

    #[test]
    fn atypicality_flags() {
        // p = 5: -1 is a square; xi = 1 gives 1 + 4 = 5 in p.
        let chi = MultChar::new(5, 3, 1, 0.0, 0.0).unwrap();
        let (flag, cls) = is_atypical(&chi, &chi);
        assert!(flag);
        let cls = cls.unwrap();
        assert_eq!(cls.n_alpha, 1);
        // Symmetry: (chi, omega) atypical iff (chi, omega^-1) atypical.
        let (flag_inv, _) = is_atypical(&chi, &chi.inverse());
        assert_eq!(flag, flag_inv);
        // xi = 2: 1 + 16 = 17, not 0 mod 5.
        let (flag2, _) = is_atypical(&chi, &chi.pow(2).unwrap());
        assert!(!flag2);
        // p = 3 is below the cutoff.
        let chi3 = MultChar::new(3, 3, 1, 0.0, 0.0).unwrap();
        let (flag3, cls3) = is_atypical(&chi3, &chi3);
        assert!(!flag3);
        assert!(cls3.unwrap().small_prime_caveat);
        // p = 7: -1 is not a square mod 7.
        let chi7 = MultChar::new(7, 3, 1, 0.0, 0.0).unwrap();
        assert!(!is_atypical(&chi7, &chi7).0);
        // Conductor mismatch.
        let omega = MultChar::new(5, 2, 1, 0.0, 0.0).unwrap();
        assert!(!is_atypical(&chi, &omega).0);
    }

    #[test]
    fn spec_grammar_round_trip() {
        let chi = parse_char_spec("p=5,n=3,k=2,theta=0.25,sigma=-0.5").unwrap();
        assert_eq!((chi.p, chi.n, chi.k), (5, 3, 2));
        assert!((chi.theta - 0.25).abs() < 1e-15);
        assert!((chi.sigma + 0.5).abs() < 1e-15);
        let chi = parse_char_spec("p=7,n=1,k=3").unwrap();
        assert_eq!(chi.conductor(), 7);
        assert!(parse_char_spec("p=4,n=1,k=1").is_err());
        assert!(parse_char_spec("n=1,k=1").is_err());
        assert!(parse_char_spec("p=5,n=1,k=1,bogus=2").is_err());
    }

    #[test]
    fn primitive_enumeration_counts() {
        // Number of primitive characters mod p^n: phi(p^n) - phi(p^(n-1)).
        for (p, n, want) in [(5u64, 1u32, 3usize), (5, 2, 16), (3, 3, 12)] {
            let all = MultChar::all_primitive(p, n).unwrap();
            assert_eq!(all.len(), want);
            assert!(all.iter().all(|c| c.cond_exp() == n));
        }
    }
}
