//! Exact arithmetic in Z/p^m for odd p: residue rings, valued units
//! (p^v * u at finite precision), truncated exp/log, and quadratic
//! congruence roots via Hensel lifting.

use crate::error::Error;

pub const MODULUS_CAP: u64 = 1 << 40;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// p-adic valuation of n, with the unit cofactor. v_p(0) is not defined here.
pub fn val_unit(p: u64, n: u64) -> (u32, u64) {
    assert!(n != 0);
    let mut v = 0;
    let mut u = n;
    while u % p == 0 {
        u /= p;
        v += 1;
    }
    (v, u)
}

/// The ring Z/p^m, p an odd prime, p^m <= 2^40.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidueRing {
    pub p: u64,
    pub m: u32,
    pm: u64,
}

impl ResidueRing {
    pub fn new(p: u64, m: u32) -> Result<Self, Error> {
        if p == 2 || !is_prime(p) {
            return Err(Error::NotOddPrime(p));
        }
        assert!(m >= 1);
        let mut pm: u64 = 1;
        for _ in 0..m {
            pm = pm.checked_mul(p).filter(|&x| x <= MODULUS_CAP).ok_or(
                Error::ModulusTooLarge { p, m },
            )?;
        }
        Ok(Self { p, m, pm })
    }

    pub fn modulus(&self) -> u64 {
        self.pm
    }

    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.pm as i128) as u64
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.pm && b < self.pm);
        let s = a + b;
        if s >= self.pm {
            s - self.pm
        } else {
            s
        }
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.pm && b < self.pm);
        if a >= b {
            a - b
        } else {
            a + self.pm - b
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.pm);
        if a == 0 {
            0
        } else {
            self.pm - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.pm && b < self.pm);
        ((a as u128 * b as u128) % self.pm as u128) as u64
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut acc = 1u64 % self.pm;
        a %= self.pm;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    pub fn is_unit(&self, a: u64) -> bool {
        a % self.p != 0
    }

    /// Inverse of a unit via extended Euclid.
    pub fn inv(&self, a: u64) -> Result<u64, Error> {
        let a = a % self.pm;
        if !self.is_unit(a) {
            return Err(Error::NotAUnit {
                a,
                p: self.p,
                m: self.m,
            });
        }
        let (mut r0, mut r1) = (self.pm as i128, a as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(self.reduce_i128(t0))
    }

    /// Drops precision to m' <= m.
    pub fn truncate(&self, m2: u32) -> ResidueRing {
        assert!(1 <= m2 && m2 <= self.m);
        let mut pm = 1u64;
        for _ in 0..m2 {
            pm *= self.p;
        }
        ResidueRing {
            p: self.p,
            m: m2,
            pm,
        }
    }
}

/// A nonzero element of F known to finite precision: x = p^v * u with u a
/// unit residue mod p^prec, so x is pinned mod p^(v + prec).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValuedUnit {
    pub p: u64,
    pub v: i32,
    pub unit: u64,
    pub prec: u32,
}

impl ValuedUnit {
    pub fn new(p: u64, v: i32, unit: u64, prec: u32) -> Result<Self, Error> {
        let ring = ResidueRing::new(p, prec)?;
        let unit = unit % ring.modulus();
        if !ring.is_unit(unit) {
            return Err(Error::NotAUnit { a: unit, p, m: prec });
        }
        Ok(Self { p, v, unit, prec })
    }

    /// Decomposes a nonzero integer n = p^v * u at the given precision.
    pub fn from_integer(p: u64, n: i64, prec: u32) -> Result<Self, Error> {
        assert!(n != 0);
        let (v, u) = val_unit(p, n.unsigned_abs());
        let ring = ResidueRing::new(p, prec)?;
        let unit = if n < 0 { ring.neg(u % ring.modulus()) } else { u % ring.modulus() };
        Self::new(p, v as i32, unit, prec)
    }

    pub fn one(p: u64, prec: u32) -> Self {
        Self::new(p, 0, 1, prec).expect("1 is a unit")
    }

    pub fn ring(&self) -> ResidueRing {
        ResidueRing::new(self.p, self.prec).expect("validated at construction")
    }

    /// |x| as the exponent e with |x| = q^e (so e = -v).
    pub fn abs_exp(&self) -> i32 {
        -self.v
    }

    pub fn mul(&self, rhs: &ValuedUnit) -> ValuedUnit {
        assert_eq!(self.p, rhs.p);
        let prec = self.prec.min(rhs.prec);
        let ring = ResidueRing::new(self.p, prec).unwrap();
        ValuedUnit {
            p: self.p,
            v: self.v + rhs.v,
            unit: ring.mul(self.unit % ring.modulus(), rhs.unit % ring.modulus()),
            prec,
        }
    }

    pub fn inv(&self) -> ValuedUnit {
        let ring = self.ring();
        ValuedUnit {
            p: self.p,
            v: -self.v,
            unit: ring.inv(self.unit).expect("unit by invariant"),
            prec: self.prec,
        }
    }

    pub fn neg(&self) -> ValuedUnit {
        let ring = self.ring();
        ValuedUnit {
            p: self.p,
            v: self.v,
            unit: ring.neg(self.unit),
            prec: self.prec,
        }
    }

    /// Unit residue reduced mod p^k, k <= prec.
    pub fn unit_mod(&self, k: u32) -> Result<u64, Error> {
        if k > self.prec {
            return Err(Error::InsufficientPrecision {
                have: self.prec,
                need: k,
            });
        }
        let mut pk = 1u64;
        for _ in 0..k {
            pk *= self.p;
        }
        Ok(self.unit % pk)
    }

    /// Equality at precision min(prec) on units and exact on valuations.
    pub fn eq_at_precision(&self, rhs: &ValuedUnit) -> bool {
        if self.p != rhs.p || self.v != rhs.v {
            return false;
        }
        let k = self.prec.min(rhs.prec);
        self.unit_mod(k) == rhs.unit_mod(k)
    }
}

/// A field element that may be (indistinguishable from) zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fx {
    Zero,
    NonZero(ValuedUnit),
}

impl Fx {
    pub fn from_integer(p: u64, n: i64, prec: u32) -> Self {
        if n == 0 {
            Fx::Zero
        } else {
            Fx::NonZero(ValuedUnit::from_integer(p, n, prec).unwrap())
        }
    }

    pub fn unit(self) -> Option<ValuedUnit> {
        match self {
            Fx::Zero => None,
            Fx::NonZero(u) => Some(u),
        }
    }

    /// x + y. Cancellation shortens precision; a sum vanishing to the full
    /// available precision collapses to Zero.
    pub fn add(self, rhs: Fx) -> Fx {
        let (x, y) = match (self, rhs) {
            (Fx::Zero, r) => return r,
            (l, Fx::Zero) => return l,
            (Fx::NonZero(x), Fx::NonZero(y)) => (x, y),
        };
        assert_eq!(x.p, y.p);
        let (lo, hi) = if x.v <= y.v { (x, y) } else { (y, x) };
        let shift = (hi.v - lo.v) as u32;
        // p^lo.v * (lo.unit + p^shift * hi.unit), inner known mod p^k.
        let k = lo.prec.min(hi.prec.saturating_add(shift));
        if k == 0 {
            // No overlap in known digits; the sum is lo to its precision.
            return Fx::NonZero(lo);
        }
        let ring = ResidueRing::new(lo.p, k).unwrap();
        let shifted = if shift >= k {
            0
        } else {
            let mut ps = 1u64;
            for _ in 0..shift {
                ps *= lo.p;
            }
            ring.mul(ps % ring.modulus(), hi.unit % ring.modulus())
        };
        let inner = ring.add(lo.unit % ring.modulus(), shifted);
        if inner == 0 {
            return Fx::Zero;
        }
        let (t, u) = val_unit(lo.p, inner);
        if t >= k {
            return Fx::Zero;
        }
        Fx::NonZero(ValuedUnit {
            p: lo.p,
            v: lo.v + t as i32,
            unit: u % ring.truncate(k - t).modulus(),
            prec: k - t,
        })
    }

    pub fn sub(self, rhs: Fx) -> Fx {
        match rhs {
            Fx::Zero => self,
            Fx::NonZero(u) => self.add(Fx::NonZero(u.neg())),
        }
    }

    pub fn mul(self, rhs: Fx) -> Fx {
        match (self, rhs) {
            (Fx::Zero, _) | (_, Fx::Zero) => Fx::Zero,
            (Fx::NonZero(x), Fx::NonZero(y)) => Fx::NonZero(x.mul(&y)),
        }
    }
}

/// exp(a) = sum a^k / k! truncated at precision m. Requires v(a) >= 1 (p odd)
/// so every term is a p-adic integer and the series converges.
pub fn exp_level(a: Fx, m: u32) -> Result<ValuedUnit, Error> {
    let a = match a {
        Fx::Zero => {
            // exp(0) = 1; precision here is a caller-side choice, use m with p
            // unknown: impossible, so Zero input must carry p via caller.
            return Err(Error::SingularArgument(
                "exp of exact zero needs a prime; pass Fx::NonZero or use one()".into(),
            ));
        }
        Fx::NonZero(u) => u,
    };
    if a.v < 1 {
        return Err(Error::Divergent(a.v));
    }
    if a.v as u32 >= m {
        return Ok(ValuedUnit::one(a.p, m));
    }
    let ring = ResidueRing::new(a.p, m)?;
    let va = a.v as u32;
    let ua = a.unit % ring.modulus();
    let mut acc = 1u64; // k = 0 term
    let mut tv = 0i64; // valuation of current term a^k / k!
    let mut tu = 1u64; // unit of current term, mod p^m
    // v(a^k/k!) = k*va - v_p(k!) >= (k+1)/2 for va >= 1, p >= 3, so every
    // term beyond k = 2m is negligible; tv is not monotone, so no early exit.
    for k in 1..=(2 * m as u64 + 2) {
        let (ek, wk) = val_unit(a.p, k);
        // term_k = term_{k-1} * a / k
        tv = tv + va as i64 - ek as i64;
        tu = ring.mul(tu, ring.mul(ua, ring.inv(wk % ring.modulus())?));
        debug_assert!(tv >= 0);
        if (tv as u32) < m {
            let mut pt = 1u64;
            for _ in 0..tv {
                pt *= a.p;
            }
            acc = ring.add(acc, ring.mul(pt % ring.modulus(), tu));
        }
    }
    ValuedUnit::new(a.p, 0, acc, m)
}

/// log(u) = -sum (1-u)^k / k for u = 1 mod p, at precision m on the result's
/// unit part. Returns Fx::Zero when u = 1 to the working precision.
pub fn log_level(u: &ValuedUnit, m: u32) -> Result<Fx, Error> {
    if u.v != 0 || u.unit % u.p != 1 {
        return Err(Error::Divergent(u.v));
    }
    let a = Fx::NonZero(*u).sub(Fx::NonZero(ValuedUnit::one(u.p, u.prec)));
    let a = match a {
        Fx::Zero => return Ok(Fx::Zero),
        Fx::NonZero(x) => x,
    };
    let va = a.v as u32;
    debug_assert!(va >= 1);
    if va >= m {
        return Ok(Fx::Zero);
    }
    let ring = ResidueRing::new(u.p, m)?;
    let ua = a.unit % ring.modulus();
    // Accumulate p^va * (series unit sum) mod p^m via valuation bookkeeping.
    let mut acc = 0u64; // sum of terms, as residues mod p^m (terms have v >= 1)
    let mut pv = 0u32; // valuation of a^k
    let mut pu = 1u64; // unit of a^k mod p^m
    // v(a^k/k) = k*va - v_p(k) >= k - log_p(k) >= m for k > m + 64; tv is not
    // monotone in k, so iterate to the bound rather than breaking early.
    for k in 1..=(m as u64 + 64) {
        pv += va;
        pu = ring.mul(pu, ua);
        let (ek, wk) = val_unit(u.p, k);
        let tv = pv - ek; // term valuation; positive since va*k > v_p(k)
        if tv < m {
            let mut pt = 1u64;
            for _ in 0..tv {
                pt *= u.p;
            }
            let mut t = ring.mul(pt % ring.modulus(), ring.mul(pu, ring.inv(wk % ring.modulus())?));
            if k % 2 == 0 {
                t = ring.neg(t);
            }
            acc = ring.add(acc, t);
        }
    }
    if acc == 0 {
        return Ok(Fx::Zero);
    }
    let (t, w) = val_unit(u.p, acc);
    if t >= m {
        return Ok(Fx::Zero);
    }
    Ok(Fx::NonZero(ValuedUnit::new(u.p, t as i32, w, m - t)?))
}

/// Exact root set of a*t^2 + b*t + c = 0 mod p^alpha, by root-finding mod p
/// and level-by-level Hensel lifting (branching at singular roots).
pub fn quadratic_roots(a: i64, b: i64, c: i64, p: u64, alpha: u32) -> Vec<u64> {
    assert!(alpha >= 1);
    assert!(p <= 1_000_000, "root enumeration mod p requires small p");
    let ring = ResidueRing::new(p, alpha).expect("odd prime, modest alpha");
    let (a, b, c) = (
        ring.reduce_i128(a as i128),
        ring.reduce_i128(b as i128),
        ring.reduce_i128(c as i128),
    );
    assert!(a != 0 || b != 0 || c != 0, "identically zero congruence");
    let f = |t: u64, modulus: &ResidueRing| -> u64 {
        let t = t % modulus.modulus();
        modulus.add(
            modulus.mul(modulus.mul(a % modulus.modulus(), t), t),
            modulus.add(modulus.mul(b % modulus.modulus(), t), c % modulus.modulus()),
        )
    };
    let base = ring.truncate(1);
    let mut roots: Vec<u64> = (0..p).filter(|&t| f(t, &base) == 0).collect();
    let mut pj = p;
    for j in 1..alpha {
        let next = ring.truncate(j + 1);
        let mut lifted = Vec::new();
        for &r in &roots {
            for t in 0..p {
                let cand = r + t * pj;
                if f(cand, &next) == 0 {
                    lifted.push(cand);
                }
            }
        }
        roots = lifted;
        pj *= p;
    }
    roots.sort_unstable();
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_by_euclid() {
        let r = ResidueRing::new(5, 2).unwrap();
        assert_eq!(r.inv(2).unwrap(), 13);
        let r27 = ResidueRing::new(3, 3).unwrap();
        assert_eq!(r27.inv(1).unwrap(), 1);
        assert!(matches!(r.inv(5), Err(Error::NotAUnit { .. })));
    }

    #[test]
    fn exp_matches_series_anchors() {
        // exp(5) = 1 + 5 + 25/2 = 6 mod 25.
        let a = Fx::from_integer(5, 5, 2);
        assert_eq!(exp_level(a, 2).unwrap().unit, 6);
        // exp(15) = 1 + 15 mod 25, quadratic term has valuation 2.
        let a = Fx::from_integer(5, 15, 2);
        assert_eq!(exp_level(a, 2).unwrap().unit, 16);
    }

    #[test]
    fn log_matches_series_anchors() {
        let u = ValuedUnit::new(5, 0, 6, 2).unwrap();
        let l = log_level(&u, 2).unwrap().unit().unwrap();
        assert_eq!((l.v, l.unit), (1, 1));
        let one = ValuedUnit::one(5, 3);
        assert_eq!(log_level(&one, 3).unwrap(), Fx::Zero);
    }

    #[test]
    fn exp_log_roundtrip_all_small_primes() {
        for p in [3u64, 5, 7, 11] {
            for m in 1..=6u32 {
                let ring = ResidueRing::new(p, m).unwrap();
                // u = 1 mod p, exhaustive at low m, strided above.
                let stride = if ring.modulus() > 3000 { 17 } else { 1 };
                let mut i = 0u64;
                while 1 + i * p < ring.modulus() {
                    let u = ValuedUnit::new(p, 0, 1 + i * p, m).unwrap();
                    let l = log_level(&u, m).unwrap();
                    let back = match l {
                        Fx::Zero => ValuedUnit::one(p, m),
                        a @ Fx::NonZero(_) => exp_level(a, m).unwrap(),
                    };
                    assert_eq!(back.unit, u.unit, "p={p} m={m} u={}", u.unit);
                    i += stride;
                }
            }
        }
    }

    #[test]
    fn exp_is_homomorphism() {
        let p = 7;
        let m = 4;
        for (x, y) in [(7i64, 14), (49, 7), (21, 35), (7, 7)] {
            let ea = exp_level(Fx::from_integer(p, x, m), m).unwrap();
            let eb = exp_level(Fx::from_integer(p, y, m), m).unwrap();
            let eab = exp_level(Fx::from_integer(p, x + y, m), m).unwrap();
            assert_eq!(ea.mul(&eb).unit, eab.unit);
        }
    }

    #[test]
    fn quadratic_roots_examples() {
        assert_eq!(quadratic_roots(1, -1, -1, 5, 1), vec![3]);
        assert_eq!(quadratic_roots(1, -1, -1, 5, 2), Vec::<u64>::new());
        assert_eq!(quadratic_roots(0, 1, 0, 7, 1), vec![0]);
    }

    #[test]
    fn quadratic_roots_match_exhaustive() {
        for p in [3u64, 5, 7, 11] {
            for alpha in 1..=3u32 {
                let ring = ResidueRing::new(p, alpha).unwrap();
                let pm = ring.modulus();
                if pm > 11u64.pow(3) {
                    continue;
                }
                // Sampled coefficient triples, plus degenerate ones.
                for (a, b, c) in [
                    (1i64, -1, -1),
                    (1, 0, -1),
                    (2, 3, 1),
                    (p as i64, 1, 0),
                    (p as i64, p as i64, p as i64),
                    (0, p as i64, 1),
                    (4, -4, 1),
                ] {
                    if ring.reduce_i128(a as i128) == 0
                        && ring.reduce_i128(b as i128) == 0
                        && ring.reduce_i128(c as i128) == 0
                    {
                        continue;
                    }
                    let fast = quadratic_roots(a, b, c, p, alpha);
                    let brute: Vec<u64> = (0..pm)
                        .filter(|&t| {
                            let t = t as i128;
                            ((a as i128 * t * t + b as i128 * t + c as i128)
                                .rem_euclid(pm as i128))
                                == 0
                        })
                        .collect();
                    assert_eq!(fast, brute, "p={p} alpha={alpha} ({a},{b},{c})");
                }
            }
        }
    }

    #[test]
    fn valued_unit_multiplication() {
        let x = ValuedUnit::new(5, 2, 3, 3).unwrap();
        let y = ValuedUnit::new(5, -1, 7, 3).unwrap();
        let xy = x.mul(&y);
        assert_eq!((xy.v, xy.unit), (1, 21));
        assert_eq!(xy.abs_exp(), -1);
        assert_eq!(x.abs_exp() + y.abs_exp(), xy.abs_exp());
    }

    #[test]
    fn fx_addition_tracks_cancellation() {
        let x = Fx::from_integer(5, 7, 4);
        let y = Fx::from_integer(5, -7, 4);
        assert_eq!(x.add(y), Fx::Zero);
        let a = Fx::from_integer(5, 26, 4);
        let b = Fx::from_integer(5, -1, 4);
        let s = a.add(b).unit().unwrap();
        assert_eq!((s.v, s.unit), (2, 1));
    }

    #[test]
    fn even_prime_rejected() {
        assert!(matches!(ResidueRing::new(2, 3), Err(Error::NotOddPrime(2))));
        assert!(matches!(ResidueRing::new(9, 1), Err(Error::NotOddPrime(9))));
    }
}
