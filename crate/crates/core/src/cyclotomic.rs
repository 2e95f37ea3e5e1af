//! Exact arithmetic in `Q(zeta_N)`.
//!
//! Values are sparse maps `exponent -> rational coefficient` over powers of a
//! primitive `N`-th root of unity. The canonical form keeps only exponents `e`
//! whose CRT component `e_p` modulo each `p^t || N` lies in the power basis of
//! `Q(zeta_{p^t})`, i.e. `e_p < (p - 1) p^(t-1)`. Any other power is rewritten
//! with `zeta^e = -sum_{i=1}^{p-1} zeta^(e + i N / p)`, which moves only the
//! `p`-component, so one pass per prime reaches the unique normal form.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::{factorize, inv_mod, ipow, lcm};
use crate::error::{Error, Result};

/// Default cap on the root-of-unity order of any single value.
pub const DEFAULT_ORDER_CAP: u64 = 10_000_000;

/// A root of unity `exp(2 pi i k / n)`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootOfUnity {
    pub k: u64,
    pub n: u64,
}

impl RootOfUnity {
    pub const ONE: RootOfUnity = RootOfUnity { k: 0, n: 1 };

    pub fn new(k: i128, n: u64) -> Self {
        assert!(n >= 1);
        let k = k.rem_euclid(n as i128) as u64;
        let g = crate::arith::gcd(k, n);
        if k == 0 {
            Self::ONE
        } else {
            RootOfUnity { k: k / g, n: n / g }
        }
    }

    pub fn order(&self) -> u64 {
        self.n
    }

    pub fn is_one(&self) -> bool {
        self.k == 0
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = lcm(self.n, other.n);
        Self::new((self.k * (n / self.n) + other.k * (n / other.n)) as i128, n)
    }

    pub fn conj(&self) -> Self {
        Self::new(-(self.k as i128), self.n)
    }

    pub fn pow(&self, e: i64) -> Self {
        Self::new(self.k as i128 * e as i128, self.n)
    }

    /// Exponent of this root over a common order `n` (which it must divide into).
    pub fn exponent_in(&self, n: u64) -> u64 {
        assert_eq!(n % self.n, 0, "order {} does not divide {}", self.n, n);
        self.k * (n / self.n)
    }

    pub fn to_complex(&self) -> (f64, f64) {
        let t = 2.0 * std::f64::consts::PI * self.k as f64 / self.n as f64;
        (t.cos(), t.sin())
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zeta_{}^{}", self.n, self.k)
    }
}

/// Exact element of a cyclotomic field.
#[derive(Clone, Debug)]
pub struct CyclotomicNumber {
    order: u64,
    coeffs: BTreeMap<u64, BigRational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Zero,
    One,
}

fn prime_powers(n: u64) -> Vec<(u64, u64, u64)> {
    // (p, p^t, inverse of N/p^t mod p^t)
    factorize(n as u128)
        .expect("order >= 1")
        .iter()
        .map(|(p, t)| {
            let q = ipow(p, t as u32);
            let inv = inv_mod((n / q) as i128, q).unwrap_or(0);
            (p, q, inv)
        })
        .collect()
}

impl CyclotomicNumber {
    pub fn zero(order: u64) -> Self {
        assert!(order >= 1);
        Self { order, coeffs: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_int(x: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(x)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        let mut c = Self::zero(1);
        if !r.is_zero() {
            c.coeffs.insert(0, r);
        }
        c
    }

    /// `zeta_n^k`, canonical.
    pub fn root(k: i128, n: u64) -> Self {
        let mut c = Self::zero(n);
        c.coeffs.insert(k.rem_euclid(n as i128) as u64, BigRational::one());
        c.canonicalize();
        c
    }

    pub fn from_root(r: RootOfUnity) -> Self {
        Self::root(r.k as i128, r.n)
    }

    /// Builds `sum_k counts[k] zeta_n^k`, canonical.
    pub fn from_counts(n: u64, counts: &[i64]) -> Self {
        let mut c = Self::zero(n);
        for (k, &cnt) in counts.iter().enumerate() {
            if cnt != 0 {
                c.coeffs.insert(k as u64 % n, BigRational::from_integer(BigInt::from(cnt)));
            }
        }
        c.canonicalize();
        c
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (u64, &BigRational)> {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs.get(&0).is_some_and(|c| c.is_one())
    }

    pub fn is_value(&self, target: Target) -> bool {
        match target {
            Target::Zero => self.is_zero(),
            Target::One => self.is_one(),
        }
    }

    /// Rational value if the number lies in `Q`.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.coeffs.len() {
            0 => Some(BigRational::zero()),
            1 => self.coeffs.get(&0).cloned(),
            _ => None,
        }
    }

    fn canonicalize(&mut self) {
        if self.order == 1 {
            return;
        }
        let n = self.order;
        for (p, q, inv) in prime_powers(n) {
            let bound = q / p * (p - 1);
            let step = n / p;
            let bad: Vec<u64> = self
                .coeffs
                .keys()
                .copied()
                .filter(|&e| mul_small(e % q, inv, q) >= bound)
                .collect();
            for e in bad {
                let c = self.coeffs.remove(&e).expect("key present");
                for i in 1..p {
                    let e2 = (e + i * step) % n;
                    accumulate(&mut self.coeffs, e2, -c.clone());
                }
            }
        }
    }

    /// Re-expresses the value over `zeta_m` where `self.order | m`.
    pub fn embed(&self, m: u64) -> Self {
        assert_eq!(m % self.order, 0, "cannot embed order {} into {}", self.order, m);
        if m == self.order {
            return self.clone();
        }
        let f = m / self.order;
        let mut out = Self::zero(m);
        for (&e, c) in &self.coeffs {
            out.coeffs.insert(e * f, c.clone());
        }
        out.canonicalize();
        out
    }

    fn common(&self, other: &Self) -> (Self, Self) {
        let m = lcm(self.order, other.order);
        (self.embed(m), other.embed(m))
    }

    pub fn conj(&self) -> Self {
        let n = self.order;
        let mut out = Self::zero(n);
        for (&e, c) in &self.coeffs {
            out.coeffs.insert((n - e) % n, c.clone());
        }
        out.canonicalize();
        out
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_zero() {
            return Self::zero(self.order);
        }
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|(&e, c)| (e, c * r)).collect(),
        }
    }

    /// Multiplies by `zeta_n^k`.
    pub fn mul_root(&self, r: RootOfUnity) -> Self {
        let m = lcm(self.order, r.n);
        let base = self.embed(m);
        let shift = r.exponent_in(m);
        let mut out = Self::zero(m);
        for (&e, c) in &base.coeffs {
            out.coeffs.insert((e + shift) % m, c.clone());
        }
        out.canonicalize();
        out
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Complex image under `zeta_N -> exp(2 pi i / N)`.
    pub fn to_complex(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&e, c) in &self.coeffs {
            let v = c.to_f64().unwrap_or(f64::NAN);
            let t = 2.0 * std::f64::consts::PI * e as f64 / self.order as f64;
            re += v * t.cos();
            im += v * t.sin();
        }
        (re, im)
    }

    pub fn abs_f64(&self) -> f64 {
        let (re, im) = self.to_complex();
        re.hypot(im)
    }

    /// The root of unity equal to this value, if any (searches `+-zeta_N^j`).
    pub fn as_root_of_unity(&self) -> Option<RootOfUnity> {
        if self.coeffs.is_empty() || self.coeffs.len() > self.order as usize {
            return None;
        }
        let (re, im) = self.to_complex();
        if (re.hypot(im) - 1.0).abs() > 1e-6 {
            return None;
        }
        let m = lcm(self.order, 2);
        let angle = im.atan2(re).rem_euclid(2.0 * std::f64::consts::PI);
        let j = (angle / (2.0 * std::f64::consts::PI) * m as f64).round() as i128;
        let cand = RootOfUnity::new(j, m);
        (Self::from_root(cand) == *self).then_some(cand)
    }

    pub fn check_order_cap(&self, cap: u64) -> Result<()> {
        if self.order > cap {
            Err(Error::OrderCap(self.order))
        } else {
            Ok(())
        }
    }
}

impl PartialEq for CyclotomicNumber {
    fn eq(&self, other: &Self) -> bool {
        if self.order == other.order {
            self.coeffs == other.coeffs
        } else {
            let (a, b) = self.common(other);
            a.coeffs == b.coeffs
        }
    }
}

impl Eq for CyclotomicNumber {}

fn mul_small(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn accumulate(map: &mut BTreeMap<u64, BigRational>, e: u64, c: BigRational) {
    let slot = map.entry(e).or_insert_with(BigRational::zero);
    *slot += c;
    if slot.is_zero() {
        map.remove(&e);
    }
}

impl<'a> Add for &'a CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn add(self, rhs: Self) -> CyclotomicNumber {
        let (mut a, b) = self.common(rhs);
        for (e, c) in b.coeffs {
            accumulate(&mut a.coeffs, e, c);
        }
        a
    }
}

impl<'a> Sub for &'a CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn sub(self, rhs: Self) -> CyclotomicNumber {
        self + &(-rhs)
    }
}

impl<'a> Neg for &'a CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn neg(self) -> CyclotomicNumber {
        CyclotomicNumber {
            order: self.order,
            coeffs: self.coeffs.iter().map(|(&e, c)| (e, -c)).collect(),
        }
    }
}

impl<'a> Mul for &'a CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn mul(self, rhs: Self) -> CyclotomicNumber {
        let (a, b) = self.common(rhs);
        let n = a.order;
        let mut out = CyclotomicNumber::zero(n);
        for (&e1, c1) in &a.coeffs {
            for (&e2, c2) in &b.coeffs {
                accumulate(&mut out.coeffs, (e1 + e2) % n, c1 * c2);
            }
        }
        out.canonicalize();
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for CyclotomicNumber {
            type Output = CyclotomicNumber;
            fn $m(self, rhs: Self) -> CyclotomicNumber {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for CyclotomicNumber {
    type Output = CyclotomicNumber;
    fn neg(self) -> CyclotomicNumber {
        -&self
    }
}

impl fmt::Display for CyclotomicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(&e, c)| if e == 0 { format!("{c}") } else { format!("({c})*z{}^{e}", self.order) })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Exact `1/(l - z)` for a root of unity `z` of order `o` and integer `l >= 2`,
/// via `(l - z) * sum_j z^j l^(o-1-j) = l^o - 1`.
pub fn inv_int_minus_root(l: u64, z: RootOfUnity) -> CyclotomicNumber {
    let o = z.n;
    let mut counts = vec![BigInt::zero(); o as usize];
    let mut lp = BigInt::one();
    for j in (0..o).rev() {
        // coefficient of z^j is l^(o-1-j)
        counts[(z.k * j % o) as usize] += &lp;
        lp *= l;
    }
    let denom = lp - BigInt::one();
    let mut out = CyclotomicNumber::zero(o);
    for (k, c) in counts.into_iter().enumerate() {
        if !c.is_zero() {
            accumulate(&mut out.coeffs, k as u64, BigRational::new(c, denom.clone()));
        }
    }
    out.canonicalize();
    out
}

/// Rational helper.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// True when `|x|` is exactly a rational (no imaginary / irrational part) and positive.
pub fn is_positive_rational(x: &CyclotomicNumber) -> bool {
    x.as_rational().is_some_and(|r| r.is_positive())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_basic() {
        assert!(CyclotomicNumber::root(0, 1).is_one());
        assert_eq!(CyclotomicNumber::root(1, 2), CyclotomicNumber::from_int(-1));
        let i = CyclotomicNumber::root(1, 4);
        assert_eq!(&i * &i, CyclotomicNumber::root(1, 2));
    }

    #[test]
    fn arithmetic_examples() {
        let z1 = CyclotomicNumber::root(1, 5);
        let z4 = CyclotomicNumber::root(4, 5);
        assert!((&z1 * &z4).is_one());
        let orbit = (0..5).fold(CyclotomicNumber::zero(5), |acc, e| &acc + &CyclotomicNumber::root(e, 5));
        assert!(orbit.is_value(Target::Zero));
        assert_eq!(CyclotomicNumber::root(1, 8).conj(), CyclotomicNumber::root(7, 8));
        let z3 = CyclotomicNumber::root(1, 3);
        assert!((&(&z3 * &z3) * &z3).is_value(Target::One));
        assert!(!z3.is_value(Target::One));
    }

    #[test]
    fn embedding_preserves_equality() {
        let a = CyclotomicNumber::root(1, 6);
        let b = a.embed(30);
        assert_eq!(b, CyclotomicNumber::root(5, 30));
        assert!((&a - &b).is_zero());
    }

    #[test]
    fn inverse_of_l_minus_z() {
        for n in [1u64, 2, 3, 4, 8, 12] {
            for k in 0..n {
                let z = RootOfUnity::new(k as i128, n);
                let inv = inv_int_minus_root(2, z);
                let lhs = &(&CyclotomicNumber::from_int(2) - &CyclotomicNumber::from_root(z)) * &inv;
                assert!(lhs.is_one(), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn root_recognition() {
        let z = CyclotomicNumber::root(7, 12);
        assert_eq!(z.as_root_of_unity(), Some(RootOfUnity::new(7, 12)));
        assert_eq!((-&CyclotomicNumber::root(1, 5)).as_root_of_unity(), Some(RootOfUnity::new(7, 10)));
        assert_eq!(CyclotomicNumber::from_int(2).as_root_of_unity(), None);
    }
}
