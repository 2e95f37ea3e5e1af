//! Exact integer utilities: factorization, CRT, unit groups, discrete logs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest integer for which the fixed Miller-Rabin witness set is a proof.
pub const CERTIFIED_PRIME_BOUND: u128 = 3_317_044_064_679_887_385_961_981;

const TRIAL_LIMIT: u64 = 1_000_000;
const MR_WITNESSES: [u128; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Finitely supported map `prime -> nonzero exponent`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrimeExponentMap(BTreeMap<u64, i64>);

impl PrimeExponentMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, i64)>>(pairs: I) -> Self {
        let mut m = Self::new();
        for (p, e) in pairs {
            m.add(p, e);
        }
        m
    }

    /// Adds `e` to the exponent of `p`, dropping the entry if it cancels.
    pub fn add(&mut self, p: u64, e: i64) {
        if e == 0 {
            return;
        }
        let slot = self.0.entry(p).or_insert(0);
        *slot += e;
        if *slot == 0 {
            self.0.remove(&p);
        }
    }

    pub fn get(&self, p: u64) -> i64 {
        self.0.get(&p).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.0.iter().map(|(&p, &e)| (p, e))
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise sum, i.e. multiplication of the encoded rationals.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, e) in other.iter() {
            out.add(p, e);
        }
        out
    }

    pub fn pow(&self, k: i64) -> Self {
        Self::from_pairs(self.iter().map(|(p, e)| (p, e * k)))
    }

    pub fn inv(&self) -> Self {
        self.pow(-1)
    }

    /// Numerator and denominator, or `None` on overflow.
    pub fn to_fraction(&self) -> Option<(u128, u128)> {
        let mut num: u128 = 1;
        let mut den: u128 = 1;
        for (p, e) in self.iter() {
            let pe = (p as u128).checked_pow(e.unsigned_abs() as u32)?;
            if e > 0 {
                num = num.checked_mul(pe)?;
            } else {
                den = den.checked_mul(pe)?;
            }
        }
        Some((num, den))
    }

    /// Product of `p^e` for `e > 0`, panicking on overflow; use on known small values.
    pub fn value(&self) -> u128 {
        let (n, d) = self.to_fraction().expect("overflow reconstructing factorization");
        assert_eq!(d, 1, "value() called on a non-integer");
        n
    }
}

impl fmt::Display for PrimeExponentMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.iter().map(|(p, e)| format!("{p}^{e}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn gcd_i(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

/// Extended Euclid: returns `(g, x, y)` with `a x + b y = g >= 0`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Nonnegative residue of `x` modulo `m`.
pub fn modp(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Inverse of `x` modulo `m`.
pub fn inv_mod(x: i128, m: u64) -> Result<u64> {
    let (g, s, _) = ext_gcd(x.rem_euclid(m as i128), m as i128);
    if g != 1 {
        return Err(Error::NotAUnit { x, m });
    }
    Ok(modp(s, m))
}

pub fn ipow(base: u64, exp: u32) -> u64 {
    base.checked_pow(exp).expect("integer power overflow")
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(mut n: i128, p: u64) -> u32 {
    assert!(n != 0, "valuation of zero");
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

fn mul_mod_u128(a: u128, b: u128, m: u128) -> u128 {
    if m <= u64::MAX as u128 {
        return (a % m) * (b % m) % m;
    }
    let (mut a, mut b) = (a % m, b % m);
    let mut acc = 0u128;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod_u128(acc, a, m);
        }
        a = add_mod_u128(a, a, m);
        b >>= 1;
    }
    acc
}

fn add_mod_u128(a: u128, b: u128, m: u128) -> u128 {
    let s = a.wrapping_add(b);
    if s < a || s >= m {
        s.wrapping_sub(m)
    } else {
        s
    }
}

fn pow_mod_u128(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1u128 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u128(acc, base, m);
        }
        base = mul_mod_u128(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality test, certified below [`CERTIFIED_PRIME_BOUND`].
pub fn is_prime(n: u128) -> Result<bool> {
    if n < 2 {
        return Ok(false);
    }
    for &p in MR_WITNESSES.iter() {
        if n == p {
            return Ok(true);
        }
        if n % p == 0 {
            return Ok(false);
        }
    }
    if n >= CERTIFIED_PRIME_BOUND {
        return Err(Error::AboveCertifiedBound(n));
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in MR_WITNESSES.iter() {
        let mut x = pow_mod_u128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u128(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return Ok(false);
    }
    Ok(true)
}

pub fn is_prime_u64(n: u64) -> bool {
    is_prime(n as u128).expect("u64 is always below the certified bound")
}

fn gcd_u128(a: u128, b: u128) -> u128 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// Brent's variant of Pollard rho; `n` is odd composite.
fn rho(n: u128) -> u128 {
    let mut c = 1u128;
    loop {
        let f = |x: u128| add_mod_u128(mul_mod_u128(x, x, n), c, n);
        let (mut y, mut r, mut q) = (2u128, 1u64, 1u128);
        let (mut x, mut ys);
        let mut g;
        let m = 128u64;
        loop {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            loop {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = f(y);
                    q = mul_mod_u128(q, x.abs_diff(y), n);
                }
                g = gcd_u128(q, n);
                k += m;
                if k >= r || g != 1 {
                    break;
                }
            }
            r *= 2;
            if g != 1 {
                break;
            }
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd_u128(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn factor_into(n: u128, out: &mut BTreeMap<u128, i64>) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    if is_prime(n)? {
        *out.entry(n).or_insert(0) += 1;
        return Ok(());
    }
    let d = rho(n);
    factor_into(d, out)?;
    factor_into(n / d, out)
}

/// Full factorization of `1 <= n`, keyed by prime (wide primes allowed).
pub fn factorize_wide(n: u128) -> Result<BTreeMap<u128, i64>> {
    if n == 0 {
        return Err(Error::FactorZero);
    }
    let mut out = BTreeMap::new();
    let mut n = n;
    let mut p = 2u128;
    while p < TRIAL_LIMIT as u128 && p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.insert(p, e);
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        if n < (TRIAL_LIMIT as u128) * (TRIAL_LIMIT as u128) {
            // no factor below the trial limit means n is prime
            *out.entry(n).or_insert(0) += 1;
        } else {
            factor_into(n, &mut out)?;
        }
    }
    Ok(out)
}

/// Factorization of `n >= 1` whose prime factors fit in `u64`.
pub fn factorize(n: u128) -> Result<PrimeExponentMap> {
    let wide = factorize_wide(n)?;
    let mut out = PrimeExponentMap::new();
    for (p, e) in wide {
        let p = u64::try_from(p).map_err(|_| Error::Overflow("prime factor exceeds u64"))?;
        out.add(p, e);
    }
    Ok(out)
}

pub fn euler_phi(n: u64) -> u64 {
    let f = factorize(n as u128).expect("n >= 1");
    f.iter().fold(1u64, |acc, (p, e)| acc * (p - 1) * ipow(p, e as u32 - 1))
}

pub fn distinct_primes(n: u64) -> Vec<u64> {
    factorize(n as u128).expect("n >= 1").primes().collect()
}

/// Solves a system of congruences with pairwise coprime moduli.
pub fn crt_solve(congruences: &[(i128, u128)]) -> Result<(u128, u128)> {
    for (i, &(_, mi)) in congruences.iter().enumerate() {
        for &(_, mj) in &congruences[i + 1..] {
            if gcd_u128(mi, mj) != 1 {
                return Err(Error::NonCoprimeModuli(mi, mj));
            }
        }
    }
    let mut r: u128 = 0;
    let mut m: u128 = 1;
    for &(ri, mi) in congruences {
        let ri = ri.rem_euclid(mi as i128) as u128;
        // r + m * t = ri (mod mi)
        let (_, inv, _) = ext_gcd((m % mi) as i128, mi as i128);
        let inv = inv.rem_euclid(mi as i128) as u128;
        let diff = (ri + mi - r % mi) % mi;
        let t = mul_mod_u128(diff, inv, mi);
        let new_m = m.checked_mul(mi).ok_or(Error::Overflow("CRT modulus"))?;
        r = (r + m.checked_mul(t).ok_or(Error::Overflow("CRT residue"))?) % new_m;
        m = new_m;
    }
    Ok((r, m))
}

/// Unit group of `Z/p^t` described by one or two cyclic factors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePowerUnits {
    pub p: u64,
    pub t: u32,
    pub q: u64,
    /// `(generator mod q, order)`; empty for the trivial groups mod 1 and 2.
    pub local_generators: Vec<(u64, u64)>,
}

impl PrimePowerUnits {
    fn new(p: u64, t: u32) -> Self {
        let q = ipow(p, t);
        let local_generators = if p == 2 {
            match t {
                1 => vec![],
                2 => vec![(3, 2)],
                _ => vec![(q - 1, 2), (3, q / 4)],
            }
        } else {
            vec![(primitive_root_prime_power(p, t), q / p * (p - 1))]
        };
        Self { p, t, q, local_generators }
    }

    /// Exponents of a unit `x mod q` on the local generators.
    pub fn dlog(&self, x: u64) -> Vec<u64> {
        let x = x % self.q;
        if self.p == 2 {
            match self.t {
                1 => vec![],
                2 => vec![if x == 1 { 0 } else { 1 }],
                _ => {
                    // 3^e is 1 or 3 mod 8, so the sign is read off mod 8
                    let (sign, y) = if x % 8 < 4 { (0, x) } else { (1, self.q - x) };
                    vec![sign, cyclic_dlog(3, y, self.q / 4, self.q)]
                }
            }
        } else {
            let (g, ord) = self.local_generators[0];
            vec![cyclic_dlog(g, x, ord, self.q)]
        }
    }
}

fn primitive_root_prime_power(p: u64, t: u32) -> u64 {
    let phi = p - 1;
    let fs: Vec<u64> = distinct_primes(phi);
    let mut g = 2u64;
    loop {
        if g % p != 0 && fs.iter().all(|&f| pow_mod(g, phi / f, p) != 1) {
            break;
        }
        g += 1;
    }
    if t >= 2 && pow_mod(g, p - 1, p * p) == 1 {
        g += p;
    }
    g
}

/// Discrete log of `h` to base `g` of known `order` mod `m` (Pohlig-Hellman over
/// baby-step/giant-step).
pub fn cyclic_dlog(g: u64, h: u64, order: u64, m: u64) -> u64 {
    if order == 1 {
        return 0;
    }
    let mut residues = Vec::new();
    for (ell, e) in factorize(order as u128).expect("order >= 1").iter() {
        let pe = ipow(ell, e as u32);
        let cofactor = order / pe;
        let g1 = pow_mod(g, cofactor, m);
        let h1 = pow_mod(h, cofactor, m);
        // digits of the log in base ell
        let gamma = pow_mod(g1, pe / ell, m);
        let ginv = pow_mod(g1, pe - 1, m);
        let mut x = 0u64;
        let mut ellk = 1u64;
        for k in 0..e as u32 {
            let hk = pow_mod(
                mul_mod(h1, pow_mod(ginv, x, m), m),
                pe / ell / ipow(ell, k),
                m,
            );
            let d = bsgs(gamma, hk, ell, m);
            x += d * ellk;
            ellk *= ell;
        }
        residues.push((x as i128, pe as u128));
    }
    crt_solve(&residues).expect("prime power moduli are coprime").0 as u64
}

fn bsgs(g: u64, h: u64, order: u64, m: u64) -> u64 {
    let s = (order as f64).sqrt().ceil() as u64 + 1;
    let mut table = std::collections::HashMap::with_capacity(s as usize);
    let mut e = 1u64;
    for j in 0..s {
        table.entry(e).or_insert(j);
        e = mul_mod(e, g, m);
    }
    let factor = pow_mod(g, order - (s % order), m);
    let mut gamma = h % m;
    for i in 0..=s {
        if let Some(&j) = table.get(&gamma) {
            return (i * s + j) % order;
        }
        gamma = mul_mod(gamma, factor, m);
    }
    panic!("discrete logarithm does not exist: {h} is not a power of {g} mod {m}");
}

/// Canonical structure of `(Z/mZ)^*`: one block per prime power of `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitGroupStructure {
    pub modulus: u64,
    pub components: Vec<PrimePowerUnits>,
    /// Generators lifted to residues mod `m` (1 at every other prime power), in
    /// component order.
    pub generators: Vec<(u64, u64)>,
}

impl UnitGroupStructure {
    pub fn order(&self) -> u64 {
        self.generators.iter().map(|&(_, o)| o).product()
    }

    pub fn orders(&self) -> Vec<u64> {
        self.generators.iter().map(|&(_, o)| o).collect()
    }

    /// Index into `generators` of the first generator of each component.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.components.len());
        let mut acc = 0;
        for c in &self.components {
            offs.push(acc);
            acc += c.local_generators.len();
        }
        offs
    }

    /// Exponent vector of a unit; `None` when `gcd(x, m) > 1`.
    pub fn dlog(&self, x: i128) -> Option<Vec<u64>> {
        let r = modp(x, self.modulus);
        if gcd(r, self.modulus) != 1 {
            return None;
        }
        let mut out = Vec::with_capacity(self.generators.len());
        for c in &self.components {
            out.extend(c.dlog(r % c.q));
        }
        Some(out)
    }

    /// Residue with the given exponent vector.
    pub fn element(&self, exps: &[u64]) -> u64 {
        let m = self.modulus;
        self.generators
            .iter()
            .zip(exps)
            .fold(1 % m, |acc, (&(g, _), &e)| mul_mod(acc, pow_mod(g, e, m), m))
    }
}

pub fn unit_group(m: u64) -> UnitGroupStructure {
    assert!(m >= 1, "modulus must be positive");
    let fac = factorize(m as u128).expect("m >= 1");
    let mut components = Vec::new();
    let mut generators = Vec::new();
    for (p, t) in fac.iter() {
        let comp = PrimePowerUnits::new(p, t as u32);
        let q = comp.q;
        for &(g, o) in &comp.local_generators {
            let lifted = if q == m {
                g
            } else {
                crt_solve(&[(g as i128, q as u128), (1, (m / q) as u128)]).unwrap().0 as u64
            };
            generators.push((lifted, o));
        }
        components.push(comp);
    }
    UnitGroupStructure { modulus: m, components, generators }
}

/// Smallest `e >= 1` with `x^e = 1 (mod m)`.
pub fn multiplicative_order(x: i128, m: u64) -> Result<u64> {
    let r = modp(x, m);
    if gcd(r, m) != 1 {
        return Err(Error::NotAUnit { x, m });
    }
    if m == 1 {
        return Ok(1);
    }
    let lambda = unit_group(m).orders().into_iter().fold(1, lcm);
    let mut ord = lambda;
    for (p, _) in factorize(lambda as u128)?.iter() {
        while ord % p == 0 && pow_mod(r, ord / p, m) == 1 {
            ord /= p;
        }
    }
    Ok(ord)
}

/// Möbius function.
pub fn mobius(n: u64) -> i64 {
    let f = factorize(n as u128).expect("n >= 1");
    if f.iter().any(|(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n as u128).expect("n >= 1").iter() {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

/// Smallest-prime-factor table for `0..=limit`.
pub fn spf_sieve(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit + 1];
    for i in 2..=limit {
        if spf[i] == 0 {
            spf[i] = i as u32;
            if (i as u64) * (i as u64) <= limit as u64 {
                let mut j = i * i;
                while j <= limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
    }
    spf
}

pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return vec![];
    }
    let spf = spf_sieve(limit as usize);
    (2..=limit).filter(|&i| spf[i as usize] == i as u32).collect()
}
