//! The ratio family `(an+b)/(An+B)` and the residue classes used to
//! constrain its characters.

use serde::{Deserialize, Serialize};

use crate::arith::{factorize, gcd, gcd_i, ipow, modp, valuation, PrimeExponentMap};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseTag {
    FirstCase,
    SecondCase,
}

/// A normalized family with all derived constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioFamily {
    pub a: i64,
    pub b: i64,
    #[serde(rename = "A")]
    pub big_a: i64,
    #[serde(rename = "B")]
    pub big_b: i64,
    pub k: i64,
    /// `aB - Ab`
    pub det: i64,
    pub alpha: i64,
    pub beta: i64,
    pub a1: i64,
    pub b1: i64,
    #[serde(rename = "A1")]
    pub big_a1: i64,
    #[serde(rename = "B1")]
    pub big_b1: i64,
    pub rho: PrimeExponentMap,
    pub rho0: PrimeExponentMap,
    pub det1: i64,
    /// `2 (aA|det|)^3`
    pub delta: u64,
    pub delta_factors: PrimeExponentMap,
    pub torsion_exponent: u64,
    pub case_tag: CaseTag,
}

pub fn normalize_family(a: i64, b: i64, big_a: i64, big_b: i64, k: i64) -> Result<RatioFamily> {
    if a <= 0 || big_a <= 0 {
        return Err(Error::NonPositiveLeading { a, big_a });
    }
    let det = (a as i128 * big_b as i128 - big_a as i128 * b as i128) as i64;
    if det == 0 {
        return Err(Error::DegenerateFamily);
    }
    let alpha = gcd_i(a as i128, b as i128) as i64;
    let beta = gcd_i(big_a as i128, big_b as i128) as i64;
    let (a1, b1, big_a1, big_b1) = (a / alpha, b / alpha, big_a / beta, big_b / beta);
    let det1 = a1 * big_b1 - big_a1 * b1;

    let rho = factorize(alpha as u128)?.mul(&factorize(beta as u128)?.inv());
    let g1 = gcd(a1 as u64, big_a1 as u64);
    let rho0 = PrimeExponentMap::from_pairs(rho.iter().filter(|&(p, _)| g1 % p == 0));

    let base = (a as u128)
        .checked_mul(big_a as u128)
        .and_then(|x| x.checked_mul(det.unsigned_abs() as u128))
        .ok_or(Error::Overflow("aA|det|"))?;
    let delta = base
        .checked_pow(3)
        .and_then(|x| x.checked_mul(2))
        .filter(|&x| x <= u64::MAX as u128)
        .ok_or(Error::Overflow("delta"))? as u64;
    let delta_factors = factorize(delta as u128)?;
    let phi: u64 = delta_factors.iter().map(|(p, e)| (p - 1) * ipow(p, e as u32 - 1)).product();

    // both forms positive from k on
    let first_positive = |u: i64, v: i64| (-v).div_euclid(u) + 1;
    let k = k.max(1).max(first_positive(a, b)).max(first_positive(big_a, big_b));

    let mut fam = RatioFamily {
        a,
        b,
        big_a,
        big_b,
        k,
        det,
        alpha,
        beta,
        a1,
        b1,
        big_a1,
        big_b1,
        rho,
        rho0,
        det1,
        delta,
        delta_factors,
        torsion_exponent: 2 * phi,
        case_tag: CaseTag::FirstCase,
    };
    if first_case_residue(&fam).is_none() {
        fam.case_tag = CaseTag::SecondCase;
    }
    Ok(fam)
}

impl RatioFamily {
    /// `lcm(2, aA|det|)`; the factor 2 of `delta` always takes part in the case split.
    pub fn step_modulus(&self) -> u64 {
        let m = (self.a * self.big_a) as u64 * self.det.unsigned_abs();
        if m % 2 == 0 {
            m
        } else {
            2 * m
        }
    }

    pub fn delta_primes(&self) -> Vec<u64> {
        self.delta_factors.primes().collect()
    }

    /// `gcd(a1, A1)`
    pub fn common_leading(&self) -> u64 {
        gcd(self.a1 as u64, self.big_a1 as u64)
    }

    pub fn numerator(&self, n: i64) -> i128 {
        self.a as i128 * n as i128 + self.b as i128
    }

    pub fn denominator(&self, n: i64) -> i128 {
        self.big_a as i128 * n as i128 + self.big_b as i128
    }

    pub fn reduced_numerator(&self, n: i64) -> i128 {
        self.a1 as i128 * n as i128 + self.b1 as i128
    }

    pub fn reduced_denominator(&self, n: i64) -> i128 {
        self.big_a1 as i128 * n as i128 + self.big_b1 as i128
    }

    /// `(an+b)/(An+B)` factored.
    pub fn ratio(&self, n: i64) -> Result<PrimeExponentMap> {
        let num = factorize(self.numerator(n) as u128)?;
        let den = factorize(self.denominator(n) as u128)?;
        Ok(num.mul(&den.inv()))
    }
}

fn first_case_residue(f: &RatioFamily) -> Option<u64> {
    let m = f.step_modulus();
    let start = f.k.max(1) as u64;
    (start..start + m).find(|&s| {
        let s = s as i64;
        let prod = f.reduced_numerator(s) * f.reduced_denominator(s);
        gcd(modp(prod, m), m) == 1
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum CoprimeClass {
    First { s: u64, modulus: u64 },
    /// `n1` has `2 || a1 n + b1`, `n2` has `2 || A1 n + B1`, everything else coprime.
    Second { n1: u64, n2: u64, modulus: u64 },
}

/// A residue class on which both reduced forms avoid the primes of `aA|det|`
/// (or do so up to one factor 2).
pub fn coprime_class(f: &RatioFamily) -> Result<CoprimeClass> {
    if let Some(s) = first_case_residue(f) {
        return Ok(CoprimeClass::First { s, modulus: f.step_modulus() });
    }
    let m = f.step_modulus();
    let odd = m >> m.trailing_zeros();
    let modulus = 4 * odd;
    let odd_ok = |x: i128| gcd(modp(x, odd), odd) == 1;
    let find = |first: bool| {
        (f.k.max(1)..f.k.max(1) + modulus as i64).find(|&n| {
            let (u, v) = (f.reduced_numerator(n), f.reduced_denominator(n));
            let (two, one) = if first { (u, v) } else { (v, u) };
            two.rem_euclid(4) == 2 && one.rem_euclid(2) == 1 && odd_ok(u) && odd_ok(v)
        })
    };
    match (find(true), find(false)) {
        (Some(n1), Some(n2)) => Ok(CoprimeClass::Second { n1: n1 as u64, n2: n2 as u64, modulus }),
        _ => Err(Error::DichotomyViolated),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Numerator,
    Denominator,
}

/// Arithmetic progression on which the `delta`-part of the reduced ratio and
/// the cofactors modulo `delta` are all constant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureClass {
    pub p: u64,
    pub e: u32,
    pub side: Side,
    /// least member `>= k`
    pub n0: u64,
    pub modulus: u128,
    /// `delta`-primes of `(a1 n + b1)/(A1 n + B1)` on the class
    pub smooth_part: PrimeExponentMap,
    /// `delta`-free cofactors of the two reduced forms, modulo `delta`
    pub cofactors: (u64, u64),
}

impl CaptureClass {
    pub fn member(&self, j: u64) -> u128 {
        self.n0 as u128 + j as u128 * self.modulus
    }
}

// valuations of both forms at n, capped at `cap`
fn vals(u: (i64, i64), v: (i64, i64), n: i64, q: u64, cap: u32) -> (u32, u32) {
    let f = |c: (i64, i64)| {
        let x = c.0 as i128 * n as i128 + c.1 as i128;
        if x == 0 {
            cap
        } else {
            valuation(x, q).min(cap)
        }
    };
    (f(u), f(v))
}

pub fn capture_class(f: &RatioFamily, p: u64, e: u32, side: Side) -> Result<CaptureClass> {
    if f.delta % p != 0 || f.common_leading() % p == 0 || e == 0 {
        return Err(Error::NotCapturable(p));
    }
    let (des, oth) = match side {
        Side::Numerator => ((f.a1, f.b1), (f.big_a1, f.big_b1)),
        Side::Denominator => ((f.big_a1, f.big_b1), (f.a1, f.b1)),
    };
    // per prime: (q, level, minimal valuations, modulus exponent)
    let mut targets: Vec<(u64, u32, (u32, u32), u32)> = Vec::new();
    for (q, t) in f.delta_factors.iter() {
        let t = t as u32;
        let vd = valuation(f.det1 as i128, q);
        let lev = if q == p { e + vd + 2 } else { vd + 2 };
        let qm = ipow(q, lev) as i64;
        let all = (0..qm).map(|n| vals(des, oth, n, q, lev)).filter(|&(x, y)| x < lev && y < lev);
        let best = if q == p {
            all.filter(|&(x, _)| x == e).min_by_key(|&(_, y)| y)
        } else {
            all.min_by_key(|&(x, y)| x + y)
        };
        let (wd, wo) = best.ok_or(Error::NotCapturable(p))?;
        let cd = valuation_or_cap(des.0, q);
        let co = valuation_or_cap(oth.0, q);
        // fix each form modulo q^(w + t) so its q-free cofactor is fixed mod q^t
        let need = |w: u32, c: u32| (w + t).saturating_sub(c);
        targets.push((q, lev, (wd, wo), lev.max(need(wd, cd)).max(need(wo, co))));
    }
    let fits = |n: i64| {
        targets.iter().all(|&(q, lev, (wd, wo), _)| {
            let (x, y) = vals(des, oth, n, q, lev);
            if q == p {
                x == wd && y == wo
            } else {
                x < lev && y < lev && x + y == wd + wo
            }
        })
    };
    let period: i64 = targets.iter().map(|&(q, lev, _, _)| ipow(q, lev) as i64).product();
    let start = f.k.max(1);
    let n0 = (start..start + period).find(|&n| fits(n)).ok_or(Error::NotCapturable(p))?;
    let modulus = targets
        .iter()
        .try_fold(1u128, |m, &(q, _, _, exp)| m.checked_mul((q as u128).checked_pow(exp)?))
        .ok_or(Error::Overflow("capture modulus"))?;
    let n0 = n0 as u64;

    let mut smooth = PrimeExponentMap::new();
    let n = n0 as i64;
    let (mut c1, mut c2) = (f.reduced_numerator(n), f.reduced_denominator(n));
    for &(q, _, _, _) in &targets {
        let v1 = valuation(c1, q);
        let v2 = valuation(c2, q);
        c1 /= (q as i128).pow(v1);
        c2 /= (q as i128).pow(v2);
        smooth.add(q, v1 as i64 - v2 as i64);
    }
    Ok(CaptureClass {
        p,
        e,
        side,
        n0,
        modulus,
        smooth_part: smooth,
        cofactors: (modp(c1, f.delta), modp(c2, f.delta)),
    })
}

fn valuation_or_cap(c: i64, q: u64) -> u32 {
    if c == 0 {
        u32::MAX / 2
    } else {
        valuation(c as i128, q)
    }
}

/// Decides `(u1 n + v1)(u2 n' + v2) = (u1 n' + v1)(u2 n + v2) (mod s)` both
/// directly and through `det0 (n - n') = 0 (mod s)`.
pub fn ratio_congruent(u1: i64, v1: i64, u2: i64, v2: i64, n: i64, n2: i64, s: u64) -> Result<bool> {
    let lin = |u: i64, v: i64, x: i64| modp(u as i128 * x as i128 + v as i128, s);
    let d1 = lin(u2, v2, n);
    let d2 = lin(u2, v2, n2);
    if gcd(d1, s) != 1 || gcd(d2, s) != 1 {
        return Err(Error::InvalidArgument(format!("denominators not coprime to {s}")));
    }
    let mulm = |x: u64, y: u64| crate::arith::mul_mod(x, y, s);
    let direct = mulm(lin(u1, v1, n), d2) == mulm(lin(u1, v1, n2), d1);
    let det0 = u1 as i128 * v2 as i128 - u2 as i128 * v1 as i128;
    let via_det = mulm(modp(det0, s), modp(n as i128 - n2 as i128, s)) == 0;
    assert_eq!(direct, via_det, "cross-multiplication and determinant tests disagree");
    Ok(direct)
}

/// The one-function family `(Ab(aB+1) n + 1)/(Ab n + 1)`.
pub fn reduce_pair(a: i64, b: i64, big_a: i64, big_b: i64) -> Result<RatioFamily> {
    if b <= 0 || big_b <= 0 {
        return Err(Error::InvalidArgument("reduce_pair needs b > 0 and B > 0".into()));
    }
    if a as i128 * big_b as i128 == big_a as i128 * b as i128 {
        return Err(Error::DegenerateFamily);
    }
    let ab = big_a.checked_mul(b).ok_or(Error::Overflow("Ab"))?;
    let u1 = a
        .checked_mul(big_b)
        .and_then(|x| x.checked_add(1))
        .and_then(|x| x.checked_mul(ab))
        .ok_or(Error::Overflow("Ab(aB+1)"))?;
    normalize_family(u1, 1, ab, 1, 1)
}
