//! Empirical correlation means `g(an+b) conj(g(An+B))` and their Euler products.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{gcd, primes_up_to, valuation};
use crate::cyclotomic::RootOfUnity;
use crate::dirichlet::DirichletCharacter;
use crate::dualdet::GCharacter;
use crate::error::{Error, Result};
use crate::family::RatioFamily;

const CHUNK: usize = 1 << 16;
const ZERO: u64 = u64::MAX;

/// Completely multiplicative `g`: the character off its modulus, explicit values on it.
/// An override of `None` means `g(p) = 0`.
#[derive(Clone, Debug)]
pub struct MultFunctionSpec {
    pub base: DirichletCharacter,
    pub overrides: BTreeMap<u64, Option<RootOfUnity>>,
}

impl MultFunctionSpec {
    pub fn new(base: DirichletCharacter, overrides: BTreeMap<u64, Option<RootOfUnity>>) -> Result<Self> {
        let m = base.modulus();
        if let Some(&p) = overrides.keys().find(|&&p| m % p != 0) {
            return Err(Error::InvalidArgument(format!("override at {p}, which does not divide {m}")));
        }
        Ok(MultFunctionSpec { base, overrides })
    }

    pub fn trivial() -> Self {
        MultFunctionSpec { base: DirichletCharacter::principal(1), overrides: BTreeMap::new() }
    }

    /// Character with every prime of the modulus sent to 1.
    pub fn from_character(chi: &DirichletCharacter) -> Self {
        let overrides = crate::arith::distinct_primes(chi.modulus())
            .into_iter()
            .map(|p| (p, Some(RootOfUnity::ONE)))
            .collect();
        MultFunctionSpec { base: chi.clone(), overrides }
    }

    /// Extension of a dual element to all primes. Primes of `gcd(a1, A1)` get values
    /// whose product over `rho0` is the stored `rho0` value.
    pub fn from_gcharacter(f: &RatioFamily, g: &GCharacter) -> Self {
        let mut overrides: BTreeMap<u64, Option<RootOfUnity>> =
            crate::arith::distinct_primes(g.chi.modulus()).into_iter().map(|p| (p, Some(RootOfUnity::ONE))).collect();
        for (&p, &v) in &g.torsion_values {
            overrides.insert(p, Some(v));
        }
        let mut pinned = false;
        for (p, e) in f.rho0.iter() {
            let v = if !pinned && e != 0 {
                pinned = true;
                let w = g.rho0_value;
                let r = RootOfUnity::new(w.k as i128, w.n * e.unsigned_abs());
                if e < 0 {
                    r.conj()
                } else {
                    r
                }
            } else {
                RootOfUnity::ONE
            };
            overrides.insert(p, Some(v));
        }
        MultFunctionSpec { base: g.chi.clone(), overrides }
    }

    pub fn at_prime(&self, p: u64) -> Option<RootOfUnity> {
        match self.overrides.get(&p) {
            Some(v) => *v,
            None => self.base.value(p as i128),
        }
    }

    fn common_order(&self) -> u64 {
        self.overrides
            .values()
            .flatten()
            .map(|r| r.n)
            .fold(self.base.order(), crate::arith::lcm)
    }
}

/// Sum with Neumaier compensation.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Exponents of `g(m)` over a common order for all `m <= limit`, `ZERO` where `g(m) = 0`.
struct ValueTable {
    order: u64,
    values: Vec<u64>,
}

impl ValueTable {
    fn build(g: &MultFunctionSpec, limit: usize) -> Self {
        let order = g.common_order();
        let mut spf = vec![0u32; limit + 1];
        let mut primes = Vec::new();
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            for &p in &primes {
                let j = i * p as usize;
                if p > spf[i] || j > limit {
                    break;
                }
                spf[j] = p;
            }
        }
        let prime_values: Vec<u64> = primes
            .par_iter()
            .map(|&p| match g.at_prime(p as u64) {
                Some(r) => r.exponent_in(order),
                None => ZERO,
            })
            .collect();
        let mut values = vec![0u64; limit + 1];
        values[0] = ZERO;
        for (&p, &v) in primes.iter().zip(&prime_values) {
            values[p as usize] = v;
        }
        for m in 2..=limit {
            let p = spf[m] as usize;
            if p == m {
                continue;
            }
            let (u, v) = (values[p], values[m / p]);
            values[m] = if u == ZERO || v == ZERO { ZERO } else { (u + v) % order };
        }
        ValueTable { order, values }
    }

    fn get(&self, m: i128) -> u64 {
        self.values[m as usize]
    }
}

fn unit(k: u64, n: u64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

/// Mean of `g(an+b) conj(g(An+B))` over `k <= n <= x`.
pub fn empirical_corr(g: &MultFunctionSpec, f: &RatioFamily, x: u64) -> Result<Complex64> {
    let k = f.k.max(1) as u64;
    if x < k {
        return Err(Error::InvalidArgument(format!("x = {x} is below k = {k}")));
    }
    let top = f.numerator(x as i64).max(f.denominator(x as i64)).max(x as i128);
    let table = ValueTable::build(g, top as usize);
    let order = table.order;
    let roots: Option<Vec<Complex64>> =
        (order <= 1 << 20).then(|| (0..order).map(|j| unit(j, order)).collect());
    let starts: Vec<u64> = (k..=x).step_by(CHUNK).collect();
    let partial: Vec<(Compensated, Compensated)> = starts
        .par_iter()
        .map(|&s| {
            let mut re = Compensated::default();
            let mut im = Compensated::default();
            for n in s..=(s + CHUNK as u64 - 1).min(x) {
                let u = table.get(f.numerator(n as i64));
                let v = table.get(f.denominator(n as i64));
                if u == ZERO || v == ZERO {
                    continue;
                }
                let e = (u + order - v) % order;
                let z = match &roots {
                    Some(r) => r[e as usize],
                    None => unit(e, order),
                };
                re.add(z.re);
                im.add(z.im);
            }
            (re, im)
        })
        .collect();
    let mut re = Compensated::default();
    let mut im = Compensated::default();
    for (r, i) in partial {
        re.add(r.value());
        im.add(i.value());
    }
    let count = (x - k + 1) as f64;
    Ok(Complex64::new(re.value() / count, im.value() / count))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EulerCase {
    #[serde(rename = "coprime_aA")]
    CoprimeAa,
    #[serde(rename = "divides_A_only")]
    DividesBigAOnly,
    DividesAOnly,
    DividesBoth,
    #[serde(rename = "general_lemmaC")]
    General,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EulerFactor {
    pub q: u64,
    pub re: f64,
    pub im: f64,
    pub case: EulerCase,
}

impl EulerFactor {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn complex_at(g: &MultFunctionSpec, q: u64) -> Complex64 {
    match g.at_prime(q) {
        Some(r) => {
            let (c, s) = r.to_complex();
            Complex64::new(c, s)
        }
        None => Complex64::new(0.0, 0.0),
    }
}

/// Local factor at `q` of the reduced pair `a1 n + b1`, `A1 n + B1`.
pub fn euler_factor(g: &MultFunctionSpec, f: &RatioFamily, q: u64) -> EulerFactor {
    let z = complex_at(g, q);
    let qf = q as f64;
    let in_a = f.a1 % q as i64 == 0;
    let in_big_a = f.big_a1 % q as i64 == 0;
    let (w, case) = match (in_a, in_big_a) {
        (true, true) => (Complex64::new(1.0, 0.0), EulerCase::DividesBoth),
        (false, true) => ((qf - 1.0) / (qf - z), EulerCase::DividesBigAOnly),
        (true, false) => ((qf - 1.0) / (qf - z.conj()), EulerCase::DividesAOnly),
        (false, false) if g.at_prime(q).is_some() => {
            let dq = valuation(f.det1 as i128, q) as i32;
            let t = (z - 1.0) / (qf - z);
            (Complex64::new(1.0 + qf.powi(-dq) * 2.0 * t.re, 0.0), EulerCase::CoprimeAa)
        }
        (false, false) => (general_series(f, q, z), EulerCase::General),
    };
    EulerFactor { q, re: w.re, im: w.im, case }
}

/// Local expectation of `g(q)^(v(X) - v(Y))` with `X = a1 n + b1`, `Y = A1 n + B1`,
/// summed over exact valuation pairs.
pub fn general_series(f: &RatioFamily, q: u64, z: Complex64) -> Complex64 {
    let qf = q as f64;
    let in_a = f.a1 % q as i64 == 0;
    let in_big_a = f.big_a1 % q as i64 == 0;
    let dq = valuation(f.det1 as i128, q);
    // P(v(X) >= s, v(Y) >= t)
    let tail = |s: u32, t: u32| -> f64 {
        if (s > 0 && in_a) || (t > 0 && in_big_a) {
            return 0.0;
        }
        if s > 0 && t > 0 && s.min(t) > dq {
            return 0.0;
        }
        qf.powi(-(s.max(t) as i32))
    };
    let depth = dq + (60.0 / qf.log2()).ceil() as u32 + 2;
    let mut w = Complex64::new(0.0, 0.0);
    let zc = z.conj();
    for s in 0..=depth {
        for t in 0..=depth {
            let p = tail(s, t) - tail(s + 1, t) - tail(s, t + 1) + tail(s + 1, t + 1);
            if p != 0.0 {
                w += p * z.powu(s) * zc.powu(t);
            }
        }
    }
    w
}

/// `g(alpha) conj(g(beta))` times the product of local factors for `q <= bound`.
pub fn euler_product(g: &MultFunctionSpec, f: &RatioFamily, bound: u64) -> Complex64 {
    let mut acc = leading_factor(g, f);
    for q in primes_up_to(bound) {
        acc *= euler_factor(g, f, q).value();
    }
    acc
}

fn leading_factor(g: &MultFunctionSpec, f: &RatioFamily) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for (p, e) in f.rho.iter() {
        acc *= complex_at(g, p).powi(e as i32);
    }
    acc
}

/// Diagnostic `sum_j sum_{log x < p <= x} |s_j(p)|^2 / p`.
pub fn s_diagnostic(g: &MultFunctionSpec, f: &RatioFamily, x: u64) -> f64 {
    let lo = (x as f64).ln();
    let det = f.det1.unsigned_abs();
    let mut acc = Compensated::default();
    for p in primes_up_to(x) {
        if (p as f64) <= lo {
            continue;
        }
        let z = complex_at(g, p);
        let s_abs2 = if det % p == 0 { (z.norm_sqr() - 1.0).powi(2) } else { (z - 1.0).norm_sqr() };
        for lead in [f.a1, f.big_a1] {
            if gcd(lead.unsigned_abs(), p) == 1 {
                acc.add(s_abs2 / p as f64);
            }
        }
    }
    acc.value()
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrReport {
    pub mean_re: f64,
    pub mean_im: f64,
    pub product_re: f64,
    pub product_im: f64,
    pub abs_diff: f64,
    #[serde(rename = "S_x")]
    pub s_x: f64,
    pub x: u64,
    #[serde(rename = "P")]
    pub p: u64,
}

pub fn corr_report(g: &MultFunctionSpec, f: &RatioFamily, x: u64, bound: u64) -> Result<CorrReport> {
    if bound < 2 {
        return Err(Error::InvalidArgument("prime bound must be at least 2".into()));
    }
    let mean = empirical_corr(g, f, x)?;
    let product = euler_product(g, f, bound);
    Ok(CorrReport {
        mean_re: mean.re,
        mean_im: mean.im,
        product_re: product.re,
        product_im: product.im,
        abs_diff: (mean - product).norm(),
        s_x: s_diagnostic(g, f, x),
        x,
        p: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::enumerate_characters;
    use crate::dualdet::dual_group;
    use crate::family::normalize_family;

    fn quadratic(m: u64) -> DirichletCharacter {
        enumerate_characters(m, None).into_iter().find(|c| c.order() == 2).unwrap()
    }

    #[test]
    fn trivial_function_has_mean_one() {
        let f = normalize_family(5, 1, 5, -1, 1).unwrap();
        let g = MultFunctionSpec::trivial();
        assert_eq!(empirical_corr(&g, &f, 10_000).unwrap(), Complex64::new(1.0, 0.0));
        for q in primes_up_to(50) {
            assert!((euler_factor(&g, &f, q).value() - 1.0).norm() < 1e-15);
        }
        let r = corr_report(&g, &f, 5_000, 100).unwrap();
        assert_eq!(r.abs_diff, 0.0);
    }

    #[test]
    fn quadratic_mod_five_is_termwise_one() {
        let f = normalize_family(5, 1, 5, -1, 1).unwrap();
        let g = MultFunctionSpec::from_character(&quadratic(5));
        assert_eq!(empirical_corr(&g, &f, 100_000).unwrap(), Complex64::new(1.0, 0.0));
        let w = euler_factor(&g, &f, 5);
        assert_eq!(w.case, EulerCase::DividesBoth);
        assert_eq!(w.value(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn two_adic_factor_closed_form() {
        let f = normalize_family(5, 1, 5, -1, 1).unwrap();
        let chi = DirichletCharacter::principal(2);
        let mut o = BTreeMap::new();
        o.insert(2, Some(RootOfUnity::new(1, 2)));
        let g = MultFunctionSpec::new(chi, o).unwrap();
        let w = euler_factor(&g, &f, 2);
        assert_eq!(w.case, EulerCase::CoprimeAa);
        assert!((w.re - 1.0 / 3.0).abs() < 1e-15);
        assert!((general_series(&f, 2, Complex64::new(-1.0, 0.0)) - w.value()).norm() < 1e-12);
    }

    #[test]
    fn closed_forms_match_series() {
        for (a, b, aa, bb) in [(5, 1, 5, -1), (3, 1, 5, 2), (4, 1, 6, 1), (1, 1, 1, 9), (2, 1, 3, 1)] {
            let f = normalize_family(a, b, aa, bb, 1).unwrap();
            for q in [2u64, 3, 5, 7] {
                for k in 0..6 {
                    let r = RootOfUnity::new(k, 6);
                    let (c, s) = r.to_complex();
                    let z = Complex64::new(c, s);
                    let mut o = BTreeMap::new();
                    o.insert(q, Some(r));
                    let g = MultFunctionSpec::new(DirichletCharacter::principal(q), o).unwrap();
                    let w = euler_factor(&g, &f, q);
                    assert!((w.value() - general_series(&f, q, z)).norm() < 1e-12, "{a} {b} {aa} {bb} q={q}");
                    assert!(w.value().norm() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_override_restricts_support() {
        let f = normalize_family(1, 1, 1, 2, 1).unwrap();
        let mut o = BTreeMap::new();
        o.insert(3, None);
        let g = MultFunctionSpec::new(DirichletCharacter::principal(3), o).unwrap();
        let x = 30_000u64;
        let mean = empirical_corr(&g, &f, x).unwrap();
        let hits = (1..=x).filter(|n| (n + 1) % 3 != 0 && (n + 2) % 3 != 0).count();
        assert!((mean.re - hits as f64 / x as f64).abs() < 1e-12);
        assert_eq!(euler_factor(&g, &f, 3).case, EulerCase::General);
        assert!((euler_factor(&g, &f, 3).re - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dual_character_of_reference_family() {
        let f = normalize_family(5, 1, 5, -1, 1).unwrap();
        let dual = dual_group(&f).unwrap();
        for g in &dual.elements {
            let spec = MultFunctionSpec::from_gcharacter(&f, g);
            let m = empirical_corr(&spec, &f, 20_000).unwrap();
            assert!((m - 1.0).norm() < 1e-9, "{m}");
        }
    }

    #[test]
    fn euler_product_tail_is_small() {
        for (a, b, aa, bb, p) in [(1, 1, 1, 2, 3u64), (5, 1, 5, -1, 2), (3, 1, 5, 2, 2)] {
            let f = normalize_family(a, b, aa, bb, 1).unwrap();
            for r in [RootOfUnity::new(1, 2), RootOfUnity::new(1, 4), RootOfUnity::new(1, 3)] {
                let mut o = BTreeMap::new();
                o.insert(p, Some(r));
                let g = MultFunctionSpec::new(DirichletCharacter::principal(p), o).unwrap();
                let d = (euler_product(&g, &f, 10_000) - euler_product(&g, &f, 20_000)).norm();
                assert!(d < 1e-4, "{d}");
            }
        }
    }

    #[test]
    fn three_adic_character_correlation() {
        // g(n) = chi_3(n / 3^v): the mean is decided at 3 alone and the product is not its limit
        let f = normalize_family(1, 1, 1, 2, 1).unwrap();
        let mut o = BTreeMap::new();
        o.insert(3, Some(RootOfUnity::ONE));
        let g = MultFunctionSpec::new(quadratic(3), o).unwrap();
        let r = corr_report(&g, &f, 200_000, 10_000).unwrap();
        assert!((r.mean_re + 1.0 / 3.0).abs() < 1e-3, "{r:?}");
        assert!(r.product_re.abs() < 0.02);
        assert!(r.s_x > 1.0);
    }

    #[test]
    fn finite_twist_matches_product() {
        let f = normalize_family(5, 1, 5, -1, 1).unwrap();
        let mut o = BTreeMap::new();
        o.insert(2, Some(RootOfUnity::new(1, 2)));
        let g = MultFunctionSpec::new(DirichletCharacter::principal(2), o).unwrap();
        let r = corr_report(&g, &f, 200_000, 1_000).unwrap();
        assert!((r.product_re - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.abs_diff < 1e-3, "{r:?}");
    }
}
