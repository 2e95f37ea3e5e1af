//! Brute-force relation lattice of the ratios `(an+b)/(An+B)`, `k <= n <= N`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{factorize, PrimeExponentMap};
use crate::error::{Error, Result};
use crate::family::RatioFamily;

pub type FactoredRational = PrimeExponentMap;

/// Parses `p/q`, an integer, or a product like `2^3*5^-1`.
pub fn parse_rational(s: &str) -> Result<FactoredRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad rational `{s}`"));
    if s.contains('^') || s.contains('*') {
        let mut out = PrimeExponentMap::new();
        for part in s.split('*') {
            let (base, exp) = part.split_once('^').unwrap_or((part, "1"));
            let base: u128 = base.trim().parse().map_err(|_| bad())?;
            let exp: i64 = exp.trim().parse().map_err(|_| bad())?;
            if base == 0 {
                return Err(bad());
            }
            out = out.mul(&factorize(base)?.pow(exp));
        }
        return Ok(out);
    }
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let num: u128 = num.trim().parse().map_err(|_| bad())?;
    let den: u128 = den.trim().parse().map_err(|_| bad())?;
    if num == 0 || den == 0 {
        return Err(bad());
    }
    Ok(factorize(num)?.mul(&factorize(den)?.inv()))
}

/// Smith normal form `U A V = D` with unimodular `U`, `V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnfResult {
    /// diagonal of `D`, length `min(rows, cols)`
    pub diagonal: Vec<BigInt>,
    pub u: Vec<Vec<BigInt>>,
    pub u_inv: Vec<Vec<BigInt>>,
    pub v: Vec<Vec<BigInt>>,
    pub rank: usize,
}

impl SnfResult {
    /// Nonzero invariant factors `d1 | d2 | ...`.
    pub fn invariants(&self) -> Vec<BigInt> {
        self.diagonal[..self.rank].to_vec()
    }
}

fn identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

pub fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut s = BigInt::zero();
                    for t in 0..inner {
                        if !row[t].is_zero() && !b[t][j].is_zero() {
                            s += &row[t] * &b[t][j];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

// row_i -= q row_t
fn row_sub(m: &mut [Vec<BigInt>], i: usize, t: usize, q: &BigInt) {
    let (src, dst) = if i < t {
        let (lo, hi) = m.split_at_mut(t);
        (&hi[0], &mut lo[i])
    } else {
        let (lo, hi) = m.split_at_mut(i);
        (&lo[t], &mut hi[0])
    };
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        if !s.is_zero() {
            *d -= q * s;
        }
    }
}

// col_j -= q col_t
fn col_sub(m: &mut [Vec<BigInt>], j: usize, t: usize, q: &BigInt) {
    for row in m.iter_mut() {
        if !row[t].is_zero() {
            let x = q * &row[t];
            row[j] -= x;
        }
    }
}

fn swap_cols(m: &mut [Vec<BigInt>], i: usize, j: usize) {
    for row in m.iter_mut() {
        row.swap(i, j);
    }
}

pub fn snf(matrix: &[Vec<BigInt>]) -> SnfResult {
    let r = matrix.len();
    let c = matrix.first().map_or(0, |row| row.len());
    let mut a: Vec<Vec<BigInt>> = matrix.to_vec();
    let mut u = identity(r);
    let mut u_inv = identity(r);
    let mut v = identity(c);
    let mut rank = 0;
    for t in 0..r.min(c) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..r {
                for j in t..c {
                    if !a[i][j].is_zero()
                        && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else { break };
            a.swap(t, bi);
            u.swap(t, bi);
            swap_cols(&mut u_inv, t, bi);
            swap_cols(&mut a, t, bj);
            swap_cols(&mut v, t, bj);

            let mut clean = true;
            for i in t + 1..r {
                if !a[i][t].is_zero() {
                    let q = a[i][t].div_floor(&a[t][t]);
                    row_sub(&mut a, i, t, &q);
                    row_sub(&mut u, i, t, &q);
                    // inverse of row_i -= q row_t is col_t += q col_i
                    col_sub(&mut u_inv, t, i, &(-&q));
                    clean &= a[i][t].is_zero();
                }
            }
            for j in t + 1..c {
                if !a[t][j].is_zero() {
                    let q = a[t][j].div_floor(&a[t][t]);
                    col_sub(&mut a, j, t, &q);
                    col_sub(&mut v, j, t, &q);
                    clean &= a[t][j].is_zero();
                }
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..r).find(|&i| (t + 1..c).any(|j| !(&a[i][j] % &a[t][t]).is_zero()));
            match bad {
                Some(i) => {
                    // row_t += row_i
                    let m1 = -BigInt::one();
                    row_sub(&mut a, t, i, &m1);
                    row_sub(&mut u, t, i, &m1);
                    col_sub(&mut u_inv, i, t, &BigInt::one());
                }
                None => break,
            }
        }
        if a[t][t].is_zero() {
            break;
        }
        if a[t][t].is_negative() {
            for x in a[t].iter_mut() {
                *x = -&*x;
            }
            for x in u[t].iter_mut() {
                *x = -&*x;
            }
            for row in u_inv.iter_mut() {
                row[t] = -&row[t];
            }
        }
        rank += 1;
    }
    let diagonal = (0..r.min(c)).map(|i| a[i][i].clone()).collect();
    let out = SnfResult { diagonal, u, u_inv, v, rank };
    debug_assert!(snf_identity_holds(matrix, &out));
    out
}

/// `U A V` is the diagonal and `U U^-1 = 1`.
pub fn snf_identity_holds(matrix: &[Vec<BigInt>], s: &SnfResult) -> bool {
    let r = matrix.len();
    let c = matrix.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return true;
    }
    let d = mat_mul(&mat_mul(&s.u, matrix), &s.v);
    let diag_ok = (0..r).all(|i| {
        (0..c).all(|j| if i == j { d[i][j] == s.diagonal[i] } else { d[i][j].is_zero() })
    });
    let chain_ok = s.diagonal[..s.rank].windows(2).all(|w| (&w[1] % &w[0]).is_zero());
    diag_ok && chain_ok && mat_mul(&s.u, &s.u_inv) == identity(r)
}

/// One column per `n`, each the factored reduced fraction `(an+b)/(An+B)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentMatrix {
    pub primes: Vec<u64>,
    pub columns: Vec<(i64, FactoredRational)>,
}

pub fn exponent_matrix(f: &RatioFamily, n_max: i64) -> Result<ExponentMatrix> {
    exponent_matrix_in(f, n_max, None)
}

/// Columns restricted to `n = n0 mod M` when a class is given.
pub fn exponent_matrix_in(f: &RatioFamily, n_max: i64, class: Option<(i64, i64)>) -> Result<ExponentMatrix> {
    use rayon::prelude::*;
    let columns: Vec<(i64, FactoredRational)> = (f.k..=n_max)
        .into_par_iter()
        .filter(|n| class.map_or(true, |(n0, m)| (n - n0).rem_euclid(m) == 0))
        .map(|n| f.ratio(n).map(|r| (n, r)))
        .collect::<Result<_>>()?;
    let mut primes: Vec<u64> = columns.iter().flat_map(|(_, c)| c.primes()).collect();
    primes.sort_unstable();
    primes.dedup();
    Ok(ExponentMatrix { primes, columns })
}

impl ExponentMatrix {
    pub fn dense(&self) -> Vec<Vec<BigInt>> {
        self.primes
            .iter()
            .map(|&p| self.columns.iter().map(|(_, c)| BigInt::from(c.get(p))).collect())
            .collect()
    }

    /// Plain-text grid, one line `p: e_k ... e_N` per prime.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &p in &self.primes {
            let row: Vec<String> = self.columns.iter().map(|(_, c)| c.get(p).to_string()).collect();
            let _ = writeln!(out, "{p}: {}", row.join(" "));
        }
        out
    }
}

/// Which primes are kept as coordinates; every other prime is eliminated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportPolicy {
    /// keep primes `<= max_prime`; `None` picks the default bound
    pub max_prime: Option<u64>,
    /// primes quotiented out entirely
    pub exclude: Vec<u64>,
    /// only use ratios with `n = n0 mod M`
    #[serde(default)]
    pub restrict_class: Option<(i64, i64)>,
}

impl SupportPolicy {
    pub fn bound_for(&self, f: &RatioFamily, extra: Option<&FactoredRational>) -> u64 {
        let mut y = self.max_prime.unwrap_or_else(|| f.delta_primes().into_iter().max().unwrap_or(2).max(23));
        if let Some(r) = extra {
            y = y.max(r.primes().max().unwrap_or(2));
        }
        y
    }
}

#[derive(Clone, Debug)]
struct Column {
    entries: BTreeMap<u64, BigInt>,
    combo: BTreeMap<i64, BigInt>,
}

impl Column {
    fn get(&self, p: u64) -> BigInt {
        self.entries.get(&p).cloned().unwrap_or_default()
    }

    // self -= q other
    fn sub(&mut self, q: &BigInt, other: &Column) {
        for (p, e) in &other.entries {
            let x = self.entries.entry(*p).or_default();
            *x -= q * e;
            if x.is_zero() {
                self.entries.remove(p);
            }
        }
        for (n, e) in &other.combo {
            let x = self.combo.entry(*n).or_default();
            *x -= q * e;
            if x.is_zero() {
                self.combo.remove(n);
            }
        }
    }

    fn weight(&self) -> usize {
        self.combo.len()
    }
}

// Euclid on the `p` coordinate over `cols[idx]`; returns the index holding the gcd,
// all others end with a zero `p` entry.
// `occ` gains the primes introduced into modified columns.
fn gcd_reduce(cols: &mut [Column], idx: &[usize], p: u64, occ: &mut HashMap<u64, Vec<usize>>) -> Option<usize> {
    let mut idx: Vec<usize> = idx.to_vec();
    idx.sort_by_key(|&i| (cols[i].get(p).abs(), cols[i].weight()));
    let mut piv = *idx.first()?;
    for &i in &idx[1..] {
        let mut other = i;
        loop {
            let (pe, oe) = (cols[piv].get(p), cols[other].get(p));
            if oe.is_zero() {
                break;
            }
            let q = oe.div_floor(&pe);
            let pc = cols[piv].clone();
            cols[other].sub(&q, &pc);
            for &r in pc.entries.keys() {
                occ.entry(r).or_default().push(other);
            }
            if cols[other].get(p).is_zero() {
                break;
            }
            std::mem::swap(&mut piv, &mut other);
        }
    }
    Some(piv)
}

/// Relation sublattice on the kept primes, as an echelon basis with the
/// combination of original indices behind each basis vector.
#[derive(Clone, Debug)]
pub struct ReducedLattice {
    pub rows: Vec<u64>,
    basis: Vec<Column>,
    pub snf: SnfResult,
}

impl ReducedLattice {
    pub fn build(f: &RatioFamily, n_max: i64, support: &[u64], policy: &SupportPolicy) -> Result<Self> {
        let exclude = &policy.exclude;
        let m = exponent_matrix_in(f, n_max, policy.restrict_class)?;
        let keep = |p: u64| support.binary_search(&p).is_ok();
        let mut cols: Vec<Column> = m
            .columns
            .iter()
            .map(|(n, c)| Column {
                entries: c
                    .iter()
                    .filter(|(p, _)| !exclude.contains(p))
                    .map(|(p, e)| (p, BigInt::from(e)))
                    .collect(),
                combo: BTreeMap::from([(*n, BigInt::one())]),
            })
            .collect();
        let mut alive = vec![true; cols.len()];
        let mut occ: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, c) in cols.iter().enumerate() {
            for &p in c.entries.keys() {
                occ.entry(p).or_default().push(i);
            }
        }
        let holding = |cols: &[Column], alive: &[bool], occ: &mut HashMap<u64, Vec<usize>>, p: u64| {
            let mut idx = occ.remove(&p).unwrap_or_default();
            idx.sort_unstable();
            idx.dedup();
            idx.retain(|&i| alive[i] && cols[i].entries.contains_key(&p));
            idx
        };
        let large: Vec<u64> = m.primes.iter().copied().filter(|&p| !keep(p) && !exclude.contains(&p)).rev().collect();
        for p in large {
            let idx = holding(&cols, &alive, &mut occ, p);
            if let Some(piv) = gcd_reduce(&mut cols, &idx, p, &mut occ) {
                alive[piv] = false;
            }
        }
        let mut basis = Vec::new();
        for &p in support {
            let idx = holding(&cols, &alive, &mut occ, p);
            if let Some(piv) = gcd_reduce(&mut cols, &idx, p, &mut occ) {
                alive[piv] = false;
                basis.push(cols[piv].clone());
            }
        }
        let dense: Vec<Vec<BigInt>> =
            support.iter().map(|&p| basis.iter().map(|c| c.get(p)).collect()).collect();
        let snf = snf(&dense);
        Ok(Self { rows: support.to_vec(), basis, snf })
    }

    fn coords(&self, r: &FactoredRational) -> Option<Vec<BigInt>> {
        if r.primes().any(|p| self.rows.binary_search(&p).is_err()) {
            return None;
        }
        Some(self.rows.iter().map(|&p| BigInt::from(r.get(p))).collect())
    }

    /// Order of `r` in the cokernel: `Some(0)` for infinite order, `None` if
    /// `r` is outside the support.
    pub fn order_of(&self, r: &FactoredRational) -> Option<BigInt> {
        let t = self.coords(r)?;
        let w: Vec<BigInt> = self.snf.u.iter().map(|row| row.iter().zip(&t).map(|(a, b)| a * b).sum()).collect();
        if w[self.snf.rank..].iter().any(|x| !x.is_zero()) {
            return Some(BigInt::zero());
        }
        let mut ord = BigInt::one();
        for (d, x) in self.snf.diagonal[..self.snf.rank].iter().zip(&w) {
            ord = ord.lcm(&(d / d.gcd(x)));
        }
        Some(ord)
    }

    /// Integer combination of original indices whose product is `r^v`.
    pub fn solve(&self, r: &FactoredRational, v: &BigInt) -> Option<BTreeMap<i64, BigInt>> {
        let t = self.coords(r)?;
        let w: Vec<BigInt> =
            self.snf.u.iter().map(|row| row.iter().zip(&t).map(|(a, b)| a * b * v).sum()).collect();
        if w[self.snf.rank..].iter().any(|x| !x.is_zero()) {
            return None;
        }
        let mut y = vec![BigInt::zero(); self.basis.len()];
        for i in 0..self.snf.rank {
            if !(&w[i] % &self.snf.diagonal[i]).is_zero() {
                return None;
            }
            y[i] = &w[i] / &self.snf.diagonal[i];
        }
        let mut combo: BTreeMap<i64, BigInt> = BTreeMap::new();
        for (j, col) in self.basis.iter().enumerate() {
            let cj: BigInt = self.snf.v[j].iter().zip(&y).map(|(a, b)| a * b).sum();
            if cj.is_zero() {
                continue;
            }
            for (n, e) in &col.combo {
                let x = combo.entry(*n).or_default();
                *x += &cj * e;
            }
        }
        combo.retain(|_, e| !e.is_zero());
        Some(combo)
    }

    pub fn torsion(&self) -> Vec<u64> {
        self.snf.invariants().iter().filter(|d| !d.is_one()).map(|d| d.to_u64().unwrap_or(u64::MAX)).collect()
    }

    pub fn free_rank(&self) -> usize {
        self.rows.len() - self.snf.rank
    }

    /// Primes whose classes form a basis of the free part, when such a choice exists.
    pub fn free_generators(&self) -> Vec<FactoredRational> {
        let f = self.free_rank();
        if f == 0 {
            return vec![];
        }
        let rank = self.snf.rank;
        let image = |col: usize| -> Vec<BigInt> { (rank..self.rows.len()).map(|i| self.snf.u[i][col].clone()).collect() };
        let mut chosen: Vec<usize> = Vec::new();
        if choose_unimodular(&image, self.rows.len(), f, &mut chosen, 0) {
            return chosen.iter().map(|&c| PrimeExponentMap::from_pairs([(self.rows[c], 1)])).collect();
        }
        (rank..self.rows.len())
            .map(|i| {
                PrimeExponentMap::from_pairs(
                    self.rows.iter().zip(&self.snf.u_inv).map(|(&p, row)| (p, row[i].to_i64().unwrap_or(0))),
                )
            })
            .collect()
    }
}

fn choose_unimodular(
    image: &dyn Fn(usize) -> Vec<BigInt>,
    n: usize,
    f: usize,
    chosen: &mut Vec<usize>,
    start: usize,
) -> bool {
    if chosen.len() == f {
        let m: Vec<Vec<BigInt>> = chosen.iter().map(|&c| image(c)).collect();
        return snf(&m).diagonal.iter().all(|d| d.is_one());
    }
    for c in start..n {
        chosen.push(c);
        if choose_unimodular(image, n, f, chosen, c + 1) {
            return true;
        }
        chosen.pop();
    }
    false
}

fn support_primes(bound: u64, exclude: &[u64]) -> Vec<u64> {
    crate::arith::primes_up_to(bound).into_iter().filter(|p| !exclude.contains(p)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotientInvariants {
    pub support: Vec<u64>,
    pub n_max: i64,
    pub free_rank: usize,
    pub torsion: Vec<u64>,
    pub free_generators: Vec<FactoredRational>,
    pub stabilized: bool,
}

pub fn quotient_invariants(f: &RatioFamily, n_max: i64, policy: &SupportPolicy) -> Result<QuotientInvariants> {
    let support = support_primes(policy.bound_for(f, None), &policy.exclude);
    let full = ReducedLattice::build(f, n_max, &support, policy)?;
    let half_n = (n_max / 2).max(f.k);
    let half = ReducedLattice::build(f, half_n, &support, policy)?;
    let stabilized = half.torsion() == full.torsion() && half.free_rank() == full.free_rank();
    Ok(QuotientInvariants {
        support,
        n_max,
        free_rank: full.free_rank(),
        torsion: full.torsion(),
        free_generators: full.free_generators(),
        stabilized,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub n: i64,
    pub epsilon: i8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Membership {
    InLattice { certificate: Vec<CertificateEntry> },
    TorsionClass { minimal_v: u64, certificate: Vec<CertificateEntry> },
    NotDecidedAtN { n_max: i64, reason: String },
}

fn expand(combo: &BTreeMap<i64, BigInt>) -> Result<Vec<CertificateEntry>> {
    let mut out = Vec::new();
    for (n, e) in combo {
        let times = e.abs().to_u64().ok_or(Error::Overflow("certificate length"))?;
        let epsilon = if e.is_positive() { 1 } else { -1 };
        out.extend(std::iter::repeat(CertificateEntry { n: *n, epsilon }).take(times as usize));
    }
    Ok(out)
}

/// Exact product of the certificate ratios equals `target`.
pub fn verify_certificate(f: &RatioFamily, cert: &[CertificateEntry], target: &FactoredRational) -> Result<bool> {
    let (mut num, mut den) = (BigInt::one(), BigInt::one());
    for c in cert {
        let (x, y) = (BigInt::from(f.numerator(c.n)), BigInt::from(f.denominator(c.n)));
        if c.epsilon > 0 {
            num *= x;
            den *= y;
        } else {
            num *= y;
            den *= x;
        }
    }
    let (mut tn, mut td) = (BigInt::one(), BigInt::one());
    for (p, e) in target.iter() {
        let pe = num_traits::pow(BigInt::from(p), e.unsigned_abs() as usize);
        if e > 0 {
            tn *= pe;
        } else {
            td *= pe;
        }
    }
    Ok(num * td == den * tn)
}

pub fn membership(f: &RatioFamily, r: &FactoredRational, n_max: i64, policy: &SupportPolicy) -> Result<Membership> {
    if r.is_one() {
        return Ok(Membership::InLattice { certificate: vec![] });
    }
    if r.primes().any(|p| policy.exclude.contains(&p)) {
        return Ok(Membership::NotDecidedAtN { n_max, reason: "target uses an excluded prime".into() });
    }
    let support = support_primes(policy.bound_for(f, Some(r)), &policy.exclude);
    let lat = ReducedLattice::build(f, n_max, &support, policy)?;
    let Some(order) = lat.order_of(r) else {
        return Ok(Membership::NotDecidedAtN { n_max, reason: "target outside the support".into() });
    };
    if order.is_zero() {
        return Ok(Membership::NotDecidedAtN { n_max, reason: "infinite order in the truncated quotient".into() });
    }
    let combo = lat.solve(r, &order).expect("order annihilates the class");
    let certificate = expand(&combo)?;
    let target = r.pow(order.to_i64().ok_or(Error::Overflow("order"))?);
    if !verify_certificate(f, &certificate, &target)? {
        return Err(Error::InvalidArgument("certificate failed exact verification".into()));
    }
    if order.is_one() {
        Ok(Membership::InLattice { certificate })
    } else {
        Ok(Membership::TorsionClass { minimal_v: order.to_u64().unwrap_or(u64::MAX), certificate })
    }
}

/// Explicit `(n, epsilon)` list whose product is `r`.
pub fn represent(f: &RatioFamily, r: &FactoredRational, n_max: i64, policy: &SupportPolicy) -> Result<Vec<CertificateEntry>> {
    match membership(f, r, n_max, policy)? {
        Membership::InLattice { certificate } => Ok(certificate),
        Membership::TorsionClass { minimal_v, .. } => {
            Err(Error::NotRepresentable(format!("{r} has order {minimal_v} modulo the relations")))
        }
        Membership::NotDecidedAtN { reason, .. } => Err(Error::NotRepresentable(reason)),
    }
}
