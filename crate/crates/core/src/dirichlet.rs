//! Dirichlet characters labelled by exponent vectors on the canonical
//! generators of `(Z/mZ)^*`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::arith::{gcd, ipow, lcm, mobius, modp, unit_group, UnitGroupStructure};
use crate::cyclotomic::{CyclotomicNumber, RootOfUnity};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DirichletCharacter {
    group: Arc<UnitGroupStructure>,
    exponents: Vec<u64>,
}

impl PartialEq for DirichletCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.group.modulus == other.group.modulus && self.exponents == other.exponents
    }
}

impl Eq for DirichletCharacter {}

impl std::hash::Hash for DirichletCharacter {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.group.modulus.hash(state);
        self.exponents.hash(state);
    }
}

/// Order, conductor and primitivity of a character.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CharacterInvariants {
    pub order: u64,
    pub conductor: u64,
    pub primitive: bool,
}

impl DirichletCharacter {
    pub fn new(group: Arc<UnitGroupStructure>, exponents: Vec<u64>) -> Result<Self> {
        if exponents.len() != group.generators.len() {
            return Err(Error::InvalidArgument(format!(
                "modulus {} needs {} exponents, got {}",
                group.modulus,
                group.generators.len(),
                exponents.len()
            )));
        }
        let exponents = exponents.iter().zip(group.orders()).map(|(&e, o)| e % o).collect();
        Ok(Self { group, exponents })
    }

    pub fn principal(m: u64) -> Self {
        let group = Arc::new(unit_group(m));
        let exponents = vec![0; group.generators.len()];
        Self { group, exponents }
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn group(&self) -> &Arc<UnitGroupStructure> {
        &self.group
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// `chi(n)` as a root of unity, `None` when `gcd(n, m) > 1`.
    pub fn value(&self, n: i128) -> Option<RootOfUnity> {
        let logs = self.group.dlog(n)?;
        Some(self.value_from_logs(&logs))
    }

    pub fn value_from_logs(&self, logs: &[u64]) -> RootOfUnity {
        let orders = self.group.orders();
        let big = orders.iter().copied().fold(1, lcm);
        let mut k: u128 = 0;
        for ((&e, &l), &o) in self.exponents.iter().zip(logs).zip(&orders) {
            k += (e as u128 * l as u128 % o as u128) * (big / o) as u128;
        }
        RootOfUnity::new((k % big as u128) as i128, big)
    }

    /// Exact value; zero off the units.
    pub fn eval(&self, n: i128) -> CyclotomicNumber {
        match self.value(n) {
            Some(r) => CyclotomicNumber::from_root(r),
            None => CyclotomicNumber::zero(1),
        }
    }

    pub fn order(&self) -> u64 {
        self.exponents
            .iter()
            .zip(self.group.orders())
            .map(|(&e, o)| o / gcd(e, o))
            .fold(1, lcm)
    }

    pub fn conj(&self) -> Self {
        let exponents = self
            .exponents
            .iter()
            .zip(self.group.orders())
            .map(|(&e, o)| (o - e) % o)
            .collect();
        Self { group: self.group.clone(), exponents }
    }

    /// Pointwise product of two characters of the same modulus.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.modulus(), other.modulus());
        let exponents = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .zip(self.group.orders())
            .map(|((&a, &b), o)| (a + b) % o)
            .collect();
        Self { group: self.group.clone(), exponents }
    }

    /// One character per prime power `p^t || m`, in increasing prime order.
    pub fn decompose(&self) -> Vec<DirichletCharacter> {
        let offs = self.group.offsets();
        self.group
            .components
            .iter()
            .zip(offs)
            .map(|(c, off)| {
                let group = Arc::new(unit_group(c.q));
                let exps = self.exponents[off..off + c.local_generators.len()].to_vec();
                DirichletCharacter { group, exponents: exps }
            })
            .collect()
    }

    /// Inverse of [`decompose`](Self::decompose).
    pub fn compose(m: u64, components: &[DirichletCharacter]) -> Result<Self> {
        let group = Arc::new(unit_group(m));
        let mut exps = Vec::new();
        if components.len() != group.components.len() {
            return Err(Error::InvalidArgument("component count mismatch".into()));
        }
        for (c, comp) in group.components.iter().zip(components) {
            if comp.modulus() != c.q {
                return Err(Error::InvalidArgument(format!(
                    "component modulus {} does not match {}",
                    comp.modulus(),
                    c.q
                )));
            }
            exps.extend_from_slice(&comp.exponents);
        }
        Ok(Self { group, exponents: exps })
    }

    /// Conductor exponent of a character of prime-power modulus `p^t`.
    fn prime_power_conductor(&self) -> u64 {
        let comp = &self.group.components[0];
        let (p, t) = (comp.p, comp.t);
        if self.is_principal() {
            return 1;
        }
        let start = if p == 2 { 2 } else { 1 };
        for c in start..t {
            // units = 1 mod p^c form the cyclic group generated by 1 + p^c
            let x = 1 + ipow(p, c);
            if self.value(x as i128).is_some_and(|v| v.is_one()) {
                return ipow(p, c);
            }
        }
        comp.q
    }

    pub fn conductor(&self) -> u64 {
        if self.group.components.len() <= 1 {
            if self.group.components.is_empty() {
                return 1;
            }
            return self.prime_power_conductor();
        }
        self.decompose().iter().map(|c| c.prime_power_conductor()).product()
    }

    pub fn invariants(&self) -> CharacterInvariants {
        let conductor = self.conductor();
        CharacterInvariants {
            order: self.order(),
            conductor,
            primitive: conductor == self.modulus(),
        }
    }

    /// The character mod `m` induced by `self` (requires `modulus | m`).
    pub fn lift_to(&self, m: u64) -> Result<Self> {
        if m % self.modulus() != 0 {
            return Err(Error::InvalidArgument(format!("{} does not divide {}", self.modulus(), m)));
        }
        let group = Arc::new(unit_group(m));
        let mut exps = Vec::with_capacity(group.generators.len());
        for &(g, o) in &group.generators {
            let v = self.value(g as i128).expect("generator is a unit");
            if o % v.n != 0 {
                return Err(Error::InvalidArgument("lifted value order mismatch".into()));
            }
            exps.push(v.exponent_in(o));
        }
        Ok(Self { group, exponents: exps })
    }

    /// The character mod `d` inducing `self`, where `conductor | d | modulus`.
    pub fn restrict_to(&self, d: u64) -> Result<Self> {
        if self.modulus() % d != 0 || d % self.conductor() != 0 {
            return Err(Error::InvalidArgument(format!("cannot restrict modulus {} to {}", self.modulus(), d)));
        }
        let group = Arc::new(unit_group(d));
        let mut exps = Vec::with_capacity(group.generators.len());
        for &(g, o) in &group.generators {
            let lift = lift_unit(g, d, self.modulus());
            let v = self.value(lift as i128).expect("lift is a unit");
            exps.push(v.exponent_in(o));
        }
        Ok(Self { group, exponents: exps })
    }

    pub fn label(&self) -> String {
        let e: Vec<String> = self.exponents.iter().map(|e| e.to_string()).collect();
        format!("m={};e={}", self.modulus(), e.join(","))
    }
}

// Smallest residue mod m that is congruent to x mod d and a unit mod m.
fn lift_unit(x: u64, d: u64, m: u64) -> u64 {
    let mut y = x % d;
    while gcd(y, m) != 1 {
        y += d;
    }
    y
}

impl fmt::Display for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for DirichletCharacter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad character label `{s}`"));
        let (m_part, e_part) = s.split_once(';').ok_or_else(bad)?;
        let m: u64 = m_part.strip_prefix("m=").ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let e_str = e_part.strip_prefix("e=").ok_or_else(bad)?.trim();
        let exps: Vec<u64> = if e_str.is_empty() {
            vec![]
        } else {
            e_str.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
        };
        if m == 0 {
            return Err(bad());
        }
        DirichletCharacter::new(Arc::new(unit_group(m)), exps)
    }
}

/// All characters mod `m` (optionally with order dividing `order_divides`), by
/// conductor then exponent vector.
pub fn enumerate_characters(m: u64, order_divides: Option<u64>) -> Vec<DirichletCharacter> {
    let group = Arc::new(unit_group(m));
    let per_gen: Vec<Vec<u64>> = group
        .orders()
        .into_iter()
        .map(|o| match order_divides {
            // chi(g)^d = 1 iff o | e d
            Some(d) => (0..o).filter(|e| (e * d) % o == 0).collect(),
            None => (0..o).collect(),
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_gen.len()];
    loop {
        let exps: Vec<u64> = idx.iter().zip(&per_gen).map(|(&i, v)| v[i]).collect();
        out.push(DirichletCharacter { group: group.clone(), exponents: exps });
        let mut j = per_gen.len();
        loop {
            if j == 0 {
                let mut keyed: Vec<(u64, DirichletCharacter)> =
                    out.into_iter().map(|c| (c.conductor(), c)).collect();
                keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.exponents.cmp(&b.1.exponents)));
                return keyed.into_iter().map(|(_, c)| c).collect();
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < per_gen[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// `sum_{r mod p^t} chi(r) zeta_{p^t}^r` for a primitive character of prime-power modulus.
pub fn gauss_sum(chi: &DirichletCharacter) -> Result<CyclotomicNumber> {
    let m = chi.modulus();
    if chi.group.components.len() != 1 {
        return Err(Error::InvalidArgument(format!("modulus {m} is not a prime power")));
    }
    let conductor = chi.conductor();
    if conductor != m {
        return Err(Error::NotPrimitive { conductor, modulus: m });
    }
    let big = lcm(m, chi.order());
    let mut counts = vec![0i64; big as usize];
    for r in 0..m {
        if let Some(v) = chi.value(r as i128) {
            let k = (v.exponent_in(big) + r * (big / m)) % big;
            counts[k as usize] += 1;
        }
    }
    Ok(CyclotomicNumber::from_counts(big, &counts))
}

/// Ramanujan sum `c_m(x)` by the Möbius formula.
pub fn ramanujan_sum(m: u64, x: i128) -> i64 {
    assert!(m >= 1);
    let g = gcd(modp(x, m), m);
    let g = if g == 0 { m } else { g };
    crate::arith::divisors(g)
        .into_iter()
        .map(|d| mobius(m / d) * d as i64)
        .sum()
}

/// `sum_{(z, m) = 1} zeta_m^(x z)`, computed term by term.
pub fn ramanujan_sum_direct(m: u64, x: i128) -> CyclotomicNumber {
    let mut counts = vec![0i64; m as usize];
    for z in 0..m {
        if gcd(z, m) == 1 {
            counts[(modp(x * z as i128, m)) as usize] += 1;
        }
    }
    CyclotomicNumber::from_counts(m, &counts)
}
