use std::collections::{BTreeMap, HashSet};

use ratgroup_core::arith::gcd;
use ratgroup_core::dualdet::{dual_group, dual_group_with, s_value, theta, theta_direct, GCharacter};
use ratgroup_core::{enumerate_characters, normalize_family, CyclotomicNumber, DirichletCharacter, RatioFamily, RootOfUnity};

fn lcm(a: u64, b: u64) -> u128 {
    (a / gcd(a, b)) as u128 * b as u128
}

fn smooth_numbers(primes: &[u64], limit: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for &p in primes {
        let mut next = Vec::new();
        for &x in &out {
            let mut y = x;
            while y <= limit {
                next.push(y);
                y *= p;
            }
        }
        out = next;
    }
    out.sort_unstable();
    out
}

// delta-smooth pairs with gcd | det and lcm <= limit
fn pairs(f: &RatioFamily, limit: u64) -> Vec<(u64, u64)> {
    let s = smooth_numbers(&f.delta_primes(), limit);
    let mut out = Vec::new();
    for &d1 in &s {
        for &d2 in &s {
            if lcm(d1, d2) <= limit as u128 && f.det.unsigned_abs() % gcd(d1, d2) == 0 {
                out.push((d1, d2));
            }
        }
    }
    out
}

fn quadratic_lift(f: &RatioFamily) -> DirichletCharacter {
    DirichletCharacter::compose(
        f.delta,
        &[
            DirichletCharacter::principal(16),
            enumerate_characters(1_953_125, Some(2)).into_iter().find(|c| !c.is_principal()).unwrap(),
        ],
    )
    .unwrap()
}

fn sample_characters(f: &RatioFamily) -> Vec<DirichletCharacter> {
    if f.delta == 31_250_000 {
        vec![DirichletCharacter::principal(f.delta), quadratic_lift(f)]
    } else {
        enumerate_characters(f.delta, Some(2))
    }
}

#[test]
fn theta_is_bounded_by_inverse_max() {
    for fam in [(3, 1, 5, 2), (5, 1, 5, -1)] {
        let f = normalize_family(fam.0, fam.1, fam.2, fam.3, 1).unwrap();
        let ps = pairs(&f, 10_000);
        for chi in sample_characters(&f) {
            for &(d1, d2) in &ps {
                let t = theta(&f, &chi, d1, d2).unwrap();
                assert!(t.abs_f64() <= 1.0 / d1.max(d2) as f64 + 1e-12, "{fam:?} {chi} {d1} {d2}");
            }
        }
    }
}

#[test]
fn theta_factorization_matches_direct_sum() {
    let f = normalize_family(3, 1, 5, 2, 1).unwrap();
    for chi in enumerate_characters(f.delta, Some(2)) {
        for (d1, d2) in pairs(&f, 30) {
            assert_eq!(theta(&f, &chi, d1, d2).unwrap(), theta_direct(&f, &chi, d1, d2).unwrap(), "{chi} {d1} {d2}");
        }
    }
}

fn value_at(g: &GCharacter, d: u64) -> Option<RootOfUnity> {
    ratgroup_core::factorize(d as u128).unwrap().iter().try_fold(RootOfUnity::ONE, |acc, (p, e)| {
        let v = g.torsion_values.get(&p).copied()?;
        Some(acc.mul(&v.pow(e)))
    })
}

const Y: u64 = 1000;

// sum of 1/max(d1, d2) over admissible pairs with Y < lcm <= 2^40
fn tail(f: &RatioFamily) -> f64 {
    pairs(f, 1 << 40).into_iter().filter(|&(d1, d2)| lcm(d1, d2) > Y as u128).map(|(d1, d2)| 1.0 / d1.max(d2) as f64).sum()
}

fn check_truncation(f: &RatioFamily, g: &GCharacter, tail: f64) {
    let y = Y;
    let mut trunc = CyclotomicNumber::zero(1);
    for (d1, d2) in pairs(f, y) {
        let t = theta(f, &g.chi, d1, d2).unwrap();
        if t.is_zero() {
            continue;
        }
        let w = value_at(g, d1).unwrap().mul(&value_at(g, d2).unwrap().conj());
        trunc = &trunc + &t.mul_root(w);
    }
    let (sr, si) = s_value(f, g).unwrap().to_complex();
    let (tr, ti) = trunc.to_complex();
    let gap = ((sr - tr).powi(2) + (si - ti).powi(2)).sqrt();
    assert!(gap <= tail + 1e-12, "gap {gap} tail {tail}");
}

#[test]
fn factorized_s_value_matches_truncated_double_sum() {
    let f = normalize_family(5, 1, 5, -1, 1).unwrap();
    let t = tail(&f);
    for g2 in [RootOfUnity::new(1, 2), RootOfUnity::ONE, RootOfUnity::new(1, 4)] {
        let g = GCharacter {
            chi: quadratic_lift(&f),
            torsion_values: BTreeMap::from([(2, g2)]),
            rho0_value: RootOfUnity::ONE,
            rho_value: RootOfUnity::ONE,
        };
        check_truncation(&f, &g, t);
    }
    let f = normalize_family(3, 1, 5, 2, 1).unwrap();
    let t = tail(&f);
    for chi in enumerate_characters(f.delta, Some(2)).into_iter().take(6) {
        for k in 0..4 {
            let r = RootOfUnity::new(k, 4);
            let g = GCharacter {
                chi: chi.clone(),
                torsion_values: BTreeMap::from([(2, r), (3, r.conj()), (5, RootOfUnity::ONE)]),
                rho0_value: RootOfUnity::ONE,
                rho_value: RootOfUnity::ONE,
            };
            check_truncation(&f, &g, t);
        }
    }
}

#[test]
fn dual_characters_are_one_on_every_ratio() {
    for (a, b, aa, bb) in [(3, 1, 5, 2), (5, 1, 5, -1), (1, 1, 1, 2)] {
        let f = normalize_family(a, b, aa, bb, 1).unwrap();
        let d = dual_group(&f).unwrap();
        for g in &d.elements {
            for n in f.k..=f.k + 1000 {
                assert!(g.eval_ratio(&f, n).unwrap().is_one(), "{a} {b} {aa} {bb} n={n}");
            }
        }
    }
}

#[test]
fn dual_group_is_closed() {
    for (a, b, aa, bb) in [(3, 1, 5, 2), (5, 1, 5, -1), (1, 1, 1, 2)] {
        let f = normalize_family(a, b, aa, bb, 1).unwrap();
        let d = dual_group(&f).unwrap();
        let set: HashSet<&GCharacter> = d.elements.iter().collect();
        assert!(d.elements.iter().any(|g| g.is_identity()));
        for x in &d.elements {
            assert!(set.contains(&x.inv()));
            for y in &d.elements {
                assert!(set.contains(&x.mul(y)));
            }
        }
    }
}

#[test]
fn filters_are_conservative() {
    let f = normalize_family(3, 1, 5, 2, 1).unwrap();
    let filtered = dual_group_with(&f, true).unwrap();
    let full = dual_group_with(&f, false).unwrap();
    assert!(filtered.candidates_examined <= full.candidates_examined);
    assert_eq!(filtered.elements, full.elements);
    assert_eq!(filtered.torsion_invariants, full.torsion_invariants);
}
