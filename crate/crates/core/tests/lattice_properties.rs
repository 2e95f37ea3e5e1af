use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratgroup_core::dualdet::dual_group;
use ratgroup_core::lattice::{exponent_matrix, mat_mul, quotient_invariants, snf, SupportPolicy};
use ratgroup_core::normalize_family;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Vec<Vec<BigInt>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.gen_bool(density) { BigInt::from(rng.gen_range(-3..=3)) } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

fn check_identity(a: &[Vec<BigInt>]) {
    let r = snf(a);
    let rows = a.len();
    let cols = a.first().map_or(0, |x| x.len());
    let uav = mat_mul(&mat_mul(&r.u, a), &r.v);
    for i in 0..rows {
        for j in 0..cols {
            let want = if i == j && i < r.diagonal.len() { r.diagonal[i].clone() } else { BigInt::zero() };
            assert_eq!(uav[i][j], want, "entry ({i}, {j})");
        }
    }
    let uu = mat_mul(&r.u, &r.u_inv);
    for (i, row) in uu.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert_eq!(x.is_one(), i == j, "U U^-1 at ({i}, {j})");
            assert!(i == j || x.is_zero());
        }
    }
    for w in r.diagonal[..r.rank].windows(2) {
        assert!((&w[1] % &w[0]).is_zero(), "divisibility chain");
    }
}

#[test]
fn snf_identities_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..40 {
        let rows = rng.gen_range(1..12);
        let cols = rng.gen_range(1..40);
        let a = random_matrix(&mut rng, rows, cols, 0.5);
        check_identity(&a);
    }
    for (rows, cols) in [(30, 300), (60, 600), (200, 2000)] {
        let a = random_matrix(&mut rng, rows, cols, 0.02);
        check_identity(&a);
    }
}

#[test]
fn columns_reconstruct_their_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (a, b, aa, bb) in [(5, 1, 5, -1), (3, 1, 5, 2), (7, 3, 2, 1)] {
        let f = normalize_family(a, b, aa, bb, 1).unwrap();
        let m = exponent_matrix(&f, 5000).unwrap();
        for _ in 0..100 {
            let (n, col) = &m.columns[rng.gen_range(0..m.columns.len())];
            let (mut num, mut den) = (BigInt::one(), BigInt::one());
            for (p, e) in col.iter() {
                let pe = BigInt::from(p).pow(e.unsigned_abs() as u32);
                if e > 0 {
                    num *= pe;
                } else {
                    den *= pe;
                }
            }
            assert_eq!(num * BigInt::from(f.denominator(*n)), den * BigInt::from(f.numerator(*n)), "n = {n}");
        }
    }
}

#[test]
fn oracle_torsion_agrees_with_dual_group() {
    for (a, b, aa, bb) in [(3, 1, 5, 2), (5, 1, 5, -1), (1, 1, 1, 2)] {
        let f = normalize_family(a, b, aa, bb, 1).unwrap();
        let q = quotient_invariants(&f, 1000, &SupportPolicy::default()).unwrap();
        assert!(q.stabilized);
        let d = dual_group(&f).unwrap();
        assert_eq!(q.torsion, d.torsion_invariants, "{a} {b} {aa} {bb}");
        assert_eq!(q.free_rank, d.analytic_free_rank, "{a} {b} {aa} {bb}");
    }
}
