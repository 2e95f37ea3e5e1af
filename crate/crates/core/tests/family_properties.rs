use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratgroup_core::arith::{gcd, valuation};
use ratgroup_core::family::{capture_class, coprime_class, ratio_congruent, CoprimeClass, Side};
use ratgroup_core::normalize_family;

const FAMILIES: [(i64, i64, i64, i64); 6] = [(3, 1, 5, 2), (5, 1, 5, -1), (1, 1, 1, 2), (2, 1, 3, 1), (4, 1, 6, 1), (7, 3, 2, 1)];

#[test]
fn coprime_classes_satisfy_their_conditions() {
    for (a, b, aa, bb) in FAMILIES {
        let f = normalize_family(a, b, aa, bb, 1).unwrap();
        let bad = (f.a * f.big_a) as u64 * f.det.unsigned_abs();
        let x = |n: i64| (f.a1 * n + f.b1).unsigned_abs();
        let y = |n: i64| (f.big_a1 * n + f.big_b1).unsigned_abs();
        match coprime_class(&f).unwrap() {
            CoprimeClass::First { s, modulus } => {
                let mut n = s as i64;
                while n <= f.k + 10_000 {
                    if n >= f.k {
                        assert_eq!(gcd(x(n) * y(n), bad), 1, "{a} {b} {aa} {bb} n={n}");
                    }
                    n += modulus as i64;
                }
            }
            CoprimeClass::Second { n1, n2, modulus } => {
                for (start, two_side) in [(n1, 0), (n2, 1)] {
                    let mut n = start as i64;
                    while n <= f.k + 10_000 {
                        if n >= f.k {
                            let (mut u, mut v) = (x(n), y(n));
                            let two = if two_side == 0 { &mut u } else { &mut v };
                            assert_eq!(valuation(*two as i128, 2), 1, "{a} {b} {aa} {bb} n={n}");
                            *two /= 2;
                            assert_eq!(gcd(u * v, bad), 1, "{a} {b} {aa} {bb} n={n}");
                        }
                        n += modulus as i64;
                    }
                }
            }
        }
    }
}

#[test]
fn ratio_congruent_procedures_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut done = 0;
    while done < 10_000 {
        let s = rng.gen_range(2..5000u64);
        let (u1, v1, u2, v2) = (rng.gen_range(-50..50), rng.gen_range(-50..50), rng.gen_range(-50..50), rng.gen_range(-50..50));
        let (n, n2) = (rng.gen_range(0..100_000), rng.gen_range(0..100_000));
        if let Ok(r) = ratio_congruent(u1, v1, u2, v2, n, n2, s) {
            let det0 = (u1 * v2 - u2 * v1) as i128;
            assert_eq!(r, (det0 * (n - n2) as i128).rem_euclid(s as i128) == 0);
            done += 1;
        }
    }
}

#[test]
fn capture_classes_match_template() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (a, b, aa, bb, p, e, side) in [
        (5, 1, 5, -1, 2, 4, Side::Numerator),
        (5, 1, 5, -1, 2, 3, Side::Denominator),
        (3, 1, 5, 2, 3, 1, Side::Denominator),
        (3, 1, 5, 2, 5, 2, Side::Numerator),
        (3, 1, 5, 2, 2, 2, Side::Denominator),
    ] {
        let f = normalize_family(a, b, aa, bb, 1).unwrap();
        let c = capture_class(&f, p, e, side).unwrap();
        for _ in 0..10 {
            let n = c.n0 as i128 + rng.gen_range(0..50i128) * c.modulus as i128;
            let x = f.a1 as i128 * n + f.b1 as i128;
            let y = f.big_a1 as i128 * n + f.big_b1 as i128;
            for q in f.delta_primes() {
                let got = valuation(x, q) as i64 - valuation(y, q) as i64;
                assert_eq!(got, c.smooth_part.get(q), "{a} {b} {aa} {bb} q={q} n={n}");
            }
            let (vx, vy) = (valuation(x, p), valuation(y, p));
            match side {
                Side::Numerator => assert_eq!(vx, e),
                Side::Denominator => assert_eq!(vy, e),
            }
        }
    }
}
