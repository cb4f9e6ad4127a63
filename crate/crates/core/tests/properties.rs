use std::collections::BTreeMap;

use fermat_jets::base_rings::{EisensteinConfig, Elem, Field};
use fermat_jets::delta_calculus::Flavor;
use fermat_jets::jet_series::{dump, parse_dump, series_ring};
use fermat_jets::modular_forms::{hecke_t_coeffs, synthesize};
use fermat_jets::suites::random_pi_series;
use num_bigint::BigInt;
use num_traits::Pow;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cyclo5() -> std::sync::Arc<Field> {
    Field::ramified(5, 8, EisensteinConfig::cyclotomic(5)).unwrap()
}

fn pure7() -> std::sync::Arc<Field> {
    Field::ramified(7, 8, EisensteinConfig::pure(7, 2).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fermat_quotient_on_integers(x in -10_000i64..10_000, p in prop::sample::select(vec![5u32, 7, 11])) {
        let f = Field::zp(p, 8).unwrap();
        let d = f.delta_p(&f.from_int(x)).unwrap();
        let xb = BigInt::from(x);
        let want = (&xb - Pow::pow(&xb, p)) / BigInt::from(p);
        prop_assert!(f.eq(&d, &f.from_bigint(&want)));
    }

    #[test]
    fn pi_derivation_axioms(seed in any::<u64>()) {
        for f in [cyclo5(), pure7()] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y) = (f.random_integral(&mut rng), f.random_integral(&mut rng));
            let d = |z: &Elem| f.delta_pi(z).unwrap();
            let sum = f.add(&f.add(&d(&x), &d(&y)), &f.c_pi(&x, &y));
            prop_assert!(f.eq(&d(&f.add(&x, &y)), &sum));
            let p = f.p() as u64;
            let prod = f.add(
                &f.add(&f.mul(&f.pow(&x, p), &d(&y)), &f.mul(&f.pow(&y, p), &d(&x))),
                &f.mul(&f.pi(), &f.mul(&d(&x), &d(&y))),
            );
            prop_assert!(f.eq(&d(&f.mul(&x, &y)), &prod));
            // φ(x) = x^p + π δ_π x is a ring map
            let phi = |z: &_| f.frobenius(z);
            prop_assert!(f.eq(&phi(&f.mul(&x, &y)), &f.mul(&phi(&x), &phi(&y))));
            prop_assert!(f.eq(&phi(&x), &f.add(&f.pow(&x, p), &f.mul(&f.pi(), &d(&x)))));
        }
    }

    #[test]
    fn trace_is_linear(seed in any::<u64>(), a in -50i64..50, b in -50i64..50) {
        let f = cyclo5();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (f.random_integral(&mut rng), f.random_integral(&mut rng));
        let lhs = f.trace(&f.add(&f.mul_int(&x, a), &f.mul_int(&y, b)));
        let rhs = f.add(&f.mul_int(&f.trace(&x), a), &f.mul_int(&f.trace(&y), b));
        prop_assert!(f.eq(&lhs, &rhs));
    }

    #[test]
    fn elements_survive_format_and_parse(seed in any::<u64>(), shift in -3i64..3) {
        let f = pure7();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = f.mul_p_pow(&f.random_integral(&mut rng), shift);
        let back = f.parse(&f.format(&x)).unwrap();
        prop_assert!(f.eq(&x, &back));
    }

    #[test]
    fn dumps_round_trip(seed in any::<u64>(), r in 1usize..3) {
        let f = cyclo5();
        let ring = series_ring(&f, Flavor::Pi, r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_pi_series(&ring, &mut rng, 6, 6, r);
        let text = dump(&s);
        let back = parse_dump(&ring, &text, i32::MIN).unwrap();
        prop_assert!(back.equals(&s));
        prop_assert_eq!(dump(&back), text);
    }

    #[test]
    fn hecke_operators_multiply_on_coprime_indices(
        a in prop::collection::vec(-1000i64..1000, 61),
        m in 1u64..6,
        n in 1u64..6,
        level in prop::sample::select(vec![1u64, 7, 35]),
    ) {
        prop_assume!(num_integer::Integer::gcd(&m, &n) == 1);
        let a: Vec<BigInt> = a.into_iter().map(BigInt::from).collect();
        let mn = hecke_t_coeffs(2, level, m * n, &a);
        let m_then_n = hecke_t_coeffs(2, level, m, &hecke_t_coeffs(2, level, n, &a));
        let n_then_m = hecke_t_coeffs(2, level, n, &hecke_t_coeffs(2, level, m, &a));
        prop_assert_eq!(&mn, &m_then_n);
        prop_assert_eq!(&mn, &n_then_m);
    }

    #[test]
    fn synthesized_coefficients_are_multiplicative(a2 in -2i64..=2, a3 in -3i64..=3, a7 in prop::sample::select(vec![-1i64, 1])) {
        let vals = BTreeMap::from([(2, a2), (3, a3), (5, 1), (7, a7)]);
        let h = synthesize(7, 5, 2, &vals, 60, true).unwrap();
        for m in 1..=60usize {
            for n in 1..=60 / m {
                if num_integer::Integer::gcd(&m, &n) == 1 {
                    prop_assert_eq!(h.coeff(m * n).clone(), h.coeff(m) * h.coeff(n));
                }
            }
        }
        // a_{p^k} = a_p^k for p dividing the level
        prop_assert_eq!(h.coeff(25).clone(), BigInt::from(1));
        prop_assert_eq!(h.coeff(49).clone(), BigInt::from(a7 * a7));
    }
}
