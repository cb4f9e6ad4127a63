use std::sync::Arc;

use fermat_jets::base_rings::{EisensteinConfig, Field};
use fermat_jets::delta_calculus::{Conversion, Flavor, JetPoly, JetRing, Trunc};
use fermat_jets::jet_series::*;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cyclo(p: u32, k: u32) -> Arc<Field> {
    Field::ramified(p, k, EisensteinConfig::cyclotomic(p)).unwrap()
}

fn random_series(ring: &Arc<JetRing>, r: &mut ChaCha8Rng, t: Trunc) -> JetPoly {
    random_series_order(ring, r, t, ring.max_order())
}

fn random_series_order(ring: &Arc<JetRing>, r: &mut ChaCha8Rng, t: Trunc, order: usize) -> JetPoly {
    let f = ring.field().clone();
    let mut terms = Vec::new();
    for _ in 0..6 {
        let n = r.gen_range(-2..8);
        let mut k = vec![0; ring.width()];
        k[0] = n;
        for slot in k.iter_mut().skip(1).take(order) {
            *slot = r.gen_range(0..2);
        }
        terms.push((k, f.random_integral(r)));
    }
    JetPoly::from_terms(ring, terms, t)
}

#[test]
fn arithmetic_examples() {
    let f = Field::zp(5, 8).unwrap();
    let ring = series_ring(&f, Flavor::P, 1);
    let q = q_monomial(&ring, 1, &[0], f.one());
    let qi = q_monomial(&ring, -1, &[0], f.one());
    assert!(q.mul(&qi).equals(&JetPoly::one(&ring)));
    let d = 3;
    let dq = q_monomial(&ring, 0, &[1], f.one()).set_trunc(Trunc::series(10, d));
    assert!(!dq.pow(d as u64).is_empty());
    assert!(dq.pow(d as u64).mul(&dq).is_empty());
}

#[test]
fn distributive_on_random_triples() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let f = cyclo(5, 8);
    let ring = series_ring(&f, Flavor::P, 2);
    let t = Trunc::series(12, 3);
    for _ in 0..10 {
        let (a, b, c) = (
            random_series(&ring, &mut r, t),
            random_series(&ring, &mut r, t),
            random_series(&ring, &mut r, t),
        );
        assert!(a.mul(&b.add(&c)).equals(&a.mul(&b).add(&a.mul(&c))));
        assert!(a.mul(&b).mul(&c).equals(&a.mul(&b.mul(&c))));
        assert!(a.mul(&b).equals(&b.mul(&a)));
    }
}

#[test]
fn phi_examples() {
    let f = Field::zp(5, 8).unwrap();
    let ring = series_ring(&f, Flavor::P, 2);
    let t = Trunc::series(30, 4);
    let q = q_monomial(&ring, 1, &[0, 0], f.one()).set_trunc(t);
    let phi_q = phi_on_series(&q).unwrap();
    let want =
        q_monomial(&ring, 5, &[0, 0], f.one()).add(&q_monomial(&ring, 0, &[1, 0], f.from_int(5)));
    assert!(phi_q.equals(&want));
    let one = JetPoly::one(&ring).set_trunc(t);
    assert!(phi_on_series(&one).unwrap().equals(&one));
    let q2 = q.mul(&q);
    assert!(phi_on_series(&q2).unwrap().equals(&want.mul(&want)));
    // q-precision shrinks to p(Q - D) at most
    assert_eq!(phi_on_series(&q).unwrap().trunc().q, Some(30));
    let ring1 = series_ring(&f, Flavor::P, 1);
    let dq = q_monomial(&ring1, 0, &[1], f.one()).with_order(1);
    assert!(phi_on_series(&dq).is_err());
}

#[test]
fn inclusion_examples() {
    let f = cyclo(5, 12);
    let conv = Conversion::new(&f, 1, Trunc::jets(8)).unwrap();
    let pr = series_ring(&f, Flavor::Pi, 1);
    let dq = q_monomial(&pr, 0, &[1], f.one());
    let img = include_pi_into_p(&dq, &conv).unwrap();
    let ppr = series_ring(&f, Flavor::P, 1);
    assert!(img.equals(&q_monomial(&ppr, 0, &[1], f.p_over_pi())));
    let pure = q_series(
        &pr,
        &[(0, f.one()), (3, f.from_int(7))],
        Trunc::series(10, 8),
    );
    let ip = include_pi_into_p(&pure, &conv).unwrap();
    assert!(ip.equals(&q_series(
        &ppr,
        &[(0, f.one()), (3, f.from_int(7))],
        Trunc::default()
    )));
    let psi_pi = log_series(&pr, 8);
    let psi_p = log_series(&ppr, 8);
    let lhs = include_pi_into_p(&psi_pi, &conv).unwrap().scale(&f.pi());
    let rhs = psi_p.scale_int(5);
    assert!(lhs.equals(&rhs), "{:?}", lhs.difference_witness(&rhs));
}

#[test]
fn trace_examples() {
    let f = cyclo(5, 10);
    let ring = series_ring(&f, Flavor::P, 1);
    let one = JetPoly::one(&ring);
    assert!(trace_series(&one).equals(&JetPoly::from_int(&ring, 4)));
    let s = q_series(
        &ring,
        &[(1, f.from_int(3)), (2, f.from_int(-2))],
        Trunc::series(6, 2),
    );
    let t = trace_series(&s.scale(f.pi_inv()));
    assert!(t.equals(&s.scale_int(2)));
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let tr = Trunc::series(10, 2);
    for _ in 0..5 {
        let a = random_series(&ring, &mut r, tr);
        let b = random_series(&ring, &mut r, tr);
        let c = f.random_base(&mut r);
        let lhs = trace_series(&a.scale(&c).add(&b));
        let rhs = trace_series(&a).scale(&c).add(&trace_series(&b));
        assert!(lhs.equals(&rhs));
    }
}

#[test]
fn trace_commutes_with_phi() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let f = cyclo(5, 10);
    let ring = series_ring(&f, Flavor::P, 2);
    let t = Trunc::series(10, 3);
    for _ in 0..4 {
        let a = random_series_order(&ring, &mut r, t, 1).with_order(1);
        let lhs = phi_on_series(&trace_series(&a)).unwrap();
        let rhs = trace_series(&phi_on_series(&a).unwrap());
        assert!(lhs.equals(&rhs));
    }
}

#[test]
fn defect_examples() {
    let f = cyclo(5, 14);
    let d = 10;
    let conv = Conversion::new(&f, 1, Trunc::jets(d)).unwrap();
    let ring = series_ring(&f, Flavor::P, 1);
    let dq = q_monomial(&ring, 0, &[1], f.one()).set_trunc(Trunc::jets(d));
    let rep = overconvergence_defect(&dq, &conv).unwrap();
    assert_eq!(rep.defect, 1);
    assert_eq!(rep.min_valuation, Some(Ratio::new(1, 4) - 1));
    let psi = log_series(&ring, d);
    assert_eq!(overconvergence_defect(&psi, &conv).unwrap().defect, 1);
    assert_eq!(
        overconvergence_defect(&psi.scale_int(5), &conv)
            .unwrap()
            .defect,
        0
    );
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let a = random_series(&ring, &mut r, Trunc::series(8, d)).scale_int(5);
    assert_eq!(overconvergence_defect(&a, &conv).unwrap().defect, 0);
}

#[test]
fn defect_is_subadditive() {
    let f = cyclo(5, 14);
    let d = 6;
    let conv = Conversion::new(&f, 1, Trunc::jets(d)).unwrap();
    let ring = series_ring(&f, Flavor::P, 1);
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let t = Trunc::series(8, d);
    for _ in 0..5 {
        let a = random_series(&ring, &mut r, t);
        let b = random_series(&ring, &mut r, t);
        let (da, db) = (
            overconvergence_defect(&a, &conv).unwrap().defect,
            overconvergence_defect(&b, &conv).unwrap().defect,
        );
        let dab = overconvergence_defect(&a.mul(&b), &conv).unwrap().defect;
        let dsum = overconvergence_defect(&a.add(&b), &conv).unwrap().defect;
        assert!(dab <= da + db);
        assert!(dsum <= da.max(db));
    }
}

#[test]
fn radius_examples() {
    let f = Field::zp(5, 40).unwrap();
    let ring = series_ring(&f, Flavor::P, 1);
    let d = 12;
    let terms: Vec<_> = (1..=d)
        .map(|n| (vec![0, n], f.pow(&f.from_int(5), 2 * n as u64)))
        .collect();
    let s = JetPoly::from_terms(&ring, terms, Trunc::jets(d as u32));
    let est = radius_estimate(&s).unwrap();
    assert_eq!(est.slope, Ratio::from_integer(2));
    assert_eq!(est.intercept, Ratio::from_integer(0));
    let psi = log_series(&ring, 15);
    let est = radius_estimate(&psi).unwrap();
    assert_eq!(est.slope, Ratio::from_integer(1));
    // hull oracle on (n, n - 1 - v_5(n))
    for (n, m) in &est.points {
        let v = if n % 25 == 0 {
            2
        } else if n % 5 == 0 {
            1
        } else {
            0
        };
        assert_eq!(*m, Ratio::from_integer(n - 1 - v));
    }
}

#[test]
fn valuation_bound_examples() {
    let f = cyclo(5, 20);
    let ring = series_ring(&f, Flavor::P, 1);
    let c = JetPoly::from_int(&ring, 3);
    assert!(valuation_bound_check(&c, 1, 4).ok);
    let conv = Conversion::new(&f, 1, Trunc::jets(15)).unwrap();
    let pr = series_ring(&f, Flavor::Pi, 1);
    let psi = include_pi_into_p(&log_series(&pr, 15), &conv)
        .unwrap()
        .scale(&f.p_over_pi().clone());
    let psi = psi
        .scale(&f.inv(&f.p_over_pi()).unwrap())
        .scale(f.pi_inv())
        .scale_int(5);
    let rep = valuation_bound_check(&psi, 1, 4);
    assert!(rep.ok, "{:?}", rep.violations);
    let dq = q_monomial(&ring, 0, &[1], f.from_int(5));
    assert!(valuation_bound_check(&dq, 1, 4).ok);
    let bad = q_monomial(&ring, 0, &[6], f.one());
    assert!(!valuation_bound_check(&bad, 1, 4).ok);
}

#[test]
fn dump_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let f = cyclo(7, 6);
    let ring = series_ring(&f, Flavor::P, 2);
    let a = random_series(&ring, &mut r, Trunc::series(8, 2));
    let text = dump(&a);
    let b = parse_dump(&ring, &text, -10).unwrap();
    assert!(a.equals(&b));
    assert_eq!(b.trunc().q, Some(8));
    assert_eq!(dump(&b), text);
    assert!(parse_dump(&ring, "1 0 : 0001\n", -10).is_err());
    assert!(matches!(
        parse_dump(
            &ring,
            "-20 0 0 : (000001,000000,000000,000000,000000,000000)\n",
            -10
        ),
        Err(fermat_jets::Error::Malformed { line: 1, .. })
    ));
}

#[test]
fn dump_golden() {
    let f = Field::zp(5, 3).unwrap();
    let ring = series_ring(&f, Flavor::P, 1);
    let s = log_series(&ring, 3);
    assert_eq!(
        dump(&s),
        "# r=1 Q=- D=3\n-5 1 : 001\n-10 2 : p^1*22\n-15 3 : p^2*32\n"
    );
}

#[test]
fn inclusion_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let f = cyclo(5, 12);
    let t = Trunc::series(8, 4);
    let conv = Conversion::new(&f, 2, t).unwrap();
    let pr = series_ring(&f, Flavor::Pi, 2);
    for _ in 0..4 {
        let a = random_series(&pr, &mut r, t);
        let b = random_series(&pr, &mut r, t);
        let ia = include_pi_into_p(&a, &conv).unwrap();
        assert!(conv.p_to_pi(&ia).unwrap().equals(&a));
        if !a.equals(&b) {
            assert!(!ia.equals(&include_pi_into_p(&b, &conv).unwrap()));
        }
    }
}

#[test]
fn trace_vectors_are_injective_on_random_slices() {
    for f in [
        cyclo(5, 8),
        cyclo(7, 8),
        Field::ramified(5, 8, EisensteinConfig::pure(5, 2).unwrap()).unwrap(),
    ] {
        let probe = trace_injectivity_probe(&f, 1, 50, 30, 11);
        assert_eq!(probe.source_rank, 50);
        assert!(probe.injective(), "{probe:?}");
    }
}

#[test]
fn padic_rank_examples() {
    let b = |v: &[i64]| {
        v.iter()
            .map(|&x| num_bigint::BigInt::from(x))
            .collect::<Vec<_>>()
    };
    let p = num_bigint::BigInt::from(5);
    assert_eq!(padic_rank(vec![b(&[1, 2]), b(&[2, 4])], &p, 4), 1);
    assert_eq!(padic_rank(vec![b(&[5, 0]), b(&[0, 25])], &p, 4), 2);
    assert_eq!(padic_rank(vec![b(&[625, 0]), b(&[0, 1])], &p, 4), 1);
    assert_eq!(padic_rank(vec![b(&[1, 1]), b(&[1, 6])], &p, 1), 1);
}
