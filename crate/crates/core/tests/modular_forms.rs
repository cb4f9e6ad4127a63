use std::collections::BTreeMap;
use std::sync::Arc;

use fermat_jets::base_rings::{EisensteinConfig, Field};
use fermat_jets::delta_calculus::{Conversion, Flavor, JetPoly, Trunc};
use fermat_jets::jet_series::*;
use fermat_jets::modular_forms::*;
use fermat_jets::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cyclo(p: u32, k: u32) -> Arc<Field> {
    Field::ramified(p, k, EisensteinConfig::cyclotomic(p)).unwrap()
}

fn big(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// `ℓ + 1 - #E(F_ℓ)` for `y² + a1xy + a3y = x³ + a2x² + a4x + a6`.
fn trace_of_frobenius(a: [i64; 5], l: i64) -> i64 {
    let m = |x: i64| x.rem_euclid(l);
    let mut count = 1;
    for x in 0..l {
        for y in 0..l {
            let lhs = y * y + a[0] * x * y + a[2] * y;
            let rhs = x * x * x + a[1] * x * x + a[3] * x + a[4];
            if m(lhs) == m(rhs) {
                count += 1;
            }
        }
    }
    l + 1 - count
}

/// a_n from prime values by factoring `n` (weight 2, bad primes multiplicative).
fn coefficients_from_primes(ap: &BTreeMap<u64, i64>, bad: &[u64], q: usize) -> Vec<BigInt> {
    let mut a = vec![BigInt::from(0); q + 1];
    for n in 1..=q as u64 {
        let mut val = BigInt::from(1);
        let mut m = n;
        let mut l = 2;
        while m > 1 {
            if m % l == 0 {
                let mut r = 0;
                while m % l == 0 {
                    m /= l;
                    r += 1;
                }
                let al = BigInt::from(ap[&l]);
                let pp = if bad.contains(&l) {
                    al.pow(r)
                } else {
                    let (mut prev, mut cur) = (BigInt::from(1), al.clone());
                    for _ in 1..r {
                        let next = &al * &cur - BigInt::from(l) * &prev;
                        prev = cur;
                        cur = next;
                    }
                    cur
                };
                val *= pp;
            }
            l += 1;
        }
        a[n as usize] = val;
    }
    a
}

#[test]
fn bernoulli_values() {
    let b = bernoulli_numbers(12);
    let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    assert_eq!(b[1], r(-1, 2));
    assert_eq!(b[2], r(1, 6));
    assert_eq!(b[4], r(-1, 30));
    assert_eq!(b[6], r(1, 42));
    assert_eq!(b[10], r(5, 66));
    assert_eq!(b[12], r(-691, 2730));
    assert_eq!(b[7], r(0, 1));
}

#[test]
fn eisenstein_series_examples() {
    let f = Field::zp(5, 8).unwrap();
    let e4 = eisenstein_ep1(&f, 6).unwrap();
    assert_eq!(
        integer_coefficients(&e4).unwrap(),
        big(&[1, 240, 2160, 6720, 17520, 30240])
    );
    let f7 = Field::zp(7, 8).unwrap();
    let e6 = eisenstein_ep1(&f7, 5).unwrap();
    assert_eq!(
        integer_coefficients(&e6).unwrap(),
        big(&[1, -504, -16632, -122976, -532728])
    );
    assert!(congruent_to_one(&e4) && congruent_to_one(&e6));
}

#[test]
fn unit_root_of_eisenstein_series() {
    for p in [5u32, 7, 11] {
        let f = Field::zp(p, 8).unwrap();
        let e = eisenstein_ep1(&f, 40).unwrap();
        let eps = unit_root(&e, (p - 1) as u64).unwrap();
        assert!(eps.pow((p - 1) as u64).equals(&e));
        assert!(congruent_to_one(&eps));

        // against the binomial series (1 + x)^{1/(p-1)}, x = E - 1 ≡ 0 mod p
        let x = e.sub(&JetPoly::one(e.ring()));
        let mut acc = JetPoly::one(e.ring()).set_trunc(e.trunc());
        let mut term = JetPoly::one(e.ring()).set_trunc(e.trunc());
        let mut c = BigRational::from_integer(1.into());
        let exp = BigRational::new(1.into(), ((p - 1) as i64).into());
        for k in 1..(8 * 3) {
            c = c * (&exp - BigRational::from_integer((k - 1).into()))
                / BigRational::from_integer(k.into());
            term = term.mul(&x);
            acc = acc.add(&term.scale(&f.from_ratio(&c)));
        }
        assert!(acc.equals(&eps), "p = {p}");

        let start = JetPoly::one(e.ring())
            .add(&q_series(
                e.ring(),
                &[(3, f.from_int(p as i64)), (7, f.from_int((p * p) as i64))],
                Trunc::exact(),
            ))
            .set_trunc(e.trunc());
        assert!(unit_root_from(&e, (p - 1) as u64, &start)
            .unwrap()
            .equals(&eps));
    }
}

#[test]
fn unit_root_rejects_bad_inputs() {
    let f = Field::zp(5, 8).unwrap();
    let ring = series_ring(&f, Flavor::P, 0);
    let s = q_series(
        &ring,
        &[(0, f.from_int(2))],
        Trunc {
            q: Some(5),
            ..Trunc::default()
        },
    );
    assert!(matches!(unit_root(&s, 4), Err(Error::Hypothesis(_))));
    let one = JetPoly::one(&ring).set_trunc(Trunc {
        q: Some(5),
        ..Trunc::default()
    });
    assert!(matches!(unit_root(&one, 5), Err(Error::Hypothesis(_))));
}

#[test]
fn hecke_operators_on_delta() {
    // Ramanujan's τ(n), n ≤ 12
    let tau = big(&[
        0, 1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944,
    ]);
    for n in [2u64, 3, 5] {
        let t = hecke_t_coeffs(12, 1, n, &tau);
        let want: Vec<BigInt> = tau[..t.len()]
            .iter()
            .map(|x| x * &tau[n as usize])
            .collect();
        assert_eq!(t, want, "n = {n}");
    }
    let f = Field::zp(5, 30).unwrap();
    let ring = series_ring(&f, Flavor::P, 0);
    let s = q_series(
        &ring,
        &tau.iter()
            .enumerate()
            .map(|(n, a)| (n as i32, f.from_bigint(a)))
            .collect::<Vec<_>>(),
        Trunc {
            q: Some(13),
            ..Trunc::default()
        },
    );
    let t2 = hecke_t(12, 1, 2, &s).unwrap();
    assert_eq!(t2.trunc().q, Some(7));
    assert!(t2.equals(
        &s.truncate(Trunc {
            q: Some(7),
            ..Trunc::default()
        })
        .scale_int(-24)
    ));
    let jets = series_ring(&f, Flavor::P, 1);
    let bad = q_monomial(&jets, 1, &[1], f.one()).set_trunc(Trunc::series(5, 2));
    assert!(hecke_t(2, 7, 2, &bad).is_err());
}

#[test]
fn epsilon_is_the_trivial_character() {
    assert_eq!(epsilon(35, 3), 1);
    assert_eq!(epsilon(35, 14), 0);
    assert_eq!(epsilon(1, 9), 1);
}

fn newform_35a1(q: usize) -> (BTreeMap<u64, i64>, Vec<BigInt>) {
    let curve = [0, 1, 1, 9, 1];
    let ap: BTreeMap<u64, i64> = (2..=q as u64)
        .filter(|&l| is_prime(l))
        .map(|l| (l, trace_of_frobenius(curve, l as i64)))
        .collect();
    let a = coefficients_from_primes(&ap, &[5, 7], q);
    (ap, a)
}

#[test]
fn ingest_newform_of_level_35() {
    let q = 84;
    let (ap, a) = newform_35a1(q);
    assert_eq!(
        (ap[&2], ap[&3], ap[&5], ap[&7], ap[&11], ap[&13]),
        (0, 1, -1, 1, -3, 5)
    );
    let mut text = format!("# elliptic curve 35a1\n5 7 2 {q} ingested\n");
    for (n, v) in a.iter().enumerate().skip(1) {
        text.push_str(&format!("{n} {v}\n"));
    }
    let h = ingest(&text).unwrap();
    assert_eq!(h.a, a);
    assert_eq!(h.source, Source::Ingested);
    assert_eq!(ingest(&h.to_file()).unwrap(), h);
    for n in [2u64, 3, 4, 6, 8, 9, 11, 12] {
        let t = hecke_t_coeffs(2, 5, n, &h.a);
        let want: Vec<BigInt> = h.a[..t.len()]
            .iter()
            .map(|x| x * &h.a[n as usize])
            .collect();
        assert_eq!(t, want);
    }
}

#[test]
fn ingest_errors() {
    assert!(matches!(ingest(""), Err(Error::Malformed { .. })));
    assert!(matches!(
        ingest("5 7 2\n"),
        Err(Error::Malformed { line: 1, .. })
    ));
    assert!(matches!(
        ingest("5 7 2 2 synthetic\n1 1\n1 1\n"),
        Err(Error::Malformed { line: 3, .. })
    ));
    assert!(matches!(
        ingest("5 7 2 2 synthetic\n1 1\n"),
        Err(Error::Malformed { .. })
    ));
    assert!(matches!(
        ingest("5 7 2 2 synthetic\n1 1\n2 x\n"),
        Err(Error::Malformed { line: 3, .. })
    ));
    assert!(matches!(
        ingest("7 7 2 2 synthetic\n1 1\n2 0\n"),
        Err(Error::Malformed { line: 1, .. })
    ));
    // a_4 = a_2² - 2 fails first at n = 4
    let text = "11 5 2 6 synthetic\n1 1\n2 1\n3 0\n4 0\n5 1\n6 1\n";
    assert!(matches!(
        ingest(text),
        Err(Error::RelationViolation { n: 4, .. })
    ));
    let text = "11 5 2 6 synthetic\n1 1\n2 1\n3 0\n4 -1\n5 1\n6 1\n";
    assert!(matches!(
        ingest(text),
        Err(Error::RelationViolation { n: 6, .. })
    ));
}

#[test]
fn synthesized_systems_satisfy_hecke_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (p, n) in [(5u64, 7u64), (5, 11), (7, 11)] {
        let q = (p * p + 5 * p) as usize;
        let h = random_split_system(n, p, q, &mut rng).unwrap();
        h.verify().unwrap();
        assert_eq!(h.a[p as usize], 1.into());
        assert_eq!(h.a[(p * p) as usize], 1.into());
        // T(p) at level Np is the identity
        let t = hecke_t_coeffs(2, n * p, p, &h.a);
        assert_eq!(t[..], h.a[..t.len()]);
        // at level N it is the identity mod p
        let t = hecke_t_coeffs(2, n, p, &h.a);
        for (m, c) in t.iter().enumerate() {
            assert_eq!((c - &h.a[m]) % BigInt::from(p), 0.into());
        }
    }
    let mut vals = BTreeMap::new();
    vals.insert(2, 1);
    assert!(matches!(
        synthesize(4, 5, 2, &vals, 10, true),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        synthesize(10, 5, 2, &vals, 10, true),
        Err(Error::Config(_))
    ));
    let h = synthesize(11, 5, 2, &vals, 8, false).unwrap();
    assert_eq!(h.a, big(&[0, 1, 1, 0, -1, 0, 0, 0, -3]));
}

fn split_system(p: u64, n: u64, seed: u64) -> HeckeSystem {
    let q = (p * p + 5 * p) as usize;
    random_split_system(n, p, q, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn sharp_pi_expansion_against_coefficient_formula() {
    let p = 5u64;
    let h = split_system(p, 7, 1);
    let f = cyclo(p as u32, 8);
    let t = SeriesTruncation::new(30, 6);
    let conv = Conversion::new(&f, 1, Trunc::jets(t.jet_deg)).unwrap();
    let sharp = expansion_fsharp_pi(&h, &conv, &t).unwrap();
    let pi = f.pi();
    let ratio = |n: usize| f.from_ratio(&BigRational::new(h.a[n].clone(), (n as i64).into()));
    let binom = |n: i64, k: i64| (0..k).fold(1i64, |c, i| c * (n - i) / (i + 1));
    // q^m: (a_{m/p}/(m/p) - p·a_m/m)/π
    for m in 1..30usize {
        let mut c = f.mul_int(&ratio(m), -(p as i64));
        if m % p as usize == 0 {
            c = f.add(&c, &ratio(m / p as usize));
        }
        let c = f.mul(&c, f.pi_inv());
        let got = sharp
            .series
            .coeff(&[m as i32, 0])
            .cloned()
            .unwrap_or_else(|| f.zero());
        assert!(f.eq(&got, &c), "q^{m}");
    }
    // q^{p(n-k)} (δq)^k: (a_n/n)·C(n,k)·π^{k-1}
    for k in 1..=6i64 {
        for n in k..(k + 6) {
            let e = p as i64 * (n - k);
            if e >= 30 {
                continue;
            }
            let c = f.mul(
                &f.mul_int(&ratio(n as usize), binom(n, k)),
                &f.pi_pow(k - 1),
            );
            let got = sharp
                .series
                .coeff(&[e as i32, k as i32])
                .cloned()
                .unwrap_or_else(|| f.zero());
            assert!(f.eq(&got, &c), "q^{e} δq^{k}");
        }
    }
    let _ = pi;
}

#[test]
fn order_one_pipeline_for_split_systems() {
    for (p, n, seed) in [(5u64, 7u64, 2u64), (7, 11, 3)] {
        let h = split_system(p, n, seed);
        let f = cyclo(p as u32, 8);
        let t = SeriesTruncation::new((p * p + 5 * p) as i32, p as u32 + 1);
        let conv = Conversion::new(&f, 1, Trunc::jets(t.jet_deg)).unwrap();
        let sharp = expansion_fsharp_pi(&h, &conv, &t).unwrap();
        congruence_mod_pi(&h, &sharp).unwrap();
        let rep = expansion_tau_and_fsharp_p(&h, &sharp, &conv).unwrap();
        assert!(rep.tau_matches);
        assert_eq!(rep.tau_divisible_by_p, None);
        assert_eq!(rep.mod_p_congruence, None);
        assert_eq!(rep.defect.defect, 1);
        assert_eq!(
            overconvergence_defect(&rep.fsharp_p.scale_int(p as i64), &conv)
                .unwrap()
                .defect,
            0
        );
    }
}

#[test]
fn order_one_pipeline_for_the_newform_of_level_35() {
    let p = 7u64;
    let q = (p * p + 5 * p) as usize;
    let (ap, _) = newform_35a1(q);
    let h = synthesize(
        5,
        p,
        2,
        &ap.iter().map(|(&l, &v)| (l, v)).collect(),
        q,
        true,
    )
    .unwrap();
    let f = cyclo(p as u32, 8);
    let t = SeriesTruncation::new(q as i32, p as u32 + 1);
    let conv = Conversion::new(&f, 1, Trunc::jets(t.jet_deg)).unwrap();
    let sharp = expansion_fsharp_pi(&h, &conv, &t).unwrap();
    congruence_mod_pi(&h, &sharp).unwrap();
    let rep = expansion_tau_and_fsharp_p(&h, &sharp, &conv).unwrap();
    assert!(rep.tau_matches);
    assert_eq!(rep.mod_p_congruence, None);
}

#[test]
fn corrupted_coefficient_is_caught() {
    let p = 5u64;
    let mut h = split_system(p, 7, 4);
    h.a[2 * p as usize] += 1;
    assert!(matches!(
        h.verify(),
        Err(Error::RelationViolation { n: 10, .. })
    ));
    let f = cyclo(p as u32, 8);
    let t = SeriesTruncation::new(50, 6);
    let conv = Conversion::new(&f, 1, Trunc::jets(6)).unwrap();
    match expansion_fsharp_pi(&h, &conv, &t) {
        Err(Error::Integrality(w)) => assert!(w.contains("q^10"), "{w}"),
        other => panic!("expected an integrality failure, got {other:?}"),
    }
}

#[test]
fn a_p_must_be_one() {
    let p = 5u64;
    let mut vals = BTreeMap::new();
    vals.insert(5, 2);
    vals.insert(2, 1);
    let h = synthesize(7, p, 2, &vals, 40, true).unwrap();
    let f = cyclo(5, 8);
    let t = SeriesTruncation::new(40, 6);
    let conv = Conversion::new(&f, 1, Trunc::jets(6)).unwrap();
    assert!(matches!(
        expansion_fsharp_pi(&h, &conv, &t),
        Err(Error::Integrality(_))
    ));
}

#[test]
fn congruence_needs_the_cyclotomic_uniformizer() {
    let p = 5u64;
    let h = split_system(p, 7, 5);
    let f = Field::ramified(5, 8, EisensteinConfig::pure(5, 2).unwrap()).unwrap();
    let t = SeriesTruncation::new(50, 6);
    let conv = Conversion::new(&f, 1, Trunc::jets(6)).unwrap();
    let sharp = expansion_fsharp_pi(&h, &conv, &t).unwrap();
    assert!(matches!(
        congruence_mod_pi(&h, &sharp),
        Err(Error::Hypothesis(_))
    ));
    assert!(matches!(
        expansion_tau_and_fsharp_p(&h, &sharp, &conv),
        Err(Error::Hypothesis(_))
    ));
}

#[test]
fn reference_expansion_of_level_n() {
    let p = 5u64;
    let h = split_system(p, 11, 6);
    let f = Field::zp(5, 8).unwrap();
    let t = SeriesTruncation::new(50, 6);
    let r = gamma0n_reference_expansion(&h, &f, &t);
    // q^{p(m-1)} δq carries -a_p a_m mod p, q^{p²(m-1)} (δq)^p carries a_m mod p
    let m5 = |x: &BigInt| {
        let v = num_integer::Integer::mod_floor(x, &BigInt::from(5));
        f.from_bigint(&v)
    };
    assert!(f.eq(r.coeff(&[0, 1]).unwrap(), &m5(&BigInt::from(-1))));
    let c = r.coeff(&[5, 1]).cloned().unwrap_or_else(|| f.zero());
    assert!(f.eq(&c, &m5(&-&h.a[2])));
    let c = r.coeff(&[25, 5]).cloned().unwrap_or_else(|| f.zero());
    assert!(f.eq(&c, &m5(&h.a[2])));
    assert!(r.coeff(&[5, 0]).is_none());
}

#[test]
fn geometric_trace_forward_sums_powers() {
    let f = Field::zp(5, 8).unwrap();
    let e = eisenstein_ep1(&f, 10).unwrap();
    let eps = unit_root(&e, 4).unwrap();
    let ring = e.ring().clone();
    let c = |n: i64| JetPoly::from_int(&ring, n).set_trunc(e.trunc());
    let s = geometric_trace_forward(&[c(0), c(0), c(0), c(0), c(1)], &eps);
    assert!(s.equals(&e));
    let s = geometric_trace_forward(&[c(2), c(3)], &eps);
    assert!(s.equals(&eps.scale_int(3).add(&c(2))));
}
