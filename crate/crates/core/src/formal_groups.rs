//! One-dimensional formal group laws, their jet group laws and the
//! δ-characters built from a logarithm.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::base_rings::{Elem, Field};
use crate::delta_calculus::{Conversion, Flavor, JetPoly, JetRing, Trunc};
use crate::error::{Error, Result};
use crate::jet_series::{
    include_pi_into_p, log_series, overconvergence_defect, trace_series, QJetSeries,
};

/// A formal group law `𝓕(T1, T2)` cut at total degree `cutoff`, with its logarithm.
#[derive(Clone, Debug)]
pub struct FormalGroupData {
    pub law: JetPoly,
    /// `log_coeffs[n] = a_n` for `1 <= n <= cutoff`; index 0 is unused.
    pub log_coeffs: Vec<Elem>,
    pub cutoff: u32,
}

/// Univariate power series cut at degree `cutoff`, as a coefficient vector.
pub type Univ = Vec<Elem>;

fn univ_mul(f: &Field, a: &Univ, b: &Univ) -> Univ {
    let n = a.len();
    let mut out = vec![f.zero(); n];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] = f.add(&out[i + j], &f.mul(x, y));
        }
    }
    out
}

/// `a(b(T))` for `b` without constant term.
fn univ_compose(f: &Field, a: &Univ, b: &Univ) -> Univ {
    let n = a.len();
    let mut out = vec![f.zero(); n];
    let mut pw = vec![f.zero(); n];
    pw[0] = f.one();
    for c in a.iter() {
        for (o, t) in out.iter_mut().zip(&pw) {
            *o = f.add(o, &f.mul(c, t));
        }
        pw = univ_mul(f, &pw, b);
    }
    out
}

/// Compositional inverse of `T + a_2 T^2 + …`.
fn univ_reversion(f: &Field, a: &Univ) -> Univ {
    let n = a.len();
    let mut x = vec![f.zero(); n];
    if n > 1 {
        x[1] = f.one();
    }
    for k in 2..n {
        let c = univ_compose(f, a, &x);
        x[k] = f.sub(&x[k], &c[k]);
    }
    x
}

/// Keeps the terms free of order-0 variables, i.e. sets `T = 0`.
pub fn at_origin(x: &JetPoly) -> JetPoly {
    let nv = x.ring().nvars();
    let terms = x
        .terms()
        .iter()
        .filter(|(k, _)| k[..nv].iter().all(|&e| e == 0));
    JetPoly::from_terms(
        x.ring(),
        terms
            .map(|(k, c)| (k.clone(), c.clone()))
            .collect::<Vec<_>>(),
        x.trunc(),
    )
    .with_order(x.order())
}

/// Copies a polynomial of a one-variable ring into variable `v` of `target`.
fn into_var(x: &JetPoly, target: &Arc<JetRing>, v: usize, caps: Trunc) -> Result<JetPoly> {
    let mut image = |slot: usize| JetPoly::var(target, v, slot);
    x.substitute(target, &mut image, &|c| c.clone(), caps, x.order())
}

/// `Σ c_n · x^n` for a univariate coefficient vector, `x` without constant term.
fn eval_univ(c: &Univ, x: &JetPoly, caps: Trunc) -> JetPoly {
    let mut acc = JetPoly::zero(x.ring()).set_trunc(caps);
    let mut pw = JetPoly::one(x.ring()).set_trunc(caps);
    for (n, a) in c.iter().enumerate() {
        if n > 0 {
            pw = pw.mul(x);
            if pw.is_empty() {
                break;
            }
        }
        if !a.is_zero() {
            acc = acc.add(&pw.scale(a));
        }
    }
    acc
}

fn law_ring(field: &Arc<Field>, r: usize) -> Arc<JetRing> {
    JetRing::new(field.clone(), Flavor::P, &["T1", "T2"], r)
}

fn check_integral(x: &JetPoly, what: &str) -> Result<()> {
    let f = x.field();
    for (k, c) in x.terms() {
        if !f.is_integral(c) {
            return Err(Error::Integrality(format!(
                "{what}: coefficient {} at {}",
                f.format(c),
                x.ring_monomial_name(k)
            )));
        }
    }
    Ok(())
}

impl FormalGroupData {
    /// `T1 + T2 + T1 T2` with logarithm `log(1 + T)`.
    pub fn multiplicative_group(field: &Arc<Field>, cutoff: u32) -> FormalGroupData {
        let ring = law_ring(field, 0);
        let t = Trunc::total(cutoff);
        let t1 = JetPoly::var(&ring, 0, 0).expect("T1");
        let t2 = JetPoly::var(&ring, 1, 0).expect("T2");
        let law = t1.add(&t2).add(&t1.mul(&t2)).truncate(t);
        let mut log_coeffs = vec![field.zero()];
        for n in 1..=cutoff as i64 {
            log_coeffs.push(field.from_frac(if n % 2 == 1 { 1 } else { -1 }, n));
        }
        FormalGroupData {
            law,
            log_coeffs,
            cutoff,
        }
    }

    /// `T1 + T2` with logarithm `T`.
    pub fn additive(field: &Arc<Field>, cutoff: u32) -> FormalGroupData {
        let mut log_coeffs = vec![field.zero(); cutoff as usize + 1];
        if cutoff >= 1 {
            log_coeffs[1] = field.one();
        }
        FormalGroupData::from_logarithm(field, &log_coeffs, cutoff).expect("additive law")
    }

    /// `l^{-1}(l(T1) + l(T2))` over the fraction field; the result must be integral.
    pub fn from_logarithm(
        field: &Arc<Field>,
        log_coeffs: &[Elem],
        cutoff: u32,
    ) -> Result<FormalGroupData> {
        let n = cutoff as usize + 1;
        let mut a: Univ = log_coeffs.iter().take(n).cloned().collect();
        a.resize(n, field.zero());
        a[0] = field.zero();
        if cutoff >= 1 && !field.eq(&a[1], &field.one()) {
            return Err(Error::Config("a logarithm must start with T".into()));
        }
        for (k, c) in a.iter().enumerate().skip(1) {
            if !field.is_integral(&field.mul_int(c, k as i64)) {
                return Err(Error::Integrality(format!(
                    "{k}·a_{k} = {} is not integral",
                    field.format(&field.mul_int(c, k as i64))
                )));
            }
        }
        let ring = law_ring(field, 0);
        let t = Trunc::total(cutoff);
        let l1 = eval_univ(&a, &JetPoly::var(&ring, 0, 0)?.set_trunc(t), t);
        let l2 = eval_univ(&a, &JetPoly::var(&ring, 1, 0)?.set_trunc(t), t);
        let exp = univ_reversion(field, &a);
        let law = eval_univ(&exp, &l1.add(&l2), t);
        check_integral(&law, "the group law is not integral")?;
        Ok(FormalGroupData {
            law,
            log_coeffs: a,
            cutoff,
        })
    }

    /// The law with logarithm `Σ_k T^{p^k}/p^k`.
    pub fn hazewinkel(field: &Arc<Field>, cutoff: u32) -> Result<FormalGroupData> {
        let p = field.p() as usize;
        let mut a = vec![field.zero(); cutoff as usize + 1];
        let (mut q, mut k) = (1usize, 0i64);
        while q <= cutoff as usize {
            a[q] = field.mul_p_pow(&field.one(), -k);
            q *= p;
            k += 1;
        }
        FormalGroupData::from_logarithm(field, &a, cutoff)
    }

    pub fn field(&self) -> &Arc<Field> {
        self.law.field()
    }

    /// `l(T)` in variable `v` of `ring`.
    pub fn log_in(&self, ring: &Arc<JetRing>, v: usize) -> Result<JetPoly> {
        let t = Trunc::total(self.cutoff);
        Ok(eval_univ(
            &self.log_coeffs,
            &JetPoly::var(ring, v, 0)?.set_trunc(t),
            t,
        ))
    }

    /// Coefficients of `exp = l^{-1}`.
    pub fn exp_coeffs(&self) -> Univ {
        univ_reversion(self.field(), &self.log_coeffs)
    }

    /// Coefficients of the formal inverse `ι(T) = exp(-l(T))`.
    pub fn inverse_coeffs(&self) -> Univ {
        let f = self.field();
        let neg: Univ = self.log_coeffs.iter().map(|c| f.neg(c)).collect();
        univ_compose(f, &self.exp_coeffs(), &neg)
    }

    /// Checks `𝓕(T,0) = T`, `𝓕(0,T) = T`, commutativity, associativity,
    /// `𝓕(T, ι(T)) = 0` and `exp(l(T)) = T`, all symbolically at the cutoff.
    pub fn check_axioms(&self) -> Result<()> {
        let f = self.field().clone();
        let t = Trunc::total(self.cutoff);
        let one = JetRing::new(f.clone(), Flavor::P, &["T"], 0);
        let tv = JetPoly::var(&one, 0, 0)?.set_trunc(t);
        let zero = JetPoly::zero(&one).set_trunc(t);
        let law_at = |a: &JetPoly, b: &JetPoly| -> Result<JetPoly> {
            let target = a.ring().clone();
            let mut image = |slot: usize| Ok(if slot == 0 { a.clone() } else { b.clone() });
            self.law
                .substitute(&target, &mut image, &|c| c.clone(), t, 0)
        };
        let mismatch = |x: &JetPoly, y: &JetPoly, what: &str| -> Result<()> {
            match x.difference_witness(y) {
                None => Ok(()),
                Some(w) => Err(Error::Mismatch {
                    witness: format!("{what}: {w}"),
                }),
            }
        };
        mismatch(&law_at(&tv, &zero)?, &tv, "F(T,0) = T")?;
        mismatch(&law_at(&zero, &tv)?, &tv, "F(0,T) = T")?;

        let three = JetRing::new(f.clone(), Flavor::P, &["A", "B", "C"], 0);
        let v = |i| JetPoly::var(&three, i, 0).map(|x| x.set_trunc(t));
        let (a, b, c) = (v(0)?, v(1)?, v(2)?);
        mismatch(&law_at(&a, &b)?, &law_at(&b, &a)?, "commutativity")?;
        let left = law_at(&law_at(&a, &b)?, &c)?;
        let right = law_at(&a, &law_at(&b, &c)?)?;
        mismatch(&left, &right, "associativity")?;

        let inv = eval_univ(&self.inverse_coeffs(), &tv, t);
        mismatch(&law_at(&tv, &inv)?, &zero, "F(T, inv T) = 0")?;
        let lt = self.log_in(&one, 0)?;
        mismatch(&eval_univ(&self.exp_coeffs(), &lt, t), &tv, "exp(l(T)) = T")?;
        Ok(())
    }
}

/// The series `F_1..F_r` in `δT1, δT2, …` describing `[+]` on r-tuples,
/// and the series `I_1..I_r` of the inverse.
#[derive(Clone, Debug)]
pub struct JetGroupLaw {
    pub r: usize,
    pub cutoff: u32,
    /// `components[i-1] = F_i` in the ring `T1, T2` of order `r`.
    pub components: Vec<JetPoly>,
    /// `inverse[i-1] = {δ^i ι(T)}|_{T=0}` in the ring `T` of order `r`.
    pub inverse: Vec<JetPoly>,
}

impl JetGroupLaw {
    /// `a [+] b` for tuples `a = (a_1..a_r)`, `b = (b_1..b_r)`.
    pub fn combine(&self, a: &[Elem], b: &[Elem]) -> Result<Vec<Elem>> {
        let nv = 2;
        let val = |slot: usize| {
            let (v, j) = (slot % nv, slot / nv);
            if v == 0 {
                a[j - 1].clone()
            } else {
                b[j - 1].clone()
            }
        };
        self.components.iter().map(|c| c.eval(&val)).collect()
    }

    /// The inverse of a tuple.
    pub fn negate(&self, a: &[Elem]) -> Result<Vec<Elem>> {
        self.inverse
            .iter()
            .map(|c| c.eval(&|slot| a[slot - 1].clone()))
            .collect()
    }

    /// Associativity, commutativity, identity and inverses on random tuples
    /// with entries in `pR`, compared modulo `p^min(cutoff+1, K-1)`.
    pub fn check_random(&self, samples: usize, seed: u64) -> Result<()> {
        let f = self.components[0].field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = (self.cutoff as i64 + 1).min(f.precision() as i64 - 1) * f.e() as i64;
        let mut point = || -> Vec<Elem> {
            (0..self.r)
                .map(|_| f.mul_p_pow(&f.random_integral(&mut rng), 1))
                .collect()
        };
        let same = |x: &[Elem], y: &[Elem], what: &str, i: usize| -> Result<()> {
            for (j, (u, v)) in x.iter().zip(y).enumerate() {
                if !f.divisible_by_pi_pow(&f.sub(u, v), tol) {
                    return Err(Error::Mismatch {
                        witness: format!("{what} fails on sample {i} at component {}", j + 1),
                    });
                }
            }
            Ok(())
        };
        let zero = vec![f.zero(); self.r];
        for i in 0..samples {
            let (a, b, c) = (point(), point(), point());
            let ab = self.combine(&a, &b)?;
            same(&ab, &self.combine(&b, &a)?, "commutativity", i)?;
            same(
                &self.combine(&ab, &c)?,
                &self.combine(&a, &self.combine(&b, &c)?)?,
                "associativity",
                i,
            )?;
            same(&self.combine(&a, &zero)?, &a, "identity", i)?;
            same(&self.combine(&a, &self.negate(&a)?)?, &zero, "inverse", i)?;
        }
        Ok(())
    }
}

/// `F_i = {δ^i 𝓕}|_{T=0}` for `i = 1..=r`, through the axiomatic prolongation.
pub fn jet_group_law(g: &FormalGroupData, r: usize) -> Result<JetGroupLaw> {
    if r == 0 {
        return Err(Error::Config("jet group laws start at r = 1".into()));
    }
    let f = g.field().clone();
    let ring = law_ring(&f, r);
    let mut cur = g.law.lift_to(&ring);
    let mut components = Vec::with_capacity(r);
    for _ in 0..r {
        cur = cur.prolong()?;
        components.push(at_origin(&cur));
    }
    let one = JetRing::new(f.clone(), Flavor::P, &["T"], r);
    let t = Trunc::total(g.cutoff);
    let mut cur = eval_univ(
        &g.inverse_coeffs(),
        &JetPoly::var(&one, 0, 0)?.set_trunc(t),
        t,
    );
    let mut inverse = Vec::with_capacity(r);
    for _ in 0..r {
        cur = cur.prolong()?;
        inverse.push(at_origin(&cur));
    }
    let law = JetGroupLaw {
        r,
        cutoff: g.cutoff,
        components,
        inverse,
    };
    law.check_random(10, 0x5eed)?;
    Ok(law)
}

/// `φ^r` by repeated Frobenius lifts.
fn phi_iter(x: &JetPoly, r: usize) -> Result<JetPoly> {
    let mut cur = x.clone();
    for _ in 0..r {
        cur = cur.frobenius_lift()?;
    }
    Ok(cur)
}

/// `L^r_p = (1/p) {φ^r(l(T))}|_{T=0}` in the jets `δT..δ^rT`.
pub fn log_jets_raw(g: &FormalGroupData, r: usize) -> Result<JetPoly> {
    if r == 0 {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let f = g.field().clone();
    let ring = JetRing::new(f.clone(), Flavor::P, &["T"], r);
    let l = g.log_in(&ring, 0)?;
    let top = at_origin(&phi_iter(&l, r)?);
    let out = top.scale(&f.mul_p_pow(&f.one(), -1));
    check_integral(&out, "L^r_p is not integral")?;
    Ok(out)
}

/// [`log_jets_raw`] plus the homomorphism check `L([+](a,b)) = L(a) + L(b)`,
/// symbolically at the cutoff and on `samples` random pairs.
pub fn log_jets(
    g: &FormalGroupData,
    r: usize,
    law: &JetGroupLaw,
    samples: usize,
    seed: u64,
) -> Result<JetPoly> {
    let l = log_jets_raw(g, r)?;
    check_log_homomorphism(&l, law)?;
    let f = l.field().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = (g.cutoff as i64 + 1).min(f.precision() as i64 - 1) * f.e() as i64;
    for i in 0..samples {
        let a: Vec<Elem> = (0..r)
            .map(|_| f.mul_p_pow(&f.random_integral(&mut rng), 1))
            .collect();
        let b: Vec<Elem> = (0..r)
            .map(|_| f.mul_p_pow(&f.random_integral(&mut rng), 1))
            .collect();
        let ab = law.combine(&a, &b)?;
        let at = |x: &[Elem]| l.eval(&|slot| x[slot - 1].clone());
        let d = f.sub(&at(&ab)?, &f.add(&at(&a)?, &at(&b)?));
        if !f.divisible_by_pi_pow(&d, tol) {
            return Err(Error::Mismatch {
                witness: format!("L^{r}_p is not additive on sample {i}"),
            });
        }
    }
    Ok(l)
}

fn check_log_homomorphism(l: &JetPoly, law: &JetGroupLaw) -> Result<()> {
    let target = law.components[0].ring().clone();
    let caps = Trunc::total(law.cutoff);
    let mut image = |slot: usize| Ok(law.components[slot - 1].clone());
    let lhs = l.substitute(&target, &mut image, &|c| c.clone(), caps, l.order())?;
    let rhs = into_var(l, &target, 0, caps)?.add(&into_var(l, &target, 1, caps)?);
    match lhs.difference_witness(&rhs) {
        None => Ok(()),
        Some(w) => Err(Error::Mismatch {
            witness: format!("L([+](a,b)) - L(a) - L(b): {w}"),
        }),
    }
}

/// `G_{r,π} = (1/π){φ^r(T)}|_{T=0}` in `δ_π` jets, cut at total degree `cutoff`.
pub fn g_r_pi(field: &Arc<Field>, r: usize, cutoff: u32) -> Result<JetPoly> {
    if r == 0 {
        return Err(Error::Config("r must be at least 1".into()));
    }
    let ring = JetRing::new(field.clone(), Flavor::Pi, &["T"], r);
    let t = JetPoly::var(&ring, 0, 0)?.set_trunc(Trunc::total(cutoff));
    let top = at_origin(&phi_iter(&t, r)?);
    for (k, c) in top.terms() {
        if !field.divisible_by_pi_pow(c, 1) {
            return Err(Error::Divisibility(format!(
                "{{φ^{r}(T)}} at T=0 has coefficient {} at {}",
                field.format(c),
                top.ring_monomial_name(k)
            )));
        }
    }
    Ok(top.scale(field.pi_inv()))
}

/// Both computations of `L^r_π` and the minimal `n(r)` with `p^{n(r)} F_r` π-integral.
#[derive(Clone, Debug)]
pub struct PiLogJets {
    /// `(p/π) L^r_p` rewritten in `δ_π` jets.
    pub rewritten: JetPoly,
    /// `Σ φ^r(n a_n) (π^{n-1}/n) G_{r,π}^n`.
    pub direct: JetPoly,
    pub n_r: u32,
}

fn check_pi_hypothesis(field: &Field) -> Result<()> {
    let (p, e) = (field.p() as usize, field.e());
    if e > p - 1 {
        return Err(Error::Hypothesis(format!(
            "v_p(π) = 1/{e} is below 1/(p-1) = 1/{}",
            p - 1
        )));
    }
    Ok(())
}

/// `L^r_π` two ways; refuses when `v_p(π) < 1/(p-1)`.
pub fn l_r_pi(
    g: &FormalGroupData,
    r: usize,
    law: &JetGroupLaw,
    conv: &Conversion,
) -> Result<PiLogJets> {
    let f = g.field().clone();
    check_pi_hypothesis(&f)?;
    let caps = Trunc::total(g.cutoff);
    let lp = log_jets_raw(g, r)?;
    let rewritten = conv.p_to_pi(&lp)?.scale(&f.p_over_pi());
    check_integral(&rewritten, "(p/π) L^r_p is not π-integral")?;

    let gr = g_r_pi(&f, r, g.cutoff)?;
    let mut direct = JetPoly::zero(gr.ring()).set_trunc(caps);
    let mut pw = JetPoly::one(gr.ring()).set_trunc(caps);
    for (n, a) in g.log_coeffs.iter().enumerate().skip(1) {
        pw = pw.mul(&gr);
        if pw.is_empty() {
            break;
        }
        let mut na = f.mul_int(a, n as i64);
        for _ in 0..r {
            na = f.frobenius(&na);
        }
        let c = f.mul(
            &na,
            &f.mul(&f.pi_pow(n as i64 - 1), &f.from_frac(1, n as i64)),
        );
        direct = direct.add(&pw.scale(&c));
    }
    let direct = direct.with_order(r);
    if let Some(w) = rewritten.difference_witness(&direct) {
        return Err(Error::Mismatch {
            witness: format!("L^{r}_π routes differ: {w}"),
        });
    }
    let n_r = overconvergence_defect(&law.components[r - 1], conv)?.defect;
    Ok(PiLogJets {
        rewritten,
        direct,
        n_r,
    })
}

/// `v_p(π^{n-1}/n)` for `n = 1..=n_max`, in units of `1/e`.
pub fn pi_log_valuations(field: &Field, n_max: usize) -> Vec<i64> {
    let p = field.p();
    let e = field.e() as i64;
    (1..=n_max)
        .map(|n| {
            (n as i64 - 1) - e * crate::base_rings::vp_int(&num_bigint::BigInt::from(n), p) as i64
        })
        .collect()
}

/// The δ-characters of `𝔾_m` in the coordinate `x`.
#[derive(Clone, Debug)]
pub struct PsiCharacters {
    pub psi_p: QJetSeries,
    pub psi_pi: QJetSeries,
}

/// `ψ_p` and `ψ_π` cut at jet degree `d`, with `pψ_p = π·include(ψ_π)`,
/// `Tr(include ψ_π) = Tr(1/π)·pψ_p` and the homomorphism property checked.
pub fn psi_characters(field: &Arc<Field>, d: u32, conv: &Conversion) -> Result<PsiCharacters> {
    check_pi_hypothesis(field)?;
    let rp = JetRing::new(field.clone(), Flavor::P, &["x"], 1);
    let rpi = rp.with_flavor(Flavor::Pi);
    let psi_p = log_series(&rp, d);
    let psi_pi = log_series(&rpi, d);

    let inc = include_pi_into_p(&psi_pi, conv)?;
    let p_psi = psi_p.scale_int(field.p() as i64);
    if let Some(w) = inc.scale(&field.pi()).difference_witness(&p_psi) {
        return Err(Error::Mismatch {
            witness: format!("p ψ_p = π ψ_π: {w}"),
        });
    }
    let tr = field.trace(field.pi_inv());
    if let Some(w) = trace_series(&inc).difference_witness(&p_psi.scale(&tr)) {
        return Err(Error::Mismatch {
            witness: format!("trace of ψ_π: {w}"),
        });
    }
    check_character(&psi_p)?;
    check_character(&psi_pi)?;
    Ok(PsiCharacters { psi_p, psi_pi })
}

/// `ψ(xy) = ψ(x) + ψ(y)` with `δ(xy) = x^p δy + y^p δx + ℓ δx δy`.
pub fn check_character(psi: &QJetSeries) -> Result<()> {
    let ring = psi.ring();
    let f = ring.field().clone();
    let p = f.p() as u64;
    let two = JetRing::new(f.clone(), ring.flavor(), &["x", "y"], 1);
    let caps = psi.trunc().degree_caps();
    let v = |i, j| JetPoly::var(&two, i, j).map(|x| x.set_trunc(caps));
    let (x, y, dx, dy) = (v(0, 0)?, v(1, 0)?, v(0, 1)?, v(1, 1)?);
    let xy = x.mul(&y);
    let dxy = x
        .pow(p)
        .mul(&dy)
        .add(&y.pow(p).mul(&dx))
        .add(&dx.mul(&dy).scale(&two.ell()));
    let mut image = |slot: usize| Ok(if slot == 0 { xy.clone() } else { dxy.clone() });
    let lhs = psi.substitute(&two, &mut image, &|c| c.clone(), psi.trunc(), psi.order())?;
    let rhs = into_var(psi, &two, 0, caps)?.add(&into_var(psi, &two, 1, caps)?);
    match lhs.difference_witness(&rhs) {
        None => Ok(()),
        Some(w) => Err(Error::Mismatch {
            witness: format!("ψ(xy) - ψ(x) - ψ(y): {w}"),
        }),
    }
}
