//! Hecke eigen-systems, the operators `T_{κ,M}(n)`, `E_{p-1}` and its unit
//! root, and the expansions of the forms `f^♯_π`, `τ_π f^♯_π`, `f^♯_p`
//! attached to a weight-2 system with `a_p = 1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::base_rings::{is_prime, Field};
use crate::delta_calculus::{jet_degree, Conversion, Flavor, JetPoly, JetRing, Trunc};
use crate::error::{Error, Result};
use crate::jet_series::{
    include_pi_into_p, overconvergence_defect, q_monomial, series_ring, trace_series,
    OverconvergenceReport, QJetSeries, SeriesTruncation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Synthetic,
    Ingested,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Synthetic => "synthetic",
            Source::Ingested => "ingested",
        }
    }
}

/// Normalized coefficients `a_1..a_Q` of a Hecke eigenform.
///
/// When `p_in_level` is set the level is `Np` (so `a_{p^r} = a_p^r`), otherwise `N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeckeSystem {
    pub level: u64,
    pub p: u64,
    pub kappa: u32,
    /// `a[n]` for `0 <= n <= Q`; `a[0] = 0`.
    pub a: Vec<BigInt>,
    pub p_in_level: bool,
    pub source: Source,
}

/// Smallest prime factor `ℓ` and `ℓ^{v_ℓ(n)}`.
fn first_prime_part(n: u64) -> (u64, u64) {
    let mut l = 2;
    while n % l != 0 {
        l += 1;
    }
    let mut q = 1;
    let mut m = n;
    while m % l == 0 {
        m /= l;
        q *= l;
    }
    (l, q)
}

impl HeckeSystem {
    pub fn q_max(&self) -> usize {
        self.a.len() - 1
    }

    pub fn coeff(&self, n: usize) -> &BigInt {
        &self.a[n]
    }

    fn bad_prime(&self, l: u64) -> bool {
        self.level % l == 0 || (self.p_in_level && l == self.p)
    }

    /// The value of `a_n` forced by smaller coefficients (`None` at primes).
    fn forced(&self, n: u64) -> Option<BigInt> {
        if n == 1 {
            return Some(BigInt::one());
        }
        let (l, q) = first_prime_part(n);
        if q != n {
            return Some(&self.a[q as usize] * &self.a[(n / q) as usize]);
        }
        if n == l {
            return None;
        }
        let prev = &self.a[(n / l) as usize];
        if self.bad_prime(l) {
            return Some(prev * &self.a[l as usize]);
        }
        let w = BigInt::from(l).pow(self.kappa - 1);
        Some(&self.a[l as usize] * prev - w * &self.a[(n / l / l) as usize])
    }

    /// First violated relation, scanning `n = 1, 2, …`.
    pub fn verify(&self) -> Result<()> {
        if !self.a[0].is_zero() {
            return Err(Error::RelationViolation {
                n: 0,
                msg: "a_0 must vanish".into(),
            });
        }
        for n in 1..self.a.len() {
            if let Some(want) = self.forced(n as u64) {
                if want != self.a[n] {
                    return Err(Error::RelationViolation {
                        n,
                        msg: format!("a_{n} = {} but the relations force {want}", self.a[n]),
                    });
                }
            }
        }
        Ok(())
    }

    /// Header `N p kappa Q source` and lines `n a_n`.
    pub fn to_file(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.level,
            self.p,
            self.kappa,
            self.q_max(),
            self.source.as_str()
        );
        for (n, a) in self.a.iter().enumerate().skip(1) {
            let _ = writeln!(out, "{n} {a}");
        }
        out
    }

    /// `f = Σ a_n q^n` as a q-series over `field`.
    pub fn series(&self, field: &Arc<Field>) -> QJetSeries {
        let ring = series_ring(field, Flavor::P, 0);
        let terms = self
            .a
            .iter()
            .enumerate()
            .map(|(n, a)| (vec![n as i32], field.from_bigint(a)));
        JetPoly::from_terms(
            &ring,
            terms.collect::<Vec<_>>(),
            Trunc {
                q: Some(self.a.len() as i32),
                ..Trunc::default()
            },
        )
    }
}

fn check_level(level: u64, p: u64) -> Result<()> {
    if !is_prime(p) || p < 5 {
        return Err(Error::Config(format!("p = {p} must be a prime >= 5")));
    }
    if level <= 4 {
        return Err(Error::Config(format!(
            "the tame level N = {level} must exceed 4"
        )));
    }
    if level.gcd(&p) != 1 {
        return Err(Error::Config(format!(
            "the tame level N = {level} is not prime to p = {p}"
        )));
    }
    Ok(())
}

/// Extends prime values to `a_1..a_Q` by the recursions (missing primes get 0).
pub fn synthesize(
    level: u64,
    p: u64,
    kappa: u32,
    prime_values: &BTreeMap<u64, i64>,
    q_max: usize,
    p_in_level: bool,
) -> Result<HeckeSystem> {
    check_level(level, p)?;
    let mut h = HeckeSystem {
        level,
        p,
        kappa,
        a: vec![BigInt::zero(); q_max + 1],
        p_in_level,
        source: Source::Synthetic,
    };
    for n in 1..=q_max as u64 {
        h.a[n as usize] = match h.forced(n) {
            Some(v) => v,
            None => BigInt::from(*prime_values.get(&n).unwrap_or(&0)),
        };
    }
    h.verify()?;
    Ok(h)
}

/// A random weight-2 system of level `Np` with `a_p = 1`, `a_ℓ = ±1` for `ℓ | N`
/// and `|a_ℓ| <= 2√ℓ` otherwise.
pub fn random_split_system<R: Rng + ?Sized>(
    level: u64,
    p: u64,
    q_max: usize,
    rng: &mut R,
) -> Result<HeckeSystem> {
    let mut vals = BTreeMap::new();
    for l in (2..=q_max as u64).filter(|&l| is_prime(l)) {
        let v = if l == p {
            1
        } else if level % l == 0 {
            if rng.gen_bool(0.5) {
                1
            } else {
                -1
            }
        } else {
            let b = (2.0 * (l as f64).sqrt()).floor() as i64;
            rng.gen_range(-b..=b)
        };
        vals.insert(l, v);
    }
    synthesize(level, p, 2, &vals, q_max, true)
}

/// Reads the coefficient file format and verifies the relations.
pub fn ingest(text: &str) -> Result<HeckeSystem> {
    let h = read_coefficients(text)?;
    h.verify()?;
    Ok(h)
}

/// Reads the coefficient file format without checking the Hecke relations.
pub fn read_coefficients(text: &str) -> Result<HeckeSystem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or(Error::Malformed {
        line: 0,
        msg: "empty file".into(),
    })?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 5 {
        return Err(Error::Malformed {
            line: hl,
            msg: "header must read `N p kappa Q source`".into(),
        });
    }
    let num = |s: &str, what: &str| -> Result<u64> {
        s.parse().map_err(|_| Error::Malformed {
            line: hl,
            msg: format!("bad {what} `{s}`"),
        })
    };
    let (level, p, kappa, q) = (
        num(f[0], "N")?,
        num(f[1], "p")?,
        num(f[2], "kappa")?,
        num(f[3], "Q")? as usize,
    );
    let source = match f[4] {
        "synthetic" => Source::Synthetic,
        "ingested" | "external" => Source::Ingested,
        s => {
            return Err(Error::Malformed {
                line: hl,
                msg: format!("unknown source `{s}`"),
            })
        }
    };
    check_level(level, p).map_err(|e| Error::Malformed {
        line: hl,
        msg: e.to_string(),
    })?;
    let mut a: Vec<Option<BigInt>> = vec![None; q + 1];
    for (ln, l) in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Malformed {
                line: ln,
                msg: "expected `n a_n`".into(),
            });
        }
        let n: usize = parts[0].parse().map_err(|_| Error::Malformed {
            line: ln,
            msg: format!("bad index `{}`", parts[0]),
        })?;
        let v: BigInt = parts[1].parse().map_err(|_| Error::Malformed {
            line: ln,
            msg: format!("bad coefficient `{}`", parts[1]),
        })?;
        if n == 0 || n > q {
            return Err(Error::Malformed {
                line: ln,
                msg: format!("index {n} outside 1..={q}"),
            });
        }
        if a[n].replace(v).is_some() {
            return Err(Error::Malformed {
                line: ln,
                msg: format!("index {n} repeated"),
            });
        }
    }
    let mut coeffs = vec![BigInt::zero()];
    for (n, v) in a.into_iter().enumerate().skip(1) {
        coeffs.push(v.ok_or(Error::Malformed {
            line: 0,
            msg: format!("coefficient a_{n} missing"),
        })?);
    }
    Ok(HeckeSystem {
        level,
        p,
        kappa: kappa as u32,
        a: coeffs,
        p_in_level: true,
        source,
    })
}

/// The trivial character modulo `m`: 1 on units, 0 otherwise.
pub fn epsilon(m: u64, a: u64) -> i64 {
    i64::from(a.gcd(&m) == 1)
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// `T_{κ,M}(n)` on integer coefficients `a_0..a_{len-1}`; the result has
/// coefficients for `m <= (len-1)/n`.
pub fn hecke_t_coeffs(kappa: u32, m_mod: u64, n: u64, a: &[BigInt]) -> Vec<BigInt> {
    let out_len = (a.len() - 1) / n as usize + 1;
    (0..out_len as u64)
        .map(|m| {
            let g = if m == 0 { n } else { m.gcd(&n) };
            let mut acc = BigInt::zero();
            for d in divisors(g) {
                let eps = epsilon(m_mod, d);
                if eps == 0 {
                    continue;
                }
                acc += BigInt::from(d).pow(kappa - 1) * &a[(m * n / (d * d)) as usize];
            }
            acc
        })
        .collect()
}

/// `T_{κ,M}(n)` on a pure q-series.
pub fn hecke_t(kappa: u32, m_mod: u64, n: u64, s: &QJetSeries) -> Result<QJetSeries> {
    let ring = s.ring().clone();
    let f = ring.field().clone();
    if s.terms().keys().any(|k| k[1..].iter().any(|&e| e != 0)) {
        return Err(Error::Config(
            "Hecke operators act on series without jet variables".into(),
        ));
    }
    if s.min_q_exp().is_some_and(|m| m < 0) {
        return Err(Error::Config("Hecke operators act on power series".into()));
    }
    let q = s
        .trunc()
        .q
        .ok_or_else(|| Error::TruncationMismatch("Hecke operators need a q-cap".into()))?;
    let coeff = |i: u64| -> crate::base_rings::Elem {
        let mut k = vec![0; ring.width()];
        k[0] = i as i32;
        s.coeff(&k).cloned().unwrap_or_else(|| f.zero())
    };
    let out_q = (q as u64 - 1) / n + 1;
    let mut terms = Vec::new();
    for m in 0..out_q {
        let g = if m == 0 { n } else { m.gcd(&n) };
        let mut acc = f.zero();
        for d in divisors(g) {
            if epsilon(m_mod, d) == 0 {
                continue;
            }
            let w = f.pow(&f.from_int(d as i64), (kappa - 1) as u64);
            acc = f.add(&acc, &f.mul(&w, &coeff(m * n / (d * d))));
        }
        let mut k = vec![0; ring.width()];
        k[0] = m as i32;
        terms.push((k, acc));
    }
    Ok(JetPoly::from_terms(
        &ring,
        terms,
        Trunc {
            q: Some(out_q as i32),
            ..s.trunc()
        },
    ))
}

/// `Σ_{n < Q, p ∤ n} (a_n/n) q^n` in the given ring (flavor and order are the caller's).
pub fn f_inverse_twist_in(h: &HeckeSystem, ring: &Arc<JetRing>, q_prec: i32) -> QJetSeries {
    let f = ring.field().clone();
    let terms = (1..(q_prec as usize).min(h.a.len()))
        .filter(|n| *n as u64 % h.p != 0)
        .map(|n| {
            let mut k = vec![0; ring.width()];
            k[0] = n as i32;
            (
                k,
                f.from_ratio(&BigRational::new(h.a[n].clone(), BigInt::from(n))),
            )
        });
    JetPoly::from_terms(
        ring,
        terms.collect::<Vec<_>>(),
        Trunc {
            q: Some(q_prec),
            ..Trunc::default()
        },
    )
}

/// [`f_inverse_twist_in`] as a plain q-series.
pub fn f_inverse_twist(h: &HeckeSystem, field: &Arc<Field>, q_prec: i32) -> QJetSeries {
    f_inverse_twist_in(h, &series_ring(field, Flavor::P, 0), q_prec)
}

/// The three forms of `E(f^♯_π)`.
#[derive(Clone, Debug)]
pub struct SharpPiExpansion {
    /// `(1/π)(φ - p) Σ (a_n/n) q^n` through the Frobenius lift (δ_π jets).
    pub series: QJetSeries,
    /// `(1/π)[Σ (a_n/n)(q^p + π δ_π q)^n - p Σ (a_n/n) q^n]`.
    pub binomial_pi: QJetSeries,
    /// `(1/π)[Σ (a_n/n)(q^p + p δ_p q)^n - p Σ (a_n/n) q^n]` (δ_p jets over `R_π`).
    pub binomial_p: QJetSeries,
    /// The bracket of `binomial_p` before dividing by π (coefficients in the base).
    pub bracket_p: QJetSeries,
}

fn log_sum(h: &HeckeSystem, ring: &Arc<JetRing>, q_in: i32, t: Trunc) -> Result<QJetSeries> {
    let f = ring.field().clone();
    if q_in as usize > h.a.len() {
        return Err(Error::TruncationMismatch(format!(
            "need coefficients up to a_{} but the system stops at a_{}",
            q_in - 1,
            h.q_max()
        )));
    }
    let terms = (1..q_in as usize).map(|n| {
        let mut k = vec![0; ring.width()];
        k[0] = n as i32;
        (
            k,
            f.from_ratio(&BigRational::new(h.a[n].clone(), BigInt::from(n))),
        )
    });
    Ok(JetPoly::from_terms(ring, terms.collect::<Vec<_>>(), t))
}

/// `Σ_{n < q_in} (a_n/n)(q^p + ℓ δq)^n - p Σ_{n < q_in} (a_n/n) q^n` in `ring`, cut at `t`.
fn bracket(h: &HeckeSystem, ring: &Arc<JetRing>, q_in: i32, t: Trunc) -> Result<QJetSeries> {
    let f = ring.field().clone();
    let p = f.p() as i32;
    let base = q_monomial(ring, p, &[0], f.one())
        .add(&q_monomial(ring, 0, &[1], ring.ell()))
        .set_trunc(t.degree_caps());
    let mut acc = JetPoly::zero(ring).set_trunc(t);
    let mut pw = JetPoly::one(ring).set_trunc(t.degree_caps());
    for n in 1..q_in as usize {
        pw = pw.mul(&base).truncate(Trunc {
            q: t.q,
            ..Trunc::default()
        });
        if h.a[n].is_zero() {
            continue;
        }
        let c = f.from_ratio(&BigRational::new(h.a[n].clone(), BigInt::from(n)));
        acc = acc.add(&pw.scale(&c));
    }
    let s = log_sum(h, ring, q_in, t)?;
    Ok(acc.sub(&s.scale_int(p as i64)).truncate(t).with_order(1))
}

/// Input range needed so that every monomial below `q^Q` with jet degree `<= D` is complete.
fn input_cap(p: i32, t: &SeriesTruncation) -> i32 {
    t.q_prec.max((t.q_prec + p - 1) / p + t.jet_deg as i32 + 1)
}

fn check_integral_series(s: &QJetSeries, what: &str) -> Result<()> {
    let f = s.field();
    for (k, c) in sorted_terms(s) {
        if !f.is_integral(&c) {
            return Err(Error::Integrality(format!(
                "{what}: coefficient {} at {}",
                f.format(&c),
                s.ring_monomial_name(&k)
            )));
        }
    }
    Ok(())
}

/// Terms sorted by `(|β|, n, β)`.
pub fn sorted_terms(s: &QJetSeries) -> Vec<(Vec<i32>, crate::base_rings::Elem)> {
    let nv = s.ring().nvars();
    let mut v: Vec<_> = s
        .terms()
        .iter()
        .map(|(k, c)| (k.clone(), c.clone()))
        .collect();
    v.sort_by_key(|(k, _)| (jet_degree(k, nv), k[0], k[1..].to_vec()));
    v
}

/// First monomial (in `(|β|, n, β)` order) where `a - b` is not divisible by `π^units`.
pub fn first_incongruence(a: &QJetSeries, b: &QJetSeries, units: i64) -> Option<String> {
    let d = a.sub(b);
    let f = d.field();
    sorted_terms(&d)
        .into_iter()
        .find(|(_, c)| !f.divisible_by_pi_pow(c, units))
        .map(|(k, c)| format!("{} (difference {})", d.ring_monomial_name(&k), f.format(&c)))
}

/// `E(f^♯_π)` three ways; all three must agree and be integral.
pub fn expansion_fsharp_pi(
    h: &HeckeSystem,
    conv: &Conversion,
    t: &SeriesTruncation,
) -> Result<SharpPiExpansion> {
    let f = conv.p_ring().field().clone();
    let p = f.p() as i32;
    if h.p != p as u64 {
        return Err(Error::Config(format!(
            "system is for p = {} but the ring has p = {p}",
            h.p
        )));
    }
    let out = t.trunc();
    let q_in = input_cap(p, t);
    let pi_inv = f.pi_inv().clone();

    let rpi = series_ring(&f, Flavor::Pi, 1);
    let s_in = log_sum(h, &rpi, q_in, Trunc::series(q_in, t.jet_deg))?;
    let phi = s_in.frobenius_lift()?;
    let series = phi
        .sub(&s_in.scale_int(p as i64))
        .scale(&pi_inv)
        .truncate(out)
        .with_order(1);

    let binomial_pi = bracket(h, &rpi, q_in, out)?.scale(&pi_inv);
    let rp = series_ring(&f, Flavor::P, 1);
    let bracket_p = bracket(h, &rp, q_in, out)?;
    let binomial_p = bracket_p.scale(&pi_inv);

    check_integral_series(&series, "E(f♯_π) is not integral")?;
    if let Some(w) = series.difference_witness(&binomial_pi) {
        return Err(Error::Mismatch {
            witness: format!("(φ-p) form vs binomial form: {w}"),
        });
    }
    let inc = include_pi_into_p(&series, conv)?;
    if let Some(w) = inc.difference_witness(&binomial_p) {
        return Err(Error::Mismatch {
            witness: format!("δ_π form vs δ_p form: {w}"),
        });
    }
    Ok(SharpPiExpansion {
        series,
        binomial_pi,
        binomial_p,
        bracket_p,
    })
}

/// `(Σ a_n q^{np})(δ_π q/q^p) - (Σ a_n q^{np²})(δ_π q/q^p)^p`, cut at `t`.
pub fn mod_pi_closed_form(h: &HeckeSystem, ring: &Arc<JetRing>, t: Trunc) -> QJetSeries {
    let f = ring.field().clone();
    let p = f.p() as i32;
    let q = t.q.unwrap_or(i32::MAX);
    let mut acc = JetPoly::zero(ring).set_trunc(t);
    for n in 1..h.a.len() as i32 {
        let a = f.from_bigint(&h.a[n as usize]);
        let e1 = n * p - p;
        if e1 < q {
            acc = acc.add(&q_monomial(ring, e1, &[1], a.clone()));
        }
        let e2 = n * p * p - p * p;
        if e2 < q && t.jet_deg.is_none_or(|d| d >= p as u32) {
            acc = acc.sub(&q_monomial(ring, e2, &[p], a));
        }
    }
    acc.truncate(t).with_order(1)
}

/// The mod-π congruence of `E(f^♯_π)` with the closed form; `p ≡ -π^{p-1} (mod π^p)` is
/// checked first since the closed form depends on it.
pub fn congruence_mod_pi(h: &HeckeSystem, sharp: &SharpPiExpansion) -> Result<()> {
    let f = sharp.series.field().clone();
    let p = f.p() as i64;
    let lhs = f.add(&f.from_int(p), &f.pi_pow(p - 1));
    if !f.divisible_by_pi_pow(&lhs, p) {
        return Err(Error::Hypothesis(
            "the congruence needs p ≡ -π^(p-1) mod π^p (π = 1 - ζ_p)".into(),
        ));
    }
    let closed = mod_pi_closed_form(
        h,
        sharp.series.ring(),
        sharp.series.trunc().degree_caps().meet(&Trunc {
            q: sharp.series.trunc().q,
            ..Trunc::default()
        }),
    );
    match first_incongruence(&sharp.series, &closed, 1) {
        None => Ok(()),
        Some(w) => Err(Error::Mismatch { witness: w }),
    }
}

/// The trace series, `f^♯_p` and the verdicts of the order-one trace propositions.
#[derive(Clone, Debug)]
pub struct TauReport {
    /// `τ_π E(f^♯_π)` in δ_p jets over the base.
    pub tau: QJetSeries,
    /// `((p-1)/2)[Σ (a_n/n)(q^p + pδ_p q)^n - p Σ (a_n/n) q^n]`.
    pub closed_form: QJetSeries,
    /// `(2/p) τ`.
    pub fsharp_p: QJetSeries,
    /// `f^(-1) - (Σ a_n q^{np}) δ_p q/q^p`.
    pub mod_p_target: QJetSeries,
    pub tau_matches: bool,
    pub tau_divisible_by_p: Option<String>,
    pub mod_p_congruence: Option<String>,
    pub defect: OverconvergenceReport,
}

/// Requires `Tr(1/π) = (p-1)/2`.
pub fn expansion_tau_and_fsharp_p(
    h: &HeckeSystem,
    sharp: &SharpPiExpansion,
    conv: &Conversion,
) -> Result<TauReport> {
    let f = sharp.series.field().clone();
    let p = f.p() as i64;
    let half = f.from_frac(p - 1, 2);
    if !f.eq(&f.trace(f.pi_inv()), &half) {
        return Err(Error::Hypothesis(
            "the trace identities need Tr(1/π) = (p-1)/2".into(),
        ));
    }
    let tau = trace_series(&include_pi_into_p(&sharp.series, conv)?);
    let closed_form = sharp.bracket_p.scale(&half);
    let tau_matches = tau.equals(&closed_form);
    let zero = JetPoly::zero(tau.ring());
    let tau_divisible_by_p = first_incongruence(&tau, &zero, f.e() as i64);
    let fsharp_p = tau.scale(&f.from_frac(2, p));

    let t = tau.trunc();
    let rp = tau.ring().clone();
    let mut target = f_inverse_twist_in(h, &rp, t.q.unwrap_or(h.a.len() as i32)).with_order(1);
    for n in 1..h.a.len() as i32 {
        let e1 = n * p as i32 - p as i32;
        if t.q.is_none_or(|q| e1 < q) {
            target = target.sub(&q_monomial(&rp, e1, &[1], f.from_bigint(&h.a[n as usize])));
        }
    }
    let mod_p_target = target.truncate(t.degree_caps()).with_order(1);
    let mod_p_congruence = first_incongruence(&fsharp_p, &mod_p_target, f.e() as i64);
    let defect = overconvergence_defect(&fsharp_p, conv)?;
    Ok(TauReport {
        tau,
        closed_form,
        fsharp_p,
        mod_p_target,
        tau_matches,
        tau_divisible_by_p,
        mod_p_congruence,
        defect,
    })
}

/// `f^(-1) - a_p (Σ a_m q^{mp}) δq/q^p + (Σ a_m q^{mp²})(δq/q^p)^p` with coefficients
/// reduced modulo p (level `N` reference, not derived here).
pub fn gamma0n_reference_expansion(
    h: &HeckeSystem,
    field: &Arc<Field>,
    t: &SeriesTruncation,
) -> QJetSeries {
    let p = h.p as i64;
    let pb = BigInt::from(p);
    let ring = series_ring(field, Flavor::P, 1);
    let red = |x: &BigInt| field.from_bigint(&x.mod_floor(&pb));
    let q = t.q_prec;
    let mut acc = JetPoly::zero(&ring);
    for n in 1..(q as usize).min(h.a.len()) {
        if n as i64 % p == 0 {
            continue;
        }
        let inv = crate::base_rings::mod_inverse(&BigInt::from(n), &pb);
        acc = acc.add(&q_monomial(&ring, n as i32, &[0], red(&(&h.a[n] * inv))));
    }
    let ap = h.a.get(p as usize).cloned().unwrap_or_default();
    for m in 1..h.a.len() as i32 {
        let e1 = m * p as i32 - p as i32;
        if e1 < q {
            acc = acc.add(&q_monomial(
                &ring,
                e1,
                &[1],
                red(&-(&ap * &h.a[m as usize])),
            ));
        }
        let e2 = m * (p * p) as i32 - (p * p) as i32;
        if e2 < q && t.jet_deg >= p as u32 {
            acc = acc.add(&q_monomial(&ring, e2, &[p as i32], red(&h.a[m as usize])));
        }
    }
    acc.truncate(t.trunc()).with_order(1)
}

// ---- Eisenstein series and its unit root ----

/// `B_0..B_n` over the rationals (`B_1 = -1/2`).
pub fn bernoulli_numbers(n: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = vec![BigRational::one()];
    for m in 1..=n {
        let mut binom = BigInt::one();
        let mut s = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            s += BigRational::from_integer(binom.clone()) * bk;
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        b.push(-s / BigRational::from_integer(BigInt::from(m + 1)));
    }
    b
}

fn sigma(n: u64, k: u32) -> BigInt {
    divisors(n)
        .into_iter()
        .map(|d| BigInt::from(d).pow(k))
        .sum()
}

/// `1 - (2k/B_k) Σ σ_{k-1}(n) q^n` for `k = p - 1`, below `q^Q`.
pub fn eisenstein_ep1(field: &Arc<Field>, q_prec: i32) -> Result<QJetSeries> {
    let p = field.p() as usize;
    let k = p - 1;
    let b = bernoulli_numbers(k).pop().expect("B_k");
    let c = BigRational::from_integer(BigInt::from(2 * k)) / b;
    let den_v = crate::base_rings::vp_int(c.denom(), field.p());
    if den_v > 0 {
        return Err(Error::Integrality("2k/B_k is not p-integral".into()));
    }
    let ring = series_ring(field, Flavor::P, 0);
    let mut terms = vec![(vec![0], field.one())];
    for n in 1..q_prec.max(1) as u64 {
        let v = BigRational::from_integer(sigma(n, (k - 1) as u32)) * &c;
        terms.push((vec![n as i32], field.neg(&field.from_ratio(&v))));
    }
    Ok(JetPoly::from_terms(
        &ring,
        terms,
        Trunc {
            q: Some(q_prec),
            ..Trunc::default()
        },
    ))
}

/// True if `s ≡ 1` modulo `p`.
pub fn congruent_to_one(s: &QJetSeries) -> bool {
    let f = s.field();
    let d = s.sub(&JetPoly::one(s.ring()));
    d.terms()
        .values()
        .all(|c| f.divisible_by_pi_pow(c, f.e() as i64))
}

/// The unique `m`-th root of `s` congruent to 1 mod p.
pub fn unit_root(s: &QJetSeries, m: u64) -> Result<QJetSeries> {
    let start = JetPoly::one(s.ring()).set_trunc(s.trunc());
    unit_root_from(s, m, &start)
}

/// Hensel iteration `ε ← ε - (ε^m - s)/m` from a start `≡ 1 mod p`.
pub fn unit_root_from(s: &QJetSeries, m: u64, start: &QJetSeries) -> Result<QJetSeries> {
    let f = s.field().clone();
    if m as u32 % f.p() == 0 || m == 0 {
        return Err(Error::Hypothesis(format!("m = {m} must be prime to p")));
    }
    if !congruent_to_one(s) {
        return Err(Error::Hypothesis(
            "the series is not congruent to 1 mod p".into(),
        ));
    }
    if !congruent_to_one(start) {
        return Err(Error::Hypothesis(
            "the starting point is not congruent to 1 mod p".into(),
        ));
    }
    let inv_m = f.from_frac(1, m as i64);
    let mut eps = start.clone().truncate(s.trunc());
    let steps = 2 * (f.precision() as usize * f.e()) + 8;
    for _ in 0..steps {
        let corr = eps.pow(m).sub(s).scale(&inv_m);
        if corr.is_empty() {
            return Ok(eps);
        }
        eps = eps.sub(&corr);
    }
    Err(Error::PrecisionExhausted(
        "Hensel iteration did not stabilize".into(),
    ))
}

/// `Σ_κ c_κ ε^κ`.
pub fn geometric_trace_forward(components: &[QJetSeries], eps: &QJetSeries) -> QJetSeries {
    let ring = eps.ring().clone();
    let mut acc = JetPoly::zero(&ring);
    let mut pw = JetPoly::one(&ring).set_trunc(eps.trunc());
    for (i, c) in components.iter().enumerate() {
        if i > 0 {
            pw = pw.mul(eps);
        }
        acc = acc.add(&c.mul(&pw));
    }
    acc
}

/// Coefficients of an integral q-series as integers (symmetric residues mod `p^K`).
pub fn integer_coefficients(s: &QJetSeries) -> Result<Vec<BigInt>> {
    let f = s.field();
    let q = s
        .trunc()
        .q
        .ok_or_else(|| Error::TruncationMismatch("series without q-cap".into()))?;
    let mut out = vec![BigInt::zero(); q.max(0) as usize];
    for (k, c) in s.terms() {
        if k[0] < 0 || k[1..].iter().any(|&e| e != 0) {
            return Err(Error::Config("expected a power series without jets".into()));
        }
        out[k[0] as usize] = f.residue_symmetric(c, f.precision()).ok_or_else(|| {
            Error::Integrality(format!(
                "coefficient {} is not a p-adic integer",
                f.format(c)
            ))
        })?;
    }
    Ok(out)
}
