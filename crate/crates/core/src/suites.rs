//! Named verification suites. Each returns a [`Report`] of individual checks;
//! the command line front-end and the acceptance tests share them.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base_rings::{EisensteinConfig, Elem, Field, PadicConfig};
use crate::delta_calculus::{
    conjugate_apply, conjugate_generator_values, conversion_polynomial, sum_defect, total_degree,
    Conversion, Derivation, Flavor, JetPoly, JetRing, Trunc,
};
use crate::error::{Error, Result};
use crate::formal_groups::{jet_group_law, l_r_pi, psi_characters, FormalGroupData};
use crate::jet_series::{
    include_pi_into_p, log_series, overconvergence_defect, q_monomial, radius_estimate,
    series_ring, trace_injectivity_probe, trace_series, valuation_bound_check, QJetSeries,
    SeriesTruncation,
};
use crate::modular_forms::{
    congruence_mod_pi, congruent_to_one, eisenstein_ep1, expansion_fsharp_pi,
    expansion_tau_and_fsharp_p, hecke_t_coeffs, random_split_system, unit_root, unit_root_from,
    HeckeSystem,
};

/// One verdict with enough detail to reproduce it.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suite: String,
    pub params: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: &str) -> Report {
        Report {
            suite: suite.to_string(),
            params: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    /// Records `Ok` as a pass and an error as a failure carrying its message.
    pub fn check_result<T>(
        &mut self,
        name: impl Into<String>,
        r: &Result<T>,
        ok_detail: impl Into<String>,
    ) -> bool {
        match r {
            Ok(_) => {
                self.check(name, true, ok_detail);
                true
            }
            Err(e) => {
                self.check(name, false, e.to_string());
                false
            }
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn absorb(&mut self, prefix: &str, other: Report) {
        for c in other.checks {
            self.checks.push(Check {
                name: format!("{prefix}{}", c.name),
                ..c
            });
        }
    }
}

/// Choice of uniformizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PiChoice {
    /// `π = 1 - ζ_p`.
    Cyclotomic,
    /// Root of `E_0 + E_1 x + ... + x^e` (full coefficient list, low degree first).
    Eisenstein(Vec<BigInt>),
}

impl PiChoice {
    /// `cyclotomic` or `eisenstein:<E_0>,<E_1>,...,1`.
    pub fn parse(text: &str) -> Result<PiChoice> {
        if text == "cyclotomic" {
            return Ok(PiChoice::Cyclotomic);
        }
        let list = text
            .strip_prefix("eisenstein:")
            .ok_or_else(|| Error::Config(format!("unknown uniformizer `{text}`")))?;
        let coeffs = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<BigInt>()
                    .map_err(|_| Error::Config(format!("bad coefficient `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PiChoice::Eisenstein(coeffs))
    }

    pub fn eisenstein(&self, p: u32) -> Result<EisensteinConfig> {
        match self {
            PiChoice::Cyclotomic => Ok(EisensteinConfig::cyclotomic(p)),
            PiChoice::Eisenstein(c) => EisensteinConfig::from_poly(p, c, false),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PiChoice::Cyclotomic => "cyclotomic".into(),
            PiChoice::Eisenstein(c) => {
                format!(
                    "eisenstein:{}",
                    c.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                )
            }
        }
    }
}

/// Parameters shared by the suites; unset truncations fall back to per-suite defaults.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub p: u32,
    pub level: u64,
    pub pi: PiChoice,
    pub precision: u32,
    pub q_prec: Option<i32>,
    pub jet_deg: Option<u32>,
    pub r: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            p: 5,
            level: 7,
            pi: PiChoice::Cyclotomic,
            precision: 8,
            q_prec: None,
            jet_deg: None,
            r: 1,
            seed: 1,
        }
    }
}

impl SuiteConfig {
    pub fn field(&self) -> Result<Arc<Field>> {
        Field::ramified(self.p, self.precision, self.pi.eisenstein(self.p)?)
    }

    fn stamp(&self, r: &mut Report) {
        r.param("p", self.p);
        r.param("pi", self.pi.label());
        r.param("K", self.precision);
        r.param("seed", self.seed);
    }
}

/// Names accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "axioms",
    "conversion",
    "trace-inclusion",
    "psi",
    "valuation-bound",
    "radius-counterexample",
    "pi-log-jets",
    "conjugate",
    "hecke-identities",
    "sharp-expansion",
    "congruence-mod-pi",
    "trace-closed-form",
    "congruence-mod-p",
    "order-one-pipeline",
    "unit-root",
    "gram",
];

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Report> {
    match name {
        "axioms" => {
            let f = cfg.field()?;
            let fl = if f.is_ramified() {
                Flavor::Pi
            } else {
                Flavor::P
            };
            Ok(delta_axioms(&[(cfg.pi.label(), f, fl)], 100, cfg.seed))
        }
        "conversion" => conversion_suite(cfg),
        "trace-inclusion" => trace_and_inclusion(cfg),
        "psi" => psi_suite(cfg),
        "valuation-bound" => valuation_bound_suite(cfg),
        "radius-counterexample" => radius_counterexample(cfg),
        "pi-log-jets" => pi_log_jets_suite(cfg),
        "conjugate" => conjugate_suite(cfg),
        "hecke-identities" => {
            check_level(cfg)?;
            let q = cfg.q_prec.unwrap_or((cfg.p * cfg.p + 5 * cfg.p) as i32) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let h = random_split_system(cfg.level, cfg.p as u64, q, &mut rng)?;
            Ok(hecke_identities(&h))
        }
        "sharp-expansion" | "congruence-mod-pi" | "trace-closed-form" | "congruence-mod-p"
        | "order-one-pipeline" => {
            check_level(cfg)?;
            let q = cfg.q_prec.unwrap_or((cfg.p * cfg.p + 5 * cfg.p) as i32);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let h = random_split_system(cfg.level, cfg.p as u64, q as usize, &mut rng)?;
            let stages = match name {
                "sharp-expansion" => 1,
                "congruence-mod-pi" => 2,
                "trace-closed-form" => 3,
                "congruence-mod-p" => 4,
                _ => 5,
            };
            order_one_pipeline(name, &h, cfg, stages)
        }
        "unit-root" => unit_root_suite(&[cfg.p], cfg.q_prec.unwrap_or(40), cfg.precision, cfg.seed),
        "gram" => {
            let f = cfg.field()?;
            Ok(gram_suite(&[(cfg.pi.label(), f)], cfg.seed))
        }
        _ => Err(Error::Config(format!(
            "unknown suite `{name}`; known: {}",
            SUITES.join(", ")
        ))),
    }
}

fn check_level(cfg: &SuiteConfig) -> Result<()> {
    if cfg.level <= 4 || cfg.level % cfg.p as u64 == 0 {
        return Err(Error::Config(format!(
            "level N = {} must exceed 4 and be prime to p = {}",
            cfg.level, cfg.p
        )));
    }
    Ok(())
}

/// Random polynomial with `terms` monomials of degree `<= deg` in the generators of order `<= order`.
pub fn random_poly<R: Rng + ?Sized>(
    ring: &Arc<JetRing>,
    rng: &mut R,
    terms: usize,
    deg: i32,
    order: usize,
) -> JetPoly {
    let f = ring.field().clone();
    let mut out = JetPoly::zero(ring);
    for _ in 0..terms {
        let mut key = vec![0; ring.width()];
        for _ in 0..rng.gen_range(0..=deg) {
            let v = rng.gen_range(0..ring.nvars());
            let j = rng.gen_range(0..=order);
            key[ring.slot(v, j)] += 1;
        }
        out = out.add(&JetPoly::monomial(ring, key, f.random_integral(rng)));
    }
    out.with_order(order)
}

// ---- δ-axioms ----

/// Sum and product rules and multiplicativity of φ on `pairs` random elements and
/// jet polynomials of each ring; the `Flavor` picks `δ_p` or `δ_π`.
pub fn delta_axioms(rings: &[(String, Arc<Field>, Flavor)], pairs: usize, seed: u64) -> Report {
    let mut rep = Report::new("axioms");
    rep.param("pairs", pairs);
    rep.param("seed", seed);
    for (name, f, flavor) in rings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = f.p() as u64;
        let ell = match flavor {
            Flavor::P => f.from_int(p as i64),
            Flavor::Pi => f.pi(),
        };
        let delta = |x: &Elem| -> Result<Elem> {
            match flavor {
                Flavor::P => f.delta_p(x),
                Flavor::Pi => f.delta_pi(x),
            }
        };
        let c = |x: &Elem, y: &Elem| -> Elem {
            match flavor {
                Flavor::P => f.c_p(x, y),
                Flavor::Pi => f.c_pi(x, y),
            }
        };
        let phi =
            |x: &Elem| -> Elem { f.add(&f.pow(x, p), &f.mul(&ell, &delta(x).expect("precision"))) };
        let mut bad = None;
        for i in 0..pairs {
            let (x, y) = (f.random_integral(&mut rng), f.random_integral(&mut rng));
            let (dx, dy) = (delta(&x).expect("precision"), delta(&y).expect("precision"));
            let sum = delta(&f.add(&x, &y)).expect("precision");
            let prod = delta(&f.mul(&x, &y)).expect("precision");
            let ok_sum = f.eq(&sum, &f.add(&f.add(&dx, &dy), &c(&x, &y)));
            let want = f.add(
                &f.add(&f.mul(&f.pow(&x, p), &dy), &f.mul(&f.pow(&y, p), &dx)),
                &f.mul(&ell, &f.mul(&dx, &dy)),
            );
            let ok_prod = f.eq(&prod, &want);
            let ok_phi = f.eq(&phi(&f.mul(&x, &y)), &f.mul(&phi(&x), &phi(&y)))
                && f.eq(&phi(&f.add(&x, &y)), &f.add(&phi(&x), &phi(&y)))
                && f.eq(&phi(&x), &f.frobenius(&x));
            if !(ok_sum && ok_prod && ok_phi) {
                bad = Some(format!(
                    "pair {i}: x = {}, y = {}",
                    f.format(&x),
                    f.format(&y)
                ));
                break;
            }
        }
        rep.check(
            format!("{name}: element axioms"),
            bad.is_none(),
            bad.unwrap_or_else(|| format!("{pairs} pairs at K={}", f.precision())),
        );

        let ring = JetRing::new(f.clone(), *flavor, &["x", "y"], 2);
        let mut bad = None;
        for i in 0..pairs {
            let a = random_poly(&ring, &mut rng, 2, 2, 1);
            let b = random_poly(&ring, &mut rng, 2, 2, 1);
            let run = || -> Result<Option<String>> {
                let (da, db) = (a.prolong()?, b.prolong()?);
                let sum = a.add(&b).prolong()?;
                if let Some(w) = sum.difference_witness(&da.add(&db).add(&sum_defect(&a, &b))) {
                    return Ok(Some(format!("sum rule: {w}")));
                }
                let prod = a.mul(&b).prolong()?;
                let want = a
                    .pow(p)
                    .mul(&db)
                    .add(&b.pow(p).mul(&da))
                    .add(&da.mul(&db).scale(&ring.ell()));
                if let Some(w) = prod.difference_witness(&want) {
                    return Ok(Some(format!("product rule: {w}")));
                }
                if let Some(w) = da.difference_witness(&a.delta_fast()?) {
                    return Ok(Some(format!("axiomatic vs Frobenius route: {w}")));
                }
                let lhs = a.mul(&b).frobenius_lift()?;
                if let Some(w) =
                    lhs.difference_witness(&a.frobenius_lift()?.mul(&b.frobenius_lift()?))
                {
                    return Ok(Some(format!("φ(ab) = φ(a)φ(b): {w}")));
                }
                Ok(None)
            };
            match run() {
                Ok(None) => {}
                Ok(Some(w)) => {
                    bad = Some(format!("pair {i}: {w}"));
                    break;
                }
                Err(e) => {
                    bad = Some(format!("pair {i}: {e}"));
                    break;
                }
            }
        }
        rep.check(
            format!("{name}: jet polynomial axioms"),
            bad.is_none(),
            bad.unwrap_or_else(|| format!("{pairs} pairs of order-1 polynomials in x, y")),
        );
    }
    rep
}

/// The rings of the axiom matrix: `Z_5`, `Z_7`, the unramified quadratic extension of `Q_5`,
/// `Z_5[1-ζ_5]` and `Z_5[√5]`, at precision `k`.
pub fn axiom_rings(k: u32) -> Result<Vec<(String, Arc<Field>, Flavor)>> {
    let unr = Field::new(&PadicConfig::unramified(5, k, 2, None)?, None)?;
    Ok(vec![
        ("Z_5".into(), Field::zp(5, k)?, Flavor::P),
        ("Z_7".into(), Field::zp(7, k)?, Flavor::P),
        ("W(F_25)".into(), unr, Flavor::P),
        (
            "Z_5[1-ζ_5]".into(),
            Field::ramified(5, k, EisensteinConfig::cyclotomic(5))?,
            Flavor::Pi,
        ),
        (
            "Z_5[√5]".into(),
            Field::ramified(5, k, EisensteinConfig::pure(5, 2)?)?,
            Flavor::Pi,
        ),
    ])
}

// ---- conversion polynomials ----

/// `δ_π^n a = (p/π)^n δ_p^n a + π^{max(e-n,0)} F_n(δ_p a, ...)` on random `a` of the
/// unramified base, `F_1 = 0`, `deg F_n <= p^{n-1}`; for `π = √5` also `F_2 = -24 (δ_p x)^5`.
pub fn conversion_suite(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("conversion");
    cfg.stamp(&mut rep);
    let base = PadicConfig::unramified(cfg.p, cfg.precision, 2, None)?;
    let f = Field::new(&base, Some(cfg.pi.eisenstein(cfg.p)?))?;
    let nmax = 3;
    let conv = Conversion::new(&f, nmax, Trunc::exact())?;
    let e = f.e() as i64;
    let p = f.p() as i64;
    rep.check("F_1 = 0", conv.f(1).is_empty(), conv.f(1).format());
    for n in 1..=nmax {
        let deg = conv
            .f(n)
            .terms()
            .keys()
            .map(|k| total_degree(k))
            .max()
            .unwrap_or(0);
        let bound = p.pow(n as u32 - 1);
        rep.check(
            format!("deg F_{n} <= p^{}", n - 1),
            deg <= bound,
            format!("degree {deg}, bound {bound}"),
        );
        let ok = conv.f(n).terms().keys().all(|k| k[0] == 0 && k[n] == 0);
        rep.check(
            format!("F_{n} has no constant, x or δ^{n}x terms"),
            ok,
            conv.f(n).format(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for n in 1..=nmax {
        let mut worst: Option<i64> = None;
        let mut bad = None;
        for i in 0..20 {
            let a = f.random_base(&mut rng);
            let mut dp = vec![a.clone()];
            let mut dpi = vec![a.clone()];
            for k in 1..=n {
                dp.push(f.delta_p(&dp[k - 1])?);
                dpi.push(f.delta_pi(&dpi[k - 1])?);
            }
            let fv = conv.f(n).eval(&|slot| dp[slot].clone())?;
            let lead = f.mul(&f.pow(&f.p_over_pi(), n as u64), &dp[n]);
            let rhs = f.add(&lead, &f.mul(&f.pi_pow((e - n as i64).max(0)), &fv));
            match f.agree(&dpi[n], &rhs) {
                Some(k) => worst = Some(worst.map_or(k, |w: i64| w.min(k))),
                None => {
                    bad = Some(format!("substitution {i}: a = {}", f.format(&a)));
                    break;
                }
            }
        }
        let detail = bad
            .clone()
            .unwrap_or_else(|| format!("20 substitutions, agreement mod p^{}", worst.unwrap_or(0)));
        rep.check(format!("conversion identity n={n}"), bad.is_none(), detail);
    }
    if e == 2 && p == 5 {
        let f2 = conversion_polynomial(&f, 2)?;
        let ring = f2.ring().clone();
        let want = JetPoly::var(&ring, 0, 1)?.pow(5).scale_int(-24);
        rep.check(
            "F_2 = -24 (δ_p x)^5 for π = √5",
            f2.equals(&want),
            f2.format(),
        );
    }
    Ok(rep)
}

// ---- trace and inclusion ----

/// Both directions of "a power of p times f is a trace" ⇔ "… is in the π-jet image" on samples:
/// traces of random `δ_π` series have finite defect, and `e·f = Tr(include(w))` for `f = include(w)`.
pub fn trace_and_inclusion(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("trace-inclusion");
    cfg.stamp(&mut rep);
    let f = cfg.field()?;
    let d = cfg.jet_deg.unwrap_or(2 * cfg.p);
    let q = cfg.q_prec.unwrap_or(12);
    rep.param("Q", q);
    rep.param("D", d);
    let conv = Conversion::new(&f, 1, Trunc::jets(d))?;
    let pr = series_ring(&f, Flavor::Pi, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut defects = Vec::new();
    let mut bad = None;
    for i in 0..10 {
        let h = random_pi_series(&pr, &mut rng, q, d, 1);
        let inc = include_pi_into_p(&h, &conv)?;
        let tr = trace_series(&inc);
        let rep_d = overconvergence_defect(&tr, &conv)?;
        defects.push(rep_d.defect);
        // back from the π-jet witness
        let back = include_pi_into_p(&rep_d.witness, &conv)?;
        if let Some(w) = back.difference_witness(&tr) {
            bad = Some(format!("sample {i}: rewriting does not invert: {w}"));
            break;
        }
    }
    rep.check(
        "traces have finite defect",
        bad.is_none(),
        bad.unwrap_or_else(|| format!("defects {defects:?} at Q={q} D={d} K={}", f.precision())),
    );
    let mut bad = None;
    let e = f.e() as i64;
    let rq = series_ring(&f, Flavor::P, 1);
    let ppsi = log_series(&rq, d).scale_int(cfg.p as i64);
    for i in 0..10 {
        let terms: Vec<_> = (0..4)
            .map(|n| {
                let mut k = vec![0; rq.width()];
                k[0] = n;
                (k, f.random_base(&mut rng))
            })
            .collect();
        let s = ppsi.mul(&JetPoly::from_terms(&rq, terms, Trunc::default()));
        let def = overconvergence_defect(&s, &conv)?;
        let back = include_pi_into_p(&def.witness, &conv)?;
        let tr = trace_series(&back);
        let w = back
            .difference_witness(&s)
            .or_else(|| tr.difference_witness(&s.scale_int(e)));
        if def.defect != 0 || w.is_some() {
            bad = Some(format!(
                "sample {i}: {} {}",
                def.summary(),
                w.unwrap_or_default()
            ));
            break;
        }
    }
    rep.check(
        "inclusions with base coefficients are traces up to the unit e",
        bad.is_none(),
        bad.unwrap_or_else(|| "10 samples pΨ_p·g: f = include(w), Tr(include w) = e·f".into()),
    );
    Ok(rep)
}

/// Random integral `δ_π` series: a unit constant term plus up to eight monomials
/// `q^n` (n < q) times jets of total degree `<= d` and order `<= r`.
pub fn random_pi_series<R: Rng + ?Sized>(
    ring: &Arc<JetRing>,
    rng: &mut R,
    q: i32,
    d: u32,
    r: usize,
) -> QJetSeries {
    let f = ring.field().clone();
    let mut terms = vec![(vec![0; ring.width()], f.random_unit(rng))];
    for _ in 0..8 {
        let mut k = vec![0; ring.width()];
        k[0] = rng.gen_range(0..q);
        let deg = rng.gen_range(0..=d);
        for _ in 0..deg {
            k[rng.gen_range(1..=r)] += 1;
        }
        terms.push((k, f.random_integral(rng)));
    }
    JetPoly::from_terms(ring, terms, Trunc::series(q, d)).with_order(r)
}

// ---- Ψ and ψ ----

/// `pΨ_p = π·include(Ψ_π)`, the trace identity, the character property and the defects.
pub fn psi_suite(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("psi");
    cfg.stamp(&mut rep);
    let f = cfg.field()?;
    let d = cfg.jet_deg.unwrap_or(3 * cfg.p);
    rep.param("D", d);
    let conv = Conversion::new(&f, 1, Trunc::jets(d))?;
    let psi = psi_characters(&f, d, &conv);
    rep.check_result(
        "pΨ_p = π·Ψ_π, Tr(Ψ_π) = ((p-1)/2)·pΨ_p, ψ(xy) = ψ(x) + ψ(y)",
        &psi,
        format!("exact at D={d}"),
    );
    let tr = f.trace(f.pi_inv());
    let half = f.from_frac(cfg.p as i64 - 1, 2);
    rep.check("Tr(1/π) = (p-1)/2", f.eq(&tr, &half), f.format(&tr));
    let Ok(psi) = psi else { return Ok(rep) };
    // the same series in the variable q
    let rq = series_ring(&f, Flavor::P, 1);
    let big_psi = log_series(&rq, d);
    let pd = overconvergence_defect(&big_psi, &conv)?;
    rep.check("defect(Ψ_p) = 0", pd.defect == 0, pd.summary());
    let sd = overconvergence_defect(&big_psi.scale_int(cfg.p as i64), &conv)?;
    rep.check("defect(pΨ_p) = 0", sd.defect == 0, sd.summary());
    let cd = overconvergence_defect(&psi.psi_p, &conv)?;
    rep.check("defect(ψ_p) finite", true, cd.summary());
    Ok(rep)
}

// ---- valuation bound and radius ----

/// Included random `δ_π` series of order `r`: defect 0, the coefficient bound, and
/// the final hull slope against `1/(p^{r-1}e) - 1/D`.
pub fn valuation_bound_suite(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("valuation-bound");
    cfg.stamp(&mut rep);
    let f = cfg.field()?;
    let (p, e, r) = (cfg.p as i64, f.e(), cfg.r);
    if r + 1 > e {
        return Err(Error::Hypothesis(format!(
            "the bound needs r <= e - 1 (r = {r}, e = {e})"
        )));
    }
    let d = cfg.jet_deg.unwrap_or(4 * cfg.p);
    let q = cfg.q_prec.unwrap_or(8);
    rep.param("r", r);
    rep.param("D", d);
    rep.param("Q", q);
    let conv = Conversion::new(&f, r, Trunc::jets(d))?;
    let pr = series_ring(&f, Flavor::Pi, r);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c0 = Ratio::new(1, p.pow(r as u32 - 1) * e as i64);
    let slack = c0 - Ratio::new(1, d as i64);
    let (mut worst_margin, mut worst_slope): (Option<Ratio<i64>>, Option<Ratio<i64>>) =
        (None, None);
    let mut bad = Vec::new();
    let samples = 12;
    for i in 0..samples {
        let h = random_pi_series(&pr, &mut rng, q, d, r);
        let s = include_pi_into_p(&h, &conv)?;
        let def = overconvergence_defect(&s, &conv)?;
        if def.defect != 0 {
            bad.push(format!("sample {i}: {}", def.summary()));
            continue;
        }
        let c = valuation_bound_check(&s, r, e);
        if let Some(m) = c.worst_margin {
            worst_margin = Some(worst_margin.map_or(m, |w| w.min(m)));
        }
        if !c.ok {
            bad.push(format!("sample {i}: {}", c.violations.join("; ")));
        }
        let est = radius_estimate(&s)?;
        worst_slope = Some(worst_slope.map_or(est.slope, |w| w.min(est.slope)));
        if est.slope < slack {
            bad.push(format!(
                "sample {i}: hull slope {} below {slack}",
                est.slope
            ));
        }
    }
    rep.check(
        format!("valuation bound and slope >= {c0} - 1/{d}"),
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{samples} series, worst margin {}, smallest final slope {}",
                worst_margin.map_or("-".into(), |m| m.to_string()),
                worst_slope.map_or("-".into(), |m| m.to_string())
            )
        } else {
            bad.join(" | ")
        },
    );
    Ok(rep)
}

/// `F = Σ a_n (δ_π^2 q)^n` with `a_n = p^{⌈√n⌉}` over `Z_p[√p]`: defect 0 while the
/// best slope `min_d m(d)/d` keeps falling with the jet-degree cap.
pub fn radius_counterexample(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("radius-counterexample");
    let p = cfg.p;
    rep.param("p", p);
    rep.param("pi", format!("eisenstein:-{p},0,1"));
    rep.param("K", cfg.precision);
    let f = Field::ramified(p, cfg.precision, EisensteinConfig::pure(p, 2)?)?;
    let dmax = 8 * p;
    let conv = Conversion::new(&f, 2, Trunc::jets(dmax))?;
    let u = conv
        .f(2)
        .terms()
        .values()
        .next()
        .cloned()
        .unwrap_or_else(|| f.zero());
    rep.check(
        "F_2 = u (δ_p q)^p with u a unit",
        f.val_units(&u) == Some(0),
        f.format(&u),
    );
    let isqrt_ceil = |n: u32| (1..).find(|k: &u32| k * k >= n).unwrap_or(1);
    let a = |n: u32| f.pow(&f.from_int(p as i64), isqrt_ceil(n) as u64);

    let pr = series_ring(&f, Flavor::Pi, 2);
    let z2 = q_monomial(&pr, 0, &[0, 1], f.one()).set_trunc(Trunc::jets(dmax));
    let mut g = JetPoly::zero(&pr).set_trunc(Trunc::jets(dmax));
    for n in 1..=8 {
        g = g.add(&z2.pow(n as u64).scale(&a(n)));
    }
    let g = g.with_order(2);
    let s = include_pi_into_p(&g, &conv)?;
    let rp = series_ring(&f, Flavor::P, 2);
    let y1 = q_monomial(&rp, 0, &[1, 0], f.one()).set_trunc(Trunc::jets(dmax));
    let y2 = q_monomial(&rp, 0, &[0, 1], f.one()).set_trunc(Trunc::jets(dmax));
    let lin = y2.scale_int(p as i64).add(&y1.pow(p as u64).scale(&u));
    let mut direct = JetPoly::zero(&rp).set_trunc(Trunc::jets(dmax));
    for n in 1..=8 {
        direct = direct.add(&lin.pow(n as u64).scale(&a(n)));
    }
    let w = s.difference_witness(&direct);
    rep.check(
        "include(Σ a_n z_2^n) = Σ a_n (p δ_p^2 q + u (δ_p q)^p)^n",
        w.is_none(),
        w.unwrap_or_default(),
    );
    let def = overconvergence_defect(&s, &conv)?;
    rep.check("defect 0", def.defect == 0, def.summary());

    let c0 = Ratio::new(1, (p * 2) as i64);
    let mut slopes = Vec::new();
    let mut hulls = Vec::new();
    for k in 1..=8 {
        let dk = k * p;
        let est = radius_estimate(&s.clone().truncate(Trunc::jets(dk)))?;
        slopes.push(
            est.best_slope(Ratio::from_integer(0))
                .unwrap_or_else(|| Ratio::from_integer(0)),
        );
        hulls.push(est.slope);
    }
    let monotone = slopes.windows(2).all(|w| w[1] <= w[0]);
    let show = |v: &[Ratio<i64>]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    rep.check(
        format!("best slope non-increasing over D = {p}..{}", 8 * p),
        monotone,
        format!(
            "min m(d)/d: [{}]; final hull slopes: [{}]",
            show(&slopes),
            show(&hulls)
        ),
    );
    let last = *slopes.last().expect("eight truncations");
    rep.check(
        format!("best slope at D = {} below {c0}", 8 * p),
        last < c0,
        format!("{last}"),
    );
    Ok(rep)
}

// ---- L^r_π ----

/// For `𝔾_m` and the p-typical law: both routes to `L^r_π` agree and are π-integral; reports `n(r)`.
pub fn pi_log_jets_suite(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("pi-log-jets");
    cfg.stamp(&mut rep);
    let f = cfg.field()?;
    let cutoff = cfg.jet_deg.unwrap_or(2 * cfg.p);
    let rmax = cfg.r.max(1);
    rep.param("cutoff", cutoff);
    rep.param("r", rmax);
    let conv = Conversion::new(&f, rmax, Trunc::total(cutoff))?;
    let groups = [
        ("G_m", FormalGroupData::multiplicative_group(&f, cutoff)),
        ("p-typical", FormalGroupData::hazewinkel(&f, cutoff)?),
    ];
    for (name, g) in groups {
        for r in 1..=rmax {
            let law = match jet_group_law(&g, r) {
                Ok(l) => l,
                Err(e) => {
                    rep.check(format!("{name} r={r}: jet group law"), false, e.to_string());
                    continue;
                }
            };
            match l_r_pi(&g, r, &law, &conv) {
                Ok(res) => {
                    rep.check(
                        format!("{name} r={r}: (p/π)L^r_p π-integral and equal to Σ φ^r(na_n)(π^(n-1)/n)G^n"),
                        true,
                        format!("{} terms at total degree <= {cutoff}", res.direct.len()),
                    );
                    rep.check(
                        format!("{name} r={r}: n(r) <= r"),
                        res.n_r as usize <= r,
                        format!("n({r}) = {}", res.n_r),
                    );
                }
                Err(e) => rep.check(format!("{name} r={r}: L^r_π"), false, e.to_string()),
            }
        }
    }
    Ok(rep)
}

// ---- conjugate operators ----

/// Closed forms at order one, integrality of the triangular solve at order two, and
/// finiteness of defects after applying `∂_j` to overconvergent series.
pub fn conjugate_suite(cfg: &SuiteConfig) -> Result<Report> {
    let mut rep = Report::new("conjugate");
    cfg.stamp(&mut rep);
    let f = cfg.field()?;
    let p = f.p() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let ring = JetRing::new(f.clone(), Flavor::P, &["x", "y"], 1);
    let x = JetPoly::var(&ring, 0, 0)?;
    let y = JetPoly::var(&ring, 1, 0)?;
    let der = Derivation {
        images: vec![y.clone(), x.mul(&y).add(&JetPoly::from_int(&ring, 3))],
    };
    let solved: Result<bool> = (|| {
        let mut same = true;
        for j in 0..=1 {
            let a = conjugate_generator_values(&ring, j, 1, &der, true)?;
            let b = conjugate_generator_values(&ring, j, 1, &der, false)?;
            same &= a
                .iter()
                .flatten()
                .zip(b.iter().flatten())
                .all(|(u, w)| u.equals(w));
        }
        Ok(same)
    })();
    rep.check(
        "order one: triangular solve matches the closed forms",
        matches!(solved, Ok(true)),
        match solved {
            Err(e) => e.to_string(),
            _ => String::new(),
        },
    );
    let mut bad = None;
    for i in 0..10 {
        let g = random_poly(&ring, &mut rng, 3, 3, 0);
        let dg = g
            .partial(0)
            .mul(&der.images[0])
            .add(&g.partial(1).mul(&der.images[1]));
        let run = || -> Result<Option<String>> {
            let g1 = g.clone().with_order(1);
            let dlt = g.prolong()?;
            if !conjugate_apply(1, &g1, &der)?.is_empty() {
                return Ok(Some("∂_1 f ≠ 0".into()));
            }
            if let Some(w) =
                conjugate_apply(1, &dlt, &der)?.difference_witness(&dg.frobenius_lift()?)
            {
                return Ok(Some(format!("∂_1 δf ≠ φ∂f: {w}")));
            }
            if let Some(w) = conjugate_apply(0, &g1, &der)?.difference_witness(&dg) {
                return Ok(Some(format!("∂_0 f ≠ ∂f: {w}")));
            }
            let want = g.pow(p - 1).mul(&dg).neg();
            if let Some(w) = conjugate_apply(0, &dlt, &der)?.difference_witness(&want) {
                return Ok(Some(format!("∂_0 δf ≠ -f^(p-1)∂f: {w}")));
            }
            Ok(None)
        };
        match run() {
            Ok(None) => {}
            Ok(Some(w)) => {
                bad = Some(format!("sample {i}: {w}"));
                break;
            }
            Err(e) => {
                bad = Some(format!("sample {i}: {e}"));
                break;
            }
        }
    }
    rep.check(
        "order one: ∂_1 f = 0, ∂_1 δf = φ∂f, ∂_0 δf = -f^(p-1)∂f",
        bad.is_none(),
        bad.unwrap_or_else(|| "10 random f in x, y".into()),
    );

    let ring2 = JetRing::new(f.clone(), Flavor::P, &["x"], 2);
    let der2 = Derivation::coordinate(&ring2, 0);
    let mut bad = None;
    for i in 0..20 {
        let g = random_poly(&ring2, &mut rng, 3, 3, 2);
        for j in 0..=2 {
            if let Err(e) = conjugate_apply(j, &g, &der2) {
                bad = Some(format!("input {i}, j = {j}: {e}"));
            }
        }
    }
    rep.check(
        "order two: ∂_0, ∂_1, ∂_2 integral",
        bad.is_none(),
        bad.unwrap_or_else(|| format!("20 random inputs at K={}", f.precision())),
    );

    // overconvergent samples: pΨ_p times random q-polynomials with base coefficients
    let d = 2 * cfg.p;
    let conv = Conversion::new(&f, 1, Trunc::jets(d))?;
    let rq = series_ring(&f, Flavor::P, 1);
    let theta = Derivation {
        images: vec![q_monomial(&rq, 1, &[], f.one())],
    };
    let ppsi = log_series(&rq, d).scale_int(cfg.p as i64);
    let mut details = Vec::new();
    let mut ok = true;
    for i in 0..5 {
        let mut terms = Vec::new();
        for n in 0..4 {
            let mut k = vec![0; rq.width()];
            k[0] = n;
            terms.push((k, f.random_base(&mut rng)));
        }
        let s = ppsi.mul(&JetPoly::from_terms(&rq, terms, Trunc::default()));
        let d0 = overconvergence_defect(&s, &conv)?.defect;
        let mut after = Vec::new();
        for j in 0..=1 {
            match conjugate_apply(j, &s, &theta).and_then(|t| overconvergence_defect(&t, &conv)) {
                Ok(r) => after.push(r.defect),
                Err(e) => {
                    ok = false;
                    details.push(format!("sample {i}, j = {j}: {e}"));
                }
            }
        }
        details.push(format!("{d0} -> {after:?}"));
        ok &= d0 == 0;
    }
    rep.check(
        "∂_j keeps defects finite (θ = q d/dq)",
        ok,
        format!("defects at D={d}: {}", details.join(", ")),
    );

    let pr = series_ring(&f, Flavor::Pi, 1);
    let mut bad = None;
    for i in 0..5 {
        let h = random_pi_series(&pr, &mut rng, 6, d, 1);
        let s = include_pi_into_p(&h, &conv)?;
        for j in 0..=1 {
            match conjugate_apply(j, &s, &theta).and_then(|t| overconvergence_defect(&t, &conv)) {
                Ok(r) if r.defect == 0 => {}
                Ok(r) => bad = Some(format!("sample {i}, j = {j}: {}", r.summary())),
                Err(e) => bad = Some(format!("sample {i}, j = {j}: {e}")),
            }
        }
    }
    rep.check(
        "order one: ∂_0, ∂_1 preserve the π-jet image",
        bad.is_none(),
        bad.unwrap_or_else(|| "5 included δ_π series, defect 0 after ∂_0 and ∂_1".into()),
    );
    Ok(rep)
}

// ---- Hecke identities and the order-one pipeline ----

/// `T_{2,Np}(p)f = f`, `T_{2,N}(p)f ≡ f mod p`, `T_{2,N}(n)f = a_n f` for `(n, p) = 1`, `n <= 12`.
pub fn hecke_identities(h: &HeckeSystem) -> Report {
    let mut rep = Report::new("hecke-identities");
    rep.param("p", h.p);
    rep.param("N", h.level);
    rep.param("Q", h.q_max());
    let (p, n_level) = (h.p, h.level);
    rep.check_result("relations", &h.verify(), "a_1..a_Q consistent");
    let t = hecke_t_coeffs(2, n_level * p, p, &h.a);
    let bad = (0..t.len()).find(|&m| t[m] != h.a[m]);
    rep.check(
        "T_{2,Np}(p) f = f",
        bad.is_none(),
        bad.map_or(format!("q^0..q^{}", t.len() - 1), |m| format!("q^{m}")),
    );
    let t = hecke_t_coeffs(2, n_level, p, &h.a);
    let pb = BigInt::from(p);
    let bad = (0..t.len()).find(|&m| (&t[m] - &h.a[m]) % &pb != BigInt::from(0));
    rep.check(
        "T_{2,N}(p) f ≡ f mod p",
        bad.is_none(),
        bad.map_or(format!("q^0..q^{}", t.len() - 1), |m| format!("q^{m}")),
    );
    let mut bad = None;
    for n in (1..=12u64).filter(|n| n % p != 0) {
        let t = hecke_t_coeffs(2, n_level, n, &h.a);
        if let Some(m) = (0..t.len()).find(|&m| t[m] != &h.a[m] * &h.a[n as usize]) {
            bad = Some(format!("n = {n}: q^{m}"));
            break;
        }
    }
    rep.check(
        "T_{2,N}(n) f = a_n f for (n,p) = 1, n <= 12",
        bad.is_none(),
        bad.unwrap_or_default(),
    );
    rep
}

/// The chained checks behind the order-one congruences; `stages` stops early
/// (1: expansion, 2: mod-π congruence, 3: τ closed form, 4: mod-p congruence, 5: defect).
pub fn order_one_pipeline(
    name: &str,
    h: &HeckeSystem,
    cfg: &SuiteConfig,
    stages: u32,
) -> Result<Report> {
    let mut rep = Report::new(name);
    cfg.stamp(&mut rep);
    rep.param("N", h.level);
    let p = h.p as u32;
    let t = SeriesTruncation::new(
        cfg.q_prec.unwrap_or((p * p + 5 * p) as i32),
        cfg.jet_deg.unwrap_or(p + 1),
    );
    rep.param("Q", t.q_prec);
    rep.param("D", t.jet_deg);
    let f = cfg.field()?;
    let conv = Conversion::new(&f, 1, Trunc::jets(t.jet_deg))?;
    let stamp = format!("Q={} D={} K={}", t.q_prec, t.jet_deg, f.precision());
    let sharp = expansion_fsharp_pi(h, &conv, &t);
    rep.check_result(
        "E(f♯_π) integral; (φ-p)/π, binomial and δ_p forms agree",
        &sharp,
        stamp.clone(),
    );
    let Ok(sharp) = sharp else { return Ok(rep) };
    if stages >= 2 {
        rep.check_result(
            "E(f♯_π) ≡ closed form mod π",
            &congruence_mod_pi(h, &sharp),
            stamp.clone(),
        );
    }
    if stages >= 3 {
        let tau = expansion_tau_and_fsharp_p(h, &sharp, &conv);
        let Ok(tau) = tau else {
            rep.check_result("trace series", &tau, "");
            return Ok(rep);
        };
        let w = tau.tau.difference_witness(&tau.closed_form);
        rep.check(
            "τ E(f♯_π) = ((p-1)/2)[Σ(a_n/n)(q^p+pδq)^n - pΣ(a_n/n)q^n]",
            tau.tau_matches,
            w.unwrap_or(stamp.clone()),
        );
        rep.check(
            "τ E(f♯_π) ≡ 0 mod p",
            tau.tau_divisible_by_p.is_none(),
            tau.tau_divisible_by_p.clone().unwrap_or(stamp.clone()),
        );
        if stages >= 4 {
            rep.check(
                "E(f♯_p) ≡ f^(-1) - (Σ a_n q^{np}) δ_p q/q^p mod p",
                tau.mod_p_congruence.is_none(),
                tau.mod_p_congruence.clone().unwrap_or(stamp.clone()),
            );
        }
        if stages >= 5 {
            rep.check(
                "defect(E(f♯_p)) = 0",
                tau.defect.defect == 0,
                tau.defect.summary(),
            );
            let scaled = overconvergence_defect(&tau.fsharp_p.scale_int(p as i64), &conv)?;
            rep.check(
                "defect(p·E(f♯_p)) = 0",
                scaled.defect == 0,
                scaled.summary(),
            );
        }
    }
    Ok(rep)
}

/// Synthetic split systems for each `(p, N)`, skipping `N` divisible by `p`.
pub fn split_systems(
    cells: &[(u32, u64)],
    per_cell: usize,
    seed: u64,
) -> Result<BTreeMap<(u32, u64), Vec<HeckeSystem>>> {
    let mut out = BTreeMap::new();
    for &(p, n) in cells {
        if n % p as u64 == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((p as u64) << 32) ^ n);
        let q = (p * p + 5 * p) as usize;
        let v = (0..per_cell)
            .map(|_| random_split_system(n, p as u64, q, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        out.insert((p, n), v);
    }
    Ok(out)
}

// ---- unit root of E_{p-1} ----

/// `ε^{p-1} = E_{p-1}`, `ε ≡ 1`, `E_{p-1} ≡ 1 mod p`, and uniqueness from perturbed starts.
pub fn unit_root_suite(primes: &[u32], q: i32, k: u32, seed: u64) -> Result<Report> {
    let mut rep = Report::new("unit-root");
    rep.param("Q", q);
    rep.param("K", k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &p in primes {
        let f = Field::zp(p, k)?;
        let e = eisenstein_ep1(&f, q)?;
        rep.check(
            format!("p={p}: E_{} ≡ 1 mod p", p - 1),
            congruent_to_one(&e),
            "",
        );
        let eps = unit_root(&e, (p - 1) as u64);
        rep.check_result(format!("p={p}: Hensel iteration converges"), &eps, "");
        let Ok(eps) = eps else { continue };
        let pw = eps.pow((p - 1) as u64);
        let w = pw.difference_witness(&e);
        rep.check(
            format!("p={p}: ε^{} = E_{}", p - 1, p - 1),
            w.is_none(),
            w.unwrap_or_else(|| format!("Q={q} K={k}")),
        );
        rep.check(format!("p={p}: ε ≡ 1 mod p"), congruent_to_one(&eps), "");
        let mut same = true;
        let mut not_root = true;
        for _ in 0..3 {
            let n = rng.gen_range(1..q);
            let c = f.mul_int(&f.random_integral(&mut rng), p as i64);
            let bump = q_series_term(&e, n, c);
            let start = eps.add(&bump);
            match unit_root_from(&e, (p - 1) as u64, &start) {
                Ok(r) => same &= r.equals(&eps),
                Err(_) => same = false,
            }
            if !bump.is_empty() {
                not_root &= !start.pow((p - 1) as u64).equals(&e);
            }
        }
        rep.check(
            format!("p={p}: perturbed starts return ε; perturbed ε is not a root"),
            same && not_root,
            "3 perturbations by p·c·q^n",
        );
    }
    Ok(rep)
}

fn q_series_term(like: &QJetSeries, n: i32, c: crate::base_rings::Elem) -> QJetSeries {
    let mut k = vec![0; like.ring().width()];
    k[0] = n;
    JetPoly::monomial(like.ring(), k, c).set_trunc(like.trunc())
}

// ---- trace nondegeneracy ----

/// `det(Tr(π^{i+j})) ≠ 0` and the random-slice injectivity probe.
pub fn gram_suite(fields: &[(String, Arc<Field>)], seed: u64) -> Report {
    let mut rep = Report::new("gram");
    rep.param("seed", seed);
    for (name, f) in fields {
        match f.gram_determinant() {
            Ok(d) => rep.check(
                format!("{name}: det(Tr(π^(i+j))) ≠ 0"),
                true,
                format!("{} at K={}", f.format(&d), f.precision()),
            ),
            Err(e) => rep.check(
                format!("{name}: det(Tr(π^(i+j))) ≠ 0"),
                false,
                e.to_string(),
            ),
        }
        let probe = trace_injectivity_probe(f, 1, 50, 30, seed);
        rep.check(
            format!("{name}: no kernel in a random 50-dimensional slice"),
            probe.injective() && probe.source_rank == probe.samples,
            format!(
                "source rank {}, trace-vector rank {}",
                probe.source_rank, probe.image_rank
            ),
        );
    }
    rep
}

/// The extensions of the acceptance matrix at precision `k`.
pub fn configured_extensions(k: u32) -> Result<Vec<(String, Arc<Field>)>> {
    let unr = PadicConfig::unramified(5, k, 2, None)?;
    Ok(vec![
        (
            "Z_5[1-ζ_5]".into(),
            Field::ramified(5, k, EisensteinConfig::cyclotomic(5))?,
        ),
        (
            "Z_7[1-ζ_7]".into(),
            Field::ramified(7, k, EisensteinConfig::cyclotomic(7))?,
        ),
        (
            "Z_5[√5]".into(),
            Field::ramified(5, k, EisensteinConfig::pure(5, 2)?)?,
        ),
        (
            "Z_7[7^(1/3)]".into(),
            Field::ramified(7, k, EisensteinConfig::pure(7, 3)?)?,
        ),
        (
            "W(F_25)[√5]".into(),
            Field::new(&unr, Some(EisensteinConfig::pure(5, 2)?))?,
        ),
    ])
}
