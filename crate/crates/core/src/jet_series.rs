//! Truncated q-expansions with jet variables: `R((q))[δq, ..., δ^r q]^` cut
//! off at `q^Q`, jet degree `D` and the coefficient precision.
//!
//! A series is a [`JetPoly`] over a ring whose only variable is `q`.

use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::Ratio;

use crate::base_rings::{Elem, Field};
use crate::delta_calculus::{jet_degree, Conversion, Flavor, JetPoly, JetRing, Trunc};
use crate::error::{Error, Result};

pub type QJetSeries = JetPoly;

/// Truncation shape of a q-jet series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesTruncation {
    /// Lowest q-exponent accepted when reading series.
    pub q_min: i32,
    /// Exponents `< q_prec` are kept.
    pub q_prec: i32,
    /// Total jet-degree cap.
    pub jet_deg: u32,
}

impl SeriesTruncation {
    pub fn new(q_prec: i32, jet_deg: u32) -> Self {
        SeriesTruncation {
            q_min: -(i32::MAX / 2),
            q_prec,
            jet_deg,
        }
    }
    pub fn trunc(&self) -> Trunc {
        Trunc::series(self.q_prec, self.jet_deg)
    }
}

/// The ring `R[q, δq, ..., δ^r q]` in the given flavor.
pub fn series_ring(field: &Arc<Field>, flavor: Flavor, r: usize) -> Arc<JetRing> {
    JetRing::new(field.clone(), flavor, &["q"], r)
}

/// `Σ c_n q^n` truncated at `t`.
pub fn q_series(ring: &Arc<JetRing>, coeffs: &[(i32, Elem)], t: Trunc) -> QJetSeries {
    let terms = coeffs.iter().map(|(n, c)| {
        let mut k = vec![0; ring.width()];
        k[0] = *n;
        (k, c.clone())
    });
    JetPoly::from_terms(ring, terms.collect::<Vec<_>>(), t)
}

/// `q^n (δq)^{β_1} ... (δ^r q)^{β_r}` with coefficient `c`.
pub fn q_monomial(ring: &Arc<JetRing>, n: i32, beta: &[i32], c: Elem) -> QJetSeries {
    let mut k = vec![0; ring.width()];
    k[0] = n;
    for (j, &b) in beta.iter().enumerate() {
        k[j + 1] = b;
    }
    JetPoly::monomial(ring, k, c)
}

/// φ on a series: `q ↦ q^p + ℓ δq`, `δ^j q ↦ (δ^j q)^p + ℓ δ^{j+1} q`, coefficients by Frobenius.
pub fn phi_on_series(s: &QJetSeries) -> Result<QJetSeries> {
    s.frobenius_lift()
}

/// The inclusion of `δ_π` series into `δ_p` series over `R_π`.
pub fn include_pi_into_p(s: &QJetSeries, conv: &Conversion) -> Result<QJetSeries> {
    conv.pi_to_p(s)
}

/// Coefficientwise trace `R_π -> R_p`.
pub fn trace_series(s: &QJetSeries) -> QJetSeries {
    let f = s.field().clone();
    s.map_coeffs(|c| f.trace(c))
}

/// The vector `(τ(s), τ(π s), ..., τ(π^{e-1} s))`.
pub fn trace_vector(s: &QJetSeries) -> Vec<QJetSeries> {
    let f = s.field().clone();
    (0..f.e())
        .map(|i| trace_series(&s.scale(&f.pi_pow(i as i64))))
        .collect()
}

/// Result of testing a `δ_p` series for `δ_π`-overconvergence at a finite truncation.
#[derive(Clone, Debug)]
pub struct OverconvergenceReport {
    /// Smallest `ν >= 0` with `p^ν` times the rewritten series integral.
    pub defect: u32,
    /// Minimum coefficient valuation of the rewritten series (`None` if it is zero).
    pub min_valuation: Option<Ratio<i64>>,
    /// The series in `δ_π` jets.
    pub witness: QJetSeries,
    /// `(Q, D, K)` at which the verdict was reached.
    pub stamp: (Option<i32>, Option<u32>, u32),
}

impl OverconvergenceReport {
    pub fn summary(&self) -> String {
        let m = match self.min_valuation {
            Some(v) => format!("{v}"),
            None => "inf".into(),
        };
        let (q, d, k) = self.stamp;
        let show = |x: Option<String>| x.unwrap_or_else(|| "-".into());
        format!(
            "defect {} (min valuation {m}) at Q={} D={} K={k}",
            self.defect,
            show(q.map(|v| v.to_string())),
            show(d.map(|v| v.to_string()))
        )
    }
}

/// Rewrites `s` in `δ_π` coordinates and reads off the defect.
pub fn overconvergence_defect(s: &QJetSeries, conv: &Conversion) -> Result<OverconvergenceReport> {
    if s.flavor() != Flavor::P {
        return Err(Error::Config(
            "overconvergence is tested on δ_p series".into(),
        ));
    }
    let f = s.field().clone();
    let witness = conv.p_to_pi(s)?;
    let e = f.e() as i64;
    let mu = witness.min_val_units();
    if let (Some(m), Some(l)) = (mu, witness.trunc().loss) {
        if m < 0 && m >= l {
            return Err(Error::PrecisionExhausted(format!(
                "minimal valuation {} lies above the cancellation bound {}; raise the precision",
                Ratio::new(m, e),
                Ratio::new(l, e)
            )));
        }
    }
    let defect = match mu {
        Some(m) if m < 0 => ((-m) + e - 1) / e,
        _ => 0,
    };
    let t = s.trunc();
    Ok(OverconvergenceReport {
        defect: defect as u32,
        min_valuation: mu.map(|m| Ratio::new(m, e)),
        witness,
        stamp: (t.q, t.jet_deg, f.precision()),
    })
}

/// Lower-hull data of `d ↦ min{v(a_{n,β}) : |β| = d}`.
#[derive(Clone, Debug)]
pub struct RadiusEstimate {
    /// `(d, m(d))` for every jet degree in the support.
    pub points: Vec<(i64, Ratio<i64>)>,
    /// Vertices of the lower convex hull.
    pub hull: Vec<(i64, Ratio<i64>)>,
    /// Slope of the last hull segment (zero when there is a single point).
    pub slope: Ratio<i64>,
    /// Smallest `C'` with `m(d) >= slope·d - C'` for all `d`.
    pub intercept: Ratio<i64>,
}

impl RadiusEstimate {
    /// Largest `C` with `m(d) >= C d - c` for every `d >= 1` in the support.
    pub fn best_slope(&self, c: Ratio<i64>) -> Option<Ratio<i64>> {
        self.points
            .iter()
            .filter(|(d, _)| *d >= 1)
            .map(|(d, m)| (*m + c) / Ratio::from_integer(*d))
            .min()
    }
}

/// Valuation profile by total jet degree, its lower hull and final slope.
pub fn radius_estimate(s: &QJetSeries) -> Result<RadiusEstimate> {
    let f = s.field().clone();
    let nv = s.ring().nvars();
    let e = f.e() as i64;
    let mut by_deg: std::collections::BTreeMap<i64, i64> = std::collections::BTreeMap::new();
    for (k, c) in s.terms() {
        let Some(v) = f.val_units(c) else { continue };
        let d = jet_degree(k, nv);
        let slot = by_deg.entry(d).or_insert(v);
        *slot = (*slot).min(v);
    }
    if by_deg.is_empty() {
        return Err(Error::Config("radius estimate of a zero series".into()));
    }
    let points: Vec<(i64, Ratio<i64>)> = by_deg
        .into_iter()
        .map(|(d, v)| (d, Ratio::new(v, e)))
        .collect();
    let hull = lower_hull(&points);
    let (dl, ml) = *points.last().expect("nonempty");
    let slope = points
        .iter()
        .filter(|(d, _)| *d < dl)
        .map(|(d, m)| (ml - m) / Ratio::from_integer(dl - d))
        .max()
        .unwrap_or_else(|| Ratio::from_integer(0));
    let intercept = points
        .iter()
        .map(|(d, m)| slope * Ratio::from_integer(*d) - m)
        .max()
        .expect("nonempty");
    Ok(RadiusEstimate {
        points,
        hull,
        slope,
        intercept,
    })
}

fn lower_hull(points: &[(i64, Ratio<i64>)]) -> Vec<(i64, Ratio<i64>)> {
    let mut hull: Vec<(i64, Ratio<i64>)> = Vec::new();
    for &pt in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b if it lies on or above the segment a -> pt
            let lhs = (b.1 - a.1) * Ratio::from_integer(pt.0 - a.0);
            let rhs = (pt.1 - a.1) * Ratio::from_integer(b.0 - a.0);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    hull
}

/// Outcome of scanning coefficients against `v(a) >= (1/e)(|β|/p^{r-1} - 1)`.
#[derive(Clone, Debug)]
pub struct ValuationBoundReport {
    pub ok: bool,
    /// Smallest `v(a) - bound` over the support (`None` for an empty series).
    pub worst_margin: Option<Ratio<i64>>,
    pub violations: Vec<String>,
}

/// Checks the valuation bound for order-`r` series over a ring of ramification `e`.
pub fn valuation_bound_check(s: &QJetSeries, r: usize, e: usize) -> ValuationBoundReport {
    let f = s.field().clone();
    let nv = s.ring().nvars();
    let p = f.p() as i64;
    let scale = Ratio::new(1, e as i64);
    let pr = p.pow(r.saturating_sub(1) as u32);
    let mut worst: Option<Ratio<i64>> = None;
    let mut violations = Vec::new();
    for (k, c) in s.terms() {
        let Some(v) = f.valuation(c) else { continue };
        let d = jet_degree(k, nv);
        let bound = scale * (Ratio::new(d, pr) - Ratio::from_integer(1));
        let margin = v - bound;
        worst = Some(worst.map_or(margin, |w: Ratio<i64>| w.min(margin)));
        if margin < Ratio::from_integer(0) {
            violations.push(format!(
                "{}: valuation {v} below {bound}",
                s.ring_monomial_name(k)
            ));
        }
    }
    ValuationBoundReport {
        ok: violations.is_empty(),
        worst_margin: worst,
        violations,
    }
}

/// Line-oriented dump: `n beta_1 .. beta_r : <digits>`, sorted by `(|β|, n, β)`.
pub fn dump(s: &QJetSeries) -> String {
    let f = s.field().clone();
    let r = s.ring().max_order();
    let mut rows: Vec<(i64, i32, Vec<i32>, String)> = s
        .terms()
        .iter()
        .map(|(k, c)| {
            let beta = k[1..=r].to_vec();
            (jet_degree(k, 1), k[0], beta, f.format(c))
        })
        .collect();
    rows.sort();
    let mut out = String::new();
    let t = s.trunc();
    let _ = writeln!(
        out,
        "# r={r} Q={} D={}",
        t.q.map_or("-".into(), |v| v.to_string()),
        t.jet_deg.map_or("-".into(), |v| v.to_string())
    );
    for (_, n, beta, c) in rows {
        let _ = write!(out, "{n}");
        for b in beta {
            let _ = write!(out, " {b}");
        }
        let _ = writeln!(out, " : {c}");
    }
    out
}

/// Reads a [`dump`] back. Lines starting with `#` may carry `Q=` and `D=` fields.
pub fn parse_dump(ring: &Arc<JetRing>, text: &str, q_min: i32) -> Result<QJetSeries> {
    let f = ring.field().clone();
    let r = ring.max_order();
    let mut t = Trunc::default();
    let mut terms = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        let bad = |msg: &str| Error::Malformed {
            line: i + 1,
            msg: msg.to_string(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for field in rest.split_whitespace() {
                if let Some(v) = field.strip_prefix("Q=") {
                    t.q = v.parse().ok();
                } else if let Some(v) = field.strip_prefix("D=") {
                    t.jet_deg = v.parse().ok();
                }
            }
            continue;
        }
        let (lhs, rhs) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
        let nums: Vec<i32> = lhs
            .split_whitespace()
            .map(|w| w.parse::<i32>().map_err(|_| bad("bad exponent")))
            .collect::<Result<_>>()?;
        if nums.len() != r + 1 {
            return Err(bad(&format!(
                "expected {} exponents, found {}",
                r + 1,
                nums.len()
            )));
        }
        if nums[0] < q_min {
            return Err(bad("q-exponent below the allowed minimum"));
        }
        if nums[1..].iter().any(|&b| b < 0) {
            return Err(bad("negative jet exponent"));
        }
        let c = f.parse(rhs).map_err(|e| bad(&e.to_string()))?;
        let mut k = vec![0; ring.width()];
        k[..=r].copy_from_slice(&nums);
        terms.push((k, c));
    }
    Ok(JetPoly::from_terms(ring, terms, t).with_order(r))
}

/// `Σ_{n=1}^{D} (-1)^{n-1} (ℓ^{n-1}/n) (δq/q^p)^n` with `ℓ = p` or `π` by flavor:
/// the `(1/ℓ) log(φ(q)/q^p)` series cut at jet degree `D`.
pub fn log_series(ring: &Arc<JetRing>, d: u32) -> QJetSeries {
    let f = ring.field().clone();
    let p = f.p() as i32;
    let ell = ring.ell();
    let mut terms = Vec::new();
    for n in 1..=d as i64 {
        let sign = if n % 2 == 1 { 1 } else { -1 };
        let c = f.mul(&f.pow(&ell, (n - 1) as u64), &f.from_frac(sign, n));
        let mut k = vec![0; ring.width()];
        k[0] = -p * n as i32;
        k[1] = n as i32;
        terms.push((k, c));
    }
    JetPoly::from_terms(ring, terms, Trunc::jets(d)).with_order(1)
}

/// Ranks of a family of series over `R_π` and of its trace vectors, both as
/// `Q_p`-vector spaces at working precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InjectivityProbe {
    pub samples: usize,
    pub source_rank: usize,
    pub image_rank: usize,
}

impl InjectivityProbe {
    /// True when no combination of the samples has a vanishing trace vector.
    pub fn injective(&self) -> bool {
        self.source_rank == self.image_rank
    }
}

/// `Q_p`-coordinates of a series, scaled by `p^shift`: for each monomial in `keys`
/// the digits of the coefficient (basis `t^j π^i`).
fn coordinates(s: &QJetSeries, keys: &[Vec<i32>], shift: i64) -> Vec<BigInt> {
    let f = s.field();
    let mut row = Vec::new();
    for k in keys {
        match s.coeff(k) {
            Some(c) if !c.is_zero() => {
                let sc = shift - c.shift();
                assert!(sc >= 0, "coordinate scaling too small");
                let m = f.p_big().pow(sc as u32);
                row.extend(c.digits().iter().map(|d| d * &m));
            }
            _ => row.extend(std::iter::repeat_n(BigInt::from(0), f.e() * f.f())),
        }
    }
    row
}

/// Rank over `Z_p` of an integer matrix modulo `p^k` (pivots of valuation `< k`).
pub fn padic_rank(mut rows: Vec<Vec<BigInt>>, p: &BigInt, k: u32) -> usize {
    use num_integer::Integer;
    let m = p.pow(k);
    let val = |x: &BigInt| -> u32 {
        let mut x = x.mod_floor(&m);
        if x == BigInt::from(0) {
            return k;
        }
        let mut v = 0;
        while (&x % p) == BigInt::from(0) {
            x /= p;
            v += 1;
        }
        v
    };
    let mut rank = 0;
    while !rows.is_empty() {
        let mut best: Option<(u32, usize, usize)> = None;
        for (i, r) in rows.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                let v = val(x);
                if v < k && best.is_none_or(|b| v < b.0) {
                    best = Some((v, i, j));
                }
            }
        }
        let Some((v, i, j)) = best else { break };
        let piv = rows.swap_remove(i);
        let pv = p.pow(v);
        let unit = (&piv[j] / &pv).mod_floor(&m);
        let uinv = crate::base_rings::mod_inverse(&unit, &m);
        for r in rows.iter_mut() {
            let factor = ((&r[j] / &pv) * &uinv).mod_floor(&m);
            for (x, y) in r.iter_mut().zip(&piv) {
                *x = (&*x - &factor * y).mod_floor(&m);
            }
        }
        rank += 1;
    }
    rank
}

/// Compares the rank of `samples` random integral series (supported on `q^0..q^{n-1}`
/// times jets of degree `<= 1` in a ring of order `r`) with the rank of their trace vectors.
pub fn trace_injectivity_probe(
    field: &Arc<Field>,
    r: usize,
    samples: usize,
    n: i32,
    seed: u64,
) -> InjectivityProbe {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ring = series_ring(field, Flavor::P, r);
    let mut keys = Vec::new();
    for q in 0..n {
        for j in 0..=r {
            let mut k = vec![0; ring.width()];
            k[0] = q;
            if j > 0 {
                k[j] = 1;
            }
            keys.push(k);
        }
    }
    let series: Vec<QJetSeries> = (0..samples)
        .map(|_| {
            let mut terms = Vec::new();
            for k in &keys {
                if rng.gen_bool(0.5) {
                    terms.push((k.clone(), field.random_integral(&mut rng)));
                }
            }
            JetPoly::from_terms(&ring, terms, Trunc::default())
        })
        .collect();
    let k = field.precision();
    let src: Vec<Vec<BigInt>> = series.iter().map(|s| coordinates(s, &keys, 0)).collect();
    let img: Vec<Vec<BigInt>> = series
        .iter()
        .map(|s| {
            trace_vector(s)
                .iter()
                .flat_map(|t| coordinates(t, &keys, 0))
                .collect()
        })
        .collect();
    InjectivityProbe {
        samples,
        source_rank: padic_rank(src, field.p_big(), k),
        image_rank: padic_rank(img, field.p_big(), k),
    }
}
