//! Jet polynomials and the prolongation engine.
//!
//! A [`JetRing`] is the free ring over a [`Field`] on variables `v` and their
//! jets `δ^j v` (`1 <= j <= max_order`), in either the `δ_p` or the `δ_π`
//! flavor. [`JetPoly`] is a sparse Laurent polynomial in those generators
//! with an optional [`Trunc`] (q-adic, jet-degree, total-degree and absolute
//! p-adic caps). The q-series of the jet_series module are jet polynomials in
//! the single variable `q`.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;

use crate::base_rings::{Elem, Field, ZERO_CAP};
use crate::error::{Error, Result};

/// Which p-derivation the jets are taken with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// `δ_p`, with `φ(x) = x^p + p δ_p x`.
    P,
    /// `δ_π`, with `φ(x) = x^p + π δ_π x`.
    Pi,
}

/// Variables, flavor, coefficient ring and the largest allowed jet order.
#[derive(Debug)]
pub struct JetRing {
    field: Arc<Field>,
    flavor: Flavor,
    vars: Vec<String>,
    max_order: usize,
}

impl JetRing {
    pub fn new(field: Arc<Field>, flavor: Flavor, vars: &[&str], max_order: usize) -> Arc<JetRing> {
        assert!(!vars.is_empty(), "a jet ring needs at least one variable");
        Arc::new(JetRing {
            field,
            flavor,
            vars: vars.iter().map(|s| s.to_string()).collect(),
            max_order,
        })
    }

    /// Same variables and coefficients, other flavor.
    pub fn with_flavor(&self, flavor: Flavor) -> Arc<JetRing> {
        Arc::new(JetRing {
            field: self.field.clone(),
            flavor,
            vars: self.vars.clone(),
            max_order: self.max_order,
        })
    }

    pub fn with_max_order(&self, max_order: usize) -> Arc<JetRing> {
        Arc::new(JetRing {
            field: self.field.clone(),
            flavor: self.flavor,
            vars: self.vars.clone(),
            max_order,
        })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn flavor(&self) -> Flavor {
        self.flavor
    }
    pub fn vars(&self) -> &[String] {
        &self.vars
    }
    pub fn nvars(&self) -> usize {
        self.vars.len()
    }
    pub fn max_order(&self) -> usize {
        self.max_order
    }
    pub fn width(&self) -> usize {
        self.vars.len() * (self.max_order + 1)
    }
    /// Key position of `δ^j v`.
    pub fn slot(&self, v: usize, j: usize) -> usize {
        j * self.vars.len() + v
    }
    /// `(v, j)` of a key position.
    pub fn slot_var(&self, slot: usize) -> (usize, usize) {
        (slot % self.vars.len(), slot / self.vars.len())
    }

    /// `p` or `π`, according to the flavor.
    pub fn ell(&self) -> Elem {
        match self.flavor {
            Flavor::P => self.field.from_int(self.field.p() as i64),
            Flavor::Pi => self.field.pi(),
        }
    }

    /// Valuation of [`JetRing::ell`] in units of `1/e`.
    pub fn ell_units(&self) -> i64 {
        match self.flavor {
            Flavor::P => self.field.e() as i64,
            Flavor::Pi => 1,
        }
    }

    fn compatible(&self, other: &JetRing) -> bool {
        Arc::ptr_eq(&self.field, &other.field)
            && self.flavor == other.flavor
            && self.vars == other.vars
            && self.max_order == other.max_order
    }

    fn slot_name(&self, slot: usize) -> String {
        let (v, j) = self.slot_var(slot);
        match j {
            0 => self.vars[v].clone(),
            1 => format!("d{}", self.vars[v]),
            _ => format!("d{}{}", j, self.vars[v]),
        }
    }
}

/// Truncation caps. `None` means no cap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Trunc {
    /// Exponents of the first variable (at order 0) are kept only below this bound.
    pub q: Option<i32>,
    /// Largest kept total degree in the jets of order >= 1.
    pub jet_deg: Option<u32>,
    /// Largest kept total degree in all generators.
    pub total_deg: Option<u32>,
    /// Coefficients are known modulo `π^floor`, i.e. `p^(floor/e)`.
    pub floor: Option<i64>,
    /// Contributions of valuation at least this (units of `1/e`) may have been lost
    /// when coefficients cancelled to zero at finite precision. Never used to drop terms.
    pub loss: Option<i64>,
}

fn omin<T: Ord>(a: Option<T>, b: Option<T>) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Trunc {
    pub fn exact() -> Trunc {
        Trunc::default()
    }
    pub fn jets(d: u32) -> Trunc {
        Trunc {
            jet_deg: Some(d),
            ..Trunc::default()
        }
    }
    pub fn series(q: i32, d: u32) -> Trunc {
        Trunc {
            q: Some(q),
            jet_deg: Some(d),
            ..Trunc::default()
        }
    }
    pub fn total(d: u32) -> Trunc {
        Trunc {
            total_deg: Some(d),
            ..Trunc::default()
        }
    }

    /// Componentwise minimum.
    pub fn meet(&self, o: &Trunc) -> Trunc {
        Trunc {
            q: omin(self.q, o.q),
            jet_deg: omin(self.jet_deg, o.jet_deg),
            total_deg: omin(self.total_deg, o.total_deg),
            floor: omin(self.floor, o.floor),
            loss: omin(self.loss, o.loss),
        }
    }

    /// The degree caps only (what is safe to apply while building intermediate products).
    pub fn degree_caps(&self) -> Trunc {
        Trunc {
            jet_deg: self.jet_deg,
            total_deg: self.total_deg,
            ..Trunc::default()
        }
    }

    fn keeps(&self, key: &[i32], nv: usize) -> bool {
        if let Some(q) = self.q {
            if key[0] >= q {
                return false;
            }
        }
        if let Some(d) = self.jet_deg {
            if jet_degree(key, nv) > d as i64 {
                return false;
            }
        }
        if let Some(d) = self.total_deg {
            if total_degree(key) > d as i64 {
                return false;
            }
        }
        true
    }
}

pub fn jet_degree(key: &[i32], nv: usize) -> i64 {
    key[nv..].iter().map(|&e| e as i64).sum()
}

pub fn total_degree(key: &[i32]) -> i64 {
    key.iter().map(|&e| e as i64).sum()
}

/// Sparse Laurent polynomial in the generators of a [`JetRing`].
#[derive(Clone, Debug)]
pub struct JetPoly {
    ring: Arc<JetRing>,
    order: usize,
    terms: BTreeMap<Vec<i32>, Elem>,
    trunc: Trunc,
}

const INVERSE_STEPS: usize = 4096;

impl JetPoly {
    pub fn zero(ring: &Arc<JetRing>) -> JetPoly {
        JetPoly {
            ring: ring.clone(),
            order: 0,
            terms: BTreeMap::new(),
            trunc: Trunc::default(),
        }
    }

    pub fn constant(ring: &Arc<JetRing>, c: Elem) -> JetPoly {
        JetPoly::monomial(ring, vec![0; ring.width()], c)
    }

    pub fn from_int(ring: &Arc<JetRing>, n: i64) -> JetPoly {
        JetPoly::constant(ring, ring.field.from_int(n))
    }

    pub fn one(ring: &Arc<JetRing>) -> JetPoly {
        JetPoly::from_int(ring, 1)
    }

    /// The generator `δ^j v`.
    pub fn var(ring: &Arc<JetRing>, v: usize, j: usize) -> Result<JetPoly> {
        if j > ring.max_order {
            return Err(Error::OrderOverflow {
                needed: j,
                max: ring.max_order,
            });
        }
        let mut key = vec![0; ring.width()];
        key[ring.slot(v, j)] = 1;
        Ok(JetPoly::monomial(ring, key, ring.field.one()))
    }

    /// The generator `δ^j v` looked up by name.
    pub fn named(ring: &Arc<JetRing>, name: &str, j: usize) -> Result<JetPoly> {
        let v = ring
            .vars
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Config(format!("unknown variable {name}")))?;
        JetPoly::var(ring, v, j)
    }

    pub fn monomial(ring: &Arc<JetRing>, key: Vec<i32>, c: Elem) -> JetPoly {
        assert_eq!(key.len(), ring.width(), "monomial key length");
        let order = key_order(&key, ring.nvars());
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(key, c);
        }
        JetPoly {
            ring: ring.clone(),
            order,
            terms,
            trunc: Trunc::default(),
        }
    }

    /// Builds from explicit terms; zero coefficients are dropped.
    pub fn from_terms(
        ring: &Arc<JetRing>,
        terms: impl IntoIterator<Item = (Vec<i32>, Elem)>,
        trunc: Trunc,
    ) -> JetPoly {
        let mut out = JetPoly {
            ring: ring.clone(),
            order: 0,
            terms: BTreeMap::new(),
            trunc,
        };
        let f = ring.field.clone();
        for (k, c) in terms {
            assert_eq!(k.len(), ring.width(), "monomial key length");
            out.order = out.order.max(key_order(&k, ring.nvars()));
            match out.terms.get_mut(&k) {
                Some(old) => *old = f.add(old, &c),
                None => {
                    out.terms.insert(k, c);
                }
            }
        }
        out.normalize()
    }

    pub fn ring(&self) -> &Arc<JetRing> {
        &self.ring
    }
    pub fn field(&self) -> &Arc<Field> {
        &self.ring.field
    }
    pub fn flavor(&self) -> Flavor {
        self.ring.flavor
    }
    /// Nominal jet order (grows by one under prolongation).
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn with_order(mut self, order: usize) -> JetPoly {
        self.order = self.order.max(order);
        self
    }
    pub fn trunc(&self) -> Trunc {
        self.trunc
    }
    pub fn terms(&self) -> &BTreeMap<Vec<i32>, Elem> {
        &self.terms
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn coeff(&self, key: &[i32]) -> Option<&Elem> {
        self.terms.get(key)
    }

    /// Adds the caps in `t` (keeping the tighter one of each) and drops what falls outside.
    pub fn truncate(mut self, t: Trunc) -> JetPoly {
        self.trunc = self.trunc.meet(&t);
        self.normalize()
    }

    /// Replaces the truncation outright (for callers that know the exact bookkeeping).
    pub fn set_trunc(mut self, t: Trunc) -> JetPoly {
        self.trunc = t;
        self.normalize()
    }

    fn normalize(mut self) -> JetPoly {
        let nv = self.ring.nvars();
        let f = self.ring.field.clone();
        let e = f.e() as i64;
        let t = self.trunc;
        let mut loss = t.loss;
        self.terms.retain(|k, c| {
            if c.is_zero() {
                if c.abs_precision() < ZERO_CAP / 2 {
                    loss = omin(loss, Some(c.abs_precision() * e));
                }
                return false;
            }
            if !t.keeps(k, nv) {
                return false;
            }
            if let Some(fl) = t.floor {
                if f.val_units(c).is_none_or(|v| v >= fl) {
                    return false;
                }
                *c = f.cap_abs(c, Integer::div_floor(&fl, &e));
                if c.is_zero() {
                    return false;
                }
            }
            true
        });
        self.trunc.loss = loss;
        self
    }

    fn check_ring(&self, o: &JetPoly) {
        assert!(
            self.ring.compatible(&o.ring),
            "jet polynomials from different rings"
        );
    }

    /// Smallest exponent of the first variable at order 0.
    pub fn min_q_exp(&self) -> Option<i32> {
        self.terms.keys().map(|k| k[0]).min()
    }

    /// Smallest coefficient valuation, in units of `1/e`.
    pub fn min_val_units(&self) -> Option<i64> {
        let f = &self.ring.field;
        self.terms.values().filter_map(|c| f.val_units(c)).min()
    }

    /// Lower bound for the valuation of the represented element (terms and unknown tail).
    fn val_bound(&self) -> Option<i64> {
        omin(self.min_val_units(), self.trunc.floor)
    }

    pub fn add(&self, o: &JetPoly) -> JetPoly {
        self.check_ring(o);
        let f = &self.ring.field;
        let mut terms = self.terms.clone();
        for (k, c) in &o.terms {
            match terms.get_mut(k) {
                Some(old) => *old = f.add(old, c),
                None => {
                    terms.insert(k.clone(), c.clone());
                }
            }
        }
        JetPoly {
            ring: self.ring.clone(),
            order: self.order.max(o.order),
            terms,
            trunc: self.trunc.meet(&o.trunc),
        }
        .normalize()
    }

    pub fn neg(&self) -> JetPoly {
        let f = &self.ring.field;
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| (k.clone(), f.neg(c)))
            .collect();
        JetPoly {
            ring: self.ring.clone(),
            order: self.order,
            terms,
            trunc: self.trunc,
        }
    }

    pub fn sub(&self, o: &JetPoly) -> JetPoly {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &Elem) -> JetPoly {
        let f = &self.ring.field;
        let terms = self
            .terms
            .iter()
            .map(|(k, a)| (k.clone(), f.mul(a, c)))
            .collect();
        let mut trunc = self.trunc;
        if let Some(v) = f.val_units(c) {
            trunc.floor = trunc.floor.map(|fl| fl + v);
            trunc.loss = trunc.loss.map(|l| l + v);
        }
        JetPoly {
            ring: self.ring.clone(),
            order: self.order,
            terms,
            trunc,
        }
        .normalize()
    }

    pub fn scale_int(&self, n: i64) -> JetPoly {
        self.scale(&self.ring.field.from_int(n))
    }

    /// Applies `g` to every coefficient (for coefficient-wise ring maps such as the trace).
    pub fn map_coeffs(&self, g: impl Fn(&Elem) -> Elem) -> JetPoly {
        let terms = self.terms.iter().map(|(k, a)| (k.clone(), g(a))).collect();
        JetPoly {
            ring: self.ring.clone(),
            order: self.order,
            terms,
            trunc: self.trunc,
        }
        .normalize()
    }

    fn product_trunc(&self, o: &JetPoly) -> Trunc {
        let mut t = self.trunc.meet(&o.trunc);
        if let (Some(qa), Some(vb)) = (self.trunc.q, o.min_q_exp()) {
            t.q = omin(t.q, Some(qa + vb));
        }
        if let (Some(qb), Some(va)) = (o.trunc.q, self.min_q_exp()) {
            t.q = omin(t.q, Some(qb + va));
        }
        let fa = match (self.trunc.floor, o.val_bound()) {
            (Some(f), Some(v)) => Some(f + v),
            _ => None,
        };
        let fb = match (o.trunc.floor, self.val_bound()) {
            (Some(f), Some(v)) => Some(f + v),
            _ => None,
        };
        t.floor = omin(fa, fb);
        let la = match (self.trunc.loss, o.val_bound()) {
            (Some(l), Some(v)) => Some(l + v),
            _ => None,
        };
        let lb = match (o.trunc.loss, self.val_bound()) {
            (Some(l), Some(v)) => Some(l + v),
            _ => None,
        };
        t.loss = omin(la, lb);
        t
    }

    pub fn mul(&self, o: &JetPoly) -> JetPoly {
        self.check_ring(o);
        let f = &self.ring.field;
        let nv = self.ring.nvars();
        let t = self.product_trunc(o);
        let mut terms: BTreeMap<Vec<i32>, Elem> = BTreeMap::new();
        let mut key = vec![0i32; self.ring.width()];
        for (ka, ca) in &self.terms {
            for (kb, cb) in &o.terms {
                for i in 0..key.len() {
                    key[i] = ka[i] + kb[i];
                }
                if !t.keeps(&key, nv) {
                    continue;
                }
                let c = f.mul(ca, cb);
                match terms.get_mut(&key) {
                    Some(old) => *old = f.add(old, &c),
                    None => {
                        terms.insert(key.clone(), c);
                    }
                }
            }
        }
        JetPoly {
            ring: self.ring.clone(),
            order: self.order.max(o.order),
            terms,
            trunc: t,
        }
        .normalize()
    }

    pub fn pow(&self, mut k: u64) -> JetPoly {
        let mut result = JetPoly::one(&self.ring).with_order(self.order);
        result.trunc = self.trunc.degree_caps();
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Integer power, negative exponents through [`JetPoly::inverse`].
    pub fn pow_i(&self, k: i64) -> Result<JetPoly> {
        if k >= 0 {
            Ok(self.pow(k as u64))
        } else {
            Ok(self.inverse()?.pow((-k) as u64))
        }
    }

    /// Inverse as a geometric series around the jet-free term of lowest degree.
    ///
    /// The series has to terminate under the truncation caps or p-adically at
    /// the working precision; otherwise the element is reported as not
    /// invertible here.
    pub fn inverse(&self) -> Result<JetPoly> {
        let f = self.ring.field.clone();
        let nv = self.ring.nvars();
        let lead = self
            .terms
            .iter()
            .filter(|(k, _)| jet_degree(k, nv) == 0 && k[nv..].iter().all(|&e| e == 0))
            .min_by_key(|(k, _)| (k[..nv].iter().map(|&e| e as i64).sum::<i64>(), (*k).clone()))
            .ok_or_else(|| Error::Hypothesis("no jet-free term to invert around".into()))?;
        let inv_key: Vec<i32> = lead.0.iter().map(|&e| -e).collect();
        let inv_c = f.inv(lead.1)?;
        let v_inv = f.val_units(&inv_c).expect("nonzero");
        let linv = JetPoly::monomial(&self.ring, inv_key, inv_c);
        let rel = f.precision() as i64 * f.e() as i64;
        let mut target = v_inv + rel;
        if let (Some(fl), Some(_)) = (self.trunc.floor, self.min_val_units()) {
            target = target.min(fl + 2 * v_inv);
        }
        let y_floor = target - v_inv;
        let work = Trunc {
            floor: Some(y_floor),
            ..self.trunc.degree_caps()
        };
        let mut y = self.mul(&linv).sub(&JetPoly::one(&self.ring));
        y.trunc.floor = omin(y.trunc.floor, Some(y_floor));
        let y = y.normalize().neg();
        let mut acc = JetPoly::one(&self.ring).set_trunc(Trunc {
            q: y.trunc.q,
            ..work
        });
        let mut term = acc.clone();
        let mut done = false;
        for _ in 0..INVERSE_STEPS {
            term = term.mul(&y);
            if term.is_empty() {
                done = true;
                break;
            }
            acc = acc.add(&term);
        }
        if !done {
            return Err(Error::Hypothesis(
                "series inverse does not terminate at this truncation".into(),
            ));
        }
        let mut out = acc.mul(&linv);
        out.trunc.floor = omin(out.trunc.floor, Some(target));
        out.order = self.order;
        Ok(out.normalize())
    }

    /// Formal partial derivative in the generator at key position `slot`.
    pub fn partial(&self, slot: usize) -> JetPoly {
        let f = &self.ring.field;
        let nv = self.ring.nvars();
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            let e = k[slot];
            if e == 0 {
                continue;
            }
            let mut k2 = k.clone();
            k2[slot] -= 1;
            terms.insert(k2, f.mul_int(c, e as i64));
        }
        let mut t = self.trunc;
        if slot >= nv {
            t.jet_deg = t.jet_deg.map(|d| d.saturating_sub(1));
        }
        if slot == 0 {
            t.q = t.q.map(|q| q - 1);
        }
        t.total_deg = t.total_deg.map(|d| d.saturating_sub(1));
        JetPoly {
            ring: self.ring.clone(),
            order: self.order,
            terms,
            trunc: t,
        }
        .normalize()
    }

    /// Evaluates at ring elements, `value(slot)` giving the element for each generator.
    pub fn eval(&self, value: &dyn Fn(usize) -> Elem) -> Result<Elem> {
        let f = &self.ring.field;
        let mut acc = f.zero();
        let mut cache: HashMap<usize, Elem> = HashMap::new();
        for (k, c) in &self.terms {
            let mut t = c.clone();
            for (slot, &e) in k.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let x = cache.entry(slot).or_insert_with(|| value(slot)).clone();
                let base = if e < 0 { f.inv(&x)? } else { x };
                t = f.mul(&t, &f.pow(&base, e.unsigned_abs() as u64));
            }
            acc = f.add(&acc, &t);
        }
        Ok(acc)
    }

    /// True when the difference vanishes at the available precision.
    pub fn equals(&self, o: &JetPoly) -> bool {
        self.difference_terms(o).is_empty()
    }

    /// Terms of `self - o` that are not explained by lost precision.
    fn difference_terms(&self, o: &JetPoly) -> Vec<(Vec<i32>, Elem)> {
        let d = self.sub(o);
        let tol = d.trunc.loss;
        let f = &self.ring.field;
        d.terms
            .into_iter()
            .filter(|(_, c)| match (tol, f.val_units(c)) {
                (Some(t), Some(v)) => v < t,
                _ => true,
            })
            .collect()
    }

    /// Absolute precision (units of `1/e`) below which nothing was lost, if any was.
    pub fn lost_precision(&self) -> Option<i64> {
        self.trunc.loss
    }

    /// A monomial where `self` and `o` differ, with both coefficients.
    pub fn difference_witness(&self, o: &JetPoly) -> Option<String> {
        let d = self.difference_terms(o);
        let (k, c) = d.first()?;
        let f = &self.ring.field;
        let show = |x: Option<&Elem>| x.map(|c| f.format(c)).unwrap_or_else(|| "absent".into());
        Some(format!(
            "{}: {} vs {} (difference {})",
            self.ring_monomial_name(k),
            show(self.terms.get(k)),
            show(o.terms.get(k)),
            f.format(c)
        ))
    }

    /// Printable name of a monomial key, e.g. `x^2*dx*d2y`.
    pub fn ring_monomial_name(&self, key: &[i32]) -> String {
        monomial_name(&self.ring, key)
    }

    /// Canonical text form: one `coefficient*monomial` per line, sorted by
    /// total degree and then by the exponents read variable by variable.
    pub fn format(&self) -> String {
        let f = &self.ring.field;
        let mut rows: Vec<(i64, Vec<i32>, String)> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let mut s = f.format(c);
                let m = monomial_name(&self.ring, k);
                if m != "1" {
                    s.push('*');
                    s.push_str(&m);
                }
                (total_degree(k), var_major(&self.ring, k), s)
            })
            .collect();
        rows.sort();
        let mut out = String::new();
        for (_, _, s) in rows {
            out.push_str(&s);
            out.push('\n');
        }
        out
    }

    /// Substitutes an image for every generator and maps the coefficients.
    ///
    /// Generator images must already respect the degree caps of `out`; the
    /// result carries `out` (met with whatever the images contribute).
    pub fn substitute(
        &self,
        target: &Arc<JetRing>,
        image: &mut dyn FnMut(usize) -> Result<JetPoly>,
        coeff: &dyn Fn(&Elem) -> Elem,
        out: Trunc,
        order: usize,
    ) -> Result<JetPoly> {
        let f = target.field.clone();
        let nv = target.nvars();
        let caps = out.degree_caps();
        let mut images: HashMap<usize, JetPoly> = HashMap::new();
        let mut powers: HashMap<(usize, i32), JetPoly> = HashMap::new();
        let mut acc: BTreeMap<Vec<i32>, Elem> = BTreeMap::new();
        let mut t = out;
        for (k, c) in &self.terms {
            let mut prod = JetPoly::constant(target, coeff(c)).set_trunc(caps);
            for (slot, &e) in k.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if let Entry::Vacant(v) = images.entry(slot) {
                    v.insert(image(slot)?.truncate(caps));
                }
                if let Entry::Vacant(v) = powers.entry((slot, e)) {
                    v.insert(images[&slot].pow_i(e as i64)?);
                }
                prod = prod.mul(&powers[&(slot, e)]);
                if prod.is_empty() {
                    break;
                }
            }
            t.floor = omin(t.floor, prod.trunc.floor);
            t.loss = omin(t.loss, prod.trunc.loss);
            if let (Some(l), Some(v)) = (self.trunc.loss, prod.val_bound()) {
                t.loss = omin(t.loss, Some(l + v.min(0)));
            }
            for (pk, pc) in prod.terms {
                if !out.keeps(&pk, nv) {
                    continue;
                }
                match acc.get_mut(&pk) {
                    Some(old) => *old = f.add(old, &pc),
                    None => {
                        acc.insert(pk, pc);
                    }
                }
            }
        }
        Ok(JetPoly {
            ring: target.clone(),
            order,
            terms: acc,
            trunc: t,
        }
        .normalize())
    }

    /// Moves a polynomial into a compatible ring with a larger maximal order.
    pub fn lift_to(&self, target: &Arc<JetRing>) -> JetPoly {
        assert_eq!(self.ring.vars, target.vars, "variables must agree");
        assert!(
            Arc::ptr_eq(&self.ring.field, &target.field),
            "coefficient rings must agree"
        );
        let nv = self.ring.nvars();
        let terms = self
            .terms
            .iter()
            .map(|(k, c)| {
                let mut k2 = vec![0; target.width()];
                for (slot, &e) in k.iter().enumerate() {
                    if e != 0 {
                        let (v, j) = (slot % nv, slot / nv);
                        k2[target.slot(v, j)] = e;
                    }
                }
                (k2, c.clone())
            })
            .collect();
        JetPoly {
            ring: target.clone(),
            order: self.order,
            terms,
            trunc: self.trunc,
        }
    }

    // ---- prolongation ----

    /// Applies the p-derivation of the ambient flavor using only the axioms:
    /// `δ(1) = 0`, the sum rule with `C_p` (or `C_π`), the product rule,
    /// the coefficient derivation and `δ(δ^j v) = δ^{j+1} v`. Sums are folded
    /// term by term from the left.
    pub fn prolong(&self) -> Result<JetPoly> {
        let out_order = self.next_order()?;
        let out_trunc = self.prolong_trunc(true)?;
        let mut work = self.trunc.degree_caps();
        if self.min_q_exp().is_none_or(|v| v >= 0) {
            work.q = self.trunc.q;
        }
        let mut acc_val: Option<JetPoly> = None;
        let mut acc_delta = JetPoly::zero(&self.ring).set_trunc(work);
        for (k, c) in &self.terms {
            let t = JetPoly::monomial(&self.ring, k.clone(), c.clone()).set_trunc(work);
            let dt = self.delta_term(k, c, work)?;
            acc_val = Some(match acc_val {
                None => {
                    acc_delta = dt;
                    t
                }
                Some(a) => {
                    let cross = c_ell(&a, &t);
                    acc_delta = acc_delta.add(&dt).add(&cross);
                    a.add(&t)
                }
            });
        }
        let mut out = acc_delta.truncate(out_trunc);
        out.order = out_order;
        Ok(out)
    }

    /// `φ(x) = x^p + ℓ·δx` with δ from [`JetPoly::prolong`].
    pub fn phi_hat(&self) -> Result<JetPoly> {
        let p = self.ring.field.p() as u64;
        let d = self.prolong()?;
        let mut out = self.pow(p).add(&d.scale(&self.ring.ell()));
        out.order = d.order;
        Ok(out)
    }

    /// The Frobenius lift computed directly as a ring homomorphism:
    /// `δ^j v ↦ (δ^j v)^p + ℓ δ^{j+1} v` and coefficients through the base Frobenius.
    pub fn frobenius_lift(&self) -> Result<JetPoly> {
        let out_order = self.next_order()?;
        let out_trunc = self.prolong_trunc(false)?;
        let ring = self.ring.clone();
        let f = ring.field.clone();
        let p = f.p() as u64;
        let ell = ring.ell();
        let caps = self.trunc.degree_caps();
        let nv = ring.nvars();
        let mut image = |slot: usize| -> Result<JetPoly> {
            let (v, j) = (slot % nv, slot / nv);
            let g = JetPoly::var(&ring, v, j)?.set_trunc(caps);
            let next = JetPoly::var(&ring, v, j + 1)?.set_trunc(caps);
            Ok(g.pow(p).add(&next.scale(&ell)))
        };
        let fc = f.clone();
        self.substitute(
            &self.ring,
            &mut image,
            &move |c| fc.frobenius(c),
            out_trunc,
            out_order,
        )
    }

    /// `δx = (φ(x) - x^p)/ℓ` through [`JetPoly::frobenius_lift`].
    pub fn delta_fast(&self) -> Result<JetPoly> {
        let f = self.ring.field.clone();
        let p = f.p() as u64;
        let num = self.frobenius_lift()?.sub(&self.pow(p));
        let inv = f.inv(&self.ring.ell())?;
        let mut out = num.scale(&inv);
        out.order = self.order + 1;
        Ok(out)
    }

    fn next_order(&self) -> Result<usize> {
        let needed = self.order + 1;
        if needed > self.ring.max_order {
            return Err(Error::OrderOverflow {
                needed,
                max: self.ring.max_order,
            });
        }
        Ok(needed)
    }

    /// Truncation of `δ` (or `φ` when `with_cross` is false) of a truncated input.
    fn prolong_trunc(&self, with_cross: bool) -> Result<Trunc> {
        let p = self.ring.field.p() as i64;
        let mut t = self.trunc.degree_caps();
        if let Some(q) = self.trunc.q {
            let d = self.trunc.jet_deg.ok_or_else(|| {
                Error::TruncationMismatch(
                    "Frobenius of a q-truncated series needs a jet-degree cap".into(),
                )
            })? as i64;
            let mut qo = (q as i64).min(p * (q as i64 - d));
            if with_cross {
                let va = self.min_q_exp().unwrap_or(0).min(0) as i64;
                qo = qo.min(q as i64 + (p - 1) * va);
            }
            t.q = Some(qo.max(i32::MIN as i64) as i32);
        }
        let va = self.min_val_units().unwrap_or(0).min(0);
        let shift = |fl: i64| {
            if with_cross {
                fl - self.ring.ell_units() + (p - 1) * va
            } else {
                fl + (p - 1) * va
            }
        };
        t.floor = self.trunc.floor.map(shift);
        t.loss = self.trunc.loss.map(shift);
        Ok(t)
    }

    /// δ(c·m) for a single term.
    fn delta_term(&self, key: &[i32], c: &Elem, work: Trunc) -> Result<JetPoly> {
        let ring = &self.ring;
        let f = &ring.field;
        let p = f.p() as u64;
        let dc = match ring.flavor {
            Flavor::P => f.delta_p(c)?,
            Flavor::Pi => f.delta_pi(c)?,
        };
        let m = JetPoly::monomial(ring, key.to_vec(), f.one()).set_trunc(work);
        if key.iter().all(|&e| e == 0) {
            return Ok(JetPoly::constant(ring, dc).set_trunc(work));
        }
        let dm = self.delta_monomial(key, work)?;
        let cpart = dm.scale(&f.pow(c, p));
        let mp = m.pow(p);
        let rest = mp.scale(&dc).add(&dm.scale(&f.mul(&dc, &ring.ell())));
        Ok(cpart.add(&rest))
    }

    fn delta_monomial(&self, key: &[i32], work: Trunc) -> Result<JetPoly> {
        let ring = &self.ring;
        let p = ring.field.p() as u64;
        let mut acc_m = JetPoly::one(ring).set_trunc(work);
        let mut acc_d = JetPoly::zero(ring).set_trunc(work);
        for (slot, &e) in key.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let mut fk = vec![0; ring.width()];
            fk[slot] = e;
            let fm = JetPoly::monomial(ring, fk, ring.field.one()).set_trunc(work);
            let dm = self.delta_power(slot, e, work)?;
            acc_d = product_rule(&acc_m, &acc_d, &fm, &dm, p, &ring.ell());
            acc_m = acc_m.mul(&fm);
        }
        Ok(acc_d)
    }

    /// δ(u^k) for the generator u at `slot`.
    fn delta_power(&self, slot: usize, k: i32, work: Trunc) -> Result<JetPoly> {
        let ring = &self.ring;
        let p = ring.field.p() as u64;
        let ell = ring.ell();
        let (v, j) = ring.slot_var(slot);
        if j + 1 > ring.max_order {
            return Err(Error::OrderOverflow {
                needed: j + 1,
                max: ring.max_order,
            });
        }
        let u = JetPoly::var(ring, v, j)?.set_trunc(work);
        let du = JetPoly::var(ring, v, j + 1)?.set_trunc(work);
        let (base, dbase) = if k > 0 {
            (u, du)
        } else {
            // from δ(u·u^{-1}) = 0
            let uinv = u.inverse()?;
            let phi_u = u.pow(p).add(&du.scale(&ell));
            let d = uinv.pow(p).mul(&du).mul(&phi_u.inverse()?).neg();
            (uinv, d)
        };
        let mut cur_m = base.clone();
        let mut cur_d = dbase.clone();
        for _ in 1..k.unsigned_abs() {
            cur_d = product_rule(&cur_m, &cur_d, &base, &dbase, p, &ell);
            cur_m = cur_m.mul(&base);
        }
        Ok(cur_d)
    }
}

/// `δ(ab) = a^p δb + b^p δa + ℓ δa δb`.
fn product_rule(
    a: &JetPoly,
    da: &JetPoly,
    b: &JetPoly,
    db: &JetPoly,
    p: u64,
    ell: &Elem,
) -> JetPoly {
    a.pow(p)
        .mul(db)
        .add(&b.pow(p).mul(da))
        .add(&da.mul(db).scale(ell))
}

/// `C_ℓ(X, Y) = (X^p + Y^p - (X+Y)^p)/ℓ`, expanded with exact binomial coefficients.
fn c_ell(x: &JetPoly, y: &JetPoly) -> JetPoly {
    let ring = x.ring.clone();
    let f = ring.field.clone();
    let p = f.p() as usize;
    let mut xp = vec![JetPoly::one(&ring).set_trunc(x.trunc.degree_caps())];
    let mut yp = vec![JetPoly::one(&ring).set_trunc(y.trunc.degree_caps())];
    for i in 1..p {
        xp.push(xp[i - 1].mul(x));
        yp.push(yp[i - 1].mul(y));
    }
    let mut acc = JetPoly::zero(&ring);
    let mut binom = BigInt::from(1);
    for i in 1..p {
        binom = binom * BigInt::from(p - i + 1) / BigInt::from(i);
        let c = f.from_bigint(&(-(&binom / BigInt::from(p))));
        acc = acc.add(&xp[i].mul(&yp[p - i]).scale(&c));
    }
    match ring.flavor {
        Flavor::P => acc,
        Flavor::Pi => acc.scale(&f.p_over_pi()),
    }
}

/// `C_p` or `C_π` (by flavor) applied to two jet polynomials.
pub fn sum_defect(x: &JetPoly, y: &JetPoly) -> JetPoly {
    c_ell(x, y)
}

fn key_order(key: &[i32], nv: usize) -> usize {
    key.iter()
        .enumerate()
        .filter(|(_, &e)| e != 0)
        .map(|(i, _)| i / nv)
        .max()
        .unwrap_or(0)
}

fn var_major(ring: &JetRing, key: &[i32]) -> Vec<i32> {
    let mut out = Vec::with_capacity(key.len());
    for v in 0..ring.nvars() {
        for j in 0..=ring.max_order {
            out.push(-key[ring.slot(v, j)]);
        }
    }
    out
}

fn monomial_name(ring: &JetRing, key: &[i32]) -> String {
    let mut parts = Vec::new();
    for v in 0..ring.nvars() {
        for j in 0..=ring.max_order {
            let slot = ring.slot(v, j);
            let e = key[slot];
            if e == 0 {
                continue;
            }
            let mut s = ring.slot_name(slot);
            if e != 1 {
                let _ = write!(s, "^{e}");
            }
            parts.push(s);
        }
    }
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

// ---- π ↔ p coordinate changes ----

/// The polynomials relating `δ_π` jets and `δ_p` jets of a single variable.
///
/// `D_n` is `δ_π^n x` written in `y_j = δ_p^j x`, `F_n` is the residual
/// `(D_n - (p/π)^n y_n) / π^{max(e-n,0)}`, and `P_n` is `δ_p^n x` written in
/// `z_j = δ_π^j x` by triangular back-substitution.
#[derive(Debug, Clone)]
pub struct Conversion {
    p_ring: Arc<JetRing>,
    pi_ring: Arc<JetRing>,
    d: Vec<JetPoly>,
    f: Vec<JetPoly>,
    inv: Vec<JetPoly>,
    caps: Trunc,
}

impl Conversion {
    /// Tables up to order `max_order`, truncated to the degree caps of `caps`.
    pub fn new(field: &Arc<Field>, max_order: usize, caps: Trunc) -> Result<Conversion> {
        let caps = caps.degree_caps();
        let caps = Trunc {
            jet_deg: omin(caps.jet_deg, caps.total_deg),
            total_deg: None,
            ..caps
        };
        let p_ring = JetRing::new(field.clone(), Flavor::P, &["x"], max_order);
        let pi_ring = JetRing::new(field.clone(), Flavor::Pi, &["x"], max_order);
        let e = field.e() as i64;
        let p = field.p() as u64;
        let pi_inv = field.pi_inv().clone();
        let p_over_pi = field.p_over_pi();
        let pi_over_p = field.inv(&p_over_pi)?;

        let mut d = vec![JetPoly::var(&p_ring, 0, 0)?.set_trunc(caps)];
        let mut fs = vec![JetPoly::zero(&p_ring)];
        for n in 1..=max_order {
            let prev = &d[n - 1];
            let num = prev.frobenius_lift()?.sub(&prev.pow(p));
            let dn = num.scale(&pi_inv).with_order(n);
            let lead = JetPoly::var(&p_ring, 0, n)?
                .scale(&field.pow(&p_over_pi, n as u64))
                .set_trunc(caps);
            let m = (e - n as i64).max(0);
            let fnp = dn.sub(&lead).scale(&field.pi_pow(-m));
            check_conversion(&fnp, n, p)?;
            d.push(dn);
            fs.push(fnp);
        }

        let mut inv = vec![JetPoly::var(&pi_ring, 0, 0)?.set_trunc(caps)];
        for n in 1..=max_order {
            let m = (e - n as i64).max(0);
            let zn = JetPoly::var(&pi_ring, 0, n)?.set_trunc(caps);
            let sub = {
                let prev = &inv;
                let mut image = |slot: usize| -> Result<JetPoly> { Ok(prev[slot].clone()) };
                fs[n].substitute(&pi_ring, &mut image, &|c| c.clone(), caps, n)?
            };
            let pn = zn
                .sub(&sub.scale(&field.pi_pow(m)))
                .scale(&field.pow(&pi_over_p, n as u64));
            inv.push(pn.with_order(n));
        }
        Ok(Conversion {
            p_ring,
            pi_ring,
            d,
            f: fs,
            inv,
            caps,
        })
    }

    pub fn max_order(&self) -> usize {
        self.d.len() - 1
    }
    /// `δ_π^n x` in `δ_p` coordinates.
    pub fn d(&self, n: usize) -> &JetPoly {
        &self.d[n]
    }
    /// The residual polynomial `F_n` (zero for `n = 1`).
    pub fn f(&self, n: usize) -> &JetPoly {
        &self.f[n]
    }
    /// `δ_p^n x` in `δ_π` coordinates.
    pub fn inverse_poly(&self, n: usize) -> &JetPoly {
        &self.inv[n]
    }
    pub fn p_ring(&self) -> &Arc<JetRing> {
        &self.p_ring
    }
    pub fn pi_ring(&self) -> &Arc<JetRing> {
        &self.pi_ring
    }

    /// Rewrites a `δ_π` polynomial in `δ_p` jets (same variables, same coefficients).
    pub fn pi_to_p(&self, x: &JetPoly) -> Result<JetPoly> {
        if x.flavor() != Flavor::Pi {
            return Err(Error::Config("pi_to_p expects a δ_π polynomial".into()));
        }
        self.rewrite(x, Flavor::P, &self.d)
    }

    /// Rewrites a `δ_p` polynomial in `δ_π` jets over the fraction field.
    pub fn p_to_pi(&self, x: &JetPoly) -> Result<JetPoly> {
        if x.flavor() != Flavor::P {
            return Err(Error::Config("p_to_pi expects a δ_p polynomial".into()));
        }
        self.rewrite(x, Flavor::Pi, &self.inv)
    }

    fn rewrite(&self, x: &JetPoly, to: Flavor, table: &[JetPoly]) -> Result<JetPoly> {
        let ring = x.ring();
        if ring.max_order > self.max_order() {
            return Err(Error::OrderOverflow {
                needed: ring.max_order,
                max: self.max_order(),
            });
        }
        if !Arc::ptr_eq(ring.field(), self.p_ring.field()) {
            return Err(Error::Config(
                "conversion built for another coefficient ring".into(),
            ));
        }
        let target = ring.with_flavor(to);
        let nv = ring.nvars();
        let caps = x.trunc().degree_caps();
        let mut image = |slot: usize| -> Result<JetPoly> {
            let (v, j) = (slot % nv, slot / nv);
            Ok(relocate(&table[j], &target, v).truncate(caps))
        };
        let t = x.trunc();
        if let Some(d) = t.jet_deg {
            if self.caps.jet_deg.is_some_and(|c| c < d) {
                return Err(Error::TruncationMismatch(
                    "conversion tables are truncated below the input".into(),
                ));
            }
        }
        x.substitute(&target, &mut image, &|c| c.clone(), t, x.order())
    }
}

/// Copies a single-variable polynomial into slot `v` of a ring with the same coefficients.
fn relocate(t: &JetPoly, target: &Arc<JetRing>, v: usize) -> JetPoly {
    let terms = t.terms.iter().map(|(k, c)| {
        let mut k2 = vec![0; target.width()];
        for (j, &e) in k.iter().enumerate() {
            if e != 0 {
                k2[target.slot(v, j)] = e;
            }
        }
        (k2, c.clone())
    });
    JetPoly::from_terms(target, terms.collect::<Vec<_>>(), t.trunc).with_order(t.order)
}

fn check_conversion(fnp: &JetPoly, n: usize, p: u64) -> Result<()> {
    let f = fnp.field();
    let bound = (p as i64).pow(n as u32 - 1);
    for (k, c) in fnp.terms() {
        if k[0] != 0 {
            return Err(Error::Hypothesis(format!(
                "F_{n} depends on the order-0 variable"
            )));
        }
        if k[n] != 0 {
            return Err(Error::Hypothesis(format!("F_{n} depends on the top jet")));
        }
        if total_degree(k) == 0 {
            return Err(Error::Hypothesis(format!("F_{n} has a constant term")));
        }
        if total_degree(k) > bound {
            return Err(Error::Hypothesis(format!(
                "F_{n} has degree above p^{}",
                n - 1
            )));
        }
        if !f.is_integral(c) {
            return Err(Error::Divisibility(format!(
                "residual at order {n} is not divisible by π^max(e-n,0): coefficient {} at {}",
                f.format(c),
                fnp.ring_monomial_name(k)
            )));
        }
    }
    Ok(())
}

/// `F_n` for a single variable, exactly.
pub fn conversion_polynomial(field: &Arc<Field>, n: usize) -> Result<JetPoly> {
    if n < 1 {
        return Err(Error::Config(
            "conversion polynomials start at n = 1".into(),
        ));
    }
    Ok(Conversion::new(field, n, Trunc::exact())?.f(n).clone())
}

// ---- conjugate operators ----

/// A derivation on the order-0 variables: `∂ v_i = images[i]`.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub images: Vec<JetPoly>,
}

impl Derivation {
    /// `d/dv` for the variable at index `v`.
    pub fn coordinate(ring: &Arc<JetRing>, v: usize) -> Derivation {
        let images = (0..ring.nvars())
            .map(|i| {
                if i == v {
                    JetPoly::one(ring)
                } else {
                    JetPoly::zero(ring)
                }
            })
            .collect();
        Derivation { images }
    }
}

/// Values of `∂_j` on the generators `δ^k v`, `k <= r`, indexed `[v][k]`.
///
/// The general route solves the lower-triangular system coming from
/// `∂_j φ^s(v) = [s = j] p^j φ^j(∂v)` in the coordinates `φ^s(v)`; the
/// closed route (order one, `δ_p` only) uses the explicit formulas.
pub fn conjugate_generator_values(
    ring: &Arc<JetRing>,
    j: usize,
    r: usize,
    der: &Derivation,
    closed_form: bool,
) -> Result<Vec<Vec<JetPoly>>> {
    if ring.flavor() != Flavor::P {
        return Err(Error::Config("conjugate operators act on δ_p jets".into()));
    }
    if j > r || r > ring.max_order() {
        return Err(Error::OrderOverflow {
            needed: r.max(j),
            max: ring.max_order(),
        });
    }
    let f = ring.field().clone();
    let p = f.p() as u64;
    let mut out = Vec::with_capacity(ring.nvars());
    for v in 0..ring.nvars() {
        let g = &der.images[v];
        if closed_form {
            if r != 1 {
                return Err(Error::Config(
                    "closed forms exist only for order one".into(),
                ));
            }
            let x = JetPoly::var(ring, v, 0)?;
            let vals = if j == 0 {
                vec![g.clone(), x.pow(p - 1).mul(g).neg().with_order(1)]
            } else {
                vec![JetPoly::zero(ring), g.frobenius_lift()?]
            };
            out.push(vals);
            continue;
        }
        let mut phis = vec![JetPoly::var(ring, v, 0)?];
        for s in 1..=r {
            let next = phis[s - 1].frobenius_lift()?;
            phis.push(next);
        }
        let mut gj = g.clone();
        for _ in 0..j {
            gj = gj.frobenius_lift()?;
        }
        let mut vals: Vec<JetPoly> = Vec::with_capacity(r + 1);
        for s in 0..=r {
            let mut b = if s == j {
                gj.scale(&f.pow(&f.from_int(p as i64), j as u64))
            } else {
                JetPoly::zero(ring)
            };
            for (k, vk) in vals.iter().enumerate() {
                let jac = phis[s].partial(ring.slot(v, k));
                b = b.sub(&jac.mul(vk));
            }
            let diag = f.inv(&f.pow(&ring.ell(), s as u64))?;
            vals.push(b.scale(&diag).with_order(r));
        }
        out.push(vals);
    }
    Ok(out)
}

/// `∂_j x` for the conjugate operators of `der`, with an integrality check.
pub fn conjugate_apply(j: usize, x: &JetPoly, der: &Derivation) -> Result<JetPoly> {
    let ring = x.ring().clone();
    let r = x.order().max(j).max(1);
    let closed = r == 1;
    let vals = conjugate_generator_values(&ring, j, r, der, closed)?;
    let mut acc = JetPoly::zero(&ring);
    for (v, vv) in vals.iter().enumerate() {
        for (k, val) in vv.iter().enumerate() {
            if val.is_empty() {
                continue;
            }
            let d = x.partial(ring.slot(v, k));
            if d.is_empty() {
                continue;
            }
            acc = acc.add(&d.mul(val));
        }
    }
    let acc = acc.with_order(r);
    let f = ring.field();
    for (k, c) in acc.terms() {
        if !f.is_integral(c) {
            return Err(Error::Integrality(format!(
                "∂_{j} leaves coefficient {} at {}",
                f.format(c),
                acc.ring_monomial_name(k)
            )));
        }
    }
    Ok(acc)
}

// ---- weights ----

/// `w = Σ a_i φ^i` in `Z[φ]`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Weight(pub Vec<i64>);

impl Weight {
    pub fn add(&self, o: &Weight) -> Weight {
        let n = self.0.len().max(o.0.len());
        Weight(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&0) + o.0.get(i).unwrap_or(&0))
                .collect(),
        )
    }
    pub fn neg(&self) -> Weight {
        Weight(self.0.iter().map(|a| -a).collect())
    }
    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&a| a != 0).unwrap_or(0)
    }
}

/// `x^w = Π φ^i(x)^{a_i}`.
pub fn weight_action(x: &JetPoly, w: &Weight) -> Result<JetPoly> {
    let mut acc = JetPoly::one(x.ring()).set_trunc(x.trunc().degree_caps());
    let mut phi_i = x.clone();
    for (i, &a) in w.0.iter().enumerate() {
        if i > 0 {
            phi_i = phi_i.frobenius_lift()?;
        }
        if a != 0 {
            acc = acc.mul(&phi_i.pow_i(a)?);
        }
    }
    Ok(acc.with_order(x.order() + w.degree()))
}
