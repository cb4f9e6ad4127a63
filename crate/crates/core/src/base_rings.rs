//! Capped-precision p-adic base rings.
//!
//! A [`Field`] bundles a prime `p`, a working precision, an optional unramified
//! extension of degree `f` (with its Hensel-lifted Frobenius) and an Eisenstein
//! extension of degree `e`. Without an Eisenstein polynomial the field uses
//! `e = 1` and `π = p` internally, so Z_p and its unramified extensions go
//! through the same code.
//!
//! Elements are [`Elem`] values `p^(-s) * Σ c_i π^i`, where each `c_i` is a
//! residue in the unramified ring. The digit vector is kept normalized (not
//! divisible by `p`) and carries its own relative precision, so fraction-field
//! values such as `π/p` or `1/n` stay exact up to the digits that were
//! computed. For integral elements the absolute precision is at least the
//! working precision.

use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::{BigInt, RandBigInt};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Largest absolute precision recorded for a zero element.
pub const ZERO_CAP: i64 = 1 << 24;

/// Prime, precision and inertia degree of the unramified base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicConfig {
    pub p: u32,
    /// Working precision K: integral elements are known modulo `p^K`.
    pub precision: u32,
    /// Inertia degree f; `f = 1` means the base is Z_p.
    pub inertia_degree: usize,
    /// Optional monic modulus `g(t) = t^f + g_{f-1} t^{f-1} + ... + g_0`, given as
    /// `[g_0, ..., g_{f-1}]`. When absent the first irreducible one is searched.
    pub modulus: Option<Vec<i64>>,
}

impl PadicConfig {
    pub fn new(p: u32, precision: u32) -> Result<Self> {
        Self::unramified(p, precision, 1, None)
    }

    pub fn unramified(p: u32, precision: u32, f: usize, modulus: Option<Vec<i64>>) -> Result<Self> {
        if p < 5 || !is_prime(p as u64) {
            return Err(Error::Config(format!("p = {p} must be a prime >= 5")));
        }
        if precision < 1 {
            return Err(Error::Config("precision must be >= 1".into()));
        }
        if f < 1 {
            return Err(Error::Config("inertia degree must be >= 1".into()));
        }
        if let Some(g) = &modulus {
            if g.len() != f {
                return Err(Error::Config(format!(
                    "modulus needs {f} coefficients, got {}",
                    g.len()
                )));
            }
            let gp: Vec<u64> = g.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
            if !fp_irreducible(&gp, p as u64) {
                return Err(Error::Config("modulus is not irreducible mod p".into()));
            }
        }
        Ok(PadicConfig {
            p,
            precision,
            inertia_degree: f,
            modulus,
        })
    }
}

/// Eisenstein polynomial `E(x) = x^e + p (c_{e-1} x^{e-1} + ... + c_0)` with
/// integer `c_i`, `c_0` a unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EisensteinConfig {
    pub e: usize,
    /// `c_0, ..., c_{e-1}`.
    pub eis_coeffs: Vec<BigInt>,
    /// Recorded only; no computation depends on it.
    pub galois_flag: bool,
}

impl EisensteinConfig {
    /// Builds from the full coefficient list `[E_0, ..., E_e]` (low degree first, `E_e = 1`).
    pub fn from_poly(p: u32, coeffs: &[BigInt], galois_flag: bool) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::Config(
                "Eisenstein polynomial must have degree e >= 2".into(),
            ));
        }
        let e = coeffs.len() - 1;
        if !coeffs[e].is_one() {
            return Err(Error::Config("Eisenstein polynomial must be monic".into()));
        }
        let pz = BigInt::from(p);
        let mut c = Vec::with_capacity(e);
        for (i, a) in coeffs[..e].iter().enumerate() {
            if !a.is_multiple_of(&pz) {
                return Err(Error::Config(format!(
                    "coefficient of x^{i} is not divisible by p"
                )));
            }
            c.push(a / &pz);
        }
        if c[0].is_multiple_of(&pz) {
            return Err(Error::Config(
                "constant term must have valuation exactly 1".into(),
            ));
        }
        Ok(EisensteinConfig {
            e,
            eis_coeffs: c,
            galois_flag,
        })
    }

    /// `Φ_p(1 - x)`, whose root is `π = 1 - ζ_p`; `e = p - 1`.
    pub fn cyclotomic(p: u32) -> Self {
        // Σ_{k<p} (1-x)^k expanded over the integers.
        let n = p as usize;
        let mut poly = vec![BigInt::zero(); n];
        let mut pow = vec![BigInt::one()];
        for _ in 0..n {
            for (i, c) in pow.iter().enumerate() {
                poly[i] += c;
            }
            let mut next = vec![BigInt::zero(); pow.len() + 1];
            for (i, c) in pow.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c;
            }
            pow = next;
        }
        Self::from_poly(p, &poly, true).expect("cyclotomic polynomial is Eisenstein")
    }

    /// `x^e - p`.
    pub fn pure(p: u32, e: usize) -> Result<Self> {
        let mut poly = vec![BigInt::zero(); e + 1];
        poly[0] = -BigInt::from(p);
        poly[e] = BigInt::one();
        Self::from_poly(p, &poly, (p as usize - 1) % e == 0)
    }

    /// Full coefficient list `[E_0, ..., E_{e-1}]` (the monic term omitted).
    pub fn poly(&self, p: u32) -> Vec<BigInt> {
        self.eis_coeffs
            .iter()
            .map(|c| c * BigInt::from(p))
            .collect()
    }
}

/// An element `p^(-s) * Σ_{i<e} c_i π^i`.
#[derive(Clone, Debug)]
pub struct Elem {
    /// Digit `i * f + j` is the coefficient of `t^j π^i`, reduced into `[0, p^prec)`.
    d: Vec<BigInt>,
    s: i64,
    prec: u32,
}

impl Elem {
    /// True when the digit vector vanishes at its precision.
    pub fn is_zero(&self) -> bool {
        self.prec == 0
    }
    /// Power of `p` pulled out of the digits (the value is `p^(-s)` times them).
    pub fn shift(&self) -> i64 {
        self.s
    }
    /// Relative precision of the digit vector.
    pub fn rel_precision(&self) -> u32 {
        self.prec
    }
    /// The value is known modulo `p^abs_precision` (times R_π).
    pub fn abs_precision(&self) -> i64 {
        self.prec as i64 - self.s
    }
    pub fn digits(&self) -> &[BigInt] {
        &self.d
    }
}

/// A configured ring: Z_p, an unramified extension, or an Eisenstein extension of either.
#[derive(Debug)]
pub struct Field {
    p: u32,
    pz: BigInt,
    prec: u32,
    f: usize,
    e: usize,
    pow: Vec<BigInt>,
    modulus: Vec<BigInt>,
    frob: Vec<Vec<BigInt>>,
    eis: Option<EisensteinConfig>,
    epoly: Vec<BigInt>,
    red: Vec<Vec<BigInt>>,
    pi_inv: Option<Elem>,
    traces: Vec<BigInt>,
}

impl Field {
    pub fn zp(p: u32, precision: u32) -> Result<Arc<Field>> {
        Field::new(&PadicConfig::new(p, precision)?, None)
    }

    pub fn ramified(p: u32, precision: u32, eis: EisensteinConfig) -> Result<Arc<Field>> {
        Field::new(&PadicConfig::new(p, precision)?, Some(eis))
    }

    pub fn new(cfg: &PadicConfig, eis: Option<EisensteinConfig>) -> Result<Arc<Field>> {
        let p = cfg.p;
        let pz = BigInt::from(p);
        let prec = cfg.precision;
        let f = cfg.inertia_degree;
        let pow: Vec<BigInt> = (0..=prec).map(|k| pz.pow(k)).collect();
        let modulus: Vec<BigInt> = match &cfg.modulus {
            Some(g) => g.iter().map(|&c| BigInt::from(c)).collect(),
            None if f == 1 => vec![BigInt::zero()],
            None => find_irreducible(f, p as u64)
                .ok_or_else(|| Error::Config("no irreducible modulus found".into()))?
                .into_iter()
                .map(BigInt::from)
                .collect(),
        };
        let (e, epoly) = match &eis {
            Some(c) => {
                if c.e < 2 {
                    return Err(Error::Config("ramification degree must be >= 2".into()));
                }
                (c.e, c.poly(p))
            }
            None => (1, vec![-pz.clone()]),
        };
        let mut fld = Field {
            p,
            pz,
            prec,
            f,
            e,
            pow,
            modulus,
            frob: Vec::new(),
            eis,
            epoly,
            red: Vec::new(),
            pi_inv: None,
            traces: Vec::new(),
        };
        fld.red = fld.reduction_table();
        fld.traces = fld.newton_traces();
        fld.frob = fld.frobenius_table()?;
        fld.pi_inv = Some(fld.compute_pi_inv()?);
        Ok(Arc::new(fld))
    }

    pub fn p(&self) -> u32 {
        self.p
    }
    pub fn p_big(&self) -> &BigInt {
        &self.pz
    }
    pub fn precision(&self) -> u32 {
        self.prec
    }
    pub fn e(&self) -> usize {
        self.e
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn eisenstein(&self) -> Option<&EisensteinConfig> {
        self.eis.as_ref()
    }
    pub fn is_ramified(&self) -> bool {
        self.eis.is_some()
    }
    pub fn modulus(&self) -> &[BigInt] {
        &self.modulus
    }
    fn width(&self) -> usize {
        self.e * self.f
    }

    // ---- construction of elements ----

    /// Zero known to the largest recorded precision.
    pub fn zero(&self) -> Elem {
        self.zero_abs(ZERO_CAP)
    }

    /// Zero known modulo `p^abs`.
    pub fn zero_abs(&self, abs: i64) -> Elem {
        Elem {
            d: vec![BigInt::zero(); self.width()],
            s: -abs.min(ZERO_CAP),
            prec: 0,
        }
    }

    pub fn one(&self) -> Elem {
        self.from_int(1)
    }

    pub fn from_int(&self, n: i64) -> Elem {
        self.from_bigint(&BigInt::from(n))
    }

    pub fn from_bigint(&self, n: &BigInt) -> Elem {
        let mut d = vec![BigInt::zero(); self.width()];
        d[0] = n.clone();
        self.mk(d, 0, self.prec)
    }

    pub fn from_ratio(&self, r: &BigRational) -> Elem {
        if r.is_zero() {
            return self.zero();
        }
        let mut n = r.numer().clone();
        let mut dn = r.denom().clone();
        let vn = strip_p(&mut n, &self.pz);
        let vd = strip_p(&mut dn, &self.pz);
        let m = &self.pow[self.prec as usize];
        let u = (n * mod_inverse(&dn, m)).mod_floor(m);
        let mut d = vec![BigInt::zero(); self.width()];
        d[0] = u;
        self.mk(d, vd as i64 - vn as i64, self.prec)
    }

    pub fn from_frac(&self, n: i64, d: i64) -> Elem {
        self.from_ratio(&BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// The element with the given digit vector (`t^j π^i` at `i * f + j`).
    pub fn from_digits(&self, digits: &[BigInt]) -> Elem {
        assert_eq!(digits.len(), self.width(), "digit vector length");
        self.mk(digits.to_vec(), 0, self.prec)
    }

    /// Element with explicit shift and relative precision (used by the dump parser).
    pub fn from_raw(&self, digits: Vec<BigInt>, s: i64, prec: u32) -> Elem {
        assert_eq!(digits.len(), self.width(), "digit vector length");
        self.mk(digits, s, prec.min(self.prec))
    }

    /// The uniformizer π (equal to `p` when there is no ramification).
    pub fn pi(&self) -> Elem {
        if self.e == 1 {
            return self.from_int(self.p as i64);
        }
        let mut d = vec![BigInt::zero(); self.width()];
        d[self.f] = BigInt::one();
        self.mk(d, 0, self.prec)
    }

    /// `π^k` for any integer `k`.
    pub fn pi_pow(&self, k: i64) -> Elem {
        if k >= 0 {
            self.pow(&self.pi(), k as u64)
        } else {
            self.pow(self.pi_inv(), (-k) as u64)
        }
    }

    pub fn pi_inv(&self) -> &Elem {
        self.pi_inv.as_ref().expect("initialized")
    }

    /// `p / π`, integral of valuation `1 - 1/e`.
    pub fn p_over_pi(&self) -> Elem {
        self.mul_p_pow(self.pi_inv(), 1)
    }

    /// Generator `t` of the unramified base.
    pub fn t(&self) -> Elem {
        let mut d = vec![BigInt::zero(); self.width()];
        if self.f == 1 {
            d[0] = BigInt::zero();
        } else {
            d[1] = BigInt::one();
        }
        self.mk(d, 0, self.prec)
    }

    /// Uniform random element of R_π at full precision.
    pub fn random_integral<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        let m = &self.pow[self.prec as usize];
        let d = (0..self.width())
            .map(|_| rng.gen_bigint_range(&BigInt::zero(), m))
            .collect();
        self.mk(d, 0, self.prec)
    }

    /// Uniform random element of the unramified base.
    pub fn random_base<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        let m = &self.pow[self.prec as usize];
        let mut d = vec![BigInt::zero(); self.width()];
        for slot in d.iter_mut().take(self.f) {
            *slot = rng.gen_bigint_range(&BigInt::zero(), m);
        }
        self.mk(d, 0, self.prec)
    }

    /// Random unit of R_π.
    pub fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Elem {
        loop {
            let x = self.random_integral(rng);
            if self.val_units(&x) == Some(0) {
                return x;
            }
        }
    }

    // ---- normalization ----

    fn mk(&self, mut d: Vec<BigInt>, s: i64, prec: u32) -> Elem {
        if prec == 0 {
            return self.zero_abs(-s);
        }
        let m = &self.pow[prec as usize];
        for x in d.iter_mut() {
            if x.is_negative() || *x >= *m {
                *x = x.mod_floor(m);
            }
        }
        let mut v = prec;
        for x in d.iter() {
            if !x.is_zero() {
                v = v.min(vp_capped(x, &self.pz, prec));
                if v == 0 {
                    break;
                }
            }
        }
        if v >= prec {
            return self.zero_abs(prec as i64 - s);
        }
        if v > 0 {
            let q = &self.pow[v as usize];
            for x in d.iter_mut() {
                *x /= q;
            }
        }
        Elem {
            d,
            s: s - v as i64,
            prec: prec - v,
        }
    }

    // ---- ring operations ----

    pub fn add(&self, x: &Elem, y: &Elem) -> Elem {
        let s = x.s.max(y.s);
        let sx = s - x.s;
        let sy = s - y.s;
        let prec = (x.prec as i64 + sx)
            .min(y.prec as i64 + sy)
            .min(self.prec as i64);
        if prec <= 0 {
            return self.zero_abs(prec - s);
        }
        let mut d = vec![BigInt::zero(); self.width()];
        for (z, sh) in [(x, sx), (y, sy)] {
            if z.is_zero() || sh >= prec {
                continue;
            }
            let scale = &self.pow[sh as usize];
            for (a, b) in d.iter_mut().zip(z.d.iter()) {
                *a += b * scale;
            }
        }
        self.mk(d, s, prec as u32)
    }

    pub fn neg(&self, x: &Elem) -> Elem {
        if x.is_zero() {
            return x.clone();
        }
        let d = x.d.iter().map(|a| -a).collect();
        self.mk(d, x.s, x.prec)
    }

    pub fn sub(&self, x: &Elem, y: &Elem) -> Elem {
        self.add(x, &self.neg(y))
    }

    pub fn mul(&self, x: &Elem, y: &Elem) -> Elem {
        match (x.is_zero(), y.is_zero()) {
            (true, true) => return self.zero_abs(x.abs_precision() + y.abs_precision()),
            (true, false) => return self.zero_abs(x.abs_precision() - y.s),
            (false, true) => return self.zero_abs(y.abs_precision() - x.s),
            _ => {}
        }
        let prec = x.prec.min(y.prec);
        let d = self.dmul(&x.d, &y.d);
        self.mk(d, x.s + y.s, prec)
    }

    pub fn mul_int(&self, x: &Elem, n: i64) -> Elem {
        self.mul(x, &self.from_int(n))
    }

    pub fn square(&self, x: &Elem) -> Elem {
        self.mul(x, x)
    }

    pub fn pow(&self, x: &Elem, mut k: u64) -> Elem {
        let mut result = self.one();
        let mut base = x.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = self.mul(&result, &base);
            }
            k >>= 1;
            if k > 0 {
                base = self.mul(&base, &base);
            }
        }
        result
    }

    /// `x * p^k` for any integer `k` (exact; only the shift changes).
    pub fn mul_p_pow(&self, x: &Elem, k: i64) -> Elem {
        if x.is_zero() {
            return self.zero_abs(x.abs_precision() + k);
        }
        Elem {
            d: x.d.clone(),
            s: x.s - k,
            prec: x.prec,
        }
    }

    pub fn div_p(&self, x: &Elem) -> Elem {
        self.mul_p_pow(x, -1)
    }

    pub fn div_pi(&self, x: &Elem) -> Elem {
        self.mul(x, self.pi_inv())
    }

    pub fn div_int(&self, x: &Elem, n: i64) -> Elem {
        self.mul(x, &self.from_frac(1, n))
    }

    /// Multiplicative inverse over the fraction field.
    pub fn inv(&self, x: &Elem) -> Result<Elem> {
        if x.is_zero() {
            return Err(Error::PrecisionExhausted(
                "inverse of an element that is zero at working precision".into(),
            ));
        }
        let k = self.digit_val_units(x) as i64;
        // x = p^(-s) π^k u with u a unit
        let u = self.mul(
            &Elem {
                d: x.d.clone(),
                s: 0,
                prec: x.prec,
            },
            &self.pi_pow(-k),
        );
        let uinv = self.unit_inverse(&u)?;
        let r = self.mul(&uinv, &self.pi_pow(-k));
        Ok(self.mul_p_pow(&r, x.s))
    }

    pub fn div(&self, x: &Elem, y: &Elem) -> Result<Elem> {
        Ok(self.mul(x, &self.inv(y)?))
    }

    fn unit_inverse(&self, u: &Elem) -> Result<Elem> {
        if u.s != 0 || self.val_units(u) != Some(0) {
            return Err(Error::Divisibility("not a unit".into()));
        }
        let f = self.f;
        let m = &self.pow[u.prec as usize];
        let c0: Vec<BigInt> = u.d[..f].to_vec();
        let y0 = self.uinv(&c0, m, u.prec);
        let mut d = vec![BigInt::zero(); self.width()];
        d[..f].clone_from_slice(&y0);
        let mut y = self.mk(d, 0, u.prec);
        let two = self.from_int(2);
        // each Newton step doubles the π-adic precision
        let target = (self.e as u64) * (u.prec as u64) + 1;
        let mut got = 1u64;
        while got < target {
            y = self.mul(&y, &self.sub(&two, &self.mul(u, &y)));
            got *= 2;
        }
        Ok(y)
    }

    /// The Frobenius lift: identity on π, the lifted Frobenius on the unramified digits.
    pub fn frobenius(&self, x: &Elem) -> Elem {
        if self.f == 1 || x.is_zero() {
            return x.clone();
        }
        let f = self.f;
        let mut d = vec![BigInt::zero(); self.width()];
        for i in 0..self.e {
            for j in 0..f {
                let a = &x.d[i * f + j];
                if a.is_zero() {
                    continue;
                }
                for (k, th) in self.frob[j].iter().enumerate() {
                    d[i * f + k] += a * th;
                }
            }
        }
        self.mk(d, x.s, x.prec)
    }

    /// `δ_p x = (φ(x) - x^p) / p`.
    pub fn delta_p(&self, x: &Elem) -> Result<Elem> {
        if x.abs_precision() <= 1 {
            return Err(Error::PrecisionExhausted(format!(
                "delta_p needs absolute precision > 1, input has {}",
                x.abs_precision()
            )));
        }
        let num = self.sub(&self.frobenius(x), &self.pow(x, self.p as u64));
        Ok(self.div_p(&num))
    }

    /// `δ_π x = (φ(x) - x^p) / π`.
    pub fn delta_pi(&self, x: &Elem) -> Result<Elem> {
        if x.abs_precision() <= 0 {
            return Err(Error::PrecisionExhausted(format!(
                "delta_pi needs positive absolute precision, input has {}",
                x.abs_precision()
            )));
        }
        let num = self.sub(&self.frobenius(x), &self.pow(x, self.p as u64));
        Ok(self.div_pi(&num))
    }

    /// `C_p(x, y) = (x^p + y^p - (x+y)^p) / p`.
    pub fn c_p(&self, x: &Elem, y: &Elem) -> Elem {
        let p = self.p as u64;
        let num = self.sub(
            &self.add(&self.pow(x, p), &self.pow(y, p)),
            &self.pow(&self.add(x, y), p),
        );
        self.div_p(&num)
    }

    /// `C_π(x, y) = (p/π) C_p(x, y)`.
    pub fn c_pi(&self, x: &Elem, y: &Elem) -> Elem {
        self.mul(&self.p_over_pi(), &self.c_p(x, y))
    }

    // ---- valuation ----

    /// Valuation of the digit vector alone, in units of `1/e` (in `[0, e)` for nonzero elements).
    fn digit_val_units(&self, x: &Elem) -> u32 {
        let f = self.f;
        let mut best = u32::MAX;
        for i in 0..self.e {
            let mut v = u32::MAX;
            for a in &x.d[i * f..(i + 1) * f] {
                if !a.is_zero() {
                    v = v.min(vp_capped(a, &self.pz, x.prec));
                }
            }
            if v != u32::MAX {
                best = best.min(v.saturating_mul(self.e as u32).saturating_add(i as u32));
            }
        }
        best
    }

    /// `v_p(x)` in units of `1/e`; `None` when `x` vanishes at working precision.
    pub fn val_units(&self, x: &Elem) -> Option<i64> {
        if x.is_zero() {
            return None;
        }
        Some(self.digit_val_units(x) as i64 - x.s * self.e as i64)
    }

    /// Exact `v_p(x)` as a multiple of `1/e`; `None` is the +∞ marker.
    pub fn valuation(&self, x: &Elem) -> Option<Ratio<i64>> {
        self.val_units(x).map(|v| Ratio::new(v, self.e as i64))
    }

    pub fn is_integral(&self, x: &Elem) -> bool {
        self.val_units(x).is_none_or(|v| v >= 0)
    }

    /// Forgets digits so that `x` is known at most modulo `p^k`.
    pub fn cap_abs(&self, x: &Elem, k: i64) -> Elem {
        if x.abs_precision() <= k {
            return x.clone();
        }
        let prec = k + x.s;
        if prec <= 0 {
            return self.zero_abs(k);
        }
        self.mk(x.d.clone(), x.s, prec as u32)
    }

    /// `Some(abs)` when `x == y` modulo `p^abs`, `None` when they differ.
    pub fn agree(&self, x: &Elem, y: &Elem) -> Option<i64> {
        let d = self.sub(x, y);
        if d.is_zero() {
            Some(d.abs_precision())
        } else {
            None
        }
    }

    pub fn eq(&self, x: &Elem, y: &Elem) -> bool {
        self.agree(x, y).is_some()
    }

    /// True if `x ≡ 0` modulo `π^k` (k in units of `1/e`).
    pub fn divisible_by_pi_pow(&self, x: &Elem, k: i64) -> bool {
        match self.val_units(x) {
            None => x.abs_precision() * self.e as i64 >= k,
            Some(v) => v >= k,
        }
    }

    // ---- trace ----

    /// `Tr(π^j)` for `j = 0..=2e-2`, from Newton's identities.
    pub fn trace_table(&self) -> &[BigInt] {
        &self.traces
    }

    /// R_p-linear trace `R_π -> R_p`; the result lies in the unramified base.
    pub fn trace(&self, x: &Elem) -> Elem {
        if x.is_zero() {
            return self.zero_abs(x.abs_precision());
        }
        let f = self.f;
        let mut d = vec![BigInt::zero(); self.width()];
        for i in 0..self.e {
            let t = &self.traces[i];
            for j in 0..f {
                d[j] += t * &x.d[i * f + j];
            }
        }
        self.mk(d, x.s, x.prec)
    }

    /// The Gram matrix `(Tr(π^{i+j}))_{0<=i,j<e}` over the integers.
    pub fn gram_matrix(&self) -> Vec<Vec<BigInt>> {
        (0..self.e)
            .map(|i| (0..self.e).map(|j| self.traces[i + j].clone()).collect())
            .collect()
    }

    /// `det(Tr(π^{i+j}))`; fails if it vanishes at working precision.
    pub fn gram_determinant(&self) -> Result<Elem> {
        let det = bareiss_det(self.gram_matrix());
        let x = self.from_bigint(&det);
        if x.is_zero() {
            return Err(Error::PrecisionExhausted(format!(
                "Gram determinant vanishes modulo p^{}",
                self.prec
            )));
        }
        Ok(x)
    }

    // ---- conversions and printing ----

    /// Integer representative when `x` is an integral element of Z_p (`e = f = 1` digits only).
    pub fn to_bigint(&self, x: &Elem) -> Option<BigInt> {
        if x.is_zero() {
            return Some(BigInt::zero());
        }
        if x.s > 0 || x.d.iter().skip(1).any(|a| !a.is_zero()) {
            return None;
        }
        Some(&x.d[0] * &self.pow[(-x.s).min(self.prec as i64) as usize])
    }

    /// Symmetric residue of an integral Z_p element modulo `p^k`.
    pub fn residue_symmetric(&self, x: &Elem, k: u32) -> Option<BigInt> {
        let n = self.to_bigint(x)?;
        let m = self.pz.pow(k);
        let r = n.mod_floor(&m);
        Some(if &r * 2 > m { r - m } else { r })
    }

    /// Stable text form: base-p digit strings (most significant first), one per
    /// `(π^i, t^j)` slot, with a `p^-s*` prefix for non-integral values.
    pub fn format(&self, x: &Elem) -> String {
        if x.is_zero() {
            return format!("O(p^{})", x.abs_precision());
        }
        let mut out = String::new();
        if x.s != 0 {
            let _ = write!(out, "p^{}*", -x.s);
        }
        let parts: Vec<String> =
            x.d.iter()
                .map(|a| base_p_digits(a, self.p, x.prec))
                .collect();
        if parts.len() == 1 {
            out.push_str(&parts[0]);
        } else {
            out.push('(');
            out.push_str(&parts.join(","));
            out.push(')');
        }
        out
    }

    /// Inverse of [`Field::format`].
    pub fn parse(&self, text: &str) -> Result<Elem> {
        let text = text.trim();
        let bad = |m: &str| Error::Malformed {
            line: 0,
            msg: format!("{m}: {text:?}"),
        };
        if let Some(rest) = text.strip_prefix("O(p^") {
            let k: i64 = rest
                .trim_end_matches(')')
                .parse()
                .map_err(|_| bad("zero"))?;
            return Ok(self.zero_abs(k));
        }
        let (s, body) = match text.strip_prefix("p^") {
            Some(rest) => {
                let (k, b) = rest.split_once('*').ok_or_else(|| bad("shift"))?;
                (-k.parse::<i64>().map_err(|_| bad("shift"))?, b)
            }
            None => (0, text),
        };
        let body = body.trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() != self.width() {
            return Err(bad("wrong number of digit groups"));
        }
        let prec = parts[0].len() as u32;
        let mut d = Vec::with_capacity(parts.len());
        for part in parts {
            if part.len() as u32 != prec {
                return Err(bad("digit groups of unequal length"));
            }
            let mut v = BigInt::zero();
            for ch in part.chars() {
                let dg = ch
                    .to_digit(36)
                    .filter(|&g| g < self.p)
                    .ok_or_else(|| bad("digit"))?;
                v = v * &self.pz + BigInt::from(dg);
            }
            d.push(v);
        }
        Ok(self.mk(d, s, prec.min(self.prec)))
    }

    // ---- internals ----

    fn umul(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let f = self.f;
        if f == 1 {
            return vec![&a[0] * &b[0]];
        }
        let mut c = vec![BigInt::zero(); 2 * f - 1];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                c[i + j] += x * y;
            }
        }
        for k in (f..2 * f - 1).rev() {
            let top = std::mem::take(&mut c[k]);
            if top.is_zero() {
                continue;
            }
            for (j, g) in self.modulus.iter().enumerate() {
                c[k - f + j] -= &top * g;
            }
        }
        c.truncate(f);
        c
    }

    fn umul_mod(&self, a: &[BigInt], b: &[BigInt], m: &BigInt) -> Vec<BigInt> {
        self.umul(a, b)
            .into_iter()
            .map(|x| x.mod_floor(m))
            .collect()
    }

    fn dmul(&self, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
        let (e, f) = (self.e, self.f);
        let mut c = vec![vec![BigInt::zero(); f]; 2 * e - 1];
        for i in 0..e {
            let ai = &a[i * f..(i + 1) * f];
            if ai.iter().all(Zero::is_zero) {
                continue;
            }
            for k in 0..e {
                let bk = &b[k * f..(k + 1) * f];
                if bk.iter().all(Zero::is_zero) {
                    continue;
                }
                for (slot, v) in c[i + k].iter_mut().zip(self.umul(ai, bk)) {
                    *slot += v;
                }
            }
        }
        let mut out = vec![BigInt::zero(); e * f];
        for k in 0..e {
            for j in 0..f {
                out[k * f + j] = std::mem::take(&mut c[k][j]);
            }
        }
        for k in e..2 * e - 1 {
            for (i, r) in self.red[k - e].iter().enumerate() {
                if r.is_zero() {
                    continue;
                }
                for j in 0..f {
                    if !c[k][j].is_zero() {
                        out[i * f + j] += r * &c[k][j];
                    }
                }
            }
        }
        out
    }

    /// `π^{e+k}` in the π-basis for `k = 0..e-1`.
    fn reduction_table(&self) -> Vec<Vec<BigInt>> {
        let e = self.e;
        let mut cur: Vec<BigInt> = self.epoly.iter().map(|c| -c).collect();
        let mut table = Vec::with_capacity(e.saturating_sub(1));
        for _ in 0..e.saturating_sub(1) {
            table.push(cur.clone());
            // multiply by π
            let top = cur[e - 1].clone();
            let mut next = vec![BigInt::zero(); e];
            for i in (1..e).rev() {
                next[i] = cur[i - 1].clone();
            }
            for i in 0..e {
                next[i] -= &top * &self.epoly[i];
            }
            cur = next;
        }
        table
    }

    fn newton_traces(&self) -> Vec<BigInt> {
        let e = self.e;
        let ec = &self.epoly; // E_0..E_{e-1}
        let mut ps = vec![BigInt::from(e as u64)];
        for k in 1..=(2 * e - 1) {
            let mut v = BigInt::zero();
            if k <= e {
                v -= BigInt::from(k as u64) * &ec[e - k];
                for j in 1..k {
                    v -= &ec[e - j] * &ps[k - j];
                }
            } else {
                for j in 1..=e {
                    v -= &ec[e - j] * &ps[k - j];
                }
            }
            ps.push(v);
        }
        ps.truncate(2 * e - 1);
        ps
    }

    fn uinv(&self, a: &[BigInt], m: &BigInt, prec: u32) -> Vec<BigInt> {
        let f = self.f;
        if f == 1 {
            return vec![mod_inverse(&a[0], m)];
        }
        // inverse mod p from a^(p^f - 2), then Newton to p^prec
        let pm = &self.pz;
        let mut e = self.pz.pow(f as u32) - 2u32;
        let mut base: Vec<BigInt> = a.iter().map(|x| x.mod_floor(pm)).collect();
        let mut y = vec![BigInt::zero(); f];
        y[0] = BigInt::one();
        while !e.is_zero() {
            if e.is_odd() {
                y = self.umul_mod(&y, &base, pm);
            }
            base = self.umul_mod(&base, &base, pm);
            e >>= 1;
        }
        let mut got = 1u32;
        while got < prec {
            let ay = self.umul_mod(a, &y, m);
            let mut two_minus: Vec<BigInt> = ay.iter().map(|x| -x).collect();
            two_minus[0] += 2;
            y = self.umul_mod(&y, &two_minus, m);
            got *= 2;
        }
        y.into_iter().map(|x| x.mod_floor(m)).collect()
    }

    /// Powers `θ^j`, `j < f`, of the Hensel-lifted root θ ≡ t^p of the modulus.
    fn frobenius_table(&self) -> Result<Vec<Vec<BigInt>>> {
        let f = self.f;
        let m = self.pow[self.prec as usize].clone();
        let mut one = vec![BigInt::zero(); f];
        one[0] = BigInt::one();
        if f == 1 {
            return Ok(vec![one]);
        }
        let mut t = vec![BigInt::zero(); f];
        t[1] = BigInt::one();
        let upow = |x: &[BigInt], k: u64| {
            let mut r = one.clone();
            for _ in 0..k {
                r = self.umul_mod(&r, x, &m);
            }
            r
        };
        let mut theta = upow(&t, self.p as u64);
        let eval = |x: &[BigInt]| {
            // g(x) and g'(x)
            let mut g = upow(x, f as u64);
            let mut dg: Vec<BigInt> = upow(x, f as u64 - 1).into_iter().map(|c| c * f).collect();
            for j in 0..f {
                let xj = upow(x, j as u64);
                for k in 0..f {
                    g[k] += &self.modulus[j] * &xj[k];
                }
                if j >= 1 {
                    let xj1 = upow(x, j as u64 - 1);
                    for k in 0..f {
                        dg[k] += &self.modulus[j] * &xj1[k] * j;
                    }
                }
            }
            (
                g.into_iter().map(|c| c.mod_floor(&m)).collect::<Vec<_>>(),
                dg.into_iter().map(|c| c.mod_floor(&m)).collect::<Vec<_>>(),
            )
        };
        let mut steps = 0;
        loop {
            let (g, dg) = eval(&theta);
            if g.iter().all(Zero::is_zero) {
                break;
            }
            steps += 1;
            if steps > 64 {
                return Err(Error::PrecisionExhausted(
                    "Frobenius lift did not converge".into(),
                ));
            }
            let inv = self.uinv(&dg, &m, self.prec);
            let corr = self.umul_mod(&g, &inv, &m);
            for (a, b) in theta.iter_mut().zip(corr) {
                *a = (&*a - b).mod_floor(&m);
            }
        }
        Ok((0..f).map(|j| upow(&theta, j as u64)).collect())
    }

    fn compute_pi_inv(&self) -> Result<Elem> {
        if self.e == 1 {
            return Ok(Elem {
                d: self.unit_digits(),
                s: 1,
                prec: self.prec,
            });
        }
        // π^e = -p U with U = Σ c_i π^i a unit, so 1/π = -π^{e-1} U^{-1} / p
        let c = &self.eis.as_ref().expect("ramified").eis_coeffs;
        let mut d = vec![BigInt::zero(); self.width()];
        for (i, ci) in c.iter().enumerate() {
            d[i * self.f] = ci.clone();
        }
        let u = self.mk(d, 0, self.prec);
        let uinv = self.unit_inverse(&u)?;
        let mut pe1 = vec![BigInt::zero(); self.width()];
        pe1[(self.e - 1) * self.f] = BigInt::one();
        let num = self.mul(&self.mk(pe1, 0, self.prec), &uinv);
        Ok(self.div_p(&self.neg(&num)))
    }

    fn unit_digits(&self) -> Vec<BigInt> {
        let mut d = vec![BigInt::zero(); self.width()];
        d[0] = BigInt::one();
        d
    }
}

/// Digits of `a` in base `p`, most significant first, padded to `len`.
fn base_p_digits(a: &BigInt, p: u32, len: u32) -> String {
    let mut digits = Vec::with_capacity(len as usize);
    let pz = BigInt::from(p);
    let mut v = a.clone();
    for _ in 0..len {
        let (q, r) = v.div_mod_floor(&pz);
        digits.push(std::char::from_digit(r.to_u32().unwrap_or(0), 36).unwrap_or('?'));
        v = q;
    }
    digits.iter().rev().collect()
}

fn vp_capped(a: &BigInt, p: &BigInt, cap: u32) -> u32 {
    let mut v = 0;
    let mut x = a.clone();
    while v < cap {
        let (q, r) = x.div_rem(p);
        if !r.is_zero() {
            break;
        }
        x = q;
        v += 1;
    }
    v
}

/// `v_p` of a nonzero integer.
pub fn vp_int(a: &BigInt, p: u32) -> u32 {
    assert!(!a.is_zero(), "valuation of zero");
    vp_capped(a, &BigInt::from(p), u32::MAX)
}

fn strip_p(a: &mut BigInt, p: &BigInt) -> u32 {
    let mut v = 0;
    loop {
        let (q, r) = a.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        *a = q;
        v += 1;
    }
}

/// Inverse of `a` modulo `m` (panics if not invertible).
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    if m.is_one() {
        return BigInt::zero();
    }
    let g = a.mod_floor(m).extended_gcd(m);
    assert!(g.gcd.is_one(), "not invertible");
    g.x.mod_floor(m)
}

/// Determinant of an integer matrix by fraction-free elimination.
pub fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// ---- small polynomial arithmetic over F_p, for choosing a modulus ----

fn fp_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    // b monic
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = *r.last().expect("nonempty");
        let shift = r.len() - 1 - db;
        if lead != 0 {
            for (i, &c) in b.iter().enumerate() {
                r[shift + i] = (r[shift + i] + p * p - lead * c % p) % p;
            }
        }
        r.pop();
    }
    while r.last() == Some(&0) {
        r.pop();
    }
    r
}

/// Irreducibility of the monic polynomial with low coefficients `g` (degree `g.len()`).
fn fp_irreducible(g: &[u64], p: u64) -> bool {
    let f = g.len();
    let mut full = g.to_vec();
    full.push(1);
    for deg in 1..=f / 2 {
        let count = p.pow(deg as u32);
        for idx in 0..count {
            let mut cand = Vec::with_capacity(deg + 1);
            let mut x = idx;
            for _ in 0..deg {
                cand.push(x % p);
                x /= p;
            }
            cand.push(1);
            if fp_rem(&full, &cand, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn find_irreducible(f: usize, p: u64) -> Option<Vec<i64>> {
    let count = p.checked_pow(f as u32)?;
    for idx in 0..count {
        let mut g = Vec::with_capacity(f);
        let mut x = idx;
        for _ in 0..f {
            g.push(x % p);
            x /= p;
        }
        if g[0] != 0 && fp_irreducible(&g, p) {
            return Some(g.into_iter().map(|c| c as i64).collect());
        }
    }
    None
}
