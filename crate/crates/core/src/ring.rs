//! Exact arithmetic in the truncated rings R_{N,M} = (Z/p^N)[u]/(u^M).
//!
//! Every element carries a precision ledger: a `Prec` describing the ambient
//! ring, and an effective u-precision `eff_u` recording how many leading
//! coefficients are reliable. Ring operations propagate the minimum; each
//! exact division by an Eisenstein polynomial of degree e costs e units of
//! `eff_u`. A computation whose answer would depend on coefficients at or
//! beyond `eff_u` must fail with `InsufficientPrecision` instead of guessing;
//! raising the truncation order and retrying is always sound.

use crate::error::{Error, Result};
use crate::zmod::{checked_pow, is_prime, Modulus};
use std::fmt;

/// Working precision: coefficients mod p^N, series truncated at u^M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prec {
    p: u64,
    n_p: u32,
    n_u: usize,
}

impl Prec {
    pub fn new(p: u64, n_p: u32, n_u: usize) -> Result<Prec> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("p = {p} is not prime")));
        }
        if n_p < 1 || n_u < 1 {
            return Err(Error::InvalidInput(
                "require p-adic precision N >= 1 and u-truncation M >= 1".into(),
            ));
        }
        // internal lattice lifts work mod p^(N+1)
        if checked_pow(p, n_p + 1).is_none() {
            return Err(Error::InvalidInput(format!("p^(N+1) = {p}^{} overflows", n_p + 1)));
        }
        Ok(Prec { p, n_p, n_u })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// N: exponent of the coefficient modulus p^N.
    pub fn n_p(&self) -> u32 {
        self.n_p
    }

    /// M: the u-adic truncation order.
    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn modulus(&self) -> Modulus {
        Modulus::new(self.p, self.n_p)
    }

    /// Same coefficient ring, different truncation order.
    pub fn with_n_u(&self, n_u: usize) -> Prec {
        Prec { n_u, ..*self }
    }

    fn check_same(&self, other: &Prec) -> Result<()> {
        if self != other {
            return Err(Error::PrecMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// An element of (Z/p^N)[u]/(u^M) with its reliability window.
///
/// `coeffs` always has length M; coefficients at index >= `eff_u` are
/// unreliable and must not influence any reported result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesElt {
    coeffs: Vec<u64>,
    prec: Prec,
    eff_u: usize,
}

impl SeriesElt {
    pub fn from_coeffs(prec: Prec, coeffs: &[u64]) -> SeriesElt {
        let m = prec.modulus();
        let mut c = vec![0u64; prec.n_u()];
        for (i, &x) in coeffs.iter().take(prec.n_u()).enumerate() {
            c[i] = m.reduce(x);
        }
        SeriesElt {
            coeffs: c,
            prec,
            eff_u: prec.n_u(),
        }
    }

    pub fn zero(prec: Prec) -> SeriesElt {
        SeriesElt::from_coeffs(prec, &[])
    }

    pub fn one(prec: Prec) -> SeriesElt {
        SeriesElt::from_coeffs(prec, &[1])
    }

    pub fn constant(prec: Prec, c: u64) -> SeriesElt {
        SeriesElt::from_coeffs(prec, &[c])
    }

    /// c * u^k.
    pub fn monomial(prec: Prec, c: u64, k: usize) -> SeriesElt {
        let mut v = vec![0u64; prec.n_u()];
        if k < prec.n_u() {
            v[k] = prec.modulus().reduce(c);
        }
        SeriesElt {
            coeffs: v,
            prec,
            eff_u: prec.n_u(),
        }
    }

    pub fn prec(&self) -> Prec {
        self.prec
    }

    pub fn eff_u(&self) -> usize {
        self.eff_u
    }

    /// Reliable coefficient access; reading past the effective window is a
    /// precision error, never a guess.
    pub fn coeff(&self, i: usize) -> Result<u64> {
        if i >= self.eff_u {
            return Err(Error::InsufficientPrecision(format!(
                "coefficient u^{i} requested, reliable window is [0, {})",
                self.eff_u
            )));
        }
        Ok(self.coeffs[i])
    }

    /// Raw coefficient, including the unreliable tail. Internal use only.
    pub(crate) fn coeff_raw(&self, i: usize) -> u64 {
        self.coeffs[i]
    }

    pub(crate) fn coeffs_raw(&self) -> &[u64] {
        &self.coeffs
    }

    #[cfg(test)]
    pub(crate) fn with_eff(mut self, eff: usize) -> SeriesElt {
        self.eff_u = eff.min(self.prec.n_u());
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// True iff the reliable window is the whole ring.
    pub fn is_full_precision(&self) -> bool {
        self.eff_u == self.prec.n_u()
    }

    pub fn add(&self, other: &SeriesElt) -> Result<SeriesElt> {
        self.prec.check_same(&other.prec)?;
        let m = self.prec.modulus();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.add(a, b))
            .collect();
        Ok(SeriesElt {
            coeffs,
            prec: self.prec,
            eff_u: self.eff_u.min(other.eff_u),
        })
    }

    pub fn sub(&self, other: &SeriesElt) -> Result<SeriesElt> {
        self.prec.check_same(&other.prec)?;
        let m = self.prec.modulus();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| m.sub(a, b))
            .collect();
        Ok(SeriesElt {
            coeffs,
            prec: self.prec,
            eff_u: self.eff_u.min(other.eff_u),
        })
    }

    pub fn neg(&self) -> SeriesElt {
        let m = self.prec.modulus();
        SeriesElt {
            coeffs: self.coeffs.iter().map(|&a| m.neg(a)).collect(),
            prec: self.prec,
            eff_u: self.eff_u,
        }
    }

    pub fn mul(&self, other: &SeriesElt) -> Result<SeriesElt> {
        self.prec.check_same(&other.prec)?;
        let m = self.prec.modulus();
        let n = self.prec.n_u();
        let mut acc = vec![0u128; n];
        let md = m.order() as u128;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                acc[i + j] = (acc[i + j] + a as u128 * b as u128) % md;
            }
        }
        Ok(SeriesElt {
            coeffs: acc.into_iter().map(|x| x as u64).collect(),
            prec: self.prec,
            eff_u: self.eff_u.min(other.eff_u),
        })
    }

    pub fn scale(&self, c: u64) -> SeriesElt {
        let m = self.prec.modulus();
        SeriesElt {
            coeffs: self.coeffs.iter().map(|&a| m.mul(a, c)).collect(),
            prec: self.prec,
            eff_u: self.eff_u,
        }
    }

    /// Multiplication by u^k (coefficient shift; drops the top k terms,
    /// which is exact in the truncated ring).
    pub fn mul_u_pow(&self, k: usize) -> SeriesElt {
        let n = self.prec.n_u();
        let mut coeffs = vec![0u64; n];
        for i in 0..n.saturating_sub(k) {
            coeffs[i + k] = self.coeffs[i];
        }
        SeriesElt {
            coeffs,
            prec: self.prec,
            eff_u: (self.eff_u + k).min(n),
        }
    }

    /// The ring endomorphism u -> u^p (the coefficient Frobenius on W(F_p)
    /// is the identity).
    pub fn frobenius(&self) -> SeriesElt {
        let n = self.prec.n_u();
        let p = self.prec.p() as usize;
        let mut coeffs = vec![0u64; n];
        for i in 0..n {
            let t = i.checked_mul(p);
            match t {
                Some(t) if t < n => coeffs[t] = self.coeffs[i],
                _ => break,
            }
        }
        let eff = if self.eff_u >= n {
            n
        } else {
            (self.eff_u.saturating_mul(p)).min(n)
        };
        SeriesElt {
            coeffs,
            prec: self.prec,
            eff_u: eff,
        }
    }

    /// True iff the element is invertible in R_{N,M}, i.e. the constant
    /// coefficient is a unit mod p^N.
    pub fn eval_is_unit(&self) -> bool {
        self.prec.modulus().is_unit(self.coeffs[0])
    }

    /// Inverse of a unit (constant coefficient a unit): standard power
    /// series inversion, exact in the truncated ring.
    pub fn inverse(&self) -> Result<SeriesElt> {
        if !self.eval_is_unit() {
            return Err(Error::InvalidInput(
                "inverse of a non-unit in R_{N,M}".into(),
            ));
        }
        let m = self.prec.modulus();
        let n = self.prec.n_u();
        let c0inv = m.inv(self.coeffs[0]);
        let mut inv = vec![0u64; n];
        inv[0] = c0inv;
        for i in 1..n {
            // coefficient i of self*inv must vanish
            let mut s: u128 = 0;
            let md = m.order() as u128;
            for j in 1..=i {
                s = (s + self.coeffs[j] as u128 * inv[i - j] as u128) % md;
            }
            inv[i] = m.mul(m.neg(s as u64), c0inv);
        }
        Ok(SeriesElt {
            coeffs: inv,
            prec: self.prec,
            eff_u: self.eff_u,
        })
    }

    /// Evaluate mod E for a degree-one Eisenstein E = u - pi: substitution
    /// u -> pi. Reliable mod p^N only when eff_u >= N, enforced here.
    pub fn eval_at_uniformizer(&self, pi: u64) -> Result<u64> {
        if self.eff_u < self.prec.n_p() as usize {
            return Err(Error::InsufficientPrecision(format!(
                "evaluation at the uniformizer needs eff_u >= N = {}, have {}",
                self.prec.n_p(),
                self.eff_u
            )));
        }
        let m = self.prec.modulus();
        let mut acc = 0u64;
        let mut pw = 1u64;
        for i in 0..self.eff_u.min(self.prec.n_u()) {
            acc = m.add(acc, m.mul(self.coeffs[i], pw));
            pw = m.mul(pw, m.reduce(pi));
            if pw == 0 && acc != 0 {
                // remaining terms all vanish mod p^N
                break;
            }
            if pw == 0 {
                break;
            }
        }
        Ok(acc)
    }
}

impl fmt::Display for SeriesElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*u")?,
                _ => write!(f, "{c}*u^{i}")?,
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        if !self.is_full_precision() {
            write!(f, " (eff_u={})", self.eff_u)?;
        }
        Ok(())
    }
}

/// Eisenstein polynomial E(u) = u^e + c_{e-1} u^{e-1} + ... + c_0, monic,
/// with v_p(c_i) >= 1 and v_p(c_0) = 1. This is the distinguished element d
/// of the isogeny triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EisensteinPoly {
    /// coefficients c_0, ..., c_e with c_e = 1, reduced mod p^N
    coeffs: Vec<u64>,
    p: u64,
    n_p: u32,
}

/// Flavor of the crystallinity assertion; fixes the amplification constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// crystalline: a = E'(pi)
    Crys,
    /// semi-stable (log-crystalline): a = pi E'(pi)
    Log,
}

impl EisensteinPoly {
    pub fn new(p: u64, n_p: u32, coeffs: &[u64]) -> Result<EisensteinPoly> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput(
                "Eisenstein polynomial needs degree e >= 1".into(),
            ));
        }
        let m = Modulus::new(p, n_p);
        let c: Vec<u64> = coeffs.iter().map(|&x| m.reduce(x)).collect();
        let e = c.len() - 1;
        if c[e] != 1 {
            return Err(Error::InvalidInput("Eisenstein polynomial must be monic".into()));
        }
        for (i, &ci) in c.iter().enumerate().take(e) {
            if m.val(ci) < 1 {
                return Err(Error::InvalidInput(format!(
                    "coefficient of u^{i} must be divisible by p"
                )));
            }
        }
        if m.val(c[0]) != 1 {
            return Err(Error::InvalidInput(
                "constant term must have p-adic valuation exactly 1".into(),
            ));
        }
        Ok(EisensteinPoly { coeffs: c, p, n_p })
    }

    /// The default distinguished element E = u - p.
    pub fn u_minus_p(p: u64, n_p: u32) -> EisensteinPoly {
        let m = Modulus::new(p, n_p);
        EisensteinPoly::new(p, n_p, &[m.neg(p), 1]).expect("u - p is Eisenstein")
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n_p(&self) -> u32 {
        self.n_p
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// For e = 1, E = u - pi with pi = -c_0 (a uniformizer mod p^N).
    pub fn uniformizer(&self) -> Result<u64> {
        if self.degree() != 1 {
            return Err(Error::NotApplicable(
                "uniformizer in Z/p^N only available for degree-one E".into(),
            ));
        }
        Ok(Modulus::new(self.p, self.n_p).neg(self.coeffs[0]))
    }

    /// The amplification constant a = E'(pi) (crys) or pi E'(pi) (log),
    /// as an element of Z/p^N. Only meaningful when e = 1, where E' = 1.
    pub fn amplification_constant(&self, flavor: Flavor) -> Result<u64> {
        let pi = self.uniformizer()?;
        Ok(match flavor {
            Flavor::Crys => 1,
            Flavor::Log => pi,
        })
    }

    pub fn as_series(&self, prec: Prec) -> Result<SeriesElt> {
        if prec.p() != self.p || prec.n_p() != self.n_p {
            return Err(Error::PrecMismatch(
                "Eisenstein polynomial and Prec disagree on p^N".into(),
            ));
        }
        if self.degree() >= prec.n_u() {
            return Err(Error::InsufficientPrecision(format!(
                "E has degree {} but the truncation order is {}",
                self.degree(),
                prec.n_u()
            )));
        }
        Ok(SeriesElt::from_coeffs(prec, &self.coeffs))
    }

    /// E^n as an element of R_{N,M} (truncation of the true power; exact).
    pub fn pow_series(&self, prec: Prec, n: u32) -> Result<SeriesElt> {
        let e = self.as_series(prec)?;
        let mut acc = SeriesElt::one(prec);
        for _ in 0..n {
            acc = acc.mul(&e)?;
        }
        Ok(acc)
    }
}

/// One Weierstrass division step: f = q*E + r with deg r < e, computed by
/// the distinguished-polynomial reduction u^e = E + p*w. Terminates because
/// the high part gains a factor p each round. The whole iteration stays
/// inside the degree window, so it agrees with polynomial division of the
/// canonical representative.
fn divide_once(f: &SeriesElt, e_poly: &EisensteinPoly) -> (SeriesElt, SeriesElt) {
    let prec = f.prec();
    let m = prec.modulus();
    let n = prec.n_u();
    let e = e_poly.degree();
    // w = -(E - u^e)/1, i.e. u^e = E + w with w = -(lower part of E); each
    // coefficient of w is divisible by p.
    let mut w = vec![0u64; e];
    for i in 0..e {
        w[i] = m.neg(e_poly.coeffs[i]);
    }
    let mut g = f.coeffs.clone();
    let mut q = vec![0u64; n];
    loop {
        // split g = low + u^e * high
        let mut high_nonzero = false;
        for &c in g.iter().skip(e) {
            if c != 0 {
                high_nonzero = true;
                break;
            }
        }
        if !high_nonzero {
            break;
        }
        // q += high
        for i in e..n {
            q[i - e] = m.add(q[i - e], g[i]);
        }
        // g = low + w*high, where deg(w*high) <= (e-1) + (n-1-e) < n
        let mut next = vec![0u64; n];
        next[..e].copy_from_slice(&g[..e]);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0 {
                continue;
            }
            for j in e..n {
                if g[j] == 0 {
                    continue;
                }
                let t = i + (j - e);
                if t < n {
                    next[t] = m.add(next[t], m.mul(wi, g[j]));
                }
            }
        }
        g = next;
    }
    let q_eff = f.eff_u().saturating_sub(e);
    let mut r = vec![0u64; n];
    r[..e].copy_from_slice(&g[..e]);
    (
        SeriesElt {
            coeffs: q,
            prec,
            eff_u: q_eff,
        },
        SeriesElt {
            coeffs: r,
            prec,
            eff_u: f.eff_u(),
        },
    )
}

/// Classify a Weierstrass remainder against the reliability of the input:
/// coefficients of the remainder are only trustworthy modulo
/// p^min(N, floor(eff/e)), since the unknown tail beyond the effective
/// window feeds the remainder with that much p-divisibility.
fn remainder_state(r: &SeriesElt, eff_in: usize, e: usize) -> Result<bool> {
    if r.is_zero() {
        return Ok(true);
    }
    let m = r.prec().modulus();
    let threshold = ((eff_in / e) as u32).min(r.prec().n_p());
    let min_val = r
        .coeffs
        .iter()
        .map(|&c| m.val(c))
        .min()
        .unwrap_or(r.prec().n_p());
    if min_val < threshold {
        Ok(false)
    } else {
        Err(Error::InsufficientPrecision(format!(
            "division remainder is nonzero only at p-valuation >= {threshold}, \
             below the certifiable window"
        )))
    }
}

/// Divide f by E^n, certifying exactness.
///
/// Returns (q, exact). `exact` is true iff every successive Weierstrass
/// remainder vanishes at the working precision; when exact, f = E^n * q up
/// to the recorded effective precision, and eff_u(q) = eff_u(f) - n*e. A
/// remainder that is nonzero only beyond the certifiable p-adic window is
/// neither: the call fails with `InsufficientPrecision`.
pub fn weierstrass_divide(
    f: &SeriesElt,
    e_poly: &EisensteinPoly,
    n: u32,
) -> Result<(SeriesElt, bool)> {
    let prec = f.prec();
    if prec.p() != e_poly.p || prec.n_p() != e_poly.n_p {
        return Err(Error::PrecMismatch(
            "series and Eisenstein polynomial disagree on p^N".into(),
        ));
    }
    let mut cur = f.clone();
    let mut exact = true;
    for _ in 0..n {
        if cur.eff_u() < e_poly.degree() {
            return Err(Error::InsufficientPrecision(format!(
                "dividing by E^{n} exhausts the effective u-precision (eff_u = {})",
                f.eff_u()
            )));
        }
        let eff_in = cur.eff_u();
        let (q, r) = divide_once(&cur, e_poly);
        if !remainder_state(&r, eff_in, e_poly.degree())? {
            exact = false;
        }
        cur = q;
    }
    Ok((cur, exact))
}

/// Divide in a context demanding exactness; carries the first nonzero
/// remainder in the error.
pub fn weierstrass_divide_exact(
    f: &SeriesElt,
    e_poly: &EisensteinPoly,
    n: u32,
) -> Result<SeriesElt> {
    let mut cur = f.clone();
    for step in 0..n {
        if cur.eff_u() < e_poly.degree() {
            return Err(Error::InsufficientPrecision(format!(
                "dividing by E^{n} exhausts the effective u-precision"
            )));
        }
        let eff_in = cur.eff_u();
        let (q, r) = divide_once(&cur, e_poly);
        if !remainder_state(&r, eff_in, e_poly.degree())? {
            return Err(Error::InexactDivision(format!(
                "remainder {r} at division step {} of {n}",
                step + 1
            )));
        }
        cur = q;
    }
    Ok(cur)
}
