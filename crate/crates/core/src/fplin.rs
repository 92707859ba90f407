//! Mod-p machinery: polynomials in k_M = F_p[u]/(u^W), F_p-subspaces of a
//! flattened window, and the certified Smith decomposition over the DVR
//! k[[u]] truncated at the window.

use crate::error::{Error, Result};
use crate::zmod::Modulus;

/// An element of F_p[u]/(u^W); coefficients reduced mod p, length W.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpPoly {
    pub(crate) coeffs: Vec<u64>,
    pub(crate) p: u64,
}

impl FpPoly {
    pub fn from_coeffs(p: u64, window: usize, coeffs: &[u64]) -> FpPoly {
        let mut c = vec![0u64; window];
        for (i, &x) in coeffs.iter().take(window).enumerate() {
            c[i] = x % p;
        }
        FpPoly { coeffs: c, p }
    }

    pub fn zero(p: u64, window: usize) -> FpPoly {
        FpPoly {
            coeffs: vec![0; window],
            p,
        }
    }

    pub fn one(p: u64, window: usize) -> FpPoly {
        FpPoly::from_coeffs(p, window, &[1])
    }

    pub fn monomial(p: u64, window: usize, c: u64, k: usize) -> FpPoly {
        let mut v = vec![0u64; window];
        if k < window {
            v[k] = c % p;
        }
        FpPoly { coeffs: v, p }
    }

    pub fn window(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// u-adic valuation; returns the window size for zero.
    pub fn valuation(&self) -> usize {
        self.coeffs
            .iter()
            .position(|&c| c != 0)
            .unwrap_or(self.coeffs.len())
    }

    pub fn is_unit(&self) -> bool {
        self.coeffs[0] != 0
    }

    pub fn add(&self, other: &FpPoly) -> FpPoly {
        FpPoly {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| (a + b) % self.p)
                .collect(),
            p: self.p,
        }
    }

    pub fn sub(&self, other: &FpPoly) -> FpPoly {
        FpPoly {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| (a + self.p - b) % self.p)
                .collect(),
            p: self.p,
        }
    }

    pub fn neg(&self) -> FpPoly {
        FpPoly {
            coeffs: self.coeffs.iter().map(|&a| (self.p - a) % self.p).collect(),
            p: self.p,
        }
    }

    pub fn mul(&self, other: &FpPoly) -> FpPoly {
        let w = self.window();
        let mut out = vec![0u64; w];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if i + j >= w {
                    break;
                }
                out[i + j] = (out[i + j] + a * b) % self.p;
            }
        }
        FpPoly {
            coeffs: out,
            p: self.p,
        }
    }

    pub fn scale(&self, c: u64) -> FpPoly {
        FpPoly {
            coeffs: self.coeffs.iter().map(|&a| a * c % self.p).collect(),
            p: self.p,
        }
    }

    pub fn mul_u_pow(&self, k: usize) -> FpPoly {
        let w = self.window();
        let mut out = vec![0u64; w];
        for i in 0..w.saturating_sub(k) {
            out[i + k] = self.coeffs[i];
        }
        FpPoly {
            coeffs: out,
            p: self.p,
        }
    }

    /// exact division by u^k; requires valuation >= k. The top k window
    /// coefficients of the quotient are unknown and set to zero; callers
    /// keep enough window margin that this never reaches reported data.
    pub fn div_u_pow(&self, k: usize) -> Result<FpPoly> {
        if self.valuation() < k {
            return Err(Error::InexactDivision(format!(
                "u-valuation {} < {k}",
                self.valuation()
            )));
        }
        let w = self.window();
        let mut out = vec![0u64; w];
        for i in k..w {
            out[i - k] = self.coeffs[i];
        }
        Ok(FpPoly {
            coeffs: out,
            p: self.p,
        })
    }

    /// inverse of a unit, exact in the window
    pub fn inverse(&self) -> Result<FpPoly> {
        if !self.is_unit() {
            return Err(Error::InvalidInput("inverse of a non-unit in k_M".into()));
        }
        let w = self.window();
        let fp = Modulus::new(self.p, 1);
        let c0inv = fp.inv(self.coeffs[0]);
        let mut inv = vec![0u64; w];
        inv[0] = c0inv;
        for i in 1..w {
            let mut s = 0u64;
            for j in 1..=i {
                s = (s + self.coeffs[j] * inv[i - j]) % self.p;
            }
            inv[i] = (self.p - s) % self.p * c0inv % self.p;
        }
        Ok(FpPoly {
            coeffs: inv,
            p: self.p,
        })
    }

    /// substitution u -> u^p
    pub fn frobenius(&self) -> FpPoly {
        let w = self.window();
        let p = self.p as usize;
        let mut out = vec![0u64; w];
        for i in 0..w {
            match i.checked_mul(p) {
                Some(t) if t < w => out[t] = self.coeffs[i],
                _ => break,
            }
        }
        FpPoly {
            coeffs: out,
            p: self.p,
        }
    }

    /// re-truncate into a (smaller or larger) window
    pub fn resize(&self, window: usize) -> FpPoly {
        FpPoly::from_coeffs(self.p, window, &self.coeffs)
    }

    pub fn coeff(&self, i: usize) -> u64 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }
}

impl std::fmt::Display for FpPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
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
                1 => write!(f, "{c}u")?,
                _ => write!(f, "{c}u^{i}")?,
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// An F_p-subspace of F_p^D in reduced row echelon form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpSpace {
    p: u64,
    dim_ambient: usize,
    rows: Vec<Vec<u64>>,
}

impl FpSpace {
    pub fn from_gens(p: u64, dim_ambient: usize, gens: &[Vec<u64>]) -> FpSpace {
        let mut rows: Vec<Vec<u64>> = gens
            .iter()
            .map(|g| {
                assert_eq!(g.len(), dim_ambient);
                g.iter().map(|&x| x % p).collect()
            })
            .collect();
        rref(p, &mut rows);
        FpSpace {
            p,
            dim_ambient,
            rows,
        }
    }

    pub fn zero(p: u64, dim_ambient: usize) -> FpSpace {
        FpSpace {
            p,
            dim_ambient,
            rows: Vec::new(),
        }
    }

    pub fn full(p: u64, dim_ambient: usize) -> FpSpace {
        let gens: Vec<Vec<u64>> = (0..dim_ambient)
            .map(|i| {
                let mut v = vec![0u64; dim_ambient];
                v[i] = 1;
                v
            })
            .collect();
        FpSpace::from_gens(p, dim_ambient, &gens)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn dim_ambient(&self) -> usize {
        self.dim_ambient
    }

    pub fn basis(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn contains_vec(&self, v: &[u64]) -> bool {
        let mut w: Vec<u64> = v.iter().map(|&x| x % self.p).collect();
        reduce_vec(self.p, &self.rows, &mut w);
        w.iter().all(|&x| x == 0)
    }

    pub fn contains(&self, other: &FpSpace) -> bool {
        other.rows.iter().all(|r| self.contains_vec(r))
    }

    pub fn equals(&self, other: &FpSpace) -> bool {
        self.rows == other.rows
    }

    pub fn sum(&self, other: &FpSpace) -> FpSpace {
        let mut gens = self.rows.clone();
        gens.extend(other.rows.clone());
        FpSpace::from_gens(self.p, self.dim_ambient, &gens)
    }

    pub fn intersect(&self, other: &FpSpace) -> FpSpace {
        let n = self.dim_ambient;
        let mut stacked: Vec<Vec<u64>> = Vec::new();
        for r in &self.rows {
            let mut v = r.clone();
            v.extend_from_slice(r);
            stacked.push(v);
        }
        for r in &other.rows {
            let mut v = r.clone();
            v.extend(std::iter::repeat(0).take(n));
            stacked.push(v);
        }
        rref(self.p, &mut stacked);
        let gens: Vec<Vec<u64>> = stacked
            .iter()
            .filter(|r| r[..n].iter().all(|&x| x == 0))
            .map(|r| r[n..].to_vec())
            .collect();
        FpSpace::from_gens(self.p, n, &gens)
    }

    /// image of the space under a linear map given on basis vectors
    pub fn image<F: Fn(&[u64]) -> Vec<u64>>(&self, dim_target: usize, f: F) -> FpSpace {
        let gens: Vec<Vec<u64>> = self.rows.iter().map(|r| f(r)).collect();
        FpSpace::from_gens(self.p, dim_target, &gens)
    }
}

/// reduced row echelon form over F_p, in place; zero rows removed
pub fn rref(p: u64, rows: &mut Vec<Vec<u64>>) {
    let fp = Modulus::new(p, 1);
    rows.retain(|r| r.iter().any(|&x| x != 0));
    if rows.is_empty() {
        return;
    }
    let ncols = rows[0].len();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (col, row index)
    let mut r0 = 0usize;
    for c in 0..ncols {
        let Some(sel) = (r0..rows.len()).find(|&i| rows[i][c] != 0) else {
            continue;
        };
        rows.swap(r0, sel);
        let inv = fp.inv(rows[r0][c]);
        for x in rows[r0].iter_mut() {
            *x = *x * inv % p;
        }
        for i in 0..rows.len() {
            if i != r0 && rows[i][c] != 0 {
                let f = rows[i][c];
                for j in 0..ncols {
                    let s = rows[r0][j] * f % p;
                    rows[i][j] = (rows[i][j] + p - s) % p;
                }
            }
        }
        pivots.push((c, r0));
        r0 += 1;
        if r0 == rows.len() {
            break;
        }
    }
    rows.retain(|r| r.iter().any(|&x| x != 0));
}

fn reduce_vec(p: u64, rref_rows: &[Vec<u64>], v: &mut [u64]) {
    for r in rref_rows {
        let c = r.iter().position(|&x| x == 1).unwrap_or(0);
        let lead = r.iter().position(|&x| x != 0);
        let Some(c0) = lead else { continue };
        let _ = c;
        if v[c0] != 0 {
            let f = v[c0]; // pivot entry is 1 in rref
            for (x, &y) in v.iter_mut().zip(r) {
                *x = (*x + p - y * f % p) % p;
            }
        }
    }
}

/// A certified Smith decomposition A = X diag(u^{a_1},...,u^{a_d}) Y over
/// k_M, with X and Y of unit determinant and a_1 <= ... <= a_d. The
/// exponents are the elementary divisors and are unique; X and Y are not.
#[derive(Debug, Clone)]
pub struct SmithDecompDvr {
    pub exponents: Vec<usize>,
    pub x: Vec<Vec<FpPoly>>,
    pub y: Vec<Vec<FpPoly>>,
}

/// Smith decomposition of a square matrix over k_M = F_p[u]/(u^M).
/// Requires det(A) nonzero at the truncation, i.e. the algorithm must place
/// all d pivots inside the window; otherwise the determinant valuation
/// reaches M and the input is rejected as insufficiently precise.
pub fn smith_dvr(a: &[Vec<FpPoly>]) -> Result<SmithDecompDvr> {
    let d = a.len();
    if d == 0 {
        return Ok(SmithDecompDvr {
            exponents: vec![],
            x: vec![],
            y: vec![],
        });
    }
    let p = a[0][0].p;
    let w = a[0][0].window();
    for row in a {
        if row.len() != d {
            return Err(Error::ShapeMismatch("smith_dvr needs a square matrix".into()));
        }
    }
    let mut m: Vec<Vec<FpPoly>> = a.to_vec();
    let mut x = identity_fp(p, w, d);
    let mut y = identity_fp(p, w, d);
    let mut exps = Vec::with_capacity(d);

    for t in 0..d {
        // pivot of minimal u-valuation in the trailing submatrix
        let mut best: Option<(usize, usize, usize)> = None;
        for i in t..d {
            for j in t..d {
                if !m[i][j].is_zero() {
                    let v = m[i][j].valuation();
                    if best.map_or(true, |(_, _, bv)| v < bv) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let Some((pi, pj, pv)) = best else {
            return Err(Error::InsufficientPrecision(format!(
                "det vanishes at truncation: only {t} of {d} pivots found in the u^{w} window"
            )));
        };
        // move pivot to (t, t); X <- X * P acquires the row swap inverse
        if pi != t {
            m.swap(t, pi);
            for r in x.iter_mut() {
                r.swap(t, pi);
            }
        }
        if pj != t {
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            y.swap(t, pj);
        }
        // normalize pivot to exactly u^pv: scale row t by the unit inverse
        let unit = m[t][t].div_u_pow(pv)?;
        let uinv = unit.inverse()?;
        for j in 0..d {
            m[t][j] = m[t][j].mul(&uinv);
        }
        // X <- X * diag(..., unit at t, ...)
        for r in x.iter_mut() {
            r[t] = r[t].mul(&unit);
        }
        // clear column t below/above
        for i in 0..d {
            if i != t && !m[i][t].is_zero() {
                let c = m[i][t].div_u_pow(pv)?;
                for j in 0..d {
                    let s = c.mul(&m[t][j]);
                    m[i][j] = m[i][j].sub(&s);
                }
                // row_i -= c row_t  =>  X col_t += c * X col_i
                for r in x.iter_mut() {
                    let s = c.mul(&r[i]);
                    r[t] = r[t].add(&s);
                }
            }
        }
        // clear row t
        for j in 0..d {
            if j != t && !m[t][j].is_zero() {
                let c = m[t][j].div_u_pow(pv)?;
                for row in m.iter_mut() {
                    let s = c.mul(&row[t]);
                    row[j] = row[j].sub(&s);
                }
                // col_j -= c col_t  =>  Y row_t += c * Y row_j
                let (rt, rj) = if t < j {
                    let (h, tl) = y.split_at_mut(j);
                    (&mut h[t], &tl[0])
                } else {
                    let (h, tl) = y.split_at_mut(t);
                    (&mut tl[0], &h[j])
                };
                for (a_, b_) in rt.iter_mut().zip(rj.iter()) {
                    let s = c.mul(b_);
                    *a_ = a_.add(&s);
                }
            }
        }
        exps.push(pv);
    }

    // certification: residual A - X diag(u^a) Y must vanish identically
    let mut xd = vec![vec![FpPoly::zero(p, w); d]; d];
    for i in 0..d {
        for j in 0..d {
            xd[i][j] = x[i][j].mul_u_pow(exps[j]);
        }
    }
    for i in 0..d {
        for j in 0..d {
            let mut acc = FpPoly::zero(p, w);
            for k in 0..d {
                acc = acc.add(&xd[i][k].mul(&y[k][j]));
            }
            if acc.sub(&a[i][j]).is_zero() == false {
                return Err(Error::InternalConsistency(format!(
                    "smith_dvr residual nonzero at ({i},{j})"
                )));
            }
        }
    }
    // X and Y must be invertible: constant-term determinant nonzero
    for (mat, name) in [(&x, "X"), (&y, "Y")] {
        if !unit_det(mat) {
            return Err(Error::InternalConsistency(format!(
                "smith_dvr transform {name} is not invertible"
            )));
        }
    }
    Ok(SmithDecompDvr {
        exponents: exps,
        x,
        y,
    })
}

/// determinant of the constant-term matrix is nonzero mod p
pub fn unit_det(mat: &[Vec<FpPoly>]) -> bool {
    let d = mat.len();
    if d == 0 {
        return true;
    }
    let p = mat[0][0].p;
    let mut rows: Vec<Vec<u64>> = mat
        .iter()
        .map(|r| r.iter().map(|x| x.coeff(0)).collect())
        .collect();
    rref(p, &mut rows);
    rows.len() == d
}

fn identity_fp(p: u64, w: usize, d: usize) -> Vec<Vec<FpPoly>> {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if i == j {
                        FpPoly::one(p, w)
                    } else {
                        FpPoly::zero(p, w)
                    }
                })
                .collect()
        })
        .collect()
}
