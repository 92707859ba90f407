//! Linear algebra over Z/p^K: Howell normal forms, Smith normal forms with
//! transforms, kernels, affine solves and p-saturation.
//!
//! Z/p^K is a local principal ideal ring, so pivoting by minimal p-adic
//! valuation replaces gcd steps. The Howell form is the canonical generating
//! matrix of a row span: two row sets generate the same span iff their
//! Howell forms coincide entrywise, and membership is decided by greedy
//! reduction.

use crate::zmod::{checked_pow, Modulus};

/// A row in Howell position: pivot column, pivot valuation (the pivot entry
/// is exactly p^val), and the row itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HowellRow {
    pub col: usize,
    pub val: u32,
    pub row: Vec<u64>,
}

/// Canonical Howell basis of the span of `rows` in (Z/p^K)^ncols.
pub fn howell_form(ring: Modulus, rows: &[Vec<u64>], ncols: usize) -> Vec<HowellRow> {
    howell_form_with_transform(ring, rows, ncols).0
}

/// Howell basis together with a transform: result.1[i] holds coefficients
/// expressing Howell row i as a combination of the input rows.
pub fn howell_form_with_transform(
    ring: Modulus,
    rows: &[Vec<u64>],
    ncols: usize,
) -> (Vec<HowellRow>, Vec<Vec<u64>>) {
    let k = ring.exponent();
    let ngen = rows.len();
    let mut pool: Vec<(Vec<u64>, Vec<u64>)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            assert_eq!(r.len(), ncols, "row length mismatch");
            let mut t = vec![0u64; ngen];
            t[i] = 1;
            let reduced: Vec<u64> = r.iter().map(|&x| ring.reduce(x)).collect();
            (reduced, t)
        })
        .filter(|(r, _)| r.iter().any(|&x| x != 0))
        .collect();
    let mut done: Vec<(HowellRow, Vec<u64>)> = Vec::new();

    for c in 0..ncols {
        // all pool rows have zero support before column c
        let mut best: Option<(usize, u32)> = None;
        for (idx, (r, _)) in pool.iter().enumerate() {
            if r[c] != 0 {
                let v = ring.val(r[c]);
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((idx, v));
                }
            }
        }
        let Some((idx, v)) = best else { continue };
        let (mut r, mut t) = pool.swap_remove(idx);
        // normalize pivot to exactly p^v
        let unit = ring.div_pow_p(r[c], v);
        let uinv = ring.inv(unit);
        scale_row(ring, &mut r, uinv);
        scale_row(ring, &mut t, uinv);
        // eliminate column c from the remaining pool rows
        for (s, ts) in pool.iter_mut() {
            if s[c] != 0 {
                let coef = ring.div_pow_p(s[c], v);
                sub_scaled(ring, s, &r, coef);
                sub_scaled(ring, ts, &t, coef);
            }
        }
        // Howell closure: the annihilator shadow has support beyond c
        if v > 0 {
            let factor = checked_pow(ring.p(), k - v).expect("p^(K-v) fits");
            let mut sr: Vec<u64> = r.iter().map(|&x| ring.mul(x, factor)).collect();
            let st: Vec<u64> = t.iter().map(|&x| ring.mul(x, factor)).collect();
            sr[c] = 0; // p^(K-v) * p^v = 0
            if sr.iter().any(|&x| x != 0) {
                pool.push((sr, st));
            }
        }
        done.push((HowellRow { col: c, val: v, row: r }, t));
    }
    debug_assert!(pool.iter().all(|(r, _)| r.iter().all(|&x| x == 0)));

    // reduce entries above each pivot into [0, p^val)
    for i in 0..done.len() {
        let (pivot_row, pivot_t) = {
            let (h, t) = &done[i];
            (h.row.clone(), t.clone())
        };
        let (c, v) = (done[i].0.col, done[i].0.val);
        let pv = checked_pow(ring.p(), v).expect("p^v fits");
        for j in 0..i {
            let entry = done[j].0.row[c];
            let q = entry / pv;
            if q != 0 {
                sub_scaled(ring, &mut done[j].0.row, &pivot_row, q);
                sub_scaled(ring, &mut done[j].1, &pivot_t, q);
            }
        }
    }
    done.into_iter().map(|(h, t)| (h, t)).unzip()
}

fn scale_row(ring: Modulus, row: &mut [u64], c: u64) {
    for x in row.iter_mut() {
        *x = ring.mul(*x, c);
    }
}

fn sub_scaled(ring: Modulus, target: &mut [u64], source: &[u64], c: u64) {
    for (t, &s) in target.iter_mut().zip(source) {
        *t = ring.sub(*t, ring.mul(s, c));
    }
}

/// Greedy reduction of `v` against a Howell basis: each pivot entry is
/// brought into [0, p^val) by floor division. The residual is the canonical
/// coset representative, zero iff `v` lies in the span.
pub fn reduce_with_certificate(
    ring: Modulus,
    basis: &[HowellRow],
    v: &[u64],
) -> (Vec<u64>, Vec<u64>) {
    let mut w: Vec<u64> = v.iter().map(|&x| ring.reduce(x)).collect();
    let mut coeffs = vec![0u64; basis.len()];
    for (i, h) in basis.iter().enumerate() {
        let x = w[h.col];
        if x == 0 {
            continue;
        }
        let pv = checked_pow(ring.p(), h.val).expect("p^val fits");
        let coef = x / pv;
        if coef != 0 {
            coeffs[i] = coef;
            sub_scaled(ring, &mut w, &h.row, coef);
        }
    }
    (w, coeffs)
}

pub fn is_member(ring: Modulus, basis: &[HowellRow], v: &[u64]) -> bool {
    reduce_with_certificate(ring, basis, v).0.iter().all(|&x| x == 0)
}

/// Smith normal form U A V = diag(p^a_1, ..., p^a_r) over Z/p^K, with the
/// exponents non-decreasing. `exps[i] == K` encodes a zero diagonal entry.
#[derive(Debug, Clone)]
pub struct SmithZn {
    pub exps: Vec<u32>,
    /// row transform (nrows x nrows)
    pub u: Vec<Vec<u64>>,
    /// column transform (ncols x ncols)
    pub v: Vec<Vec<u64>>,
    /// inverse of the column transform
    pub v_inv: Vec<Vec<u64>>,
    pub nrows: usize,
    pub ncols: usize,
}

pub fn smith_zpn(ring: Modulus, a: &[Vec<u64>]) -> SmithZn {
    let nrows = a.len();
    let ncols = if nrows == 0 { 0 } else { a[0].len() };
    let mut m: Vec<Vec<u64>> = a
        .iter()
        .map(|r| r.iter().map(|&x| ring.reduce(x)).collect())
        .collect();
    let mut u = identity(nrows);
    let mut v = identity(ncols);
    let mut v_inv = identity(ncols);
    let k = ring.exponent();
    let d = nrows.min(ncols);
    let mut exps = vec![k; d];

    for t in 0..d {
        // pivot: minimal valuation in the trailing submatrix
        let mut best: Option<(usize, usize, u32)> = None;
        for i in t..nrows {
            for j in t..ncols {
                if m[i][j] != 0 {
                    let val = ring.val(m[i][j]);
                    if best.map_or(true, |(_, _, bv)| val < bv) {
                        best = Some((i, j, val));
                    }
                }
            }
        }
        let Some((pi, pj, pv)) = best else { break };
        m.swap(t, pi);
        u.swap(t, pi);
        if pj != t {
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            for row in v.iter_mut() {
                row.swap(t, pj);
            }
            v_inv.swap(t, pj);
        }
        // normalize the pivot row so the pivot is exactly p^pv
        let unit = ring.div_pow_p(m[t][t], pv);
        let uinv = ring.inv(unit);
        scale_row(ring, &mut m[t], uinv);
        scale_row(ring, &mut u[t], uinv);
        // clear the pivot column
        for i in (t + 1)..nrows {
            if m[i][t] != 0 {
                let coef = ring.div_pow_p(m[i][t], pv);
                let (head, tail) = m.split_at_mut(i);
                sub_scaled(ring, &mut tail[0], &head[t], coef);
                let (uh, ut) = u.split_at_mut(i);
                sub_scaled(ring, &mut ut[0], &uh[t], coef);
            }
        }
        // clear the pivot row with column operations
        for j in (t + 1)..ncols {
            if m[t][j] != 0 {
                let coef = ring.div_pow_p(m[t][j], pv);
                for row in m.iter_mut() {
                    let s = ring.mul(row[t], coef);
                    row[j] = ring.sub(row[j], s);
                }
                for row in v.iter_mut() {
                    let s = ring.mul(row[t], coef);
                    row[j] = ring.sub(row[j], s);
                }
                // v_inv <- G^{-1} v_inv with G = I - coef*E_{t,j}... G adds
                // -coef*col_t to col_j, so G^{-1} adds +coef*row_j to row_t.
                let (a_, b_) = if t < j {
                    let (h, tl) = v_inv.split_at_mut(j);
                    (&mut h[t], &tl[0])
                } else {
                    unreachable!("t < j in row clearing")
                };
                for (x, &y) in a_.iter_mut().zip(b_.iter()) {
                    *x = ring.add(*x, ring.mul(y, coef));
                }
            }
        }
        exps[t] = pv;
    }
    SmithZn {
        exps,
        u,
        v,
        v_inv,
        nrows,
        ncols,
    }
}

fn identity(n: usize) -> Vec<Vec<u64>> {
    (0..n)
        .map(|i| {
            let mut r = vec![0u64; n];
            if i < n {
                r[i] = 1;
            }
            r
        })
        .collect()
}

/// Kernel generators of x -> A x (column vectors), returned as vectors.
/// `free` are the generators whose scalar may range over all of Z/p^K;
/// `torsion` are p-power-scaled directions that only witness precision
/// ambiguity.
pub struct KernelGens {
    pub free: Vec<Vec<u64>>,
    pub torsion: Vec<Vec<u64>>,
}

pub fn kernel(ring: Modulus, a: &[Vec<u64>]) -> KernelGens {
    let s = smith_zpn(ring, a);
    let k = ring.exponent();
    let mut free = Vec::new();
    let mut torsion = Vec::new();
    // A = U^{-1} D V^{-1} acting on column vectors x: A x = 0 iff
    // D (V^{-1} x) = 0, so x = V y with y_j in p^(K - a_j) Z/p^K.
    for j in 0..s.ncols {
        let aj = if j < s.exps.len() { s.exps[j] } else { k };
        let col: Vec<u64> = (0..s.ncols).map(|i| s.v[i][j]).collect();
        if aj >= k {
            free.push(col);
        } else if aj > 0 {
            let factor = checked_pow(ring.p(), k - aj).expect("fits");
            torsion.push(col.iter().map(|&x| ring.mul(x, factor)).collect());
        }
    }
    KernelGens { free, torsion }
}

/// Solve A x = b over Z/p^K. Returns the particular solution with canonical
/// (zero) choices for undetermined coordinates, plus the kernel description.
pub fn solve_affine(ring: Modulus, a: &[Vec<u64>], b: &[u64]) -> Option<(Vec<u64>, KernelGens)> {
    let s = smith_zpn(ring, a);
    let k = ring.exponent();
    // U A V = D, so A x = b iff D y = U b with x = V y.
    let ub: Vec<u64> = s
        .u
        .iter()
        .map(|row| dot(ring, row, b))
        .collect();
    let mut y = vec![0u64; s.ncols];
    for i in 0..s.nrows {
        let rhs = ub[i];
        let aj = if i < s.exps.len() { s.exps[i] } else { k };
        if i >= s.ncols || aj >= k {
            if rhs != 0 {
                return None;
            }
            continue;
        }
        if ring.val(rhs) < aj {
            return None;
        }
        y[i] = ring.div_pow_p(rhs, aj);
    }
    let x: Vec<u64> = (0..s.ncols)
        .map(|i| dot(ring, &s.v[i], &y))
        .collect();
    Some((x, kernel(ring, a)))
}

fn dot(ring: Modulus, a: &[u64], b: &[u64]) -> u64 {
    let mut acc: u128 = 0;
    let m = ring.order() as u128;
    for (&x, &y) in a.iter().zip(b) {
        acc = (acc + x as u128 * y as u128) % m;
    }
    acc as u64
}

/// p-saturation of a row span at precision: divides out the p-content of
/// every primitive direction of the lattice spanned by `rows` (lifting the
/// rows to integers, not padding with p^K junk). The result contains the
/// input span.
pub fn saturate_rows(ring: Modulus, rows: &[Vec<u64>], ncols: usize) -> Vec<HowellRow> {
    if rows.is_empty() {
        return Vec::new();
    }
    let k = ring.exponent();
    let s = smith_zpn(ring, rows);
    // rowspan(B) = rowspan(D V^{-1}); dividing row i by p^{a_i} saturates.
    let mut sat: Vec<Vec<u64>> = Vec::new();
    for (i, &a) in s.exps.iter().enumerate() {
        if a < k {
            sat.push(s.v_inv[i].clone());
        }
    }
    for r in rows {
        sat.push(r.clone());
    }
    howell_form(ring, &sat, ncols)
}

/// Exponents of the invariant factors of big/small at precision N, where
/// both spans live in (Z/p^N)^ncols and small ⊆ big (checked). Both spans
/// are lifted to integer lattices between p^N Z^m and Z^m; the Smith form
/// of the coordinate matrix, computed mod p^(N+1), pins every exponent
/// <= N exactly. Returns the nonzero exponents sorted ascending (an
/// exponent N is a free-at-precision factor).
pub fn span_quotient_exponents(
    p: u64,
    n_p: u32,
    ncols: usize,
    big: &[HowellRow],
    small: &[HowellRow],
) -> crate::error::Result<Vec<u32>> {
    use crate::error::Error;
    let ring = Modulus::new(p, n_p);
    for h in small {
        if !is_member(ring, big, &h.row) {
            return Err(Error::NotContained(
                "span_quotient requires small ⊆ big".into(),
            ));
        }
    }
    Ok(span_quotient_smith(p, n_p, ncols, big, small).0)
}

/// As `span_quotient_exponents`, but also returns ambient vectors in `big`
/// whose classes form a basis of the free-at-precision part of the
/// quotient.
pub fn span_quotient_with_free_generators(
    p: u64,
    n_p: u32,
    ncols: usize,
    big: &[HowellRow],
    small: &[HowellRow],
) -> crate::error::Result<(Vec<u32>, Vec<Vec<u64>>)> {
    use crate::error::Error;
    let ring = Modulus::new(p, n_p);
    for h in small {
        if !is_member(ring, big, &h.row) {
            return Err(Error::NotContained(
                "span_quotient requires small ⊆ big".into(),
            ));
        }
    }
    Ok(span_quotient_smith(p, n_p, ncols, big, small))
}

fn span_quotient_smith(
    p: u64,
    n_p: u32,
    ncols: usize,
    big: &[HowellRow],
    small: &[HowellRow],
) -> (Vec<u32>, Vec<Vec<u64>>) {
    let m = ncols;
    let pn: i128 = checked_pow(p, n_p).expect("p^N fits") as i128;
    let pi = p as i128;

    // triangular integer basis of the lattice of `big`
    let mut pivot_of_col: Vec<Option<&HowellRow>> = vec![None; m];
    for h in big {
        pivot_of_col[h.col] = Some(h);
    }
    let mut basis: Vec<Vec<i128>> = Vec::with_capacity(m);
    let mut pivot_val: Vec<u32> = Vec::with_capacity(m);
    for c in 0..m {
        match pivot_of_col[c] {
            Some(h) => {
                basis.push(h.row.iter().map(|&x| x as i128).collect());
                pivot_val.push(h.val);
            }
            None => {
                let mut r = vec![0i128; m];
                r[c] = pn;
                basis.push(r);
                pivot_val.push(n_p);
            }
        }
    }
    // generators of the lattice of `small`, in big-basis coordinates
    let mut small_pivot: Vec<Option<&HowellRow>> = vec![None; m];
    for h in small {
        small_pivot[h.col] = Some(h);
    }
    let mut coords: Vec<Vec<i128>> = Vec::with_capacity(m);
    for c in 0..m {
        let mut w: Vec<i128> = match small_pivot[c] {
            Some(h) => h.row.iter().map(|&x| x as i128).collect(),
            None => {
                let mut r = vec![0i128; m];
                r[c] = pn;
                r
            }
        };
        let mut x = vec![0i128; m];
        for j in 0..m {
            if w[j] == 0 {
                continue;
            }
            let pv = pi.pow(pivot_val[j]);
            debug_assert!(w[j] % pv == 0, "containment holds, so the solve is exact");
            let q = w[j] / pv;
            x[j] = q;
            for t in j..m {
                w[t] -= q * basis[j][t];
            }
        }
        debug_assert!(w.iter().all(|&t| t == 0));
        coords.push(x);
    }

    // Smith form mod p^(N+1) of the coordinate matrix C: quotient of the
    // two lattices is Z^m / rowspan(C).
    let big_ring = Modulus::new(p, n_p + 1);
    let reduced: Vec<Vec<u64>> = coords
        .iter()
        .map(|r| r.iter().map(|&x| big_ring.reduce_i128(x)).collect())
        .collect();
    let s = smith_zpn(big_ring, &reduced);
    let mut exps: Vec<u32> = s.exps.iter().copied().filter(|&e| e > 0).collect();
    exps.sort_unstable();

    // preimages of the free-part basis: for a_j = N, the class of
    // row_j(V^{-1}) * B_big generates a free factor.
    let nring = Modulus::new(p, n_p);
    let mut free_gens = Vec::new();
    for (j, &a) in s.exps.iter().enumerate() {
        if a == n_p {
            let mut amb = vec![0i128; m];
            for c in 0..m {
                let coef = s.v_inv[j][c] as i128;
                if coef == 0 {
                    continue;
                }
                for t in 0..m {
                    amb[t] += coef * basis[c][t];
                }
            }
            let red: Vec<u64> = amb.iter().map(|&x| nring.reduce_i128(x)).collect();
            if red.iter().any(|&x| x != 0) {
                free_gens.push(red);
            }
        }
    }
    (exps, free_gens)
}

/// Characteristic polynomial det(xI - A) over Z/p^K by permutation
/// expansion; coefficients returned lowest-degree first, monic. Matrices
/// here have d <= 8 (guarded by callers building Sen operators).
pub fn char_poly(ring: Modulus, a: &[Vec<u64>]) -> Vec<u64> {
    let d = a.len();
    assert!(d <= 8, "char_poly limited to d <= 8");
    let mut coeffs = vec![0u64; d + 1];
    let mut perm: Vec<usize> = (0..d).collect();
    permute_char(ring, a, &mut perm, 0, true, &mut coeffs);
    coeffs
}

fn permute_char(
    ring: Modulus,
    a: &[Vec<u64>],
    perm: &mut Vec<usize>,
    at: usize,
    even: bool,
    acc: &mut Vec<u64>,
) {
    let d = perm.len();
    if at == d {
        // product over i of (x*[perm[i]==i] - a[i][perm[i]])
        let mut poly = vec![0u64; d + 1];
        poly[0] = 1;
        let mut deg = 0usize;
        for i in 0..d {
            let c = ring.neg(a[i][perm[i]]);
            if perm[i] == i {
                // multiply by (x + c)
                for j in (0..=deg).rev() {
                    let t = poly[j];
                    poly[j + 1] = ring.add(poly[j + 1], t);
                    poly[j] = ring.mul(t, c);
                }
                deg += 1;
            } else {
                for j in 0..=deg {
                    poly[j] = ring.mul(poly[j], c);
                }
            }
        }
        for (j, &c) in poly.iter().enumerate() {
            if even {
                acc[j] = ring.add(acc[j], c);
            } else {
                acc[j] = ring.sub(acc[j], c);
            }
        }
        return;
    }
    for i in at..d {
        perm.swap(at, i);
        let flip = if i == at { even } else { !even };
        permute_char(ring, a, perm, at + 1, flip, acc);
        perm.swap(at, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(p: u64, k: u32) -> Modulus {
        Modulus::new(p, k)
    }

    #[test]
    fn howell_already_reduced() {
        let r = ring(3, 2);
        let h = howell_form(r, &[vec![1, 0], vec![0, 3]], 2);
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].row, vec![1, 0]);
        assert_eq!(h[1].row, vec![0, 3]);
    }

    #[test]
    fn howell_span_equality() {
        // span{(3,3),(0,3)} = span{(3,0),(0,3)} in (Z/9)^2
        let r = ring(3, 2);
        let h1 = howell_form(r, &[vec![3, 3], vec![0, 3]], 2);
        let h2 = howell_form(r, &[vec![3, 0], vec![0, 3]], 2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn howell_empty() {
        let r = ring(3, 2);
        assert!(howell_form(r, &[], 2).is_empty());
        assert!(howell_form(r, &[vec![0, 0]], 2).is_empty());
    }

    /// brute-force span enumeration for tiny cases
    fn enumerate_span(r: Modulus, gens: &[Vec<u64>], ncols: usize) -> std::collections::BTreeSet<Vec<u64>> {
        let mut set = std::collections::BTreeSet::new();
        set.insert(vec![0u64; ncols]);
        let mut frontier: Vec<Vec<u64>> = vec![vec![0u64; ncols]];
        while let Some(v) = frontier.pop() {
            for g in gens {
                let w: Vec<u64> = v.iter().zip(g).map(|(&a, &b)| r.add(a, b)).collect();
                if set.insert(w.clone()) {
                    frontier.push(w);
                }
            }
        }
        set
    }

    #[test]
    fn howell_matches_enumeration() {
        let r = ring(2, 2);
        let cases: Vec<Vec<Vec<u64>>> = vec![
            vec![vec![2, 1, 0], vec![0, 2, 2]],
            vec![vec![1, 2, 3], vec![2, 2, 0], vec![0, 0, 2]],
            vec![vec![2, 2, 2]],
        ];
        for gens in cases {
            let h = howell_form(r, &gens, 3);
            let rows: Vec<Vec<u64>> = h.iter().map(|x| x.row.clone()).collect();
            assert_eq!(
                enumerate_span(r, &gens, 3),
                enumerate_span(r, &rows, 3),
                "span changed by howell_form"
            );
            // membership matches enumeration
            let span = enumerate_span(r, &gens, 3);
            for v0 in 0..4u64 {
                for v1 in 0..4u64 {
                    for v2 in 0..4u64 {
                        let v = vec![v0, v1, v2];
                        assert_eq!(is_member(r, &h, &v), span.contains(&v), "member {v:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn howell_idempotent_and_canonical() {
        let r = ring(3, 3);
        let gens = vec![vec![3, 6, 1], vec![9, 0, 3], vec![0, 9, 9]];
        let h1 = howell_form(r, &gens, 3);
        let rows: Vec<Vec<u64>> = h1.iter().map(|x| x.row.clone()).collect();
        let h2 = howell_form(r, &rows, 3);
        assert_eq!(h1, h2);
        // scrambled generators give the same form
        let scr = vec![
            rows.iter().fold(vec![0u64; 3], |acc, row| {
                acc.iter().zip(row).map(|(&a, &b)| r.add(a, b)).collect()
            }),
            rows[0].clone(),
            rows.get(1).cloned().unwrap_or(vec![0; 3]),
            rows.get(2).cloned().unwrap_or(vec![0; 3]),
        ];
        let h3 = howell_form(r, &scr, 3);
        assert_eq!(h1, h3);
    }

    #[test]
    fn transform_tracks_provenance() {
        let r = ring(3, 2);
        let gens = vec![vec![3, 3, 0], vec![1, 2, 1], vec![0, 3, 6]];
        let (h, t) = howell_form_with_transform(r, &gens, 3);
        for (hr, tr) in h.iter().zip(&t) {
            let mut acc = vec![0u64; 3];
            for (c, g) in tr.iter().zip(&gens) {
                for (a, &x) in acc.iter_mut().zip(g) {
                    *a = r.add(*a, r.mul(x, *c));
                }
            }
            assert_eq!(acc, hr.row);
        }
    }

    #[test]
    fn smith_examples() {
        let r = ring(3, 3);
        // identity
        let s = smith_zpn(r, &[vec![1, 0], vec![0, 1]]);
        assert_eq!(s.exps, vec![0, 0]);
        // diag(p, p^2) mod p^3
        let s = smith_zpn(r, &[vec![3, 0], vec![0, 9]]);
        assert_eq!(s.exps, vec![1, 2]);
        // [[p,p],[p,p]] mod p^2 -> (p, 0)
        let r2 = ring(3, 2);
        let s = smith_zpn(r2, &[vec![3, 3], vec![3, 3]]);
        assert_eq!(s.exps, vec![1, 2]); // exponent 2 = K encodes the zero factor
    }

    #[test]
    fn smith_transforms_certify() {
        let r = ring(2, 4);
        let a = vec![vec![2, 6, 4], vec![8, 2, 0], vec![4, 4, 12]];
        let s = smith_zpn(r, &a);
        // U A V must be the diagonal of p^exps
        let ua = mat_mul(r, &s.u, &a);
        let uav = mat_mul(r, &ua, &s.v);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j && s.exps[i] < 4 {
                    checked_pow(2, s.exps[i]).unwrap()
                } else {
                    0
                };
                assert_eq!(uav[i][j], want, "at ({i},{j})");
            }
        }
        // v * v_inv = I
        let vv = mat_mul(r, &s.v, &s.v_inv);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(vv[i][j], u64::from(i == j));
            }
        }
    }

    fn mat_mul(r: Modulus, a: &[Vec<u64>], b: &[Vec<u64>]) -> Vec<Vec<u64>> {
        let n = a.len();
        let m = b[0].len();
        let k = b.len();
        let mut out = vec![vec![0u64; m]; n];
        for i in 0..n {
            for t in 0..k {
                if a[i][t] == 0 {
                    continue;
                }
                for j in 0..m {
                    out[i][j] = r.add(out[i][j], r.mul(a[i][t], b[t][j]));
                }
            }
        }
        out
    }

    #[test]
    fn kernel_and_solve() {
        let r = ring(3, 2);
        // A = [[3, 0], [0, 1]]: kernel of x -> Ax is {(3t, 0)}
        let a = vec![vec![3, 0], vec![0, 1]];
        let kg = kernel(r, &a);
        assert!(kg.free.is_empty());
        assert_eq!(kg.torsion.len(), 1);
        let t = &kg.torsion[0];
        assert_eq!(r.mul(3, t[0]) % 9, 0);
        assert!(t.iter().any(|&x| x != 0));
        // solve [[3,0],[0,1]] x = (3, 5)
        let (x, _) = solve_affine(r, &a, &[3, 5]).unwrap();
        assert_eq!(r.mul(3, x[0]), 3);
        assert_eq!(x[1], 5);
        // no solution for (1, 0)
        assert!(solve_affine(r, &a, &[1, 0]).is_none());
    }

    #[test]
    fn saturation_examples() {
        let r = ring(3, 2);
        // sat of <(3,0)> is <(1,0)>
        let s = saturate_rows(r, &[vec![3, 0]], 2);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].row, vec![1, 0]);
        // sat of <(3,6)> is <(1,2)>
        let s = saturate_rows(r, &[vec![3, 6]], 2);
        assert_eq!(s[0].row, vec![1, 2]);
        // already saturated span unchanged
        let before = howell_form(r, &[vec![1, 2], vec![0, 3]], 2);
        let after = saturate_rows(r, &[vec![1, 2], vec![0, 3]], 2);
        // <(1,2),(0,3)>: saturating (0,3) gives (0,1)
        assert_eq!(after.len(), 2);
        assert_eq!(after[1].row, vec![0, 1]);
        assert!(before.len() == 2);
    }

    #[test]
    fn char_poly_small() {
        let r = ring(5, 3);
        // diag(2, 3): (x-2)(x-3) = x^2 - 5x + 6
        let a = vec![vec![2, 0], vec![0, 3]];
        let cp = char_poly(r, &a);
        assert_eq!(cp, vec![6, r.neg(5), 1]);
        // companion-style check with an off-diagonal
        let a = vec![vec![0, 1], vec![r.neg(6), 5]];
        // char poly x^2 - 5x + 6
        let cp = char_poly(r, &a);
        assert_eq!(cp, vec![6, r.neg(5), 1]);
    }
}
