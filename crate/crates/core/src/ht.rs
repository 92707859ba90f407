//! The Hodge-Tate specialization M_HT = (R_{N,M}/E)^d and its submodules.
//!
//! R_{N,M}/E is O_K/p^N presented on the basis 1, u, ..., u^{e-1}; for the
//! default degree-one E = u - p this is just Z/p^N with u acting as p.
//! Submodules are Z/p^N-spans closed under the u-action, kept in canonical
//! Howell form, so the conjugate filtration and every Sen-operator check
//! reduce to the same machinery as the flattened Nygaard side.

use crate::error::{Error, Result};
use crate::ring::{EisensteinPoly, Prec, SeriesElt};
use crate::submodule::{invariants_from_exponents, GradedInvariants};
use crate::znlin::{self, howell_form, HowellRow};

/// Ambient data of M_HT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HtSpace {
    prec: Prec,
    rank: usize,
    /// degree of E
    e_deg: usize,
    /// e x e matrix of multiplication by u on R/E (scalar pi when e = 1)
    umat: Vec<Vec<u64>>,
    eis: EisensteinPoly,
}

impl HtSpace {
    pub fn new(prec: Prec, rank: usize, eis: &EisensteinPoly) -> Result<HtSpace> {
        if eis.p() != prec.p() || eis.n_p() != prec.n_p() {
            return Err(Error::PrecMismatch("E and Prec disagree on p^N".into()));
        }
        let e = eis.degree();
        let m = prec.modulus();
        // companion matrix of the monic E: u * u^(e-1) = -c_0 - c_1 u - ...
        let mut umat = vec![vec![0u64; e]; e];
        for i in 1..e {
            umat[i][i - 1] = 1;
        }
        for i in 0..e {
            umat[i][e - 1] = m.neg(eis.coeffs()[i]);
        }
        Ok(HtSpace {
            prec,
            rank,
            e_deg: e,
            umat,
            eis: eis.clone(),
        })
    }

    pub fn prec(&self) -> Prec {
        self.prec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// dimension of the flattened Z/p^N-module
    pub fn dim(&self) -> usize {
        self.rank * self.e_deg
    }

    pub fn e_deg(&self) -> usize {
        self.e_deg
    }

    /// Reduce one series mod E. Only the reliable window is used; this is
    /// sound at full p^N precision when floor(eff_u / e) >= N, enforced.
    pub fn reduce_series(&self, x: &SeriesElt) -> Result<Vec<u64>> {
        let e = self.e_deg;
        let n_p = self.prec.n_p() as usize;
        if x.eff_u() / e < n_p {
            return Err(Error::InsufficientPrecision(format!(
                "reduction mod E needs eff_u >= {} (e*N), have {}",
                e * n_p,
                x.eff_u()
            )));
        }
        let m = self.prec.modulus();
        let mut c: Vec<u64> = (0..x.eff_u()).map(|i| x.coeff_raw(i)).collect();
        for i in (e..c.len()).rev() {
            let t = c[i];
            if t == 0 {
                continue;
            }
            c[i] = 0;
            for j in 0..e {
                let s = m.mul(t, self.eis.coeffs()[j]);
                c[i - e + j] = m.sub(c[i - e + j], s);
            }
        }
        c.truncate(e);
        Ok(c)
    }

    /// Flatten a vector of M into M_HT coordinates.
    pub fn reduce_vector(&self, v: &[SeriesElt]) -> Result<Vec<u64>> {
        if v.len() != self.rank {
            return Err(Error::ShapeMismatch("vector/ambient rank".into()));
        }
        let mut out = Vec::with_capacity(self.dim());
        for x in v {
            out.extend(self.reduce_series(x)?);
        }
        Ok(out)
    }

    /// multiplication by u on the flattened coordinates
    fn apply_u(&self, v: &[u64]) -> Vec<u64> {
        let m = self.prec.modulus();
        let e = self.e_deg;
        let mut out = vec![0u64; v.len()];
        for b in 0..self.rank {
            for i in 0..e {
                let mut acc = 0u64;
                for j in 0..e {
                    acc = m.add(acc, m.mul(self.umat[i][j], v[b * e + j]));
                }
                out[b * e + i] = acc;
            }
        }
        out
    }

    /// u satisfies its minimal polynomial E of degree e, so the u-closure of
    /// a generator is spanned by g, ug, ..., u^{e-1}g.
    pub fn submodule(&self, gens: &[Vec<u64>]) -> HtSubmodule {
        let ring = self.prec.modulus();
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for g in gens {
            assert_eq!(g.len(), self.dim(), "HT generator length");
            let mut cur = g.clone();
            for k in 0..self.e_deg {
                rows.push(cur.clone());
                if k + 1 < self.e_deg {
                    cur = self.apply_u(&cur);
                }
            }
        }
        HtSubmodule {
            space: self.clone(),
            rows: howell_form(ring, &rows, self.dim()),
        }
    }

    pub fn zero_submodule(&self) -> HtSubmodule {
        self.submodule(&[])
    }

    pub fn full_submodule(&self) -> HtSubmodule {
        let d = self.dim();
        let gens: Vec<Vec<u64>> = (0..d)
            .map(|i| {
                let mut v = vec![0u64; d];
                v[i] = 1;
                v
            })
            .collect();
        self.submodule(&gens)
    }
}

/// A u-stable Z/p^N-submodule of M_HT in canonical Howell form.
#[derive(Debug, Clone)]
pub struct HtSubmodule {
    space: HtSpace,
    rows: Vec<HowellRow>,
}

impl HtSubmodule {
    pub fn space(&self) -> &HtSpace {
        &self.space
    }

    pub fn howell_rows(&self) -> &[HowellRow] {
        &self.rows
    }

    pub fn basis(&self) -> Vec<Vec<u64>> {
        self.rows.iter().map(|h| h.row.clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// number of free-at-precision directions (unit pivots)
    pub fn free_pivot_count(&self) -> usize {
        self.rows.iter().filter(|h| h.val == 0).count()
    }

    pub fn max_pivot_valuation(&self) -> u32 {
        self.rows.iter().map(|h| h.val).max().unwrap_or(0)
    }

    pub fn equals(&self, other: &HtSubmodule) -> bool {
        self.space == other.space
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.col == b.col && a.val == b.val && a.row == b.row)
    }

    pub fn membership(&self, v: &[u64]) -> bool {
        znlin::is_member(self.space.prec.modulus(), &self.rows, v)
    }

    pub fn contains(&self, other: &HtSubmodule) -> bool {
        other.rows.iter().all(|h| self.membership(&h.row))
    }

    pub fn sum(&self, other: &HtSubmodule) -> HtSubmodule {
        let mut gens = self.basis();
        gens.extend(other.basis());
        self.space.submodule(&gens)
    }

    pub fn intersect(&self, other: &HtSubmodule) -> HtSubmodule {
        let ring = self.space.prec.modulus();
        let n = self.space.dim();
        let mut stacked: Vec<Vec<u64>> = Vec::new();
        for h in &self.rows {
            let mut r = h.row.clone();
            r.extend_from_slice(&h.row);
            stacked.push(r);
        }
        for h in &other.rows {
            let mut r = h.row.clone();
            r.extend(std::iter::repeat(0).take(n));
            stacked.push(r);
        }
        let big = howell_form(ring, &stacked, 2 * n);
        let gens: Vec<Vec<u64>> = big
            .iter()
            .filter(|h| h.col >= n)
            .map(|h| h.row[n..].to_vec())
            .collect();
        self.space.submodule(&gens)
    }

    pub fn saturate(&self) -> HtSubmodule {
        let ring = self.space.prec.modulus();
        let rows: Vec<Vec<u64>> = self.rows.iter().map(|h| h.row.clone()).collect();
        let sat = znlin::saturate_rows(ring, &rows, self.space.dim());
        let gens: Vec<Vec<u64>> = sat.iter().map(|h| h.row.clone()).collect();
        self.space.submodule(&gens)
    }

}

pub fn ht_quotient_invariants(big: &HtSubmodule, small: &HtSubmodule) -> Result<GradedInvariants> {
    if big.space != small.space {
        return Err(Error::ShapeMismatch("HT submodules in different spaces".into()));
    }
    let prec = big.space.prec;
    let exps = znlin::span_quotient_exponents(
        prec.p(),
        prec.n_p(),
        big.space.dim(),
        &big.rows,
        &small.rows,
    )?;
    Ok(invariants_from_exponents(&exps, prec.n_p()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_mod_u_minus_p() {
        let prec = Prec::new(3, 3, 8).unwrap();
        let e = EisensteinPoly::u_minus_p(3, 3);
        let space = HtSpace::new(prec, 1, &e).unwrap();
        // 1 + u + u^2 -> 1 + 3 + 9 = 13
        let x = SeriesElt::from_coeffs(prec, &[1, 1, 1]);
        assert_eq!(space.reduce_series(&x).unwrap(), vec![13]);
    }

    #[test]
    fn reduce_mod_degree_two() {
        let prec = Prec::new(5, 2, 12).unwrap();
        let e = EisensteinPoly::new(5, 2, &[5, 0, 1]).unwrap(); // u^2 + 5
        let space = HtSpace::new(prec, 1, &e).unwrap();
        // u^2 == -5, so u^3 + u^2 + 1 -> -5u - 5 + 1 = -5u - 4
        let x = SeriesElt::from_coeffs(prec, &[1, 0, 1, 1]);
        let m = prec.modulus();
        assert_eq!(space.reduce_series(&x).unwrap(), vec![m.neg(4), m.neg(5)]);
    }

    #[test]
    fn ht_submodules_and_quotients() {
        let prec = Prec::new(3, 2, 6).unwrap();
        let e = EisensteinPoly::u_minus_p(3, 2);
        let space = HtSpace::new(prec, 2, &e).unwrap();
        let full = space.full_submodule();
        let sub = space.submodule(&[vec![3, 0]]);
        let q = ht_quotient_invariants(&full, &sub).unwrap();
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.torsion, vec![1]);
        assert!(full.contains(&sub));
        assert!(!sub.contains(&full));
    }
}
