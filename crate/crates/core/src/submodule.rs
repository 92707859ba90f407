//! Finitely generated submodules of R_{N,M}^d, manipulated through their
//! flattening: an R_{N,M}-submodule of the free module is exactly a
//! u-closed Z/p^N-submodule of (Z/p^N)^{dM}. Closure under u is enforced by
//! appending u*g, ..., u^{M-1}*g for every generator before Howell
//! reduction, so equality, membership, intersection and quotient invariants
//! all reduce to canonical Howell-form computations over Z/p^N.

use crate::error::{Error, Result};
use crate::ring::{Prec, SeriesElt};
use crate::znlin::{
    self, howell_form, howell_form_with_transform, reduce_with_certificate, HowellRow,
};

/// Invariant-factor description of a finitely generated W(k)-module at
/// precision N. An invariant factor p^N is reported as free-at-precision;
/// callers that must distinguish free from p^N-torsion must raise N and
/// recompute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedInvariants {
    /// torsion exponents in [1, N-1], sorted ascending
    pub torsion: Vec<u32>,
    /// number of invariant factors equal to p^N
    pub free_rank: usize,
    /// the p-adic precision the description was computed at
    pub n_p: u32,
}

impl GradedInvariants {
    pub fn trivial(n_p: u32) -> GradedInvariants {
        GradedInvariants {
            torsion: Vec::new(),
            free_rank: 0,
            n_p,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    pub fn is_torsion_free(&self) -> bool {
        self.torsion.is_empty()
    }

    /// total number of generators (free + torsion invariant factors)
    pub fn generator_count(&self) -> usize {
        self.free_rank + self.torsion.len()
    }

    /// largest torsion exponent, 0 when torsion free
    pub fn torsion_exponent(&self) -> u32 {
        self.torsion.last().copied().unwrap_or(0)
    }

    /// Invariant exponents with free factors capped at `cap`; used to
    /// compare descriptions computed along routes with different boundary
    /// precision loss.
    pub fn capped_exponents(&self, cap: u32) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .torsion
            .iter()
            .map(|&e| e.min(cap))
            .chain(std::iter::repeat(cap).take(self.free_rank))
            .collect();
        v.sort_unstable();
        v
    }
}

impl std::fmt::Display for GradedInvariants {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts: Vec<String> = self
            .torsion
            .iter()
            .map(|e| format!("Z/p^{e}"))
            .collect();
        if self.free_rank > 0 {
            parts.push(format!("free^{}", self.free_rank));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// A u-closed submodule of R_{N,M}^d in canonical Howell form.
///
/// Provenance (expressing canonical rows in terms of the original
/// generators) is tracked only when requested via `from_gens_tracked`;
/// membership certificates need it, plain span computations do not.
#[derive(Debug, Clone)]
pub struct Submodule {
    prec: Prec,
    rank: usize,
    rows: Vec<HowellRow>,
    provenance: Option<Provenance>,
}

#[derive(Debug, Clone)]
struct Provenance {
    /// the generators the module was constructed from
    origin: Vec<Vec<SeriesElt>>,
    /// howell transform: rows[i] = sum_j transform[i][j] * closure_row[j]
    transform: Vec<Vec<u64>>,
    /// closure_row[j] = u^(closure[j].1) * origin[closure[j].0]
    closure: Vec<(usize, usize)>,
}

fn flatten(prec: Prec, v: &[SeriesElt]) -> Result<Vec<u64>> {
    let m = prec.n_u();
    let mut out = Vec::with_capacity(v.len() * m);
    for s in v {
        if s.prec() != prec {
            return Err(Error::PrecMismatch("vector entry precision".into()));
        }
        if !s.is_full_precision() {
            return Err(Error::InsufficientPrecision(
                "flattening requires full effective u-precision".into(),
            ));
        }
        out.extend_from_slice(s.coeffs_raw());
    }
    Ok(out)
}

fn unflatten(prec: Prec, row: &[u64], rank: usize) -> Vec<SeriesElt> {
    let m = prec.n_u();
    (0..rank)
        .map(|j| SeriesElt::from_coeffs(prec, &row[j * m..(j + 1) * m]))
        .collect()
}

/// shift each coordinate block by one u-power
fn shift_u(row: &[u64], rank: usize, m: usize) -> Vec<u64> {
    let mut out = vec![0u64; rank * m];
    for j in 0..rank {
        for i in 0..m - 1 {
            out[j * m + i + 1] = row[j * m + i];
        }
    }
    out
}

impl Submodule {
    fn closure_rows(
        prec: Prec,
        rank: usize,
        gens: &[Vec<SeriesElt>],
    ) -> Result<(Vec<Vec<u64>>, Vec<(usize, usize)>)> {
        let m = prec.n_u();
        let mut closure_rows: Vec<Vec<u64>> = Vec::with_capacity(gens.len() * m);
        let mut closure: Vec<(usize, usize)> = Vec::with_capacity(gens.len() * m);
        for (gi, g) in gens.iter().enumerate() {
            if g.len() != rank {
                return Err(Error::ShapeMismatch(format!(
                    "generator {gi} has {} coordinates, ambient rank is {rank}",
                    g.len()
                )));
            }
            let mut row = flatten(prec, g)?;
            for k in 0..m {
                closure_rows.push(row.clone());
                closure.push((gi, k));
                if k + 1 < m {
                    row = shift_u(&row, rank, m);
                }
            }
        }
        Ok((closure_rows, closure))
    }

    pub fn from_gens(prec: Prec, rank: usize, gens: &[Vec<SeriesElt>]) -> Result<Submodule> {
        let (closure_rows, _) = Submodule::closure_rows(prec, rank, gens)?;
        let rows = howell_form(prec.modulus(), &closure_rows, rank * prec.n_u());
        Ok(Submodule {
            prec,
            rank,
            rows,
            provenance: None,
        })
    }

    /// Canonicalize generators whose Z/p^N-span is already known to be
    /// u-closed (intersections, sums, scalar multiples and saturations of
    /// closed spans), skipping the closure blow-up.
    fn from_closed_span(prec: Prec, rank: usize, gens: &[Vec<u64>]) -> Submodule {
        let rows = howell_form(prec.modulus(), gens, rank * prec.n_u());
        let out = Submodule {
            prec,
            rank,
            rows,
            provenance: None,
        };
        debug_assert!(
            out.rows.iter().all(|h| znlin::is_member(
                prec.modulus(),
                &out.rows,
                &shift_u(&h.row, rank, prec.n_u())
            )),
            "span passed to from_closed_span is not u-closed"
        );
        out
    }

    /// As `from_gens`, additionally retaining the data needed to express
    /// members as R-combinations of the supplied generators.
    pub fn from_gens_tracked(
        prec: Prec,
        rank: usize,
        gens: &[Vec<SeriesElt>],
    ) -> Result<Submodule> {
        let (closure_rows, closure) = Submodule::closure_rows(prec, rank, gens)?;
        let (rows, transform) =
            howell_form_with_transform(prec.modulus(), &closure_rows, rank * prec.n_u());
        Ok(Submodule {
            prec,
            rank,
            rows,
            provenance: Some(Provenance {
                origin: gens.to_vec(),
                transform,
                closure,
            }),
        })
    }

    pub fn zero(prec: Prec, rank: usize) -> Submodule {
        Submodule::from_gens(prec, rank, &[]).expect("zero module")
    }

    pub fn full(prec: Prec, rank: usize) -> Submodule {
        let gens: Vec<Vec<SeriesElt>> = (0..rank)
            .map(|i| {
                (0..rank)
                    .map(|j| {
                        if i == j {
                            SeriesElt::one(prec)
                        } else {
                            SeriesElt::zero(prec)
                        }
                    })
                    .collect()
            })
            .collect();
        Submodule::from_gens(prec, rank, &gens).expect("full module")
    }

    pub fn prec(&self) -> Prec {
        self.prec
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn howell_rows(&self) -> &[HowellRow] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    /// Canonical generators, as series vectors.
    pub fn basis(&self) -> Vec<Vec<SeriesElt>> {
        self.rows
            .iter()
            .map(|h| unflatten(self.prec, &h.row, self.rank))
            .collect()
    }

    fn check_compatible(&self, other: &Submodule) -> Result<()> {
        if self.prec != other.prec || self.rank != other.rank {
            return Err(Error::ShapeMismatch(
                "submodules live in different ambient modules".into(),
            ));
        }
        Ok(())
    }

    /// Submodules are equal iff their Howell bases coincide entrywise.
    pub fn equals(&self, other: &Submodule) -> bool {
        self.prec == other.prec
            && self.rank == other.rank
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.col == b.col && a.val == b.val && a.row == b.row)
    }

    pub fn membership(&self, v: &[SeriesElt]) -> Result<bool> {
        if v.len() != self.rank {
            return Err(Error::ShapeMismatch("vector/ambient rank".into()));
        }
        let flat = flatten(self.prec, v)?;
        Ok(znlin::is_member(self.prec.modulus(), &self.rows, &flat))
    }

    /// If v lies in the span, return series coefficients q_j with
    /// v = sum_j q_j * origin_generator_j. Requires a tracked module.
    pub fn membership_certificate(&self, v: &[SeriesElt]) -> Result<Option<Vec<SeriesElt>>> {
        if v.len() != self.rank {
            return Err(Error::ShapeMismatch("vector/ambient rank".into()));
        }
        let prov = self.provenance.as_ref().ok_or_else(|| {
            Error::InvalidInput("certificates need a module built with from_gens_tracked".into())
        })?;
        let ring = self.prec.modulus();
        let flat = flatten(self.prec, v)?;
        let (residual, coeffs) = reduce_with_certificate(ring, &self.rows, &flat);
        if residual.iter().any(|&x| x != 0) {
            return Ok(None);
        }
        // fold: coefficients vs howell rows -> vs closure rows -> series
        let mut series = vec![SeriesElt::zero(self.prec); prov.origin.len()];
        for (ci, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (cj, &(gi, k)) in prov.closure.iter().enumerate() {
                let t = ring.mul(c, prov.transform[ci][cj]);
                if t != 0 {
                    let add = SeriesElt::monomial(self.prec, t, k);
                    series[gi] = series[gi].add(&add)?;
                }
            }
        }
        Ok(Some(series))
    }

    pub fn contains(&self, other: &Submodule) -> Result<bool> {
        self.check_compatible(other)?;
        let ring = self.prec.modulus();
        Ok(other
            .rows
            .iter()
            .all(|h| znlin::is_member(ring, &self.rows, &h.row)))
    }

    /// Set intersection; automatically an R-submodule because both inputs
    /// are u-closed. Computed by the double-width span trick, which is valid
    /// over Z/p^N exactly because Howell (not merely echelon) form is used.
    pub fn intersect(&self, other: &Submodule) -> Result<Submodule> {
        self.check_compatible(other)?;
        let ring = self.prec.modulus();
        let n = self.rank * self.prec.n_u();
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
        Ok(Submodule::from_closed_span(self.prec, self.rank, &gens))
    }

    pub fn sum(&self, other: &Submodule) -> Result<Submodule> {
        self.check_compatible(other)?;
        let mut gens: Vec<Vec<u64>> = self.rows.iter().map(|h| h.row.clone()).collect();
        gens.extend(other.rows.iter().map(|h| h.row.clone()));
        Ok(Submodule::from_closed_span(self.prec, self.rank, &gens))
    }

    /// The submodule s * self.
    pub fn mul_series(&self, s: &SeriesElt) -> Result<Submodule> {
        let mut gens: Vec<Vec<u64>> = Vec::with_capacity(self.rows.len());
        for g in self.basis() {
            let prod: Vec<SeriesElt> = g.iter().map(|x| x.mul(s)).collect::<Result<Vec<_>>>()?;
            gens.push(flatten(self.prec, &prod)?);
        }
        Ok(Submodule::from_closed_span(self.prec, self.rank, &gens))
    }

    /// p-saturation at precision: divides out the p-content of every
    /// primitive direction (the computable shadow of intersecting with the
    /// rationalization).
    pub fn saturate(&self) -> Result<Submodule> {
        let ring = self.prec.modulus();
        let n = self.rank * self.prec.n_u();
        let rows: Vec<Vec<u64>> = self.rows.iter().map(|h| h.row.clone()).collect();
        let sat = znlin::saturate_rows(ring, &rows, n);
        let gens: Vec<Vec<u64>> = sat.iter().map(|h| h.row.clone()).collect();
        Ok(Submodule::from_closed_span(self.prec, self.rank, &gens))
    }

    /// Largest pivot valuation of the canonical basis; a nonzero value
    /// means some directions are only known at reduced p-precision.
    pub fn max_pivot_valuation(&self) -> u32 {
        self.rows.iter().map(|h| h.val).max().unwrap_or(0)
    }
}

/// Assemble a `GradedInvariants` from sorted nonzero invariant-factor
/// exponents at precision N.
pub fn invariants_from_exponents(exps: &[u32], n_p: u32) -> GradedInvariants {
    let mut torsion = Vec::new();
    let mut free_rank = 0usize;
    for &e in exps {
        if e == 0 {
            continue;
        }
        if e >= n_p {
            free_rank += 1;
        } else {
            torsion.push(e);
        }
    }
    torsion.sort_unstable();
    GradedInvariants {
        torsion,
        free_rank,
        n_p,
    }
}

/// Invariant factors of big/small as a Z/p^N-module, where small must be
/// contained in big (checked).
pub fn quotient_invariants(big: &Submodule, small: &Submodule) -> Result<GradedInvariants> {
    big.check_compatible(small)?;
    let prec = big.prec;
    let m = big.rank * prec.n_u();
    let exps =
        znlin::span_quotient_exponents(prec.p(), prec.n_p(), m, &big.rows, &small.rows)?;
    Ok(invariants_from_exponents(&exps, prec.n_p()))
}

/// Quotient invariants plus preimages in `big` of a basis of the free part
/// of big/small, returned as series vectors.
pub fn quotient_with_free_lifts(
    big: &Submodule,
    small: &Submodule,
) -> Result<(GradedInvariants, Vec<Vec<SeriesElt>>)> {
    big.check_compatible(small)?;
    let prec = big.prec;
    let m = big.rank * prec.n_u();
    let (exps, gens) = znlin::span_quotient_with_free_generators(
        prec.p(),
        prec.n_p(),
        m,
        &big.rows,
        &small.rows,
    )?;
    let lifts = gens
        .iter()
        .map(|g| unflatten(prec, g, big.rank))
        .collect();
    Ok((invariants_from_exponents(&exps, prec.n_p()), lifts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::EisensteinPoly;

    fn prec(p: u64, n: u32, m: usize) -> Prec {
        Prec::new(p, n, m).unwrap()
    }

    fn vecs(prec: Prec, rows: &[&[&[u64]]]) -> Vec<Vec<SeriesElt>> {
        rows.iter()
            .map(|r| r.iter().map(|c| SeriesElt::from_coeffs(prec, c)).collect())
            .collect()
    }

    #[test]
    fn intersect_idempotent_and_example() {
        // work in (Z/9)^2 with M = 1 so series are constants
        let pr = prec(3, 2, 1);
        let a = Submodule::from_gens(pr, 2, &vecs(pr, &[&[&[1], &[0]], &[&[0], &[3]]])).unwrap();
        let b = Submodule::from_gens(pr, 2, &vecs(pr, &[&[&[1], &[3]]])).unwrap();
        let aa = a.intersect(&a).unwrap();
        assert!(aa.equals(&a));
        let ab = a.intersect(&b).unwrap();
        assert!(ab.equals(&b), "span{{(1,0),(0,3)}} ∩ span{{(1,3)}} = span{{(1,3)}}");
    }

    #[test]
    fn intersect_with_containment() {
        // E*S^2 ∩ S*(E^2, 0) = S*(E^2, 0)
        let pr = prec(3, 2, 6);
        let e = EisensteinPoly::u_minus_p(3, 2);
        let es = e.as_series(pr).unwrap();
        let e2 = e.pow_series(pr, 2).unwrap();
        let z = SeriesElt::zero(pr);
        let big = Submodule::from_gens(
            pr,
            2,
            &[vec![es.clone(), z.clone()], vec![z.clone(), es.clone()]],
        )
        .unwrap();
        let small = Submodule::from_gens(pr, 2, &[vec![e2.clone(), z.clone()]]).unwrap();
        let i = big.intersect(&small).unwrap();
        assert!(i.equals(&small));
    }

    #[test]
    fn membership_basics() {
        let pr = prec(2, 2, 2);
        let s = Submodule::from_gens(
            pr,
            2,
            &vecs(pr, &[&[&[2, 0], &[0, 0]], &[&[0, 0], &[2, 0]]]),
        )
        .unwrap();
        let zero = vec![SeriesElt::zero(pr), SeriesElt::zero(pr)];
        assert!(s.membership(&zero).unwrap());
        let g = vec![SeriesElt::constant(pr, 2), SeriesElt::zero(pr)];
        assert!(s.membership(&g).unwrap());
        let v = vec![SeriesElt::one(pr), SeriesElt::zero(pr)];
        assert!(!s.membership(&v).unwrap(), "(1,0) not in p*(Z/p^2)^2");
    }

    #[test]
    fn membership_certificate_recovers_combination() {
        let pr = prec(3, 3, 5);
        let e = EisensteinPoly::u_minus_p(3, 3);
        let es = e.as_series(pr).unwrap();
        let z = SeriesElt::zero(pr);
        let one = SeriesElt::one(pr);
        // generators (E, 1) and (0, E)
        let g1 = vec![es.clone(), one.clone()];
        let g2 = vec![z.clone(), es.clone()];
        let s = Submodule::from_gens_tracked(pr, 2, &[g1.clone(), g2.clone()]).unwrap();
        // v = (u+2)*g1 + u^2*g2
        let c1 = SeriesElt::from_coeffs(pr, &[2, 1]);
        let c2 = SeriesElt::monomial(pr, 1, 2);
        let v = vec![
            c1.mul(&g1[0]).unwrap().add(&c2.mul(&g2[0]).unwrap()).unwrap(),
            c1.mul(&g1[1]).unwrap().add(&c2.mul(&g2[1]).unwrap()).unwrap(),
        ];
        let cert = s.membership_certificate(&v).unwrap().expect("member");
        // certificate must reproduce v
        let mut acc = vec![SeriesElt::zero(pr), SeriesElt::zero(pr)];
        for (q, g) in cert.iter().zip([&g1, &g2]) {
            for (a, x) in acc.iter_mut().zip(g.iter()) {
                *a = a.add(&q.mul(x).unwrap()).unwrap();
            }
        }
        for (a, b) in acc.iter().zip(&v) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn quotient_examples() {
        // big = small -> trivial
        let pr = prec(3, 2, 1);
        let full = Submodule::full(pr, 2);
        let q = quotient_invariants(&full, &full).unwrap();
        assert!(q.is_trivial());
        // (Z/p^2)^1 / p(Z/p^2)^1 -> one torsion exponent 1
        let pr1 = prec(3, 2, 1);
        let big = Submodule::full(pr1, 1);
        let small =
            Submodule::from_gens(pr1, 1, &[vec![SeriesElt::constant(pr1, 3)]]).unwrap();
        let q = quotient_invariants(&big, &small).unwrap();
        assert_eq!(q.torsion, vec![1]);
        assert_eq!(q.free_rank, 0);
        // (Z/9)^2 / span{(3,0)} -> free + torsion 1 (order 27)
        let big = Submodule::full(pr, 2);
        let small = Submodule::from_gens(
            pr,
            2,
            &[vec![SeriesElt::constant(pr, 3), SeriesElt::zero(pr)]],
        )
        .unwrap();
        let q = quotient_invariants(&big, &small).unwrap();
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.torsion, vec![1]);
        // non-containment is a usage error
        let other = Submodule::from_gens(
            pr,
            2,
            &[vec![SeriesElt::one(pr), SeriesElt::zero(pr)]],
        )
        .unwrap();
        assert!(matches!(
            quotient_invariants(&other, &big),
            Err(Error::NotContained(_))
        ));
    }

    #[test]
    fn quotient_invariant_under_generating_set_change() {
        let pr = prec(2, 3, 3);
        let g1 = vecs(pr, &[&[&[2, 1], &[0, 4]], &[&[0, 0], &[4, 0]]]);
        let s1 = Submodule::from_gens(pr, 2, &g1).unwrap();
        // same module, redundant generators
        let mut g2 = g1.clone();
        let extra: Vec<SeriesElt> = g1[0]
            .iter()
            .zip(&g1[1])
            .map(|(a, b)| a.add(b).unwrap())
            .collect();
        g2.push(extra);
        let s2 = Submodule::from_gens(pr, 2, &g2).unwrap();
        assert!(s1.equals(&s2));
        let full = Submodule::full(pr, 2);
        assert_eq!(
            quotient_invariants(&full, &s1).unwrap(),
            quotient_invariants(&full, &s2).unwrap()
        );
    }

    #[test]
    fn u_closure_is_enforced() {
        let pr = prec(2, 2, 3);
        let s = Submodule::from_gens(pr, 1, &[vec![SeriesElt::one(pr)]]).unwrap();
        // u * 1 must be in the span
        let v = vec![SeriesElt::monomial(pr, 1, 1)];
        assert!(s.membership(&v).unwrap());
    }

    #[test]
    fn saturate_divides_content() {
        let pr = prec(3, 2, 1);
        let s = Submodule::from_gens(
            pr,
            1,
            &[vec![SeriesElt::constant(pr, 3)]],
        )
        .unwrap();
        let sat = s.saturate().unwrap();
        assert!(sat.equals(&Submodule::full(pr, 1)));
    }
}
