//! Mod-p Breuil-Kisin modules: Smith decomposition and jump multisets, the
//! Nygaard filtration on phi(M), the sub-Hodge filtration, the
//! sub-conjugate pieces N_{n,i}, the unaligned-Frobenius criterion via
//! filtration comparison, and the zip-filtration lemma.
//!
//! Everything here is exact linear algebra over F_p inside a degree window.
//! Inputs carry their truncation order M; internally the window is extended
//! (entries are exact polynomials, so extension is free) so that boundary
//! artifacts stay clear of the degrees [0, hbar + p] the checks read.

use crate::error::{Error, Result};
use crate::fplin::{smith_dvr, FpPoly, FpSpace, SmithDecompDvr};
use crate::ring::Prec;
use crate::bk::BKModule;

/// A mod-p Breuil-Kisin module with its certified Smith data.
#[derive(Debug, Clone)]
pub struct ModpBK {
    p: u64,
    rank: usize,
    /// user-facing truncation order
    input_window: usize,
    /// internal working window
    window: usize,
    abar: Vec<Vec<FpPoly>>,
    smith: SmithDecompDvr,
    hbar: usize,
}

/// The i-th sub-conjugate pieces N_{n,i} as subspaces of M_HT = k^d,
/// indexed by n in [0, hbar] and i in [0, p-1].
#[derive(Debug, Clone)]
pub struct SubConjPieces {
    pub pieces: Vec<Vec<FpSpace>>,
}

/// Dimensions (and bases) of the sub-Hodge filtration Fil^n_Hod phi(M_k).
#[derive(Debug, Clone)]
pub struct SubHodgeFiltration {
    /// dims[n] = dim Fil^n_Hod for n in [0, hbar+1]
    pub dims: Vec<usize>,
    /// dims of the mod-p Hodge filtration Fil^n of M_dR, same index range
    pub hodge_dims: Vec<usize>,
    /// injectivity of Fil^n_Hod -> Fil^n M_dR held at every n (a theorem)
    pub injective: bool,
}

impl ModpBK {
    pub fn new(p: u64, rank: usize, entries: Vec<Vec<FpPoly>>, input_window: usize) -> Result<ModpBK> {
        if rank == 0 || entries.len() != rank || entries.iter().any(|r| r.len() != rank) {
            return Err(Error::ShapeMismatch("mod-p matrix must be square".into()));
        }
        // certified Smith data at the input window decides the jumps
        let probe: Vec<Vec<FpPoly>> = entries
            .iter()
            .map(|r| r.iter().map(|x| x.resize(input_window)).collect())
            .collect();
        let smith_probe = smith_dvr(&probe)?;
        let hbar = smith_probe.exponents.last().copied().unwrap_or(0);
        // widen the window so degrees up to hbar + p are unpolluted
        let window = input_window + 2 * (hbar + p as usize) + 2;
        let abar: Vec<Vec<FpPoly>> = entries
            .iter()
            .map(|r| r.iter().map(|x| x.resize(window)).collect())
            .collect();
        let smith = smith_dvr(&abar)?;
        if smith.exponents != smith_probe.exponents {
            return Err(Error::InternalConsistency(
                "Smith exponents changed when widening the window".into(),
            ));
        }
        Ok(ModpBK {
            p,
            rank,
            input_window,
            window,
            abar,
            smith,
            hbar,
        })
    }

    /// Coefficient-wise reduction of an integral module.
    pub fn from_reduction(m: &BKModule) -> Result<ModpBK> {
        let prec: Prec = m.prec();
        if m.eisenstein().degree() != 1 {
            return Err(Error::NotApplicable(
                "mod-p analysis requires a degree-one E (E ≡ u mod p)".into(),
            ));
        }
        let p = prec.p();
        let mu = prec.n_u();
        let entries: Vec<Vec<FpPoly>> = m
            .matrix()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|x| {
                        let coeffs: Vec<u64> =
                            (0..mu).map(|i| x.coeff_raw(i) % p).collect();
                        FpPoly::from_coeffs(p, mu, &coeffs)
                    })
                    .collect()
            })
            .collect();
        ModpBK::new(p, m.rank(), entries, mu)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn hbar(&self) -> usize {
        self.hbar
    }

    pub fn matrix(&self) -> &[Vec<FpPoly>] {
        &self.abar
    }

    pub fn smith(&self) -> &SmithDecompDvr {
        &self.smith
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn dim_flat(&self) -> usize {
        self.rank * self.window
    }

    fn flatten(&self, v: &[FpPoly]) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.dim_flat());
        for x in v {
            out.extend_from_slice(&x.coeffs);
        }
        out
    }

    fn column(&self, j: usize) -> Vec<FpPoly> {
        (0..self.rank).map(|i| self.abar[i][j].clone()).collect()
    }

    /// shift every coordinate block by k degrees (multiplication by u^k)
    fn shift_flat(&self, v: &[u64], k: usize) -> Vec<u64> {
        let w = self.window;
        let mut out = vec![0u64; v.len()];
        for b in 0..self.rank {
            for i in 0..w.saturating_sub(k) {
                out[b * w + i + k] = v[b * w + i];
            }
        }
        out
    }

    /// u-closed span of the columns: the mod-p image module M*.
    pub fn mstar_space(&self) -> FpSpace {
        let mut gens = Vec::new();
        for j in 0..self.rank {
            let base = self.flatten(&self.column(j));
            let mut cur = base;
            for _ in 0..self.window {
                gens.push(cur.clone());
                cur = self.shift_flat(&cur, 1);
            }
        }
        FpSpace::from_gens(self.p, self.dim_flat(), &gens)
    }

    /// u^p-closed span of the columns: phi(M) as a k[[u^p]]-module.
    pub fn phi_submodule(&self) -> FpSpace {
        let p = self.p as usize;
        let mut gens = Vec::new();
        for j in 0..self.rank {
            let base = self.flatten(&self.column(j));
            let mut k = 0usize;
            let mut cur = base;
            while k < self.window {
                gens.push(cur.clone());
                cur = self.shift_flat(&cur, p);
                k += p;
            }
        }
        FpSpace::from_gens(self.p, self.dim_flat(), &gens)
    }

    /// the coordinate subspace u^n * M of the window
    fn u_power_space(&self, n: usize) -> FpSpace {
        let w = self.window;
        let mut gens = Vec::new();
        for b in 0..self.rank {
            for i in n..w {
                let mut v = vec![0u64; self.dim_flat()];
                v[b * w + i] = 1;
                gens.push(v);
            }
        }
        FpSpace::from_gens(self.p, self.dim_flat(), &gens)
    }

    /// Fil^n phi(M) = phi(M) ∩ u^n M.
    pub fn fil_phi(&self, phi: &FpSpace, n: usize) -> FpSpace {
        if n == 0 {
            return phi.clone();
        }
        phi.intersect(&self.u_power_space(n))
    }

    /// Fil^n M* = M* ∩ u^n M (the mod-p Nygaard filtration).
    pub fn fil_mstar(&self, mstar: &FpSpace, n: usize) -> FpSpace {
        if n == 0 {
            return mstar.clone();
        }
        mstar.intersect(&self.u_power_space(n))
    }

    /// extract the coefficient of u^n of each coordinate: the embedding
    /// gr^n M* = Fil_n M_HT ⊆ M_HT = k^d given by division by u^n mod u
    fn coeff_extract(&self, v: &[u64], n: usize) -> Vec<u64> {
        let w = self.window;
        (0..self.rank).map(|b| v[b * w + n]).collect()
    }

    /// The increasing mod-p conjugate filtration Fil_n on M_HT = k^d.
    pub fn conjugate_filtration(&self) -> Vec<FpSpace> {
        let mstar = self.mstar_space();
        let mut out = Vec::with_capacity(self.hbar + 1);
        for n in 0..=self.hbar {
            let fil = self.fil_mstar(&mstar, n);
            let img = fil.image(self.rank, |v| self.coeff_extract(v, n));
            out.push(img);
        }
        out
    }

    /// Jump multiset a_1 <= ... <= a_d from the certified Smith form,
    /// cross-checked against dim gr_n of the mod-p conjugate filtration.
    pub fn jumps(&self) -> Result<Vec<usize>> {
        let jumps = self.smith.exponents.clone();
        let conj = self.conjugate_filtration();
        for n in 0..=self.hbar {
            let mult = jumps.iter().filter(|&&a| a == n).count();
            let prev = if n == 0 { 0 } else { conj[n - 1].dim() };
            let here = conj[n].dim();
            if here - prev != mult {
                return Err(Error::InternalConsistency(format!(
                    "dim gr_{n} of the mod-p conjugate filtration is {} but the \
                     jump multiplicity is {mult}",
                    here - prev
                )));
            }
        }
        Ok(jumps)
    }

    /// The sub-Hodge filtration dims and the comparison with the mod-p
    /// Hodge filtration, including the injectivity that is a theorem.
    pub fn sub_hodge(&self) -> Result<SubHodgeFiltration> {
        if self.input_window <= self.hbar + self.p as usize {
            return Err(Error::InsufficientPrecision(format!(
                "sub-Hodge filtration needs truncation order M > hbar + p = {}",
                self.hbar + self.p as usize
            )));
        }
        let phi = self.phi_submodule();
        let mstar = self.mstar_space();
        let u_mstar = mstar.image(self.dim_flat(), |v| self.shift_flat(v, 1));
        let p = self.p as usize;
        let top = self.hbar + 1;
        let mut fil_phi_cache: Vec<FpSpace> = Vec::with_capacity(top + 1);
        for n in 0..=top {
            fil_phi_cache.push(self.fil_phi(&phi, n));
        }
        let mut dims = Vec::with_capacity(top + 1);
        let mut hodge_dims = Vec::with_capacity(top + 1);
        let mut injective = true;
        for n in 0..=top {
            // u^p Fil^{n-p} phi  (zero shift of the full phi for n < p)
            let below = if n >= p {
                fil_phi_cache[n - p].image(self.dim_flat(), |v| self.shift_flat(v, p))
            } else {
                phi.image(self.dim_flat(), |v| self.shift_flat(v, p))
            };
            let fil_n = &fil_phi_cache[n];
            if !fil_n.contains(&below) {
                return Err(Error::InternalConsistency(format!(
                    "u^p Fil^{}(phi) not inside Fil^{n}(phi)",
                    n as isize - p as isize
                )));
            }
            dims.push(fil_n.dim() - below.dim());
            // mod-p Hodge filtration: image of Fil^n M* in M*/uM*
            let fil_mstar = self.fil_mstar(&mstar, n);
            let meet = fil_mstar.intersect(&u_mstar);
            hodge_dims.push(fil_mstar.dim() - meet.dim());
            // injectivity of Fil^n_Hod -> Fil^n M_dR:
            // Fil^n phi ∩ u M* must equal u^p Fil^{n-p} phi
            let ker = fil_n.intersect(&u_mstar);
            if !ker.equals(&below) {
                injective = false;
            }
        }
        if !injective {
            return Err(Error::InternalConsistency(
                "sub-Hodge filtration failed to inject into the Hodge filtration".into(),
            ));
        }
        Ok(SubHodgeFiltration {
            dims,
            hodge_dims,
            injective,
        })
    }

    /// The unaligned mod-p Frobenius criterion: pass iff the sub-Hodge and
    /// Hodge filtrations have equal dimensions at every level. On failure
    /// the witnessing level is reported. The criterion is authoritative;
    /// when the Smith transform Y already has all entries in k[[u^p]] it is
    /// returned as an explicit witness, otherwise the verdict is
    /// criterion-only.
    pub fn unaligned_check(&self) -> Result<(bool, Option<usize>)> {
        let sh = self.sub_hodge()?;
        for (n, (a, b)) in sh.dims.iter().zip(&sh.hodge_dims).enumerate() {
            if a != b {
                return Ok((false, Some(n)));
            }
        }
        Ok((true, None))
    }

    /// Best-effort explicit witness for the unaligned condition: the Y of
    /// the certified Smith decomposition, when its entries happen to lie in
    /// k[[u^p]] up to degree `limit`.
    pub fn unaligned_y_witness(&self, limit: usize) -> Option<Vec<Vec<FpPoly>>> {
        let p = self.p as usize;
        let y = &self.smith.y;
        let bound = limit.min(self.window);
        for row in y {
            for entry in row {
                for t in 0..bound {
                    if t % p != 0 && entry.coeff(t) != 0 {
                        return None;
                    }
                }
            }
        }
        Some(y.clone())
    }

    /// The sub-conjugate pieces N_{n,i} ⊆ M_HT = k^d: the image of
    /// u^i Fil^{n-i} phi(M) under the gr^n embedding.
    pub fn sub_conjugate_pieces(&self) -> Result<SubConjPieces> {
        let phi = self.phi_submodule();
        let p = self.p as usize;
        let top = self.hbar;
        let mut fil_phi_cache: Vec<FpSpace> = Vec::with_capacity(top + 1);
        for n in 0..=top {
            fil_phi_cache.push(self.fil_phi(&phi, n));
        }
        let zero = FpSpace::zero(self.p, self.rank);
        let mut pieces = Vec::with_capacity(top + 1);
        for n in 0..=top {
            let mut row = Vec::with_capacity(p);
            for i in 0..p {
                if i > n {
                    row.push(zero.clone());
                    continue;
                }
                // shift Fil^{n-i} phi by u^i, then read the u^n coefficient
                let shifted =
                    fil_phi_cache[n - i].image(self.dim_flat(), |v| self.shift_flat(v, i));
                let img = shifted.image(self.rank, |v| self.coeff_extract(v, n));
                row.push(img);
            }
            pieces.push(row);
        }
        let sc = SubConjPieces { pieces };
        self.verify_sub_conj_relations(&sc)?;
        Ok(sc)
    }

    /// The structural relations of the construction: N_{n-1,i-1} = N_{n,i}
    /// for 1 <= i <= p-1, and N_{n-1,p-1} ⊆ N_{n,0}.
    fn verify_sub_conj_relations(&self, sc: &SubConjPieces) -> Result<()> {
        let p = self.p as usize;
        for n in 1..sc.pieces.len() {
            for i in 1..p {
                if !sc.pieces[n][i].equals(&sc.pieces[n - 1][i - 1]) {
                    return Err(Error::InternalConsistency(format!(
                        "N_{{{},{}}} != N_{{{},{}}}",
                        n - 1,
                        i - 1,
                        n,
                        i
                    )));
                }
            }
            if !sc.pieces[n][0].contains(&sc.pieces[n - 1][p - 1]) {
                return Err(Error::InternalConsistency(format!(
                    "N_{{{},{}}} not inside N_{{{},0}}",
                    n - 1,
                    p - 1,
                    n
                )));
            }
        }
        Ok(())
    }

    /// Graded bookkeeping: sum_i dim N_{n,i} - sum_i dim N_{n-1,i} equals
    /// dim Fil^n_Hod - dim Fil^{n+1}_Hod for every n.
    pub fn graded_bookkeeping_check(&self, sc: &SubConjPieces, sh: &SubHodgeFiltration) -> Result<()> {
        let top = self.hbar;
        for n in 0..=top {
            let here: usize = sc.pieces[n].iter().map(|s| s.dim()).sum();
            let prev: usize = if n == 0 {
                0
            } else {
                sc.pieces[n - 1].iter().map(|s| s.dim()).sum()
            };
            let gr_hod = sh.dims[n] - sh.dims.get(n + 1).copied().unwrap_or(0);
            if here - prev != gr_hod {
                return Err(Error::InternalConsistency(format!(
                    "sub-conjugate graded dimension {} at n = {n} does not match \
                     the sub-Hodge graded dimension {gr_hod}",
                    here - prev
                )));
            }
        }
        Ok(())
    }

    /// On crystalline-flagged inputs the direct sum ⊕_i N_{n,i} maps
    /// bijectively onto Fil_n of the mod-p conjugate filtration. Returns
    /// (injective at every n, bijective at every n).
    pub fn sub_conj_against_conjugate(&self, sc: &SubConjPieces) -> (bool, bool) {
        let conj = self.conjugate_filtration();
        let mut injective = true;
        let mut bijective = true;
        for n in 0..=self.hbar {
            let dims_sum: usize = sc.pieces[n].iter().map(|s| s.dim()).sum();
            let mut span = FpSpace::zero(self.p, self.rank);
            for piece in &sc.pieces[n] {
                span = span.sum(piece);
            }
            if span.dim() != dims_sum {
                injective = false;
            }
            if !span.equals(&conj[n]) {
                bijective = false;
            }
        }
        (injective, bijective)
    }
}

/// Multiset congruence of the jumps against the declared weights:
/// {a_i mod p} = {r_i mod p} with multiplicities, and max a_i <= r_d.
pub fn multiset_congruence_check(jumps: &[usize], weights: &[u32], p: u64) -> (bool, String) {
    let rd = weights.iter().max().copied().unwrap_or(0) as usize;
    if let Some(&amax) = jumps.iter().max().as_ref() {
        if *amax > rd {
            return (false, format!("max jump {amax} exceeds r_d = {rd}"));
        }
    }
    let mut ja: Vec<u64> = jumps.iter().map(|&a| a as u64 % p).collect();
    let mut ra: Vec<u64> = weights.iter().map(|&r| r as u64 % p).collect();
    ja.sort_unstable();
    ra.sort_unstable();
    if ja != ra {
        return (
            false,
            format!("jump residues {ja:?} differ from weight residues {ra:?}"),
        );
    }
    (true, String::new())
}

/// Conclusion of the zip-filtration lemma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZipConclusion {
    Coincide,
}

/// The zip lemma on dimension sequences: a decreasing filtration P^• and an
/// increasing Q_• with matching gradeds, plus sub-filtrations with matching
/// gradeds, force the sub-filtrations to coincide with the originals. Both
/// internal proofs are run (stepwise induction and the Hodge-number count)
/// and must agree; hypothesis violations are usage errors.
pub fn zip_check(
    p_dims: &[usize],
    q_dims: &[usize],
    pt_dims: &[usize],
    qt_dims: &[usize],
    h: usize,
) -> Result<ZipConclusion> {
    // shape: p_dims has h+2 entries P^0..P^{h+1} with P^{h+1} = 0;
    // q_dims has h+1 entries Q_0..Q_h.
    if p_dims.len() != h + 2 || pt_dims.len() != h + 2 || q_dims.len() != h + 1 || qt_dims.len() != h + 1 {
        return Err(Error::ShapeMismatch(
            "expect P-dims of length h+2 and Q-dims of length h+1".into(),
        ));
    }
    let hypothesis = |ok: bool, msg: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("zip hypothesis violated: {msg}")))
        }
    };
    hypothesis(p_dims[h + 1] == 0 && pt_dims[h + 1] == 0, "P^{h+1} = 0")?;
    hypothesis(q_dims[h] == p_dims[0], "dim Q = dim P")?;
    hypothesis(qt_dims[h] == q_dims[h], "Q~_h = Q")?;
    hypothesis(pt_dims[0] == p_dims[0], "P~^0 = P")?;
    hypothesis(
        p_dims.windows(2).all(|w| w[0] >= w[1]) && pt_dims.windows(2).all(|w| w[0] >= w[1]),
        "P decreasing",
    )?;
    hypothesis(
        q_dims.windows(2).all(|w| w[0] <= w[1]) && qt_dims.windows(2).all(|w| w[0] <= w[1]),
        "Q increasing",
    )?;
    hypothesis(
        pt_dims.iter().zip(p_dims).all(|(a, b)| a <= b),
        "P~ ⊆ P pointwise",
    )?;
    hypothesis(
        qt_dims.iter().zip(q_dims).all(|(a, b)| a <= b),
        "Q~ ⊆ Q pointwise",
    )?;
    for i in 0..=h {
        let gr_p = p_dims[i] - p_dims[i + 1];
        let gr_q = q_dims[i] - if i == 0 { 0 } else { q_dims[i - 1] };
        hypothesis(gr_p == gr_q, "gr P = gr Q")?;
        let gr_pt = pt_dims[i] - pt_dims[i + 1];
        let gr_qt = qt_dims[i] - if i == 0 { 0 } else { qt_dims[i - 1] };
        hypothesis(gr_pt == gr_qt, "gr P~ = gr Q~")?;
    }

    // proof engine 1: stepwise induction
    let mut ind_ok = true;
    for n in 0..=h {
        // knowing pt[n] = p[n], the graded match forces qt[n] >= q[n]
        let qt_n = qt_dims[n];
        let q_n = q_dims[n];
        let forced = (if n == 0 { 0 } else { q_dims[n - 1] }) + p_dims[n] - pt_dims[n + 1];
        if forced < q_n || qt_n != q_n || pt_dims[n] != p_dims[n] {
            ind_ok = false;
            break;
        }
    }

    // proof engine 2: Hodge numbers t(P) = sum_{i>=1} dim P^i etc.
    let t_p: usize = p_dims[1..].iter().sum();
    let t_pt: usize = pt_dims[1..].iter().sum();
    let t_q: usize = h * q_dims[h] - q_dims[..h].iter().sum::<usize>();
    let t_qt: usize = h * qt_dims[h] - qt_dims[..h].iter().sum::<usize>();
    let hodge_ok = t_p == t_q && t_pt == t_qt && t_pt <= t_p && t_qt >= t_q && t_pt == t_p;

    if ind_ok != hodge_ok {
        return Err(Error::InternalConsistency(
            "the two zip-lemma proof engines disagree".into(),
        ));
    }
    if !ind_ok {
        // dimensions satisfying all stated hypotheses always zip; reaching
        // here means the hypothesis list above missed a violation
        return Err(Error::InvalidInput(
            "zip hypothesis violated: sub-filtration dimensions are not realizable".into(),
        ));
    }
    Ok(ZipConclusion::Coincide)
}
