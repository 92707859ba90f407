//! Module constructors for the certified-crystalline corpus and the fuzz
//! families used by the universal-invariant tests.
//!
//! Certification provenance: rank-one twists phi(e) = c E^r e with c a unit
//! are the modules of crystalline characters; direct sums, tensor products
//! and constant base changes of certified modules stay certified. Fuzzed
//! effective isogenies U diag(E^{s_i}) V with non-constant unit U, V have
//! known height but carry no crystallinity assertion.

use crate::bk::mat_mul_series;
use crate::error::Result;
use crate::format::ModuleSpec;
use crate::ring::{EisensteinPoly, Prec, SeriesElt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    /// (a) rank-one twists phi(e) = c E^r e
    RankOne,
    /// (b) direct sums of rank-one twists
    DirectSum,
    /// (c) tensor products (Kronecker Frobenius, weights add)
    Tensor,
    /// (d) constant base changes of (a)-(c)
    BaseChange,
    /// (e) fuzz: effective isogenies with bounded height, not crystalline
    Fuzz,
    /// placeholder slot for a concrete two-weight borderline module
    /// (weights {0, p+1} failing the weak Frobenius condition); ships empty
    BorderlinePlaceholder,
}

impl CorpusKind {
    pub fn parse(s: &str) -> Option<CorpusKind> {
        Some(match s {
            "rank-one" | "a" => CorpusKind::RankOne,
            "direct-sum" | "b" => CorpusKind::DirectSum,
            "tensor" | "c" => CorpusKind::Tensor,
            "base-change" | "d" => CorpusKind::BaseChange,
            "fuzz" | "e" => CorpusKind::Fuzz,
            "borderline-placeholder" => CorpusKind::BorderlinePlaceholder,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorpusKind::RankOne => "rank-one",
            CorpusKind::DirectSum => "direct-sum",
            CorpusKind::Tensor => "tensor",
            CorpusKind::BaseChange => "base-change",
            CorpusKind::Fuzz => "fuzz",
            CorpusKind::BorderlinePlaceholder => "borderline-placeholder",
        }
    }
}

/// Generation parameters. The truncation order is h + p + 4 by default so
/// the mod-p layer (which needs M > hbar + p) and the conjugate filtration
/// (which needs M >= h + N) stay conclusive at n_p = 6.
#[derive(Debug, Clone, Copy)]
pub struct CorpusParams {
    pub p: u64,
    pub n_p: u32,
    pub count: usize,
    pub max_weight: u32,
    pub max_rank: usize,
}

impl CorpusParams {
    pub fn new(p: u64) -> CorpusParams {
        CorpusParams {
            p,
            n_p: 6,
            count: 8,
            max_weight: 2 * p as u32,
            max_rank: 3,
        }
    }

    fn prec_for_height(&self, h: u32) -> Result<Prec> {
        let m = h as usize + self.p as usize + 4;
        let m = m.max(self.n_p as usize + h as usize + 1);
        Prec::new(self.p, self.n_p, m)
    }
}

pub fn corpus_generate(kind: CorpusKind, params: &CorpusParams, seed: u64) -> Result<Vec<ModuleSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    match kind {
        CorpusKind::RankOne => {
            for i in 0..params.count {
                out.push(rank_one(params, &mut rng, i)?);
            }
        }
        CorpusKind::DirectSum => {
            for i in 0..params.count {
                out.push(direct_sum(params, &mut rng, i)?);
            }
        }
        CorpusKind::Tensor => {
            for i in 0..params.count {
                out.push(tensor(params, &mut rng, i)?);
            }
        }
        CorpusKind::BaseChange => {
            for i in 0..params.count {
                let base = match i % 3 {
                    0 => rank_one(params, &mut rng, i)?,
                    1 => direct_sum(params, &mut rng, i)?,
                    _ => tensor(params, &mut rng, i)?,
                };
                out.push(base_change(params, &mut rng, base, i)?);
            }
        }
        CorpusKind::Fuzz => {
            for i in 0..params.count {
                out.push(fuzz(params, &mut rng, i)?);
            }
        }
        CorpusKind::BorderlinePlaceholder => {
            // intentionally empty: a concrete two-weight borderline module
            // must be supplied by hand; the conditional check in the
            // torsion-bound checker activates only when one arrives
        }
    }
    Ok(out)
}

fn unit_constant(params: &CorpusParams, rng: &mut ChaCha8Rng) -> u64 {
    let pn = crate::zmod::checked_pow(params.p, params.n_p).expect("p^N");
    loop {
        let c = rng.gen_range(1..pn);
        if c % params.p != 0 {
            return c;
        }
    }
}

/// a unit power series: unit constant plus a few random terms
fn unit_series(prec: Prec, rng: &mut ChaCha8Rng, terms: usize) -> SeriesElt {
    let pn = prec.modulus().order();
    let mut coeffs = vec![0u64; prec.n_u()];
    loop {
        coeffs[0] = rng.gen_range(1..pn);
        if coeffs[0] % prec.p() != 0 {
            break;
        }
    }
    for _ in 0..terms {
        let pos = rng.gen_range(1..prec.n_u());
        coeffs[pos] = rng.gen_range(0..pn);
    }
    SeriesElt::from_coeffs(prec, &coeffs)
}

fn rank_one(params: &CorpusParams, rng: &mut ChaCha8Rng, idx: usize) -> Result<ModuleSpec> {
    let r = rng.gen_range(0..=params.max_weight);
    let prec = params.prec_for_height(r)?;
    let eis = EisensteinPoly::u_minus_p(params.p, params.n_p);
    let c = unit_constant(params, rng);
    let a = vec![vec![eis.pow_series(prec, r)?.scale(c)]];
    Ok(ModuleSpec::from_module_matrix(
        prec,
        &eis,
        &a,
        Some(vec![r]),
        true,
        Some(vec![vec![r as u64 % prec.modulus().order()]]),
        format!("rank-one-p{}-{idx}", params.p),
    ))
}

fn direct_sum(params: &CorpusParams, rng: &mut ChaCha8Rng, idx: usize) -> Result<ModuleSpec> {
    let d = rng.gen_range(2..=params.max_rank.max(2));
    let mut weights: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=params.max_weight)).collect();
    weights.sort_unstable();
    let h = *weights.last().unwrap();
    let prec = params.prec_for_height(h)?;
    let eis = EisensteinPoly::u_minus_p(params.p, params.n_p);
    let mut a = vec![vec![SeriesElt::zero(prec); d]; d];
    let ring = prec.modulus();
    let mut sen = vec![vec![0u64; d]; d];
    for (i, &r) in weights.iter().enumerate() {
        let c = unit_constant(params, rng);
        a[i][i] = eis.pow_series(prec, r)?.scale(c);
        sen[i][i] = r as u64 % ring.order();
    }
    Ok(ModuleSpec::from_module_matrix(
        prec,
        &eis,
        &a,
        Some(weights),
        true,
        Some(sen),
        format!("direct-sum-p{}-{idx}", params.p),
    ))
}

fn tensor(params: &CorpusParams, rng: &mut ChaCha8Rng, idx: usize) -> Result<ModuleSpec> {
    // tensor a rank-one twist with a small direct sum; weights add and the
    // cap keeps them within max_weight
    let r0 = rng.gen_range(0..=params.max_weight / 2);
    let d2 = rng.gen_range(1..=2usize);
    let mut w2: Vec<u32> = (0..d2)
        .map(|_| rng.gen_range(0..=(params.max_weight - r0).min(params.max_weight / 2)))
        .collect();
    w2.sort_unstable();
    let weights: Vec<u32> = w2.iter().map(|&s| r0 + s).collect();
    let h = *weights.last().unwrap();
    let prec = params.prec_for_height(h)?;
    let eis = EisensteinPoly::u_minus_p(params.p, params.n_p);
    let c0 = unit_constant(params, rng);
    let a1 = vec![vec![eis.pow_series(prec, r0)?.scale(c0)]];
    let mut a2 = vec![vec![SeriesElt::zero(prec); d2]; d2];
    for (i, &s) in w2.iter().enumerate() {
        let c = unit_constant(params, rng);
        a2[i][i] = eis.pow_series(prec, s)?.scale(c);
    }
    // Kronecker product, row-major on (i ⊗ j)
    let d = d2;
    let mut a = vec![vec![SeriesElt::zero(prec); d]; d];
    for i in 0..d2 {
        for j in 0..d2 {
            a[i][j] = a1[0][0].mul(&a2[i][j])?;
        }
    }
    Ok(ModuleSpec::from_module_matrix(
        prec,
        &eis,
        &a,
        Some(weights),
        true,
        None,
        format!("tensor-p{}-{idx}", params.p),
    ))
}

fn base_change(
    params: &CorpusParams,
    rng: &mut ChaCha8Rng,
    base: ModuleSpec,
    idx: usize,
) -> Result<ModuleSpec> {
    let prec = base.prec()?;
    let eis = base.eisenstein()?;
    let d = base.d;
    let ring = prec.modulus();
    // random constant U in GL_d(Z/p^N): unit lower times unit upper
    let mut u = vec![vec![0u64; d]; d];
    for i in 0..d {
        for j in 0..d {
            u[i][j] = if i == j {
                unit_constant(params, rng)
            } else if i > j {
                rng.gen_range(0..ring.order())
            } else {
                0
            };
        }
    }
    let mut up = vec![vec![0u64; d]; d];
    for i in 0..d {
        for j in 0..d {
            up[i][j] = if i == j {
                unit_constant(params, rng)
            } else if i < j {
                rng.gen_range(0..ring.order())
            } else {
                0
            };
        }
    }
    let mut prod = vec![vec![0u64; d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0u64;
            for t in 0..d {
                acc = ring.add(acc, ring.mul(u[i][t], up[t][j]));
            }
            prod[i][j] = acc;
        }
    }
    let m = base.to_module()?;
    let changed = crate::bk::base_change_constant(&m, &prod)?;
    Ok(ModuleSpec::from_module_matrix(
        prec,
        &eis,
        changed.matrix(),
        base.weights.clone(),
        true,
        None,
        format!("base-change-p{}-{idx}", params.p),
    ))
}

/// random unit-triangular-product matrix over R with sparse series entries
fn unit_matrix_series(
    prec: Prec,
    d: usize,
    rng: &mut ChaCha8Rng,
    terms: usize,
) -> Result<Vec<Vec<SeriesElt>>> {
    let pn = prec.modulus().order();
    let mut l = vec![vec![SeriesElt::zero(prec); d]; d];
    let mut u = vec![vec![SeriesElt::zero(prec); d]; d];
    for i in 0..d {
        for j in 0..d {
            if i == j {
                l[i][j] = unit_series(prec, rng, terms);
                u[i][j] = unit_series(prec, rng, terms);
            } else {
                let mut coeffs = vec![0u64; prec.n_u()];
                for _ in 0..terms {
                    let pos = rng.gen_range(0..prec.n_u());
                    coeffs[pos] = rng.gen_range(0..pn);
                }
                let s = SeriesElt::from_coeffs(prec, &coeffs);
                if i > j {
                    l[i][j] = s;
                } else {
                    u[i][j] = s;
                }
            }
        }
    }
    mat_mul_series(prec, &l, &u)
}

fn fuzz(params: &CorpusParams, rng: &mut ChaCha8Rng, idx: usize) -> Result<ModuleSpec> {
    let d = rng.gen_range(1..=params.max_rank.max(1));
    // stay within the default height-search cap for undeclared weights
    let hmax = params
        .max_weight
        .min(params.p as u32 + 2)
        .min(4 * d as u32);
    let s: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=hmax)).collect();
    let h = s.iter().max().copied().unwrap_or(0);
    let prec = params.prec_for_height(h)?;
    let eis = EisensteinPoly::u_minus_p(params.p, params.n_p);
    let mut diag = vec![vec![SeriesElt::zero(prec); d]; d];
    for (i, &r) in s.iter().enumerate() {
        diag[i][i] = eis.pow_series(prec, r)?;
    }
    let u = unit_matrix_series(prec, d, rng, 2)?;
    let v = unit_matrix_series(prec, d, rng, 2)?;
    let a = mat_mul_series(prec, &mat_mul_series(prec, &u, &diag)?, &v)?;
    Ok(ModuleSpec::from_module_matrix(
        prec,
        &eis,
        &a,
        None,
        false,
        None,
        format!("fuzz-p{}-{idx}", params.p),
    ))
}
