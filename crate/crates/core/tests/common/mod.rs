//! Shared oracle machinery for the integration and acceptance tests:
//! exhaustive enumeration of tiny submodules, independent of the Howell
//! path it cross-checks.
#![allow(dead_code)] // each test target uses its own subset

use bkfilt::ring::{Prec, SeriesElt};
use bkfilt::submodule::Submodule;
use bkfilt::zmod::Modulus;
use std::collections::BTreeSet;

/// All elements of the flattened span, by closure under generator addition.
pub fn enumerate_span(ring: Modulus, gens: &[Vec<u64>], ncols: usize) -> BTreeSet<Vec<u64>> {
    let mut set = BTreeSet::new();
    set.insert(vec![0u64; ncols]);
    let mut frontier: Vec<Vec<u64>> = vec![vec![0u64; ncols]];
    while let Some(v) = frontier.pop() {
        for g in gens {
            let w: Vec<u64> = v.iter().zip(g).map(|(&a, &b)| ring.add(a, b)).collect();
            if set.insert(w.clone()) {
                frontier.push(w);
            }
        }
    }
    set
}

/// Enumerate a submodule of R^d through its canonical rows.
pub fn enumerate_submodule(sub: &Submodule) -> BTreeSet<Vec<u64>> {
    let prec = sub.prec();
    let ring = prec.modulus();
    let ncols = sub.rank() * prec.n_u();
    let gens: Vec<Vec<u64>> = sub.howell_rows().iter().map(|h| h.row.clone()).collect();
    enumerate_span(ring, &gens, ncols)
}

/// Invariant-factor exponents of big/small from pure counting: the number
/// of exponents >= k is log_p |p^(k-1) G| - log_p |p^k G| where G is the
/// quotient group. Completely independent of the lattice/Smith route.
pub fn quotient_exponents_by_counting(
    ring: Modulus,
    big: &BTreeSet<Vec<u64>>,
    small_rows: &[bkfilt::znlin::HowellRow],
) -> Vec<u32> {
    let n_p = ring.exponent();
    let coset_key = |v: &[u64]| -> Vec<u64> {
        bkfilt::znlin::reduce_with_certificate(ring, small_rows, v).0
    };
    let mut sizes = Vec::new(); // |p^k G| for k = 0..=n_p
    for k in 0..=n_p {
        let mult = bkfilt::zmod::checked_pow(ring.p(), k).unwrap();
        let mut cosets = BTreeSet::new();
        for v in big {
            let scaled: Vec<u64> = v.iter().map(|&x| ring.mul(x, mult)).collect();
            cosets.insert(coset_key(&scaled));
        }
        sizes.push(cosets.len() as u64);
    }
    let logp = |x: u64| -> u32 {
        let mut v = 0;
        let mut x = x;
        while x > 1 {
            assert_eq!(x % ring.p(), 0, "group size must be a p-power");
            x /= ring.p();
            v += 1;
        }
        v
    };
    // c_k = #{exponents >= k}; exponent e then appears c_e - c_{e+1} times
    let c = |k: u32| -> u32 {
        if k == 0 || k > n_p {
            return 0;
        }
        logp(sizes[k as usize - 1]) - logp(sizes[k as usize])
    };
    let mut out = Vec::new();
    for e in 1..=n_p {
        let count = c(e).saturating_sub(if e < n_p { c(e + 1) } else { 0 });
        for _ in 0..count {
            out.push(e);
        }
    }
    out.sort_unstable();
    out
}

/// A deterministic tiny random source for oracle sampling, independent of
/// the rand crates used inside the library.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n.max(1)
    }
}

/// Random full-window series with a bounded number of terms.
pub fn random_series(prec: Prec, rng: &mut Lcg, terms: usize) -> SeriesElt {
    let mut coeffs = vec![0u64; prec.n_u()];
    for _ in 0..terms {
        let pos = rng.below(prec.n_u() as u64) as usize;
        coeffs[pos] = rng.below(prec.modulus().order());
    }
    SeriesElt::from_coeffs(prec, &coeffs)
}

/// Random submodule from a few random generators.
pub fn random_submodule(prec: Prec, rank: usize, rng: &mut Lcg, ngens: usize) -> Submodule {
    let gens: Vec<Vec<SeriesElt>> = (0..ngens)
        .map(|_| (0..rank).map(|_| random_series(prec, rng, 3)).collect())
        .collect();
    Submodule::from_gens(prec, rank, &gens).unwrap()
}
