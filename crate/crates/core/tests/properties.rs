//! Property-based invariants: ring axioms at every tested precision,
//! Frobenius multiplicativity, division/multiplication round trips,
//! lattice-operation laws, and invariance of canonical data under
//! generating-set and basis changes.

mod common;

use bkfilt::fplin::{smith_dvr, unit_det, FpPoly};
use bkfilt::ring::{weierstrass_divide_exact, EisensteinPoly, Prec, SeriesElt};
use bkfilt::submodule::{quotient_invariants, Submodule};
use common::Lcg;
use proptest::prelude::*;

fn arb_prec() -> impl Strategy<Value = Prec> {
    (prop_oneof![Just(2u64), Just(3), Just(5)], 1u32..=4, 2usize..=6)
        .prop_map(|(p, n, m)| Prec::new(p, n, m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms((prec, seed) in (arb_prec(), any::<u64>())) {
        let mut rng = Lcg(seed);
        let x = common::random_series(prec, &mut rng, 4);
        let y = common::random_series(prec, &mut rng, 4);
        let z = common::random_series(prec, &mut rng, 4);
        // associativity and commutativity of both operations
        prop_assert_eq!(
            x.mul(&y).unwrap().mul(&z).unwrap(),
            x.mul(&y.mul(&z).unwrap()).unwrap()
        );
        prop_assert_eq!(x.mul(&y).unwrap(), y.mul(&x).unwrap());
        prop_assert_eq!(
            x.add(&y).unwrap().add(&z).unwrap(),
            x.add(&y.add(&z).unwrap()).unwrap()
        );
        // distributivity
        prop_assert_eq!(
            x.mul(&y.add(&z).unwrap()).unwrap(),
            x.mul(&y).unwrap().add(&x.mul(&z).unwrap()).unwrap()
        );
        // identities
        prop_assert_eq!(x.mul(&SeriesElt::one(prec)).unwrap(), x.clone());
        prop_assert!(x.mul(&SeriesElt::zero(prec)).unwrap().is_zero());
    }

    #[test]
    fn frobenius_is_a_ring_map(prec in arb_prec(), seed in any::<u64>()) {
        let mut rng = Lcg(seed);
        let x = common::random_series(prec, &mut rng, 4);
        let y = common::random_series(prec, &mut rng, 4);
        prop_assert_eq!(
            x.mul(&y).unwrap().frobenius(),
            x.frobenius().mul(&y.frobenius()).unwrap()
        );
        prop_assert_eq!(
            x.add(&y).unwrap().frobenius(),
            x.frobenius().add(&y.frobenius()).unwrap()
        );
    }

    #[test]
    fn weierstrass_roundtrip(prec in arb_prec(), seed in any::<u64>(), n in 0u32..3) {
        let mut rng = Lcg(seed);
        let e = EisensteinPoly::u_minus_p(prec.p(), prec.n_p());
        let x = common::random_series(prec, &mut rng, 4);
        let f = {
            let en = e.pow_series(prec, n).unwrap();
            x.mul(&en).unwrap()
        };
        match weierstrass_divide_exact(&f, &e, n) {
            Ok(q) => {
                // multiplication reproduces the input on the reliable window
                let back = q.mul(&e.pow_series(prec, n).unwrap()).unwrap();
                for i in 0..back.eff_u() {
                    prop_assert_eq!(back.coeff(i).unwrap(), f.coeff(i).unwrap());
                }
                // the quotient agrees with x coefficientwise up to the
                // staircase: ambiguity at u^i has p-valuation >= M - n - i
                let md = prec.modulus();
                for i in 0..q.eff_u() {
                    let slack = (prec.n_u() - n as usize - i).min(prec.n_p() as usize);
                    let modulus = bkfilt::zmod::checked_pow(prec.p(), slack as u32).unwrap();
                    prop_assert_eq!(
                        md.sub(q.coeff(i).unwrap(), x.coeff(i).unwrap()) % modulus,
                        0,
                        "coefficient u^{} differs beyond the staircase", i
                    );
                }
            }
            // windows too small to certify exactness refuse, never guess
            Err(bkfilt::error::Error::InsufficientPrecision(_)) => {}
            Err(other) => prop_assert!(false, "unexpected error {other}"),
        }
    }

    #[test]
    fn intersect_laws(seed in any::<u64>()) {
        let mut rng = Lcg(seed);
        let prec = Prec::new(2, 2, 4).unwrap();
        let d = 2;
        let a = common::random_submodule(prec, d, &mut rng, 2);
        let b = common::random_submodule(prec, d, &mut rng, 2);
        let c = common::random_submodule(prec, d, &mut rng, 2);
        let ab = a.intersect(&b).unwrap();
        // commutative, associative, idempotent, monotone
        prop_assert!(ab.equals(&b.intersect(&a).unwrap()));
        prop_assert!(
            ab.intersect(&c).unwrap().equals(&a.intersect(&b.intersect(&c).unwrap()).unwrap())
        );
        prop_assert!(a.intersect(&a).unwrap().equals(&a));
        prop_assert!(a.contains(&ab).unwrap());
        prop_assert!(b.contains(&ab).unwrap());
    }

    #[test]
    fn quotient_invariants_generating_set_invariance(seed in any::<u64>()) {
        let mut rng = Lcg(seed);
        let prec = Prec::new(3, 2, 3).unwrap();
        let d = 2;
        let big = common::random_submodule(prec, d, &mut rng, 3);
        let small = {
            let gens: Vec<Vec<SeriesElt>> = big
                .basis()
                .into_iter()
                .map(|g| {
                    let c = common::random_series(prec, &mut rng, 2);
                    g.iter().map(|x| x.mul(&c).unwrap()).collect()
                })
                .collect();
            Submodule::from_gens(prec, d, &gens).unwrap()
        };
        let q1 = quotient_invariants(&big, &small).unwrap();
        // redundant generators change nothing
        let mut gens2 = big.basis();
        if let (Some(a), Some(b)) = (gens2.first().cloned(), gens2.get(1).cloned()) {
            let sum: Vec<SeriesElt> = a.iter().zip(&b).map(|(x, y)| x.add(y).unwrap()).collect();
            gens2.push(sum);
        }
        let big2 = Submodule::from_gens(prec, d, &gens2).unwrap();
        prop_assert!(big.equals(&big2));
        let q2 = quotient_invariants(&big2, &small).unwrap();
        prop_assert_eq!(q1, q2);
    }

    #[test]
    fn smith_dvr_exponents_are_class_invariants(seed in any::<u64>()) {
        let mut rng = Lcg(seed);
        let p = 3u64;
        let w = 8usize;
        let d = 2usize;
        let rand_poly = |rng: &mut Lcg, unit: bool| {
            let mut c = vec![0u64; w];
            for _ in 0..3 {
                let pos = rng.below(w as u64) as usize;
                c[pos] = rng.below(p);
            }
            if unit {
                c[0] = 1 + rng.below(p - 1);
            }
            FpPoly::from_coeffs(p, w, &c)
        };
        // a random matrix with nonzero determinant at the window
        let a: Vec<Vec<FpPoly>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i == j {
                            FpPoly::monomial(p, w, 1 + rng.below(p - 1), rng.below(3) as usize)
                        } else {
                            rand_poly(&mut rng, false)
                        }
                    })
                    .collect()
            })
            .collect();
        let Ok(s) = smith_dvr(&a) else { return Ok(()); };
        // random unit sandwich: exponents unchanged
        let make_unit = |rng: &mut Lcg| -> Vec<Vec<FpPoly>> {
            let mut m = vec![vec![FpPoly::zero(p, w); d]; d];
            for i in 0..d {
                for j in 0..d {
                    m[i][j] = if i == j {
                        rand_poly(rng, true)
                    } else if i > j {
                        rand_poly(rng, false)
                    } else {
                        FpPoly::zero(p, w)
                    };
                }
            }
            m
        };
        let u_mat = make_unit(&mut rng);
        prop_assert!(unit_det(&u_mat));
        let mut prod = vec![vec![FpPoly::zero(p, w); d]; d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    prod[i][j] = prod[i][j].add(&u_mat[i][k].mul(&a[k][j]));
                }
            }
        }
        let s2 = smith_dvr(&prod).unwrap();
        prop_assert_eq!(s.exponents, s2.exponents);
    }

    #[test]
    fn howell_canonical_under_redundancy(seed in any::<u64>()) {
        let mut rng = Lcg(seed);
        let prec = Prec::new(2, 3, 4).unwrap();
        let a = common::random_submodule(prec, 2, &mut rng, 3);
        let mut gens = a.basis();
        if gens.is_empty() {
            return Ok(());
        }
        // any R-multiple of an existing generator is redundant
        let extra: Vec<SeriesElt> = {
            let c = common::random_series(prec, &mut rng, 2);
            gens[0].iter().map(|x| x.mul(&c).unwrap()).collect()
        };
        gens.push(extra);
        let b = Submodule::from_gens(prec, 2, &gens).unwrap();
        prop_assert!(a.equals(&b));
    }
}
