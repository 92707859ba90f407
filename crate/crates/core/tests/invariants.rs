//! Cross-cutting invariants: universal theorem checks over the fuzz
//! family, torsion crosschecks, suite determinism, and the concurrency
//! contract (everything immutable and shareable).

mod common;

use bkfilt::bk::{
    matching_check, torsion_crosscheck, weak_frobenius_check, BKModule, MatchVerdict,
};
use bkfilt::corpus::{corpus_generate, CorpusKind, CorpusParams};
use bkfilt::report::Verdict;
use bkfilt::ring::{EisensteinPoly, Prec, SeriesElt};
use bkfilt::suite::{run_suite, SuiteKind};

#[test]
fn fuzz_matching_and_weak_frobenius() {
    for &p in &[2u64, 3] {
        let params = CorpusParams {
            p,
            n_p: 3,
            count: 12,
            max_weight: 3,
            max_rank: 2,
        };
        let specs = corpus_generate(CorpusKind::Fuzz, &params, 77).unwrap();
        for spec in &specs {
            let m = spec.to_module().unwrap();
            let an = m.analyze().unwrap();
            let rep = matching_check(&m, &an).unwrap();
            assert_eq!(
                rep.verdict,
                MatchVerdict::Pass,
                "{}: {:?}",
                spec.label_or_default(),
                rep.per_degree
            );
            // verdict agreement is asserted inside the check
            let wf = weak_frobenius_check(&m, &an).unwrap();
            if wf.torsion_free {
                assert!(wf.adapted_basis.is_some() && wf.decomposition.is_some());
            }
        }
    }
}

#[test]
fn torsion_crosscheck_bounds_hold() {
    // torsion-free fuzz: the comparison maps are isomorphisms
    let params = CorpusParams {
        p: 3,
        n_p: 3,
        count: 6,
        max_weight: 2,
        max_rank: 2,
    };
    for spec in corpus_generate(CorpusKind::Fuzz, &params, 21).unwrap() {
        let m = spec.to_module().unwrap();
        let an = m.analyze().unwrap();
        let tc = torsion_crosscheck(&m, &an).unwrap();
        assert!(tc.all_within_bounds, "{}", spec.label_or_default());
        if tc.max_torsion_exponent == 0 {
            for (_, expo, _, _) in tc.hodge_side.iter().chain(&tc.conj_side) {
                assert_eq!(*expo, 0, "n = 0 forces isomorphisms");
            }
        }
    }
    // a module with honest torsion still satisfies the bounds
    let prec = Prec::new(3, 4, 12).unwrap();
    let e = EisensteinPoly::u_minus_p(3, 4);
    let es = e.as_series(prec).unwrap();
    let a = vec![
        vec![es.clone(), SeriesElt::constant(prec, 3)],
        vec![SeriesElt::zero(prec), es.clone()],
    ];
    let m = BKModule::new(prec, a, e, false, None, Some(3), "jordan").unwrap();
    let an = m.analyze().unwrap();
    let tc = torsion_crosscheck(&m, &an).unwrap();
    assert!(tc.max_torsion_exponent > 0, "jordan carries torsion");
    assert!(tc.all_within_bounds, "{:?} {:?}", tc.hodge_side, tc.conj_side);
}

#[test]
fn reports_are_deterministic() {
    let params = CorpusParams {
        p: 2,
        n_p: 4,
        count: 3,
        max_weight: 3,
        max_rank: 2,
    };
    let mut specs = corpus_generate(CorpusKind::DirectSum, &params, 5).unwrap();
    specs.extend(corpus_generate(CorpusKind::Fuzz, &params, 6).unwrap());
    let a = run_suite(&specs, SuiteKind::All, 17).to_json();
    let b = run_suite(&specs, SuiteKind::All, 17).to_json();
    assert_eq!(a, b, "reports must be byte-identical across runs");
}

#[test]
fn all_families_through_all_suites() {
    for &p in &[2u64, 5] {
        let params = CorpusParams {
            p,
            n_p: 4,
            count: 2,
            max_weight: p as u32 + 1,
            max_rank: 2,
        };
        for kind in [
            CorpusKind::RankOne,
            CorpusKind::DirectSum,
            CorpusKind::Tensor,
            CorpusKind::BaseChange,
            CorpusKind::Fuzz,
        ] {
            let specs = corpus_generate(kind, &params, 99).unwrap();
            let r = run_suite(&specs, SuiteKind::All, 5);
            assert!(!r.has_fail(), "p={p} {kind:?}:\n{}", r.render_text());
            assert_eq!(
                r.count(Verdict::InconclusiveAtPrecision),
                0,
                "p={p} {kind:?}:\n{}",
                r.render_text()
            );
        }
    }
}

#[test]
fn rank_four_tensor_module() {
    // Kronecker square of two rank-2 diagonals: weights add coordinatewise
    let p = 3u64;
    let prec = Prec::new(p, 4, 14).unwrap();
    let e = EisensteinPoly::u_minus_p(p, 4);
    let w1 = [0u32, 1];
    let w2 = [1u32, 2];
    let mut a = vec![vec![SeriesElt::zero(prec); 4]; 4];
    for (i, &r1) in w1.iter().enumerate() {
        for (j, &r2) in w2.iter().enumerate() {
            let idx = i * 2 + j;
            a[idx][idx] = e.pow_series(prec, r1 + r2).unwrap();
        }
    }
    let m = BKModule::new(prec, a, e, true, Some(vec![1, 2, 2, 3]), None, "rank4").unwrap();
    let an = m.analyze().unwrap();
    assert_eq!(an.derived_weights, vec![1, 2, 2, 3]);
    assert_eq!(matching_check(&m, &an).unwrap().verdict, MatchVerdict::Pass);
    let wf = weak_frobenius_check(&m, &an).unwrap();
    assert!(wf.torsion_free && wf.decomposition.is_some());
    let sol = bkfilt::sen::solve_sen(&m, &an).unwrap();
    assert!(bkfilt::sen::verify_sen(&m, &an, &sol.operator).unwrap().all_passed());
}

#[test]
fn values_are_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<bkfilt::ring::SeriesElt>();
    assert_send_sync::<bkfilt::ring::EisensteinPoly>();
    assert_send_sync::<bkfilt::submodule::Submodule>();
    assert_send_sync::<bkfilt::ht::HtSubmodule>();
    assert_send_sync::<bkfilt::bk::BKModule>();
    assert_send_sync::<bkfilt::bk::Analysis>();
    assert_send_sync::<bkfilt::modp::ModpBK>();
    assert_send_sync::<bkfilt::sen::SenOperator>();
    assert_send_sync::<bkfilt::report::Report>();
    // identical results regardless of evaluation order: analyze the same
    // module from two threads and compare
    let params = CorpusParams {
        p: 3,
        n_p: 3,
        count: 1,
        max_weight: 2,
        max_rank: 2,
    };
    let spec = corpus_generate(CorpusKind::DirectSum, &params, 8)
        .unwrap()
        .remove(0);
    let m = std::sync::Arc::new(spec.to_module().unwrap());
    let handles: Vec<_> = (0..2)
        .map(|_| {
            let m = std::sync::Arc::clone(&m);
            std::thread::spawn(move || {
                let an = m.analyze().unwrap();
                an.hodge_graded.clone()
            })
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(results[0], results[1]);
}

#[test]
fn degree_two_eisenstein_module() {
    // E = u^2 + 5 over Z/5^3: the filtration engine is degree-agnostic
    // even though the Sen and mod-p layers require e = 1
    let p = 5u64;
    let prec = Prec::new(p, 3, 14).unwrap();
    let e = EisensteinPoly::new(p, 3, &[5, 0, 1]).unwrap();
    let mut a = vec![vec![SeriesElt::zero(prec); 2]; 2];
    a[0][0] = e.pow_series(prec, 0).unwrap();
    a[1][1] = e.pow_series(prec, 2).unwrap();
    let m = BKModule::new(prec, a, e, true, Some(vec![0, 2]), None, "deg2").unwrap();
    assert_eq!(m.height(), 2);
    let an = m.analyze().unwrap();
    assert_eq!(an.derived_weights, vec![0, 2]);
    assert_eq!(matching_check(&m, &an).unwrap().verdict, MatchVerdict::Pass);
    for (n, g) in an.hodge_graded.iter().enumerate() {
        let mult = [0usize, 2].iter().filter(|&&r| r == n).count();
        // an O_K-free summand contributes deg(E) = 2 free Z/p^N-factors
        assert_eq!(g.free_rank, 2 * mult, "gr^{n}");
        assert!(g.is_torsion_free());
    }
    // M_HT is rank 2 over O_K/p^N, i.e. dimension 4 over Z/p^N
    assert_eq!(an.ht_space.dim(), 4);
    // the Sen and mod-p layers refuse with a clear not-applicable
    assert!(matches!(
        bkfilt::sen::solve_sen(&m, &an),
        Err(bkfilt::error::Error::NotApplicable(_))
    ));
    assert!(matches!(
        bkfilt::modp::ModpBK::from_reduction(&m),
        Err(bkfilt::error::Error::NotApplicable(_))
    ));
    // the suite degrades those records to not-applicable, never failure
    let spec = bkfilt::format::ModuleSpec::from_module_matrix(
        prec,
        m.eisenstein(),
        m.matrix(),
        Some(vec![0, 2]),
        true,
        None,
        "deg2",
    );
    let r = run_suite(&[spec], SuiteKind::All, 0);
    assert!(!r.has_fail(), "{}", r.render_text());
}

#[test]
fn log_flavor_sen_verification() {
    // semi-stable flavor: the amplification constant is the uniformizer
    let p = 3u64;
    let prec = Prec::new(p, 4, 12).unwrap();
    let e = EisensteinPoly::u_minus_p(p, 4);
    let mut a = vec![vec![SeriesElt::zero(prec); 2]; 2];
    a[0][0] = e.pow_series(prec, 0).unwrap();
    a[1][1] = e.pow_series(prec, 2).unwrap();
    let m = BKModule::new(prec, a, e.clone(), true, Some(vec![0, 2]), None, "log").unwrap();
    let an = m.analyze().unwrap();
    let a_const = e.amplification_constant(bkfilt::ring::Flavor::Log).unwrap();
    assert_eq!(a_const, 3, "pi E'(pi) = pi = p for E = u - p");
    let ring = prec.modulus();
    let op = bkfilt::sen::SenOperator {
        theta: vec![vec![0, 0], vec![0, ring.mul(a_const, 2)]],
        a: a_const,
        flavor: bkfilt::ring::Flavor::Log,
    };
    let rep = bkfilt::sen::verify_sen(&m, &an, &op).unwrap();
    assert!(rep.all_passed(), "{rep:?}");
}
