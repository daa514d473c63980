//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS line on success (run with `--nocapture` to see them).

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use mclone_core::closed_forms::{
    derived_cloning_g, printed_cloning_blocks, printed_cloning_g, printed_learning_g,
};
use mclone_core::comb::{check_instrument, ReplicationTask};
use mclone_core::measurement::{
    haar_average_fidelity, haar_sample, povm_fidelity, replicated_povm, VonNeumannPovm,
};
use mclone_core::operator::Signature;
use mclone_core::optimize::{
    cloning_extremal_search, cloning_fidelity_closed_form, feasible_random_blocks,
    learning_blocks_family, learning_fidelity_closed_form, optimal_cloning_blocks,
    optimal_learning_blocks, IrrepLabel, Slot,
};
use mclone_core::realization::{
    assembled_optimal_instrument, bipartite_q_povm, control_povm, realization_instrument,
};
use mclone_core::report::Status;
use mclone_core::rng::stream_rng;
use mclone_core::symmetry::{
    assemble_instrument, delta_table, extract_blocks, reduced_fidelity, reduced_fidelity_with,
    symmetrize, IrrepProjectors, OutcomeClass, Symmetrization,
};
use mclone_core::verify::{delta_scan, random_instrument};
use mclone_core::Operator;

fn mc_tol(stderr: f64) -> f64 {
    3.0 * stderr + 1e-9
}

#[test]
fn criterion_1_cloning_optimum() {
    let start = Instant::now();
    for d in 2..=6 {
        let result = cloning_extremal_search(d).unwrap();
        let expect = cloning_fidelity_closed_form(d);
        assert!(
            (result.certificate.best_value - expect).abs() <= 1e-9,
            "d={d}: enumeration best {} vs closed form {expect}",
            result.certificate.best_value
        );
        assert!((result.fidelity.total - expect).abs() <= 1e-9);
        let expect_winners = [
            vec![
                Slot { class: OutcomeClass::Xxx, irrep: IrrepLabel::Alpha },
                Slot { class: OutcomeClass::Xyx, irrep: IrrepLabel::Alpha },
            ],
            vec![
                Slot { class: OutcomeClass::Xxx, irrep: IrrepLabel::Alpha },
                Slot { class: OutcomeClass::Xyy, irrep: IrrepLabel::Alpha },
            ],
        ];
        for w in &expect_winners {
            assert!(
                result.certificate.winners.contains(w),
                "d={d}: missing winner {w:?}"
            );
        }
        assert_eq!(result.certificate.winners.len(), 2, "d={d}");
        for c in &result.certificate.candidates {
            if let Some(v) = c.value {
                assert!(v <= expect + 1e-9, "d={d}: {:?} reaches {v}", c.slots);
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: cloning optimum 4/(3d) with supports {{xx,x; xy,x}} / {{xx,x; xy,y}} \
         for d = 2..6 in {elapsed:?}"
    );
}

#[test]
fn criterion_2_learning_optimum() {
    let r2 = optimal_learning_blocks(2).unwrap();
    assert!(
        (r2.fidelity.total - 7.0 / 12.0).abs() <= 1e-12,
        "d=2: {} vs 7/12",
        r2.fidelity.total
    );
    for d in 3..=6 {
        let r = optimal_learning_blocks(d).unwrap();
        let df = d as f64;
        let expect = (9.0 * df * df + 16.0 * df - 17.0) / (6.0 * df * df * (df * df - 1.0));
        assert!(
            (r.fidelity.total - expect).abs() <= 1e-9,
            "d={d}: {} vs {expect}",
            r.fidelity.total
        );
    }
    // independent grid refinement of the free parameter
    for d in 2..=6 {
        let df = d as f64;
        let a_closed = (df + 1.0) / (18.0 * df * (df - 1.0));
        let table = delta_table(d).unwrap();
        let hi = 1.0 / (2.0 * df);
        let mut best = (0.0, f64::NEG_INFINITY);
        for n in 0..=20_000 {
            let a = hi * n as f64 / 20_000.0;
            let v = reduced_fidelity_with(&table, &learning_blocks_family(d, a).unwrap())
                .unwrap()
                .total;
            if v > best.1 {
                best = (a, v);
            }
        }
        assert!(
            (best.0 - a_closed).abs() <= hi / 2000.0,
            "d={d}: grid maximizer {} vs closed form {a_closed}",
            best.0
        );
        let r = optimal_learning_blocks(d).unwrap();
        assert!((r.certificate.best_value - r.fidelity.total).abs() <= 1e-10);
    }
    println!(
        "criterion 2 PASS: learning optimum 7/12 (d=2, 1e-12) and \
         (9d^2+16d-17)/(6d^2(d^2-1)) (d=3..6, 1e-9) with maximizer a = (d+1)/(18d(d-1))"
    );
}

#[test]
fn criterion_3_realization_identity() {
    for d in 2..=4 {
        let network = realization_instrument(d).unwrap();
        let abstract_opt = assembled_optimal_instrument(d).unwrap();
        let mut worst: f64 = 0.0;
        for (i, j) in network.outcome_pairs() {
            worst = worst.max(
                network
                    .element(i, j)
                    .distance(abstract_opt.element(i, j))
                    .unwrap(),
            );
        }
        assert!(worst <= 1e-9, "d={d}: max element distance {worst:.3e}");
    }
    println!(
        "criterion 3 PASS: link-product network equals the assembled optimal instrument \
         element-wise (Frobenius <= 1e-9) for d = 2,3,4"
    );
}

#[test]
fn criterion_4_monte_carlo_consistency() {
    let start = Instant::now();
    let n = 10_000;
    for d in 2..=3 {
        let clone = assemble_instrument(&optimal_cloning_blocks(d).unwrap()).unwrap();
        let (mean, stderr) = haar_average_fidelity(&clone, n, 11_000 + d as u64);
        let expect = cloning_fidelity_closed_form(d);
        assert!(
            (mean - expect).abs() <= mc_tol(stderr),
            "clone d={d}: {mean} vs {expect} (stderr {stderr:.2e})"
        );
        let learn =
            assemble_instrument(&optimal_learning_blocks(d).unwrap().blocks).unwrap();
        let (mean, stderr) = haar_average_fidelity(&learn, n, 12_000 + d as u64);
        let expect = learning_fidelity_closed_form(d);
        assert!(
            (mean - expect).abs() <= mc_tol(stderr),
            "learn d={d}: {mean} vs {expect} (stderr {stderr:.2e})"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    println!(
        "criterion 4 PASS: Haar Monte-Carlo fidelities match the closed forms within \
         3 standard errors at N = 10^4, d = 2,3 in {elapsed:?}"
    );
}

#[test]
fn criterion_5_reduction_soundness_and_sampled_optimality() {
    // 200 random feasible blocks: reduced fidelity vs Monte-Carlo fidelity
    for d in 2..=3usize {
        let table = delta_table(d).unwrap();
        for (t, task) in [ReplicationTask::Cloning, ReplicationTask::Learning]
            .into_iter()
            .enumerate()
        {
            let mut rng = stream_rng(13_000 + d as u64, t as u64);
            for n in 0..50 {
                let blocks = feasible_random_blocks(d, task, &mut rng).unwrap();
                let exact = reduced_fidelity_with(&table, &blocks).unwrap().total;
                let assembled = assemble_instrument(&blocks).unwrap();
                let (mean, stderr) =
                    haar_average_fidelity(&assembled, 64, 14_000 + (n as u64));
                assert!(
                    (mean - exact).abs() <= mc_tol(stderr),
                    "d={d} task={task:?} block {n}: reduced {exact} vs MC {mean}"
                );
            }
        }
    }
    // sampled optimality evidence at d = 2: 10^5 feasible points per task
    let d = 2;
    let table = delta_table(d).unwrap();
    for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
        let bound = match task {
            ReplicationTask::Cloning => cloning_fidelity_closed_form(d),
            ReplicationTask::Learning => learning_fidelity_closed_form(d),
        };
        let mut rng = stream_rng(15_000, 0);
        let mut max_seen = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            let blocks = feasible_random_blocks(d, task, &mut rng).unwrap();
            max_seen = max_seen.max(reduced_fidelity_with(&table, &blocks).unwrap().total);
        }
        assert!(
            max_seen <= bound + 1e-9,
            "{task:?}: sampled {max_seen} above optimum {bound}"
        );
    }
    println!(
        "criterion 5 PASS: 200 random feasible blocks agree with Monte Carlo within 3 standard \
         errors; 10^5 samples per task never beat the optima at d = 2"
    );
}

#[test]
fn criterion_6_structural_suites() {
    // projector completeness / orthogonality / commutation, d = 2..6
    for d in 2..=6 {
        let proj = IrrepProjectors::build(d).unwrap();
        let n = d * d * d;
        let mut sum = proj.alpha_embedding(0, 0) + proj.alpha_embedding(1, 1);
        sum += proj.p_beta();
        if let Some(pg) = proj.p_gamma() {
            sum += pg;
        }
        assert!(
            (sum - DMatrix::<C64>::identity(n, n)).norm() <= 1e-9,
            "completeness d={d}"
        );
        for (a, va) in [proj.multiplicity_vectors(true), proj.multiplicity_vectors(false)]
            .iter()
            .enumerate()
        {
            for (b, vb) in
                [proj.multiplicity_vectors(true), proj.multiplicity_vectors(false)]
                    .iter()
                    .enumerate()
            {
                let gram = va.adjoint() * *vb;
                let expect = if a == b {
                    DMatrix::<C64>::identity(d, d)
                } else {
                    DMatrix::<C64>::zeros(d, d)
                };
                assert!((gram - expect).norm() <= 1e-9, "orthogonality d={d}");
            }
        }
        let mut rng = stream_rng(16_000, d as u64);
        for _ in 0..20 {
            let g = proj.group_element(&haar_sample(d, &mut rng));
            for p in [
                proj.alpha_embedding(0, 0),
                proj.alpha_embedding(1, 1),
                proj.p_beta().clone(),
            ] {
                assert!((&p * &g - &g * &p).norm() <= 1e-9, "commutation d={d}");
            }
            if let Some(pg) = proj.p_gamma() {
                assert!((pg * &g - &g * pg).norm() <= 1e-9);
            }
        }
    }

    // control POVM completeness at 1e-12 and Q POVM completeness at 1e-10
    for d in 2..=8 {
        let control = control_povm(d).unwrap();
        let sum = &(&control.elements()[0] + &control.elements()[1]) + &control.elements()[2];
        let idd = Operator::identity(Signature::new(&[("L", 2)]).unwrap());
        assert!(sum.distance(&idd).unwrap() <= 1e-12, "control POVM d={d}");
    }
    for d in 2..=4 {
        bipartite_q_povm(d).unwrap().validate(1e-10).unwrap();
    }

    // instrument normalizations for both tasks; the learning probe state is
    // forced to I/d and the optimal cloning instrument is swap symmetric
    for d in 2..=3 {
        let clone = assemble_instrument(&optimal_cloning_blocks(d).unwrap()).unwrap();
        let learn =
            assemble_instrument(&optimal_learning_blocks(d).unwrap().blocks).unwrap();
        for g in [&clone, &learn] {
            let entries = check_instrument(g, 1e-9);
            assert!(
                entries.iter().all(|e| e.status == Status::Pass),
                "d={d}: {entries:#?}"
            );
        }
        let probe_entry = check_instrument(&learn, 1e-9)
            .into_iter()
            .find(|e| e.id.contains("state_on_probe"))
            .unwrap();
        assert!(probe_entry.note.contains("maximally mixed"), "d={d}");
        assert!(
            mclone_core::symmetry::satisfies(&clone, Symmetrization::Swap, 1e-9).unwrap(),
            "d={d}"
        );
    }

    // fidelity criterion: 1 exactly on equal von Neumann pairs, below 1 on
    // randomized distinct pairs
    let mut rng = stream_rng(17_000, 0);
    for d in 2..=5 {
        let u = haar_sample(d, &mut rng);
        let p = VonNeumannPovm::from_unitary(&u, "H").unwrap();
        assert!((povm_fidelity(p.povm(), p.povm()).unwrap() - 1.0).abs() <= 1e-12);
        let v = haar_sample(d, &mut rng);
        let q = VonNeumannPovm::from_unitary(&v, "H").unwrap();
        let f = povm_fidelity(p.povm(), q.povm()).unwrap();
        assert!(f < 1.0 - 1e-6 && f > 0.0);
    }

    // symmetrization maps preserve the exact reduced fidelity to 1e-9
    for d in 2..=3usize {
        let table = delta_table(d).unwrap();
        let mut rng = stream_rng(18_000, d as u64);
        for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
            let blocks = feasible_random_blocks(d, task, &mut rng).unwrap();
            let base = reduced_fidelity_with(&table, &blocks).unwrap().total;
            let assembled = assemble_instrument(&blocks).unwrap();
            for which in [
                Symmetrization::Diagonal,
                Symmetrization::Covariant,
                Symmetrization::Relabel,
                Symmetrization::Swap,
            ] {
                let mapped = symmetrize(&assembled, which).unwrap();
                let after = reduced_fidelity_with(&table, &extract_blocks(&mapped).unwrap())
                    .unwrap()
                    .total;
                assert!(
                    (after - base).abs() <= 1e-9,
                    "d={d} task={task:?} {which:?}: {base} -> {after}"
                );
            }
        }
    }
    println!(
        "criterion 6 PASS: projector suites (d=2..6), POVM completeness (1e-12 / 1e-10), \
         instrument normalizations, fidelity criterion, symmetrization invariance"
    );
}

#[test]
fn criterion_7_published_value_scan() {
    // Delta-table scan with WARN semantics for d = 2..5
    let mut total_warns = 0;
    for d in 2..=5 {
        let table = delta_table(d).unwrap();
        let entries = delta_scan(d, &table).unwrap();
        assert!(entries.iter().all(|e| e.status != Status::Fail), "d={d}");
        let warns = entries.iter().filter(|e| e.status == Status::Warn).count();
        // the published middle-class tags disagree with the defining
        // construction, so the scan must record discrepancies
        assert!(warns > 0, "d={d}: expected WARN entries for the published table");
        for e in entries.iter().filter(|e| e.status == Status::Warn) {
            assert!(!e.computed.is_empty() && !e.expected.is_empty());
        }
        total_warns += warns;
    }

    // replicated-POVM closed forms for d = 2..5
    for d in 2..=5 {
        let clone = assemble_instrument(&optimal_cloning_blocks(d).unwrap()).unwrap();
        let u = DMatrix::<C64>::identity(d, d);
        let from_links = replicated_povm(&clone, &u).unwrap();
        let corrected = derived_cloning_g(d, &u).unwrap();
        let printed = printed_cloning_g(d, &u).unwrap();
        for ((a, b), c) in from_links
            .elements()
            .iter()
            .zip(corrected.elements())
            .zip(printed.elements())
        {
            assert!(a.distance(b).unwrap() <= 1e-9, "corrected form d={d}");
            // printed cloning constants disagree (recorded as WARN by the
            // verification suite); both sides remain valid POVM families
            let _ = a.distance(c).unwrap();
        }
        let printed_f = reduced_fidelity(&printed_cloning_blocks(d).unwrap())
            .unwrap()
            .total;
        assert!(
            printed_f < cloning_fidelity_closed_form(d) - 1e-4,
            "published blocks must fall short of 4/(3d), got {printed_f} at d={d}"
        );

        if d >= 3 {
            let learn =
                assemble_instrument(&optimal_learning_blocks(d).unwrap().blocks).unwrap();
            let from_links = replicated_povm(&learn, &u).unwrap();
            let closed = printed_learning_g(d, &u).unwrap();
            for (a, b) in from_links.elements().iter().zip(closed.elements()) {
                assert!(a.distance(b).unwrap() <= 1e-9, "learning form d={d}");
            }
        }
    }
    println!(
        "criterion 7 PASS: published-value scan completed for d = 2..5 \
         ({total_warns} WARN entries recording printed-vs-computed discrepancies)"
    );
}

#[test]
fn generic_instruments_never_beat_the_optima() {
    // composition of the four symmetrizations maps any valid instrument into
    // the reduced family at the same fidelity
    let d = 2;
    let table = delta_table(d).unwrap();
    let mut rng = stream_rng(19_000, 0);
    for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
        let raw = random_instrument(d, task, &mut rng).unwrap();
        let (mc, stderr) = haar_average_fidelity(&raw, 2000, 20_000);
        let mut current = raw;
        for which in [
            Symmetrization::Diagonal,
            Symmetrization::Covariant,
            Symmetrization::Relabel,
            Symmetrization::Swap,
        ] {
            current = symmetrize(&current, which).unwrap();
        }
        let reduced = reduced_fidelity_with(&table, &extract_blocks(&current).unwrap())
            .unwrap()
            .total;
        assert!((mc - reduced).abs() <= mc_tol(stderr));
        let bound = match task {
            ReplicationTask::Cloning => cloning_fidelity_closed_form(d),
            ReplicationTask::Learning => learning_fidelity_closed_form(d),
        };
        assert!(reduced <= bound + 1e-9);
    }
}
