//! Full verification suite: every published closed form is recomputed from
//! its defining construction and compared, and the build's own numerical
//! machinery is cross-checked through independent routes (Monte Carlo
//! versus block contraction, link products versus closed forms).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::closed_forms::{
    derived_cloning_g, printed_cloning_blocks, printed_cloning_g, printed_control_plus_weight,
    printed_delta_alpha, printed_delta_beta, printed_delta_gamma, printed_learning_g,
};
use crate::comb::{
    check_instrument, instrument_signature, GeneralizedInstrument, ReplicationTask, WIRE_A,
    WIRE_B, WIRE_C,
};
use crate::error::{Error, Result};
use crate::linalg::{psd_inv_sqrt, psd_sqrt};
use crate::measurement::{
    haar_average_fidelity, haar_sample, povm_fidelity, replicated_povm, Povm, VonNeumannPovm,
};
use crate::operator::{Operator, Signature};
use crate::optimize::{
    cloning_extremal_search, cloning_fidelity_closed_form, estimate_prepare_fidelity,
    feasible_random_blocks, learning_fidelity_closed_form, optimal_cloning_blocks,
    optimal_learning_blocks, IrrepLabel, Slot,
};
use crate::realization::{bipartite_q_povm, control_povm, realization_instrument, WIRE_L};
use crate::report::{ReportEntry, Status, VerificationReport};
use crate::rng::stream_rng;
use crate::symmetry::{
    assemble_instrument, delta_table, extract_blocks, reduced_fidelity, reduced_fidelity_with,
    symmetrize, DeltaTable, IrrepProjectors, OutcomeClass, Symmetrization,
};

/// Tuning knobs of the verification run.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub dims: Vec<usize>,
    pub tol: f64,
    pub seed: u64,
    /// Samples for the optimal-instrument Monte-Carlo consistency checks.
    pub mc_samples: usize,
    /// Random feasible blocks per (dimension, task) in the soundness sweep.
    pub soundness_blocks: usize,
    /// Monte-Carlo samples per soundness block.
    pub soundness_samples: usize,
    /// Random feasible points for the sampled-optimality evidence at d = 2.
    pub optimality_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 3],
            tol: 1e-9,
            seed: 0,
            mc_samples: 10_000,
            soundness_blocks: 50,
            soundness_samples: 64,
            optimality_samples: 100_000,
        }
    }
}

/// Monte-Carlo agreement tolerance: three standard errors plus a floor for
/// floating-point noise (covariant instruments have exactly constant
/// per-sample fidelity, so the sample variance can vanish).
fn mc_tol(stderr: f64) -> f64 {
    3.0 * stderr + 1e-9
}

/// Run the verification suite over the configured dimensions.
pub fn run_verification(cfg: &VerifyConfig) -> Result<VerificationReport> {
    for &d in &cfg.dims {
        if !(2..=8).contains(&d) {
            return Err(Error::InvalidDimension { got: d, min: 2 });
        }
    }
    let mut report = VerificationReport::new();
    for &d in &cfg.dims {
        report.extend(projector_suite(d, cfg.seed)?);
        report.extend(class_suite(d)?);
        if d <= 5 {
            let table = delta_table(d)?;
            report.extend(delta_scan(d, &table)?);
        }
        report.extend(cloning_suite(d, cfg.tol)?);
        report.extend(learning_suite(d, cfg.tol)?);
        if (2..=4).contains(&d) {
            report.extend(realization_suite(d)?);
        }
        if d <= 3 {
            report.extend(mc_suite(d, cfg.mc_samples, cfg.seed)?);
            report.extend(reduction_suite(
                d,
                cfg.soundness_blocks,
                cfg.soundness_samples,
                cfg.seed,
            )?);
        }
        if d <= 5 {
            report.extend(replicated_g_scan(d, cfg.seed)?);
        }
        if d == 2 {
            report.extend(optimality_sampling(d, cfg.optimality_samples, cfg.seed)?);
            report.extend(generic_symmetrization_suite(d, cfg.seed)?);
        }
    }
    report.extend(fidelity_criterion_suite(cfg.seed)?);
    report.push(monotonicity_entry());
    Ok(report)
}

fn projector_suite(d: usize, seed: u64) -> Result<Vec<ReportEntry>> {
    let proj = IrrepProjectors::build(d)?;
    let n = d * d * d;
    let mut entries = Vec::new();

    let mut sum = proj.alpha_embedding(0, 0) + proj.alpha_embedding(1, 1);
    sum += proj.p_beta();
    if let Some(pg) = proj.p_gamma() {
        sum += pg;
    }
    let completeness = (sum - DMatrix::<C64>::identity(n, n)).norm();
    entries.push(ReportEntry::bool_check(
        format!("projectors.completeness.d{d}"),
        "invariant subspaces resolve the identity",
        completeness < 1e-9,
        format!("defect {completeness:.3e}"),
        1e-9,
    ));

    let mut ortho: f64 = 0.0;
    for (a, va) in [proj.multiplicity_vectors(true), proj.multiplicity_vectors(false)]
        .iter()
        .enumerate()
    {
        for (b, vb) in [proj.multiplicity_vectors(true), proj.multiplicity_vectors(false)]
            .iter()
            .enumerate()
        {
            let gram = va.adjoint() * *vb;
            let expect = if a == b {
                DMatrix::<C64>::identity(d, d)
            } else {
                DMatrix::<C64>::zeros(d, d)
            };
            ortho = ortho.max((gram - expect).norm());
        }
    }
    entries.push(ReportEntry::bool_check(
        format!("projectors.orthonormality.d{d}"),
        "multiplicity vectors are orthonormal",
        ortho < 1e-9,
        format!("max Gram defect {ortho:.3e}"),
        1e-9,
    ));

    let mut comm: f64 = 0.0;
    let mut rng = stream_rng(seed, 1000 + d as u64);
    for _ in 0..20 {
        let g = proj.group_element(&haar_sample(d, &mut rng));
        for p in [
            proj.alpha_embedding(0, 0),
            proj.alpha_embedding(1, 1),
            proj.alpha_embedding(0, 1),
            proj.p_beta().clone(),
        ] {
            comm = comm.max((&p * &g - &g * &p).norm());
        }
        if let Some(pg) = proj.p_gamma() {
            comm = comm.max((pg * &g - &g * pg).norm());
        }
    }
    entries.push(ReportEntry::bool_check(
        format!("projectors.commutation.d{d}"),
        "projectors commute with the twirl representation",
        comm < 1e-9,
        format!("max commutator norm over 20 samples {comm:.3e}"),
        1e-9,
    ));
    Ok(entries)
}

fn class_suite(d: usize) -> Result<Vec<ReportEntry>> {
    let total: usize = OutcomeClass::all(d)
        .into_iter()
        .map(|l| l.cardinality(d))
        .sum();
    Ok(vec![ReportEntry::bool_check(
        format!("classes.partition.d{d}"),
        "outcome classes partition the index cube",
        total == d * d * d,
        format!("sum of cardinalities {total} vs {}", d * d * d),
        0.0,
    )])
}

/// Compare a Delta table against both the published closed forms and a
/// fresh recomputation.  Disagreement with the recomputation is FAIL;
/// disagreement with the published table is WARN (both values recorded).
pub fn delta_scan(d: usize, table: &DeltaTable) -> Result<Vec<ReportEntry>> {
    let recomputed = delta_table(d)?;
    let mut entries = Vec::new();
    for l in OutcomeClass::all(d) {
        let tag = l.tag().replace(',', "_");
        // recomputation guard (catches a tampered or stale table)
        let self_dev = (table.alpha(l) - recomputed.alpha(l)).norm()
            + (table.beta(l) - recomputed.beta(l)).abs()
            + (table.gamma(l) - recomputed.gamma(l)).abs();
        if self_dev > 1e-12 {
            entries.push(ReportEntry {
                id: format!("delta.recomputed.{tag}.d{d}"),
                anchor: "multiplicity compression of class representatives".into(),
                computed: format!("deviation from recomputation {self_dev:.3e}"),
                expected: "0".into(),
                tolerance: 1e-12,
                status: Status::Fail,
                note: "table disagrees with its defining construction".into(),
            });
            continue;
        }
        let da = (table.alpha(l) - printed_delta_alpha(d, l)).norm();
        entries.push(ReportEntry {
            id: format!("delta.alpha.{tag}.d{d}"),
            anchor: "published alpha compression table".into(),
            computed: format!(
                "[[{:.9}, {:.9}], [.., {:.9}]]",
                table.alpha(l)[(0, 0)],
                table.alpha(l)[(0, 1)],
                table.alpha(l)[(1, 1)]
            ),
            expected: format!(
                "[[{:.9}, {:.9}], [.., {:.9}]]",
                printed_delta_alpha(d, l)[(0, 0)],
                printed_delta_alpha(d, l)[(0, 1)],
                printed_delta_alpha(d, l)[(1, 1)]
            ),
            tolerance: 1e-9,
            status: if da < 1e-9 { Status::Pass } else { Status::Warn },
            note: if da < 1e-9 {
                String::new()
            } else {
                "published middle-class tags are cyclically permuted; computed values follow \
                 the defining compression"
                    .into()
            },
        });
        let db = (table.beta(l) - printed_delta_beta(d, l)).abs();
        entries.push(ReportEntry {
            id: format!("delta.beta.{tag}.d{d}"),
            anchor: "published beta compression table".into(),
            computed: format!("{:.12}", table.beta(l)),
            expected: format!("{:.12}", printed_delta_beta(d, l)),
            tolerance: 1e-9,
            status: if db < 1e-9 { Status::Pass } else { Status::Warn },
            note: if db < 1e-9 {
                String::new()
            } else {
                "same tag permutation as the alpha sector".into()
            },
        });
        if d > 2 {
            match printed_delta_gamma(d, l) {
                Some(expected) => {
                    let dg = (table.gamma(l) - expected).abs();
                    entries.push(ReportEntry {
                        id: format!("delta.gamma.{tag}.d{d}"),
                        anchor: "published gamma compression table".into(),
                        computed: format!("{:.12}", table.gamma(l)),
                        expected: format!("{expected:.12}"),
                        tolerance: 1e-9,
                        status: if dg < 1e-9 { Status::Pass } else { Status::Warn },
                        note: if dg < 1e-9 {
                            String::new()
                        } else {
                            "same tag permutation as the alpha sector".into()
                        },
                    });
                }
                None => {
                    entries.push(ReportEntry {
                        id: format!("delta.gamma.{tag}.d{d}"),
                        anchor: "published gamma compression table (duplicated tag line)".into(),
                        computed: format!("{:.12}", table.gamma(l)),
                        expected: "tag printed twice; no value for xy,x".into(),
                        tolerance: 1e-9,
                        status: Status::Warn,
                        note: format!(
                            "computation resolves the duplicated line: gamma(xy,x) = \
                             gamma(xy,y) = {:.12} = (d-2)/(2(d-1))",
                            table.gamma(l)
                        ),
                    });
                }
            }
        }
    }
    Ok(entries)
}

fn cloning_suite(d: usize, tol: f64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let result = cloning_extremal_search(d)?;
    let expect = cloning_fidelity_closed_form(d);
    entries.push(ReportEntry::value_check(
        format!("clone.optimum.d{d}"),
        "optimal cloning fidelity 4/(3d)",
        result.certificate.best_value,
        expect,
        tol,
        false,
    ));
    let expect_supports = [
        vec![
            Slot {
                class: OutcomeClass::Xxx,
                irrep: IrrepLabel::Alpha,
            },
            Slot {
                class: OutcomeClass::Xyx,
                irrep: IrrepLabel::Alpha,
            },
        ],
        vec![
            Slot {
                class: OutcomeClass::Xxx,
                irrep: IrrepLabel::Alpha,
            },
            Slot {
                class: OutcomeClass::Xyy,
                irrep: IrrepLabel::Alpha,
            },
        ],
    ];
    let supports_ok = expect_supports
        .iter()
        .all(|s| result.certificate.winners.contains(s))
        && result.certificate.winners.len() == 2;
    entries.push(ReportEntry::bool_check(
        format!("clone.supports.d{d}"),
        "winning supports are {xx,x; xy,x} and {xx,x; xy,y} in the alpha sector",
        supports_ok,
        format!("{} tied winners", result.certificate.winners.len()),
        tol,
    ));
    let bound_ok = result
        .certificate
        .candidates
        .iter()
        .filter_map(|c| c.value)
        .all(|v| v <= expect + tol);
    entries.push(ReportEntry::bool_check(
        format!("clone.certificate_bound.d{d}"),
        "every enumerated candidate stays below the optimum",
        bound_ok,
        format!("{} candidates", result.certificate.candidates.len()),
        tol,
    ));

    // published block values: feasible but strictly suboptimal -> WARN
    let printed = printed_cloning_blocks(d)?;
    let f_printed = reduced_fidelity(&printed)?.total;
    entries.push(ReportEntry {
        id: format!("clone.printed_blocks.d{d}"),
        anchor: "published optimal cloning blocks".into(),
        computed: format!("{f_printed:.12}"),
        expected: format!("{expect:.12}"),
        tolerance: tol,
        status: if (f_printed - expect).abs() <= tol {
            Status::Pass
        } else {
            Status::Warn
        },
        note: format!(
            "published block entries are feasible but reach only {f_printed:.9}; the corrected \
             blocks (A_11 = 4(d+1)/9, B_11 = (d+1)/18, B_12 = sqrt(d^2-1)/6) attain 4/(3d)"
        ),
    });

    entries.extend(assembly_checks(d, &result.blocks, tol)?);
    Ok(entries)
}

/// Assemble the blocks and validate the instrument normalization.  The full
/// elements have side `d^4`, so beyond `d = 5` the check is skipped with a
/// note (the construction is dimension-uniform and validated below that).
fn assembly_checks(
    d: usize,
    blocks: &crate::symmetry::ReducedBlocks,
    tol: f64,
) -> Result<Vec<ReportEntry>> {
    if d > 5 {
        return Ok(vec![ReportEntry {
            id: format!("instrument.assembly.d{d}"),
            anchor: "instrument normalization".into(),
            computed: "assembly skipped".into(),
            expected: "checked for d <= 5".into(),
            tolerance: tol,
            status: Status::Pass,
            note: format!(
                "elements have side d^4 = {}; the dimension-uniform construction is \
                 validated at d <= 5",
                d * d * d * d
            ),
        }]);
    }
    let assembled = assemble_instrument(blocks)?;
    Ok(check_instrument(&assembled, tol.max(1e-9)))
}

fn learning_suite(d: usize, tol: f64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let result = optimal_learning_blocks(d)?;
    let expect = learning_fidelity_closed_form(d);
    let value_tol = if d == 2 { 1e-12 } else { tol };
    entries.push(ReportEntry::value_check(
        format!("learn.optimum.d{d}"),
        "optimal learning fidelity (7/12 at d=2, else (9d^2+16d-17)/(6d^2(d^2-1)))",
        result.fidelity.total,
        expect,
        value_tol,
        false,
    ));
    entries.push(ReportEntry::value_check(
        format!("learn.grid_refinement.d{d}"),
        "interior maximizer a = (d+1)/(18d(d-1)) by 1-D refinement",
        result.certificate.best_value,
        result.fidelity.total,
        1e-10,
        false,
    ));
    let df = d as f64;
    entries.push(ReportEntry::value_check(
        format!("learn.beta_component.d{d}"),
        "learning beta component 1/d^2",
        result.fidelity.beta,
        1.0 / (df * df),
        1e-12,
        false,
    ));
    if d > 2 {
        entries.push(ReportEntry::value_check(
            format!("learn.gamma_component.d{d}"),
            "learning gamma component 1/(2d^2)",
            result.fidelity.gamma,
            1.0 / (2.0 * df * df),
            1e-12,
            false,
        ));
    }
    entries.push(ReportEntry::value_check(
        format!("learn.baseline_gap.d{d}"),
        "estimate-and-prepare baseline stays below the learning optimum",
        (expect - estimate_prepare_fidelity(d)?).max(0.0),
        expect - estimate_prepare_fidelity(d)?,
        0.0,
        false,
    ));
    entries.extend(assembly_checks(d, &result.blocks, tol)?);
    Ok(entries)
}

fn realization_suite(d: usize) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let network = realization_instrument(d)?;
    let abstract_opt = assemble_instrument(&optimal_cloning_blocks(d)?)?;
    let mut worst: f64 = 0.0;
    for (i, j) in network.outcome_pairs() {
        worst = worst.max(network.element(i, j).distance(abstract_opt.element(i, j))?);
    }
    entries.push(ReportEntry::bool_check(
        format!("realization.identity.d{d}"),
        "network link product reproduces the optimal instrument",
        worst <= 1e-9,
        format!("max element Frobenius distance {worst:.3e}"),
        1e-9,
    ));

    let control = control_povm(d)?;
    let sum = &(&control.elements()[0] + &control.elements()[1]) + &control.elements()[2];
    let defect = sum
        .distance(&Operator::identity(Signature::new(&[(WIRE_L, 2)])?))
        .unwrap_or(f64::NAN);
    entries.push(ReportEntry::bool_check(
        format!("realization.control_povm.completeness.d{d}"),
        "control POVM sums to the identity (cross terms cancel)",
        defect <= 1e-12,
        format!("completeness defect {defect:.3e}"),
        1e-12,
    ));
    let plus_weight = control.element(0).matrix().trace().re;
    let printed = printed_control_plus_weight(d);
    entries.push(ReportEntry {
        id: format!("realization.control_povm.plus_weight.d{d}"),
        anchor: "published |+><+| weight of the control POVM".into(),
        computed: format!("{plus_weight:.12}"),
        expected: format!("{printed:.12}"),
        tolerance: 1e-9,
        status: if (plus_weight - printed).abs() <= 1e-9 {
            Status::Pass
        } else {
            Status::Warn
        },
        note: "corrected weight 8/9 is dimension independent and matches the optimal \
               instrument; the published weight realizes the published (suboptimal) blocks"
            .into(),
    });

    let q = bipartite_q_povm(d)?;
    let q_ok = q.validate(1e-10).is_ok();
    entries.push(ReportEntry::bool_check(
        format!("realization.q_povm.completeness.d{d}"),
        "bipartite flag/control POVM is complete",
        q_ok,
        format!("{} elements", q.len()),
        1e-10,
    ));
    Ok(entries)
}

fn mc_suite(d: usize, samples: usize, seed: u64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let clone = assemble_instrument(&optimal_cloning_blocks(d)?)?;
    let (mean, stderr) = haar_average_fidelity(&clone, samples, seed ^ 0xC10E);
    entries.push(ReportEntry::value_check(
        format!("mc.clone.d{d}"),
        "Monte-Carlo Haar average vs 4/(3d)",
        mean,
        cloning_fidelity_closed_form(d),
        mc_tol(stderr),
        false,
    ));
    let learn = assemble_instrument(&optimal_learning_blocks(d)?.blocks)?;
    let (mean, stderr) = haar_average_fidelity(&learn, samples, seed ^ 0x1EA2);
    entries.push(ReportEntry::value_check(
        format!("mc.learn.d{d}"),
        "Monte-Carlo Haar average vs the learning optimum",
        mean,
        learning_fidelity_closed_form(d),
        mc_tol(stderr),
        false,
    ));
    Ok(entries)
}

fn reduction_suite(
    d: usize,
    blocks_per_task: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let table = delta_table(d)?;
    for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
        let mut rng = stream_rng(seed, 2000 + d as u64);
        let mut worst_gap: f64 = 0.0;
        let mut worst_allowed = f64::INFINITY;
        let mut ok = true;
        for n in 0..blocks_per_task {
            let blocks = feasible_random_blocks(d, task, &mut rng)?;
            let exact = reduced_fidelity_with(&table, &blocks)?.total;
            let assembled = assemble_instrument(&blocks)?;
            let (mean, stderr) =
                haar_average_fidelity(&assembled, samples, seed ^ (n as u64) << 8);
            let gap = (mean - exact).abs();
            let allowed = mc_tol(stderr);
            if gap > allowed {
                ok = false;
            }
            if gap > worst_gap {
                worst_gap = gap;
                worst_allowed = allowed;
            }
        }
        let task_name = match task {
            ReplicationTask::Cloning => "cloning",
            ReplicationTask::Learning => "learning",
        };
        entries.push(ReportEntry::bool_check(
            format!("reduction.soundness.{task_name}.d{d}"),
            "reduced fidelity equals the Monte-Carlo fidelity of the assembled instrument",
            ok,
            format!(
                "{blocks_per_task} random feasible blocks; worst gap {worst_gap:.3e} \
                 (allowed {worst_allowed:.3e})"
            ),
            1e-9,
        ));

        // exact preservation under the symmetrization maps
        let mut rng2 = stream_rng(seed, 2100 + d as u64);
        let blocks = feasible_random_blocks(d, task, &mut rng2)?;
        let base = reduced_fidelity_with(&table, &blocks)?.total;
        let assembled = assemble_instrument(&blocks)?;
        let mut worst: f64 = 0.0;
        for which in [
            Symmetrization::Diagonal,
            Symmetrization::Covariant,
            Symmetrization::Relabel,
            Symmetrization::Swap,
        ] {
            let mapped = symmetrize(&assembled, which)?;
            let after = reduced_fidelity_with(&table, &extract_blocks(&mapped)?)?.total;
            worst = worst.max((after - base).abs());
        }
        entries.push(ReportEntry::bool_check(
            format!("symmetrize.exact_preservation.{task_name}.d{d}"),
            "symmetrization maps preserve the exact reduced fidelity",
            worst <= 1e-9,
            format!("max fidelity shift {worst:.3e}"),
            1e-9,
        ));
    }
    Ok(entries)
}

fn optimality_sampling(d: usize, samples: usize, seed: u64) -> Result<Vec<ReportEntry>> {
    let table = delta_table(d)?;
    let mut entries = Vec::new();
    for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
        let bound = match task {
            ReplicationTask::Cloning => cloning_fidelity_closed_form(d),
            ReplicationTask::Learning => learning_fidelity_closed_form(d),
        };
        let mut rng = stream_rng(seed, 3000 + d as u64);
        let mut max_seen = f64::NEG_INFINITY;
        for _ in 0..samples {
            let blocks = feasible_random_blocks(d, task, &mut rng)?;
            max_seen = max_seen.max(reduced_fidelity_with(&table, &blocks)?.total);
        }
        let task_name = match task {
            ReplicationTask::Cloning => "cloning",
            ReplicationTask::Learning => "learning",
        };
        entries.push(ReportEntry::bool_check(
            format!("optimality.sampling.{task_name}.d{d}"),
            "no random feasible point beats the claimed optimum",
            max_seen <= bound + 1e-9,
            format!("{samples} samples; max {max_seen:.12} vs optimum {bound:.12}"),
            1e-9,
        ));
    }
    Ok(entries)
}

fn fidelity_criterion_suite(seed: u64) -> Result<Vec<ReportEntry>> {
    let mut rng = stream_rng(seed, 4000);
    let mut ok = true;
    let mut detail = String::new();
    for d in 2..=4 {
        let u = haar_sample(d, &mut rng);
        let p = VonNeumannPovm::from_unitary(&u, "H")?;
        let self_f = povm_fidelity(p.povm(), p.povm())?;
        if (self_f - 1.0).abs() > 1e-12 {
            ok = false;
            detail = format!("self fidelity {self_f} at d={d}");
        }
        let v = haar_sample(d, &mut rng);
        let q = VonNeumannPovm::from_unitary(&v, "H")?;
        let cross = povm_fidelity(p.povm(), q.povm())?;
        if !(0.0..=1.0 + 1e-12).contains(&cross) {
            ok = false;
            detail = format!("cross fidelity {cross} out of range at d={d}");
        }
        if cross > 1.0 - 1e-6 {
            // Haar-independent bases essentially never coincide
            ok = false;
            detail = format!("distinct POVMs scored {cross} at d={d}");
        }
    }
    Ok(vec![ReportEntry::bool_check(
        "fidelity.criterion",
        "POVM fidelity is 1 exactly on equal von Neumann pairs and below 1 otherwise",
        ok,
        if detail.is_empty() {
            "randomized pairs at d=2..4".to_string()
        } else {
            detail
        },
        1e-12,
    )])
}

fn replicated_g_scan(d: usize, seed: u64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let clone = assemble_instrument(&optimal_cloning_blocks(d)?)?;
    let mut rng = stream_rng(seed, 5000 + d as u64);
    let haar_u = haar_sample(d, &mut rng);
    for (label, u) in [
        ("identity", DMatrix::<C64>::identity(d, d)),
        ("haar", haar_u.clone()),
    ] {
        let from_links = replicated_povm(&clone, &u)?;
        let corrected = derived_cloning_g(d, &u)?;
        let printed = printed_cloning_g(d, &u)?;
        let dev_corrected = povm_distance(&from_links, &corrected)?;
        entries.push(ReportEntry::bool_check(
            format!("povm.clone.derived_form.{label}.d{d}"),
            "replicated POVM matches the corrected closed form",
            dev_corrected <= 1e-9,
            format!("max element distance {dev_corrected:.3e}"),
            1e-9,
        ));
        let dev_printed = povm_distance(&from_links, &printed)?;
        entries.push(ReportEntry {
            id: format!("povm.clone.printed_form.{label}.d{d}"),
            anchor: "published cloning replicated-POVM closed form".into(),
            computed: format!("max element distance {dev_printed:.3e}"),
            expected: "0".into(),
            tolerance: 1e-9,
            status: if dev_printed <= 1e-9 {
                Status::Pass
            } else {
                Status::Warn
            },
            note: "published weights (1 - 2/(9d(d+1)), 1/sqrt(9d(d+1))) correspond to the \
                   published suboptimal blocks; corrected weights are (8/9, 1/sqrt(18))"
                .into(),
        });
    }

    // learning closed form
    let learn = assemble_instrument(&optimal_learning_blocks(d)?.blocks)?;
    if d >= 3 {
        let from_links = replicated_povm(&learn, &DMatrix::identity(d, d))?;
        let printed = printed_learning_g(d, &DMatrix::identity(d, d))?;
        let dev = povm_distance(&from_links, &printed)?;
        entries.push(ReportEntry {
            id: format!("povm.learn.printed_form.d{d}"),
            anchor: "published learning replicated-POVM closed form".into(),
            computed: format!("max element distance {dev:.3e}"),
            expected: "0".into(),
            tolerance: 1e-9,
            status: if dev <= 1e-9 { Status::Pass } else { Status::Warn },
            note: String::new(),
        });
    } else {
        entries.push(ReportEntry {
            id: format!("povm.learn.printed_form.d{d}"),
            anchor: "published learning replicated-POVM closed form".into(),
            computed: "replicated POVM computed from the assembled instrument".into(),
            expected: "published expression divides by (d - 2); undefined at d = 2".into(),
            tolerance: 1e-9,
            status: Status::Warn,
            note: "comparison runs for d >= 3; at d = 2 only the instrument-level \
                   construction applies"
                .into(),
        });
    }

    // covariance structure of the replicated POVM
    let g_id = replicated_povm(&clone, &DMatrix::identity(d, d))?;
    let g_u = replicated_povm(&clone, &haar_u)?;
    let mut sigma: Vec<usize> = (0..d).collect();
    sigma.rotate_left(1);
    let mut t = DMatrix::<C64>::zeros(d, d);
    for (src, &dst) in sigma.iter().enumerate() {
        t[(dst, src)] = C64::new(1.0, 0.0);
    }
    let ut = &haar_u * &t;
    let conj2 = ut.kronecker(&ut);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let lhs = g_u.elements()[sigma[i] * d + sigma[j]].matrix();
            let rhs = &conj2 * g_id.elements()[i * d + j].matrix() * conj2.adjoint();
            worst = worst.max((lhs - rhs).norm());
        }
    }
    entries.push(ReportEntry::bool_check(
        format!("povm.covariance.d{d}"),
        "replicated POVM transforms covariantly under rotation and relabeling",
        worst <= 1e-9,
        format!("max element distance {worst:.3e}"),
        1e-9,
    ));
    Ok(entries)
}

fn monotonicity_entry() -> ReportEntry {
    let mut ok = true;
    for d in 2..=10 {
        let clone = cloning_fidelity_closed_form(d);
        let learn = learning_fidelity_closed_form(d);
        let est = estimate_prepare_fidelity(d).unwrap();
        if !(clone > learn && learn > est) {
            ok = false;
        }
    }
    ReportEntry::bool_check(
        "closed_forms.ordering",
        "cloning beats learning beats estimate-and-prepare for d = 2..10",
        ok,
        "three closed-form curves",
        0.0,
    )
}

/// Random valid instrument with no imposed symmetry: a random deterministic
/// comb split by a random POVM on its support,
/// `R_ij = R^{1/2} M_ij R^{1/2}`.
pub fn random_instrument(
    d: usize,
    task: ReplicationTask,
    rng: &mut impl Rng,
) -> Result<GeneralizedInstrument> {
    let sig = instrument_signature(d);
    let n = d * d * d * d;
    // square root of the deterministic total, built on the small tensor
    // factor (canonical wire order A,B,C,D)
    let root = match task {
        ReplicationTask::Cloning => {
            // random channel Choi S on (A,B) -> C, extended by I_D
            let n3 = d * d * d;
            let raw = random_psd(n3, rng);
            let s_raw = Operator::new(
                Signature::new(&[(WIRE_A, d), (WIRE_B, d), (WIRE_C, d)])?,
                raw,
            )?;
            let marginal = s_raw.partial_trace(&[WIRE_C])?;
            let fix = psd_inv_sqrt(marginal.matrix(), 1e-12);
            let fix_full = fix.kronecker(&DMatrix::<C64>::identity(d, d));
            let s = &fix_full * s_raw.matrix() * fix_full.adjoint();
            psd_sqrt(&s).kronecker(&DMatrix::<C64>::identity(d, d))
        }
        ReplicationTask::Learning => {
            let raw = random_psd(d, rng);
            let tr = raw.trace().re;
            let rho = raw / C64::new(tr, 0.0);
            DMatrix::<C64>::identity(d * d, d * d)
                .kronecker(&psd_sqrt(&rho))
                .kronecker(&DMatrix::<C64>::identity(d, d))
        }
    };
    // random POVM on the full space by Gram normalization
    let mut grams: Vec<DMatrix<C64>> = (0..d * d).map(|_| random_psd(n, rng)).collect();
    let mut sum = DMatrix::<C64>::zeros(n, n);
    for g in &grams {
        sum += g;
    }
    let fix = psd_inv_sqrt(&sum, 1e-12);
    for g in &mut grams {
        *g = &fix * &*g * &fix;
    }
    let elements = grams
        .into_iter()
        .map(|m| Operator::new(sig.clone(), &root * m * &root))
        .collect::<Result<Vec<_>>>()?;
    GeneralizedInstrument::new(d, task, elements)
}

fn random_psd(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::<C64>::from_fn(n, n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    &g * g.adjoint()
}

fn generic_symmetrization_suite(d: usize, seed: u64) -> Result<Vec<ReportEntry>> {
    let mut entries = Vec::new();
    let table = delta_table(d)?;
    for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
        let mut rng = stream_rng(seed, 6000 + d as u64);
        let raw = random_instrument(d, task, &mut rng)?;
        let (mc, stderr) = haar_average_fidelity(&raw, 2000, seed ^ 0xABCD);
        // full symmetrization chain lands in the reduced family
        let mut current = raw;
        for which in [
            Symmetrization::Diagonal,
            Symmetrization::Covariant,
            Symmetrization::Relabel,
            Symmetrization::Swap,
        ] {
            current = symmetrize(&current, which)?;
        }
        let reduced = reduced_fidelity_with(&table, &extract_blocks(&current)?)?.total;
        let gap = (mc - reduced).abs();
        let task_name = match task {
            ReplicationTask::Cloning => "cloning",
            ReplicationTask::Learning => "learning",
        };
        entries.push(ReportEntry::bool_check(
            format!("symmetrize.chain.{task_name}.d{d}"),
            "the symmetrization chain preserves the figure of merit of a generic instrument",
            gap <= mc_tol(stderr),
            format!("MC {mc:.9} (stderr {stderr:.2e}) vs reduced {reduced:.9}"),
            mc_tol(stderr),
        ));
        let bound = match task {
            ReplicationTask::Cloning => cloning_fidelity_closed_form(d),
            ReplicationTask::Learning => learning_fidelity_closed_form(d),
        };
        entries.push(ReportEntry::bool_check(
            format!("symmetrize.chain_bound.{task_name}.d{d}"),
            "a generic instrument never beats the optimum",
            reduced <= bound + 1e-9,
            format!("reduced {reduced:.9} vs optimum {bound:.9}"),
            1e-9,
        ));
    }
    Ok(entries)
}

fn povm_distance(a: &Povm, b: &Povm) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in a.elements().iter().zip(b.elements()) {
        worst = worst.max(x.distance(y)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_verification_run_has_no_failures() {
        let cfg = VerifyConfig {
            dims: vec![2],
            mc_samples: 200,
            soundness_blocks: 4,
            soundness_samples: 16,
            optimality_samples: 500,
            ..Default::default()
        };
        let report = run_verification(&cfg).unwrap();
        let fails: Vec<_> = report
            .entries
            .iter()
            .filter(|e| e.status == Status::Fail)
            .collect();
        assert!(fails.is_empty(), "failures: {fails:#?}");
        // the known published-value discrepancies surface as WARN
        let (_, warns, _) = report.counts();
        assert!(warns > 0);
    }

    #[test]
    fn tampered_delta_table_fails_the_scan() {
        let d = 3;
        let mut table = delta_table(d).unwrap();
        // sabotage one entry through the test-only mutator
        table.tamper_beta_for_test(OutcomeClass::Xyy, 0.123);
        let entries = delta_scan(d, &table).unwrap();
        assert!(entries.iter().any(|e| e.status == Status::Fail
            && e.id.contains("delta.recomputed")));
    }

    #[test]
    fn random_instruments_are_valid() {
        let mut rng = stream_rng(777, 0);
        for task in [ReplicationTask::Cloning, ReplicationTask::Learning] {
            let g = random_instrument(2, task, &mut rng).unwrap();
            let entries = check_instrument(&g, 1e-8);
            assert!(
                entries.iter().all(|e| e.status == Status::Pass),
                "{entries:#?}"
            );
        }
    }

    #[test]
    fn verification_is_deterministic_under_a_fixed_seed() {
        let cfg = VerifyConfig {
            dims: vec![2],
            mc_samples: 50,
            soundness_blocks: 2,
            soundness_samples: 8,
            optimality_samples: 100,
            seed: 7,
            ..Default::default()
        };
        let a = run_verification(&cfg).unwrap().to_json_lines();
        let b = run_verification(&cfg).unwrap().to_json_lines();
        assert_eq!(a, b);
    }
}
