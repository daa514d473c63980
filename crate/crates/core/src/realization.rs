//! Physical network realizing the optimal cloning instrument.
//!
//! The network prepares a control qubit in `|+>`, applies a control-SWAP to
//! the two inputs, feeds one output arm to the single use of the device,
//! discards the other, measures a 3-outcome POVM on the control and
//! classically post-processes the pair of outcomes.  Linking the pieces
//! reproduces the abstract optimal instrument element by element.
//!
//! Coefficients: the control POVM is `P_1 = (8/9)|+><+|`,
//! `P_2 = |psi><psi|` with `psi = sqrt(1/18)|+> + sqrt(1/2)|->`, and
//! `P_3` the image of `P_2` under the sign flip of the `|->` amplitude.
//! These are dimension-independent and make the link-product identity with
//! the optimal blocks exact.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::comb::{
    link_ops, ChoiOperator, GeneralizedInstrument, ReplicationTask, WIRE_A, WIRE_B, WIRE_C,
    WIRE_D,
};
use crate::error::{Error, Result};
use crate::measurement::{replicated_povm, Povm, VonNeumannPovm};
use crate::operator::{Operator, Signature};
use crate::optimize::optimal_cloning_blocks;
use crate::rng::stream_rng;
use crate::symmetry::assemble_instrument;

/// Discarded output arm of the control-SWAP.
pub const WIRE_K: &str = "K";
/// Control qubit wire entering the gate.
pub const WIRE_L: &str = "L";
/// Control qubit wire leaving the gate.
pub const WIRE_LP: &str = "Lp";

fn ket2(a: f64, b: f64) -> DVector<C64> {
    DVector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)])
}

/// `|+>` on the control wire.
pub fn plus_state(label: &str) -> Operator {
    let s = 1.0 / 2.0_f64.sqrt();
    Operator::from_ket(Signature::new(&[(label, 2)]).unwrap(), &ket2(s, s)).unwrap()
}

/// Sign flip of the `|->` amplitude: `|+><+| - |-><-|` (the X matrix in the
/// computational basis).
pub fn minus_flip() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
}

/// Control-SWAP on two `d`-level systems and a control qubit: routes
/// `A -> C, B -> K` on `|0>_L` and `A -> K, B -> C` on `|1>_L`.
#[derive(Clone, Debug)]
pub struct ControlSwapGate {
    d: usize,
    matrix: DMatrix<C64>,
}

impl ControlSwapGate {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension { got: d, min: 2 });
        }
        let n = 2 * d * d;
        let mut matrix = DMatrix::<C64>::zeros(n, n);
        for a in 0..d {
            for b in 0..d {
                // basis order (first-system, second-system, control)
                matrix[((a * d + b) * 2, (a * d + b) * 2)] = C64::new(1.0, 0.0);
                matrix[((b * d + a) * 2 + 1, (a * d + b) * 2 + 1)] = C64::new(1.0, 0.0);
            }
        }
        Ok(Self { d, matrix })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The unitary in the `(A, B, L)` product basis (outputs read as
    /// `(C, K, Lp)` in the same ordering).
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Choi operator on outputs `(C, K, Lp)` and inputs `(A, B, L)`.
    pub fn choi(&self) -> Result<ChoiOperator> {
        let d = self.d;
        let in_sig = Signature::new(&[(WIRE_A, d), (WIRE_B, d), (WIRE_L, 2)])?;
        let out_sig = Signature::new(&[(WIRE_C, d), (WIRE_K, d), (WIRE_LP, 2)])?;
        let n = 2 * d * d;
        // (U (X) I)|omega> with |omega> = sum_x |x>|x> over the input basis
        let mut v = DVector::<C64>::zeros(n * n);
        for x in 0..n {
            for y in 0..n {
                let amp = self.matrix[(y, x)];
                if amp.norm_sqr() > 0.0 {
                    v[y * n + x] = amp;
                }
            }
        }
        let sig = out_sig.concat(&in_sig)?;
        let op = Operator::from_ket(sig, &v)?;
        ChoiOperator::new(op, &[WIRE_A, WIRE_B, WIRE_L], &[WIRE_C, WIRE_K, WIRE_LP])
    }
}

/// The 3-outcome control POVM.
#[derive(Clone, Debug)]
pub struct ControlPovm {
    elements: [Operator; 3],
}

impl ControlPovm {
    pub fn elements(&self) -> &[Operator; 3] {
        &self.elements
    }

    pub fn element(&self, n: usize) -> &Operator {
        &self.elements[n]
    }

    pub fn as_povm(&self) -> Result<Povm> {
        Povm::new(self.elements.to_vec())
    }
}

/// `psi = sqrt(1/18)|+> + sqrt(1/2)|->`, written in the computational basis
/// as `(2/3)|0> - (1/3)|1>`.
pub fn control_psi() -> DVector<C64> {
    ket2(2.0 / 3.0, -1.0 / 3.0)
}

/// Control POVM on the wire `label`; the coefficients are independent of the
/// system dimension.  Completeness holds exactly: the `|+><-|` cross terms
/// of `P_2` and `P_3` cancel.
pub fn control_povm(d: usize) -> Result<ControlPovm> {
    if d < 2 {
        return Err(Error::InvalidDimension { got: d, min: 2 });
    }
    let sig = Signature::new(&[(WIRE_L, 2)])?;
    let s = 1.0 / 2.0_f64.sqrt();
    let plus = ket2(s, s);
    let p1 = Operator::from_ket(sig.clone(), &plus)?.scale_re(8.0 / 9.0);
    let psi = control_psi();
    let p2 = Operator::from_ket(sig.clone(), &psi)?;
    let chi = minus_flip() * &psi;
    let p3 = Operator::from_ket(sig, &chi)?;
    Ok(ControlPovm {
        elements: [p1, p2, p3],
    })
}

/// Bipartite POVM on the flag wire D and the control wire L that absorbs the
/// control measurement and the classical processing:
/// `Q_ii = |i><i| (X) P_1`, `Q_ij = (|i><i| (X) P_2 + |j><j| (X) P_3)/(d-1)`.
pub fn bipartite_q_povm(d: usize) -> Result<Povm> {
    let control = control_povm(d)?;
    let mut elements = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let di = Operator::basis_projector(WIRE_D, d, i)?;
            let op = if i == j {
                di.tensor(control.element(0))?
            } else {
                let dj = Operator::basis_projector(WIRE_D, d, j)?;
                let a = di.tensor(control.element(1))?;
                let b = dj.tensor(control.element(2))?;
                (&a + &b).scale_re(1.0 / (d as f64 - 1.0))
            };
            elements.push(op);
        }
    }
    Povm::new(elements)
}

/// Classical post-processing of the device outcome `k` and the control
/// outcome `n`: `(k,k)` on `n = 1`, `(k, j != k)` on `n = 2`, `(j != k, k)`
/// on `n = 3`, with `j` uniform.
pub struct ClassicalProcessing;

impl ClassicalProcessing {
    pub fn apply(d: usize, k: usize, n: usize, rng: &mut impl Rng) -> (usize, usize) {
        match n {
            0 => (k, k),
            1 => (k, Self::other(d, k, rng)),
            2 => (Self::other(d, k, rng), k),
            _ => panic!("control outcome out of range"),
        }
    }

    fn other(d: usize, k: usize, rng: &mut impl Rng) -> usize {
        let r = rng.random_range(0..d - 1);
        if r >= k {
            r + 1
        } else {
            r
        }
    }
}

/// Build the optimal cloning instrument purely from link products:
/// `R_ij = |+><+|_L * Choi(U_CS) * (Q_ij (X) I_K)`.
pub fn realization_instrument(d: usize) -> Result<GeneralizedInstrument> {
    let gate = ControlSwapGate::new(d)?;
    let choi = gate.choi()?;
    let plus = plus_state(WIRE_L);
    let open_network = link_ops(&plus, choi.op())?;
    let q = bipartite_q_povm(d)?;
    let ik = Operator::identity(Signature::new(&[(WIRE_K, d)])?);
    let mut elements = Vec::with_capacity(d * d);
    for idx in 0..d * d {
        // the measured control wire is the gate's output Lp
        let tester = q.elements()[idx]
            .transpose()
            .permute_systems(&[WIRE_D, WIRE_L])?;
        let tester = relabel_single(&tester, WIRE_L, WIRE_LP)?.tensor(&ik)?;
        elements.push(link_ops(&open_network, &tester)?);
    }
    GeneralizedInstrument::new(d, ReplicationTask::Cloning, elements)
}

/// Rebuild an operator with one subsystem renamed (same matrix).
fn relabel_single(op: &Operator, from: &str, to: &str) -> Result<Operator> {
    let subs = op
        .signature()
        .subsystems()
        .iter()
        .map(|s| {
            let label = if s.label() == from { to } else { s.label() };
            (label.to_string(), s.dim())
        })
        .collect::<Vec<_>>();
    let pairs: Vec<(&str, usize)> = subs.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    Operator::new(Signature::new(&pairs)?, op.matrix().clone())
}

/// The abstract optimal instrument the network must reproduce.
pub fn assembled_optimal_instrument(d: usize) -> Result<GeneralizedInstrument> {
    assemble_instrument(&optimal_cloning_blocks(d)?)
}

/// Outcome histogram of a trajectory simulation.
#[derive(Clone, Debug)]
pub struct Histogram {
    counts: BTreeMap<(usize, usize), u64>,
    shots: u64,
}

impl Histogram {
    pub fn counts(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn frequency(&self, outcome: (usize, usize)) -> f64 {
        *self.counts.get(&outcome).unwrap_or(&0) as f64 / self.shots as f64
    }
}

const SHARD: u64 = 4096;

/// Trajectory simulation of the cloning network: control-SWAP, one use of
/// the device `E^(U)` on C, discard K, measure the control POVM, classical
/// processing.  Shots are sharded over derived RNG streams so the histogram
/// is reproducible under any schedule.
pub fn simulate_run(
    d: usize,
    u: &DMatrix<C64>,
    rho_ab: &Operator,
    shots: u64,
    seed: u64,
) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::InvalidState("need at least one shot".into()));
    }
    let sig_ab = Signature::new(&[(WIRE_A, d), (WIRE_B, d)])?;
    let rho = rho_ab.aligned_to(&sig_ab)?;
    if !rho.is_psd(1e-9)? || (rho.trace().re - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(
            "input must be a density operator".into(),
        ));
    }
    let gate = ControlSwapGate::new(d)?;
    let state0 = rho.tensor(&plus_state(WIRE_L))?;
    let evolved = gate.matrix() * state0.matrix() * gate.matrix().adjoint();
    let device = VonNeumannPovm::from_unitary(u, WIRE_C)?;
    let control = control_povm(d)?;

    // Per device outcome k: probability p_k and the conditional control
    // outcome distribution q_{k,n}.  (C,K,Lp) ordering, C most significant.
    let mut p_k = vec![0.0; d];
    let mut q_kn = vec![[0.0; 3]; d];
    let dim_kl = 2 * d;
    for k in 0..d {
        let uk = device.unitary().column(k);
        // sigma_k = <u_k|_C evolved |u_k>_C (unnormalized, on K,L)
        let mut sigma = DMatrix::<C64>::zeros(dim_kl, dim_kl);
        for c1 in 0..d {
            for c2 in 0..d {
                let w = uk[c1].conj() * uk[c2];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for r in 0..dim_kl {
                    for s in 0..dim_kl {
                        sigma[(r, s)] += w.conj() * evolved[(c1 * dim_kl + r, c2 * dim_kl + s)];
                    }
                }
            }
        }
        let p = sigma.trace().re;
        p_k[k] = p.max(0.0);
        if p > 1e-15 {
            // discard K, leaving the control qubit
            let mut tau = DMatrix::<C64>::zeros(2, 2);
            for kk in 0..d {
                for l1 in 0..2 {
                    for l2 in 0..2 {
                        tau[(l1, l2)] += sigma[(kk * 2 + l1, kk * 2 + l2)];
                    }
                }
            }
            for n in 0..3 {
                q_kn[k][n] =
                    ((control.element(n).matrix() * &tau).trace().re / p).max(0.0);
            }
        }
    }

    let shards = shots.div_ceil(SHARD);
    let partials: Vec<BTreeMap<(usize, usize), u64>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(seed, shard);
            let mut counts = BTreeMap::new();
            let in_shard = SHARD.min(shots - shard * SHARD);
            for _ in 0..in_shard {
                let k = sample_categorical(&p_k, &mut rng);
                let n = sample_categorical(&q_kn[k], &mut rng);
                let outcome = ClassicalProcessing::apply(d, k, n, &mut rng);
                *counts.entry(outcome).or_insert(0u64) += 1;
            }
            counts
        })
        .collect();
    let mut counts = BTreeMap::new();
    for partial in partials {
        for (outcome, c) in partial {
            *counts.entry(outcome).or_insert(0) += c;
        }
    }
    Ok(Histogram { counts, shots })
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (n, p) in probs.iter().enumerate() {
        x -= p;
        if x <= 0.0 {
            return n;
        }
    }
    probs.len() - 1
}

/// Born-rule reference distribution `p_ij = Tr[G_ij rho]` for the network's
/// replicated POVM.
pub fn born_probabilities(
    g: &GeneralizedInstrument,
    u: &DMatrix<C64>,
    rho_ab: &Operator,
) -> Result<BTreeMap<(usize, usize), f64>> {
    let povm = replicated_povm(g, u)?;
    let d = g.d();
    let rho = rho_ab.aligned_to(povm.signature())?;
    let mut out = BTreeMap::new();
    for (idx, element) in povm.elements().iter().enumerate() {
        let p = (element.matrix() * rho.matrix()).trace().re;
        out.insert((idx / d, idx % d), p.max(0.0));
    }
    Ok(out)
}

/// Upper 0.999 quantiles of the chi-square distribution for small degrees of
/// freedom, used by the trajectory-vs-Born test.
const CHI2_Q999: [f64; 16] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588, 31.264,
    32.909, 34.528, 36.123, 37.697, 39.252,
];

/// Pearson statistic of a histogram against reference probabilities plus the
/// 0.999 critical value (p > 0.001 acceptance).  Categories with negligible
/// expected count are dropped; observing them at all fails the test.
pub fn chi_square_against(
    hist: &Histogram,
    reference: &BTreeMap<(usize, usize), f64>,
) -> (f64, f64) {
    let shots = hist.shots() as f64;
    let mut stat = 0.0;
    let mut dof: i64 = -1;
    for (outcome, p) in reference {
        let expected = p * shots;
        let observed = *hist.counts().get(outcome).unwrap_or(&0) as f64;
        if expected < 1e-9 {
            if observed > 0.0 {
                stat += f64::INFINITY;
            }
            continue;
        }
        dof += 1;
        stat += (observed - expected).powi(2) / expected;
    }
    let crit = CHI2_Q999[(dof.max(1) as usize - 1).min(CHI2_Q999.len() - 1)];
    (stat, crit)
}
