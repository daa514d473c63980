//! Choi representations of channels and networks, the link product, and
//! normalization validators for deterministic combs and generalized
//! instruments.
//!
//! Conventions: the Choi operator of a map from `in` to `out` is
//! `M = (M (X) id)(|omega><omega|)` with `|omega> = sum_n |n>|n>`, carried on
//! the signature `(out, in)`.  The link product contracts over the shared
//! labels `K` with the partial transpose applied to the *first* argument:
//! `a * b = Tr_K[a^{theta_K} b]`.  The surviving labels keep `a`'s order
//! followed by `b`'s.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::{max_entangled_vector, Operator, Signature, PSD_TOL};
use crate::report::{ReportEntry, Status};

/// Whether a wire is an input or an output of the represented map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireRole {
    Input,
    Output,
}

/// An [`Operator`] tagged with the input/output role of each subsystem.
#[derive(Clone, Debug)]
pub struct ChoiOperator {
    op: Operator,
    roles: BTreeMap<String, WireRole>,
}

impl ChoiOperator {
    pub fn new(op: Operator, inputs: &[&str], outputs: &[&str]) -> Result<Self> {
        let mut roles = BTreeMap::new();
        for l in inputs {
            if !op.signature().contains(l) {
                return Err(Error::UnknownLabel((*l).to_string()));
            }
            roles.insert((*l).to_string(), WireRole::Input);
        }
        for l in outputs {
            if !op.signature().contains(l) {
                return Err(Error::UnknownLabel((*l).to_string()));
            }
            if roles.insert((*l).to_string(), WireRole::Output).is_some() {
                return Err(Error::DuplicateLabel((*l).to_string()));
            }
        }
        if roles.len() != op.signature().len() {
            return Err(Error::SignatureMismatch(
                "every subsystem needs an input/output role".into(),
            ));
        }
        Ok(Self { op, roles })
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn role(&self, label: &str) -> Option<WireRole> {
        self.roles.get(label).copied()
    }

    pub fn input_labels(&self) -> Vec<&str> {
        self.op
            .signature()
            .labels()
            .into_iter()
            .filter(|l| self.roles.get(*l) == Some(&WireRole::Input))
            .collect()
    }

    pub fn output_labels(&self) -> Vec<&str> {
        self.op
            .signature()
            .labels()
            .into_iter()
            .filter(|l| self.roles.get(*l) == Some(&WireRole::Output))
            .collect()
    }

    /// Channel normalization: PSD and `Tr_out[M] = I_in`.
    pub fn is_channel(&self, tol: f64) -> Result<bool> {
        if !self.op.is_psd(tol.max(PSD_TOL))? {
            return Ok(false);
        }
        let outs = self.output_labels();
        let reduced = self.op.partial_trace(&outs)?;
        let idd = Operator::identity(reduced.signature().clone());
        reduced.approx_eq(&idd, tol * (reduced.dim() as f64).sqrt().max(1.0))
    }
}

fn check_unitary(u: &DMatrix<C64>, tol: f64) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::Shape("unitary must be square".into()));
    }
    let n = u.nrows();
    let dev = (u.adjoint() * u - DMatrix::<C64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > tol {
        return Err(Error::NotUnitary {
            deviation: dev,
            tol,
        });
    }
    Ok(())
}

/// Choi operator `(U (X) I)|omega><omega|(U (X) I)^dag` of a unitary channel,
/// on the signature `(out, in)`.
pub fn choi_of_unitary(u: &DMatrix<C64>, out_label: &str, in_label: &str) -> Result<ChoiOperator> {
    check_unitary(u, 1e-10)?;
    let d = u.nrows();
    let omega = max_entangled_vector(d);
    let ext = u.kronecker(&DMatrix::<C64>::identity(d, d));
    let v = &ext * omega;
    let sig = Signature::new(&[(out_label, d), (in_label, d)])?;
    let op = Operator::from_ket(sig, &v)?;
    ChoiOperator::new(op, &[in_label], &[out_label])
}

/// Core link-product contraction on plain operators.
///
/// The contraction set is the intersection of the label sets (equal
/// dimensions required); the partial transpose lands on `a`.  Implemented as
/// a reshaped matrix product rather than embed-and-multiply, so the cost is
/// `|a-only|^2 * |shared|^2 * |b-only|^2`.
pub fn link_ops(a: &Operator, b: &Operator) -> Result<Operator> {
    let a_labels = a.signature().labels();
    let shared: Vec<&str> = a_labels
        .iter()
        .copied()
        .filter(|l| b.signature().contains(l))
        .collect();
    for l in &shared {
        let da = a.signature().dim_of(l).unwrap();
        let db = b.signature().dim_of(l).unwrap();
        if da != db {
            return Err(Error::DimMismatch {
                label: (*l).to_string(),
                left: da,
                right: db,
            });
        }
    }
    let a_only: Vec<&str> = a_labels
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    let b_only: Vec<&str> = b
        .signature()
        .labels()
        .into_iter()
        .filter(|l| !shared.contains(l))
        .collect();

    // Align: a -> (a_only, shared), b -> (shared, b_only).
    let mut a_order = a_only.clone();
    a_order.extend(shared.iter().copied());
    let a_al = a.permute_systems(&a_order)?;
    let mut b_order = shared.clone();
    b_order.extend(b_only.iter().copied());
    let b_al = b.permute_systems(&b_order)?;

    let dx = a_only
        .iter()
        .map(|l| a.signature().dim_of(l).unwrap())
        .product::<usize>();
    let dk = shared
        .iter()
        .map(|l| a.signature().dim_of(l).unwrap())
        .product::<usize>();
    let dy = b_only
        .iter()
        .map(|l| b.signature().dim_of(l).unwrap())
        .product::<usize>();

    // out[(x,y),(x',y')] = sum_{p,k} a[(x,p),(x',k)] b[(p,y),(k,y')]
    // (the partial transpose on `a` reduces to this index pairing)
    let am = a_al.matrix();
    let mut m_a = DMatrix::<C64>::zeros(dx * dx, dk * dk);
    for x in 0..dx {
        for xp in 0..dx {
            for p in 0..dk {
                for k in 0..dk {
                    m_a[(x * dx + xp, p * dk + k)] = am[(x * dk + p, xp * dk + k)];
                }
            }
        }
    }
    let bm = b_al.matrix();
    let mut m_b = DMatrix::<C64>::zeros(dk * dk, dy * dy);
    for p in 0..dk {
        for k in 0..dk {
            for y in 0..dy {
                for yp in 0..dy {
                    m_b[(p * dk + k, y * dy + yp)] = bm[(p * dy + y, k * dy + yp)];
                }
            }
        }
    }
    let prod = m_a * m_b;

    let out_sig = a
        .signature()
        .restricted_to(&a_only)
        .concat(&b.signature().restricted_to(&b_only))?;
    let mut out = DMatrix::<C64>::zeros(dx * dy, dx * dy);
    for x in 0..dx {
        for xp in 0..dx {
            for y in 0..dy {
                for yp in 0..dy {
                    out[(x * dy + y, xp * dy + yp)] = prod[(x * dx + xp, y * dy + yp)];
                }
            }
        }
    }
    Operator::new(out_sig, out)
}

/// Link product of two Choi operators over their shared wires.
pub fn link(a: &ChoiOperator, b: &ChoiOperator) -> Result<ChoiOperator> {
    let op = link_ops(&a.op, &b.op)?;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for l in op.signature().labels() {
        let role = a.role(l).or_else(|| b.role(l)).unwrap_or(WireRole::Output);
        match role {
            WireRole::Input => inputs.push(l.to_string()),
            WireRole::Output => outputs.push(l.to_string()),
        }
    }
    let ins: Vec<&str> = inputs.iter().map(|s| s.as_str()).collect();
    let outs: Vec<&str> = outputs.iter().map(|s| s.as_str()).collect();
    ChoiOperator::new(op, &ins, &outs)
}

/// Apply a channel to a state: `M(rho) = Tr_in[M (I (X) rho^T)]`, realized
/// as the link of the Choi operator with the (un-transposed) state over the
/// input wires.
pub fn apply_channel(c: &ChoiOperator, rho: &Operator) -> Result<Operator> {
    let ins = c.input_labels();
    let rho_labels = rho.signature().labels();
    if rho_labels.len() != ins.len() || !ins.iter().all(|l| rho.signature().contains(l)) {
        return Err(Error::SignatureMismatch(format!(
            "state labels {:?} do not match channel inputs {:?}",
            rho_labels, ins
        )));
    }
    for l in &ins {
        let dc = c.op.signature().dim_of(l).unwrap();
        let dr = rho.signature().dim_of(l).unwrap();
        if dc != dr {
            return Err(Error::DimMismatch {
                label: (*l).to_string(),
                left: dc,
                right: dr,
            });
        }
    }
    link_ops(&c.op, rho)
}

/// One tooth of a causal network: the wires that enter and leave it.
#[derive(Clone, Debug)]
pub struct Tooth {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Tooth {
    pub fn new(inputs: &[&str], outputs: &[&str]) -> Self {
        Self {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Causal ordering of the teeth of a comb, earliest first.
#[derive(Clone, Debug)]
pub struct NetworkShape {
    pub teeth: Vec<Tooth>,
}

impl NetworkShape {
    pub fn new(teeth: Vec<Tooth>) -> Self {
        Self { teeth }
    }

    /// Two-tooth cloning comb on labels A,B -> C then D -> (outcome).
    pub fn cloning() -> Self {
        Self::new(vec![Tooth::new(&["A", "B"], &["C"]), Tooth::new(&["D"], &[])])
    }

    /// Three-tooth learning comb: () -> C, then D -> (), then A,B -> ().
    pub fn learning() -> Self {
        Self::new(vec![
            Tooth::new(&[], &["C"]),
            Tooth::new(&["D"], &[]),
            Tooth::new(&["A", "B"], &[]),
        ])
    }

    fn all_labels(&self) -> Vec<&str> {
        self.teeth
            .iter()
            .flat_map(|t| t.inputs.iter().chain(t.outputs.iter()))
            .map(|s| s.as_str())
            .collect()
    }
}

/// Deterministic-comb predicate: the recursive normalization
/// `Tr_out_k[R^(k)] = I_in_k (X) R^(k-1)` must hold down to `R^(0) = 1`.
pub fn check_comb(op: &Operator, shape: &NetworkShape, tol: f64) -> Result<bool> {
    let labels = shape.all_labels();
    for l in &labels {
        if !op.signature().contains(l) {
            return Err(Error::UnknownLabel((*l).to_string()));
        }
    }
    if labels.len() != op.signature().len() {
        return Err(Error::SignatureMismatch(
            "shape does not cover the operator's subsystems".into(),
        ));
    }
    let mut current = op.clone();
    for tooth in shape.teeth.iter().rev() {
        let outs: Vec<&str> = tooth.outputs.iter().map(|s| s.as_str()).collect();
        let ins: Vec<&str> = tooth.inputs.iter().map(|s| s.as_str()).collect();
        let traced = current.partial_trace(&outs)?;
        let din: usize = ins
            .iter()
            .map(|l| op.signature().dim_of(l).unwrap())
            .product();
        let next = traced.partial_trace(&ins)?.scale_re(1.0 / din as f64);
        let reference = Operator::identity(traced.signature().restricted_to(&ins))
            .tensor(&next)?
            .aligned_to(traced.signature())?;
        let scale = traced.frobenius_norm().max(1.0);
        if traced.distance(&reference)? > tol * scale {
            return Ok(false);
        }
        current = next;
    }
    if current.dim() != 1 {
        return Err(Error::Shape(
            "comb recursion did not terminate on a scalar".into(),
        ));
    }
    Ok((current.matrix()[(0, 0)] - C64::new(1.0, 0.0)).norm() <= tol)
}

/// Which replication game an instrument plays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ReplicationTask {
    Cloning,
    Learning,
}

/// Outcome-indexed family of probabilistic combs on A,B,C,D whose sum is a
/// deterministic comb of the given task.
///
/// Wires: A,B are the two systems to be measured, C feeds the single use of
/// the device, D returns its outcome flag.  Elements are stored on the
/// canonical signature order (A,B,C,D); outcome pairs are 0-based.
#[derive(Clone, Debug)]
pub struct GeneralizedInstrument {
    d: usize,
    task: ReplicationTask,
    elements: Vec<Operator>,
}

pub const WIRE_A: &str = "A";
pub const WIRE_B: &str = "B";
pub const WIRE_C: &str = "C";
pub const WIRE_D: &str = "D";

/// Canonical instrument signature (A,B,C,D), all of dimension `d`.
pub fn instrument_signature(d: usize) -> Signature {
    Signature::new(&[(WIRE_A, d), (WIRE_B, d), (WIRE_C, d), (WIRE_D, d)])
        .expect("labels are distinct")
}

impl GeneralizedInstrument {
    pub fn new(d: usize, task: ReplicationTask, elements: Vec<Operator>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension { got: d, min: 2 });
        }
        if elements.len() != d * d {
            return Err(Error::InvalidInstrument(format!(
                "expected {} elements, got {}",
                d * d,
                elements.len()
            )));
        }
        let sig = instrument_signature(d);
        let elements = elements
            .into_iter()
            .map(|e| {
                if e.signature().len() != 4 || e.signature().dims() != vec![d, d, d, d] {
                    return Err(Error::InvalidInstrument(
                        "element is not a four-wire operator of matching dimension".into(),
                    ));
                }
                e.aligned_to(&sig)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, task, elements })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn task(&self) -> ReplicationTask {
        self.task
    }

    pub fn element(&self, i: usize, j: usize) -> &Operator {
        &self.elements[i * self.d + j]
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn outcome_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.d;
        (0..d * d).map(move |n| (n / d, n % d))
    }

    pub fn total(&self) -> Operator {
        let mut sum = Operator::zeros(instrument_signature(self.d));
        for e in &self.elements {
            sum = &sum + e;
        }
        sum
    }

    /// Convex mixture of two instruments of the same task and dimension.
    pub fn mix(&self, other: &GeneralizedInstrument, weight: f64) -> Result<GeneralizedInstrument> {
        if self.d != other.d || self.task != other.task {
            return Err(Error::InvalidInstrument(
                "mixture requires equal dimension and task".into(),
            ));
        }
        let elements = self
            .elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| &a.scale_re(weight) + &b.scale_re(1.0 - weight))
            .collect();
        GeneralizedInstrument::new(self.d, self.task, elements)
    }

    /// The comb shape of the task normalization.
    pub fn shape(&self) -> NetworkShape {
        match self.task {
            ReplicationTask::Cloning => NetworkShape::cloning(),
            ReplicationTask::Learning => NetworkShape::learning(),
        }
    }
}

/// Validate an instrument: element-wise PSD plus the task-specific sum
/// structure.  Returns report entries rather than failing hard.
pub fn check_instrument(g: &GeneralizedInstrument, tol: f64) -> Vec<ReportEntry> {
    let mut entries = Vec::new();
    let task_name = match g.task() {
        ReplicationTask::Cloning => "cloning",
        ReplicationTask::Learning => "learning",
    };

    let psd_ok = g
        .elements()
        .iter()
        .all(|e| e.is_psd(tol.max(PSD_TOL)).unwrap_or(false));
    entries.push(ReportEntry {
        id: format!("instrument.{task_name}.elements_psd.d{}", g.d()),
        anchor: "probabilistic combs are positive".into(),
        computed: format!("{} elements PSD: {psd_ok}", g.elements().len()),
        expected: "true".into(),
        tolerance: tol,
        status: if psd_ok { Status::Pass } else { Status::Fail },
        note: String::new(),
    });

    let total = g.total();
    let comb_ok = check_comb(&total, &g.shape(), tol).unwrap_or(false);
    entries.push(ReportEntry {
        id: format!("instrument.{task_name}.sum_normalization.d{}", g.d()),
        anchor: "sum of instrument elements is a deterministic comb".into(),
        computed: format!("recursive comb chain holds: {comb_ok}"),
        expected: "true".into(),
        tolerance: tol,
        status: if comb_ok { Status::Pass } else { Status::Fail },
        note: String::new(),
    });

    match g.task() {
        ReplicationTask::Cloning => {
            // Sum = I_D (X) S with Tr_C[S] = I_AB.
            let d = g.d() as f64;
            let s = total
                .partial_trace(&[WIRE_D])
                .and_then(|x| Ok(x.scale_re(1.0 / d)));
            if let Ok(s) = s {
                let rebuilt = s
                    .tensor(&Operator::identity(Signature::new(&[(WIRE_D, g.d())]).unwrap()))
                    .and_then(|x| x.aligned_to(total.signature()));
                let dist = rebuilt.and_then(|r| total.distance(&r)).unwrap_or(f64::NAN);
                let ok = dist <= tol * total.frobenius_norm().max(1.0);
                entries.push(ReportEntry {
                    id: format!("instrument.cloning.identity_on_flag.d{}", g.d()),
                    anchor: "sum factorizes as I_D (X) S_ABC".into(),
                    computed: format!("distance {dist:.3e}"),
                    expected: "0".into(),
                    tolerance: tol,
                    status: if ok { Status::Pass } else { Status::Fail },
                    note: String::new(),
                });
            }
        }
        ReplicationTask::Learning => {
            // Sum = I_ABD (X) rho_C with Tr[rho] = 1; covariance forces
            // rho = I/d, which is reported but not required here.
            let dd = g.d() * g.d() * g.d();
            let rho = total
                .partial_trace(&[WIRE_A, WIRE_B, WIRE_D])
                .map(|x| x.scale_re(1.0 / dd as f64));
            if let Ok(rho) = rho {
                let tr = rho.trace();
                let tr_ok = (tr - C64::new(1.0, 0.0)).norm() <= tol * 10.0;
                let rebuilt = Operator::identity(
                    Signature::new(&[(WIRE_A, g.d()), (WIRE_B, g.d()), (WIRE_D, g.d())]).unwrap(),
                )
                .tensor(&rho)
                .and_then(|x| x.aligned_to(total.signature()));
                let dist = rebuilt.and_then(|r| total.distance(&r)).unwrap_or(f64::NAN);
                let ok = tr_ok && dist <= tol * total.frobenius_norm().max(1.0);
                let maximally_mixed = rho
                    .approx_eq(
                        &Operator::identity(rho.signature().clone())
                            .scale_re(1.0 / g.d() as f64),
                        tol * 10.0,
                    )
                    .unwrap_or(false);
                entries.push(ReportEntry {
                    id: format!("instrument.learning.state_on_probe.d{}", g.d()),
                    anchor: "sum factorizes as I_ABD (X) rho_C with unit trace".into(),
                    computed: format!(
                        "distance {dist:.3e}, Tr rho = {:.12}, rho = I/d: {maximally_mixed}",
                        tr.re
                    ),
                    expected: "factorized, trace one".into(),
                    tolerance: tol,
                    status: if ok { Status::Pass } else { Status::Fail },
                    note: if maximally_mixed {
                        "probe state is maximally mixed".into()
                    } else {
                        "probe state deviates from I/d".into()
                    },
                });
            }
        }
    }

    entries
}
