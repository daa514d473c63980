//! Symmetry reduction of replication instruments.
//!
//! The figure of merit is invariant under a group of symmetrizations
//! (classical readout of the flag wire, covariance under `U* (X) U* (X) U`
//! conjugation of A,B,C, simultaneous outcome relabeling, and the swap of
//! the two clones).  A fully symmetrized instrument is determined by a small
//! set of multiplicity-space blocks `s^nu_l`, one per outcome-pattern
//! equivalence class `l` and irreducible representation `nu`.
//!
//! The representation `U*_A (X) U*_B (X) U_C` on `C^d (X) C^d (X) C^d`
//! splits into the conjugate-fundamental irrep `alpha` with multiplicity two
//! (basis `Psi^+-_m = (|omega>_AC |m>_B +- |m>_A |omega>_BC)/sqrt(2(d+-1))`,
//! both components real in the computational basis) and two multiplicity-one
//! irreps `beta`, `gamma` living under the symmetric/antisymmetric projectors
//! of the clone pair; `gamma` is absent at `d = 2`.

use std::collections::BTreeMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::comb::{instrument_signature, GeneralizedInstrument, ReplicationTask};
use crate::error::{Error, Result};
use crate::operator::Operator;

/// Outcome-pattern equivalence class of a triple `(i j, k)` under
/// simultaneous relabeling.  The first two letters describe the clone
/// outcomes `i`, `j`; the third the device outcome `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum OutcomeClass {
    /// i = j = k
    Xxx,
    /// i = j, k different
    Xxy,
    /// i != j, k = i
    Xyx,
    /// i != j, k = j
    Xyy,
    /// all three distinct (absent at d = 2)
    Xyz,
}

impl OutcomeClass {
    /// Classes present at dimension `d`, in canonical order.
    pub fn all(d: usize) -> Vec<OutcomeClass> {
        use OutcomeClass::*;
        if d == 2 {
            vec![Xxx, Xxy, Xyx, Xyy]
        } else {
            vec![Xxx, Xxy, Xyx, Xyy, Xyz]
        }
    }

    /// Number of index triples in the class.
    pub fn cardinality(self, d: usize) -> usize {
        use OutcomeClass::*;
        match self {
            Xxx => d,
            Xxy | Xyx | Xyy => d * (d - 1),
            Xyz => d * (d - 1) * (d.saturating_sub(2)),
        }
    }

    /// Canonical class representative (0-based indices).
    pub fn representative(self) -> (usize, usize, usize) {
        use OutcomeClass::*;
        match self {
            Xxx => (0, 0, 0),
            Xxy => (0, 0, 1),
            Xyx => (0, 1, 0),
            Xyy => (0, 1, 1),
            Xyz => (0, 1, 2),
        }
    }

    pub fn tag(self) -> &'static str {
        use OutcomeClass::*;
        match self {
            Xxx => "xx,x",
            Xxy => "xx,y",
            Xyx => "xy,x",
            Xyy => "xy,y",
            Xyz => "xy,z",
        }
    }
}

/// Class of the outcome triple `(i, j, k)`, all 0-based and below `d`.
pub fn class_of(i: usize, j: usize, k: usize, d: usize) -> Result<OutcomeClass> {
    for idx in [i, j, k] {
        if idx >= d {
            return Err(Error::OutcomeOutOfRange { index: idx, dim: d });
        }
    }
    use OutcomeClass::*;
    Ok(if i == j {
        if k == i {
            Xxx
        } else {
            Xxy
        }
    } else if k == i {
        Xyx
    } else if k == j {
        Xyy
    } else {
        Xyz
    })
}

/// Invariant-subspace data of `U*_A (X) U*_B (X) U_C` at dimension `d`.
///
/// `v_plus`/`v_minus` hold the multiplicity vectors `Psi^+-_m` as columns;
/// the multiplicity basis is ordered `(+, -)` so that `Pi^+ = diag(1,0)`.
#[derive(Clone, Debug)]
pub struct IrrepProjectors {
    d: usize,
    v_plus: DMatrix<C64>,
    v_minus: DMatrix<C64>,
    p_beta: DMatrix<C64>,
    p_gamma: Option<DMatrix<C64>>,
    p_sym: DMatrix<C64>,
    p_asym: DMatrix<C64>,
}

/// Multiplicity-space components of an operator commuting with the
/// representation: a 2x2 block for `alpha` and scalars for `beta`, `gamma`.
#[derive(Clone, Debug)]
pub struct BlockComponents {
    pub alpha: Matrix2<C64>,
    pub beta: C64,
    pub gamma: Option<C64>,
}

/// Symmetric/antisymmetric projectors on the clone pair, as raw `d^2`
/// matrices.
pub fn sym_asym_projectors(d: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let one = C64::new(1.0, 0.0);
    let mut swap = DMatrix::<C64>::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            swap[(a * d + b, b * d + a)] = one;
        }
    }
    let idd = DMatrix::<C64>::identity(d * d, d * d);
    let p_sym = (&idd + &swap).scale(0.5);
    let p_asym = (&idd - &swap).scale(0.5);
    (p_sym, p_asym)
}

impl IrrepProjectors {
    pub fn build(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension { got: d, min: 2 });
        }
        let n = d * d * d;
        let one = C64::new(1.0, 0.0);
        // Psi^+-_m = (|omega>_AC |m>_B +- |m>_A |omega>_BC) / sqrt(2(d +- 1))
        let mut v_plus = DMatrix::<C64>::zeros(n, d);
        let mut v_minus = DMatrix::<C64>::zeros(n, d);
        for m in 0..d {
            let norm_p = 1.0 / (2.0 * (d as f64 + 1.0)).sqrt();
            let norm_m = 1.0 / (2.0 * (d as f64 - 1.0)).sqrt();
            for nn in 0..d {
                let omega_first = (nn * d + m) * d + nn; // |n>_A |m>_B |n>_C
                let omega_second = (m * d + nn) * d + nn; // |m>_A |n>_B |n>_C
                v_plus[(omega_first, m)] += one * norm_p;
                v_plus[(omega_second, m)] += one * norm_p;
                v_minus[(omega_first, m)] += one * norm_m;
                v_minus[(omega_second, m)] -= one * norm_m;
            }
        }
        let (p_sym_ab, p_asym_ab) = sym_asym_projectors(d);
        let idc = DMatrix::<C64>::identity(d, d);
        let p_sym = p_sym_ab.kronecker(&idc);
        let p_asym = p_asym_ab.kronecker(&idc);
        let p_beta = &p_sym - &v_plus * v_plus.adjoint();
        let p_gamma = if d > 2 {
            Some(&p_asym - &v_minus * v_minus.adjoint())
        } else {
            None
        };
        Ok(Self {
            d,
            v_plus,
            v_minus,
            p_beta,
            p_gamma,
            p_sym,
            p_asym,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Irrep dimensions: `d_alpha = d`, `d_beta = d(d+2)(d-1)/2`,
    /// `d_gamma = d(d-2)(d+1)/2` (zero at d = 2).
    pub fn d_alpha(&self) -> usize {
        self.d
    }

    pub fn d_beta(&self) -> usize {
        self.d * (self.d + 2) * (self.d - 1) / 2
    }

    pub fn d_gamma(&self) -> usize {
        self.d * self.d.saturating_sub(2) * (self.d + 1) / 2
    }

    pub fn d_plus(&self) -> usize {
        self.d * (self.d + 1) / 2
    }

    pub fn d_minus(&self) -> usize {
        self.d * (self.d - 1) / 2
    }

    pub fn multiplicity_vectors(&self, sign: bool) -> &DMatrix<C64> {
        if sign {
            &self.v_plus
        } else {
            &self.v_minus
        }
    }

    /// `P^alpha (X) |a><b|` embedding `sum_m |Psi^a_m><Psi^b_m|`.
    pub fn alpha_embedding(&self, a: usize, b: usize) -> DMatrix<C64> {
        let va = if a == 0 { &self.v_plus } else { &self.v_minus };
        let vb = if b == 0 { &self.v_plus } else { &self.v_minus };
        va * vb.adjoint()
    }

    pub fn p_beta(&self) -> &DMatrix<C64> {
        &self.p_beta
    }

    pub fn p_gamma(&self) -> Option<&DMatrix<C64>> {
        self.p_gamma.as_ref()
    }

    pub fn p_sym(&self) -> &DMatrix<C64> {
        &self.p_sym
    }

    pub fn p_asym(&self) -> &DMatrix<C64> {
        &self.p_asym
    }

    /// Multiplicity-space compression of an arbitrary `d^3` matrix.
    pub fn compress(&self, x: &DMatrix<C64>) -> BlockComponents {
        let d = self.d as f64;
        let mut alpha = Matrix2::<C64>::zeros();
        let vs = [&self.v_plus, &self.v_minus];
        for (a, va) in vs.iter().enumerate() {
            for (b, vb) in vs.iter().enumerate() {
                alpha[(a, b)] = (va.adjoint() * x * *vb).trace() / C64::new(d, 0.0);
            }
        }
        let beta = (&self.p_beta * x).trace() / C64::new(self.d_beta() as f64, 0.0);
        let gamma = self
            .p_gamma
            .as_ref()
            .map(|p| (p * x).trace() / C64::new(self.d_gamma() as f64, 0.0));
        BlockComponents { alpha, beta, gamma }
    }

    /// Re-embed multiplicity components into the full `d^3` space.
    pub fn embed(&self, blocks: &BlockComponents) -> DMatrix<C64> {
        let n = self.d * self.d * self.d;
        let mut out = DMatrix::<C64>::zeros(n, n);
        let vs = [&self.v_plus, &self.v_minus];
        for (a, va) in vs.iter().enumerate() {
            for (b, vb) in vs.iter().enumerate() {
                if blocks.alpha[(a, b)].norm() > 0.0 {
                    out += *va * vb.adjoint() * blocks.alpha[(a, b)];
                }
            }
        }
        out += &self.p_beta * blocks.beta;
        if let (Some(p), Some(g)) = (self.p_gamma.as_ref(), blocks.gamma) {
            out += p * g;
        }
        out
    }

    /// Exact group average over conjugation by `U* (X) U* (X) U`: projection
    /// onto the commutant, computed from the block decomposition rather than
    /// by numerical integration.
    pub fn twirl_matrix(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        self.embed(&self.compress(x))
    }

    /// The representation element `U* (X) U* (X) U` as a `d^3` matrix.
    pub fn group_element(&self, u: &DMatrix<C64>) -> DMatrix<C64> {
        let uc = u.map(|z| z.conj());
        uc.kronecker(&uc).kronecker(u)
    }
}

/// Exact twirl of an operator on three subsystems of equal dimension
/// (ordered as clones A,B then probe C).  Idempotent; the output commutes
/// with every `U* (X) U* (X) U`.
pub fn twirl(x: &Operator) -> Result<Operator> {
    let dims = x.signature().dims();
    if dims.len() != 3 || dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(Error::SignatureMismatch(
            "twirl needs three subsystems of equal dimension".into(),
        ));
    }
    let proj = IrrepProjectors::build(dims[0])?;
    Operator::new(x.signature().clone(), proj.twirl_matrix(x.matrix()))
}

/// Numerically computed multiplicity-space compressions
/// `Delta^nu_l = Tr_{H_nu}[|ijk><ijk|]` for a representative of each class.
#[derive(Clone, Debug)]
pub struct DeltaTable {
    d: usize,
    alpha: BTreeMap<OutcomeClass, Matrix2<f64>>,
    beta: BTreeMap<OutcomeClass, f64>,
    gamma: BTreeMap<OutcomeClass, f64>,
}

impl DeltaTable {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self, l: OutcomeClass) -> Matrix2<f64> {
        self.alpha[&l]
    }

    pub fn beta(&self, l: OutcomeClass) -> f64 {
        self.beta[&l]
    }

    /// Zero when the gamma sector is absent.
    pub fn gamma(&self, l: OutcomeClass) -> f64 {
        self.gamma.get(&l).copied().unwrap_or(0.0)
    }

    /// Corrupt one beta entry; exists so the verification scan's
    /// self-consistency guard can be exercised.
    #[doc(hidden)]
    pub fn tamper_beta_for_test(&mut self, l: OutcomeClass, value: f64) {
        self.beta.insert(l, value);
    }
}

/// Compute the Delta table for dimension `d` from the projector definitions.
pub fn delta_table(d: usize) -> Result<DeltaTable> {
    let proj = IrrepProjectors::build(d)?;
    delta_table_from(&proj)
}

pub fn delta_table_from(proj: &IrrepProjectors) -> Result<DeltaTable> {
    let d = proj.d();
    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    let mut gamma = BTreeMap::new();
    for l in OutcomeClass::all(d) {
        let (i, j, k) = l.representative();
        let mut ket = DVector::<C64>::zeros(d * d * d);
        ket[(i * d + j) * d + k] = C64::new(1.0, 0.0);
        // Delta^alpha_{ab} = sum_m <Psi^a_m|v><v|Psi^b_m>
        let xp = proj.multiplicity_vectors(true).adjoint() * &ket;
        let xm = proj.multiplicity_vectors(false).adjoint() * &ket;
        let comps = [&xp, &xm];
        let mut da = Matrix2::<f64>::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let val: C64 = comps[a]
                    .iter()
                    .zip(comps[b].iter())
                    .map(|(x, y)| x * y.conj())
                    .sum();
                debug_assert!(val.im.abs() < 1e-12);
                da[(a, b)] = val.re;
            }
        }
        alpha.insert(l, da);
        beta.insert(l, (ket.adjoint() * proj.p_beta() * &ket)[(0, 0)].re);
        if let Some(pg) = proj.p_gamma() {
            gamma.insert(l, (ket.adjoint() * pg * &ket)[(0, 0)].re);
        }
    }
    Ok(DeltaTable {
        d,
        alpha,
        beta,
        gamma,
    })
}

/// Symmetry-reduced instrument parameters `s^nu_l = (n(l)/d) r^nu_l`.
#[derive(Clone, Debug)]
pub struct ReducedBlocks {
    d: usize,
    task: ReplicationTask,
    alpha: BTreeMap<OutcomeClass, Matrix2<C64>>,
    beta: BTreeMap<OutcomeClass, f64>,
    gamma: BTreeMap<OutcomeClass, f64>,
}

impl ReducedBlocks {
    pub fn zeros(d: usize, task: ReplicationTask) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension { got: d, min: 2 });
        }
        let mut alpha = BTreeMap::new();
        let mut beta = BTreeMap::new();
        let mut gamma = BTreeMap::new();
        for l in OutcomeClass::all(d) {
            alpha.insert(l, Matrix2::zeros());
            beta.insert(l, 0.0);
            if d > 2 {
                gamma.insert(l, 0.0);
            }
        }
        Ok(Self {
            d,
            task,
            alpha,
            beta,
            gamma,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn task(&self) -> ReplicationTask {
        self.task
    }

    pub fn classes(&self) -> Vec<OutcomeClass> {
        OutcomeClass::all(self.d)
    }

    pub fn alpha(&self, l: OutcomeClass) -> Matrix2<C64> {
        self.alpha[&l]
    }

    pub fn beta(&self, l: OutcomeClass) -> f64 {
        self.beta[&l]
    }

    pub fn gamma(&self, l: OutcomeClass) -> f64 {
        self.gamma.get(&l).copied().unwrap_or(0.0)
    }

    pub fn set_alpha(&mut self, l: OutcomeClass, m: Matrix2<C64>) {
        self.alpha.insert(l, m);
    }

    pub fn set_beta(&mut self, l: OutcomeClass, v: f64) {
        self.beta.insert(l, v);
    }

    pub fn set_gamma(&mut self, l: OutcomeClass, v: f64) {
        assert!(self.d > 2, "gamma sector is absent at d = 2");
        self.gamma.insert(l, v);
    }

    /// PSD/nonnegativity of every block within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (l, m) in &self.alpha {
            let herm = (m[(0, 1)] - m[(1, 0)].conj()).norm()
                + m[(0, 0)].im.abs()
                + m[(1, 1)].im.abs();
            if herm > tol * 10.0 {
                return Err(Error::InvalidBlocks(format!(
                    "alpha block {l:?} is not hermitian"
                )));
            }
            let tr = m[(0, 0)].re + m[(1, 1)].re;
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
            let scale = tr.abs().max(1.0);
            if tr < -tol * scale || det < -tol * scale * scale {
                return Err(Error::InvalidBlocks(format!(
                    "alpha block {l:?} is not PSD (trace {tr:.3e}, det {det:.3e})"
                )));
            }
        }
        for (l, v) in self.beta.iter().chain(self.gamma.iter()) {
            if *v < -tol {
                return Err(Error::InvalidBlocks(format!(
                    "scalar block {l:?} is negative: {v:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// `r^nu_l = (d / n(l)) s^nu_l` for assembly.
    fn r_components(&self, l: OutcomeClass) -> (Matrix2<C64>, f64, Option<f64>) {
        let factor = self.d as f64 / l.cardinality(self.d) as f64;
        (
            self.alpha[&l] * C64::new(factor, 0.0),
            self.beta[&l] * factor,
            if self.d > 2 {
                Some(self.gamma[&l] * factor)
            } else {
                None
            },
        )
    }
}

/// Fidelity split into irrep contributions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FidelityBreakdown {
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Reduced figure of merit `F = sum_nu (1/d) sum_l Tr[Delta^nu_l s^nu_l]`.
pub fn reduced_fidelity(blocks: &ReducedBlocks) -> Result<FidelityBreakdown> {
    let table = delta_table(blocks.d())?;
    reduced_fidelity_with(&table, blocks)
}

/// [`reduced_fidelity`] against a precomputed table (hot loops).
pub fn reduced_fidelity_with(
    table: &DeltaTable,
    blocks: &ReducedBlocks,
) -> Result<FidelityBreakdown> {
    let d = blocks.d();
    if table.d() != d {
        return Err(Error::SignatureMismatch(
            "Delta table dimension does not match the blocks".into(),
        ));
    }
    let mut f_alpha = 0.0;
    let mut f_beta = 0.0;
    let mut f_gamma = 0.0;
    for l in blocks.classes() {
        let da = table.alpha(l);
        let s = blocks.alpha(l);
        let mut tr = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                tr += C64::new(da[(a, b)], 0.0) * s[(b, a)];
            }
        }
        f_alpha += tr.re;
        f_beta += table.beta(l) * blocks.beta(l);
        f_gamma += table.gamma(l) * blocks.gamma(l);
    }
    let inv_d = 1.0 / d as f64;
    let (a, b, g) = (f_alpha * inv_d, f_beta * inv_d, f_gamma * inv_d);
    Ok(FidelityBreakdown {
        total: a + b + g,
        alpha: a,
        beta: b,
        gamma: g,
    })
}

/// Assemble the full instrument `R_ij = sum_k R'_{ij,k} (X) |k><k|_D` with
/// `R'_{ij,k}` the block embedding of the class of `(i j, k)`.
pub fn assemble_instrument(blocks: &ReducedBlocks) -> Result<GeneralizedInstrument> {
    blocks.validate(1e-9)?;
    let d = blocks.d();
    let proj = IrrepProjectors::build(d)?;
    let mut embedded = BTreeMap::new();
    for l in blocks.classes() {
        let (alpha, beta, gamma) = blocks.r_components(l);
        embedded.insert(
            l,
            proj.embed(&BlockComponents {
                alpha,
                beta: C64::new(beta, 0.0),
                gamma: gamma.map(|g| C64::new(g, 0.0)),
            }),
        );
    }
    let n3 = d * d * d;
    let sig = instrument_signature(d);
    let mut elements = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut mat = DMatrix::<C64>::zeros(n3 * d, n3 * d);
            for k in 0..d {
                let block = &embedded[&class_of(i, j, k, d)?];
                for r in 0..n3 {
                    for c in 0..n3 {
                        let v = block[(r, c)];
                        if v.norm_sqr() > 0.0 {
                            mat[(r * d + k, c * d + k)] = v;
                        }
                    }
                }
            }
            elements.push(Operator::new(sig.clone(), mat)?);
        }
    }
    GeneralizedInstrument::new(d, blocks.task(), elements)
}

/// Inverse of [`assemble_instrument`] on symmetrized instruments: extract
/// `s^nu_l` from class representatives.
pub fn extract_blocks(g: &GeneralizedInstrument) -> Result<ReducedBlocks> {
    let d = g.d();
    let proj = IrrepProjectors::build(d)?;
    let mut blocks = ReducedBlocks::zeros(d, g.task())?;
    for l in OutcomeClass::all(d) {
        let (i, j, k) = l.representative();
        let slab = d_block(g.element(i, j), d, k, k);
        let comps = proj.compress(&slab);
        let factor = l.cardinality(d) as f64 / d as f64;
        blocks.set_alpha(l, comps.alpha * C64::new(factor, 0.0));
        blocks.set_beta(l, comps.beta.re * factor);
        if d > 2 {
            blocks.set_gamma(l, comps.gamma.map(|g| g.re).unwrap_or(0.0) * factor);
        }
    }
    Ok(blocks)
}

/// The `(k, k')` flag block `<k|_D R |k'>_D` of an instrument element held
/// on the canonical (A,B,C,D) signature.
fn d_block(element: &Operator, d: usize, k: usize, kp: usize) -> DMatrix<C64> {
    let n3 = d * d * d;
    let m = element.matrix();
    DMatrix::from_fn(n3, n3, |r, c| m[(r * d + k, c * d + kp)])
}

fn from_d_blocks(d: usize, blocks: &dyn Fn(usize, usize) -> DMatrix<C64>) -> DMatrix<C64> {
    let n3 = d * d * d;
    let mut mat = DMatrix::<C64>::zeros(n3 * d, n3 * d);
    for k in 0..d {
        for kp in 0..d {
            let block = blocks(k, kp);
            for r in 0..n3 {
                for c in 0..n3 {
                    let v = block[(r, c)];
                    if v.norm_sqr() > 0.0 {
                        mat[(r * d + k, c * d + kp)] = v;
                    }
                }
            }
        }
    }
    mat
}

/// The four fidelity-preserving symmetrization maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetrization {
    /// Read the flag wire with the classical readout channel: keep only the
    /// diagonal flag blocks.
    Diagonal,
    /// Exact twirl of every flag block over `U* (X) U* (X) U`.
    Covariant,
    /// Average over simultaneous relabeling of all outcomes.
    Relabel,
    /// Average with the clone-swapped, outcome-swapped instrument.
    Swap,
}

/// Apply one symmetrization map; the output is a valid instrument of the
/// same task with the same figure of merit.
pub fn symmetrize(
    g: &GeneralizedInstrument,
    which: Symmetrization,
) -> Result<GeneralizedInstrument> {
    let d = g.d();
    let sig = instrument_signature(d);
    let elements: Vec<Operator> = match which {
        Symmetrization::Diagonal => g
            .elements()
            .iter()
            .map(|e| {
                let mat = from_d_blocks(d, &|k, kp| {
                    if k == kp {
                        d_block(e, d, k, k)
                    } else {
                        DMatrix::zeros(d * d * d, d * d * d)
                    }
                });
                Operator::new(sig.clone(), mat)
            })
            .collect::<Result<_>>()?,
        Symmetrization::Covariant => {
            let proj = IrrepProjectors::build(d)?;
            g.elements()
                .iter()
                .map(|e| {
                    let mat =
                        from_d_blocks(d, &|k, kp| proj.twirl_matrix(&d_block(e, d, k, kp)));
                    Operator::new(sig.clone(), mat)
                })
                .collect::<Result<_>>()?
        }
        Symmetrization::Relabel => {
            let perms: Vec<Vec<usize>> = (0..d).permutations(d).collect();
            let weight = C64::new(1.0 / perms.len() as f64, 0.0);
            let mut out = vec![DMatrix::<C64>::zeros(d * d * d * d, d * d * d * d); d * d];
            for perm in &perms {
                // permutation matrix on one wire
                let mut t = DMatrix::<C64>::zeros(d, d);
                for (src, &dst) in perm.iter().enumerate() {
                    t[(dst, src)] = C64::new(1.0, 0.0);
                }
                let t4 = t.kronecker(&t).kronecker(&t).kronecker(&t);
                for i in 0..d {
                    for j in 0..d {
                        let relabeled = g.element(perm[i], perm[j]).matrix();
                        out[i * d + j] += t4.adjoint() * relabeled * &t4 * weight;
                    }
                }
            }
            out.into_iter()
                .map(|m| Operator::new(sig.clone(), m))
                .collect::<Result<_>>()?
        }
        Symmetrization::Swap => {
            let (mut swap_ab, _) = sym_asym_projectors(d);
            // recover the plain swap from the symmetric projector: S = 2P+ - I
            swap_ab = swap_ab.scale(2.0) - DMatrix::<C64>::identity(d * d, d * d);
            let swap_full = swap_ab.kronecker(&DMatrix::<C64>::identity(d * d, d * d));
            let mut elements = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    let a = g.element(i, j).matrix();
                    let b = &swap_full * g.element(j, i).matrix() * &swap_full;
                    elements.push(Operator::new(sig.clone(), (a + b).scale(0.5))?);
                }
            }
            elements
        }
    };
    GeneralizedInstrument::new(d, g.task(), elements)
}

/// Structural predicate for each symmetrization.
pub fn satisfies(g: &GeneralizedInstrument, which: Symmetrization, tol: f64) -> Result<bool> {
    let fixed = symmetrize(g, which)?;
    for (a, b) in g.elements().iter().zip(fixed.elements()) {
        if a.distance(b)? > tol * a.frobenius_norm().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::haar_sample;
    use crate::operator::Signature;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn m0(d: usize) -> Matrix2<f64> {
        // Closed form of the nonzero off-diagonal alpha compression, derived
        // directly from <Psi^+-_m | i j k> = (delta_ik delta_mj +-
        // delta_mi delta_jk)/sqrt(2(d +- 1)) at the xy,x representative.
        let df = d as f64;
        let s = (df * df - 1.0).sqrt();
        Matrix2::new(
            0.5 / (df + 1.0),
            0.5 / s,
            0.5 / s,
            0.5 / (df - 1.0),
        )
    }

    #[test]
    fn class_of_matches_patterns() {
        use OutcomeClass::*;
        let d = 3;
        assert_eq!(class_of(0, 0, 0, d).unwrap(), Xxx);
        assert_eq!(class_of(0, 0, 1, d).unwrap(), Xxy);
        assert_eq!(class_of(0, 1, 0, d).unwrap(), Xyx);
        assert_eq!(class_of(0, 1, 1, d).unwrap(), Xyy);
        assert_eq!(class_of(0, 1, 2, d).unwrap(), Xyz);
        assert!(class_of(0, 1, 3, d).is_err());
    }

    #[test]
    fn class_cardinalities_partition_the_cube() {
        for d in 2..=6 {
            let mut counts: BTreeMap<OutcomeClass, usize> = BTreeMap::new();
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        *counts.entry(class_of(i, j, k, d).unwrap()).or_default() += 1;
                    }
                }
            }
            let mut total = 0;
            for l in OutcomeClass::all(d) {
                assert_eq!(counts.get(&l).copied().unwrap_or(0), l.cardinality(d));
                total += l.cardinality(d);
            }
            assert_eq!(total, d * d * d);
            if d == 3 {
                assert_eq!(OutcomeClass::Xyz.cardinality(3), 6);
            }
        }
    }

    #[test]
    fn multiplicity_vectors_are_orthonormal() {
        for d in 2..=4 {
            let proj = IrrepProjectors::build(d).unwrap();
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
                    assert!((gram - expect).norm() < 1e-12, "a={a} b={b} d={d}");
                }
            }
        }
    }

    #[test]
    fn projector_completeness_and_traces() {
        for d in 2..=5 {
            let proj = IrrepProjectors::build(d).unwrap();
            let n = d * d * d;
            let mut sum = proj.alpha_embedding(0, 0) + proj.alpha_embedding(1, 1);
            sum += proj.p_beta();
            if let Some(pg) = proj.p_gamma() {
                sum += pg;
            }
            assert!((sum - DMatrix::<C64>::identity(n, n)).norm() < 1e-11, "d={d}");
            assert!((proj.p_beta().trace().re - proj.d_beta() as f64).abs() < 1e-9);
            if d == 3 {
                assert!((proj.p_beta().trace().re - 15.0).abs() < 1e-10);
            }
            if let Some(pg) = proj.p_gamma() {
                assert!((pg.trace().re - proj.d_gamma() as f64).abs() < 1e-9);
            }
            assert_eq!(proj.d_plus(), d * (d + 1) / 2);
            assert_eq!(proj.d_minus(), d * (d - 1) / 2);
        }
    }

    #[test]
    fn gamma_sector_absent_at_d2() {
        let proj = IrrepProjectors::build(2).unwrap();
        assert!(proj.p_gamma().is_none());
        assert_eq!(proj.d_gamma(), 0);
        // the would-be projector is identically zero
        let (_, p_asym) = sym_asym_projectors(2);
        let idc = DMatrix::<C64>::identity(2, 2);
        let residual = p_asym.kronecker(&idc)
            - proj.multiplicity_vectors(false) * proj.multiplicity_vectors(false).adjoint();
        assert!(residual.norm() < 1e-12);
    }

    #[test]
    fn projectors_commute_with_the_representation() {
        let mut rng = stream_rng(311, 0);
        for d in 2..=4 {
            let proj = IrrepProjectors::build(d).unwrap();
            for _ in 0..5 {
                let g = proj.group_element(&haar_sample(d, &mut rng));
                for p in [
                    proj.alpha_embedding(0, 0),
                    proj.alpha_embedding(1, 1),
                    proj.p_beta().clone(),
                ] {
                    assert!((&p * &g - &g * &p).norm() < 1e-9, "d={d}");
                }
                if let Some(pg) = proj.p_gamma() {
                    assert!((pg * &g - &g * pg).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn delta_table_matches_derived_closed_forms() {
        use OutcomeClass::*;
        for d in 2..=5 {
            let table = delta_table(d).unwrap();
            let df = d as f64;
            // alpha sector
            let dxxx = table.alpha(Xxx);
            assert!((dxxx[(0, 0)] - 2.0 / (df + 1.0)).abs() < 1e-12);
            assert!(dxxx[(0, 1)].abs() + dxxx[(1, 0)].abs() + dxxx[(1, 1)].abs() < 1e-12);
            let m = m0(d);
            assert!((table.alpha(Xyx) - m).norm() < 1e-12, "d={d}");
            let mut flipped = m;
            flipped[(0, 1)] = -flipped[(0, 1)];
            flipped[(1, 0)] = -flipped[(1, 0)];
            assert!((table.alpha(Xyy) - flipped).norm() < 1e-12);
            assert!(table.alpha(Xxy).norm() < 1e-12);
            // beta sector
            assert!((table.beta(Xxx) - (df - 1.0) / (df + 1.0)).abs() < 1e-12);
            assert!((table.beta(Xxy) - 1.0).abs() < 1e-12);
            assert!((table.beta(Xyx) - df / (2.0 * (df + 1.0))).abs() < 1e-12);
            assert!((table.beta(Xyy) - df / (2.0 * (df + 1.0))).abs() < 1e-12);
            if d > 2 {
                assert!((table.alpha(Xyz)).norm() < 1e-12);
                assert!((table.beta(Xyz) - 0.5).abs() < 1e-12);
                // gamma sector
                assert!(table.gamma(Xxx).abs() < 1e-12);
                assert!(table.gamma(Xxy).abs() < 1e-12);
                let g_mixed = (df - 2.0) / (2.0 * (df - 1.0));
                assert!((table.gamma(Xyx) - g_mixed).abs() < 1e-12);
                assert!((table.gamma(Xyy) - g_mixed).abs() < 1e-12);
                assert!((table.gamma(Xyz) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_is_representative_independent() {
        // relabeling guarantees any triple in the class gives the same
        // compression; spot-check alternates at d = 4
        let d = 4;
        let proj = IrrepProjectors::build(d).unwrap();
        let table = delta_table(d).unwrap();
        let alternates = [
            (OutcomeClass::Xyx, (2usize, 3usize, 2usize)),
            (OutcomeClass::Xxy, (3, 3, 1)),
            (OutcomeClass::Xyy, (1, 0, 0)),
            (OutcomeClass::Xyz, (3, 1, 2)),
        ];
        for (l, (i, j, k)) in alternates {
            let mut ket = DVector::<C64>::zeros(d * d * d);
            ket[(i * d + j) * d + k] = C64::new(1.0, 0.0);
            let xp = proj.multiplicity_vectors(true).adjoint() * &ket;
            let xm = proj.multiplicity_vectors(false).adjoint() * &ket;
            let comps = [&xp, &xm];
            for a in 0..2 {
                for b in 0..2 {
                    let val: C64 = comps[a]
                        .iter()
                        .zip(comps[b].iter())
                        .map(|(x, y)| x * y.conj())
                        .sum();
                    assert!(
                        (val.re - table.alpha(l)[(a, b)]).abs() < 1e-12,
                        "{l:?} ({i},{j},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn twirl_is_idempotent_and_fixes_identity() {
        let d = 3;
        let sig = Signature::new(&[("A", d), ("B", d), ("C", d)]).unwrap();
        let idd = Operator::identity(sig.clone());
        assert!(twirl(&idd).unwrap().approx_eq(&idd, 1e-10).unwrap());
        let mut rng = stream_rng(331, 0);
        let g = DMatrix::from_fn(27, 27, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let x = Operator::new(sig, &g * g.adjoint()).unwrap();
        let t1 = twirl(&x).unwrap();
        let t2 = twirl(&t1).unwrap();
        assert!(t1.approx_eq(&t2, 1e-10).unwrap());
        // the twirl commutes with the representation
        let proj = IrrepProjectors::build(d).unwrap();
        let mut rng2 = stream_rng(337, 0);
        let gm = proj.group_element(&haar_sample(d, &mut rng2));
        let tm = t1.matrix();
        assert!((tm * &gm - gm * tm).norm() < 1e-9);
    }

    #[test]
    fn twirl_matches_monte_carlo_average() {
        let d = 2;
        let sig = Signature::new(&[("A", d), ("B", d), ("C", d)]).unwrap();
        let mut rng = stream_rng(347, 0);
        let g = DMatrix::from_fn(8, 8, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let x = Operator::new(sig, &g * g.adjoint()).unwrap();
        let exact = twirl(&x).unwrap();
        let proj = IrrepProjectors::build(d).unwrap();
        let n = 10_000;
        let mut mean = DMatrix::<C64>::zeros(8, 8);
        for s in 0..n {
            let mut srng = stream_rng(349, s as u64);
            let gm = proj.group_element(&haar_sample(d, &mut srng));
            mean += &gm * x.matrix() * gm.adjoint();
        }
        mean /= C64::new(n as f64, 0.0);
        let tol = 5.0 * x.matrix().norm() / (n as f64).sqrt();
        assert!((mean - exact.matrix()).norm() < tol);
    }

    #[test]
    fn assemble_extract_round_trip() {
        let mut rng = stream_rng(353, 0);
        for d in [2usize, 3] {
            let blocks = random_feasible_like(d, &mut rng);
            let g = assemble_instrument(&blocks).unwrap();
            let back = extract_blocks(&g).unwrap();
            for l in blocks.classes() {
                assert!((blocks.alpha(l) - back.alpha(l)).norm() < 1e-10, "d={d} {l:?}");
                assert!((blocks.beta(l) - back.beta(l)).abs() < 1e-10);
                assert!((blocks.gamma(l) - back.gamma(l)).abs() < 1e-10);
            }
        }
    }

    /// Random PSD blocks (no normalization): enough for round-trip and
    /// symmetrization-structure tests.
    pub(crate) fn random_feasible_like(
        d: usize,
        rng: &mut impl Rng,
    ) -> ReducedBlocks {
        let mut blocks = ReducedBlocks::zeros(d, ReplicationTask::Cloning).unwrap();
        for l in OutcomeClass::all(d) {
            let v = nalgebra::Vector2::new(
                C64::new(rng.random::<f64>(), 0.0),
                C64::new(rng.random::<f64>() - 0.3, 0.0),
            );
            let w = nalgebra::Vector2::new(
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
            );
            blocks.set_alpha(l, v * v.adjoint() + w * w.adjoint() * C64::new(0.3, 0.0));
            blocks.set_beta(l, rng.random::<f64>());
            if d > 2 {
                blocks.set_gamma(l, rng.random::<f64>());
            }
        }
        blocks
    }

    #[test]
    fn zero_blocks_give_zero_fidelity() {
        let blocks = ReducedBlocks::zeros(3, ReplicationTask::Cloning).unwrap();
        let f = reduced_fidelity(&blocks).unwrap();
        assert_eq!(f.total, 0.0);
    }

    #[test]
    fn zero_blocks_assemble_to_zero_elements_and_fail_normalization() {
        let blocks = ReducedBlocks::zeros(2, ReplicationTask::Cloning).unwrap();
        let g = assemble_instrument(&blocks).unwrap();
        assert!(g.elements().iter().all(|e| e.frobenius_norm() == 0.0));
        let entries = crate::comb::check_instrument(&g, 1e-9);
        assert!(entries
            .iter()
            .any(|e| e.status == crate::report::Status::Fail));
    }

    #[test]
    fn optimal_learning_total_is_identity_with_maximally_mixed_probe() {
        let d = 3;
        let blocks = crate::optimize::optimal_learning_blocks(d).unwrap().blocks;
        let g = assemble_instrument(&blocks).unwrap();
        let total = g.total();
        let expect = Operator::identity(instrument_signature(d)).scale_re(1.0 / d as f64);
        assert!(total.distance(&expect).unwrap() < 1e-10);
    }

    #[test]
    fn assembled_instruments_are_diagonal_covariant_relabel_and_swap_fixed_points() {
        // blocks obeying the swap constraint assemble to instruments fixed
        // by all four maps
        let d = 3;
        let mut rng = stream_rng(359, 0);
        let mut blocks = random_feasible_like(d, &mut rng);
        // impose the swap pairing: s_xyy = sigma_z s_xyx sigma_z, symmetric
        // diagonal classes
        let sz = |m: Matrix2<C64>| {
            let mut out = m;
            out[(0, 1)] = -out[(0, 1)];
            out[(1, 0)] = -out[(1, 0)];
            out
        };
        let xyx = blocks.alpha(OutcomeClass::Xyx);
        blocks.set_alpha(OutcomeClass::Xyy, sz(xyx));
        let bxyx = blocks.beta(OutcomeClass::Xyx);
        blocks.set_beta(OutcomeClass::Xyy, bxyx);
        let gxyx = blocks.gamma(OutcomeClass::Xyx);
        blocks.set_gamma(OutcomeClass::Xyy, gxyx);
        for l in [OutcomeClass::Xxx, OutcomeClass::Xxy, OutcomeClass::Xyz] {
            let m = blocks.alpha(l);
            blocks.set_alpha(l, (m + sz(m)).scale(0.5.into()));
        }
        let g = assemble_instrument(&blocks).unwrap();
        for which in [
            Symmetrization::Diagonal,
            Symmetrization::Covariant,
            Symmetrization::Relabel,
            Symmetrization::Swap,
        ] {
            assert!(satisfies(&g, which, 1e-9).unwrap(), "{which:?}");
        }
    }
}
