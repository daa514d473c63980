//! Von Neumann POVMs, the fidelity criterion, measure-and-prepare channels,
//! Haar sampling and Monte-Carlo figure-of-merit estimation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::comb::{link_ops, ChoiOperator, GeneralizedInstrument, WIRE_C, WIRE_D};
use crate::error::{Error, Result};
use crate::operator::{Operator, Signature, PSD_TOL};
use crate::rng::stream_rng;

/// Finite collection of PSD operators on a common signature summing to the
/// identity.
#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<Operator>,
}

impl Povm {
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let sig = first.signature().clone();
        let elements = elements
            .into_iter()
            .map(|e| e.aligned_to(&sig))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn signature(&self) -> &Signature {
        self.elements[0].signature()
    }

    /// PSD elements and completeness within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (n, e) in self.elements.iter().enumerate() {
            if !e.is_psd(tol.max(PSD_TOL))? {
                return Err(Error::InvalidPovm(format!("element {n} is not PSD")));
            }
        }
        let mut sum = Operator::zeros(self.signature().clone());
        for e in &self.elements {
            sum = &sum + e;
        }
        let idd = Operator::identity(self.signature().clone());
        if sum.distance(&idd)? > tol * (sum.dim() as f64).sqrt().max(1.0) {
            return Err(Error::InvalidPovm(format!(
                "completeness defect {:.3e}",
                sum.distance(&idd)?
            )));
        }
        Ok(())
    }

    /// True if every element is a rank-one orthogonal projector and the
    /// outcome count equals the space dimension.
    pub fn is_von_neumann(&self, tol: f64) -> bool {
        if self.len() != self.elements[0].dim() {
            return false;
        }
        self.elements.iter().all(|e| {
            e.is_hermitian(tol)
                && (e.trace().re - 1.0).abs() < tol * 10.0
                && (&(e * e) - e).frobenius_norm() < tol * 100.0
        })
    }
}

/// Rank-one projective measurement `E_i = U|i><i|U^dag`.
#[derive(Clone, Debug)]
pub struct VonNeumannPovm {
    unitary: DMatrix<C64>,
    povm: Povm,
}

impl VonNeumannPovm {
    pub fn from_unitary(u: &DMatrix<C64>, label: &str) -> Result<Self> {
        let d = u.nrows();
        let dev = (u.adjoint() * u - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::NotUnitary {
                deviation: dev,
                tol: 1e-10,
            });
        }
        let sig = Signature::new(&[(label, d)])?;
        let elements = (0..d)
            .map(|i| {
                let col = u.column(i);
                let mat = col * col.adjoint();
                Operator::new(sig.clone(), mat)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            unitary: u.clone(),
            povm: Povm::new(elements)?,
        })
    }

    pub fn unitary(&self) -> &DMatrix<C64> {
        &self.unitary
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn element(&self, i: usize) -> &Operator {
        &self.povm.elements()[i]
    }

    /// The product measurement `E_i (X) E_j` on two labeled copies.
    pub fn product_pair(&self, label_a: &str, label_b: &str) -> Result<Povm> {
        let d = self.unitary.nrows();
        let sig_a = Signature::new(&[(label_a, d)])?;
        let sig_b = Signature::new(&[(label_b, d)])?;
        let mut elements = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let ea = Operator::new(sig_a.clone(), self.element(i).matrix().clone())?;
                let eb = Operator::new(sig_b.clone(), self.element(j).matrix().clone())?;
                elements.push(ea.tensor(&eb)?);
            }
        }
        Povm::new(elements)
    }
}

/// Fidelity `F(P,Q) = (1/n) sum_i Tr[P_i Q_i]` between two POVMs with equal
/// outcome counts.  Equals one iff the POVMs coincide elementwise, provided
/// one of them is a von Neumann measurement; the value is computed for any
/// pair regardless.
pub fn povm_fidelity(p: &Povm, q: &Povm) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidPovm(format!(
            "outcome count mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in p.elements().iter().zip(q.elements()) {
        let b_al = b.aligned_to(a.signature())?;
        acc += (a.matrix() * b_al.matrix()).trace().re;
    }
    Ok(acc / p.len() as f64)
}

/// Choi operator of the measure-and-prepare channel of `E^(U)`:
/// `sum_i |i><i|_out (X) U* |i><i| U^T_in`.
pub fn mp_channel_choi(u: &DMatrix<C64>, out_label: &str, in_label: &str) -> Result<ChoiOperator> {
    let d = u.nrows();
    let dev = (u.adjoint() * u - DMatrix::<C64>::identity(d, d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > 1e-10 {
        return Err(Error::NotUnitary {
            deviation: dev,
            tol: 1e-10,
        });
    }
    let sig = Signature::new(&[(out_label, d), (in_label, d)])?;
    let mut mat = DMatrix::<C64>::zeros(d * d, d * d);
    let uc = u.map(|z| z.conj());
    for i in 0..d {
        let col = uc.column(i);
        let e_t = col * col.adjoint(); // U* |i><i| U^T
        for r in 0..d {
            for c in 0..d {
                mat[(i * d + r, i * d + c)] += e_t[(r, c)];
            }
        }
    }
    let op = Operator::new(sig, mat)?;
    ChoiOperator::new(op, &[in_label], &[out_label])
}

/// Haar-random unitary: QR of a complex Gaussian matrix with the diagonal
/// phase correction that makes the distribution exactly invariant.
pub fn haar_sample(d: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::<C64>::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for n in 0..d {
        let rnn = r[(n, n)];
        let phase = if rnn.norm() > 0.0 {
            rnn / rnn.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for m in 0..d {
            q[(m, n)] *= phase;
        }
    }
    q
}

/// Replicated POVM of an instrument under the device `E^(U)`:
/// `G_ij = (R_ij * E^(U)_CD)^T` on the clones A,B.
pub fn replicated_povm(g: &GeneralizedInstrument, u: &DMatrix<C64>) -> Result<Povm> {
    if u.nrows() != g.d() {
        return Err(Error::InvalidDimension {
            got: u.nrows(),
            min: g.d(),
        });
    }
    let device = mp_channel_choi(u, WIRE_D, WIRE_C)?;
    let mut elements = Vec::with_capacity(g.d() * g.d());
    for (i, j) in g.outcome_pairs() {
        let linked = link_ops(g.element(i, j), device.op())?;
        elements.push(linked.transpose());
    }
    Povm::new(elements)
}

/// Fidelity of the replicated POVM against `E^(U) (X) E^(U)` for one `U`,
/// evaluated by direct sandwiching:
/// `F(U) = (1/d^2) sum_ijk <w_ijk| R_ij |w_ijk>` with
/// `w_ijk = conj(u_i) (X) conj(u_j) (X) u_k (X) e_k`.  The flag factor `e_k`
/// selects one diagonal flag block, so only `d^3`-sized sandwiches are
/// computed.
pub fn replication_fidelity(g: &GeneralizedInstrument, u: &DMatrix<C64>) -> f64 {
    let d = g.d();
    let n3 = d * d * d;
    let cols: Vec<DVector<C64>> = (0..d).map(|n| u.column(n).into_owned()).collect();
    let conj_cols: Vec<DVector<C64>> = cols.iter().map(|v| v.map(|z| z.conj())).collect();
    let mut acc = 0.0;
    let mut w = vec![C64::new(0.0, 0.0); n3];
    for i in 0..d {
        for j in 0..d {
            let element = g.element(i, j).matrix();
            for k in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        let ab = conj_cols[i][a] * conj_cols[j][b];
                        for c in 0..d {
                            w[(a * d + b) * d + c] = ab * cols[k][c];
                        }
                    }
                }
                // <w| R^{(k,k)} |w> on the k-th diagonal flag block
                let mut sandwich = C64::new(0.0, 0.0);
                for r in 0..n3 {
                    let mut row_acc = C64::new(0.0, 0.0);
                    for c in 0..n3 {
                        row_acc += element[(r * d + k, c * d + k)] * w[c];
                    }
                    sandwich += w[r].conj() * row_acc;
                }
                acc += sandwich.re;
            }
        }
    }
    acc / (d * d) as f64
}

/// Monte-Carlo Haar average of the replication fidelity, with standard
/// error.  Sample `n` uses stream `n` of the master seed, so the result is
/// independent of the parallel schedule.
pub fn haar_average_fidelity(
    g: &GeneralizedInstrument,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(samples >= 1, "need at least one sample");
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|n| {
            let mut rng = stream_rng(seed, n as u64);
            let u = haar_sample(g.d(), &mut rng);
            replication_fidelity(g, &u)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let stderr = if samples > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (samples - 1) as f64;
        (var / samples as f64).sqrt()
    } else {
        0.0
    };
    (mean, stderr)
}
