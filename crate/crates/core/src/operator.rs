//! Labeled multi-subsystem operator algebra.
//!
//! An [`Operator`] is a dense complex square matrix together with a
//! [`Signature`]: an ordered list of labeled subsystems whose dimensions
//! multiply to the matrix side length.  The basis is the lexicographic
//! product of each subsystem's computational basis in signature order, with
//! the first subsystem most significant.  All transpositions and complex
//! conjugations are taken in this fixed basis.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default tolerance for hermiticity checks, relative to the entry scale.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Default tolerance for positive semidefiniteness checks.
pub const PSD_TOL: f64 = 1e-10;

/// A single labeled tensor factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsystem {
    label: String,
    dim: usize,
}

impl Subsystem {
    pub fn new(label: impl Into<String>, dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidDimension { got: dim, min: 1 });
        }
        Ok(Self {
            label: label.into(),
            dim,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Ordered list of subsystems with unique labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    subs: Vec<Subsystem>,
}

impl Signature {
    pub fn new(parts: &[(&str, usize)]) -> Result<Self> {
        let subs = parts
            .iter()
            .map(|(l, d)| Subsystem::new(*l, *d))
            .collect::<Result<Vec<_>>>()?;
        Self::from_subsystems(subs)
    }

    pub fn from_subsystems(subs: Vec<Subsystem>) -> Result<Self> {
        for (n, s) in subs.iter().enumerate() {
            if subs[..n].iter().any(|t| t.label == s.label) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        Ok(Self { subs })
    }

    /// Signature with no subsystems; carries 1x1 operators (scalars).
    pub fn empty() -> Self {
        Self { subs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subs
    }

    pub fn total_dim(&self) -> usize {
        self.subs.iter().map(|s| s.dim).product()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subs.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subs.iter().map(|s| s.dim).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.subs.iter().position(|s| s.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.position(label).map(|p| self.subs[p].dim)
    }

    /// Concatenation; fails on duplicate labels.
    pub fn concat(&self, other: &Signature) -> Result<Signature> {
        let mut subs = self.subs.clone();
        subs.extend(other.subs.iter().cloned());
        Signature::from_subsystems(subs)
    }

    /// Signature with the given labels removed (order preserved).
    pub fn without(&self, labels: &[&str]) -> Signature {
        Signature {
            subs: self
                .subs
                .iter()
                .filter(|s| !labels.contains(&s.label.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Signature restricted to the given labels, in this signature's order.
    pub fn restricted_to(&self, labels: &[&str]) -> Signature {
        Signature {
            subs: self
                .subs
                .iter()
                .filter(|s| labels.contains(&s.label.as_str()))
                .cloned()
                .collect(),
        }
    }

    fn check_known(&self, labels: &[&str]) -> Result<()> {
        for l in labels {
            if !self.contains(l) {
                return Err(Error::UnknownLabel((*l).to_string()));
            }
        }
        Ok(())
    }

    /// Row-major strides of the product basis (first subsystem most
    /// significant).
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.subs.len()];
        for n in (0..self.subs.len().saturating_sub(1)).rev() {
            strides[n] = strides[n + 1] * self.subs[n + 1].dim;
        }
        strides
    }
}

/// Decode/encode flat basis indices to per-subsystem digits.
struct IndexCodec {
    dims: Vec<usize>,
    strides: Vec<usize>,
}

impl IndexCodec {
    fn new(sig: &Signature) -> Self {
        Self {
            dims: sig.dims(),
            strides: sig.strides(),
        }
    }

    fn decode(&self, mut flat: usize, out: &mut [usize]) {
        for n in 0..self.dims.len() {
            out[n] = flat / self.strides[n];
            flat %= self.strides[n];
        }
    }

    fn encode(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.strides)
            .map(|(d, s)| d * s)
            .sum()
    }
}

/// Dense complex operator on a labeled product space.
#[derive(Clone, Debug)]
pub struct Operator {
    sig: Signature,
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn new(sig: Signature, mat: DMatrix<C64>) -> Result<Self> {
        let n = sig.total_dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but signature has total dimension {}",
                mat.nrows(),
                mat.ncols(),
                n
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("matrix has non-finite entries".into()));
        }
        Ok(Self { sig, mat })
    }

    pub fn zeros(sig: Signature) -> Self {
        let n = sig.total_dim();
        Self {
            sig,
            mat: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(sig: Signature) -> Self {
        let n = sig.total_dim();
        Self {
            sig,
            mat: DMatrix::identity(n, n),
        }
    }

    /// 1x1 operator on the empty signature.
    pub fn scalar(value: C64) -> Self {
        Self {
            sig: Signature::empty(),
            mat: DMatrix::from_element(1, 1, value),
        }
    }

    /// `|i><i|` on a single subsystem.
    pub fn basis_projector(label: &str, dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::OutcomeOutOfRange { index: i, dim });
        }
        let sig = Signature::new(&[(label, dim)])?;
        let mut mat = DMatrix::zeros(dim, dim);
        mat[(i, i)] = C64::new(1.0, 0.0);
        Ok(Self { sig, mat })
    }

    /// Rank-one operator `|v><v|`.
    pub fn from_ket(sig: Signature, v: &DVector<C64>) -> Result<Self> {
        if v.len() != sig.total_dim() {
            return Err(Error::Shape(format!(
                "ket length {} does not match signature dimension {}",
                v.len(),
                sig.total_dim()
            )));
        }
        let mat = v * v.adjoint();
        Ok(Self { sig, mat })
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Operator {
        Operator {
            sig: self.sig.clone(),
            mat: &self.mat * c,
        }
    }

    pub fn scale_re(&self, c: f64) -> Operator {
        self.scale(C64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            sig: self.sig.clone(),
            mat: self.mat.adjoint(),
        }
    }

    /// Full transpose in the computational product basis.
    pub fn transpose(&self) -> Operator {
        Operator {
            sig: self.sig.clone(),
            mat: self.mat.transpose(),
        }
    }

    pub fn conjugate(&self) -> Operator {
        Operator {
            sig: self.sig.clone(),
            mat: self.mat.map(|z| z.conj()),
        }
    }

    /// `<v|A|v>` for a ket on the full space.
    pub fn sandwich(&self, v: &DVector<C64>) -> C64 {
        (v.adjoint() * &self.mat * v)[(0, 0)]
    }

    /// Kronecker product; signatures are concatenated and must have disjoint
    /// labels.
    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        let sig = self.sig.concat(&other.sig)?;
        let mat = self.mat.kronecker(&other.mat);
        Ok(Operator { sig, mat })
    }

    /// Trace out the designated subsystems; tracing every label yields a 1x1
    /// operator holding the full trace.
    pub fn partial_trace(&self, labels: &[&str]) -> Result<Operator> {
        self.sig.check_known(labels)?;
        let codec = IndexCodec::new(&self.sig);
        let n = self.sig.len();
        let traced: Vec<usize> = (0..n)
            .filter(|p| labels.contains(&self.sig.subs[*p].label.as_str()))
            .collect();
        let kept: Vec<usize> = (0..n).filter(|p| !traced.contains(p)).collect();
        let out_sig = self.sig.without(labels);
        let out_codec = IndexCodec::new(&out_sig);
        let d_out = out_sig.total_dim();
        let d_tr: usize = traced.iter().map(|&p| self.sig.subs[p].dim).product();

        let mut out = DMatrix::<C64>::zeros(d_out, d_out);
        let mut row = vec![0usize; n];
        let mut col = vec![0usize; n];
        let mut row_kept = vec![0usize; kept.len()];
        let mut col_kept = vec![0usize; kept.len()];
        let mut tr_digits = vec![0usize; traced.len()];
        let tr_codec = IndexCodec::new(&self.sig.restricted_to(
            &traced
                .iter()
                .map(|&p| self.sig.subs[p].label.as_str())
                .collect::<Vec<_>>(),
        ));

        for r_out in 0..d_out {
            out_codec.decode(r_out, &mut row_kept);
            for c_out in 0..d_out {
                out_codec.decode(c_out, &mut col_kept);
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..d_tr {
                    tr_codec.decode(t, &mut tr_digits);
                    for (n_k, &p) in kept.iter().enumerate() {
                        row[p] = row_kept[n_k];
                        col[p] = col_kept[n_k];
                    }
                    for (n_t, &p) in traced.iter().enumerate() {
                        row[p] = tr_digits[n_t];
                        col[p] = tr_digits[n_t];
                    }
                    acc += self.mat[(codec.encode(&row), codec.encode(&col))];
                }
                out[(r_out, c_out)] = acc;
            }
        }
        Operator::new(out_sig, out)
    }

    /// Transpose on the designated subsystems only.  Applying twice restores
    /// the operator.
    pub fn partial_transpose(&self, labels: &[&str]) -> Result<Operator> {
        self.sig.check_known(labels)?;
        let codec = IndexCodec::new(&self.sig);
        let n = self.sig.len();
        let flip: Vec<usize> = (0..n)
            .filter(|p| labels.contains(&self.sig.subs[*p].label.as_str()))
            .collect();
        let d = self.dim();
        let mut out = DMatrix::<C64>::zeros(d, d);
        let mut row = vec![0usize; n];
        let mut col = vec![0usize; n];
        for r in 0..d {
            codec.decode(r, &mut row);
            for c in 0..d {
                codec.decode(c, &mut col);
                let mut nr = row.clone();
                let mut nc = col.clone();
                for &p in &flip {
                    nr[p] = col[p];
                    nc[p] = row[p];
                }
                out[(codec.encode(&nr), codec.encode(&nc))] = self.mat[(r, c)];
            }
        }
        Operator::new(self.sig.clone(), out)
    }

    /// Re-index so the subsystems appear in the given order.  The operator is
    /// unchanged as an abstract tensor; permuting back restores the matrix
    /// exactly (pure re-indexing, no arithmetic).
    pub fn permute_systems(&self, order: &[&str]) -> Result<Operator> {
        if order.len() != self.sig.len() {
            return Err(Error::NotAPermutation);
        }
        let mut pos = Vec::with_capacity(order.len());
        for l in order {
            match self.sig.position(l) {
                Some(p) if !pos.contains(&p) => pos.push(p),
                _ => return Err(Error::NotAPermutation),
            }
        }
        if pos.iter().enumerate().all(|(n, &p)| n == p) {
            return Ok(self.clone());
        }
        let new_sig = Signature {
            subs: pos.iter().map(|&p| self.sig.subs[p].clone()).collect(),
        };
        let old_codec = IndexCodec::new(&self.sig);
        let new_codec = IndexCodec::new(&new_sig);
        let n = self.sig.len();
        let d = self.dim();
        let mut out = DMatrix::<C64>::zeros(d, d);
        let mut row = vec![0usize; n];
        let mut col = vec![0usize; n];
        let mut nrow = vec![0usize; n];
        let mut ncol = vec![0usize; n];
        for r in 0..d {
            old_codec.decode(r, &mut row);
            for c in 0..d {
                old_codec.decode(c, &mut col);
                for (n_new, &p) in pos.iter().enumerate() {
                    nrow[n_new] = row[p];
                    ncol[n_new] = col[p];
                }
                out[(new_codec.encode(&nrow), new_codec.encode(&ncol))] = self.mat[(r, c)];
            }
        }
        Operator::new(new_sig, out)
    }

    /// Permute to match the label order of `other`.  The label sets must be
    /// equal.
    pub fn aligned_to(&self, other: &Signature) -> Result<Operator> {
        self.permute_systems(&other.labels())
    }

    /// Frobenius distance after aligning `other` to this signature order.
    pub fn distance(&self, other: &Operator) -> Result<f64> {
        let aligned = other.aligned_to(&self.sig)?;
        if aligned.sig.dims() != self.sig.dims() {
            return Err(Error::SignatureMismatch(
                "aligned signatures disagree on dimensions".into(),
            ));
        }
        Ok((&self.mat - &aligned.mat)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn approx_eq(&self, other: &Operator, tol: f64) -> Result<bool> {
        Ok(self.distance(other)? <= tol)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.mat - self.mat.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        self.hermitian_deviation() <= tol * scale
    }

    /// Eigenvalues of the hermitian part `(A + A^dag)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        crate::linalg::hermitian_eigenvalues(&self.mat)
    }

    /// PSD test: hermitian within `tol`, then positivity down to
    /// `-tol * max(1, Frobenius scale)`, decided by a shifted Cholesky
    /// factorization (the Frobenius norm lower-bounds the trace norm, so the
    /// slack is never looser than a trace-norm scale).  Signals an error on
    /// operators that are not hermitian to begin with.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        let scale = self.max_abs().max(1.0);
        let dev = self.hermitian_deviation();
        if dev > tol * scale {
            return Err(Error::NotHermitian {
                deviation: dev,
                tol: tol * scale,
            });
        }
        if self.dim() == 0 {
            return Ok(true);
        }
        let shift = tol * self.frobenius_norm().max(1.0);
        let mut h = (&self.mat + self.mat.adjoint()).scale(0.5);
        for n in 0..self.dim() {
            h[(n, n)] += C64::new(shift, 0.0);
        }
        Ok(crate::linalg::cholesky_psd_check(&mut h))
    }
}

impl std::ops::Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(
            self.sig, rhs.sig,
            "operator addition requires identical signatures"
        );
        Operator {
            sig: self.sig.clone(),
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(
            self.sig, rhs.sig,
            "operator subtraction requires identical signatures"
        );
        Operator {
            sig: self.sig.clone(),
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl std::ops::Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(
            self.sig, rhs.sig,
            "operator product requires identical signatures"
        );
        Operator {
            sig: self.sig.clone(),
            mat: &self.mat * &rhs.mat,
        }
    }
}

/// Unnormalized maximally entangled vector `|omega> = sum_n |n>|n>`, as a
/// length-`d^2` vector with squared norm `d`.
pub fn max_entangled_vector(d: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d * d);
    for n in 0..d {
        v[n * d + n] = C64::new(1.0, 0.0);
    }
    v
}

/// `|omega><omega|` on two labeled subsystems of equal dimension.
pub fn omega_projector(label_a: &str, label_b: &str, d: usize) -> Result<Operator> {
    let sig = Signature::new(&[(label_a, d), (label_b, d)])?;
    Operator::from_ket(sig, &max_entangled_vector(d))
}
