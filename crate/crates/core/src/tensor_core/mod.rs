//! Labeled multilinear algebra on finite-dimensional complex spaces.
//!
//! A [`LabeledOperator`] is a dense matrix together with an ordered list of
//! named subsystems. Row-major multi-indices are used throughout: the first
//! system is the most significant digit.
//!
//! Binary operations return their result in a fixed order: the remaining
//! systems of the left operand followed by the remaining systems of the
//! right operand.

mod measurement;
pub mod text;

pub use measurement::{pauli_tomographic_set, MeasurementFamily};

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Minimum eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Tolerance for exact identities.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLabel {
    pub name: String,
    pub dim: usize,
}

impl SystemLabel {
    /// Panics if `dim` is zero.
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        assert!(dim >= 1, "system dimension must be positive");
        Self {
            name: name.into(),
            dim,
        }
    }
}

impl fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    systems: Vec<SystemLabel>,
    matrix: CMat,
}

fn total_dim(systems: &[SystemLabel]) -> usize {
    systems.iter().map(|s| s.dim).product()
}

fn strides(systems: &[SystemLabel]) -> Vec<usize> {
    let mut out = vec![1; systems.len()];
    for k in (0..systems.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * systems[k + 1].dim;
    }
    out
}

/// Linear offsets of every multi-index over the positions `subset`, enumerated
/// row-major in the order given.
fn offsets(systems: &[SystemLabel], subset: &[usize]) -> Vec<usize> {
    let st = strides(systems);
    let mut out = vec![0usize];
    for &p in subset {
        let d = systems[p].dim;
        let mut next = Vec::with_capacity(out.len() * d);
        for &o in &out {
            for i in 0..d {
                next.push(o + i * st[p]);
            }
        }
        out = next;
    }
    out
}

fn check_unique(systems: &[SystemLabel]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in systems {
        if s.dim == 0 {
            return Err(Error::InvalidArgument(format!("system `{}` has dimension 0", s.name)));
        }
        if !seen.insert(s.name.as_str()) {
            return Err(Error::LabelCollision(s.name.clone()));
        }
    }
    Ok(())
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], m.clone());
    }
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].re;
    }
    if m.nrows() == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        return mid - rad;
    }
    eigh(m).0.first().copied().unwrap_or(0.0)
}

fn hermitian_deviation(m: &CMat) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

impl LabeledOperator {
    pub fn new(systems: Vec<SystemLabel>, matrix: CMat) -> Result<Self> {
        check_unique(&systems)?;
        let d = total_dim(&systems);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but systems {} need {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                fmt_systems(&systems),
                d,
                d
            )));
        }
        Ok(Self { systems, matrix })
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            systems: vec![],
            matrix: CMat::from_element(1, 1, value),
        }
    }

    pub fn identity(systems: Vec<SystemLabel>) -> Result<Self> {
        let d = total_dim(&systems);
        Self::new(systems, CMat::identity(d, d))
    }

    pub fn zeros(systems: Vec<SystemLabel>) -> Result<Self> {
        let d = total_dim(&systems);
        Self::new(systems, CMat::zeros(d, d))
    }

    /// Rank-one operator |v><v|.
    pub fn from_ket(systems: Vec<SystemLabel>, ket: &[C64]) -> Result<Self> {
        let d = total_dim(&systems);
        if ket.len() != d {
            return Err(Error::Shape(format!("ket has length {} but dimension is {}", ket.len(), d)));
        }
        let m = CMat::from_fn(d, d, |i, j| ket[i] * ket[j].conj());
        Self::new(systems, m)
    }

    /// Computational-basis projector |i><i| on one system.
    pub fn basis_projector(label: SystemLabel, i: usize) -> Result<Self> {
        if i >= label.dim {
            return Err(Error::InvalidArgument(format!("basis index {} out of range for {}", i, label)));
        }
        let d = label.dim;
        let mut m = CMat::zeros(d, d);
        m[(i, i)] = C64::new(1.0, 0.0);
        Self::new(vec![label], m)
    }

    pub fn systems(&self) -> &[SystemLabel] {
        &self.systems
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.name == name)
    }

    pub fn label(&self, name: &str) -> Option<&SystemLabel> {
        self.systems.iter().find(|s| s.name == name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Value of a 1x1 operator.
    pub fn as_scalar(&self) -> Option<C64> {
        (self.dim() == 1).then(|| self.matrix[(0, 0)])
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_deviation(&self.matrix) <= tol
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix).0
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(HERMITIAN_TOL.max(tol)) && self.min_eigenvalue() >= -tol
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: &self.matrix * C64::new(c, 0.0),
        }
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: self.matrix.transpose(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Brings `other` into this operator's system order, checking the label sets agree.
    fn aligned<'a>(&self, other: &'a Self) -> Result<std::borrow::Cow<'a, Self>> {
        if self.systems == other.systems {
            return Ok(std::borrow::Cow::Borrowed(other));
        }
        if self.systems.len() != other.systems.len() {
            return Err(Error::Shape(format!(
                "systems differ: {} vs {}",
                fmt_systems(&self.systems),
                fmt_systems(&other.systems)
            )));
        }
        let order: Vec<&str> = self.names();
        let p = other.permuted(&order)?;
        if p.systems != self.systems {
            return Err(Error::Shape(format!(
                "systems differ: {} vs {}",
                fmt_systems(&self.systems),
                fmt_systems(&other.systems)
            )));
        }
        Ok(std::borrow::Cow::Owned(p))
    }

    /// Sum with an operator on the same label set (any order).
    pub fn add(&self, other: &Self) -> Result<Self> {
        let o = self.aligned(other)?;
        Ok(Self {
            systems: self.systems.clone(),
            matrix: &self.matrix + &o.matrix,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let o = self.aligned(other)?;
        Ok(Self {
            systems: self.systems.clone(),
            matrix: &self.matrix - &o.matrix,
        })
    }

    /// Frobenius distance to an operator on the same label set.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.matrix.norm())
    }

    /// Largest entrywise deviation from an operator on the same label set.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.matrix.iter().fold(0.0f64, |m, z| m.max(z.norm())))
    }

    /// Real part of Tr[self * other] for operators on the same labels.
    pub fn hs_inner(&self, other: &Self) -> Result<f64> {
        let o = self.aligned(other)?;
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += (self.matrix[(i, j)] * o.matrix[(j, i)]).re;
            }
        }
        Ok(acc)
    }

    /// Renames one system.
    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let p = self.position(from).ok_or_else(|| Error::UnknownLabel(from.to_string()))?;
        let mut systems = self.systems.clone();
        systems[p].name = to.to_string();
        Self::new(systems, self.matrix.clone())
    }

    /// Reorders the systems; `order` must be a permutation of the current names.
    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.systems.len() {
            return Err(Error::Shape(format!(
                "permutation of {} names requested for {} systems",
                order.len(),
                self.systems.len()
            )));
        }
        let mut perm = Vec::with_capacity(order.len());
        for name in order {
            let p = self.position(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
            if perm.contains(&p) {
                return Err(Error::LabelCollision(name.to_string()));
            }
            perm.push(p);
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let new_systems: Vec<SystemLabel> = perm.iter().map(|&p| self.systems[p].clone()).collect();
        let map = offsets(&self.systems, &perm);
        let d = self.dim();
        let m = CMat::from_fn(d, d, |i, j| self.matrix[(map[i], map[j])]);
        Ok(Self {
            systems: new_systems,
            matrix: m,
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        tensor(self, other)
    }

    pub fn partial_trace(&self, over: &[&str]) -> Result<Self> {
        partial_trace(self, over)
    }

    pub fn partial_transpose(&self, over: &[&str]) -> Result<Self> {
        partial_transpose(self, over)
    }

    pub fn link(&self, other: &Self) -> Result<Self> {
        link_product(self, other)
    }

    /// Tensors with identities on `labels` that are not already present.
    pub fn extend_identity(&self, labels: &[SystemLabel]) -> Result<Self> {
        let missing: Vec<SystemLabel> = labels.iter().filter(|l| !self.has(&l.name)).cloned().collect();
        if missing.is_empty() {
            return Ok(self.clone());
        }
        self.tensor(&Self::identity(missing)?)
    }

    /// Trace-and-replace: Tr_X(W) tensored with the normalized identity on X, in the original order.
    pub fn trace_replace(&self, over: &[&str]) -> Result<Self> {
        if over.is_empty() {
            return Ok(self.clone());
        }
        let labels: Vec<SystemLabel> = over
            .iter()
            .map(|n| self.label(n).cloned().ok_or_else(|| Error::UnknownLabel(n.to_string())))
            .collect::<Result<_>>()?;
        let d: usize = total_dim(&labels);
        let reduced = self.partial_trace(over)?;
        let full = reduced.tensor(&Self::identity(labels)?)?.scale(1.0 / d as f64);
        let order = self.names();
        full.permuted(&order)
    }

    /// Hermitian part (A + A^dagger)/2.
    pub fn hermitian_part(&self) -> Self {
        Self {
            systems: self.systems.clone(),
            matrix: (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0),
        }
    }
}

pub fn fmt_systems(systems: &[SystemLabel]) -> String {
    let parts: Vec<String> = systems.iter().map(|s| s.to_string()).collect();
    format!("[{}]", parts.join(" "))
}

/// Kronecker composition; systems of `a` come first.
pub fn tensor(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    for s in &b.systems {
        if a.has(&s.name) {
            return Err(Error::LabelCollision(s.name.clone()));
        }
    }
    let mut systems = a.systems.clone();
    systems.extend(b.systems.iter().cloned());
    let m = a.matrix.kronecker(&b.matrix);
    LabeledOperator::new(systems, m)
}

fn positions(a: &LabeledOperator, over: &[&str]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(over.len());
    for name in over {
        let p = a.position(name).ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn partial_trace(a: &LabeledOperator, over: &[&str]) -> Result<LabeledOperator> {
    let traced = positions(a, over)?;
    let kept: Vec<usize> = (0..a.systems.len()).filter(|p| !traced.contains(p)).collect();
    let ok = offsets(&a.systems, &kept);
    let ot = offsets(&a.systems, &traced);
    let dk = ok.len();
    let mut m = CMat::zeros(dk, dk);
    for r in 0..dk {
        for c in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &ot {
                acc += a.matrix[(ok[r] + t, ok[c] + t)];
            }
            m[(r, c)] = acc;
        }
    }
    let systems = kept.iter().map(|&p| a.systems[p].clone()).collect();
    LabeledOperator::new(systems, m)
}

pub fn partial_transpose(a: &LabeledOperator, over: &[&str]) -> Result<LabeledOperator> {
    let tp = positions(a, over)?;
    if tp.is_empty() {
        return Ok(a.clone());
    }
    let kept: Vec<usize> = (0..a.systems.len()).filter(|p| !tp.contains(p)).collect();
    let ok = offsets(&a.systems, &kept);
    let ot = offsets(&a.systems, &tp);
    let d = a.dim();
    let mut m = CMat::zeros(d, d);
    for &k in &ok {
        for &t in &ot {
            for &k2 in &ok {
                for &t2 in &ot {
                    m[(k + t, k2 + t2)] = a.matrix[(k + t2, k2 + t)];
                }
            }
        }
    }
    LabeledOperator::new(a.systems.clone(), m)
}

/// Link product: contracts every label shared by `a` and `b`.
///
/// With no shared labels this is the tensor product; with all labels shared
/// it is the scalar Tr[a^T b].
pub fn link_product(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    let mut shared_a = Vec::new();
    let mut shared_b = Vec::new();
    for (pa, s) in a.systems.iter().enumerate() {
        if let Some(pb) = b.position(&s.name) {
            let db = b.systems[pb].dim;
            if db != s.dim {
                return Err(Error::DimensionMismatch {
                    label: s.name.clone(),
                    left: s.dim,
                    right: db,
                });
            }
            shared_a.push(pa);
            shared_b.push(pb);
        }
    }
    if shared_a.is_empty() {
        return tensor(a, b);
    }
    let rest_a: Vec<usize> = (0..a.systems.len()).filter(|p| !shared_a.contains(p)).collect();
    let rest_b: Vec<usize> = (0..b.systems.len()).filter(|p| !shared_b.contains(p)).collect();
    let oax = offsets(&a.systems, &rest_a);
    let oay = offsets(&a.systems, &shared_a);
    let oby = offsets(&b.systems, &shared_b);
    let obz = offsets(&b.systems, &rest_b);
    let (dx, dy, dz) = (oax.len(), oay.len(), obz.len());

    let ap = CMat::from_fn(dx * dx, dy * dy, |r, c| {
        let (x, x2) = (r / dx, r % dx);
        let (y2, y) = (c / dy, c % dy);
        a.matrix[(oax[x] + oay[y2], oax[x2] + oay[y])]
    });
    let bp = CMat::from_fn(dy * dy, dz * dz, |r, c| {
        let (y2, y) = (r / dy, r % dy);
        let (z, z2) = (c / dz, c % dz);
        b.matrix[(oby[y2] + obz[z], oby[y] + obz[z2])]
    });
    let rp = ap * bp;
    let d = dx * dz;
    let m = CMat::from_fn(d, d, |r, c| {
        let (x, z) = (r / dz, r % dz);
        let (x2, z2) = (c / dz, c % dz);
        rp[(x * dx + x2, z * dz + z2)]
    });
    let mut systems: Vec<SystemLabel> = rest_a.iter().map(|&p| a.systems[p].clone()).collect();
    systems.extend(rest_b.iter().map(|&p| b.systems[p].clone()));
    LabeledOperator::new(systems, m)
}

/// Normalized maximally entangled projector |phi+><phi+| on `l1`, `l2`.
pub fn maximally_entangled(l1: SystemLabel, l2: SystemLabel) -> Result<LabeledOperator> {
    let d = l1.dim;
    Ok(choi_identity_channel(l1, l2)?.scale(1.0 / d as f64))
}

/// Choi matrix |1>><<1| of the identity channel from `input` to `output`.
pub fn choi_identity_channel(input: SystemLabel, output: SystemLabel) -> Result<LabeledOperator> {
    if input.dim != output.dim {
        return Err(Error::DimensionMismatch {
            label: format!("{}/{}", input.name, output.name),
            left: input.dim,
            right: output.dim,
        });
    }
    let d = input.dim;
    let mut ket = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        ket[i * d + i] = C64::new(1.0, 0.0);
    }
    LabeledOperator::from_ket(vec![input, output], &ket)
}

/// Nearest positive semidefinite operator in Frobenius norm.
pub fn psd_projection(a: &LabeledOperator) -> Result<LabeledOperator> {
    let dev = a.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let (vals, vecs) = eigh(&a.matrix);
    let d = a.dim();
    let mut m = CMat::zeros(d, d);
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = vecs.column(k);
            m += (&col * col.adjoint()) * C64::new(v, 0.0);
        }
    }
    LabeledOperator::new(a.systems.clone(), m)
}

/// Pauli matrices in the order Z, X, Y.
pub fn pauli(k: usize) -> CMat {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => CMat::from_row_slice(2, 2, &[one, o, o, -one]),
        1 => CMat::from_row_slice(2, 2, &[o, one, one, o]),
        2 => CMat::from_row_slice(2, 2, &[o, -i, i, o]),
        _ => panic!("pauli index out of range"),
    }
}
