//! Feasibility programs over products of Hermitian PSD cones with affine
//! equality constraints.
//!
//! Each block variable is a Hermitian `d×d` matrix stored as `d²` real
//! coordinates in an orthonormal Hermitian basis (see [`herm_to_vec`]), so
//! the Hilbert-Schmidt inner product becomes the Euclidean one. Constraints
//! come in groups: a group is one Hermitian matrix equation of dimension
//! `d_g`, realified into `d_g²` rows with the same basis.

pub mod sdpa;
mod solver;
mod witness;

pub use solver::{check_certificate, solve_feasibility, DualCertificate, SolveOptions, SolveReport, SolveStatus};
pub use witness::{extract_witness, verify_witness, SeparatingFunctional, WitnessCheck};

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_core::{CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Psd,
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
    pub kind: BlockKind,
    /// Upper bound on the trace valid for every feasible point, if known.
    pub trace_bound: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupRole {
    /// Equation whose right-hand side is target element `i`.
    Target(usize),
    Structural,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowGroup {
    pub name: String,
    pub dim: usize,
    pub role: GroupRole,
    pub rows: Range<usize>,
    pub rhs: CMat,
}

/// Sparse row: (variable index, coefficient).
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct ConeProgram {
    blocks: Vec<BlockSpec>,
    offsets: Vec<usize>,
    rows: Vec<SparseRow>,
    b: Vec<f64>,
    groups: Vec<RowGroup>,
}

/// Number of real coordinates of a `d×d` Hermitian matrix.
pub fn herm_len(d: usize) -> usize {
    d * d
}

/// Coordinates in the basis: diagonal units, then for each `i<j` the pair
/// `(E_ij+E_ji)/√2`, `(-iE_ij+iE_ji)/√2`, ordered by `(i, j)`.
pub fn herm_to_vec(m: &CMat) -> Vec<f64> {
    let d = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in i + 1..d {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out.push(s * z.re);
            out.push(-s * z.im);
        }
    }
    out
}

pub fn vec_to_herm(v: &[f64], d: usize) -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = C64::new(h * v[k], -h * v[k + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

impl Default for ConeProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConeProgram {
    pub fn new() -> Self {
        Self {
            blocks: vec![],
            offsets: vec![0],
            rows: vec![],
            b: vec![],
            groups: vec![],
        }
    }

    pub fn add_block(&mut self, spec: BlockSpec) -> usize {
        let n = *self.offsets.last().unwrap() + herm_len(spec.dim);
        self.blocks.push(spec);
        self.offsets.push(n);
        self.blocks.len() - 1
    }

    /// Adds one Hermitian equation. `rows[k]` is the realified coefficient
    /// row for basis element `k` of the group space; `rhs` is the constant.
    pub fn add_group(&mut self, name: &str, role: GroupRole, rows: Vec<SparseRow>, rhs: CMat) -> Result<usize> {
        let d = rhs.nrows();
        if rhs.ncols() != d || rows.len() != herm_len(d) {
            return Err(Error::Shape(format!("group `{}` has {} rows for dimension {}", name, rows.len(), d)));
        }
        let n = self.num_vars();
        if rows.iter().flatten().any(|&(v, _)| v >= n) {
            return Err(Error::Shape(format!("group `{}` references an undeclared variable", name)));
        }
        let start = self.rows.len();
        self.b.extend(herm_to_vec(&rhs));
        self.rows.extend(rows);
        self.groups.push(RowGroup {
            name: name.to_string(),
            dim: d,
            role,
            rows: start..self.rows.len(),
            rhs,
        });
        Ok(self.groups.len() - 1)
    }

    /// Scalar constraint `Σ coef·x = value` as a one-row group.
    pub fn add_scalar_constraint(&mut self, name: &str, role: GroupRole, row: SparseRow, value: f64) -> Result<usize> {
        self.add_group(name, role, vec![row], CMat::from_element(1, 1, C64::new(value, 0.0)))
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn groups(&self) -> &[RowGroup] {
        &self.groups
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn num_vars(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn block_range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    /// Replaces a group's right-hand side.
    pub fn set_rhs(&mut self, g: usize, rhs: CMat) -> Result<()> {
        let grp = &mut self.groups[g];
        if rhs.nrows() != grp.dim || rhs.ncols() != grp.dim {
            return Err(Error::Shape(format!("rhs for `{}` must be {}x{}", grp.name, grp.dim, grp.dim)));
        }
        let v = herm_to_vec(&rhs);
        self.b[grp.rows.clone()].copy_from_slice(&v);
        grp.rhs = rhs;
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(v, c)| c * x[v]).sum()).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for (r, row) in self.rows.iter().enumerate() {
            if y[r] != 0.0 {
                for &(v, c) in row {
                    out[v] += c * y[r];
                }
            }
        }
        out
    }

    /// Dense `A Aᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.num_rows();
        let n = self.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![vec![]; n];
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, c) in row {
                cols[v].push((r, c));
            }
        }
        let mut g = DMatrix::<f64>::zeros(m, m);
        for col in &cols {
            for &(r1, c1) in col {
                for &(r2, c2) in col {
                    g[(r1, r2)] += c1 * c2;
                }
            }
        }
        g
    }

    pub fn block_matrices(&self, x: &[f64]) -> Vec<CMat> {
        (0..self.blocks.len())
            .map(|j| vec_to_herm(&x[self.block_range(j)], self.blocks[j].dim))
            .collect()
    }

    pub fn flatten_blocks(&self, blocks: &[CMat]) -> Result<Vec<f64>> {
        if blocks.len() != self.blocks.len() {
            return Err(Error::Shape("wrong number of blocks".into()));
        }
        let mut out = Vec::with_capacity(self.num_vars());
        for (m, spec) in blocks.iter().zip(&self.blocks) {
            if m.nrows() != spec.dim {
                return Err(Error::Shape(format!("block `{}` has wrong dimension", spec.name)));
            }
            out.extend(herm_to_vec(m));
        }
        Ok(out)
    }

    /// Hermitian matrix of a group's slice of a row-space vector.
    pub fn group_matrix(&self, g: usize, y: &[f64]) -> CMat {
        let grp = &self.groups[g];
        vec_to_herm(&y[grp.rows.clone()], grp.dim)
    }

    pub fn target_groups(&self) -> Vec<usize> {
        let mut t: Vec<(usize, usize)> = self
            .groups
            .iter()
            .enumerate()
            .filter_map(|(g, grp)| match grp.role {
                GroupRole::Target(i) => Some((i, g)),
                GroupRole::Structural => None,
            })
            .collect();
        t.sort_unstable();
        t.into_iter().map(|(_, g)| g).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionCheck {
    pub residual: f64,
    pub min_eigenvalue: f64,
}

impl SolutionCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.residual <= tol && self.min_eigenvalue >= -tol
    }
}

/// Re-evaluates every constraint and PSD condition for a block assignment.
pub fn check_solution(p: &ConeProgram, blocks: &[CMat]) -> Result<SolutionCheck> {
    let x = p.flatten_blocks(blocks)?;
    let ax = p.apply(&x);
    let residual = ax.iter().zip(p.b()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mut min_eig = f64::INFINITY;
    for (m, spec) in blocks.iter().zip(p.blocks()) {
        if spec.kind == BlockKind::Psd {
            min_eig = min_eig.min(crate::tensor_core::min_eigenvalue(m));
        }
    }
    Ok(SolutionCheck {
        residual,
        min_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
    })
}
