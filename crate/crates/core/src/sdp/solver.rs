use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{herm_to_vec, vec_to_herm, BlockKind, ConeProgram};
use crate::error::Result;
use crate::tensor_core::{eigh, min_eigenvalue, CMat, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    pub check_every: usize,
    pub certificate_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 50_000,
            alpha: 1.8,
            check_every: 50,
            certificate_every: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Feasible,
    InfeasibleWithCertificate,
    Undecided,
}

/// A dual vector `y` with `Z = Aᵀy`. For every feasible `x`,
/// `<b, y> = <Z, x> >= Σ_j min(0, λ_min(Z_j)) B_j`; the certificate is
/// valid when the right side exceeds `<b, y>`, i.e. when `margin > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub y: Vec<f64>,
    pub b_dot_y: f64,
    pub cone_term: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub solution: Option<Vec<CMat>>,
    pub certificate: Option<DualCertificate>,
}

const CERT_THRESHOLD: f64 = 1e-9;
const DENSE_LIMIT: usize = 1200;

enum Projector {
    Dense(DMatrix<f64>),
    /// Row norms for the equilibrated least-squares iteration.
    Iterative { row_norm: Vec<f64> },
}

struct Affine<'a> {
    p: &'a ConeProgram,
    proj: Projector,
    /// Minimum-norm point of the affine set (least-squares if inconsistent).
    base: Vec<f64>,
    warm: Vec<f64>,
}

impl<'a> Affine<'a> {
    fn new(p: &'a ConeProgram) -> Self {
        let m = p.num_rows();
        let proj = if m <= DENSE_LIMIT {
            let g = p.gram();
            let eig = SymmetricEigen::new(g);
            let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
            let cut = 1e-9 * lmax.max(1e-300);
            let inv = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&v| if v > cut { 1.0 / v } else { 0.0 }));
            let v = &eig.eigenvectors;
            let scaled = DMatrix::from_fn(m, m, |r, c| v[(r, c)] * inv[c]);
            Projector::Dense(&scaled * v.transpose())
        } else {
            let row_norm = p.rows().iter().map(|r| r.iter().map(|(_, c)| c * c).sum::<f64>().sqrt().max(1e-300)).collect();
            Projector::Iterative { row_norm }
        };
        let mut aff = Self {
            p,
            proj,
            base: vec![],
            warm: vec![0.0; m],
        };
        aff.base = aff.min_norm_solution();
        aff
    }

    fn min_norm_solution(&self) -> Vec<f64> {
        match &self.proj {
            Projector::Dense(pinv) => {
                let y = pinv * DVector::from_column_slice(self.p.b());
                self.p.apply_transpose(y.as_slice())
            }
            Projector::Iterative { row_norm } => {
                let b: Vec<f64> = self.p.b().iter().zip(row_norm).map(|(v, d)| v / d).collect();
                cgls_primal(self.p, row_norm, &b)
            }
        }
    }

    /// `y` minimizing `|Aᵀ y - w|`, returned with `Aᵀ y`. With `warm`, the
    /// iterative path starts from and updates the previous solution.
    fn range_part(&mut self, w: &[f64], warm: bool) -> (Vec<f64>, Vec<f64>) {
        match &self.proj {
            Projector::Dense(pinv) => {
                let y = pinv * DVector::from_column_slice(&self.p.apply(w));
                let y = y.as_slice().to_vec();
                let aty = self.p.apply_transpose(&y);
                (y, aty)
            }
            Projector::Iterative { row_norm } => {
                let zero;
                let start = if warm {
                    &self.warm
                } else {
                    zero = vec![0.0; self.warm.len()];
                    &zero
                };
                let (y, aty) = cgls_dual(self.p, row_norm, w, start);
                if warm {
                    self.warm.clone_from(&y);
                }
                (y.iter().zip(row_norm).map(|(v, d)| v / d).collect(), aty)
            }
        }
    }

    fn project(&mut self, v: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = v.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let (_, aty) = self.range_part(&w, true);
        v.iter().zip(&aty).map(|(a, c)| a - c).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const CGLS_MAX_ITER: usize = 5000;
const CGLS_REL_TOL: f64 = 1e-14;

/// Rows of `A` scaled to unit norm: `D⁻¹ A`.
fn scaled_apply(p: &ConeProgram, d: &[f64], x: &[f64]) -> Vec<f64> {
    p.apply(x).iter().zip(d).map(|(v, s)| v / s).collect()
}

fn scaled_apply_transpose(p: &ConeProgram, d: &[f64], y: &[f64]) -> Vec<f64> {
    let y: Vec<f64> = y.iter().zip(d).map(|(v, s)| v / s).collect();
    p.apply_transpose(&y)
}

/// CGLS for `min |Â x - b|` from zero: the minimum-norm least-squares solution.
fn cgls_primal(p: &ConeProgram, d: &[f64], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; p.num_vars()];
    let mut s = b.to_vec();
    let mut r = scaled_apply_transpose(p, d, &s);
    let mut dir = r.clone();
    let mut gamma = dot(&r, &r);
    let target = CGLS_REL_TOL * CGLS_REL_TOL * gamma;
    for _ in 0..CGLS_MAX_ITER {
        if gamma <= target || gamma == 0.0 {
            break;
        }
        let q = scaled_apply(p, d, &dir);
        let qq = dot(&q, &q);
        if qq <= 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.iter_mut().zip(&dir).for_each(|(a, b)| *a += alpha * b);
        s.iter_mut().zip(&q).for_each(|(a, b)| *a -= alpha * b);
        r = scaled_apply_transpose(p, d, &s);
        let g = dot(&r, &r);
        let beta = g / gamma;
        gamma = g;
        dir.iter_mut().zip(&r).for_each(|(a, b)| *a = b + beta * *a);
    }
    x
}

/// CGLS for `min |Âᵀ y - w|` started at `start`; returns `y` and `Âᵀ y`.
/// Updates stay in the range of `Â`, so null components of `start` never grow.
fn cgls_dual(p: &ConeProgram, d: &[f64], w: &[f64], start: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut y = start.to_vec();
    let mut aty = scaled_apply_transpose(p, d, &y);
    let mut s: Vec<f64> = w.iter().zip(&aty).map(|(a, b)| a - b).collect();
    let mut r = scaled_apply(p, d, &s);
    let mut dir = r.clone();
    let mut gamma = dot(&r, &r);
    let scale = dot(&scaled_apply(p, d, w), &scaled_apply(p, d, w)).max(1e-300);
    let target = CGLS_REL_TOL * CGLS_REL_TOL * scale;
    for _ in 0..CGLS_MAX_ITER {
        if gamma <= target {
            break;
        }
        let q = scaled_apply_transpose(p, d, &dir);
        let qq = dot(&q, &q);
        if qq <= 0.0 {
            break;
        }
        let alpha = gamma / qq;
        y.iter_mut().zip(&dir).for_each(|(a, b)| *a += alpha * b);
        aty.iter_mut().zip(&q).for_each(|(a, b)| *a += alpha * b);
        s.iter_mut().zip(&q).for_each(|(a, b)| *a -= alpha * b);
        r = scaled_apply(p, d, &s);
        let g = dot(&r, &r);
        let beta = g / gamma;
        gamma = g;
        dir.iter_mut().zip(&r).for_each(|(a, b)| *a = b + beta * *a);
    }
    (y, aty)
}

/// Projection of one 2x2 block, in basis coordinates `[a, d, s, t]`.
fn project_2x2(v: &mut [f64]) {
    let (a, d, s, t) = (v[0], v[1], v[2], v[3]);
    let mid = 0.5 * (a + d);
    let off2 = 0.5 * (s * s + t * t);
    let rad = (0.25 * (a - d) * (a - d) + off2).sqrt();
    let (lp, lm) = (mid + rad, mid - rad);
    if lm >= 0.0 {
        return;
    }
    if lp <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let f = lp / (2.0 * rad);
    v[0] = f * (a - lm);
    v[1] = f * (d - lm);
    v[2] = f * s;
    v[3] = f * t;
}

fn project_block(v: &mut [f64], d: usize) {
    match d {
        1 => v[0] = v[0].max(0.0),
        2 => project_2x2(v),
        _ => {
            let m = vec_to_herm(v, d);
            let (vals, vecs) = eigh(&m);
            if vals[0] >= 0.0 {
                return;
            }
            let mut out = CMat::zeros(d, d);
            for (k, &l) in vals.iter().enumerate() {
                if l > 0.0 {
                    let col = vecs.column(k);
                    out += (&col * col.adjoint()) * C64::new(l, 0.0);
                }
            }
            v.copy_from_slice(&herm_to_vec(&out));
        }
    }
}

fn project_cone(p: &ConeProgram, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    for (j, spec) in p.blocks().iter().enumerate() {
        if spec.kind == BlockKind::Psd {
            project_block(&mut x[p.block_range(j)], spec.dim);
        }
    }
    x
}

fn residual(p: &ConeProgram, x: &[f64]) -> f64 {
    let ax = p.apply(x);
    ax.iter().zip(p.b()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn block_op_norm(m: &CMat) -> f64 {
    let (vals, _) = eigh(m);
    vals.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Evaluates a candidate dual vector; `None` when it proves nothing.
fn evaluate_dual(p: &ConeProgram, y: &[f64]) -> Option<DualCertificate> {
    let z = p.apply_transpose(y);
    let scale = norm(y) * p.rows().iter().map(|r| r.iter().map(|(_, c)| c.abs()).sum::<f64>()).fold(0.0, f64::max);
    let zero_tol = 1e-12 * scale.max(1e-300);
    let mut cone = 0.0;
    let mut zmax: f64 = 0.0;
    for (j, spec) in p.blocks().iter().enumerate() {
        let zj = vec_to_herm(&z[p.block_range(j)], spec.dim);
        match spec.kind {
            BlockKind::Free => {
                if zj.iter().any(|v| v.norm() > zero_tol) {
                    return None;
                }
            }
            BlockKind::Psd => {
                let l = min_eigenvalue(&zj);
                zmax = zmax.max(block_op_norm(&zj));
                if l < 0.0 {
                    match spec.trace_bound {
                        Some(bound) => cone += l * bound,
                        None if l < -zero_tol => return None,
                        None => {}
                    }
                }
            }
        }
    }
    let by = dot(p.b(), y);
    let raw = cone - by;
    // Below this, `<b, y>` is indistinguishable from rounding error.
    if !(raw > 1e-12 * norm(p.b()) * norm(y)) {
        return None;
    }
    // Normalize to unit largest block operator norm, or unit |<b,y>| when Z vanishes.
    let s = if zmax > zero_tol { zmax } else { by.abs() };
    let margin = raw / s;
    Some(DualCertificate {
        y: y.iter().map(|v| v / s).collect(),
        b_dot_y: by / s,
        cone_term: cone / s,
        margin,
    })
}

/// Recomputes a certificate's margin from its dual vector.
pub fn check_certificate(p: &ConeProgram, cert: &DualCertificate) -> Option<f64> {
    if cert.y.len() != p.num_rows() {
        return None;
    }
    evaluate_dual(p, &cert.y).map(|c| c.margin).filter(|&m| m > CERT_THRESHOLD)
}

/// Douglas-Rachford splitting between the PSD cone and the affine set.
///
/// Reports `Feasible` with a PSD point meeting the constraints within `tol`,
/// `InfeasibleWithCertificate` with a checked dual certificate, or
/// `Undecided` when the iteration budget runs out.
pub fn solve_feasibility(p: &ConeProgram, opts: &SolveOptions) -> Result<SolveReport> {
    let n = p.num_vars();
    let mut aff = Affine::new(p);

    // Inconsistent equations: the least-squares residual is a certificate.
    let r0: Vec<f64> = p.b().iter().zip(p.apply(&aff.base)).map(|(b, a)| b - a).collect();
    if norm(&r0) > 1e-8 * (1.0 + norm(p.b())) {
        let y: Vec<f64> = r0.iter().map(|v| -v).collect();
        if let Some(cert) = evaluate_dual(p, &y).filter(|c| c.margin > CERT_THRESHOLD) {
            return Ok(SolveReport {
                status: SolveStatus::InfeasibleWithCertificate,
                primal_residual: norm(&r0),
                iterations: 0,
                solution: None,
                certificate: Some(cert),
            });
        }
    }

    let mut z = vec![0.0; n];
    let mut last_res = f64::INFINITY;
    let check_every = opts.check_every.max(1);
    let cert_every = opts.certificate_every.max(1);
    for k in 0..opts.max_iter {
        let x = project_cone(p, &z);
        let v: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 2.0 * a - b).collect();
        let l = aff.project(&v);
        if k % check_every == 0 {
            last_res = residual(p, &x);
            if last_res < opts.tol {
                return Ok(SolveReport {
                    status: SolveStatus::Feasible,
                    primal_residual: last_res,
                    iterations: k,
                    solution: Some(p.block_matrices(&x)),
                    certificate: None,
                });
            }
        }
        if k > 0 && k % cert_every == 0 {
            let g: Vec<f64> = x.iter().zip(&l).map(|(a, b)| a - b).collect();
            let (y, _) = aff.range_part(&g, false);
            if let Some(cert) = evaluate_dual(p, &y).filter(|c| c.margin > CERT_THRESHOLD) {
                return Ok(SolveReport {
                    status: SolveStatus::InfeasibleWithCertificate,
                    primal_residual: last_res,
                    iterations: k,
                    solution: None,
                    certificate: Some(cert),
                });
            }
        }
        for i in 0..n {
            z[i] += opts.alpha * (l[i] - x[i]);
        }
    }
    let x = project_cone(p, &z);
    let res = residual(p, &x);
    let status = if res < opts.tol { SolveStatus::Feasible } else { SolveStatus::Undecided };
    Ok(SolveReport {
        status,
        primal_residual: res,
        iterations: opts.max_iter,
        solution: (status == SolveStatus::Feasible).then(|| p.block_matrices(&x)),
        certificate: None,
    })
}
