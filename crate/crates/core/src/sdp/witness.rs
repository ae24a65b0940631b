use serde::{Deserialize, Serialize};

use super::solver::{solve_feasibility, SolveOptions, SolveReport, SolveStatus};
use super::{herm_to_vec, BlockKind, BlockSpec, ConeProgram, GroupRole, SparseRow};
use crate::error::{Error, Result};
use crate::tensor_core::{eigh, min_eigenvalue, CMat, C64};

/// Linear functional `E ↦ Σ_i Tr(S_i E_i) - offset` on the targets of a program.
///
/// `lower_bound` is the claimed minimum over all feasible targets; `pairing`
/// is the value on the program's own targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatingFunctional {
    #[serde(with = "cmat_list")]
    pub coefficients: Vec<CMat>,
    pub offset: f64,
    pub lower_bound: f64,
    pub pairing: f64,
    pub certified_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub passed: bool,
    pub pairing: f64,
    pub lower_bound: f64,
    pub membership: Option<SolveStatus>,
}

const LOWER_BOUND_TOL: f64 = 1e-8;

fn hs(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

impl SeparatingFunctional {
    /// `Σ_i Tr(S_i E_i) - offset`.
    pub fn value(&self, elements: &[CMat]) -> Result<f64> {
        if elements.len() != self.coefficients.len() {
            return Err(Error::Shape(format!(
                "{} elements for {} coefficients",
                elements.len(),
                self.coefficients.len()
            )));
        }
        Ok(self.coefficients.iter().zip(elements).map(|(s, e)| hs(s, e)).sum::<f64>() - self.offset)
    }

    pub fn zero_like(&self) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| CMat::zeros(c.nrows(), c.ncols())).collect(),
            offset: 0.0,
            lower_bound: 0.0,
            pairing: 0.0,
            certified_margin: 0.0,
        }
    }
}

fn target_rhs(p: &ConeProgram) -> Vec<CMat> {
    p.target_groups().iter().map(|&g| p.groups()[g].rhs.clone()).collect()
}

fn max_op_norm(ms: &[CMat]) -> f64 {
    ms.iter()
        .map(|m| eigh(m).0.iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .fold(0.0, f64::max)
}

/// `A_Tᵀ s` for a functional given per target group.
fn target_adjoint(p: &ConeProgram, coeffs: &[CMat]) -> Vec<f64> {
    let mut y = vec![0.0; p.num_rows()];
    for (&g, c) in p.target_groups().iter().zip(coeffs) {
        let r = p.groups()[g].rows.clone();
        y[r].copy_from_slice(&herm_to_vec(c));
    }
    p.apply_transpose(&y)
}

fn structural_rows(p: &ConeProgram) -> Vec<usize> {
    p.groups()
        .iter()
        .filter(|g| g.role == GroupRole::Structural)
        .flat_map(|g| g.rows.clone())
        .collect()
}

/// Dual-membership program: find `Z ⪰ 0` per block and free `y_O` with
/// `Z - A_Oᵀ y_O = A_Tᵀ S` and `<b_O, y_O> = -(offset + lower_bound)`.
fn membership_program(p: &ConeProgram, s: &SeparatingFunctional) -> (ConeProgram, Vec<usize>) {
    let mut q = ConeProgram::new();
    for spec in p.blocks() {
        q.add_block(BlockSpec {
            name: format!("Z[{}]", spec.name),
            dim: spec.dim,
            kind: spec.kind,
            trace_bound: None,
        });
    }
    let zvars = q.num_vars();
    // One free variable per structural row, grouped as in `p`.
    let srows = structural_rows(p);
    let mut yvar = vec![usize::MAX; p.num_rows()];
    for g in p.groups().iter().filter(|g| g.role == GroupRole::Structural) {
        let j = q.add_block(BlockSpec {
            name: format!("y[{}]", g.name),
            dim: g.dim,
            kind: BlockKind::Free,
            trace_bound: None,
        });
        let start = q.block_range(j).start;
        for (k, r) in g.rows.clone().enumerate() {
            yvar[r] = start + k;
        }
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![vec![]; p.num_vars()];
    for &r in &srows {
        for &(v, c) in &p.rows()[r] {
            cols[v].push((yvar[r], -c));
        }
    }
    let rhs = target_adjoint(p, &s.coefficients);
    for (j, spec) in p.blocks().iter().enumerate() {
        let range = p.block_range(j);
        let rows: Vec<SparseRow> = range
            .clone()
            .map(|v| {
                let mut row = vec![(v, 1.0)];
                row.extend(cols[v].iter().copied());
                row
            })
            .collect();
        let m = super::vec_to_herm(&rhs[range], spec.dim);
        q.add_group(&format!("block {}", spec.name), GroupRole::Structural, rows, m).expect("consistent shapes");
    }
    if !srows.is_empty() {
        let row: SparseRow = srows.iter().map(|&r| (yvar[r], p.b()[r])).filter(|&(_, c)| c != 0.0).collect();
        q.add_scalar_constraint("bound", GroupRole::Structural, row, -(s.offset + s.lower_bound))
            .expect("consistent shapes");
    }
    debug_assert!(zvars <= q.num_vars());
    (q, yvar)
}

/// Checks strict separation: the value on the program's targets is negative
/// and below a lower bound established for every feasible target by an
/// explicit dual-membership solution.
pub fn verify_witness(s: &SeparatingFunctional, p: &ConeProgram, opts: &SolveOptions) -> Result<WitnessCheck> {
    let rhs = target_rhs(p);
    let pairing = s.value(&rhs)?;
    let fail = |membership| WitnessCheck {
        passed: false,
        pairing,
        lower_bound: f64::NEG_INFINITY,
        membership,
    };
    if !(pairing < 0.0) {
        return Ok(fail(None));
    }
    let (q, yvar) = membership_program(p, s);
    let report = solve_feasibility(&q, opts)?;
    if report.status != SolveStatus::Feasible {
        return Ok(fail(Some(report.status)));
    }
    let sol = q.flatten_blocks(report.solution.as_ref().unwrap())?;
    let mut y = vec![0.0; p.num_rows()];
    for r in structural_rows(p) {
        y[r] = sol[yvar[r]];
    }
    // Recompute Z exactly from the dual variables.
    let at_s = target_adjoint(p, &s.coefficients);
    let at_y = p.apply_transpose(&y);
    let mut cone = 0.0;
    for (j, spec) in p.blocks().iter().enumerate() {
        let range = p.block_range(j);
        let zv: Vec<f64> = range.clone().map(|v| at_s[v] + at_y[v]).collect();
        let z = super::vec_to_herm(&zv, spec.dim);
        match spec.kind {
            BlockKind::Free => {
                if z.iter().any(|v| v.norm() > 1e-9) {
                    return Ok(fail(Some(report.status)));
                }
            }
            BlockKind::Psd => {
                let l = min_eigenvalue(&z);
                if l < 0.0 {
                    match spec.trace_bound {
                        Some(bound) => cone += l * bound,
                        None if l < -1e-12 => return Ok(fail(Some(report.status))),
                        None => {}
                    }
                }
            }
        }
    }
    let by: f64 = y.iter().zip(p.b()).map(|(a, b)| a * b).sum();
    let lower = cone - by - s.offset;
    Ok(WitnessCheck {
        passed: lower >= -LOWER_BOUND_TOL && pairing < lower,
        pairing,
        lower_bound: lower,
        membership: Some(report.status),
    })
}

fn normalized(mut s: SeparatingFunctional) -> SeparatingFunctional {
    let n = max_op_norm(&s.coefficients);
    if n > 0.0 {
        for c in &mut s.coefficients {
            *c /= C64::new(n, 0.0);
        }
        s.offset /= n;
        s.lower_bound /= n;
        s.pairing /= n;
        s.certified_margin /= n;
    }
    s
}

/// Builds a verified separating functional from an infeasibility certificate.
///
/// The structural part of the dual is folded into the target coefficients
/// through the identity term, then shifted so that the value on the targets
/// and the bound on feasible targets sit symmetrically around zero.
pub fn extract_witness(p: &ConeProgram, report: &SolveReport, opts: &SolveOptions) -> Result<SeparatingFunctional> {
    let cert = report
        .certificate
        .as_ref()
        .ok_or_else(|| Error::NoCertificate(format!("solver status is {:?}", report.status)))?;
    let targets = p.target_groups();
    if targets.is_empty() {
        return Err(Error::NoCertificate("program has no target equations".into()));
    }
    let rhs = target_rhs(p);
    let y_t: Vec<CMat> = targets.iter().map(|&g| p.group_matrix(g, &cert.y)).collect();
    let beta: f64 = structural_rows(p).iter().map(|&r| cert.y[r] * p.b()[r]).sum();
    let total_trace: f64 = rhs.iter().map(|m| m.trace().re).sum();
    let p0 = cert.b_dot_y;
    let lb0 = cert.cone_term;
    let gap = lb0 - p0;

    let mut candidates = Vec::new();
    if total_trace.abs() > 1e-12 && !structural_rows(p).is_empty() {
        let shift = (beta - 0.5 * (p0 + lb0)) / total_trace;
        let coefficients: Vec<CMat> = y_t
            .iter()
            .map(|m| m + CMat::identity(m.nrows(), m.ncols()) * C64::new(shift, 0.0))
            .collect();
        candidates.push(SeparatingFunctional {
            coefficients,
            offset: 0.0,
            lower_bound: 0.25 * gap,
            pairing: -0.5 * gap,
            certified_margin: 0.5 * gap,
        });
    }
    candidates.push(SeparatingFunctional {
        coefficients: y_t.clone(),
        offset: -beta,
        lower_bound: lb0,
        pairing: p0,
        certified_margin: -p0,
    });
    let mut last = None;
    for c in candidates {
        let c = normalized(c);
        let check = verify_witness(&c, p, opts)?;
        if check.passed {
            return Ok(SeparatingFunctional {
                pairing: check.pairing,
                certified_margin: -check.pairing,
                ..c
            });
        }
        last = Some(check);
    }
    Err(Error::NoCertificate(format!("candidate functional failed verification: {:?}", last)))
}

mod cmat_list {
    use super::CMat;
    use crate::tensor_core::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        dim: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<Dense> = v
            .iter()
            .map(|m| Dense {
                dim: m.nrows(),
                re: m.transpose().iter().map(|z| z.re).collect(),
                im: m.transpose().iter().map(|z| z.im).collect(),
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let raw = Vec::<Dense>::deserialize(d)?;
        raw.into_iter()
            .map(|m| {
                if m.re.len() != m.dim * m.dim || m.im.len() != m.dim * m.dim {
                    return Err(serde::de::Error::custom("matrix entry count does not match dim"));
                }
                let vals: Vec<C64> = m.re.iter().zip(&m.im).map(|(&r, &i)| C64::new(r, i)).collect();
                Ok(CMat::from_row_slice(m.dim, m.dim, &vals))
            })
            .collect()
    }
}
