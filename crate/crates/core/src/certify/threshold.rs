use serde::{Deserialize, Serialize};

use crate::dpovm::CausalConstraintSystem;
use crate::error::{Error, Result};
use crate::sdp::{check_certificate, check_solution, solve_feasibility, SolveOptions, SolveStatus};

/// Residual accepted for a feasible decomposition on independent re-evaluation.
pub const FEASIBLE_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Probe {
    Infeasible,
    Feasible,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub r: f64,
    pub outcome: Probe,
    pub iterations: usize,
    /// Certificate margin or residual, depending on the outcome.
    pub evidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_certificate_margin: f64,
    pub hi_residual: f64,
    pub hi_min_eigenvalue: f64,
    /// True when the requested width could not be reached.
    pub widened: bool,
    pub probes: Vec<ProbeRecord>,
}

impl ThresholdInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, r: f64) -> bool {
        self.lo <= r && r <= self.hi
    }
}

struct Evidence {
    outcome: Probe,
    value: f64,
    min_eig: f64,
    iterations: usize,
}

fn probe(sys: &CausalConstraintSystem, opts: &SolveOptions) -> Result<Evidence> {
    let p = sys.to_program()?;
    let rep = solve_feasibility(&p, opts)?;
    let mut ev = Evidence {
        outcome: Probe::Undecided,
        value: f64::NAN,
        min_eig: f64::NAN,
        iterations: rep.iterations,
    };
    match rep.status {
        SolveStatus::Feasible => {
            let chk = check_solution(&p, rep.solution.as_ref().expect("feasible report carries a solution"))?;
            if chk.residual <= FEASIBLE_RESIDUAL_TOL && chk.min_eigenvalue >= -FEASIBLE_RESIDUAL_TOL {
                ev.outcome = Probe::Feasible;
                ev.value = chk.residual;
                ev.min_eig = chk.min_eigenvalue;
            }
        }
        SolveStatus::InfeasibleWithCertificate => {
            if let Some(m) = rep.certificate.as_ref().and_then(|c| check_certificate(&p, c)) {
                ev.outcome = Probe::Infeasible;
                ev.value = m;
            }
        }
        SolveStatus::Undecided => {}
    }
    Ok(ev)
}

/// Bisection on a monotone family: certified infeasible at `lo`, verified
/// feasible at `hi`. Undecided midpoints are sidestepped by probing the two
/// quarter points; if neither decides, the interval is returned widened.
pub fn threshold_search(
    builder: impl Fn(f64) -> Result<CausalConstraintSystem>,
    r_lo: f64,
    r_hi: f64,
    r_tol: f64,
    opts: &SolveOptions,
) -> Result<ThresholdInterval> {
    if !(r_lo < r_hi) || !(r_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("need r_lo < r_hi and r_tol > 0, got {} {} {}", r_lo, r_hi, r_tol)));
    }
    let mut probes = Vec::new();
    let mut run = |r: f64| -> Result<Evidence> {
        let ev = probe(&builder(r)?, opts)?;
        probes.push(ProbeRecord {
            r,
            outcome: ev.outcome,
            iterations: ev.iterations,
            evidence: ev.value,
        });
        Ok(ev)
    };
    let lo_ev = run(r_lo)?;
    if lo_ev.outcome != Probe::Infeasible {
        return Err(Error::Precondition(format!("no infeasibility certificate at the lower end r = {}", r_lo)));
    }
    let hi_ev = run(r_hi)?;
    if hi_ev.outcome != Probe::Feasible {
        return Err(Error::Precondition(format!("no verified feasible point at the upper end r = {}", r_hi)));
    }
    let (mut lo, mut hi) = (r_lo, r_hi);
    let (mut margin, mut residual, mut min_eig) = (lo_ev.value, hi_ev.value, hi_ev.min_eig);
    let mut widened = false;
    'outer: while hi - lo > r_tol {
        let mid = 0.5 * (lo + hi);
        for r in [mid, 0.5 * (lo + mid), 0.5 * (mid + hi)] {
            let ev = run(r)?;
            match ev.outcome {
                Probe::Infeasible => {
                    lo = r;
                    margin = ev.value;
                    continue 'outer;
                }
                Probe::Feasible => {
                    hi = r;
                    residual = ev.value;
                    min_eig = ev.min_eig;
                    continue 'outer;
                }
                Probe::Undecided => {}
            }
        }
        widened = true;
        break;
    }
    Ok(ThresholdInterval {
        lo,
        hi,
        lo_certificate_margin: margin,
        hi_residual: residual,
        hi_min_eigenvalue: min_eig,
        widened,
        probes,
    })
}
