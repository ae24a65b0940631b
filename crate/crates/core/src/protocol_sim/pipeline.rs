use serde::{Deserialize, Serialize};

use super::{bell_subtensor, embed_physical, simulate_ndi, JunkSpec, NetworkScenario};
use crate::certify::{
    condition_star, expand_witness_coefficients, extended_chsh_value, link_witness, robust_verdict, theta_from_bell_deficit, witness_value,
    RobustnessLedger, Verdict, WitnessCoefficients,
};
use crate::dpovm::{CausalConstraintSystem, SystemKind};
use crate::error::{Error, Result};
use crate::process::depolarize;
use crate::sdp::{extract_witness, solve_feasibility, verify_witness, SolveOptions, SolveStatus};
use crate::tensor_core::LabeledOperator;

/// Imperfections applied to a reference scenario before simulating it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Werner visibility of every physical shared state.
    pub visibility: f64,
    /// White-noise weight mixed into the process.
    pub depolarize: f64,
    /// Junk specification per link; empty means no junk.
    pub junk: Vec<JunkSpec>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            visibility: 1.0,
            depolarize: 0.0,
            junk: vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub noise: NoiseConfig,
    pub kappa: f64,
    pub system: SystemKind,
    pub solve: SolveOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::default(),
            kappa: 1.0,
            system: SystemKind::P2fDefinition2,
            solve: SolveOptions::default(),
        }
    }
}

/// Witness coefficients for a reference scenario and their reference value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessBundle {
    pub system: SystemKind,
    pub coefficients: WitnessCoefficients,
    pub reference_value: f64,
}

impl WitnessBundle {
    /// Solves the separability problem for the scenario's `⋆` D-POVM and
    /// expands the witness over the heralded reference states.
    pub fn from_reference(scn: &NetworkScenario, kind: SystemKind, opts: &SolveOptions) -> Result<Self> {
        scn.check_ndi()?;
        let e = scn.star_dpovm()?;
        let sys = CausalConstraintSystem::build(kind, &e)?;
        let program = sys.to_program()?;
        let report = solve_feasibility(&program, opts)?;
        if report.status != SolveStatus::InfeasibleWithCertificate {
            return Err(Error::NoCertificate(format!("reference D-POVM is not certified nonseparable ({:?})", report.status)));
        }
        let f = extract_witness(&program, &report, opts)?;
        let check = verify_witness(&f, &program, opts)?;
        if !check.passed {
            return Err(Error::NoCertificate("extracted witness failed verification".into()));
        }
        let ops = link_witness(&sys, &f)?;
        let coefficients = expand_witness_coefficients(&ops, &e, &scn.state_sets()?)?;
        let reference_value = witness_value(&coefficients, &condition_star(&simulate_ndi(scn)?)?)?;
        Ok(Self {
            system: kind,
            coefficients,
            reference_value,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBellReport {
    pub preparer: String,
    pub party: String,
    pub value: f64,
    pub epsilon: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub bell: Vec<LinkBellReport>,
    pub trace_distance: Vec<f64>,
    pub j_reference: f64,
    pub j_exp: f64,
    pub ledger: RobustnessLedger,
    pub verdict: Verdict,
}

fn werner(rho: &LabeledOperator, v: f64) -> Result<LabeledOperator> {
    let white = LabeledOperator::identity(rho.systems().to_vec())?.scale(1.0 / rho.dim() as f64);
    rho.scale(v).add(&white.scale(1.0 - v))
}

/// Physical scenario after junk embedding, Werner noise and process depolarization.
pub fn noisy_realization(reference: &NetworkScenario, noise: &NoiseConfig) -> Result<(NetworkScenario, Vec<f64>)> {
    if !(0.0..=1.0).contains(&noise.visibility) {
        return Err(Error::InvalidArgument(format!("visibility must lie in [0, 1], got {}", noise.visibility)));
    }
    let specs = if noise.junk.is_empty() {
        vec![JunkSpec::default(); reference.links.len()]
    } else {
        noise.junk.clone()
    };
    let real = embed_physical(reference, &specs)?;
    let mut scn = real.physical;
    for l in &mut scn.links {
        l.shared = werner(&l.shared, noise.visibility)?;
    }
    scn.process = depolarize(&scn.process, noise.depolarize)?;
    Ok((scn, real.trace_distance))
}

/// Heralding probability `P(c_j = 0 | z_j = k)` per link and setting, with
/// every other input at its star or 0.
fn heralding_probabilities(p: &crate::certify::CorrelationTensor, scn: &NetworkScenario) -> Result<Vec<Vec<f64>>> {
    let mut fixed = p.clone();
    for a in p.inputs() {
        if scn.links.iter().any(|l| l.preparer == a.name) {
            continue;
        }
        fixed = fixed.fix_input(&a.name, a.star.unwrap_or(0))?;
    }
    let mut out = Vec::with_capacity(scn.links.len());
    for l in &scn.links {
        let mut t = fixed.clone();
        for other in &scn.links {
            if other.preparer != l.preparer {
                t = t.fix_input(&other.preparer, 0)?;
            }
        }
        out.push(t.outcome_probability(&l.preparer, 0)?);
    }
    Ok(out)
}

/// Self-test every link, evaluate the witness on `P⋆` and apply the robustness ledger.
pub fn run_ndi_pipeline(reference: &NetworkScenario, witness: &WitnessBundle, cfg: &PipelineConfig) -> Result<PipelineReport> {
    reference.check_ndi()?;
    if !cfg.noise.junk.is_empty() && cfg.noise.junk.len() != reference.links.len() {
        return Err(Error::Shape(format!("{} junk specs for {} links", cfg.noise.junk.len(), reference.links.len())));
    }
    let (physical, trace_distance) = noisy_realization(reference, &cfg.noise)?;
    let p = simulate_ndi(&physical)?;
    let mut bell = Vec::with_capacity(physical.links.len());
    for l in &physical.links {
        let value = extended_chsh_value(&bell_subtensor(&p, l)?)?;
        let epsilon = (6.0 * std::f64::consts::SQRT_2 - value).max(0.0);
        bell.push(LinkBellReport {
            preparer: l.preparer.clone(),
            party: l.party.clone(),
            value,
            epsilon,
            theta: theta_from_bell_deficit(epsilon, cfg.kappa)?,
        });
    }
    let j_exp = witness_value(&witness.coefficients, &condition_star(&p)?)?;
    let p0 = heralding_probabilities(&p, &physical)?;
    let epsilon = bell.iter().map(|b| b.epsilon).fold(0.0, f64::max);
    let ledger = RobustnessLedger::from_deficit(&witness.coefficients, epsilon, cfg.kappa, p0)?;
    Ok(PipelineReport {
        bell,
        trace_distance,
        j_reference: witness.reference_value,
        j_exp,
        verdict: robust_verdict(j_exp, ledger.correction_max),
        ledger,
    })
}
