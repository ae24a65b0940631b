//! Command-line front end. Every command prints a text report and writes a
//! JSON side file `<out-dir>/<command>.json` holding the resolved config and
//! the machine-readable report.
//!
//! Exit codes: 0 success or certified, 2 undecided or inconclusive, 1 error.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dpovm::SystemKind;
use crate::error::{Error, Result};
use crate::sdp::SolveOptions;

pub const OUT_DIR_ENV: &str = "CAUSAL_CERT_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "causal-cert", version, about = "Certify causal nonseparability of process matrices")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for reports and artifacts [env: CAUSAL_CERT_OUT, default: .]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Solver convergence tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Over-relaxation parameter in (0, 2).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Self-testing robustness constant in θ = κ√ε.
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definition {
    Bipartite,
    Def1,
    Def2,
    Nmdci,
}

impl From<Definition> for SystemKind {
    fn from(d: Definition) -> Self {
        match d {
            Definition::Bipartite => SystemKind::Bipartite,
            Definition::Def1 => SystemKind::P2fDefinition1,
            Definition::Def2 => SystemKind::P2fDefinition2,
            Definition::Nmdci => SystemKind::Nmdci,
        }
    }
}

/// A D-POVM from a file or the depolarized switch family.
#[derive(Args, Debug, Clone)]
pub struct DpovmSource {
    /// D-POVM manifest.
    #[arg(long, conflicts_with = "switch", required_unless_present = "switch")]
    pub dpovm: Option<PathBuf>,
    /// Use the switch family with white-noise weight R instead of a file.
    #[arg(long, value_name = "R")]
    pub switch: Option<f64>,
}

/// A network scenario from a manifest or the switch Phil–Emily scenario.
#[derive(Args, Debug, Clone)]
pub struct ScenarioSource {
    #[arg(long, conflicts_with = "switch", required_unless_present = "switch")]
    pub scenario: Option<PathBuf>,
    /// Use the switch scenario with white-noise weight R.
    #[arg(long, value_name = "R")]
    pub switch: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize)]
pub struct NoiseArgs {
    /// Werner visibility of the shared states.
    #[arg(long)]
    pub visibility: Option<f64>,
    /// White-noise weight mixed into the process.
    #[arg(long)]
    pub depolarize: Option<f64>,
    /// Junk dimension of every link.
    #[arg(long)]
    pub junk_dim: Option<usize>,
    /// Weight of the transposed branch on every link.
    #[arg(long)]
    pub flag_weight: Option<f64>,
    /// Vector distance of the shared-state perturbation on every link.
    #[arg(long)]
    pub perturbation: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateMode {
    /// Full network correlations with self-test settings.
    Ndi,
    /// Network correlations, no star setting required.
    Nsdi,
    /// Direct quantum inputs from the heralded reference states.
    Sdiqi,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a process matrix for validity.
    Validate {
        /// Process manifest.
        process: PathBuf,
    },
    /// Induce the D-POVM of a process and instruments.
    Induce {
        #[arg(long, conflicts_with = "switch", required_unless_present = "switch")]
        process: Option<PathBuf>,
        #[arg(long, requires = "process")]
        instruments: Option<PathBuf>,
        #[arg(long, value_name = "R")]
        switch: Option<f64>,
    },
    /// Decide causal separability of a D-POVM.
    CheckSep {
        #[command(flatten)]
        source: DpovmSource,
        #[arg(long, value_enum, default_value = "def2")]
        definition: Definition,
    },
    /// Extract and verify a witness; with a scenario, expand it over the heralded states.
    Witness {
        #[arg(long, conflicts_with_all = ["switch", "scenario"])]
        dpovm: Option<PathBuf>,
        #[arg(long, conflicts_with = "switch")]
        scenario: Option<PathBuf>,
        #[arg(long, value_name = "R")]
        switch: Option<f64>,
        #[arg(long, value_enum, default_value = "def2")]
        definition: Definition,
    },
    /// Simulate protocol correlations.
    Simulate {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long, value_enum, default_value = "ndi")]
        mode: SimulateMode,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Also evaluate the DRF functional (switch-shaped scenarios with a binary Fiona setting).
        #[arg(long)]
        drf: bool,
    },
    /// Self-test, evaluate the witness and apply the robustness ledger.
    NdiPipeline {
        #[command(flatten)]
        source: ScenarioSource,
        /// Witness bundle from `witness --scenario`; computed from the reference when absent.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "def2")]
        definition: Definition,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Bracket the switch-family noise threshold by bisection.
    SwitchThreshold {
        #[arg(long, default_value_t = 0.0)]
        r_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        r_hi: f64,
        #[arg(long, default_value_t = 1e-3)]
        r_tol: f64,
    },
    /// Write a separability program as an SDPA sparse file.
    ExportSdpa {
        #[command(flatten)]
        source: DpovmSource,
        #[arg(long, value_enum, default_value = "def2")]
        definition: Definition,
        /// Output file; defaults to `<out-dir>/program.dat-s`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Settings after merging defaults, the config file and flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub tol: f64,
    pub max_iter: usize,
    pub alpha: f64,
    pub seed: u64,
    pub kappa: f64,
    pub visibility: f64,
    pub depolarize: f64,
    pub junk_dim: usize,
    pub flag_weight: f64,
    pub perturbation: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolveOptions::default();
        Self {
            command: String::new(),
            inputs: vec![],
            out_dir: PathBuf::from("."),
            tol: s.tol,
            max_iter: s.max_iter,
            alpha: s.alpha,
            seed: 0,
            kappa: 1.0,
            visibility: 1.0,
            depolarize: 0.0,
            junk_dim: 1,
            flag_weight: 0.0,
            perturbation: 0.0,
        }
    }
}

impl RunConfig {
    pub fn resolve(global: &GlobalArgs, noise: Option<&NoiseArgs>, command: &str, inputs: Vec<PathBuf>) -> Result<Self> {
        let mut cfg = match &global.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        cfg.command = command.to_string();
        cfg.inputs = inputs;
        if let Some(d) = &global.out_dir {
            cfg.out_dir = d.clone();
        } else if global.config.is_none() {
            if let Some(d) = std::env::var_os(OUT_DIR_ENV) {
                cfg.out_dir = PathBuf::from(d);
            }
        }
        macro_rules! take {
            ($src:expr, $($f:ident),*) => { $( if let Some(v) = $src.$f { cfg.$f = v; } )* };
        }
        take!(global, tol, max_iter, alpha, seed, kappa);
        if let Some(n) = noise {
            take!(n, visibility, depolarize, junk_dim, flag_weight, perturbation);
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.kappa > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("tol, kappa and max-iter must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        for p in &self.inputs {
            if !p.exists() {
                return Err(Error::InvalidArgument(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            alpha: self.alpha,
            ..SolveOptions::default()
        }
    }
}

/// What a command hands back: the text report, the JSON report and the exit code.
pub struct Outcome {
    pub text: String,
    pub json: serde_json::Value,
    pub code: i32,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(o) => {
            print!("{}", o.text);
            o.code
        }
        Err(e) => {
            eprintln!("error: {}", e);
            EXIT_ERROR
        }
    }
}
