use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use choquard::solver::SolveConfig;
use choquard::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Graph,
    Kernel,
    Verify,
    Solve,
    Sweep,
    Plot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    RadialProfile,
    Trace,
    SweepTable,
}

/// Everything a run needs; a JSON file supplies it and flags override it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub group: String,
    pub radius: u32,
    pub alpha: f64,
    pub p: f64,
    pub family: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub kernel_cache: Option<PathBuf>,
    /// `spectral` or `subordination`.
    pub method: String,
    /// Solve the equivalent HLS-dual form instead of the Choquard functional.
    pub equivalent: bool,
    pub allow_out_of_theorem: bool,
    pub max_iter: Option<usize>,
    pub step0: Option<f64>,
    pub tol_residual: Option<f64>,
    pub tol_stall: Option<f64>,
    pub recenter_every: Option<usize>,
    pub polish: Option<bool>,
    pub trials: usize,
    /// `sobolev`, `hls`, `main`, `second-order`, `brezis-lieb` or `all`.
    pub suite: String,
    /// `gaussian`, `spikes:K` or `bump:WIDTH`.
    pub distribution: String,
    pub support_radius: Option<u32>,
    /// Target exponent of the Sobolev suite; defaults to the critical one.
    pub q: Option<f64>,
    pub second_order_p: Option<f64>,
    pub p_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub radii: Vec<u32>,
    pub kind: Option<PlotKind>,
    pub inputs: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            group: "zN:3".into(),
            radius: 12,
            alpha: 1.0,
            p: 5.0,
            family: "first-order".into(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            kernel_cache: None,
            method: "spectral".into(),
            equivalent: false,
            allow_out_of_theorem: false,
            max_iter: None,
            step0: None,
            tol_residual: None,
            tol_stall: None,
            recenter_every: None,
            polish: None,
            trials: 1000,
            suite: "all".into(),
            distribution: "gaussian".into(),
            support_radius: None,
            q: None,
            second_order_p: None,
            p_values: Vec::new(),
            alpha_values: Vec::new(),
            radii: Vec::new(),
            kind: None,
            inputs: Vec::new(),
        }
    }
}

/// Command-line overrides; every flag is optional.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// JSON file with a RunConfig; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Group: zN:<n> or heisenberg.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub radius: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// first-order, p-laplace, biharmonic or p-biharmonic.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Kernel cache directory; defaults to $CHOQUARD_CACHE_DIR.
    #[arg(long)]
    pub kernel_cache: Option<PathBuf>,
    /// Kernel construction: spectral or subordination.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub equivalent: bool,
    #[arg(long)]
    pub allow_out_of_theorem: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub step0: Option<f64>,
    #[arg(long)]
    pub tol_residual: Option<f64>,
    #[arg(long)]
    pub tol_stall: Option<f64>,
    #[arg(long)]
    pub recenter_every: Option<usize>,
    /// Newton polish after the ascent: true or false.
    #[arg(long)]
    pub polish: Option<bool>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// sobolev, hls, main, second-order, brezis-lieb or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// gaussian, spikes:K or bump:WIDTH.
    #[arg(long)]
    pub distribution: Option<String>,
    #[arg(long)]
    pub support_radius: Option<u32>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub second_order_p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    pub kind: Option<PlotKind>,
    /// Input files for plot.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))
    }

    /// The configuration for `command`: file values, then flags on top.
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self> {
        let mut c = match &flags.config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        c.command = Some(command);
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &flags.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        take!(group, radius, alpha, p, family, seed, out_dir, method, trials, suite, distribution, p_values, alpha_values, radii);
        macro_rules! take_opt {
            ($($field:ident),*) => {$(
                if flags.$field.is_some() {
                    c.$field = flags.$field.clone();
                }
            )*};
        }
        take_opt!(kernel_cache, max_iter, step0, tol_residual, tol_stall, recenter_every, polish, support_radius, q, second_order_p, kind);
        c.equivalent |= flags.equivalent;
        c.allow_out_of_theorem |= flags.allow_out_of_theorem;
        if !flags.inputs.is_empty() {
            c.inputs = flags.inputs.clone();
        }
        if c.kernel_cache.is_none() {
            c.kernel_cache = std::env::var_os("CHOQUARD_CACHE_DIR").map(PathBuf::from);
        }
        Ok(c)
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        let mut s = SolveConfig { seed: self.seed, ..SolveConfig::default() };
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.step0 {
            s.step0 = v;
        }
        if let Some(v) = self.tol_residual {
            s.tol_residual = v;
        }
        if let Some(v) = self.tol_stall {
            s.tol_stall = v;
        }
        if let Some(v) = self.recenter_every {
            s.recenter_every = v;
        }
        if let Some(v) = self.polish {
            s.polish = v;
        }
        s.validate()?;
        Ok(s)
    }
}
