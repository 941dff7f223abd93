//! Run configuration: a flat TOML table, overridden key by key by flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use treemps_core::complexity::BudgetInputs;
use treemps_core::learner::{LearnParams, Variant};
use treemps_core::mps::{Boundary, StateKind, StateSpec};
use treemps_core::tomography::OracleMode;

use crate::error::CliError;

/// Every key is optional; absent keys fall back to [`RunConfig::defaults`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub bond: Option<usize>,
    pub boundary: Option<String>,
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub variant: Option<String>,
    pub mode: Option<String>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub audit: Option<bool>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub noise_scale: Option<f64>,
    pub copies: Option<u64>,
    pub psd: Option<bool>,
    pub block_size: Option<usize>,
    pub theta: Option<f64>,
    /// Weight of the maximally mixed state blended into the input.
    pub mixing: Option<f64>,
    pub budget_constant: Option<f64>,
    pub budget_n: Option<Vec<usize>>,
    pub budget_d: Option<Vec<usize>>,
    pub budget_bond: Option<Vec<usize>>,
    pub budget_epsilon: Option<Vec<f64>>,
    pub budget_delta: Option<f64>,
    pub suite: Option<String>,
    pub trials: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn defaults() -> Self {
        RunConfig {
            n: Some(12),
            d: Some(2),
            bond: Some(2),
            boundary: Some("open".into()),
            kind: Some("random".into()),
            seed: Some(0),
            variant: Some("exact".into()),
            mode: Some("exact".into()),
            epsilon: Some(0.2),
            delta: Some(0.1),
            audit: Some(false),
            out: None,
            input: None,
            noise_scale: Some(1.0),
            copies: Some(100_000),
            psd: Some(false),
            block_size: None,
            theta: None,
            mixing: Some(0.0),
            budget_constant: Some(1.0),
            budget_n: Some((6..=12).map(|k| 1usize << k).collect()),
            budget_d: Some(vec![2]),
            budget_bond: Some(vec![2]),
            budget_epsilon: Some(vec![0.4, 0.2, 0.1, 0.05, 0.025]),
            budget_delta: Some(0.1),
            suite: Some("all".into()),
            trials: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    /// Keys set in `top` win.
    pub fn overlay(self, top: RunConfig) -> Self {
        overlay!(
            self, top, n, d, bond, boundary, kind, seed, variant, mode, epsilon, delta, audit, out, input,
            noise_scale, copies, psd, block_size, theta, mixing, budget_constant, budget_n, budget_d,
            budget_bond, budget_epsilon, budget_delta, suite, trials
        )
    }

    /// Defaults, then the file, then the flags.
    pub fn resolve(file: Option<&Path>, flags: RunConfig) -> Result<Self, CliError> {
        let mut cfg = Self::defaults();
        if let Some(path) = file {
            cfg = cfg.overlay(Self::load(path)?);
        }
        Ok(cfg.overlay(flags))
    }

    /// SHA-256 of the effective configuration in canonical JSON. The output
    /// directory is left out so reruns elsewhere hash the same.
    pub fn hash(&self) -> String {
        let keyed = RunConfig { out: None, ..self.clone() };
        let text = serde_json::to_string(&keyed).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn need<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
        value.clone().ok_or_else(|| CliError::input(format!("missing `{key}`")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn state_spec(&self) -> Result<StateSpec, CliError> {
        let spec = StateSpec {
            n: Self::need(&self.n, "n")?,
            d: Self::need(&self.d, "d")?,
            bond: Self::need(&self.bond, "bond")?,
            boundary: Self::need(&self.boundary, "boundary")?.parse::<Boundary>()?,
            seed: self.seed(),
            kind: Self::need(&self.kind, "kind")?.parse::<StateKind>()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn learn_params(&self) -> Result<LearnParams, CliError> {
        let variant: Variant = Self::need(&self.variant, "variant")?.parse()?;
        let mut params = LearnParams::new(
            Self::need(&self.bond, "bond")?,
            Self::need(&self.epsilon, "epsilon")?,
            Self::need(&self.delta, "delta")?,
            variant,
        );
        params.block_size = self.block_size;
        params.theta = self.theta;
        params.audit = self.audit.unwrap_or(false);
        params.seed = self.seed();
        params.budget_constant = self.budget_constant.unwrap_or(1.0);
        params.noise_scale = self.noise_scale.unwrap_or(1.0);
        params.validate()?;
        Ok(params)
    }

    /// The learner sets the noise level per call, so the level here is a
    /// placeholder.
    pub fn oracle_mode(&self) -> Result<OracleMode, CliError> {
        let seed = self.seed();
        match Self::need(&self.mode, "mode")?.as_str() {
            "exact" => Ok(OracleMode::Exact),
            "noise" => Ok(OracleMode::BoundedNoise { eta: 0.5, seed, psd: self.psd.unwrap_or(false) }),
            "sample" => Ok(OracleMode::FiniteSample { copies: Self::need(&self.copies, "copies")?, seed }),
            other => Err(CliError::input(format!("unknown mode `{other}` (expected exact, noise or sample)"))),
        }
    }

    pub fn mixing(&self) -> Result<f64, CliError> {
        let lambda = self.mixing.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(CliError::input(format!("mixing {lambda} outside [0, 1]")));
        }
        Ok(lambda)
    }

    /// Every point of the budget grid, in row order.
    pub fn budget_grid(&self) -> Result<Vec<BudgetInputs>, CliError> {
        let ns = Self::need(&self.budget_n, "budget_n")?;
        let ds = Self::need(&self.budget_d, "budget_d")?;
        let bonds = Self::need(&self.budget_bond, "budget_bond")?;
        let eps = Self::need(&self.budget_epsilon, "budget_epsilon")?;
        let delta = Self::need(&self.budget_delta, "budget_delta")?;
        if ns.is_empty() || ds.is_empty() || bonds.is_empty() || eps.is_empty() {
            return Err(CliError::input("budget grid has an empty axis"));
        }
        let mut grid = Vec::new();
        for &n in &ns {
            for &d in &ds {
                for &bond in &bonds {
                    for &epsilon in &eps {
                        let x = BudgetInputs {
                            constant: self.budget_constant.unwrap_or(1.0),
                            ..BudgetInputs::new(n, d, bond, epsilon, delta)
                        };
                        x.validate()?;
                        grid.push(x);
                    }
                }
            }
        }
        Ok(grid)
    }
}
