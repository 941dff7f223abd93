//! Command-line arguments. Every flag maps onto a [`RunConfig`] key.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "treemps", version, about = "Learn matrix product states with log-depth circuits")]
pub struct Cli {
    /// TOML file with run parameters; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Tomography oracle: exact, noise or sample.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Keep per-layer snapshots and record audit quantities.
    #[arg(long, global = true)]
    pub audit: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an MPS and print its cut-rank profile.
    Gen(Instance),
    /// Learn a circuit for a state.
    Learn(LearnArgs),
    /// Run a property suite.
    Verify(VerifyArgs),
    /// Tabulate sample-complexity formulas over a grid.
    Budget(BudgetArgs),
}

#[derive(Debug, Args)]
pub struct Instance {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub bond: Option<usize>,
    /// open or periodic
    #[arg(long)]
    pub boundary: Option<String>,
    /// random, ghz, product or w-state
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub instance: Instance,
    /// MPS file to learn instead of a generated state.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// exact or closest
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Measurements per block in sample mode.
    #[arg(long)]
    pub copies: Option<u64>,
    /// Keep noisy estimates positive semidefinite.
    #[arg(long)]
    pub psd: bool,
    /// Weight of the maximally mixed state blended into the input.
    #[arg(long)]
    pub mixing: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub budget_constant: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// rank, eckart-young, monotonicity, layer-bounds, lambert, plan, dominance or all
    pub suite: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub bond: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub budget_constant: Option<f64>,
}

impl Instance {
    fn apply(&self, c: &mut RunConfig) {
        c.n = self.n;
        c.d = self.d;
        c.bond = self.bond;
        c.boundary.clone_from(&self.boundary);
        c.kind.clone_from(&self.kind);
    }
}

impl Cli {
    /// The keys set on the command line.
    pub fn flags(&self) -> RunConfig {
        let mut c = RunConfig {
            seed: self.seed,
            out: self.out.clone(),
            mode: self.mode.clone(),
            audit: self.audit.then_some(true),
            ..RunConfig::default()
        };
        match &self.command {
            Command::Gen(i) => i.apply(&mut c),
            Command::Learn(a) => {
                a.instance.apply(&mut c);
                c.input.clone_from(&a.input);
                c.variant.clone_from(&a.variant);
                c.epsilon = a.epsilon;
                c.delta = a.delta;
                c.block_size = a.block_size;
                c.noise_scale = a.noise_scale;
                c.copies = a.copies;
                c.psd = a.psd.then_some(true);
                c.mixing = a.mixing;
                c.theta = a.theta;
                c.budget_constant = a.budget_constant;
            }
            Command::Verify(a) => {
                c.suite.clone_from(&a.suite);
                c.trials = a.trials;
            }
            Command::Budget(a) => {
                c.budget_n.clone_from(&a.n);
                c.budget_d.clone_from(&a.d);
                c.budget_bond.clone_from(&a.bond);
                c.budget_epsilon.clone_from(&a.epsilon);
                c.budget_delta = a.delta;
                c.budget_constant = a.budget_constant;
            }
        }
        c
    }

    pub fn run(&self, out: &mut dyn Write) -> Result<u8, CliError> {
        let cfg = RunConfig::resolve(self.config.as_deref(), self.flags())?;
        match self.command {
            Command::Gen(_) => commands::gen(&cfg, out),
            Command::Learn(_) => commands::learn_cmd(&cfg, out),
            Command::Verify(_) => commands::verify(&cfg, out),
            Command::Budget(_) => commands::budget(&cfg, out),
        }
    }
}
