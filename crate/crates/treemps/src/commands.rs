//! The four subcommands. Each returns the process exit code.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use treemps_core::backend::Backend;
use treemps_core::complexity::{epsilon_slope, n_slope, BudgetInputs, Formula};
use treemps_core::learner::learn;
use treemps_core::mps::{cut_rank_profile, random_mps, MatrixProductState};
use treemps_core::{ComplexMatrix, Error, C64};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_OK, EXIT_PROPERTY};
use crate::format::{self, CircuitFile, MpsFile, ReportFile, CIRCUIT_VERSION, MPS_VERSION, REPORT_VERSION};
use crate::numfmt::cell;
use crate::suites::parse_suites;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub formats: BTreeMap<String, u32>,
    pub config_sha256: String,
    pub seed: u64,
    pub deviations: Vec<String>,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, deviations: Vec<String>, files: &[&str]) -> Result<(), CliError> {
    let mut outputs = BTreeMap::new();
    for name in files {
        outputs.insert((*name).to_string(), sha256_file(&dir.join(name))?);
    }
    let formats = BTreeMap::from([
        ("circuit".to_string(), CIRCUIT_VERSION),
        ("manifest".to_string(), MANIFEST_VERSION),
        ("mps".to_string(), MPS_VERSION),
        ("report".to_string(), REPORT_VERSION),
    ]);
    let manifest = Manifest {
        format: "treemps-manifest".into(),
        version: MANIFEST_VERSION,
        command: command.into(),
        formats,
        config_sha256: cfg.hash(),
        seed: cfg.seed(),
        deviations,
        outputs,
    };
    format::write_json(&dir.join("manifest.json"), &manifest)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn generate(cfg: &RunConfig) -> Result<MatrixProductState, CliError> {
    let mut mps = random_mps(&cfg.state_spec()?)?;
    mps.normalize()?;
    Ok(mps)
}

pub fn gen(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    let mps = generate(cfg)?;
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    format::write_json(&dir.join("state.json"), &MpsFile::from_mps(&mps))?;
    let line = match cut_rank_profile(&mps, 1e-20) {
        Ok(ranks) => format!("cut ranks {ranks:?}"),
        Err(Error::TooLarge(_)) => format!("bond dimensions {:?} (too large to expand for exact cut ranks)", mps.bond_dims()),
        Err(e) => return Err(e.into()),
    };
    writeln!(out, "{line}").ok();
    write_manifest(&dir, "gen", cfg, Vec::new(), &["state.json"])?;
    Ok(EXIT_OK)
}

/// Input state, optionally blended with the maximally mixed state.
fn learner_input(cfg: &RunConfig) -> Result<(Backend, usize), CliError> {
    let mut mps = match &cfg.input {
        Some(path) => format::read_mps(path)?,
        None => generate(cfg)?,
    };
    mps.normalize()?;
    let psi = mps.expand()?;
    let lambda = cfg.mixing()?;
    if lambda == 0.0 {
        return Ok((Backend::Pure(psi), mps.d()));
    }
    let dim = psi.len();
    if dim > treemps_core::backend::MAX_MIXED_DIM {
        return Err(Error::BackendTooLarge(format!("mixed input of dimension {dim}")).into());
    }
    let mut rho: ComplexMatrix = psi.projector().scaled(C64::new(1.0 - lambda, 0.0));
    for k in 0..dim {
        rho[(k, k)] += C64::new(lambda / dim as f64, 0.0);
    }
    Ok((Backend::Mixed(rho), mps.d()))
}

const SUMMARY_HEADER: [&str; 8] = ["seed", "n", "d", "D", "epsilon", "mode", "fidelity", "copies"];

fn append_summary(path: &Path, row: [String; 8]) -> Result<(), CliError> {
    let fresh = !path.exists();
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    if fresh {
        w.write_record(SUMMARY_HEADER).map_err(io)?;
    }
    w.write_record(&row).map_err(io)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn learn_cmd(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    let params = cfg.learn_params()?;
    let mode = cfg.oracle_mode()?;
    let (input, d) = learner_input(cfg)?;
    let (circuit, report) = learn(input, d, &params, &mode)?;
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    format::write_json(&dir.join("circuit.json"), &CircuitFile::from_circuit(&circuit))?;
    format::write_json(&dir.join("report.json"), &ReportFile::from_report(&report))?;
    append_summary(
        &dir.join("summary.csv"),
        [
            params.seed.to_string(),
            circuit.n.to_string(),
            d.to_string(),
            params.bond.to_string(),
            cell(params.epsilon),
            mode.name().to_string(),
            cell(report.final_fidelity),
            report.copies_used.to_string(),
        ],
    )?;
    write_manifest(&dir, "learn", cfg, report.deviations.clone(), &["circuit.json", "report.json", "summary.csv"])?;
    writeln!(
        out,
        "n = {}, p = {}, depth {}, fidelity {:.12}, copies {}",
        circuit.n, report.p, report.depth, report.final_fidelity, report.copies_used
    )
    .ok();
    for note in &report.deviations {
        writeln!(out, "deviation: {note}").ok();
    }
    Ok(EXIT_OK)
}

pub fn verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    let suites = parse_suites(cfg.suite.as_deref().unwrap_or("all"))?;
    let mut lines = Vec::new();
    let mut failed = 0;
    for suite in suites {
        let trials = cfg.trials.unwrap_or_else(|| suite.default_trials());
        for p in suite.run(trials) {
            failed += usize::from(!p.ok);
            lines.push(p.to_string());
        }
    }
    lines.push(format!("{} properties, {failed} failed", lines.len()));
    for l in &lines {
        writeln!(out, "{l}").ok();
    }
    if let Some(dir) = &cfg.out {
        prepare_dir(dir)?;
        let path = dir.join("verify.txt");
        fs::write(&path, lines.join("\n") + "\n").map_err(|e| CliError::io(&path, e))?;
        write_manifest(dir, "verify", cfg, Vec::new(), &["verify.txt"])?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PROPERTY })
}

pub const BUDGET_HEADER: [&str; 7] = ["formula", "n", "d", "D", "epsilon", "delta", "value"];
pub const SLOPE_HEADER: [&str; 7] = ["formula", "variable", "d", "D", "at", "fitted_slope", "nominal_slope"];

fn distinct<T: PartialEq + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Grid table, a blank line, then fitted log-log slopes in `n` and `1/epsilon`
/// at the first value of every other axis.
pub fn budget_csv(grid: &[BudgetInputs]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::input(e.to_string());
    w.write_record(BUDGET_HEADER).map_err(io)?;
    for x in grid {
        for f in Formula::ALL {
            let v = f.evaluate(x).map_err(|e| CliError::input(format!("{f} at n = {}, d = {}, D = {}: {e}", x.n, x.d, x.bond)))?;
            w.write_record([f.name().to_string(), x.n.to_string(), x.d.to_string(), x.bond.to_string(), cell(x.epsilon), cell(x.delta), cell(v)])
                .map_err(io)?;
        }
    }
    let mut bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    bytes.push(b'\n');
    let mut w = csv::Writer::from_writer(bytes);
    w.write_record(SLOPE_HEADER).map_err(io)?;
    let ns = distinct(grid.iter().map(|x| x.n));
    let eps = distinct(grid.iter().map(|x| x.epsilon));
    for (d, bond) in distinct(grid.iter().map(|x| (x.d, x.bond))) {
        let base = grid.iter().find(|x| x.d == d && x.bond == bond).copied().expect("grid point exists");
        for f in Formula::ALL {
            let (pn, pe) = f.exponents();
            if ns.len() >= 2 {
                let s = n_slope(f, &base, &ns, !f.has_log_correction())?;
                w.write_record([f.name(), "n", &d.to_string(), &bond.to_string(), &format!("epsilon={}", cell(base.epsilon)), &cell(s), &cell(pn)])
                    .map_err(io)?;
            }
            if eps.len() >= 2 {
                let s = epsilon_slope(f, &base, &eps)?;
                w.write_record([f.name(), "1/epsilon", &d.to_string(), &bond.to_string(), &format!("n={}", base.n), &cell(s), &cell(pe)])
                    .map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::input(e.to_string()))
}

pub fn budget(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    let text = budget_csv(&cfg.budget_grid()?)?;
    out.write_all(text.as_bytes()).ok();
    if let Some(dir) = &cfg.out {
        prepare_dir(dir)?;
        let path: PathBuf = dir.join("budget.csv");
        fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
        write_manifest(dir, "budget", cfg, Vec::new(), &["budget.csv"])?;
    }
    Ok(EXIT_OK)
}
