//! Versioned JSON files for states, circuits and reports.
//!
//! Complex numbers are `[re, im]` pairs. Every float is written with 17
//! significant digits so files round-trip bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use treemps_core::disentangler::Disentangler;
use treemps_core::learner::{BlockRecord, CircuitDescription, CircuitMetadata, LearnReport, Variant};
use treemps_core::mps::{Boundary, MatrixProductState, SiteTensor};
use treemps_core::plan::plan_layers;
use treemps_core::tomography::OracleMode;
use treemps_core::{ComplexMatrix, ComplexVector, C64};

use crate::error::CliError;
use crate::numfmt;

pub const MPS_FORMAT: &str = "treemps-mps";
pub const MPS_VERSION: u32 = 1;
pub const CIRCUIT_FORMAT: &str = "treemps-circuit";
pub const CIRCUIT_VERSION: u32 = 1;
pub const REPORT_FORMAT: &str = "treemps-report";
pub const REPORT_VERSION: u32 = 1;

type Pair = [f64; 2];

fn pairs(values: &[C64]) -> Vec<Pair> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

fn complexes(values: &[Pair]) -> Vec<C64> {
    values.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

fn check_header(kind: &str, found: &str, want: &str, version: u32, supported: u32) -> Result<(), CliError> {
    if found != want {
        return Err(CliError::input(format!("{kind}: format `{found}`, expected `{want}`")));
    }
    if version != supported {
        return Err(CliError::input(format!("{kind}: version {version} is not supported (expected {supported})")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteFile {
    pub left: usize,
    pub right: usize,
    pub physical: usize,
    /// Row-major over `(s, a, b)`.
    pub entries: Vec<Pair>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpsFile {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub boundary: String,
    pub sites: Vec<SiteFile>,
}

impl MpsFile {
    pub fn from_mps(mps: &MatrixProductState) -> Self {
        let sites = mps
            .sites()
            .iter()
            .map(|s| SiteFile {
                left: s.left(),
                right: s.right(),
                physical: s.physical(),
                entries: s.matrices().iter().flat_map(|m| pairs(m.as_slice())).collect(),
            })
            .collect();
        MpsFile {
            format: MPS_FORMAT.into(),
            version: MPS_VERSION,
            n: mps.n(),
            d: mps.d(),
            boundary: mps.boundary().to_string(),
            sites,
        }
    }

    pub fn to_mps(&self) -> Result<MatrixProductState, CliError> {
        check_header("mps file", &self.format, MPS_FORMAT, self.version, MPS_VERSION)?;
        if self.sites.len() != self.n {
            return Err(CliError::input(format!("mps file: {} sites for n = {}", self.sites.len(), self.n)));
        }
        let boundary: Boundary = self.boundary.parse()?;
        let mut tensors = Vec::with_capacity(self.n);
        for (k, s) in self.sites.iter().enumerate() {
            let block = s.left * s.right;
            if s.entries.len() != s.physical * block {
                return Err(CliError::input(format!(
                    "mps file: site {k} has {} entries for shape {}x{}x{}",
                    s.entries.len(),
                    s.physical,
                    s.left,
                    s.right
                )));
            }
            let mats = s
                .entries
                .chunks(block.max(1))
                .map(|c| ComplexMatrix::from_vec(s.left, s.right, complexes(c)))
                .collect();
            tensors.push(SiteTensor::new(mats)?);
        }
        Ok(MatrixProductState::from_sites(self.d, boundary, tensors)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanHeader {
    pub depth: usize,
    pub ell1: usize,
    pub s1: usize,
    pub k1: usize,
    pub s1_amended: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitaryFile {
    pub dim: usize,
    pub kept_qudits: usize,
    pub entries: Vec<Pair>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockFile {
    pub j: usize,
    pub i: usize,
    pub support: Vec<usize>,
    pub projected_sites: Vec<usize>,
    pub carried: Vec<usize>,
    pub register_offset: usize,
    pub unitary: Option<UnitaryFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copies: Option<u64>,
}

impl ModeFile {
    pub fn from_mode(mode: &OracleMode) -> Self {
        let mut out = ModeFile { name: mode.name().into(), eta: None, seed: mode.seed(), psd: None, copies: None };
        match *mode {
            OracleMode::Exact => {}
            OracleMode::BoundedNoise { eta, psd, .. } => {
                out.eta = Some(eta);
                out.psd = Some(psd);
            }
            OracleMode::FiniteSample { copies, .. } => out.copies = Some(copies),
        }
        out
    }

    pub fn to_mode(&self) -> Result<OracleMode, CliError> {
        let missing = |field: &str| CliError::input(format!("mode `{}` needs `{field}`", self.name));
        Ok(match self.name.as_str() {
            "exact" => OracleMode::Exact,
            "noise" => OracleMode::BoundedNoise {
                eta: self.eta.ok_or_else(|| missing("eta"))?,
                seed: self.seed.ok_or_else(|| missing("seed"))?,
                psd: self.psd.unwrap_or(false),
            },
            "sample" => OracleMode::FiniteSample {
                copies: self.copies.ok_or_else(|| missing("copies"))?,
                seed: self.seed.ok_or_else(|| missing("seed"))?,
            },
            other => return Err(CliError::input(format!("unknown oracle mode `{other}`"))),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataFile {
    pub variant: String,
    pub mode: ModeFile,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub bond: usize,
    pub eta: f64,
    pub tau: f64,
    pub theta: Option<f64>,
    pub deviations: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub plan: Option<PlanHeader>,
    pub blocks: Vec<BlockFile>,
    pub final_sites: Vec<usize>,
    pub residual: Vec<Pair>,
    pub metadata: MetadataFile,
}

impl CircuitFile {
    pub fn from_circuit(c: &CircuitDescription) -> Self {
        let plan = c.plan.as_ref().map(|p| PlanHeader {
            depth: p.depth,
            ell1: p.ell1,
            s1: p.s1,
            k1: p.k1,
            s1_amended: p.s1_amended,
        });
        let blocks = c
            .layers
            .iter()
            .flatten()
            .map(|r| BlockFile {
                j: r.j,
                i: r.i,
                support: r.support.clone(),
                projected_sites: r.projected_sites.clone(),
                carried: r.carried.clone(),
                register_offset: r.register_offset,
                unitary: r.disentangler.as_ref().map(|u| UnitaryFile {
                    dim: u.dim(),
                    kept_qudits: u.kept_qudits,
                    entries: pairs(u.unitary.as_slice()),
                }),
            })
            .collect();
        let m = &c.metadata;
        CircuitFile {
            format: CIRCUIT_FORMAT.into(),
            version: CIRCUIT_VERSION,
            n: c.n,
            d: c.d,
            p: c.p,
            plan,
            blocks,
            final_sites: c.final_sites.clone(),
            residual: pairs(c.residual.as_slice()),
            metadata: MetadataFile {
                variant: m.variant.to_string(),
                mode: ModeFile::from_mode(&m.mode),
                seed: m.seed,
                epsilon: m.epsilon,
                delta: m.delta,
                bond: m.bond,
                eta: m.eta,
                tau: m.tau,
                theta: m.theta,
                deviations: m.deviations.clone(),
            },
        }
    }

    /// Rebuilds the circuit; the plan is recomputed and must match the header.
    pub fn to_circuit(&self) -> Result<CircuitDescription, CliError> {
        check_header("circuit file", &self.format, CIRCUIT_FORMAT, self.version, CIRCUIT_VERSION)?;
        let plan = match &self.plan {
            None => None,
            Some(h) => {
                let plan = plan_layers(self.n, self.d, self.p)?;
                let got = PlanHeader { depth: plan.depth, ell1: plan.ell1, s1: plan.s1, k1: plan.k1, s1_amended: plan.s1_amended };
                if &got != h {
                    return Err(CliError::input(format!("circuit file: plan header {h:?} disagrees with {got:?}")));
                }
                Some(plan)
            }
        };
        let depth = plan.as_ref().map_or(0, |p| p.depth);
        let mut layers: Vec<Vec<BlockRecord>> = vec![Vec::new(); depth];
        for b in &self.blocks {
            if b.j == 0 || b.j > depth {
                return Err(CliError::input(format!("circuit file: block in layer {} of {depth}", b.j)));
            }
            let disentangler = match &b.unitary {
                None => None,
                Some(u) => {
                    if u.entries.len() != u.dim * u.dim {
                        return Err(CliError::input(format!("circuit file: {} entries for dimension {}", u.entries.len(), u.dim)));
                    }
                    let m = ComplexMatrix::from_vec(u.dim, u.dim, complexes(&u.entries));
                    Some(Disentangler::from_unitary(m, self.d, u.kept_qudits)?)
                }
            };
            layers[b.j - 1].push(BlockRecord {
                j: b.j,
                i: b.i,
                support: b.support.clone(),
                projected_sites: b.projected_sites.clone(),
                carried: b.carried.clone(),
                register_offset: b.register_offset,
                disentangler,
            });
        }
        let m = &self.metadata;
        let circuit = CircuitDescription {
            n: self.n,
            d: self.d,
            p: self.p,
            plan,
            layers,
            final_sites: self.final_sites.clone(),
            residual: ComplexVector::from_vec(complexes(&self.residual)),
            metadata: CircuitMetadata {
                variant: m.variant.parse::<Variant>()?,
                mode: m.mode.to_mode()?,
                seed: m.seed,
                epsilon: m.epsilon,
                delta: m.delta,
                bond: m.bond,
                eta: m.eta,
                tau: m.tau,
                theta: m.theta,
                deviations: m.deviations.clone(),
            },
        };
        circuit.check()?;
        Ok(circuit)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockReportFile {
    pub i: usize,
    pub support: Vec<usize>,
    pub success_mass: f64,
    pub copies: u64,
    pub simulated_copies: u64,
    pub trace_distance: Option<f64>,
    pub discarded_weight: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LayerReportFile {
    pub j: usize,
    pub mass_before: f64,
    pub mass_after: f64,
    pub copies: u64,
    pub fidelity_drop_bound: f64,
    pub blocks: Vec<BlockReportFile>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub final_fidelity: f64,
    pub copies_used: u64,
    pub simulated_copies: u64,
    pub final_copies: u64,
    pub final_mass: f64,
    pub eta: f64,
    pub tau: f64,
    pub p: usize,
    pub depth: usize,
    /// Trace of the residual state after each layer, from the audit trail.
    pub audit_masses: Option<Vec<f64>>,
    pub deviations: Vec<String>,
    pub per_layer: Vec<LayerReportFile>,
}

impl ReportFile {
    pub fn from_report(r: &LearnReport) -> Self {
        ReportFile {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            final_fidelity: r.final_fidelity,
            copies_used: r.copies_used,
            simulated_copies: r.simulated_copies,
            final_copies: r.final_copies,
            final_mass: r.final_mass,
            eta: r.eta,
            tau: r.tau,
            p: r.p,
            depth: r.depth,
            audit_masses: r.audit.as_ref().map(|a| a.snapshots.iter().map(|s| s.mass()).collect()),
            deviations: r.deviations.clone(),
            per_layer: r
                .per_layer
                .iter()
                .map(|l| LayerReportFile {
                    j: l.j,
                    mass_before: l.mass_before,
                    mass_after: l.mass_after,
                    copies: l.copies(),
                    fidelity_drop_bound: l.fidelity_drop_bound,
                    blocks: l
                        .blocks
                        .iter()
                        .map(|b| BlockReportFile {
                            i: b.i,
                            support: b.support.clone(),
                            success_mass: b.success_mass,
                            copies: b.copies,
                            simulated_copies: b.simulated_copies,
                            trace_distance: b.trace_distance,
                            discarded_weight: b.discarded_weight,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = numfmt::to_json(value).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_mps(path: &Path) -> Result<MatrixProductState, CliError> {
    read_json::<MpsFile>(path)?.to_mps()
}

pub fn read_circuit(path: &Path) -> Result<CircuitDescription, CliError> {
    read_json::<CircuitFile>(path)?.to_circuit()
}
