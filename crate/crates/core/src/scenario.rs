//! Scenario configuration, seeded runs over (qubit, field, polarization)
//! combinations, and the CSV/JSON outputs.
//!
//! One bath geometry is drawn from the seed and shared by every combination
//! of a run. Outputs are a pure function of the configuration: rerunning a
//! manifest reproduces its CSV files byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{QubitAmplitudes, QubitChoice};
use crate::env_model::{
    generate_bath, set_uniform_polarization, CouplingRegistry, EnvironmentModel,
    PhysicalConstants, MAX_NUCLEI,
};
use crate::metrics::{
    metric_series, uniform_grid, MetricSeries, RatioFit, SignAgreement,
    DERIVATIVE_SIGN_THRESHOLD,
};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "t_us,negativity,one_minus_fidelity,coherence_mod,commutator_norm,d_negativity_dt,d_one_minus_fidelity_dt";

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Numbers in every CSV: 12 significant digits, scientific notation.
pub fn fmt_num(x: f64) -> String {
    // Avoid "-0" noise in derivative columns.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shell {
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for Shell {
    fn default() -> Self {
        Shell {
            r_min: 2.5,
            r_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub nucleus_count: usize,
    pub qubits: Vec<QubitChoice>,
    /// Fields along z in T; one series per value.
    pub b_z: Vec<f64>,
    pub polarizations: Vec<f64>,
    /// µs.
    pub t_max: f64,
    /// Number of grid points on `[0, t_max]`.
    pub n_steps: usize,
    pub amplitudes: QubitAmplitudes,
    /// Å.
    pub shell: Shell,
    pub coupling_form: String,
    pub constants: PhysicalConstants,
    pub output_path: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            nucleus_count: 5,
            qubits: QubitChoice::ALL.to_vec(),
            b_z: vec![0.0, 0.2],
            polarizations: vec![0.1, 0.4, 0.7, 1.0],
            t_max: 50.0,
            n_steps: 501,
            amplitudes: QubitAmplitudes::default(),
            shell: Shell::default(),
            coupling_form: "standard".to_string(),
            constants: PhysicalConstants::default(),
            output_path: PathBuf::from("out"),
        }
    }
}

impl ScenarioConfig {
    /// The preset used for the published figure protocol.
    pub fn paper_figures(outdir: impl Into<PathBuf>, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            output_path: outdir.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nucleus_count == 0 || self.nucleus_count > MAX_NUCLEI {
            return Err(Error::config(
                "nucleus_count",
                format!("must be between 1 and {MAX_NUCLEI}, got {}", self.nucleus_count),
            ));
        }
        if self.qubits.is_empty() {
            return Err(Error::config("qubits", "at least one qubit is required"));
        }
        if self.b_z.is_empty() {
            return Err(Error::config("b_z", "at least one field value is required"));
        }
        if let Some(b) = self.b_z.iter().find(|b| !b.is_finite()) {
            return Err(Error::config("b_z", format!("field must be finite, got {b}")));
        }
        if self.polarizations.is_empty() {
            return Err(Error::config(
                "polarizations",
                "at least one polarization is required",
            ));
        }
        if let Some(p) = self
            .polarizations
            .iter()
            .find(|p| !(-1.0..=1.0).contains(*p))
        {
            return Err(Error::config(
                "polarizations",
                format!("each polarization must lie in [-1, 1], got {p}"),
            ));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config(
                "t_max",
                format!("must be positive, got {}", self.t_max),
            ));
        }
        if self.n_steps < 3 {
            return Err(Error::config(
                "n_steps",
                format!(
                    "at least 3 grid points are needed for central differences, got {}",
                    self.n_steps
                ),
            ));
        }
        let Shell { r_min, r_max } = self.shell;
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::config(
                "shell",
                format!("require 0 < r_min < r_max, got r_min={r_min}, r_max={r_max}"),
            ));
        }
        self.constants.validate()?;
        CouplingRegistry::default().get(&self.coupling_form)?;
        Ok(())
    }

    /// Every (qubit, field, polarization) combination in output order.
    pub fn combinations(&self) -> Vec<SeriesKey> {
        let mut keys = Vec::new();
        for &qubit in &self.qubits {
            for &b_z in &self.b_z {
                for &polarization in &self.polarizations {
                    keys.push(SeriesKey {
                        qubit,
                        b_z,
                        polarization,
                    });
                }
            }
        }
        keys
    }

    /// Draws the bath geometry for this configuration (unpolarized, zero field).
    pub fn environment(&self) -> Result<EnvironmentModel> {
        let form = CouplingRegistry::default().get(&self.coupling_form)?;
        let positions = generate_bath(
            self.seed,
            self.nucleus_count,
            self.shell.r_min,
            self.shell.r_max,
            &self.constants,
        )?;
        EnvironmentModel::from_positions(&positions, 0.0, self.constants, form.as_ref())
    }
}

/// Parses a TOML configuration, fills defaults and validates it.
pub fn validate_config(raw: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(raw).map_err(|e| Error::Parse {
        source_name: "configuration".into(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    validate_config(&raw).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            source_name: path.display().to_string(),
            message,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesKey {
    pub qubit: QubitChoice,
    pub b_z: f64,
    pub polarization: f64,
}

impl SeriesKey {
    pub fn file_name(&self) -> String {
        format!(
            "series_{}_bz{:.3}_p{:.3}.csv",
            self.qubit.tag(),
            self.b_z,
            self.polarization
        )
    }
}

pub fn series_csv(series: &MetricSeries) -> String {
    let mut out = String::with_capacity(series.points.len() * 128);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, p) in series.points.iter().enumerate() {
        let row = [
            p.t,
            p.negativity,
            p.one_minus_fidelity,
            p.coherence_mod,
            p.commutator_norm,
            series.d_negativity_dt[i],
            series.d_one_minus_fidelity_dt[i],
        ];
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusRecord {
    pub position_angstrom: [f64; 3],
    pub coupling_mhz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub file: String,
    #[serde(flatten)]
    pub key: SeriesKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub config: ScenarioConfig,
    pub coupling_form_description: String,
    pub nuclei: Vec<NucleusRecord>,
    pub series: Vec<SeriesRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSummary {
    pub file: String,
    #[serde(flatten)]
    pub key: SeriesKey,
    pub max_negativity: f64,
    pub max_one_minus_fidelity: f64,
    pub min_coherence_mod: f64,
    pub max_commutator_norm: f64,
    pub derivative_sign_agreement: SignAgreement,
    pub negativity_vs_one_minus_fidelity: RatioFit,
}

pub struct RunOutput {
    pub manifest: RunManifest,
    pub series: Vec<(SeriesKey, MetricSeries)>,
}

impl RunOutput {
    pub fn summary(&self) -> Vec<SeriesSummary> {
        self.series
            .iter()
            .map(|(key, s)| SeriesSummary {
                file: key.file_name(),
                key: *key,
                max_negativity: s.max_negativity(),
                max_one_minus_fidelity: s.max_one_minus_fidelity(),
                min_coherence_mod: s.min_coherence(),
                max_commutator_norm: s
                    .points
                    .iter()
                    .map(|p| p.commutator_norm)
                    .fold(0.0, f64::max),
                derivative_sign_agreement: s.sign_agreement(DERIVATIVE_SIGN_THRESHOLD),
                negativity_vs_one_minus_fidelity: s.ratio_fit(1e-6),
            })
            .collect()
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&MetricSeries> {
        self.series.iter().find(|(k, _)| k == key).map(|(_, s)| s)
    }
}

/// Computes every series of `config` without touching the filesystem.
pub fn compute_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let base = config.environment()?;
    let grid = uniform_grid(config.t_max, config.n_steps)?;
    let series = config
        .combinations()
        .into_par_iter()
        .map(|key| {
            let env = set_uniform_polarization(&base.with_field(key.b_z), key.polarization)?;
            metric_series(&env, key.qubit, &config.amplitudes, &grid).map(|s| (key, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let form = CouplingRegistry::default().get(&config.coupling_form)?;
    let manifest = RunManifest {
        software: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config: config.clone(),
        coupling_form_description: form.describe().to_string(),
        nuclei: base
            .nuclei
            .iter()
            .map(|n| NucleusRecord {
                position_angstrom: n.position,
                coupling_mhz: n.coupling,
            })
            .collect(),
        series: series
            .iter()
            .map(|(key, _)| SeriesRecord {
                file: key.file_name(),
                key: *key,
            })
            .collect(),
    };
    Ok(RunOutput { manifest, series })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("manifest types serialize");
    s.push('\n');
    s
}

/// Runs every combination and writes one CSV per series into
/// `config.output_path`, then the manifest.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput> {
    let output = compute_scenario(config)?;
    let dir = &config.output_path;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (key, series) in &output.series {
        write_file(&dir.join(key.file_name()), &series_csv(series))?;
    }
    write_file(&dir.join(MANIFEST_FILE), &to_json(&output.manifest))?;
    Ok(output)
}

/// Reruns the configuration recorded in a manifest, writing into `outdir`.
/// Fails if the regenerated bath differs from the recorded one.
pub fn rerun_manifest(manifest: &RunManifest, outdir: &Path) -> Result<RunOutput> {
    let config = ScenarioConfig {
        output_path: outdir.to_path_buf(),
        ..manifest.config.clone()
    };
    let env = config.environment()?;
    let recorded: Vec<[f64; 3]> = manifest.nuclei.iter().map(|n| n.position_angstrom).collect();
    if env.positions() != recorded {
        return Err(Error::config(
            "nuclei",
            "regenerated bath positions differ from the manifest",
        ));
    }
    run_scenario(&config)
}

/// The published protocol: 5 nuclei, p in {0.1, 0.4, 0.7, 1}, B_z in
/// {0, 0.2} T, both qubits, equal superposition. Writes the 16 series, the
/// manifest and a summary with per-series maxima and derivative-sign
/// agreement.
pub fn paper_figures(outdir: &Path, seed: u64) -> Result<RunOutput> {
    let output = run_scenario(&ScenarioConfig::paper_figures(outdir, seed))?;
    write_summary(outdir, &output)?;
    Ok(output)
}

/// Writes `summary.json` for `output` into `dir`.
pub fn write_summary(dir: &Path, output: &RunOutput) -> Result<()> {
    write_file(&dir.join(SUMMARY_FILE), &to_json(&output.summary()))
}
