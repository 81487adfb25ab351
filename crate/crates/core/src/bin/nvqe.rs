use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nvqe::dynamics::QubitChoice;
use nvqe::scenario::{
    load_config, rerun_manifest, run_scenario, write_summary, RunManifest, RunOutput,
    ScenarioConfig,
};
use nvqe::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    PaperFigures,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QubitArg {
    #[value(name = "01")]
    ZeroOne,
    #[value(name = "-11")]
    MinusOneOne,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    Standard,
    Paper,
}

/// Negativity versus conditional-state fidelity for an NV-center qubit in a
/// small ¹³C bath.
#[derive(Debug, Parser)]
#[command(name = "nvqe", version)]
struct Cli {
    /// TOML scenario file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Run a named preset instead of a config file.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,

    /// Rerun the scenario recorded in a manifest.json.
    #[arg(long, conflicts_with_all = ["config", "preset"])]
    manifest: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    outdir: Option<PathBuf>,

    #[arg(long, value_enum, allow_hyphen_values = true)]
    qubit: Option<QubitArg>,

    /// Field(s) along z in tesla, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bz: Option<Vec<f64>>,

    /// Bath polarization(s), comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    polarizations: Option<Vec<f64>>,

    /// End of the time grid in µs.
    #[arg(long)]
    tmax: Option<f64>,

    /// Number of grid points.
    #[arg(long)]
    steps: Option<usize>,

    #[arg(long, value_enum)]
    coupling_form: Option<CouplingArg>,

    /// Also write the bath geometry (positions and couplings) as CSV.
    #[arg(long)]
    geometry: Option<PathBuf>,
}

impl Cli {
    fn apply_overrides(&self, config: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.outdir {
            config.output_path = dir.clone();
        }
        if let Some(q) = self.qubit {
            config.qubits = match q {
                QubitArg::ZeroOne => vec![QubitChoice::ZeroOne],
                QubitArg::MinusOneOne => vec![QubitChoice::MinusOneOne],
                QubitArg::Both => QubitChoice::ALL.to_vec(),
            };
        }
        if let Some(b) = &self.bz {
            config.b_z = b.clone();
        }
        if let Some(p) = &self.polarizations {
            config.polarizations = p.clone();
        }
        if let Some(t) = self.tmax {
            config.t_max = t;
        }
        if let Some(n) = self.steps {
            config.n_steps = n;
        }
        if let Some(form) = self.coupling_form {
            config.coupling_form = match form {
                CouplingArg::Standard => "standard",
                CouplingArg::Paper => "paper",
            }
            .to_string();
        }
    }
}

fn write_geometry(path: &PathBuf, config: &ScenarioConfig) -> Result<()> {
    let env = config.environment()?;
    std::fs::write(path, env.geometry_csv()).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })
}

fn run(cli: &Cli) -> Result<(RunOutput, PathBuf)> {
    if let Some(path) = &cli.manifest {
        let manifest = RunManifest::load(path)?;
        let outdir = cli
            .outdir
            .clone()
            .unwrap_or_else(|| manifest.config.output_path.clone());
        let out = rerun_manifest(&manifest, &outdir)?;
        return Ok((out, outdir));
    }

    let mut config = match (&cli.preset, &cli.config) {
        (Some(Preset::PaperFigures), _) => ScenarioConfig::paper_figures("out", 1),
        (None, Some(path)) => load_config(path)?,
        (None, None) => ScenarioConfig::default(),
    };
    cli.apply_overrides(&mut config);
    config.validate()?;

    if let Some(path) = &cli.geometry {
        write_geometry(path, &config)?;
    }
    let outdir = config.output_path.clone();
    let out = run_scenario(&config)?;
    if cli.preset.is_some() {
        write_summary(&outdir, &out)?;
    }
    Ok((out, outdir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, outdir)) => {
            for s in out.summary() {
                let agreement = s
                    .derivative_sign_agreement
                    .fraction
                    .map_or("n/a".to_string(), |f| format!("{:.3}", f));
                println!(
                    "{:<36} max N = {:.4e}  max 1-F = {:.4e}  sign agreement = {}",
                    s.file, s.max_negativity, s.max_one_minus_fidelity, agreement
                );
            }
            println!(
                "wrote {} series to {}",
                out.series.len(),
                outdir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
