use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use physlice::experiment::{load_config_file, run_scenario, ExperimentConfig, OUTPUT_ENV};

/// Slice-level MI and link experiments on recursively polarized OFDM symbols.
///
/// Settings are layered: scenario preset, then `--config` file, then flags.
#[derive(Debug, Parser)]
#[command(name = "physlice", version)]
struct Cli {
    /// fig4, fig7, fig8, fig9, table1 or loopback.
    #[arg(long)]
    scenario: Option<String>,

    /// Flat `key = value` file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    n_fft: Option<usize>,

    /// Subcarrier spacing in Hz.
    #[arg(long)]
    delta_f: Option<f64>,

    /// etu, epa, flat or a profile file path.
    #[arg(long)]
    profile: Option<String>,

    /// SNR in dB; `inf` disables noise.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,

    #[arg(long)]
    runs: Option<usize>,

    /// Number of polarization levels, or `auto`.
    #[arg(long)]
    depth: Option<String>,

    /// Cyclic prefix length in samples, or `auto` for the channel length.
    #[arg(long)]
    cp: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// exact-fold or literal-paper.
    #[arg(long)]
    mode: Option<String>,

    /// Output directory [default: $PHYSLICE_OUT/<scenario> or physlice-out/<scenario>].
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,

    /// Loopback only: transmit zeros on this slice, e.g. `+-`.
    #[arg(long, allow_hyphen_values = true)]
    mute_slice: Option<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("n_fft", self.n_fft.map(|v| v.to_string()));
        push("delta_f", self.delta_f.map(|v| v.to_string()));
        push("profile", self.profile.clone());
        push("snr_db", self.snr_db.map(|v| v.to_string()));
        push("runs", self.runs.map(|v| v.to_string()));
        push("depth", self.depth.clone());
        push("cp", self.cp.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("mode", self.mode.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("workers", self.workers.map(|v| v.to_string()));
        push("mute_slice", self.mute_slice.clone());
        out
    }
}

fn run(cli: &Cli) -> physlice::Result<()> {
    let file_pairs = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => Vec::new(),
    };
    let config = ExperimentConfig::resolve(cli.scenario.as_deref(), &file_pairs, &cli.overrides())?;
    let report = run_scenario(&config)?;
    let mut text = format!("{}\n", report.outcome.summary());
    for path in &report.written {
        let _ = writeln!(text, "wrote {}", path.display());
    }
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = io::stdout().write_all(text.as_bytes());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("physlice: {e}");
            if cli.scenario.is_none() && cli.config.is_none() {
                eprintln!("hint: pass --scenario or --config (output root can be set with {OUTPUT_ENV})");
            }
            ExitCode::from(2)
        }
    }
}
