//! `levcs`: simulate, analyse and fit a levitated ellipsoid in a
//! coherent-scattering cavity.
//!
//! Failures print one line `error category=<c> code=<n> message="..."` on
//! stderr and exit with 2 (config), 3 (numeric), 4 (I/O) or 5 (fit).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levcs_core::analysis::heterodyne::heterodyne_timeseries;
use levcs_core::analysis::spectral::{spectrogram, welch_psd, write_psd_csv, write_spectrogram_csv, Window};
use levcs_core::config::PAPER_PRESET;
use levcs_core::dynamics::{col, read_trace, simulate, write_trace, TraceRecord};
use levcs_core::inference::{fit_geometry, write_fit_csv, FitProblem};
use levcs_core::linearized::{gamma_trap_depth, trap_frequencies, DOF_NAMES};
use levcs_core::sweep::{run_sweep, write_summary, SweepPlan};
use levcs_core::{Config, Error, Result};
use num_complex::Complex64;

#[derive(Debug, Parser)]
#[command(name = "levcs", version, about = "Levitated ellipsoid in a coherent-scattering cavity")]
struct Cli {
    /// Configuration file, or `paper_defaults` for the built-in preset.
    #[arg(long, global = true, default_value = PAPER_PRESET)]
    config: String,
    /// Overrides the configured 64-bit seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the Langevin equations and write `trace.csv`.
    Simulate {
        /// Write `trace.csv.gz` instead.
        #[arg(long)]
        gzip: bool,
    },
    /// Print the harmonic trap frequencies.
    Freqs,
    /// Welch PSD of one trace column.
    Psd(SpectralArgs),
    /// Spectrogram of one trace column, or of the heterodyne signal of a
    /// cavity mode (`--column a` or `--column b`).
    Spectrogram {
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Hop between columns in samples (default: half a segment).
        #[arg(long)]
        hop: Option<usize>,
        /// Highest mechanical frequency kept in the heterodyne band (Hz).
        #[arg(long, default_value_t = 4e5)]
        f_max: f64,
        #[arg(long)]
        gzip: bool,
    },
    /// Pressure sweep with equipartition calibration; writes `sweep_summary.csv`.
    Sweep,
    /// Fit the ellipsoid radii to the configured frequencies; writes `fit.csv`.
    Fit,
}

#[derive(Debug, Args)]
struct SpectralArgs {
    /// Trace file written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Column name from the trace header.
    #[arg(long, default_value = "det_split1")]
    column: String,
    #[arg(long, default_value_t = 8192)]
    segment: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value = "hann")]
    window: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('"', "'");
            eprintln!("error category={} code={} message=\"{message}\"", e.category(), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = Config::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_path(cli: &Cli, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    Ok(cli.out.join(name))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { gzip } => {
            let config = load_config(cli)?;
            let trace = simulate(&config)?;
            let path = out_path(cli, if *gzip { "trace.csv.gz" } else { "trace.csv" })?;
            write_trace(&trace, &path)?;
            println!("wrote {} ({} samples)", path.display(), trace.len());
        }
        Command::Freqs => {
            let config = load_config(cli)?;
            let model = config.model()?;
            let spectrum = trap_frequencies(&model)?;
            println!("dof\tf_hz\tconfined");
            for (i, f) in spectrum.frequencies_hz().iter().enumerate() {
                println!("{}\t{:.1}\t{}", DOF_NAMES[i], f, spectrum.confined[i]);
            }
            if spectrum.confined[5] {
                println!("# gamma trap depth {:.2} K", gamma_trap_depth(&model, &spectrum.equilibrium));
            }
        }
        Command::Psd(args) => {
            let trace = read_trace(&args.input)?;
            let series = column(&trace, &args.column)?;
            let window: Window = args.window.parse()?;
            let est = welch_psd(&series, trace.fs, args.segment, args.overlap, window)?;
            let path = out_path(cli, &format!("psd_{}.csv", args.column))?;
            write_psd_csv(&est, &path, &provenance(&trace, &args.input, &args.column))?;
            println!("wrote {}", path.display());
        }
        Command::Spectrogram {
            spectral: args,
            hop,
            f_max,
            gzip,
        } => {
            let trace = read_trace(&args.input)?;
            let series = match args.column.as_str() {
                "a" | "b" => {
                    let config = load_config(cli)?;
                    let (re, im) = if args.column == "a" {
                        (col::RE_A, col::IM_A)
                    } else {
                        (col::RE_B, col::IM_B)
                    };
                    let amp: Vec<_> = trace
                        .rows
                        .iter()
                        .map(|r| Complex64::new(r[re], r[im]))
                        .collect();
                    heterodyne_timeseries(&amp, config.detection.f_lo_hz, trace.fs, *f_max)?
                }
                name => column(&trace, name)?,
            };
            let window: Window = args.window.parse()?;
            let hop = hop.unwrap_or((args.segment / 2).max(1));
            let sg = spectrogram(&series, trace.fs, args.segment, hop, window)?;
            let name = format!("spectrogram_{}.csv{}", args.column, if *gzip { ".gz" } else { "" });
            let path = out_path(cli, &name)?;
            write_spectrogram_csv(&sg, &path, &provenance(&trace, &args.input, &args.column))?;
            println!("wrote {} ({} columns)", path.display(), sg.times.len());
        }
        Command::Sweep => {
            let config = load_config(cli)?;
            let plan = SweepPlan::from_config(&config);
            let result = run_sweep(&config, &plan)?;
            let path = out_path(cli, "sweep_summary.csv")?;
            write_summary(&result, &path)?;
            println!("pressure_mbar\tT_x_K\tT_y_K\tT_z_K\tT_alpha_K\tT_beta_K");
            for p in &result.points {
                let t: Vec<String> = p.temperatures.iter().map(|t| format!("{t:.3e}")).collect();
                println!("{:e}\t{}", p.pressure_mbar, t.join("\t"));
            }
            println!("wrote {}", path.display());
        }
        Command::Fit => {
            let config = load_config(cli)?;
            let problem = FitProblem::from_config(&config)?;
            let result = fit_geometry(&problem)?;
            print!("{}", result.report());
            let path = out_path(cli, "fit.csv")?;
            write_fit_csv(&result, &path, &[("config_hash".into(), config.hash())])?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn column(trace: &TraceRecord, name: &str) -> Result<Vec<f64>> {
    trace
        .column_by_name(name)
        .ok_or_else(|| Error::InvalidInput(format!("no column `{name}` in trace")))
}

fn provenance(trace: &TraceRecord, input: &Path, column: &str) -> Vec<(String, String)> {
    let mut p = trace.provenance.clone();
    p.push(("source".into(), input.display().to_string()));
    p.push(("column".into(), column.into()));
    p
}
