//! Command-line front end: sweeps, figure data, oracle adjudication,
//! and estimator benchmarks.
//!
//! Exit codes: 0 success, 2 configuration, 3 numerical budget, 4 I/O.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rqfi::beamsplitter::f_functions;
use rqfi::measurement::{crb_benchmark, parity_fisher_information};
use rqfi::oracle::{adjudicate_tmsv, qfi_sld};
use rqfi::qfi::{self, TmsvVariant};
use rqfi::{Error, ImagingSystem, PsfModel, SourceSpec};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "rqfi", version, about = "Quantum precision limits for two-point-source separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PSF overlap functionals and f-functions over a separation grid
    Functionals(FunctionalsArgs),
    /// Normalized QFI upper bound over a separation grid
    Bound(BoundArgs),
    /// Exact QFI of a source family over a separation grid
    Qfi(QfiArgs),
    /// Fock-space SLD oracle: TMSV variant adjudication
    Oracle(OracleArgs),
    /// Monte Carlo maximum-likelihood benchmark of the classical CRB
    Measure(MeasureArgs),
    /// Regenerate all figure datasets into a directory
    Figures(FiguresArgs),
}

#[derive(Args)]
struct PsfArgs {
    /// `gaussian` or a path to a CSV of `x,amplitude` samples
    #[arg(long, default_value = "gaussian")]
    psf: String,
    /// Rayleigh length of the Gaussian PSF
    #[arg(long, default_value_t = 1.0)]
    xr: f64,
}

impl PsfArgs {
    fn build(&self) -> Result<PsfModel, CliError> {
        if self.psf == "gaussian" {
            return PsfModel::gaussian(self.xr).map_err(CliError::config);
        }
        let text = std::fs::read_to_string(&self.psf)
            .map_err(|e| CliError::io(format!("reading {}: {e}", self.psf)))?;
        PsfModel::from_csv_str(&text, Default::default()).map_err(CliError::config)
    }
}

#[derive(Args)]
struct FunctionalsArgs {
    #[command(flatten)]
    psf: PsfArgs,
    #[arg(long)]
    eta: f64,
    /// Separation grid `min:max:points[@geometric]` or a single value
    #[arg(long)]
    s: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    psf: PsfArgs,
    #[arg(long)]
    eta: f64,
    /// Mean photons per source
    #[arg(long, default_value_t = 1.0, value_name = "N")]
    n: f64,
    #[arg(long)]
    s: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Thermal,
    Fock,
    Tmsv,
    CorrThermal,
}

#[derive(Args)]
struct QfiArgs {
    #[command(flatten)]
    psf: PsfArgs,
    #[arg(long)]
    eta: f64,
    #[arg(long, value_enum)]
    source: FamilyArg,
    /// Mean photons per source (thermal, corr-thermal)
    #[arg(long, value_name = "N")]
    n: Option<f64>,
    #[arg(long)]
    n_plus: Option<u32>,
    #[arg(long)]
    n_minus: Option<u32>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    w: Option<f64>,
    #[arg(long)]
    s: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    psf: PsfArgs,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long)]
    s: String,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 8)]
    n_max: u32,
    /// Re-run at K+2 and fd_step/2 and require the verdict to hold
    #[arg(long)]
    stability: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    #[command(flatten)]
    psf: PsfArgs,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    n_plus: u32,
    #[arg(long, default_value_t = 2)]
    n_minus: u32,
    #[arg(long)]
    true_s: f64,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    #[arg(long, default_value_t = 200)]
    repeats: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    #[command(flatten)]
    psf: PsfArgs,
    #[arg(long)]
    out: PathBuf,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: e.to_string() }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }

    fn from_core(e: Error) -> Self {
        let code = match e {
            Error::EtaOutOfRange(_) | Error::UnphysicalState(_) | Error::UnsupportedState(_) => {
                EXIT_CONFIG
            }
            _ => EXIT_NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let (body, geometric) = match spec.strip_suffix("@geometric") {
        Some(b) => (b, true),
        None => (spec, false),
    };
    let parts: Vec<&str> = body.split(':').collect();
    let bad = |m: &str| CliError::config(format!("grid `{spec}`: {m}"));
    match parts.len() {
        1 => {
            let v: f64 = parts[0].parse().map_err(|_| bad("not a number"))?;
            Ok(vec![v])
        }
        3 => {
            let min: f64 = parts[0].parse().map_err(|_| bad("bad min"))?;
            let max: f64 = parts[1].parse().map_err(|_| bad("bad max"))?;
            let points: usize = parts[2].parse().map_err(|_| bad("bad point count"))?;
            if points < 2 {
                return Err(bad("need at least 2 points"));
            }
            if geometric && min <= 0.0 {
                return Err(bad("geometric spacing requires min > 0"));
            }
            if max <= min {
                return Err(bad("need max > min"));
            }
            Ok((0..points)
                .map(|i| {
                    let t = i as f64 / (points - 1) as f64;
                    if geometric {
                        min * (max / min).powf(t)
                    } else {
                        min + (max - min) * t
                    }
                })
                .collect())
        }
        _ => Err(bad("expected `value` or `min:max:points[@geometric]`")),
    }
}

fn build_system(psf: &PsfArgs, eta: f64) -> Result<ImagingSystem, CliError> {
    let model = psf.build()?;
    ImagingSystem::new(eta, model).map_err(|e| {
        CliError::config(format!("--eta: {e}; the channel model requires eta <= 1/2"))
    })
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn source_from_args(args: &QfiArgs) -> Result<SourceSpec, CliError> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::config(format!("--{flag} is required for this source")))
    };
    let spec = match args.source {
        FamilyArg::Thermal => SourceSpec::Thermal { n_mean: need(args.n, "n")? },
        FamilyArg::Fock => SourceSpec::FockPm {
            n_plus: args.n_plus.unwrap_or(0),
            n_minus: args.n_minus.unwrap_or(0),
        },
        FamilyArg::Tmsv => SourceSpec::Tmsv { xi: need(args.xi, "xi")? },
        FamilyArg::CorrThermal => SourceSpec::CorrThermal {
            n_mean: need(args.n, "n")?,
            w: need(args.w, "w")?,
        },
    };
    spec.validate().map_err(CliError::config)?;
    Ok(spec)
}

fn cmd_functionals(args: &FunctionalsArgs) -> Result<(), CliError> {
    let system = build_system(&args.psf, args.eta)?;
    let grid = parse_grid(&args.s)?;
    let rows: Vec<String> = grid
        .par_iter()
        .map(|&s| -> Result<String, Error> {
            let fns = system.psf.functionals(s)?;
            let (fp, fm) = f_functions(&system, s)?;
            Ok(format!(
                "{:.9e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                s, fns.delta, fns.gamma, fns.beta, fns.dk2,
                fns.eps_plus_sq, fns.eps_minus_sq, fp, fm
            ))
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from_core)?;
    let mut out =
        String::from("s,delta,gamma,beta,dk2,eps_plus_sq,eps_minus_sq,f_plus,f_minus\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    write_output(&args.out, &out)
}

fn bound_csv(system: &ImagingSystem, n: f64, grid: &[f64]) -> Result<String, CliError> {
    let rows: Vec<String> = grid
        .par_iter()
        .map(|&s| -> Result<String, Error> {
            let (fp, fm) = f_functions(system, s)?;
            let normalized = fp.max(fm);
            let bound = 2.0 * system.eta() * n / (system.x_r() * system.x_r()) * normalized;
            Ok(format!(
                "{:.9e},{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                s, system.eta(), n, fp, fm, bound, normalized
            ))
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from_core)?;
    let mut out = String::from("s,eta,n,f_plus,f_minus,bound,bound_normalized\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

fn cmd_bound(args: &BoundArgs) -> Result<(), CliError> {
    let system = build_system(&args.psf, args.eta)?;
    let grid = parse_grid(&args.s)?;
    let out = bound_csv(&system, args.n, &grid)?;
    write_output(&args.out, &out)
}

fn qfi_csv(
    source: &SourceSpec,
    system: &ImagingSystem,
    grid: &[f64],
) -> Result<String, CliError> {
    // TMSV rows carry both readings of the ambiguous formula terms; the
    // adjudicated (squared-derivative) one comes first
    let variants: &[(TmsvVariant, &str)] = match source {
        SourceSpec::Tmsv { .. } => &[
            (TmsvVariant::SquaredDerivative, ";variant=squared-derivative"),
            (TmsvVariant::AsPrinted, ";variant=as-printed"),
        ],
        _ => &[(TmsvVariant::SquaredDerivative, "")],
    };
    let rows: Vec<String> = grid
        .par_iter()
        .map(|&s| -> Result<String, Error> {
            let mut block = String::new();
            for &(variant, label) in variants {
                let rep = qfi::report(source, system, s, variant)?;
                let row = rep.to_csv_row();
                // splice the variant label into the params column
                let row = if label.is_empty() {
                    row
                } else {
                    let mut cols: Vec<String> = row.split(',').map(str::to_string).collect();
                    cols[3].push_str(label);
                    cols.join(",")
                };
                block.push_str(&row);
                block.push('\n');
            }
            Ok(block)
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from_core)?;
    let mut out = String::from("s,eta,family,params,qfi,qfi_normalized,crb,bound\n");
    for r in rows {
        out.push_str(&r);
    }
    Ok(out)
}

fn cmd_qfi(args: &QfiArgs) -> Result<(), CliError> {
    let system = build_system(&args.psf, args.eta)?;
    let source = source_from_args(args)?;
    let grid = parse_grid(&args.s)?;
    let out = qfi_csv(&source, &system, &grid)?;
    write_output(&args.out, &out)
}

#[derive(Serialize)]
struct OracleReport<T: Serialize> {
    schema: &'static str,
    adjudication: T,
    stability: Option<StabilityReport>,
}

#[derive(Serialize)]
struct StabilityReport {
    k: usize,
    fd_step: f64,
    verdict: TmsvVariant,
    verdict_stable: bool,
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let system = build_system(&args.psf, args.eta)?;
    let grid = parse_grid(&args.s)?;
    let report =
        adjudicate_tmsv(args.xi, &system, &grid, args.k, args.n_max).map_err(CliError::from_core)?;
    let stability = if args.stability {
        let k2 = args.k + 2;
        let fd = 0.5 * report.fd_step;
        let mut worst_printed: f64 = 0.0;
        let mut worst_squared: f64 = 0.0;
        for &s in &grid {
            let oracle = qfi_sld(&SourceSpec::Tmsv { xi: args.xi }, &system, s, k2, args.n_max, fd)
                .map_err(CliError::from_core)?
                .qfi;
            let scale = oracle.abs().max(1e-12);
            let printed = qfi::qfi_tmsv(args.xi, &system, s, TmsvVariant::AsPrinted)
                .map_err(CliError::from_core)?;
            let squared = qfi::qfi_tmsv(args.xi, &system, s, TmsvVariant::SquaredDerivative)
                .map_err(CliError::from_core)?;
            worst_printed = worst_printed.max((printed - oracle).abs() / scale);
            worst_squared = worst_squared.max((squared - oracle).abs() / scale);
        }
        let verdict = if worst_squared <= worst_printed {
            TmsvVariant::SquaredDerivative
        } else {
            TmsvVariant::AsPrinted
        };
        Some(StabilityReport {
            k: k2,
            fd_step: fd,
            verdict_stable: verdict == report.verdict,
            verdict,
        })
    } else {
        None
    };
    let wrapped = OracleReport { schema: "v1", adjudication: report, stability };
    let json = serde_json::to_string_pretty(&wrapped)
        .map_err(|e| CliError::io(format!("serializing report: {e}")))?;
    write_output(&args.out, &format!("{json}\n"))
}

fn cmd_measure(args: &MeasureArgs) -> Result<(), CliError> {
    let system = build_system(&args.psf, args.eta)?;
    let source = SourceSpec::FockPm { n_plus: args.n_plus, n_minus: args.n_minus };
    let fisher = parity_fisher_information(&source, &system, args.true_s)
        .map_err(CliError::from_core)?;
    let run = crb_benchmark(&source, &system, args.true_s, args.shots, args.repeats, args.seed)
        .map_err(CliError::from_core)?;
    #[derive(Serialize)]
    struct MeasureReport {
        schema: &'static str,
        fisher_information: f64,
        variance_over_crb: f64,
        run: rqfi::measurement::EstimatorRun,
    }
    let report = MeasureReport {
        schema: "v1",
        fisher_information: fisher,
        variance_over_crb: run.empirical_variance / run.crb_classical,
        run,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::io(format!("serializing report: {e}")))?;
    write_output(&args.out, &format!("{json}\n"))
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

fn cmd_figures(args: &FiguresArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::io(format!("creating {}: {e}", args.out.display())))?;
    let psf = args.psf.build()?;
    let x_r = psf.x_r();
    let grid = parse_grid(&format!("{}:{}:240@geometric", 0.01 * x_r, 10.0 * x_r))?;
    let system = |eta: f64| -> Result<ImagingSystem, CliError> {
        ImagingSystem::new(eta, psf.clone()).map_err(CliError::config)
    };

    // normalized upper bound for three attenuations
    let mut fig2 = String::new();
    for eta in [0.1, 0.4, 0.5] {
        fig2.push_str(&bound_csv(&system(eta)?, 1.0, &grid)?);
    }
    write_file(&args.out, "fig2_bound.csv", &fig2)?;

    // thermal sources: weak, unit, and semiclassical collected flux
    let mut fig3 = String::new();
    let sys = system(0.2)?;
    for n in [0.05, 5.0, 5e6] {
        fig3.push_str(&qfi_csv(&SourceSpec::Thermal { n_mean: n }, &sys, &grid)?);
    }
    write_file(&args.out, "fig3_thermal.csv", &fig3)?;

    // two-mode squeezed vacuum regimes
    let mut fig4 = String::new();
    for (xi, eta) in [(0.1, 0.5), (1.0, 0.01), (10.0, 0.1)] {
        fig4.push_str(&qfi_csv(&SourceSpec::Tmsv { xi }, &system(eta)?, &grid)?);
    }
    write_file(&args.out, "fig4_tmsv.csv", &fig4)?;

    // the f_pm functions themselves
    let mut fig5 = String::new();
    for eta in [0.1, 0.4, 0.5] {
        let sys = system(eta)?;
        let rows: Vec<String> = grid
            .par_iter()
            .map(|&s| -> Result<String, Error> {
                let (fp, fm) = f_functions(&sys, s)?;
                Ok(format!("{:.9e},{},{:.12e},{:.12e}", s, eta, fp, fm))
            })
            .collect::<Result<_, _>>()
            .map_err(CliError::from_core)?;
        if fig5.is_empty() {
            fig5.push_str("s,eta,f_plus,f_minus\n");
        }
        for r in rows {
            fig5.push_str(&r);
            fig5.push('\n');
        }
    }
    write_file(&args.out, "fig5_f_functions.csv", &fig5)?;

    // discordant thermal sources in the attenuated regime
    let mut fig6 = String::new();
    let sys = system(1e-4)?;
    for w in [-0.5, -1.0] {
        fig6.push_str(&qfi_csv(&SourceSpec::CorrThermal { n_mean: 1.0, w }, &sys, &grid)?);
    }
    write_file(&args.out, "fig6_corr_thermal.csv", &fig6)?;

    #[derive(Serialize)]
    struct Manifest {
        schema: &'static str,
        version: &'static str,
        x_r: f64,
        grid: &'static str,
        files: [&'static str; 5],
    }
    let manifest = Manifest {
        schema: "v1",
        version: env!("CARGO_PKG_VERSION"),
        x_r,
        grid: "0.01:10:240@geometric (units of x_R)",
        files: [
            "fig2_bound.csv",
            "fig3_thermal.csv",
            "fig4_tmsv.csv",
            "fig5_f_functions.csv",
            "fig6_corr_thermal.csv",
        ],
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::io(format!("serializing manifest: {e}")))?;
    write_file(&args.out, "manifest.json", &format!("{json}\n"))
}

fn run() -> Result<(), CliError> {
    if let Ok(threads) = std::env::var("RQFI_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| CliError::config(format!("RQFI_THREADS=`{threads}` is not a number")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let cli = Cli::parse();
    match &cli.command {
        Command::Functionals(a) => cmd_functionals(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Qfi(a) => cmd_qfi(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Figures(a) => cmd_figures(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
