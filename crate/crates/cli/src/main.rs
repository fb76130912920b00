mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvtele::bell::{GridMetadata, MeasurementOutcome};
use cvtele::channel::{validate_regime, PhysicalConfig, RegimeReport, DEFAULT_REGIME_RATIO};
use cvtele::protocol::{self, BobState, OutcomeChoice, RouteCheck, SweepAxis};
use cvtele::snapshot::StateSnapshot;
use serde::Serialize;
use serde_json::json;

use config::{parse_list, FloatList, read_json, Format, OutcomeSpec, Overrides, RunConfig, OUT_DIR_ENV};
use error::CliError;
use output::OutputDir;

#[derive(Parser)]
#[command(name = "cvtele", version, about = "Continuous-variable teleportation of an atomic motional state")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol once and write the record.
    Teleport(Common),
    /// Outcome-averaged fidelity over a parameter list.
    FidelitySweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated r values; replaces the sweep of the config file.
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        r_list: Option<FloatList>,
    },
    /// Export the Bell-measurement outcome density.
    Density(Common),
    /// Check the atom-cavity regime inequalities of a parameter file.
    ValidatePhysics {
        /// Physical parameter file.
        #[arg(long)]
        config: PathBuf,
        /// Required ratio R for every "≫" inequality.
        #[arg(long, default_value_t = DEFAULT_REGIME_RATIO)]
        ratio: f64,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Half-width of the outcome grid.
    #[arg(long)]
    grid_l: Option<f64>,
    /// Points per grid axis.
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output directory [default: $CVTELE_OUT_DIR, else "."].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Common {
    fn overrides(&self, r_list: Option<Vec<f64>>) -> Overrides {
        Overrides {
            seed: self.seed,
            r: self.r,
            gain: self.gain,
            cutoff: self.cutoff,
            grid_l: self.grid_l,
            grid_n: self.grid_n,
            format: self.format,
            out: self.out.clone(),
            r_list,
            verbose: self.verbose,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Teleport(c) => prepare(&c, None).and_then(cmd_teleport),
        Command::FidelitySweep { common, r_list } => prepare(&common, r_list.map(|l| l.0)).and_then(cmd_fidelity_sweep),
        Command::Density(c) => prepare(&c, None).and_then(cmd_density),
        Command::ValidatePhysics {
            config,
            ratio,
            format,
            out,
        } => cmd_validate_physics(&config, ratio, format, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvtele: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Resolved config plus everything derived from it before the run.
struct Run {
    config: RunConfig,
    out: OutputDir,
    physics: Option<config::PhysicsSummary>,
}

fn prepare(common: &Common, r_list: Option<Vec<f64>>) -> Result<Run, CliError> {
    let mut config = RunConfig::load(&common.config, &common.overrides(r_list))?;
    let physics = config.apply_physics()?;
    let dir = config.resolve_out_dir();
    Ok(Run {
        config,
        out: OutputDir::create(dir)?,
        physics,
    })
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Writes the config echo and the sidecar, and prints the echo.
fn finish<E: Serialize>(out: &OutputDir, stem: &str, echo: &E, meta: serde_json::Value, verbose: u8) -> Result<(), CliError> {
    let bytes = output::to_json(echo)?;
    out.write_bytes(&format!("{stem}.config.json"), &bytes)?;
    let mut meta = meta;
    meta["command"] = json!(stem.replace('_', "-"));
    meta["version"] = json!(env!("CARGO_PKG_VERSION"));
    meta["timestamp"] = json!(chrono::Utc::now().to_rfc3339());
    let path = out.write_json(&format!("{stem}.meta.json"), &meta)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    if verbose > 0 {
        eprintln!("wrote {}", output::display(&path));
    }
    Ok(())
}

#[derive(Serialize)]
struct TeleportPayload {
    outcome: MeasurementOutcome,
    fidelity_post: f64,
    truncation_budget: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    route_check: Option<RouteCheck>,
    bob_pre: StateSnapshot,
    bob_post: StateSnapshot,
}

#[derive(Serialize)]
struct TeleportRow {
    chi_plus: f64,
    chi_minus: f64,
    alpha_re: f64,
    alpha_im: f64,
    density_weight: f64,
    fidelity_post: f64,
    truncation_budget: f64,
}

const TELEPORT_HEADER: [&str; 7] = [
    "chi_plus",
    "chi_minus",
    "alpha_re",
    "alpha_im",
    "density_weight",
    "fidelity_post",
    "truncation_budget",
];

fn snapshot(state: &BobState) -> StateSnapshot {
    match state {
        BobState::Pure(v) => StateSnapshot::from_vector(v),
        BobState::Mixed(r) => StateSnapshot::from_density(r),
    }
}

fn cmd_teleport(run: Run) -> Result<(), CliError> {
    let Run { config, out, physics } = run;
    let p = &config.protocol;
    protocol::check_truncation(p).map_err(CliError::from_core)?;
    let choice = match config.outcome {
        OutcomeSpec::Given([cp, cm]) => OutcomeChoice::Given(cp, cm),
        OutcomeSpec::Sampled => OutcomeChoice::Sampled,
    };
    let rec = protocol::run_teleport(p, choice).map_err(CliError::from_core)?;
    let o = rec.outcome;
    let name = format!("teleport.{}", extension(config.output.format));
    match config.output.format {
        Format::Json => {
            let payload = TeleportPayload {
                outcome: o,
                fidelity_post: rec.fidelity_post,
                truncation_budget: rec.truncation_budget,
                route_check: rec.route_check,
                bob_pre: snapshot(&rec.bob_pre),
                bob_post: snapshot(&rec.bob_post),
            };
            out.write_json(&name, &payload)?;
        }
        Format::Csv => {
            let row = TeleportRow {
                chi_plus: o.chi_plus,
                chi_minus: o.chi_minus,
                alpha_re: o.alpha.re,
                alpha_im: o.alpha.im,
                density_weight: o.density_weight,
                fidelity_post: rec.fidelity_post,
                truncation_budget: rec.truncation_budget,
            };
            out.write_csv(&name, &TELEPORT_HEADER, &[row])?;
        }
    }
    let meta = json!({ "payload": name, "seed": p.seed, "physics": physics });
    finish(&out, "teleport", &config, meta, config.verbosity)
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    mean_fidelity: f64,
    stderr: f64,
    oracle_value: Option<f64>,
    truncation_budget: f64,
}

#[derive(Serialize)]
struct SweepMeta {
    value: f64,
    seed: u64,
    normalization_deficit: f64,
    quantiles: [f64; 5],
}

fn cmd_fidelity_sweep(run: Run) -> Result<(), CliError> {
    let Run { config, out, physics } = run;
    let axis_name = match &config.sweep {
        SweepAxis::R(_) => "r",
        SweepAxis::Gain(_) => "gain",
        SweepAxis::EtaEpr(_) => "eta_epr",
    };
    let points = protocol::sweep(&config.protocol, &config.sweep, config.average);
    let mut rows = Vec::with_capacity(points.len());
    let mut meta_points = Vec::with_capacity(points.len());
    for pt in points {
        let rep = pt.result.map_err(CliError::from_core).map_err(|e| match e {
                CliError::Numerical(m) => CliError::Numerical(format!("{axis_name} = {}: {m}", pt.value)),
                CliError::Config(m) => CliError::Config(format!("{axis_name} = {}: {m}", pt.value)),
                other => other,
            })?;
        if config.verbosity > 0 {
            eprintln!("{axis_name} = {}: F = {:.6}", pt.value, rep.mean_fidelity);
        }
        rows.push(SweepRow {
            value: pt.value,
            mean_fidelity: rep.mean_fidelity,
            stderr: rep.stderr,
            oracle_value: rep.oracle_value,
            truncation_budget: rep.truncation_budget,
        });
        meta_points.push(SweepMeta {
            value: pt.value,
            seed: pt.seed,
            normalization_deficit: rep.normalization_deficit,
            quantiles: rep.quantiles,
        });
    }
    let name = format!("fidelity_sweep.{}", extension(config.output.format));
    match config.output.format {
        Format::Csv => {
            let header = [axis_name, "mean_fidelity", "stderr", "oracle_value", "truncation_budget"];
            out.write_csv(&name, &header, &rows)?;
        }
        Format::Json => {
            let table: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        axis_name: r.value,
                        "mean_fidelity": r.mean_fidelity,
                        "stderr": r.stderr,
                        "oracle_value": r.oracle_value,
                        "truncation_budget": r.truncation_budget,
                    })
                })
                .collect();
            out.write_json(&name, &table)?;
        }
    }
    let meta = json!({
        "payload": name,
        "seed": config.protocol.seed,
        "points": meta_points,
        "physics": physics,
    });
    finish(&out, "fidelity_sweep", &config, meta, config.verbosity)
}

#[derive(Serialize)]
struct DensityRow {
    chi_plus: f64,
    chi_minus: f64,
    density: f64,
}

fn cmd_density(run: Run) -> Result<(), CliError> {
    let Run { config, out, physics } = run;
    let grid = protocol::outcome_grid(&config.protocol).map_err(CliError::from_core)?;
    let name = format!("density.{}", extension(config.output.format));
    match config.output.format {
        Format::Csv => {
            let rows: Vec<DensityRow> = grid
                .cells()
                .map(|(chi_plus, chi_minus, density)| DensityRow {
                    chi_plus,
                    chi_minus,
                    density,
                })
                .collect();
            out.write_csv(&name, &["chi_plus", "chi_minus", "density"], &rows)?;
        }
        Format::Json => {
            out.write_json(&name, &grid)?;
        }
    }
    let grid_meta: GridMetadata = grid.metadata();
    let meta = json!({ "payload": name, "grid": grid_meta, "physics": physics });
    finish(&out, "density", &config, meta, config.verbosity)
}

#[derive(Serialize)]
struct PhysicsEcho<'a> {
    params: &'a PhysicalConfig,
    ratio: f64,
    format: Format,
    out: &'a PathBuf,
}

#[derive(Serialize)]
struct PhysicsReport<'a> {
    #[serde(flatten)]
    report: &'a RegimeReport,
    time_unit: &'static str,
    /// 1/Γ_peak in `time_unit`.
    gamma_inverse: f64,
}

#[derive(Serialize)]
struct CheckRow<'a> {
    name: &'a str,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    required: f64,
    passed: bool,
}

fn cmd_validate_physics(path: &Path, ratio: f64, format: Option<Format>, out: Option<PathBuf>) -> Result<(), CliError> {
    let params: PhysicalConfig = read_json(path)?;
    let report = validate_regime(&params.resolve(), ratio).map_err(CliError::from_core)?;
    let format = format.unwrap_or_default();
    let dir = out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let outdir = OutputDir::create(dir.clone())?;
    let units = params.units;
    let name = format!("validate_physics.{}", extension(format));
    match format {
        Format::Json => {
            let payload = PhysicsReport {
                report: &report,
                time_unit: units.time_unit(),
                gamma_inverse: units.time_from_seconds(report.gamma_inverse_seconds),
            };
            outdir.write_json(&name, &payload)?;
        }
        Format::Csv => {
            let rows: Vec<CheckRow> = report
                .checks
                .iter()
                .map(|c| CheckRow {
                    name: &c.name,
                    lhs: c.lhs,
                    rhs: c.rhs,
                    ratio: c.ratio,
                    required: c.required,
                    passed: c.passed,
                })
                .collect();
            outdir.write_csv(&name, &["name", "lhs", "rhs", "ratio", "required", "passed"], &rows)?;
        }
    }
    let echo = PhysicsEcho {
        params: &params,
        ratio,
        format,
        out: &dir,
    };
    let meta = json!({
        "payload": name,
        "gamma_peak": report.gamma_peak,
        "gamma_inverse_seconds": report.gamma_inverse_seconds,
        "time_unit": units.time_unit(),
        "gamma_inverse": units.time_from_seconds(report.gamma_inverse_seconds),
    });
    finish(&outdir, "validate_physics", &echo, meta, 0)?;
    let failed: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "regime check failed at ratio {ratio}: {}",
            failed.join("; ")
        )))
    }
}
