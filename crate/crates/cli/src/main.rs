//! `perchsim`: design calculators, valve tables and scenario runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use perch_core::arm::{fit_torque_coefficients, hinge_torque, TorqueSample};
use perch_core::config::{validate_dt, ConfigError, RobotConfig};
use perch_core::format::g6;
use perch_core::mission::{flight_csv, pressure_csv, run_scenario, trace_csv, Scenario, ScenarioRun, SimError};
use perch_core::pneumatics::{
    equalized_pressure_forward, initial_pressure_for_target, render_truth_table, PneumaticError,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "perchsim", version, about = "Perching quadrotor simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Robot configuration (JSON). Defaults to the built-in prototype.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Bottom pre-charge needed for an equalized joint pressure.
    DesignPressure {
        /// Target equalized pressure, kPa.
        #[arg(long)]
        target: f64,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Dump the 16-cell valve/pump truth table as CSV.
    TruthTables {
        #[command(flatten)]
        common: Common,
    },
    /// Run one or more scenarios and write traces plus a summary.
    Simulate {
        /// Scenario script (JSON); repeat for a batch.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        /// Integration step override, s.
        #[arg(long)]
        dt: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Hinge torque over a pressure × angle grid, CSV.
    TorqueTable {
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, default_value_t = 70.0)]
        p_max: f64,
        #[arg(long, default_value_t = 10.0)]
        p_step: f64,
        /// Hinge angles in degrees, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,20,30,40,60")]
        theta_deg: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Least-squares torque coefficients from a CSV of theta_rad,p0_kpa,torque_nm.
    FitTorque {
        #[arg(long)]
        samples: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn load_config(common: &Common) -> Result<RobotConfig, Failure> {
    let cfg = match &common.config {
        Some(p) => RobotConfig::load(p)?,
        None => RobotConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_error(&path, e))
}

fn design_pressure(target: f64, as_json: bool, common: &Common) -> Result<String, Failure> {
    let cfg = load_config(common)?;
    let pc = &cfg.pneumatics;
    match initial_pressure_for_target(target, pc.p_atm, &pc.joint, &pc.bottom) {
        Ok(sol) => {
            let check =
                equalized_pressure_forward(sol.valid_root, pc.p_atm, &pc.joint, &pc.bottom).map_err(|e| Failure {
                    code: EXIT_INFEASIBLE,
                    message: e.to_string(),
                })?;
            let report = json!({
                "target_kpa": target,
                "roots_kpa": sol.all_roots,
                "valid_root_kpa": sol.valid_root,
                "forward_check_kpa": check,
            });
            let json_text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            if let Some(dir) = &common.out {
                write(dir, "design_pressure.json", &json_text)?;
            }
            if as_json {
                return Ok(json_text);
            }
            let mut s = String::new();
            let roots: Vec<String> = sol.all_roots.iter().map(|r| format!("{r:.2}")).collect();
            writeln!(s, "target P1      {} kPa", g6(target)).unwrap();
            writeln!(s, "cubic roots    {}", roots.join(", ")).unwrap();
            writeln!(s, "pre-charge P0  {:.2} kPa", sol.valid_root).unwrap();
            writeln!(s, "forward check  {:.3} kPa", check).unwrap();
            Ok(s)
        }
        Err(
            e @ (PneumaticError::Infeasible { .. } | PneumaticError::Domain { .. } | PneumaticError::Ambiguous { .. }),
        ) => {
            let mut message = format!("infeasible design: {e}");
            if let Ok(best) = equalized_pressure_forward(pc.bottom.p_max, pc.p_atm, &pc.joint, &pc.bottom) {
                write!(
                    message,
                    "; highest reachable P1 is {best:.2} kPa at P0 = {} kPa",
                    g6(pc.bottom.p_max)
                )
                .unwrap();
            }
            Err(Failure {
                code: EXIT_INFEASIBLE,
                message,
            })
        }
        Err(e) => Err(config_error(e.to_string())),
    }
}

fn write_run(dir: &Path, run: &ScenarioRun) -> Result<(), Failure> {
    write(dir, "trace.csv", &trace_csv(&run.trace))?;
    write(dir, "pressure.csv", &pressure_csv(&run.trace))?;
    write(dir, "flight.csv", &flight_csv(&run.trace))?;
    write(dir, "summary.json", &run.summary.to_json())
}

fn simulate(paths: &[PathBuf], dt: Option<f64>, common: &Common) -> Result<String, Failure> {
    let cfg = load_config(common)?;
    if let Some(dt) = dt {
        validate_dt(dt)?;
    }
    let scenarios = paths.iter().map(|p| Scenario::load(p)).collect::<Result<Vec<_>, _>>()?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));

    // Independent runs, one worker each.
    let runs: Vec<ScenarioRun> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| s.spawn(|| run_scenario(&cfg, sc, dt)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario worker panicked"))
            .collect()
    });

    let mut report = String::new();
    let mut failed = Vec::new();
    let mut code = EXIT_INVARIANT;
    for (sc, run) in scenarios.iter().zip(&runs) {
        let dir = if runs.len() == 1 {
            out.clone()
        } else {
            out.join(&sc.name)
        };
        write_run(&dir, run)?;
        let status = if run.invariants_held() { "ok" } else { "FAILED" };
        writeln!(
            report,
            "{}: {} rows, {} -> {}",
            sc.name,
            run.trace.len(),
            status,
            dir.display()
        )
        .unwrap();
        if let Some(e) = &run.error {
            if matches!(e, SimError::Config(_)) {
                code = EXIT_CONFIG;
            }
            failed.push(format!("{}: {e}", sc.name));
        }
        for v in &run.summary.invariant_violations {
            failed.push(format!("{}: {v}", sc.name));
        }
    }
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(Failure {
            code,
            message: format!("{report}{}", failed.join("\n")),
        })
    }
}

fn torque_table(p_min: f64, p_max: f64, p_step: f64, theta_deg: &[f64], common: &Common) -> Result<String, Failure> {
    let cfg = load_config(common)?;
    if !(p_step > 0.0 && p_max >= p_min && p_min >= 0.0) {
        return Err(config_error("pressure range: need 0 <= p_min <= p_max and p_step > 0"));
    }
    if theta_deg.is_empty() {
        return Err(config_error("theta_deg: must not be empty"));
    }
    let geom = &cfg.arm.geometry;
    let c = &cfg.arm.coefficients;
    let (a, b) = (g6(geom.pressure_prefactor()), g6(geom.gradient_prefactor()));
    let mut s = String::from("theta_rad,p0_kpa,torque_nm,pressure_prefactor,gradient_prefactor\n");
    let n = ((p_max - p_min) / p_step + 1e-9).floor() as usize;
    for deg in theta_deg {
        let theta = deg.to_radians();
        for i in 0..=n {
            let p = p_min + i as f64 * p_step;
            let tau = hinge_torque(theta, p, geom, c);
            writeln!(s, "{},{},{},{a},{b}", g6(theta), g6(p), g6(tau)).unwrap();
        }
    }
    if let Some(dir) = &common.out {
        write(dir, "torque_table.csv", &s)?;
    }
    Ok(s)
}

fn fit_torque(samples: &Path, common: &Common) -> Result<String, Failure> {
    let cfg = load_config(common)?;
    let mut reader =
        csv::Reader::from_path(samples).map_err(|e| config_error(format!("{}: {e}", samples.display())))?;
    let mut data = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| config_error(format!("{}: {e}", samples.display())))?;
        let field = |k: usize| -> Result<f64, Failure> {
            rec.get(k).and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                config_error(format!(
                    "{}: row {}: column {} is not a number",
                    samples.display(),
                    i + 1,
                    k + 1
                ))
            })
        };
        data.push(TorqueSample {
            theta: field(0)?,
            p0: field(1)?,
            torque: field(2)?,
        });
    }
    let fit = fit_torque_coefficients(&data, &cfg.arm.geometry).map_err(|e| config_error(e.to_string()))?;
    let report = json!({
        "k0": fit.coeffs.k0,
        "k1": fit.coeffs.k1,
        "k2": fit.coeffs.k2,
        "std_errors": fit.std_errors,
        "residual_norm": fit.residual_norm(),
        "samples": data.len(),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(dir) = &common.out {
        write(dir, "torque_fit.json", &text)?;
    }
    Ok(text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::DesignPressure { target, json, common } => design_pressure(*target, *json, common),
        Command::TruthTables { common } => {
            let t = render_truth_table();
            match &common.out {
                Some(dir) => write(dir, "truth_tables.csv", &t).map(|_| t),
                None => Ok(t),
            }
        }
        Command::Simulate { scenario, dt, common } => simulate(scenario, *dt, common),
        Command::TorqueTable {
            p_min,
            p_max,
            p_step,
            theta_deg,
            common,
        } => torque_table(*p_min, *p_max, *p_step, theta_deg, common),
        Command::FitTorque { samples, common } => fit_torque(samples, common),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("perchsim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
