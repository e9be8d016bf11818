use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shockpulse::asymptotics::{critical_data, predict_blowup};
use shockpulse::harness::run::{base_grid, profiles};
use shockpulse::harness::sweep::RowStatus;
use shockpulse::harness::{compare_mu, convergence_study, load_config, run_single, run_sweep, RunConfig};
use shockpulse::pulse_data::{
    expected_constraint_order, initial_fields, outgoing_derivative_sup, shock_margin,
};
use shockpulse::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;

#[derive(Parser)]
#[command(name = "shockpulse", version, about = "Short-pulse shock formation for radial quasilinear waves")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override a config entry; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the initial data and report the shock margin and constraints.
    CheckData,
    /// Evolve one configuration and write its report, CSVs and plots.
    Run,
    /// Run every delta (and p) of the sweep axes and fit the blow-up exponent.
    Sweep,
    /// Print the leading-order blow-up prediction without evolving.
    Predict,
    /// Compare mu from the ODE, the Jacobian and the asymptotic formula.
    Compare,
    /// Refine dr, dt and the fan together and report observed orders.
    Convergence {
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigParse { .. } | Error::ConfigValidation { .. } | Error::Io { .. } => EXIT_CONFIG,
        Error::HyperbolicityLoss { .. } | Error::FanEscape { .. } => EXIT_NUMERIC,
        _ => EXIT_PRECONDITION,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or("none".into(), |x| format!("{x:.6}"))
}

fn check_data(config: &RunConfig) -> Result<u8, Error> {
    let params = config.resolve_params()?;
    let crit = critical_data(&params);
    let (phi0, phi1) = profiles(config.profile.kind, &params)?;
    let grid = base_grid(config, params.delta)?;
    let state = initial_fields(&params, &phi0, &phi1, &grid)?;
    println!("delta = {}, eps0 = {}, p = {}", params.delta, params.eps0, params.p);
    println!("amplitude = {:.6} ({})", params.amplitude, config.profile.kind);
    println!("p_c = {:.6}, kappa = {:.6}, t* = {:.6}", crit.p_c, crit.kappa, crit.t_star);
    match shock_margin(&phi0, &phi1, &params) {
        Ok(m) => println!(
            "q_max = {:.6} at s = {:.6}, threshold = {:.6}, shock assumption {}",
            m.q_max,
            m.s_star,
            m.threshold,
            if m.satisfied { "holds" } else { "fails" }
        ),
        Err(e) => println!("shock assumption: {e}"),
    }
    for k in [1, 2] {
        let sup = outgoing_derivative_sup(&params, &phi0, k, 20_000)?;
        println!(
            "sup |(d_t + d_r)^{k} phi| = {sup:.6e} (expected order delta^{:.3})",
            expected_constraint_order(&params, k)
        );
    }
    let v_max = state.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "grid: {} points, dr = {:.3e}; max |v| = {v_max:.6}, energy = {:.6e}",
        grid.n_points,
        grid.dr(),
        state.energy(params.p)
    );
    Ok(0)
}

fn predict(config: &RunConfig) -> Result<u8, Error> {
    let params = config.resolve_params()?;
    let (phi0, phi1) = profiles(config.profile.kind, &params)?;
    let pred = predict_blowup(&params, &phi0, &phi1)?;
    println!("p_c = {:.6}, kappa = {:.6}, t* = {:.6}", pred.p_c, pred.kappa, pred.t_star);
    println!("q_max = {:.6}, L mu(1, u_pred) = {:.6}", pred.q_max, pred.mu_rate);
    println!("s_pred = {:.6}, u_pred = {:.6}", pred.s_pred, pred.u_pred);
    println!("t_blow_pred = {}", opt(pred.t_blow_pred));
    Ok(0)
}

fn run(config: &RunConfig) -> Result<u8, Error> {
    let report = run_single(config)?;
    println!("t* = {:.6}", report.t_star);
    println!("t_blow_predicted = {}", opt(report.t_blow_predicted));
    println!("t_blow_measured = {}", opt(report.t_blow_measured));
    println!("trigger = {}", report.trigger.map_or("none", |t| t.as_str()));
    println!("final t = {:.6}, min mu = {:.6}", report.final_t, report.diagnostics.mu_min);
    println!("wrote {} files to {}", report.manifest.len(), config.output_dir.display());
    if let Some(f) = report.failure() {
        eprintln!("run halted: {f:?}");
        return Ok(EXIT_NUMERIC);
    }
    Ok(0)
}

fn sweep(config: &RunConfig) -> Result<u8, Error> {
    let result = run_sweep(config)?;
    println!("{:>10} {:>3} {:>12} {:>12} {:>12} status", "delta", "p", "q_max", "t_blow", "predicted");
    for r in &result.rows {
        println!(
            "{:>10} {:>3} {:>12} {:>12} {:>12} {}",
            r.delta,
            r.p,
            opt(r.q_max),
            opt(r.t_blow_measured),
            opt(r.t_blow_predicted),
            match &r.status {
                RowStatus::Failed(msg) => format!("failed: {msg}"),
                s => s.as_str().to_string(),
            }
        );
    }
    for f in &result.fits {
        println!(
            "p = {}: slope {:.4} +- {:.4} (kappa = {:.4}) from {} rows",
            f.p, f.slope, f.slope_stderr, f.expected, f.rows
        );
    }
    Ok(0)
}

fn compare(config: &RunConfig) -> Result<u8, Error> {
    let table = compare_mu(config)?;
    println!("{:>10} {:>14} {:>14}", "delta", "sup|ode-asym|", "sup|ode-jac|");
    for s in &table.summaries {
        println!("{:>10} {:>14.6e} {:>14.6e}", s.delta, s.sup_asymptotic, s.sup_jac);
    }
    match &table.fit {
        Some(f) => println!(
            "remainder order {:.4} +- {:.4} (nominal {:.4})",
            f.slope, f.slope_stderr, table.expected_order
        ),
        None => println!("remainder order: needs three or more values in sweep.delta"),
    }
    Ok(0)
}

fn convergence(config: &RunConfig, levels: usize) -> Result<u8, Error> {
    let table = convergence_study(config, levels)?;
    println!("comparison time t = {:.6}", table.t_compare);
    for r in &table.rows {
        let values: Vec<String> = r.values.iter().map(|v| format!("{v:.3e}")).collect();
        let orders: Vec<String> = r.orders.iter().map(|o| format!("{o:.2}")).collect();
        println!("{:<14} [{}] orders [{}]", r.quantity, values.join(", "), orders.join(", "));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(EXIT_CONFIG);
    };
    let mut overrides = cli.set.clone();
    if let Some(out) = &cli.out {
        overrides.push(format!("output.dir={}", out.display()));
    }
    let config = match load_config(path, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match cli.command {
        Command::CheckData => check_data(&config),
        Command::Run => run(&config),
        Command::Sweep => sweep(&config),
        Command::Predict => predict(&config),
        Command::Compare => compare(&config),
        Command::Convergence { levels } => convergence(&config, levels),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
