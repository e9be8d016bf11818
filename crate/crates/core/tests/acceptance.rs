//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockpulse::diagnostics::null_frame_residual;
use shockpulse::fit::fit_log_log;
use shockpulse::harness::sweep::SweepResult;
use shockpulse::harness::{compare_mu, convergence_study, run_single, run_sweep, Amplitude};
use shockpulse::pulse_data::{constraint_exponent_fit, expected_constraint_order, DEFAULT_DELTA_GRID};
use shockpulse::{make_profile, BlowupReport, ProfileKind, PulseParams, RunConfig};

/// Resolution for the critical-exponent threshold runs.
const CRITICAL_POINTS_PER_PULSE: usize = 400;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn config(dir: &Path, name: &str, p: u32, delta: f64) -> RunConfig {
    let mut c = RunConfig::default();
    c.params.p = p;
    c.params.delta = delta;
    c.output_dir = dir.join(name);
    c
}

fn fixed_amplitude(c: &mut RunConfig, a: f64) {
    c.profile.amplitude = Amplitude::Fixed(a);
    c.params.amplitude = a;
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    fit_log_log(xs, ys).ok().map(|f| f.slope)
}

fn reports(sweep: &SweepResult) -> Vec<&BlowupReport> {
    sweep.rows.iter().filter_map(|r| r.report.as_ref()).collect()
}

fn report_at(sweep: &SweepResult, delta: f64) -> Option<&BlowupReport> {
    sweep
        .rows
        .iter()
        .find(|r| (r.delta - delta).abs() < 1e-12)
        .and_then(|r| r.report.as_ref())
}

fn fmt_t(t: Option<f64>) -> String {
    t.map_or("none".into(), |t| format!("{t:.4}"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let mut verdicts: Vec<(u32, &str, Verdict)> = Vec::new();

    // Shared shock sweeps at the default resolution.
    let mut sweep1 = config(dir, "sweep_p1", 1, 0.1);
    sweep1.sweep_delta = DEFAULT_DELTA_GRID.to_vec();
    let sweep1 = run_sweep(&sweep1).expect("p = 1 sweep");
    let mut sweep2 = config(dir, "sweep_p2", 2, 0.1);
    sweep2.sweep_delta = DEFAULT_DELTA_GRID.to_vec();
    let sweep2 = run_sweep(&sweep2).expect("p = 2 sweep");

    // 1. blow-up exponent
    {
        let fit = sweep1.fit_for(1);
        let times: Vec<String> = sweep1.rows.iter().map(|r| fmt_t(r.t_blow_measured)).collect();
        let pass = fit.is_some_and(|f| (f.slope - 0.5).abs() <= 0.1);
        verdicts.push((
            1,
            "blow-up exponent",
            verdict(
                pass,
                format!(
                    "slope {} (target 0.5 +- 0.1), t_blow = [{}]",
                    fit.map_or("none".into(), |f| format!("{:.4} +- {:.4}", f.slope, f.slope_stderr)),
                    times.join(", ")
                ),
            ),
        ));
    }

    // 2. critical dichotomy
    let p2_report = report_at(&sweep2, 0.1).cloned();
    {
        let p1 = report_at(&sweep1, 0.1);
        let mut ok = true;
        let mut parts = Vec::new();
        for (p, r) in [(1, p1), (2, p2_report.as_ref())] {
            let good = r.is_some_and(|r| r.trigger.is_some() && r.within_t_star(5.0) == Some(true));
            ok &= good;
            parts.push(format!(
                "p={p}: t_blow {} <= t* {} + 5dt: {good}",
                fmt_t(r.and_then(|r| r.t_blow_measured)),
                r.map_or("?".into(), |r| format!("{:.4}", r.t_star))
            ));
        }
        let a2 = p2_report.as_ref().map(|r| r.params.amplitude).unwrap_or(0.0);
        let mut c3 = config(dir, "p3", 3, 0.1);
        fixed_amplitude(&mut c3, a2);
        match run_single(&c3) {
            Ok(r) => {
                let good = r.trigger.is_none()
                    && r.failure().is_none()
                    && (r.final_t - c3.time.t_max).abs() < 1e-12
                    && r.diagnostics.mu_min >= 0.5;
                ok &= good;
                parts.push(format!(
                    "p=3 (A={a2:.4}): reached t={:.4}, min mu {:.4}: {good}",
                    r.final_t, r.diagnostics.mu_min
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("p=3 run failed: {e}"));
            }
        }
        verdicts.push((2, "critical dichotomy", verdict(ok, parts.join("; "))));
    }

    // 6. shock threshold at p = p_c (finer grid), gathered before 3 so its
    // shock runs join the cross-validation.
    let mut critical_shock_runs: Vec<BlowupReport> = Vec::new();
    let v6 = {
        let mut ok = true;
        let mut parts = Vec::new();
        for (margin, expect_event) in [(0.95, false), (2.0, true)] {
            for delta in [0.1, 0.05] {
                let mut c = config(dir, &format!("critical_{margin}_{delta}"), 2, delta);
                c.profile.margin = margin;
                c.grid.points_per_pulse = CRITICAL_POINTS_PER_PULSE;
                match run_single(&c) {
                    Ok(r) => {
                        let good = if expect_event {
                            r.t_blow_measured
                                .is_some_and(|t| (t - 4.0 / 3.0).abs() <= 0.15 * 4.0 / 3.0)
                        } else {
                            r.trigger.is_none()
                                && r.failure().is_none()
                                && (r.final_t - c.time.t_max).abs() < 1e-12
                        };
                        ok &= good;
                        parts.push(format!(
                            "q={:.2} delta={delta}: t_blow {} (min mu {:.3}): {good}",
                            r.q_max,
                            fmt_t(r.t_blow_measured),
                            r.diagnostics.mu_min
                        ));
                        if expect_event {
                            critical_shock_runs.push(r);
                        }
                    }
                    Err(e) => {
                        ok = false;
                        parts.push(format!("margin {margin} delta {delta}: {e}"));
                    }
                }
            }
        }
        verdict(ok, format!("{} [target 4/3 within 15%]", parts.join("; ")))
    };

    // Convergence study shared by 3 and 7.
    let conv = convergence_study(&config(dir, "convergence", 1, 0.1), 3);

    // 3. mu cross-validation
    {
        let mut worst = 0.0f64;
        let mut shock_runs = 0;
        for r in reports(&sweep1)
            .into_iter()
            .chain(reports(&sweep2))
            .chain(critical_shock_runs.iter())
            .filter(|r| r.trigger.is_some())
        {
            worst = worst.max(r.diagnostics.jac_gap);
            shock_runs += 1;
        }
        let (decreasing, gaps) = match &conv {
            Ok(t) => {
                let g: Vec<f64> = t.levels.iter().map(|l| l.jac_gap).collect();
                (g.windows(2).all(|w| w[1] < w[0]), format!("{:?}", g.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()))
            }
            Err(e) => (false, format!("convergence study failed: {e}")),
        };
        let pass = shock_runs > 0 && worst <= 0.02 && decreasing;
        verdicts.push((
            3,
            "mu cross-validation",
            verdict(
                pass,
                format!("worst gap {worst:.3e} over {shock_runs} shock runs (<= 0.02); under refinement {gaps}"),
            ),
        ));
    }

    // 4. asymptotic remainder
    {
        let mut c = config(dir, "compare", 1, 0.1);
        c.sweep_delta = DEFAULT_DELTA_GRID.to_vec();
        let v = match compare_mu(&c) {
            Ok(t) => {
                let sups: Vec<String> = t.summaries.iter().map(|s| format!("{:.4}", s.sup_asymptotic)).collect();
                let order = t.fit.as_ref().map(|f| f.slope);
                verdict(
                    order.is_some_and(|o| o >= 0.4),
                    format!(
                        "order {} (>= 0.4, nominal {}), sup = [{}]",
                        order.map_or("none".into(), |o| format!("{o:.4}")),
                        t.expected_order,
                        sups.join(", ")
                    ),
                )
            }
            Err(e) => verdict(false, format!("compare failed: {e}")),
        };
        verdicts.push((4, "mu asymptotic remainder", v));
    }

    // 5. constraint orders
    {
        let deltas: Vec<f64> = (0..5).map(|k| 0.01 * 0.5f64.sqrt().powi(k)).collect();
        let mut ok = true;
        let mut parts = Vec::new();
        for p in [1, 2, 3] {
            let base = PulseParams::new(0.01, 0.5, p, 0.125).expect("params");
            let phi0 = make_profile(ProfileKind::StandardBump, 0.125).expect("profile");
            for k in [1, 2] {
                match constraint_exponent_fit(&base, &deltas, &phi0, k) {
                    Ok(f) => {
                        let expected = expected_constraint_order(&base, k);
                        let good = (f.slope - expected).abs() <= 0.1;
                        ok &= good;
                        parts.push(format!("p={p} k={k}: {:.4} vs {expected:.2}", f.slope));
                    }
                    Err(e) => {
                        ok = false;
                        parts.push(format!("p={p} k={k}: {e}"));
                    }
                }
            }
        }
        verdicts.push((5, "constraint orders", verdict(ok, parts.join("; "))));
    }

    verdicts.push((6, "shock threshold at p_c", v6));

    // 7. identity suites
    {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let states: Vec<(f64, f64)> = (0..10_000)
            .map(|_| (rng.gen_range(1e-3..2.0), rng.gen_range(0.35..3.0)))
            .collect();
        let null = null_frame_residual(&states).map(|r| r.max_abs).unwrap_or(f64::INFINITY);
        let mut ok = null < 1e-12;
        let mut parts = vec![format!("null frame {null:.2e}")];
        match &conv {
            Ok(t) => {
                for q in ["transport[v]", "transport[w]", "energy[v]", "energy[w]"] {
                    let row = t.row(q).expect("row");
                    let good = row.orders.iter().all(|&o| o >= 1.0);
                    ok &= good;
                    parts.push(format!("{q} orders {:.2?}", row.orders));
                }
            }
            Err(e) => {
                ok = false;
                parts.push(format!("convergence study failed: {e}"));
            }
        }
        let mut lin = config(dir, "linear", 1, 0.1);
        let a = report_at(&sweep1, 0.1).map_or(0.125, |r| r.params.amplitude);
        fixed_amplitude(&mut lin, a * 1e-6);
        match run_single(&lin) {
            Ok(r) => {
                let drift = r.diagnostics.energy_drift;
                ok &= drift < 1e-6 && r.trigger.is_none();
                parts.push(format!("linear drift {drift:.2e}"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("linear run failed: {e}"));
            }
        }
        verdicts.push((7, "identity suites", verdict(ok, parts.join("; "))));
    }

    // 8. second-derivative law
    {
        let g = report_at(&sweep1, 0.1).and_then(|r| r.diagnostics.d2_growth.clone());
        let pass = g
            .as_ref()
            .is_some_and(|g| (0.7..=1.3).contains(&g.slope) && g.correlation > 0.95);
        let detail = g.map_or("no growth fit".into(), |g| {
            format!("slope {:.4} in [0.7, 1.3], correlation {:.4} > 0.95", g.slope, g.correlation)
        });
        verdicts.push((8, "second-derivative law", verdict(pass, detail)));
    }

    // 9. trchi-check scaling
    {
        let mut ok = true;
        let mut parts = Vec::new();
        for (p, sweep) in [(1u32, &sweep1), (2, &sweep2)] {
            let rows: Vec<(f64, f64)> = sweep
                .rows
                .iter()
                .filter_map(|r| r.report.as_ref().map(|rep| (r.delta, rep.diagnostics.trchi_check_sup)))
                .collect();
            let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let target = 0.5 * p as f64;
            let s = if rows.len() >= 3 { slope(&xs, &ys) } else { None };
            let good = s.is_some_and(|s| (s - target).abs() <= 0.2);
            ok &= good;
            parts.push(format!(
                "p={p}: order {} (target {target} +- 0.2)",
                s.map_or("none".into(), |s| format!("{s:.4}"))
            ));
        }
        verdicts.push((9, "trchi smallness scaling", verdict(ok, parts.join("; "))));
    }

    verdicts.sort_by_key(|v| v.0);
    let mut failed = 0;
    for (id, name, v) in &verdicts {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!("{tag} {id}. {name}: {}", v.detail);
    }
    println!("{} of {} criteria passed in {:.0?}", verdicts.len() - failed, verdicts.len(), started.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
