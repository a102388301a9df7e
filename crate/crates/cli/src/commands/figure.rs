//! `agrofin figure <1..6>`: per-figure CSV data plus a gnuplot script.

use crate::commands::sweep::feasible_fraction;
use crate::output::{fmt_f64, fmt_opt, gnuplot_script, out_path, write_json, write_text, CsvWriter};
use crate::parallel::run_sweep_parallel;
use crate::Context;
use agrofin_core::{
    analytic, calibrate_market_b, clear_schedule, default_alpha_values, solve_gamma,
    solve_scenario, FarmerMode, ScenarioParams, SweepMode, SweepResult, SweepSpec,
    SweptParameter,
};
use anyhow::{bail, Context as _};

pub fn run_figure(ctx: &Context, id: u8, alpha_finite: Option<f64>) -> anyhow::Result<u8> {
    match id {
        1 => figure1(ctx, alpha_finite.unwrap_or(0.4)),
        2 => figure2(ctx),
        3 => figure3(ctx),
        4 => figure4(ctx),
        5 => figure5(ctx),
        6 => figure6(ctx),
        other => bail!("figure id must be 1..=6, got {other}"),
    }
}

fn alpha_sweep(ctx: &Context, mode: SweepMode) -> anyhow::Result<(SweepSpec, SweepResult)> {
    let values = ctx.config.sweep_values(|| {
        Ok(default_alpha_values(
            &ctx.params,
            &ctx.grid,
            &ctx.solver,
            ctx.config.sweep_margin(),
            51,
        )?)
    })?;
    let spec = SweepSpec {
        base: ctx.params,
        parameter: SweptParameter::Alpha,
        values,
        mode,
        grid: ctx.grid,
        solver: ctx.solver,
    };
    let result = run_sweep_parallel(&spec)?;
    Ok((spec, result))
}

fn exit_for_fraction(fraction: f64) -> u8 {
    if fraction >= 0.9 {
        0
    } else {
        3
    }
}

/// Price schedule against θ − θ₀ for α = 0 and one finite α.
///
/// If the rational expectation has no fixed point at the finite α, the
/// column falls back to re-clearing with the α=0 expectation and marks the
/// nodes that still have no equilibrium.
fn figure1(ctx: &Context, alpha_finite: f64) -> anyhow::Result<u8> {
    let at_zero = solve_scenario(
        &ctx.params.with_alpha(0.0),
        &ctx.grid,
        &ctx.solver,
        FarmerMode::Rational,
    )?;
    let params_finite = ctx.params.with_alpha(alpha_finite);
    let finite_schedule = match solve_gamma(
        &params_finite,
        &at_zero.schedule.grid,
        ctx.solver.gamma_guess,
        &ctx.solver,
    ) {
        Ok(sol) => sol.schedule,
        Err(err) => {
            eprintln!(
                "note: no rational expectation at alpha={alpha_finite} ({err}); \
                 re-clearing with the alpha=0 expectation"
            );
            clear_schedule(
                at_zero.gamma.gamma,
                &at_zero.schedule.grid,
                &params_finite,
                &ctx.solver,
            )
        }
    };

    let mut csv = CsvWriter::new(&[
        "theta_minus_theta0",
        "price_alpha0",
        "price_alpha_finite",
        "finite_feasible",
    ]);
    let mut feasible = 0usize;
    let n = at_zero.schedule.grid.len();
    for k in 0..n {
        let theta = at_zero.schedule.grid.nodes[k];
        let p0 = at_zero.schedule.points[k]
            .as_ref()
            .map(|pt| pt.price)
            .expect("alpha=0 schedule is fully feasible");
        let pf = finite_schedule.points[k].as_ref().map(|pt| pt.price);
        if pf.is_some() {
            feasible += 1;
        }
        csv.row(&[
            fmt_f64(theta - ctx.params.theta0),
            fmt_f64(p0),
            fmt_opt(pf),
            if pf.is_some() { "1" } else { "0" }.to_string(),
        ]);
    }
    csv.write_to(&out_path(&ctx.out_dir, "fig1.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig1.gp"),
        &gnuplot_script(
            "fig1.csv",
            "Equilibrium price vs fitness shock",
            "price",
            &[(2, "alpha = 0"), (3, "finite alpha")],
        ),
    )?;
    Ok(exit_for_fraction(feasible as f64 / n as f64))
}

/// Average price and price dispersion against α.
fn figure2(ctx: &Context) -> anyhow::Result<u8> {
    let (spec, result) = alpha_sweep(ctx, SweepMode::Rational)?;
    let mut csv = CsvWriter::new(&["alpha", "price_mean", "price_std"]);
    for row in &result.rows {
        if let Some(r) = &row.rational {
            csv.row(&[
                fmt_f64(row.value),
                fmt_f64(r.metrics.price_mean),
                fmt_f64(r.metrics.price_std),
            ]);
        }
    }
    csv.write_to(&out_path(&ctx.out_dir, "fig2.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig2.gp"),
        &gnuplot_script(
            "fig2.csv",
            "Average equilibrium price vs market integration",
            "price",
            &[(2, "mean price"), (3, "price std")],
        ),
    )?;
    Ok(exit_for_fraction(feasible_fraction(&spec, &result)))
}

/// Investor and farmer returns (with dispersions) against α, plus the
/// closed-form single-farmer return at the per-β optimal α over a σ̄ grid.
fn figure3(ctx: &Context) -> anyhow::Result<u8> {
    let (spec, result) = alpha_sweep(ctx, SweepMode::Rational)?;
    let mut csv = CsvWriter::new(&[
        "alpha",
        "mu_s",
        "sigma_s",
        "mu_f",
        "sigma_f",
        "sigma_f_aggregate",
    ]);
    for row in &result.rows {
        if let Some(r) = &row.rational {
            csv.row(&[
                fmt_f64(row.value),
                fmt_opt(r.metrics.mu_s),
                fmt_opt(r.metrics.sigma_s),
                fmt_f64(r.metrics.mu_f),
                fmt_f64(r.metrics.sigma_f),
                fmt_f64(r.metrics.sigma_f_aggregate),
            ]);
        }
    }
    csv.write_to(&out_path(&ctx.out_dir, "fig3.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig3.gp"),
        &gnuplot_script(
            "fig3.csv",
            "Returns vs market integration",
            "return",
            &[(2, "mu_S"), (4, "mu_F")],
        ),
    )?;

    // closed-form companion: μ_S at the per-β optimal α over a σ̄ grid,
    // kept inside the approximation's validity region
    let betas = [0.2, 0.4, 0.6];
    let mut analytic_csv = CsvWriter::new(&[
        "sigma_bar",
        "mu_s_beta_0_2",
        "mu_s_beta_0_4",
        "mu_s_beta_0_6",
    ]);
    for k in 0..21 {
        let sigma_bar = 0.02 + 0.005 * k as f64;
        let mut cells = vec![fmt_f64(sigma_bar)];
        for beta in betas {
            let params = ScenarioParams {
                beta,
                sigma_bar,
                ..ctx.params
            };
            let sol = analytic::AnalyticSolution::for_params(&params)?;
            // the numerator coefficient is positive only below γ₀/2
            let star = analytic::analytic_alpha_star(&params, sol.gamma0 / 2.0)?;
            cells.push(fmt_f64(star.mu_s));
        }
        analytic_csv.row(&cells);
    }
    analytic_csv.write_to(&out_path(&ctx.out_dir, "fig3_analytic.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig3_analytic.gp"),
        &gnuplot_script(
            "fig3_analytic.csv",
            "Closed-form investor return at optimal integration",
            "mu_S at alpha*",
            &[(2, "beta = 0.2"), (3, "beta = 0.4"), (4, "beta = 0.6")],
        ),
    )?;
    Ok(exit_for_fraction(feasible_fraction(&spec, &result)))
}

/// Rational vs naive returns against α.
fn figure4(ctx: &Context) -> anyhow::Result<u8> {
    let (spec, result) = alpha_sweep(ctx, SweepMode::Both)?;
    let mut csv = CsvWriter::new(&[
        "alpha",
        "mu_f_rational",
        "mu_f_naive",
        "mu_s_rational",
        "mu_s_naive",
    ]);
    for row in &result.rows {
        if let (Some(r), Some(n)) = (&row.rational, &row.naive) {
            csv.row(&[
                fmt_f64(row.value),
                fmt_f64(r.metrics.mu_f),
                fmt_f64(n.metrics.mu_f),
                fmt_opt(r.metrics.mu_s),
                fmt_opt(n.metrics.mu_s),
            ]);
        }
    }
    csv.write_to(&out_path(&ctx.out_dir, "fig4.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig4.gp"),
        &gnuplot_script(
            "fig4.csv",
            "Rational vs naive production planning",
            "return",
            &[
                (2, "mu_F rational"),
                (3, "mu_F naive"),
                (4, "mu_S rational"),
                (5, "mu_S naive"),
            ],
        ),
    )?;
    Ok(exit_for_fraction(feasible_fraction(&spec, &result)))
}

/// Production level, production dispersion and default statistics against α.
fn figure5(ctx: &Context) -> anyhow::Result<u8> {
    let (spec, result) = alpha_sweep(ctx, SweepMode::Rational)?;
    let mut csv = CsvWriter::new(&[
        "alpha",
        "q_mean",
        "q_std",
        "default_frac",
        "default_frac_std",
    ]);
    for row in &result.rows {
        if let Some(r) = &row.rational {
            csv.row(&[
                fmt_f64(row.value),
                fmt_f64(r.metrics.q_mean),
                fmt_f64(r.metrics.q_std),
                fmt_f64(r.metrics.default_frac),
                fmt_f64(r.metrics.default_frac_std),
            ]);
        }
    }
    csv.write_to(&out_path(&ctx.out_dir, "fig5.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig5.gp"),
        &gnuplot_script(
            "fig5.csv",
            "Production and defaults vs market integration",
            "goods / fraction",
            &[(2, "Q mean"), (3, "Q std"), (4, "default fraction")],
        ),
    )?;
    Ok(exit_for_fraction(feasible_fraction(&spec, &result)))
}

/// Relative production-volatility growth for the base market A and the
/// calibrated low-default market B, on a common α grid.
fn figure6(ctx: &Context) -> anyhow::Result<u8> {
    let market_b_cfg = ctx.config.market_b.clone().unwrap_or_default();
    let target = market_b_cfg.target_default.unwrap_or(0.02);
    let multiplier = market_b_cfg.sigma_bar_multiplier.unwrap_or(2.0);
    let market_b = calibrate_market_b(&ctx.params, target, multiplier, &ctx.grid, &ctx.solver)
        .context("market B calibration")?;
    write_json(&out_path(&ctx.out_dir, "market_b.json"), &market_b)?;

    let values = ctx.config.sweep_values(|| {
        Ok(default_alpha_values(
            &ctx.params,
            &ctx.grid,
            &ctx.solver,
            ctx.config.sweep_margin(),
            11,
        )?)
    })?;
    let spec_a = SweepSpec {
        base: ctx.params,
        parameter: SweptParameter::Alpha,
        values: values.clone(),
        mode: SweepMode::Rational,
        grid: ctx.grid,
        solver: ctx.solver,
    };
    let spec_b = SweepSpec {
        base: market_b,
        ..spec_a.clone()
    };
    let result_a = run_sweep_parallel(&spec_a)?;
    let result_b = run_sweep_parallel(&spec_b)?;

    let q_std_at = |result: &SweepResult, k: usize| {
        result.rows[k].rational.as_ref().map(|r| r.metrics.q_std)
    };
    let base_a = q_std_at(&result_a, 0);
    let base_b = q_std_at(&result_b, 0);
    let mut csv = CsvWriter::new(&[
        "alpha",
        "sigma_q_relative_market_a",
        "sigma_q_relative_market_b",
    ]);
    let mut feasible = 0usize;
    for k in 0..values.len() {
        let rel_a = match (q_std_at(&result_a, k), base_a) {
            (Some(q), Some(b)) => Some(q / b),
            _ => None,
        };
        let rel_b = match (q_std_at(&result_b, k), base_b) {
            (Some(q), Some(b)) => Some(q / b),
            _ => None,
        };
        if rel_a.is_some() && rel_b.is_some() {
            feasible += 1;
        }
        csv.row(&[fmt_f64(values[k]), fmt_opt(rel_a), fmt_opt(rel_b)]);
    }
    csv.write_to(&out_path(&ctx.out_dir, "fig6.csv"))?;
    write_text(
        &out_path(&ctx.out_dir, "fig6.gp"),
        &gnuplot_script(
            "fig6.csv",
            "Relative production volatility growth",
            "sigma_Q(alpha) / sigma_Q(0)",
            &[(2, "market A (high defaults)"), (3, "market B (low defaults)")],
        ),
    )?;
    Ok(exit_for_fraction(feasible as f64 / values.len() as f64))
}
