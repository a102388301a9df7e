//! `agrofin solve`: one scenario end to end.

use crate::output::{fmt_f64, metric_cells, out_path, write_json, CsvWriter, METRIC_COLUMNS};
use crate::Context;
use agrofin_core::{solve_scenario, EquilibriumMetrics, FarmerMode, ScenarioParams};
use serde::Serialize;

#[derive(Serialize)]
struct SolveSummary<'a> {
    params: &'a ScenarioParams,
    mode: FarmerMode,
    gamma: f64,
    residual: f64,
    outer_iterations: usize,
    metrics: &'a EquilibriumMetrics,
}

pub fn run_solve(ctx: &Context, mode: FarmerMode) -> anyhow::Result<u8> {
    let run = solve_scenario(&ctx.params, &ctx.grid, &ctx.solver, mode)?;

    write_json(
        &out_path(&ctx.out_dir, "summary.json"),
        &SolveSummary {
            params: &ctx.params,
            mode,
            gamma: run.gamma.gamma,
            residual: run.gamma.residual,
            outer_iterations: run.gamma.outer_iterations,
            metrics: &run.metrics,
        },
    )?;

    let mut schedule = CsvWriter::new(&[
        "theta",
        "price",
        "q_supply",
        "q_financial",
        "theta_star",
        "residual",
        "iterations",
    ]);
    for pt in run.schedule.require_feasible()? {
        schedule.row(&[
            fmt_f64(pt.theta),
            fmt_f64(pt.price),
            fmt_f64(pt.q_supply),
            fmt_f64(pt.q_financial),
            fmt_f64(pt.theta_star),
            fmt_f64(pt.residual),
            pt.iterations.to_string(),
        ]);
    }
    schedule.write_to(&out_path(&ctx.out_dir, "price_schedule.csv"))?;

    let mut header = vec!["gamma"];
    header.extend_from_slice(&METRIC_COLUMNS);
    let mut metrics_csv = CsvWriter::new(&header);
    let mut cells = vec![fmt_f64(run.gamma.gamma)];
    cells.extend(metric_cells(&run.metrics));
    metrics_csv.row(&cells);
    metrics_csv.write_to(&out_path(&ctx.out_dir, "metrics.csv"))?;

    println!(
        "solved: gamma={:.9} (residual {:.2e}, {} outer iterations), default_frac={:.4}",
        run.gamma.gamma, run.gamma.residual, run.gamma.outer_iterations, run.metrics.default_frac
    );
    Ok(0)
}
