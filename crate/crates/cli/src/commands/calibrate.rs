//! `agrofin calibrate-market-b`: find the demand level for a target default
//! rate at scaled-up aggregate volatility.

use crate::output::{out_path, write_json};
use crate::Context;
use agrofin_core::{calibrate_market_b, solve_scenario, FarmerMode, ScenarioParams};
use serde::Serialize;

#[derive(Serialize)]
struct CalibrationReport<'a> {
    base: &'a ScenarioParams,
    target_default: f64,
    sigma_bar_multiplier: f64,
    market_b: ScenarioParams,
    achieved_default_frac: f64,
}

pub fn run_calibrate(
    ctx: &Context,
    target: Option<f64>,
    sigma_mult: Option<f64>,
) -> anyhow::Result<u8> {
    let section = ctx.config.market_b.clone().unwrap_or_default();
    let target = target.or(section.target_default).unwrap_or(0.02);
    let multiplier = sigma_mult.or(section.sigma_bar_multiplier).unwrap_or(2.0);

    let market_b = calibrate_market_b(&ctx.params, target, multiplier, &ctx.grid, &ctx.solver)?;
    let check = solve_scenario(
        &market_b.with_alpha(0.0),
        &ctx.grid,
        &ctx.solver,
        FarmerMode::Rational,
    )?;

    write_json(
        &out_path(&ctx.out_dir, "market_b.json"),
        &CalibrationReport {
            base: &ctx.params,
            target_default: target,
            sigma_bar_multiplier: multiplier,
            market_b,
            achieved_default_frac: check.metrics.default_frac,
        },
    )?;
    println!(
        "market B: w = {:.6} (x{:.2} of base), default_frac = {:.4}",
        market_b.w,
        market_b.w / ctx.params.w,
        check.metrics.default_frac
    );
    Ok(0)
}
