//! Parallel sweep execution.
//!
//! Points are solved with rayon's order-preserving map and assembled
//! sequentially, so the result is byte-identical to the sequential path no
//! matter how many worker threads run.

use agrofin_core::{assemble_sweep, prepare_context, solve_sweep_point, SweepResult, SweepSpec};
use rayon::prelude::*;

pub fn run_sweep_parallel(spec: &SweepSpec) -> agrofin_core::Result<SweepResult> {
    spec.validate()?;
    let context = prepare_context(spec)?;
    let points: Vec<_> = spec
        .values
        .par_iter()
        .map(|&value| solve_sweep_point(spec, &context, value))
        .collect();
    Ok(assemble_sweep(spec, points))
}
