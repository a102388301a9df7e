pub mod calibrate;
pub mod figure;
pub mod solve;
pub mod sweep;
pub mod validate;

pub use calibrate::run_calibrate;
pub use figure::run_figure;
pub use solve::run_solve;
pub use sweep::run_sweep_cmd;
pub use validate::run_validate;
