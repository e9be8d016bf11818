//! Shared fixtures for the solver benchmarks.

use shockpulse::harness::run::{base_grid, prepare, Prepared};
use shockpulse::harness::RunConfig;

/// Default run at `points_per_pulse` resolution with `fan_count` characteristics.
pub fn config(points_per_pulse: usize, fan_count: usize) -> RunConfig {
    let mut config = RunConfig::default();
    config.grid.points_per_pulse = points_per_pulse;
    config.fan_count = fan_count;
    config
}

/// Initial state and fan for `config`.
pub fn prepared(config: &RunConfig) -> Prepared {
    let params = config.resolve_params().expect("valid fixture parameters");
    let grid = base_grid(config, params.delta).expect("valid fixture grid");
    prepare(config, &params, grid, config.fan_count).expect("fixture data")
}
