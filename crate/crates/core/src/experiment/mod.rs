//! Config-driven experiments: designs, training data, fitting, Greeks,
//! hedging and metrics, with bundled presets.

mod config;
mod gold;
mod online;
mod pipeline;
mod presets;
mod runner;
mod variants;

pub use config::{
    CaseStudy, DataConfig, DesignConfig, DesignKind, ExperimentConfig, GoldConfig, HedgeConfig, InitialWealth,
    ModelConfig, OnlineConfig, PathStarts, Scale, SweepConfig, TestGridChoice, TrendChoice, FAST_MAX_GOLD_PATHS,
    FAST_MAX_HEDGE_PATHS, FAST_MAX_INNER, FAST_MAX_N,
};
pub use gold::{gold_step, implied_delta_or, implied_delta_pattern, Benchmark, GoldGrid, SiteBenchmarks};
pub use online::{run_online, run_online_demo, OnlineReport, OnlineRun, OnlineStep, StickySummary};
pub use pipeline::{
    build_design, contract_of, convention_for, evaluate_surface, fit_config, hedge_paths, market_model, path_count,
    run_hedge, run_single, trend_spec, training_set, HedgeReport, MetricsRow, RunOutput, SurfaceEstimates,
};
pub use presets::{preset, preset_names, resolve};
pub use runner::{benchmark_for, planned_runs, run_experiment, write_run, ExperimentReport, OutputLayout};
pub use variants::Variant;
