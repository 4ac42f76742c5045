//! Monte Carlo experiments: risk estimation over replicates, improvement
//! metrics, parameter sweeps, improvement grids and CSV output.

mod config;
mod experiments;
pub mod output;
mod risk;

pub use config::{
    ComponentConfig, ExperimentConfig, GeneratorSection, GridSection, KernelChoice, LoocvCheckSection,
    MixtureConfig, Scenario, SweepAxis, SweepSection, TradeoffSection,
};
pub use experiments::{
    improvement_grid, loocv_check, scenario_at, sweep, tradeoff, GridCell, GridReport, GridSummary,
    LoocvCheckReport, LoocvCheckRow, SweepReport,
};
pub use risk::{
    estimate_risk, percentage_improvement, probability_of_improvement, EstimatorSummary, ResultRecord,
    RiskReport,
};
