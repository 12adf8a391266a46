//! Agent-based epidemic simulator with weekly policy control.
//!
//! Agents move between home, work or school, and shops on a fixed daily
//! schedule. Transmission happens per tick between co-located agents; disease
//! progression, vaccination and household economy update once per day.

mod config;
mod engine;
mod world;

pub use config::{
    default_experiments, DiseaseParams, EconomyParams, Experiment, InterventionParams, PopulationParams,
    ScheduleParams, SimConfig,
};
pub use engine::{
    exposure_probability, reward, run_episode, run_episode_with_curve, simulate, Curve, EpisodeRun, Interventions,
    Observation, Policy, PolicyAction, Simulation, ACTION_MAX,
};
pub use world::{build_world, role_for_age, Agent, Compartment, Household, Location, Mask, Role, Vaccine, World};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    Config(String),
}
