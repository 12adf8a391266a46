use serde::{Deserialize, Serialize};

use super::SimError;

/// Mean dwell times are in days; each day an agent leaves its compartment with
/// probability `1 / mean_days`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiseaseParams {
    /// per-contact, per-tick transmission probability
    pub beta: f64,
    pub exposed_days: f64,
    pub asymptomatic_fraction: f64,
    pub asymptomatic_days: f64,
    pub mild_days: f64,
    pub severe_fraction: f64,
    pub severe_days: f64,
    pub hospital_days: f64,
    pub death_fraction: f64,
    pub hospital_cap_fraction: f64,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        Self {
            beta: 0.02,
            exposed_days: 3.0,
            asymptomatic_fraction: 0.4,
            asymptomatic_days: 5.0,
            mild_days: 5.0,
            severe_fraction: 0.15,
            severe_days: 3.0,
            hospital_days: 7.0,
            death_fraction: 0.15,
            hospital_cap_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationParams {
    pub population: usize,
    /// upper age bounds (inclusive) of the three age groups
    pub age_group_max: [u8; 3],
    pub age_group_weights: [f64; 3],
    pub employed_min_age: u8,
    pub mean_household_size: f64,
    pub max_household_size: usize,
    pub offices: usize,
    pub schools: usize,
    pub shops: usize,
    pub initial_exposed: usize,
    pub vaccine_consent: f64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self {
            population: 1000,
            age_group_max: [17, 59, 99],
            age_group_weights: [0.22, 0.58, 0.20],
            employed_min_age: 30,
            mean_household_size: 3.0,
            max_household_size: 10,
            offices: 20,
            schools: 5,
            shops: 10,
            initial_exposed: 10,
            vaccine_consent: 1.0,
        }
    }
}

/// Household stock amounts are per member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomyParams {
    pub initial_stock: f64,
    pub daily_consumption: f64,
    /// earned by one employed agent for a full day at work
    pub daily_income: f64,
    pub stock_cap: f64,
    pub bpl_threshold: f64,
}

impl Default for EconomyParams {
    fn default() -> Self {
        Self {
            initial_stock: 5.0,
            daily_consumption: 1.0,
            daily_income: 4.0,
            stock_cap: 10.0,
            bpl_threshold: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub days: usize,
    pub home_ticks: usize,
    pub work_ticks: usize,
    pub leisure_ticks: usize,
    pub policy_period_ticks: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            days: 100,
            home_ticks: 2,
            work_ticks: 3,
            leisure_ticks: 1,
            policy_period_ticks: 42,
        }
    }
}

impl ScheduleParams {
    pub fn ticks_per_day(&self) -> usize {
        self.home_ticks + self.work_ticks + self.leisure_ticks
    }

    pub fn total_ticks(&self) -> usize {
        self.days * self.ticks_per_day()
    }

    /// Whole policy periods; a trailing partial period is simulated without a step.
    pub fn policy_steps(&self) -> usize {
        self.total_ticks() / self.policy_period_ticks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterventionParams {
    pub high_mask_efficacy: f64,
    pub low_mask_efficacy: f64,
    pub high_masks: usize,
    pub low_masks: usize,
    pub masks_at_home: bool,
    pub v1_efficacy: f64,
    pub v2_efficacy: f64,
    pub v1_doses_per_day: usize,
    pub v2_doses_per_day: usize,
}

impl Default for InterventionParams {
    fn default() -> Self {
        Self {
            high_mask_efficacy: 0.8,
            low_mask_efficacy: 0.4,
            high_masks: 500,
            low_masks: 1000,
            masks_at_home: false,
            v1_efficacy: 0.8,
            v2_efficacy: 0.6,
            v1_doses_per_day: 6,
            v2_doses_per_day: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub population: PopulationParams,
    pub disease: DiseaseParams,
    pub economy: EconomyParams,
    pub schedule: ScheduleParams,
    pub interventions: InterventionParams,
    pub reward_weights: [f64; 3],
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: PopulationParams::default(),
            disease: DiseaseParams::default(),
            economy: EconomyParams::default(),
            schedule: ScheduleParams::default(),
            interventions: InterventionParams::default(),
            reward_weights: [1.0; 3],
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be in [0, 1], got {p}")))
    }
}

fn positive(name: &str, x: f64) -> Result<(), SimError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be positive, got {x}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let p = &self.population;
        if p.population == 0 {
            return Err(SimError::Config("population must be positive".into()));
        }
        if p.initial_exposed > p.population {
            return Err(SimError::Config(format!(
                "initial_exposed {} exceeds population {}",
                p.initial_exposed, p.population
            )));
        }
        if p.offices == 0 || p.schools == 0 || p.shops == 0 {
            return Err(SimError::Config("offices, schools and shops must each be at least 1".into()));
        }
        if p.age_group_max[0] >= p.age_group_max[1] || p.age_group_max[1] >= p.age_group_max[2] || p.age_group_max[2] > 99 {
            return Err(SimError::Config("age_group_max must be increasing and at most 99".into()));
        }
        if p.age_group_weights.iter().any(|w| *w < 0.0) || p.age_group_weights.iter().sum::<f64>() <= 0.0 {
            return Err(SimError::Config("age_group_weights must be non-negative with a positive sum".into()));
        }
        positive("mean_household_size", p.mean_household_size)?;
        if p.max_household_size == 0 {
            return Err(SimError::Config("max_household_size must be at least 1".into()));
        }
        probability("vaccine_consent", p.vaccine_consent)?;

        let d = &self.disease;
        for (name, v) in [
            ("beta", d.beta),
            ("asymptomatic_fraction", d.asymptomatic_fraction),
            ("severe_fraction", d.severe_fraction),
            ("death_fraction", d.death_fraction),
            ("hospital_cap_fraction", d.hospital_cap_fraction),
        ] {
            probability(name, v)?;
        }
        for (name, v) in [
            ("exposed_days", d.exposed_days),
            ("asymptomatic_days", d.asymptomatic_days),
            ("mild_days", d.mild_days),
            ("severe_days", d.severe_days),
            ("hospital_days", d.hospital_days),
        ] {
            if v < 1.0 || !v.is_finite() {
                return Err(SimError::Config(format!("{name} must be at least 1 day, got {v}")));
            }
        }

        let e = &self.economy;
        for (name, v) in [
            ("initial_stock", e.initial_stock),
            ("daily_consumption", e.daily_consumption),
            ("daily_income", e.daily_income),
            ("stock_cap", e.stock_cap),
            ("bpl_threshold", e.bpl_threshold),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(SimError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }

        let s = &self.schedule;
        if s.days == 0 || s.policy_period_ticks == 0 || s.work_ticks == 0 {
            return Err(SimError::Config("days, work_ticks and policy_period_ticks must be positive".into()));
        }
        if s.policy_period_ticks > s.total_ticks() {
            return Err(SimError::Config("policy period longer than the simulation".into()));
        }

        let i = &self.interventions;
        for (name, v) in [
            ("high_mask_efficacy", i.high_mask_efficacy),
            ("low_mask_efficacy", i.low_mask_efficacy),
            ("v1_efficacy", i.v1_efficacy),
            ("v2_efficacy", i.v2_efficacy),
        ] {
            probability(name, v)?;
        }
        if self.reward_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(SimError::Config("reward weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Intervention resources that differ between experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub high_masks: usize,
    pub low_masks: usize,
    pub v1_doses_per_day: usize,
    pub v2_doses_per_day: usize,
}

impl Experiment {
    pub fn new(name: &str, high_masks: usize, low_masks: usize) -> Self {
        Self {
            name: name.to_string(),
            high_masks,
            low_masks,
            v1_doses_per_day: 6,
            v2_doses_per_day: 6,
        }
    }

    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone();
        cfg.interventions.high_masks = self.high_masks;
        cfg.interventions.low_masks = self.low_masks;
        cfg.interventions.v1_doses_per_day = self.v1_doses_per_day;
        cfg.interventions.v2_doses_per_day = self.v2_doses_per_day;
        cfg
    }
}

pub fn default_experiments() -> Vec<Experiment> {
    vec![
        Experiment::new("Baseline", 500, 1000),
        Experiment::new("HighMask", 800, 1000),
        Experiment::new("LowMask", 100, 1000),
    ]
}
