use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{build_world, Compartment, Location, Mask, Role, Vaccine, World};
use super::{SimConfig, SimError};
use crate::trace::{Episode, EpisodeKind, Step};

pub const ACTION_MAX: f64 = 7.0;

/// Weekly intervention plan; every component is in days within the week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAction(pub [f64; 8]);

impl PolicyAction {
    pub fn lockdown_start(&self) -> f64 {
        self.0[0]
    }

    pub fn lockdown_duration(&self) -> f64 {
        self.0[1]
    }

    /// Start and duration of the drive for age group `g` (0–17, 18–59, 60–99).
    pub fn vaccination(&self, g: usize) -> (f64, f64) {
        (self.0[2 + 2 * g], self.0[3 + 2 * g])
    }

    /// Clamps into [0, 7]; returns the indices that had to be clamped.
    /// Non-finite components become 0.
    pub fn clamped(&self) -> (PolicyAction, Vec<usize>) {
        let mut out = self.0;
        let mut fixed = Vec::new();
        for (i, v) in out.iter_mut().enumerate() {
            let c = if v.is_finite() { v.clamp(0.0, ACTION_MAX) } else { 0.0 };
            if c != *v {
                fixed.push(i);
                *v = c;
            }
        }
        (PolicyAction(out), fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub infected_mild_frac: f64,
    pub hospitalized_frac: f64,
    pub min_stock_house_frac: f64,
}

impl Observation {
    pub fn to_array(self) -> [f64; 3] {
        [self.infected_mild_frac, self.hospitalized_frac, self.min_stock_house_frac]
    }

    pub fn from_slice(v: &[f64]) -> Observation {
        Observation {
            infected_mild_frac: v[0],
            hospitalized_frac: v[1],
            min_stock_house_frac: v[2],
        }
    }
}

/// Weighted complement of the observation; lies in `[0, Σw]`.
pub fn reward(obs: &Observation, weights: &[f64; 3]) -> f64 {
    obs.to_array().iter().zip(weights).map(|(o, w)| w * (1.0 - o)).sum()
}

/// Something that picks a weekly action from an observation.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> PolicyAction;

    /// Reward earned by the last action.
    fn reward(&mut self, _reward: f64, _next: &Observation) {}

    fn end_episode(&mut self) {}

    /// Switches between learning and greedy execution.
    fn set_training(&mut self, _training: bool) {}
}

impl<F: FnMut(&Observation) -> PolicyAction> Policy for F {
    fn act(&mut self, obs: &Observation) -> PolicyAction {
        self(obs)
    }
}

/// Tick ranges of the current week's interventions, in absolute ticks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interventions {
    pub lockdown: Range<usize>,
    pub drives: [Range<usize>; 3],
}

fn span(start: f64, duration: f64, week_start: usize, tpd: usize, week_end: usize) -> Range<usize> {
    let a = week_start + (start * tpd as f64).floor() as usize;
    let b = week_start + ((start + duration) * tpd as f64).floor() as usize;
    a.min(week_end)..b.min(week_end)
}

pub struct Simulation {
    pub config: SimConfig,
    pub world: World,
    pub tick: usize,
    pub interventions: Interventions,
    pub warnings: Vec<String>,
    /// agents ever exposed, including the initial seeds
    pub ever_infected: usize,
    rng: ChaCha8Rng,
    at_shop_today: Vec<bool>,
    work_ticks_today: Vec<u32>,
    hospital_cap: usize,
    location_slots: usize,
}

impl Simulation {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Simulation, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = build_world(config, &mut rng)?;
        let n = world.agents.len();
        let p = &config.population;
        Ok(Simulation {
            ever_infected: world.count(Compartment::Exposed),
            hospital_cap: (config.disease.hospital_cap_fraction * n as f64).floor() as usize,
            location_slots: world.households.len() + p.offices + p.schools + p.shops,
            config: config.clone(),
            world,
            tick: 0,
            interventions: Interventions::default(),
            warnings: Vec::new(),
            rng,
            at_shop_today: vec![false; n],
            work_ticks_today: vec![0; n],
        })
    }

    pub fn total_ticks(&self) -> usize {
        self.config.schedule.total_ticks()
    }

    pub fn finished(&self) -> bool {
        self.tick >= self.total_ticks()
    }

    pub fn hospital_cap(&self) -> usize {
        self.hospital_cap
    }

    pub fn lockdown_active(&self, tick: usize) -> bool {
        self.interventions.lockdown.contains(&tick)
    }

    /// Schedules the given action for the week starting at `week_start`.
    pub fn apply_policy(&mut self, action: &PolicyAction, week_start: usize) {
        let (action, fixed) = action.clamped();
        if !fixed.is_empty() {
            let msg = format!("tick {week_start}: action components {fixed:?} clamped to [0, 7]");
            log::warn!("{msg}");
            self.warnings.push(msg);
        }
        let tpd = self.config.schedule.ticks_per_day();
        let end = week_start + self.config.schedule.policy_period_ticks;
        self.interventions.lockdown =
            span(action.lockdown_start(), action.lockdown_duration(), week_start, tpd, end);
        for g in 0..3 {
            let (s, d) = action.vaccination(g);
            self.interventions.drives[g] = span(s, d, week_start, tpd, end);
        }
    }

    #[cfg(test)]
    pub(crate) fn at_shop_today_for_test(&self) -> &[bool] {
        &self.at_shop_today
    }

    pub fn clear_interventions(&mut self) {
        self.interventions = Interventions::default();
    }

    pub fn location(&self, agent: usize, tick: usize) -> Location {
        let s = &self.config.schedule;
        let a = &self.world.agents[agent];
        let home = Location::Home(a.household);
        let tod = tick % s.ticks_per_day();
        if tod < s.home_ticks || a.compartment.is_confined() || self.lockdown_active(tick) {
            return home;
        }
        if tod < s.home_ticks + s.work_ticks {
            return match a.role {
                Role::Employed => Location::Office(a.workplace),
                Role::Student => Location::School(a.workplace),
            };
        }
        if self.at_shop_today[agent] {
            Location::Shop(a.shop)
        } else {
            home
        }
    }

    pub fn observe(&self) -> Observation {
        let n = self.world.agents.len() as f64;
        let threshold = self.config.economy.bpl_threshold;
        let bpl = self
            .world
            .households
            .iter()
            .filter(|h| h.stock < threshold * h.members.len() as f64)
            .count();
        Observation {
            infected_mild_frac: self.world.count(Compartment::InfectedMild) as f64 / n,
            hospitalized_frac: self.world.count(Compartment::Hospitalized) as f64 / n,
            min_stock_house_frac: bpl as f64 / self.world.households.len() as f64,
        }
    }

    /// Advances one tick: daily progression and vaccination at the first tick
    /// of a day, transmission every tick, economy at the last tick of a day.
    pub fn step(&mut self) {
        let tpd = self.config.schedule.ticks_per_day();
        let tod = self.tick % tpd;
        let day = self.tick / tpd;
        if tod == 0 {
            if day > 0 {
                self.progression_update();
            }
            self.vaccination_update(day);
            for i in 0..self.world.agents.len() {
                self.at_shop_today[i] = self.rng.random::<f64>() < self.world.agents[i].shop_preference;
            }
            self.work_ticks_today.fill(0);
        }
        self.transmission_update();
        if tod + 1 == tpd {
            self.economy_update();
        }
        self.tick += 1;
    }

    fn mask_efficacy(&self, mask: Mask, loc: Location) -> f64 {
        let iv = &self.config.interventions;
        if matches!(loc, Location::Home(_)) && !iv.masks_at_home {
            return 0.0;
        }
        match mask {
            Mask::None => 0.0,
            Mask::HighEff => iv.high_mask_efficacy,
            Mask::LowEff => iv.low_mask_efficacy,
        }
    }

    fn vaccine_efficacy(&self, v: Vaccine) -> f64 {
        match v {
            Vaccine::None => 0.0,
            Vaccine::V1 => self.config.interventions.v1_efficacy,
            Vaccine::V2 => self.config.interventions.v2_efficacy,
        }
    }

    pub fn transmission_update(&mut self) {
        let tick = self.tick;
        let homes = self.world.households.len();
        let (offices, schools) = (self.config.population.offices, self.config.population.schools);
        let n = self.world.agents.len();
        let mut infectious = vec![0u32; self.location_slots];
        let mut mask_sum = vec![0.0f64; self.location_slots];
        let mut where_: Vec<(Location, usize)> = Vec::with_capacity(n);
        for i in 0..n {
            let loc = self.location(i, tick);
            let slot = loc.slot(homes, offices, schools);
            where_.push((loc, slot));
            let a = &self.world.agents[i];
            if matches!(loc, Location::Office(_)) {
                self.work_ticks_today[i] += 1;
            }
            if a.compartment.is_infectious() {
                infectious[slot] += 1;
                mask_sum[slot] += self.mask_efficacy(a.mask, loc);
            }
        }
        let beta = self.config.disease.beta;
        for (i, &(loc, slot)) in where_.iter().enumerate() {
            let k = infectious[slot];
            let a = &self.world.agents[i];
            if k == 0 || !a.compartment.is_susceptible() {
                continue;
            }
            let source = 1.0 - mask_sum[slot] / k as f64;
            let target = (1.0 - self.mask_efficacy(a.mask, loc)) * (1.0 - self.vaccine_efficacy(a.vaccine));
            let p = exposure_probability(beta * source * target, k);
            if self.rng.random::<f64>() < p {
                let a = &mut self.world.agents[i];
                a.compartment = Compartment::Exposed;
                a.days_in_compartment = 0;
                self.ever_infected += 1;
            }
        }
    }

    pub fn progression_update(&mut self) {
        let d = self.config.disease.clone();
        let mut hospitalized = self.world.count(Compartment::Hospitalized);
        for i in 0..self.world.agents.len() {
            let c = self.world.agents[i].compartment;
            let mean_days = match c {
                Compartment::Exposed => d.exposed_days,
                Compartment::Asymptomatic => d.asymptomatic_days,
                Compartment::InfectedMild => d.mild_days,
                Compartment::InfectedSevere => d.severe_days,
                Compartment::Hospitalized => d.hospital_days,
                _ => continue,
            };
            self.world.agents[i].days_in_compartment += 1;
            if self.rng.random::<f64>() >= 1.0 / mean_days {
                continue;
            }
            let branch = self.rng.random::<f64>();
            let next = match c {
                Compartment::Exposed if branch < d.asymptomatic_fraction => Compartment::Asymptomatic,
                Compartment::Exposed => Compartment::InfectedMild,
                Compartment::Asymptomatic => Compartment::Recovered,
                Compartment::InfectedMild if branch < d.severe_fraction => Compartment::InfectedSevere,
                Compartment::InfectedMild => Compartment::Recovered,
                Compartment::InfectedSevere if hospitalized < self.hospital_cap => {
                    hospitalized += 1;
                    Compartment::Hospitalized
                }
                // no free bed: stays severe and tries again tomorrow
                Compartment::InfectedSevere => continue,
                Compartment::Hospitalized => {
                    hospitalized -= 1;
                    if branch < d.death_fraction {
                        Compartment::Deceased
                    } else {
                        Compartment::Recovered
                    }
                }
                _ => unreachable!(),
            };
            let a = &mut self.world.agents[i];
            a.compartment = next;
            a.days_in_compartment = 0;
        }
    }

    /// Dispenses the day's doses to consenting, unvaccinated susceptible agents
    /// of every age group with a drive touching this day, oldest group first.
    pub fn vaccination_update(&mut self, day: usize) {
        let tpd = self.config.schedule.ticks_per_day();
        let today = day * tpd..(day + 1) * tpd;
        let mut v1 = self.config.interventions.v1_doses_per_day;
        let mut v2 = self.config.interventions.v2_doses_per_day;
        for g in (0..3).rev() {
            let drive = &self.interventions.drives[g];
            if drive.start >= today.end || drive.end <= today.start || drive.is_empty() {
                continue;
            }
            let eligible: Vec<usize> = self
                .world
                .agents
                .iter()
                .filter(|a| {
                    a.age_group == g
                        && a.consents_to_vaccine
                        && a.vaccine == Vaccine::None
                        && a.compartment == Compartment::Susceptible
                })
                .map(|a| a.id)
                .collect();
            let chosen: Vec<usize> = eligible.choose_multiple(&mut self.rng, v1 + v2).copied().collect();
            for id in chosen {
                let a = &mut self.world.agents[id];
                if v1 > 0 {
                    a.vaccine = Vaccine::V1;
                    v1 -= 1;
                } else {
                    a.vaccine = Vaccine::V2;
                    v2 -= 1;
                }
                a.compartment = Compartment::Protected;
                a.days_in_compartment = 0;
            }
        }
    }

    pub fn economy_update(&mut self) {
        let e = self.config.economy.clone();
        let work_ticks = self.config.schedule.work_ticks as f64;
        for h in &mut self.world.households {
            let mut income = 0.0;
            let mut eaters = 0usize;
            for &m in &h.members {
                let a = &self.world.agents[m];
                if a.compartment != Compartment::Deceased {
                    eaters += 1;
                }
                if a.role == Role::Employed {
                    income += e.daily_income * self.work_ticks_today[m] as f64 / work_ticks;
                }
            }
            let cap = e.stock_cap * h.members.len() as f64;
            h.stock = (h.stock + income - e.daily_consumption * eaters as f64).min(cap);
        }
    }
}

/// Chance that at least one of `k` contacts transmits with per-contact chance `beta_eff`.
pub fn exposure_probability(beta_eff: f64, k: u32) -> f64 {
    1.0 - (1.0 - beta_eff).powi(k as i32)
}

/// Per-tick compartment counts, `S, E, A, IM, IS, H, R, D, P`.
pub type Curve = Vec<[usize; 9]>;

/// Output of one simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub episode: Episode,
    /// clamped-action notices
    pub warnings: Vec<String>,
    /// compartment counts after every tick; empty unless requested
    pub curve: Curve,
}

/// One policy-driven run. Each step holds the observation the action was
/// chosen on and the mean per-tick reward over the following week.
pub fn run_episode(
    config: &SimConfig,
    policy: &mut dyn Policy,
    seed: u64,
    run_name: &str,
    kind: EpisodeKind,
) -> Result<(Episode, Vec<String>), SimError> {
    let run = simulate(config, policy, seed, run_name, kind, false)?;
    Ok((run.episode, run.warnings))
}

/// Like [`run_episode`], also returning the compartment counts after every tick.
pub fn run_episode_with_curve(
    config: &SimConfig,
    policy: &mut dyn Policy,
    seed: u64,
    run_name: &str,
    kind: EpisodeKind,
) -> Result<(Episode, Curve), SimError> {
    let run = simulate(config, policy, seed, run_name, kind, true)?;
    Ok((run.episode, run.curve))
}

pub fn simulate(
    config: &SimConfig,
    policy: &mut dyn Policy,
    seed: u64,
    run_name: &str,
    kind: EpisodeKind,
    record_curve: bool,
) -> Result<EpisodeRun, SimError> {
    let mut sim = Simulation::new(config, seed)?;
    let period = config.schedule.policy_period_ticks;
    let mut steps = Vec::with_capacity(config.schedule.policy_steps());
    let mut curve = Vec::new();
    let mut tick_and_record = |sim: &mut Simulation| {
        sim.step();
        if record_curve {
            curve.push(sim.world.compartment_counts());
        }
    };

    for week in 0..config.schedule.policy_steps() {
        let start = week * period;
        let obs = sim.observe();
        let raw = policy.act(&obs);
        sim.apply_policy(&raw, start);
        let mut total = 0.0;
        for _ in 0..period {
            tick_and_record(&mut sim);
            total += reward(&sim.observe(), &config.reward_weights);
        }
        let r = total / period as f64;
        policy.reward(r, &sim.observe());
        steps.push(Step {
            tick: start as u64,
            observation: obs.to_array().to_vec(),
            action: raw.clamped().0 .0.to_vec(),
            reward: r,
        });
    }
    sim.clear_interventions();
    while !sim.finished() {
        tick_and_record(&mut sim);
    }
    policy.end_episode();
    Ok(EpisodeRun {
        episode: Episode {
            run_name: run_name.to_string(),
            kind,
            steps,
        },
        warnings: sim.warnings,
        curve,
    })
}
