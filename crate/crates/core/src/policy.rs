//! Stand-in policies for benchmarking: random, a fixed heuristic and a tabular
//! Q-learner, each optionally wrapped with action and/or observation noise.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{BinningSpec, Discretizer};
use crate::sim::{simulate, Curve, Observation, Policy, PolicyAction, SimConfig, SimError, ACTION_MAX};
use crate::trace::{EpisodeKind, TraceSet};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy variant {0:?}; expected [NR_][BN_]Random|Heuristic|BinnedQ")]
    UnknownVariant(String),
    #[error("no variants to run")]
    NoVariants,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("binning unusable for the Q-learner: {0}")]
    Binning(String),
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent seed for a named stream; stable across platforms and runs.
pub fn derive_seed(base: u64, stream: &str, index: u64) -> u64 {
    splitmix64(base ^ fnv1a(stream.as_bytes()) ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseKind {
    Random,
    Heuristic,
    BinnedQ,
}

impl BaseKind {
    pub fn name(self) -> &'static str {
        match self {
            BaseKind::Random => "Random",
            BaseKind::Heuristic => "Heuristic",
            BaseKind::BinnedQ => "BinnedQ",
        }
    }
}

/// A base policy plus its noise wrappers; the label `[NR_][BN_]<base>`
/// identifies the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVariant {
    pub base: BaseKind,
    pub action_noise: bool,
    pub observation_noise: bool,
    pub noise_scale: f64,
}

impl PolicyVariant {
    pub fn new(base: BaseKind, action_noise: bool, observation_noise: bool) -> Self {
        Self {
            base,
            action_noise,
            observation_noise,
            noise_scale: 0.1,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}{}{}",
            if self.action_noise { "NR_" } else { "" },
            if self.observation_noise { "BN_" } else { "" },
            self.base.name()
        )
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }
}

impl fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PolicyVariant {
    type Err = PolicyError;

    fn from_str(label: &str) -> Result<Self, Self::Err> {
        let mut rest = label;
        let action_noise = rest.starts_with("NR_");
        if action_noise {
            rest = &rest[3..];
        }
        let observation_noise = rest.starts_with("BN_");
        if observation_noise {
            rest = &rest[3..];
        }
        let base = match rest {
            "Random" => BaseKind::Random,
            "Heuristic" => BaseKind::Heuristic,
            "BinnedQ" => BaseKind::BinnedQ,
            _ => return Err(PolicyError::UnknownVariant(label.to_string())),
        };
        Ok(PolicyVariant::new(base, action_noise, observation_noise))
    }
}

/// Vanilla, NR_, BN_ and NR_BN_ versions of the Q-learner and the heuristic.
pub fn default_roster() -> Vec<PolicyVariant> {
    [BaseKind::BinnedQ, BaseKind::Heuristic]
        .into_iter()
        .flat_map(|b| {
            [(false, false), (true, false), (false, true), (true, true)]
                .into_iter()
                .map(move |(nr, bn)| PolicyVariant::new(b, nr, bn))
        })
        .collect()
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Uniform over `[0, 7]` per component, ignoring the observation.
pub fn random_action<R: Rng>(rng: &mut R) -> PolicyAction {
    PolicyAction(std::array::from_fn(|_| rng.random_range(0.0..=ACTION_MAX)))
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &Observation) -> PolicyAction {
        random_action(&mut self.rng)
    }
}

/// Lockdown length grows linearly with mild infections (full week at 20%)
/// unless more than 10% of households are already below the poverty line.
/// The oldest group is vaccinated all week, the others for half a week.
pub fn heuristic_action(obs: &Observation) -> PolicyAction {
    let lockdown = if obs.min_stock_house_frac > 0.1 {
        0.0
    } else {
        (obs.infected_mild_frac / 0.2).min(1.0) * ACTION_MAX
    };
    PolicyAction([0.0, lockdown, 0.0, 3.5, 0.0, 3.5, 0.0, ACTION_MAX])
}

pub struct HeuristicPolicy;

impl Policy for HeuristicPolicy {
    fn act(&mut self, obs: &Observation) -> PolicyAction {
        heuristic_action(obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QParams {
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// number of training selections over which ε decays linearly
    pub decay_steps: u64,
    pub learning_rate: f64,
    pub gamma: f64,
}

impl Default for QParams {
    fn default() -> Self {
        Self {
            epsilon_start: 0.2,
            epsilon_end: 0.02,
            decay_steps: 500,
            learning_rate: 0.1,
            gamma: 0.95,
        }
    }
}

/// Tabular ε-greedy Q-learning over index spaces.
#[derive(Debug, Clone)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub params: QParams,
    values: Vec<f64>,
    selections: u64,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, params: QParams) -> Self {
        Self {
            n_states,
            n_actions,
            params,
            values: vec![0.0; n_states * n_actions],
            selections: 0,
        }
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn epsilon(&self) -> f64 {
        let p = &self.params;
        if p.decay_steps == 0 {
            return p.epsilon_end;
        }
        let t = (self.selections as f64 / p.decay_steps as f64).min(1.0);
        p.epsilon_start + (p.epsilon_end - p.epsilon_start) * t
    }

    /// Highest-valued action; ties go to the lower index.
    pub fn greedy(&self, s: usize) -> usize {
        let row = &self.values[s * self.n_actions..(s + 1) * self.n_actions];
        let mut best = 0;
        for (a, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_q(&self, s: usize) -> f64 {
        self.q(s, self.greedy(s))
    }

    /// ε-greedy while training (advancing the decay), greedy otherwise.
    pub fn select<R: Rng>(&mut self, s: usize, training: bool, rng: &mut R) -> usize {
        if !training {
            return self.greedy(s);
        }
        let eps = self.epsilon();
        self.selections += 1;
        if rng.random::<f64>() < eps {
            rng.random_range(0..self.n_actions)
        } else {
            self.greedy(s)
        }
    }

    /// One-step update; `next` is `None` for a terminal transition.
    pub fn update(&mut self, s: usize, a: usize, reward: f64, next: Option<usize>) {
        let target = reward + next.map_or(0.0, |n| self.params.gamma * self.max_q(n));
        let i = s * self.n_actions + a;
        self.values[i] += self.params.learning_rate * (target - self.values[i]);
    }
}

/// Q-learner over discretized observations; chosen action indices are executed
/// at their bin midpoints. Updates are applied once the next state is known.
pub struct BinnedQPolicy {
    pub table: QTable,
    discretizer: Discretizer,
    rng: ChaCha8Rng,
    training: bool,
    last: Option<(usize, usize)>,
    pending: Option<(usize, usize, f64, usize)>,
}

impl BinnedQPolicy {
    pub fn new(spec: BinningSpec, params: QParams, seed: u64) -> Result<Self, PolicyError> {
        let discretizer = Discretizer::new(spec).map_err(|e| PolicyError::Binning(e.to_string()))?;
        let table = QTable::new(discretizer.state_space().total(), discretizer.action_space().total(), params);
        Ok(Self {
            table,
            discretizer,
            rng: ChaCha8Rng::seed_from_u64(seed),
            training: true,
            last: None,
            pending: None,
        })
    }

    fn state_of(&self, obs: &Observation) -> usize {
        let edges = &self.discretizer.spec().state_edges;
        let v: Vec<f64> = obs
            .to_array()
            .iter()
            .zip(edges)
            .map(|(x, e)| x.clamp(e[0], e[e.len() - 1]))
            .collect();
        self.discretizer.state_index(&v).expect("clamped observation lies inside the bins")
    }

    fn flush(&mut self, next: Option<usize>) {
        if let Some((s, a, r, fallback)) = self.pending.take() {
            self.table.update(s, a, r, Some(next.unwrap_or(fallback)));
        }
    }
}

impl Policy for BinnedQPolicy {
    fn act(&mut self, obs: &Observation) -> PolicyAction {
        let s = self.state_of(obs);
        if self.training {
            self.flush(Some(s));
        }
        let a = self.table.select(s, self.training, &mut self.rng);
        self.last = Some((s, a));
        let mid = self.discretizer.action_midpoints(a).expect("selected index is in range");
        PolicyAction(std::array::from_fn(|i| mid[i]))
    }

    fn reward(&mut self, reward: f64, next: &Observation) {
        if let (true, Some((s, a))) = (self.training, self.last.take()) {
            self.pending = Some((s, a, reward, self.state_of(next)));
        }
    }

    fn end_episode(&mut self) {
        // the horizon is a truncation, not a terminal state: bootstrap from the last observation
        self.flush(None);
        self.last = None;
    }

    fn set_training(&mut self, training: bool) {
        self.training = training;
    }
}

/// Adds N(0, (scale·7)²) to every action component, clamped to `[0, 7]`.
pub struct ActionNoise<P> {
    pub inner: P,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl<P: Policy> ActionNoise<P> {
    pub fn new(inner: P, scale: f64, seed: u64) -> Self {
        Self {
            inner,
            noise: (scale > 0.0).then(|| Normal::new(0.0, scale * ACTION_MAX).expect("finite std")),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<P: Policy> Policy for ActionNoise<P> {
    fn act(&mut self, obs: &Observation) -> PolicyAction {
        let mut a = self.inner.act(obs);
        if let Some(n) = &self.noise {
            for v in a.0.iter_mut() {
                *v = (*v + n.sample(&mut self.rng)).clamp(0.0, ACTION_MAX);
            }
        }
        a
    }

    fn reward(&mut self, reward: f64, next: &Observation) {
        self.inner.reward(reward, next);
    }

    fn end_episode(&mut self) {
        self.inner.end_episode();
    }

    fn set_training(&mut self, training: bool) {
        self.inner.set_training(training);
    }
}

/// Perturbs every observation component with N(0, scale²), clamped to `[0, 1]`,
/// before the inner policy sees it.
pub struct ObservationNoise<P> {
    pub inner: P,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl<P: Policy> ObservationNoise<P> {
    pub fn new(inner: P, scale: f64, seed: u64) -> Self {
        Self {
            inner,
            noise: (scale > 0.0).then(|| Normal::new(0.0, scale).expect("finite std")),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn perturb(&mut self, obs: &Observation) -> Observation {
        match &self.noise {
            None => *obs,
            Some(n) => {
                let v = obs.to_array().map(|x| (x + n.sample(&mut self.rng)).clamp(0.0, 1.0));
                Observation::from_slice(&v)
            }
        }
    }
}

impl<P: Policy> Policy for ObservationNoise<P> {
    fn act(&mut self, obs: &Observation) -> PolicyAction {
        let seen = self.perturb(obs);
        self.inner.act(&seen)
    }

    fn reward(&mut self, reward: f64, next: &Observation) {
        let seen = self.perturb(next);
        self.inner.reward(reward, &seen);
    }

    fn end_episode(&mut self) {
        self.inner.end_episode();
    }

    fn set_training(&mut self, training: bool) {
        self.inner.set_training(training);
    }
}

/// Builds the wrapper stack for a variant; every component gets its own stream.
pub fn build_policy(
    variant: &PolicyVariant,
    binning: &BinningSpec,
    q: &QParams,
    base_seed: u64,
) -> Result<Box<dyn Policy + Send>, PolicyError> {
    let label = variant.label();
    let seed = |part: &str| derive_seed(base_seed, &format!("{label}/{part}"), 0);
    let mut policy: Box<dyn Policy + Send> = match variant.base {
        BaseKind::Random => Box::new(RandomPolicy::new(seed("policy"))),
        BaseKind::Heuristic => Box::new(HeuristicPolicy),
        BaseKind::BinnedQ => Box::new(BinnedQPolicy::new(binning.clone(), q.clone(), seed("policy"))?),
    };
    if variant.observation_noise {
        policy = Box::new(ObservationNoise::new(policy, variant.noise_scale, seed("observation-noise")));
    }
    if variant.action_noise {
        policy = Box::new(ActionNoise::new(policy, variant.noise_scale, seed("action-noise")));
    }
    Ok(policy)
}

impl Policy for Box<dyn Policy + Send> {
    fn act(&mut self, obs: &Observation) -> PolicyAction {
        (**self).act(obs)
    }

    fn reward(&mut self, reward: f64, next: &Observation) {
        (**self).reward(reward, next);
    }

    fn end_episode(&mut self) {
        (**self).end_episode();
    }

    fn set_training(&mut self, training: bool) {
        (**self).set_training(training);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPlan {
    pub experiment_name: String,
    pub train_episodes: usize,
    pub exploit_episodes: usize,
    pub base_seed: u64,
    pub binning: BinningSpec,
    pub q_params: QParams,
    /// keep per-tick compartment counts of exploit episodes
    pub record_curves: bool,
}

/// Seed of the simulator for the `n`-th episode (1-based); shared by all
/// variants so they face the same worlds.
pub fn episode_seed(base_seed: u64, n: usize) -> u64 {
    derive_seed(base_seed, "episode", n as u64)
}

/// Runs each variant's training episodes then its exploit episodes. Variants
/// run in parallel; each variant's episodes run in order.
pub fn generate_traces(
    sim: &SimConfig,
    variants: &[PolicyVariant],
    plan: &GenerationPlan,
) -> Result<Vec<TraceSet>, PolicyError> {
    Ok(generate(sim, variants, plan)?.into_iter().map(|g| g.traces).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub traces: TraceSet,
    /// `(run_name, curve)` per exploit episode when curves were requested
    pub curves: Vec<(String, Curve)>,
}

/// [`generate_traces`] plus the optional exploit-episode curves.
pub fn generate(sim: &SimConfig, variants: &[PolicyVariant], plan: &GenerationPlan) -> Result<Vec<Generated>, PolicyError> {
    if variants.is_empty() {
        return Err(PolicyError::NoVariants);
    }
    sim.validate()?;
    variants.par_iter().map(|v| generate_one(sim, v, plan)).collect()
}

fn generate_one(sim: &SimConfig, variant: &PolicyVariant, plan: &GenerationPlan) -> Result<Generated, PolicyError> {
    let mut policy = build_policy(variant, &plan.binning, &plan.q_params, plan.base_seed)?;
    let mut episodes = Vec::with_capacity(plan.train_episodes + plan.exploit_episodes);
    let mut curves = Vec::new();
    for n in 1..=plan.train_episodes + plan.exploit_episodes {
        let kind = if n <= plan.train_episodes {
            EpisodeKind::Train
        } else {
            EpisodeKind::Exploit
        };
        policy.set_training(kind == EpisodeKind::Train);
        let name = format!("Run-{n}-{kind}");
        let record = plan.record_curves && kind == EpisodeKind::Exploit;
        let run = simulate(sim, &mut policy, episode_seed(plan.base_seed, n), &name, kind, record)?;
        for w in run.warnings {
            log::warn!("{}: {name}: {w}", variant.label());
        }
        if record {
            curves.push((name, run.curve));
        }
        episodes.push(run.episode);
    }
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("base_seed".to_string(), plan.base_seed.to_string());
    meta.insert("noise_scale".to_string(), variant.noise_scale.to_string());
    Ok(Generated {
        traces: TraceSet {
            algorithm_name: variant.label(),
            experiment_name: plan.experiment_name.clone(),
            episodes,
            meta,
        },
        curves,
    })
}
