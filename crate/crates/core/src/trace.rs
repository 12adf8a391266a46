//! Interaction traces: the episodes an RL algorithm produced while interacting
//! with its environment, and their line-delimited JSON file format.
//!
//! Line 1 of a trace file is a header record; every following line is one
//! step. Steps of the same episode are contiguous and share a `run_name`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

/// Legal range of every observation component.
pub const OBSERVATION_RANGE: (f64, f64) = (0.0, 1.0);
/// Legal range of every action component, in days.
pub const ACTION_RANGE: (f64, f64) = (0.0, 7.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub tick: u64,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EpisodeKind {
    Train,
    Exploit,
}

impl EpisodeKind {
    /// Infers the kind from the `Run-<n>-Exploit` naming convention.
    pub fn from_run_name(name: &str) -> Option<Self> {
        if name.ends_with("-Exploit") {
            Some(Self::Exploit)
        } else if name.ends_with("-Train") {
            Some(Self::Train)
        } else {
            None
        }
    }
}

impl fmt::Display for EpisodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Train => f.write_str("Train"),
            Self::Exploit => f.write_str("Exploit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub run_name: String,
    /// Authoritative even when it disagrees with the run name suffix.
    pub kind: EpisodeKind,
    pub steps: Vec<Step>,
}

impl Episode {
    pub fn mean_reward(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.reward).sum::<f64>() / self.steps.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceSet {
    pub algorithm_name: String,
    pub experiment_name: String,
    pub episodes: Vec<Episode>,
    pub meta: BTreeMap<String, String>,
}

impl TraceSet {
    pub fn train(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(|e| e.kind == EpisodeKind::Train)
    }

    pub fn exploit(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(|e| e.kind == EpisodeKind::Exploit)
    }

    /// (observation, action) dimensionality taken from the first step.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.episodes
            .iter()
            .flat_map(|e| e.steps.first())
            .next()
            .map(|s| (s.observation.len(), s.action.len()))
    }

    pub fn step_count(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    NoEpisodes,
    EmptyEpisode,
    DuplicateRunName,
    ObservationDim,
    ActionDim,
    ObservationRange,
    ActionRange,
    NonFinite,
    TickOrder,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NoEpisodes => "no-episodes",
            Rule::EmptyEpisode => "empty-episode",
            Rule::DuplicateRunName => "duplicate-run-name",
            Rule::ObservationDim => "observation-dimension",
            Rule::ActionDim => "action-dimension",
            Rule::ObservationRange => "observation-range",
            Rule::ActionRange => "action-range",
            Rule::NonFinite => "non-finite",
            Rule::TickOrder => "tick-order",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub episode: Option<String>,
    pub step: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.rule)?;
        if let Some(ep) = &self.episode {
            write!(f, " episode {ep}")?;
        }
        if let Some(i) = self.step {
            write!(f, " step {i}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Checks every TraceSet invariant. Violations are data: an empty list means
/// the set can be written and read back.
pub fn validate_traces(set: &TraceSet) -> Vec<Violation> {
    let mut out = Vec::new();
    if set.episodes.is_empty() {
        out.push(Violation {
            episode: None,
            step: None,
            rule: Rule::NoEpisodes,
            detail: "no episodes".into(),
        });
        return out;
    }
    let dims = set.dims();
    let mut seen = HashSet::new();
    for ep in &set.episodes {
        let v = |step: Option<usize>, rule, detail: String| Violation {
            episode: Some(ep.run_name.clone()),
            step,
            rule,
            detail,
        };
        if !seen.insert(ep.run_name.as_str()) {
            out.push(v(None, Rule::DuplicateRunName, "run name used by an earlier episode".into()));
        }
        if ep.steps.is_empty() {
            out.push(v(None, Rule::EmptyEpisode, "episode has no steps".into()));
            continue;
        }
        let (obs_dim, act_dim) = dims.expect("non-empty episode implies dims");
        let mut prev_tick: Option<u64> = None;
        for (i, step) in ep.steps.iter().enumerate() {
            if step.observation.len() != obs_dim {
                out.push(v(
                    Some(i),
                    Rule::ObservationDim,
                    format!("expected {obs_dim} observation components, found {}", step.observation.len()),
                ));
            }
            if step.action.len() != act_dim {
                out.push(v(
                    Some(i),
                    Rule::ActionDim,
                    format!("expected {act_dim} action components, found {}", step.action.len()),
                ));
            }
            for (c, &x) in step.observation.iter().enumerate() {
                if !x.is_finite() {
                    out.push(v(Some(i), Rule::NonFinite, format!("observation[{c}] = {x}")));
                } else if x < OBSERVATION_RANGE.0 || x > OBSERVATION_RANGE.1 {
                    out.push(v(Some(i), Rule::ObservationRange, format!("observation[{c}] = {x} outside [0, 1]")));
                }
            }
            for (c, &x) in step.action.iter().enumerate() {
                if !x.is_finite() {
                    out.push(v(Some(i), Rule::NonFinite, format!("action[{c}] = {x}")));
                } else if x < ACTION_RANGE.0 || x > ACTION_RANGE.1 {
                    out.push(v(Some(i), Rule::ActionRange, format!("action[{c}] = {x} outside [0, 7]")));
                }
            }
            if !step.reward.is_finite() {
                out.push(v(Some(i), Rule::NonFinite, format!("reward = {}", step.reward)));
            }
            if let Some(p) = prev_tick {
                if step.tick <= p {
                    out.push(v(Some(i), Rule::TickOrder, format!("tick {} does not follow tick {p}", step.tick)));
                }
            }
            prev_tick = Some(step.tick);
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("no episodes")]
    NoEpisodes,
    #[error("invalid trace set: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("write failed after {records} records: {source}")]
    Write {
        records: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: read failed: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unsupported format version {version}")]
    Version { line: usize, version: u32 },
    #[error(
        "line {line}: episode {episode} has {found} {what} components but episode {reference} has {expected}"
    )]
    Dimension {
        line: usize,
        what: &'static str,
        episode: String,
        reference: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: episode {episode}: tick {tick} does not increase (previous {previous})")]
    TickOrder {
        line: usize,
        episode: String,
        tick: u64,
        previous: u64,
    },
    #[error("line {line}: episode {episode}: {violation}")]
    Violation {
        line: usize,
        episode: String,
        violation: Violation,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderRecord {
    format_version: u32,
    algorithm_name: String,
    experiment_name: String,
    obs_dim: usize,
    act_dim: usize,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepRecord<'a> {
    run_name: std::borrow::Cow<'a, str>,
    kind: EpisodeKind,
    tick: u64,
    observation: std::borrow::Cow<'a, [f64]>,
    action: std::borrow::Cow<'a, [f64]>,
    reward: f64,
}

/// Writes `set` as one header line plus one line per step. Returns the number
/// of records written.
pub fn write_traces<W: Write>(set: &TraceSet, mut sink: W) -> Result<usize, TraceError> {
    if set.episodes.is_empty() {
        return Err(TraceError::NoEpisodes);
    }
    let violations = validate_traces(set);
    if !violations.is_empty() {
        return Err(TraceError::Invalid(violations));
    }
    let (obs_dim, act_dim) = set.dims().expect("validated set has steps");
    let header = HeaderRecord {
        format_version: FORMAT_VERSION,
        algorithm_name: set.algorithm_name.clone(),
        experiment_name: set.experiment_name.clone(),
        obs_dim,
        act_dim,
        meta: set.meta.clone(),
    };
    let mut records = 0;
    let mut emit = |line: String, records: &mut usize| -> Result<(), TraceError> {
        sink.write_all(line.as_bytes())
            .and_then(|_| sink.write_all(b"\n"))
            .map_err(|source| TraceError::Write {
                records: *records,
                source,
            })?;
        *records += 1;
        Ok(())
    };
    emit(serde_json::to_string(&header).expect("header serializes"), &mut records)?;
    for ep in &set.episodes {
        for step in &ep.steps {
            let rec = StepRecord {
                run_name: ep.run_name.as_str().into(),
                kind: ep.kind,
                tick: step.tick,
                observation: step.observation.as_slice().into(),
                action: step.action.as_slice().into(),
                reward: step.reward,
            };
            emit(serde_json::to_string(&rec).expect("step serializes"), &mut records)?;
        }
    }
    sink.flush().map_err(|source| TraceError::Write { records, source })?;
    Ok(records)
}

/// Parses a trace stream, enforcing the same invariants as [`validate_traces`].
pub fn read_traces<R: BufRead>(source: R) -> Result<TraceSet, TraceError> {
    let mut lines = source.lines().enumerate();
    let header: HeaderRecord = loop {
        match lines.next() {
            None => return Err(TraceError::NoEpisodes),
            Some((i, line)) => {
                let line = line.map_err(|source| TraceError::Read { line: i + 1, source })?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
                    line: i + 1,
                    message: format!("header: {e}"),
                })?;
            }
        }
    };
    if header.format_version != FORMAT_VERSION {
        return Err(TraceError::Version {
            line: 1,
            version: header.format_version,
        });
    }

    let mut set = TraceSet {
        algorithm_name: header.algorithm_name,
        experiment_name: header.experiment_name,
        episodes: Vec::new(),
        meta: header.meta,
    };
    let mut names = HashSet::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|source| TraceError::Read { line: lineno, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord<'_> = serde_json::from_str(&line).map_err(|e| TraceError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        let reference = set
            .episodes
            .first()
            .map(|e| e.run_name.clone())
            .unwrap_or_else(|| "<header>".into());
        for (what, expected, found) in [
            ("observation", header.obs_dim, rec.observation.len()),
            ("action", header.act_dim, rec.action.len()),
        ] {
            if expected != found {
                return Err(TraceError::Dimension {
                    line: lineno,
                    what,
                    episode: rec.run_name.into_owned(),
                    reference,
                    expected,
                    found,
                });
            }
        }

        let continues = set
            .episodes
            .last()
            .is_some_and(|e| e.run_name == rec.run_name);
        if !continues {
            if !names.insert(rec.run_name.to_string()) {
                return Err(TraceError::Violation {
                    line: lineno,
                    episode: rec.run_name.to_string(),
                    violation: Violation {
                        episode: Some(rec.run_name.to_string()),
                        step: None,
                        rule: Rule::DuplicateRunName,
                        detail: "steps of one episode must be contiguous".into(),
                    },
                });
            }
            set.episodes.push(Episode {
                run_name: rec.run_name.to_string(),
                kind: rec.kind,
                steps: Vec::new(),
            });
        }
        let ep = set.episodes.last_mut().expect("just ensured");
        if ep.kind != rec.kind {
            return Err(TraceError::Malformed {
                line: lineno,
                message: format!("episode {} changes kind mid-episode", ep.run_name),
            });
        }
        if let Some(prev) = ep.steps.last() {
            if rec.tick <= prev.tick {
                return Err(TraceError::TickOrder {
                    line: lineno,
                    episode: ep.run_name.clone(),
                    tick: rec.tick,
                    previous: prev.tick,
                });
            }
        }
        let step = Step {
            tick: rec.tick,
            observation: rec.observation.into_owned(),
            action: rec.action.into_owned(),
            reward: rec.reward,
        };
        if let Some(violation) = step_violation(&step) {
            return Err(TraceError::Violation {
                line: lineno,
                episode: ep.run_name.clone(),
                violation: Violation {
                    episode: Some(ep.run_name.clone()),
                    step: Some(ep.steps.len()),
                    ..violation
                },
            });
        }
        ep.steps.push(step);
    }
    if set.episodes.is_empty() {
        return Err(TraceError::NoEpisodes);
    }
    Ok(set)
}

fn step_violation(step: &Step) -> Option<Violation> {
    let probe = TraceSet {
        episodes: vec![Episode {
            run_name: String::new(),
            kind: EpisodeKind::Train,
            steps: vec![step.clone()],
        }],
        ..Default::default()
    };
    validate_traces(&probe).into_iter().next()
}
