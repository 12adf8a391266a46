//! Binning of continuous observation/action vectors into integer state and
//! action indices.
//!
//! Each component is binned independently against its own edge list, then the
//! bin-index vector is packed into a single index by big-endian mixed-radix
//! encoding (first component most significant). With the default edges the
//! state index of bins `[4, 0, 0]` is 100 and the action index of bins
//! `[1, 0, 1, 0, 0, 0, 0, 2]` is 2432.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Step;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizeError {
    #[error("component {component}: value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        component: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("component {component}: bin {bin} not below radix {radix}")]
    BinTooLarge { component: usize, bin: usize, radix: usize },
    #[error("index {index} outside space of {total}")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("expected {expected} components, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("component {component}: edges must be at least two strictly increasing finite values")]
    BadEdges { component: usize },
}

pub fn default_state_edges() -> Vec<f64> {
    vec![0.0, 0.05, 0.10, 0.15, 0.20, 1.0]
}

pub fn default_action_edges() -> Vec<f64> {
    vec![0.0, 2.5, 5.0, 7.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub state_edges: Vec<Vec<f64>>,
    pub action_edges: Vec<Vec<f64>>,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self {
            state_edges: vec![default_state_edges(); 3],
            action_edges: vec![default_action_edges(); 8],
        }
    }
}

impl BinningSpec {
    pub fn validate(&self) -> Result<(), DiscretizeError> {
        for (c, edges) in self.state_edges.iter().enumerate() {
            validate_edges(edges, c)?;
        }
        for (c, edges) in self.action_edges.iter().enumerate() {
            validate_edges(edges, c)?;
        }
        Ok(())
    }

    pub fn state_space(&self) -> IndexSpace {
        IndexSpace::from_edges(&self.state_edges)
    }

    pub fn action_space(&self) -> IndexSpace {
        IndexSpace::from_edges(&self.action_edges)
    }
}

fn validate_edges(edges: &[f64], component: usize) -> Result<(), DiscretizeError> {
    let ok = edges.len() >= 2
        && edges.iter().all(|e| e.is_finite())
        && edges.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(DiscretizeError::BadEdges { component })
    }
}

/// Mixed-radix index space. `radices[i]` is the bin count of component `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSpace {
    pub radices: Vec<usize>,
}

impl IndexSpace {
    pub fn new(radices: Vec<usize>) -> Self {
        Self { radices }
    }

    fn from_edges(edges: &[Vec<f64>]) -> Self {
        Self::new(edges.iter().map(|e| e.len().saturating_sub(1)).collect())
    }

    pub fn total(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn encode(&self, bins: &[usize]) -> Result<usize, DiscretizeError> {
        encode(bins, &self.radices)
    }

    pub fn decode(&self, index: usize) -> Result<Vec<usize>, DiscretizeError> {
        decode(index, &self.radices)
    }
}

/// Returns `i` with `edges[i] <= value < edges[i + 1]`; the last edge belongs
/// to the last bin.
pub fn bin_component(component: usize, value: f64, edges: &[f64]) -> Result<usize, DiscretizeError> {
    let lo = edges[0];
    let hi = *edges.last().expect("edges validated non-empty");
    if !(value >= lo && value <= hi) {
        return Err(DiscretizeError::OutOfRange { component, value, lo, hi });
    }
    let n_bins = edges.len() - 1;
    // first edge strictly greater than value marks the end of our bin
    let upper = edges.partition_point(|&e| e <= value);
    Ok(upper.saturating_sub(1).min(n_bins - 1))
}

pub fn bin_vector(values: &[f64], edges: &[Vec<f64>]) -> Result<Vec<usize>, DiscretizeError> {
    if values.len() != edges.len() {
        return Err(DiscretizeError::Arity {
            expected: edges.len(),
            found: values.len(),
        });
    }
    values
        .iter()
        .zip(edges)
        .enumerate()
        .map(|(c, (&v, e))| bin_component(c, v, e))
        .collect()
}

pub fn encode(bins: &[usize], radices: &[usize]) -> Result<usize, DiscretizeError> {
    if bins.len() != radices.len() {
        return Err(DiscretizeError::Arity {
            expected: radices.len(),
            found: bins.len(),
        });
    }
    let mut index = 0usize;
    for (component, (&bin, &radix)) in bins.iter().zip(radices).enumerate() {
        if bin >= radix {
            return Err(DiscretizeError::BinTooLarge { component, bin, radix });
        }
        index = index * radix + bin;
    }
    Ok(index)
}

pub fn decode(index: usize, radices: &[usize]) -> Result<Vec<usize>, DiscretizeError> {
    let total: usize = radices.iter().product();
    if index >= total {
        return Err(DiscretizeError::IndexOutOfRange { index, total });
    }
    let mut bins = vec![0; radices.len()];
    let mut rest = index;
    for (slot, &radix) in bins.iter_mut().zip(radices).rev() {
        *slot = rest % radix;
        rest /= radix;
    }
    Ok(bins)
}

/// A validated [`BinningSpec`] with its two index spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    spec: BinningSpec,
    states: IndexSpace,
    actions: IndexSpace,
}

impl Discretizer {
    pub fn new(spec: BinningSpec) -> Result<Self, DiscretizeError> {
        spec.validate()?;
        let states = spec.state_space();
        let actions = spec.action_space();
        Ok(Self { spec, states, actions })
    }

    pub fn spec(&self) -> &BinningSpec {
        &self.spec
    }

    pub fn state_space(&self) -> &IndexSpace {
        &self.states
    }

    pub fn action_space(&self) -> &IndexSpace {
        &self.actions
    }

    pub fn state_index(&self, observation: &[f64]) -> Result<usize, DiscretizeError> {
        self.states.encode(&bin_vector(observation, &self.spec.state_edges)?)
    }

    pub fn action_index(&self, action: &[f64]) -> Result<usize, DiscretizeError> {
        self.actions.encode(&bin_vector(action, &self.spec.action_edges)?)
    }

    pub fn discretize_step(&self, step: &Step) -> Result<(usize, usize), DiscretizeError> {
        Ok((self.state_index(&step.observation)?, self.action_index(&step.action)?))
    }

    /// Midpoint of every action component's bin for `index`.
    pub fn action_midpoints(&self, index: usize) -> Result<Vec<f64>, DiscretizeError> {
        let bins = self.actions.decode(index)?;
        Ok(bins
            .iter()
            .zip(&self.spec.action_edges)
            .map(|(&b, e)| 0.5 * (e[b] + e[b + 1]))
            .collect())
    }

    /// `[lo, hi]` bounds of each state component for a state index.
    pub fn state_ranges(&self, index: usize) -> Result<Vec<(f64, f64)>, DiscretizeError> {
        let bins = self.states.decode(index)?;
        Ok(ranges(&bins, &self.spec.state_edges))
    }

    pub fn action_ranges(&self, index: usize) -> Result<Vec<(f64, f64)>, DiscretizeError> {
        let bins = self.actions.decode(index)?;
        Ok(ranges(&bins, &self.spec.action_edges))
    }
}

fn ranges(bins: &[usize], edges: &[Vec<f64>]) -> Vec<(f64, f64)> {
    bins.iter().zip(edges).map(|(&b, e)| (e[b], e[b + 1])).collect()
}

pub fn discretize_step(step: &Step, spec: &BinningSpec) -> Result<(usize, usize), DiscretizeError> {
    Discretizer::new(spec.clone())?.discretize_step(step)
}

/// Admissibility of a state bin-index vector.
pub trait StatePredicate {
    fn admits(&self, bins: &[usize]) -> bool;
}

impl<F: Fn(&[usize]) -> bool> StatePredicate for F {
    fn admits(&self, bins: &[usize]) -> bool {
        self(bins)
    }
}

/// Per-component upper bounds on the bin index. The default caps the
/// hospitalized component (index 1) at bin 1, i.e. below 10% of the
/// population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityMask {
    /// component index -> maximum admissible bin index
    pub max_bin: BTreeMap<usize, usize>,
}

impl Default for ValidityMask {
    fn default() -> Self {
        Self {
            max_bin: BTreeMap::from([(1, 1)]),
        }
    }
}

impl ValidityMask {
    pub fn unrestricted() -> Self {
        Self { max_bin: BTreeMap::new() }
    }
}

impl StatePredicate for ValidityMask {
    fn admits(&self, bins: &[usize]) -> bool {
        self.max_bin
            .iter()
            .all(|(&c, &max)| bins.get(c).is_none_or(|&b| b <= max))
    }
}

/// Sorted indices of all admissible states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidStates {
    indices: Vec<usize>,
}

impl ValidStates {
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn valid_count(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, state: usize) -> bool {
        self.indices.binary_search(&state).is_ok()
    }
}

/// Exhaustively enumerates the index space and keeps admissible states.
pub fn enumerate_valid<P: StatePredicate + ?Sized>(mask: &P, radices: &[usize]) -> ValidStates {
    let total: usize = radices.iter().product();
    let indices = (0..total)
        .filter(|&i| mask.admits(&decode(i, radices).expect("index below total")))
        .collect();
    ValidStates { indices }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATE: [usize; 3] = [5, 5, 5];
    const ACTION: [usize; 8] = [3; 8];

    #[test]
    fn bins_follow_default_edges() {
        let s = default_state_edges();
        let a = default_action_edges();
        assert_eq!(bin_component(0, 0.03, &s).unwrap(), 0);
        assert_eq!(bin_component(0, 1.0, &s).unwrap(), 4);
        assert_eq!(bin_component(0, 0.25, &s).unwrap(), 4);
        assert_eq!(bin_component(0, 0.05, &s).unwrap(), 1);
        assert_eq!(bin_component(0, 0.0, &s).unwrap(), 0);
        assert_eq!(bin_component(0, 6.0, &a).unwrap(), 2);
        assert_eq!(bin_component(0, 7.0, &a).unwrap(), 2);
        assert_eq!(bin_component(0, 2.5, &a).unwrap(), 1);
    }

    #[test]
    fn out_of_range_names_component() {
        let err = bin_vector(&[0.1, 1.2, 0.0], &vec![default_state_edges(); 3]).unwrap_err();
        assert!(matches!(err, DiscretizeError::OutOfRange { component: 1, .. }));
        assert!(bin_component(0, -0.01, &default_state_edges()).is_err());
        assert!(bin_component(0, f64::NAN, &default_state_edges()).is_err());
    }

    #[test]
    fn worked_state_indices() {
        assert_eq!(encode(&[4, 0, 0], &STATE).unwrap(), 100);
        assert_eq!(encode(&[0, 0, 0], &STATE).unwrap(), 0);
        assert_eq!(decode(50, &STATE).unwrap(), vec![2, 0, 0]);
        assert_eq!(decode(25, &STATE).unwrap(), vec![1, 0, 0]);
    }

    #[test]
    fn worked_action_indices() {
        assert_eq!(encode(&[1, 0, 1, 0, 0, 0, 0, 2], &ACTION).unwrap(), 2432);
        assert_eq!(decode(2435, &ACTION).unwrap(), vec![1, 0, 1, 0, 0, 0, 1, 2]);
        assert_eq!(decode(2431, &ACTION).unwrap(), vec![1, 0, 1, 0, 0, 0, 0, 1]);
    }

    #[test]
    fn encode_rejects_large_bin_and_decode_rejects_large_index() {
        assert!(matches!(
            encode(&[5, 0, 0], &STATE),
            Err(DiscretizeError::BinTooLarge { component: 0, .. })
        ));
        assert!(decode(125, &STATE).is_err());
        assert!(decode(6561, &ACTION).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        for radices in [&STATE[..], &ACTION[..]] {
            let total: usize = radices.iter().product();
            for i in 0..total {
                assert_eq!(encode(&decode(i, radices).unwrap(), radices).unwrap(), i);
            }
        }
    }

    #[test]
    fn discretize_step_examples() {
        let d = Discretizer::new(BinningSpec::default()).unwrap();
        let mk = |obs: [f64; 3]| Step {
            tick: 0,
            observation: obs.to_vec(),
            action: vec![0.0; 8],
            reward: 0.0,
        };
        assert_eq!(d.discretize_step(&mk([0.25, 0.01, 0.02])).unwrap(), (100, 0));
        assert_eq!(d.discretize_step(&mk([0.0, 0.0, 0.0])).unwrap(), (0, 0));
        assert_eq!(d.discretize_step(&mk([0.07, 0.01, 0.01])).unwrap(), (25, 0));
        let mut s = mk([0.0; 3]);
        s.action = vec![3.0, 1.0, 4.0, 0.5, 0.0, 2.0, 1.0, 6.5];
        assert_eq!(d.discretize_step(&s).unwrap().1, 2432);
    }

    #[test]
    fn midpoints_of_action_zero() {
        let d = Discretizer::new(BinningSpec::default()).unwrap();
        assert_eq!(d.action_midpoints(0).unwrap(), vec![1.25; 8]);
        assert_eq!(d.action_midpoints(6560).unwrap(), vec![6.0; 8]);
    }

    #[test]
    fn valid_state_enumeration() {
        let all = enumerate_valid(&|_: &[usize]| true, &STATE);
        assert_eq!(all.valid_count(), 125);
        let none = enumerate_valid(&|_: &[usize]| false, &STATE);
        assert!(none.indices().is_empty());
        let capped = enumerate_valid(&ValidityMask::default(), &STATE);
        // brute force: 5 infected bins x 2 hospitalized bins x 5 stock bins
        let mut brute = Vec::new();
        for a in 0..5 {
            for h in 0..5 {
                for b in 0..5 {
                    if h <= 1 {
                        brute.push(a * 25 + h * 5 + b);
                    }
                }
            }
        }
        brute.sort();
        assert_eq!(capped.indices(), &brute[..]);
        assert_eq!(capped.valid_count(), 50);
        assert!(capped.contains(0) && capped.contains(100) && !capped.contains(10));
    }

    #[test]
    fn bad_edges_rejected() {
        let mut spec = BinningSpec::default();
        spec.action_edges[5] = vec![0.0, 5.0, 5.0];
        assert_eq!(
            Discretizer::new(spec).unwrap_err(),
            DiscretizeError::BadEdges { component: 5 }
        );
    }

    proptest::proptest! {
        #[test]
        fn binning_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let e = default_state_edges();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(bin_component(0, lo, &e).unwrap() <= bin_component(0, hi, &e).unwrap());
        }

        #[test]
        fn value_lies_in_its_bin(v in 0.0f64..=7.0) {
            let e = default_action_edges();
            let b = bin_component(0, v, &e).unwrap();
            proptest::prop_assert!(e[b] <= v && v <= e[b + 1]);
            if b + 1 < e.len() - 1 {
                proptest::prop_assert!(v < e[b + 1]);
            }
        }
    }
}
