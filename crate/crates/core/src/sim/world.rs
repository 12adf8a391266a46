use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SimConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Asymptomatic,
    InfectedMild,
    InfectedSevere,
    Hospitalized,
    Recovered,
    Deceased,
    /// vaccinated and not yet infected
    Protected,
}

impl Compartment {
    pub const ALL: [Compartment; 9] = [
        Compartment::Susceptible,
        Compartment::Exposed,
        Compartment::Asymptomatic,
        Compartment::InfectedMild,
        Compartment::InfectedSevere,
        Compartment::Hospitalized,
        Compartment::Recovered,
        Compartment::Deceased,
        Compartment::Protected,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Compartment::Susceptible => "S",
            Compartment::Exposed => "E",
            Compartment::Asymptomatic => "A",
            Compartment::InfectedMild => "IM",
            Compartment::InfectedSevere => "IS",
            Compartment::Hospitalized => "H",
            Compartment::Recovered => "R",
            Compartment::Deceased => "D",
            Compartment::Protected => "P",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_infectious(self) -> bool {
        matches!(
            self,
            Compartment::Asymptomatic | Compartment::InfectedMild | Compartment::InfectedSevere
        )
    }

    pub fn is_susceptible(self) -> bool {
        matches!(self, Compartment::Susceptible | Compartment::Protected)
    }

    /// Hospitalized and deceased agents never leave home.
    pub fn is_confined(self) -> bool {
        matches!(self, Compartment::Hospitalized | Compartment::Deceased)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Student,
    Employed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mask {
    None,
    HighEff,
    LowEff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vaccine {
    None,
    V1,
    V2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub age: u8,
    pub age_group: usize,
    pub role: Role,
    pub household: usize,
    /// office index for employed agents, school index for students
    pub workplace: usize,
    pub shop: usize,
    /// probability of spending the leisure tick at the shop
    pub shop_preference: f64,
    pub compartment: Compartment,
    pub mask: Mask,
    pub vaccine: Vaccine,
    pub consents_to_vaccine: bool,
    pub days_in_compartment: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub members: Vec<usize>,
    pub stock: f64,
}

/// A place agents can share within one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Home(usize),
    Office(usize),
    School(usize),
    Shop(usize),
}

impl Location {
    /// Dense slot index given the number of homes, offices and schools.
    pub fn slot(self, homes: usize, offices: usize, schools: usize) -> usize {
        match self {
            Location::Home(i) => i,
            Location::Office(i) => homes + i,
            Location::School(i) => homes + offices + i,
            Location::Shop(i) => homes + offices + schools + i,
        }
    }
}

pub fn role_for_age(age: u8, employed_min_age: u8) -> Role {
    if age < employed_min_age {
        Role::Student
    } else {
        Role::Employed
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub agents: Vec<Agent>,
    pub households: Vec<Household>,
}

impl World {
    pub fn count(&self, c: Compartment) -> usize {
        self.agents.iter().filter(|a| a.compartment == c).count()
    }

    pub fn compartment_counts(&self) -> [usize; 9] {
        let mut counts = [0; 9];
        for a in &self.agents {
            counts[a.compartment.index()] += 1;
        }
        counts
    }
}

fn household_capacity(employed: usize, cfg: &SimConfig) -> usize {
    let e = &cfg.economy;
    let affordable = if e.daily_consumption == 0.0 {
        usize::MAX
    } else {
        (employed as f64 * e.daily_income / e.daily_consumption).floor() as usize
    };
    affordable.min(cfg.population.max_household_size)
}

/// Builds agents, households and initial infections. Every household is headed
/// by an employed agent and never grows beyond what its earners can feed.
pub fn build_world(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<World, SimError> {
    cfg.validate()?;
    let pop = &cfg.population;
    let n = pop.population;
    let weight_sum: f64 = pop.age_group_weights.iter().sum();

    let mut agents = Vec::with_capacity(n);
    for id in 0..n {
        let mut u = rng.random::<f64>() * weight_sum;
        let mut group = 2;
        for (g, w) in pop.age_group_weights.iter().enumerate() {
            if u < *w {
                group = g;
                break;
            }
            u -= w;
        }
        let lo = if group == 0 { 0 } else { pop.age_group_max[group - 1] + 1 };
        let age = rng.random_range(lo..=pop.age_group_max[group]);
        let role = role_for_age(age, pop.employed_min_age);
        let workplace = match role {
            Role::Employed => rng.random_range(0..pop.offices),
            Role::Student => rng.random_range(0..pop.schools),
        };
        agents.push(Agent {
            id,
            age,
            age_group: group,
            role,
            household: usize::MAX,
            workplace,
            shop: rng.random_range(0..pop.shops),
            shop_preference: rng.random::<f64>(),
            compartment: Compartment::Susceptible,
            mask: Mask::None,
            vaccine: Vaccine::None,
            consents_to_vaccine: rng.random_bool(pop.vaccine_consent),
            days_in_compartment: 0,
        });
    }

    let mut employed: Vec<usize> = agents.iter().filter(|a| a.role == Role::Employed).map(|a| a.id).collect();
    let mut students: Vec<usize> = agents.iter().filter(|a| a.role == Role::Student).map(|a| a.id).collect();
    employed.shuffle(rng);
    students.shuffle(rng);
    let wanted = ((n as f64) / pop.mean_household_size).ceil() as usize;
    let n_households = wanted.min(employed.len());
    if n_households == 0 {
        return Err(SimError::Config("no employed agents to head a household".into()));
    }

    struct Slot {
        members: Vec<usize>,
        earners: usize,
    }
    let mut slots: Vec<Slot> = employed[..n_households]
        .iter()
        .map(|&id| Slot {
            members: vec![id],
            earners: 1,
        })
        .collect();
    let mut open: Vec<usize> = if household_capacity(1, cfg) > 1 {
        (0..n_households).collect()
    } else {
        Vec::new()
    };
    for &id in employed[n_households..].iter().chain(&students) {
        if open.is_empty() {
            return Err(SimError::Config(format!(
                "household capacity exhausted with {} households of at most {} members",
                n_households, pop.max_household_size
            )));
        }
        let pick = rng.random_range(0..open.len());
        let h = open[pick];
        let slot = &mut slots[h];
        slot.members.push(id);
        if agents[id].role == Role::Employed {
            slot.earners += 1;
        }
        if slot.members.len() >= household_capacity(slot.earners, cfg) {
            open.swap_remove(pick);
        }
    }

    let households: Vec<Household> = slots
        .into_iter()
        .enumerate()
        .map(|(h, slot)| {
            let mut members = slot.members;
            members.sort_unstable();
            for &m in &members {
                agents[m].household = h;
            }
            Household {
                stock: cfg.economy.initial_stock * members.len() as f64,
                members,
            }
        })
        .collect();

    let iv = &cfg.interventions;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for (rank, &id) in order.iter().enumerate() {
        agents[id].mask = if rank < iv.high_masks {
            Mask::HighEff
        } else if rank < iv.high_masks + iv.low_masks {
            Mask::LowEff
        } else {
            Mask::None
        };
    }

    let seeded: Vec<usize> = (0..n).collect::<Vec<_>>().partial_shuffle(rng, pop.initial_exposed).0.to_vec();
    for id in seeded {
        agents[id].compartment = Compartment::Exposed;
    }

    Ok(World { agents, households })
}
