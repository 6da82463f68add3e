//! Daily compartment dynamics: transmission over the contact network,
//! detection into quarantine, recovery, and waning of natural and vaccine
//! immunity.
//!
//! A day advances in a fixed phase order — transmission, detection,
//! recovery, natural waning, vaccine waning — with all infections computed
//! from the previous day's compartments, so a person infected today cannot
//! pass the disease on the same day. Detection *does* see people infected
//! earlier in the same day: with an instant detection rate the chain stops
//! at the first generation, which is the point of quarantine.

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::ContactNetwork;

/// Disease/vaccination compartment. "Infected" is not a compartment: it is
/// the derived sum of Exposed and Quarantined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Quarantined,
    Recovered,
    Vaccinated1,
    Vaccinated2,
    Vaccinated3,
}

impl Compartment {
    /// Dose level for a vaccinated compartment.
    pub fn vaccinated_dose(self) -> Option<u8> {
        match self {
            Compartment::Vaccinated1 => Some(1),
            Compartment::Vaccinated2 => Some(2),
            Compartment::Vaccinated3 => Some(3),
            _ => None,
        }
    }

    pub fn vaccinated(dose: u8) -> Compartment {
        match dose {
            1 => Compartment::Vaccinated1,
            2 => Compartment::Vaccinated2,
            3 => Compartment::Vaccinated3,
            other => panic!("no vaccinated compartment for dose {other}"),
        }
    }

    /// Exposed or Quarantined.
    pub fn is_infected(self) -> bool {
        matches!(self, Compartment::Exposed | Compartment::Quarantined)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    InTown,
    Outside,
}

/// Immunity-period regime for natural (disease-conferred) immunity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImmunityMode {
    /// Everyone retains natural immunity for the same period.
    Homogeneous,
    /// The period depends on vaccination and prior-infection history.
    RuleBased,
}

/// Whether immunity expires after a fixed number of days or decays as a
/// daily probability with the matching mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaningKind {
    Fixed,
    Exponential,
}

/// Per-person simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: u32,
    pub compartment: Compartment,
    pub location: Location,
    /// Doses received, whether or not they conferred immunity.
    pub doses_received: u8,
    /// Willingness for doses 1..3; dose d is taken only if willing for all
    /// doses up to and including d.
    pub willing: [bool; 3],
    /// Day a fixed-duration immunity (natural or vaccine) runs out.
    pub immunity_expires_day: Option<u32>,
    /// Day the next dose becomes due.
    pub next_dose_due_day: Option<u32>,
    pub ever_infected: bool,
    pub ever_vaccinated: bool,
    /// Had an infection before the current (most recent) episode.
    pub prior_infection: bool,
    /// Recovered while outside the town; the fresh natural-immunity timer is
    /// granted on return.
    pub recovered_outside: bool,
}

impl Agent {
    pub fn new(id: u32) -> Agent {
        Agent {
            id,
            compartment: Compartment::Susceptible,
            location: Location::InTown,
            doses_received: 0,
            willing: [false; 3],
            immunity_expires_day: None,
            next_dose_due_day: None,
            ever_infected: false,
            ever_vaccinated: false,
            prior_infection: false,
            recovered_outside: false,
        }
    }

    /// Moves the agent into Exposed, recording infection history.
    pub fn enter_exposed(&mut self) {
        self.prior_infection = self.ever_infected;
        self.ever_infected = true;
        self.compartment = Compartment::Exposed;
        self.immunity_expires_day = None;
    }

    /// Moves the agent into Recovered with a fresh natural-immunity timer.
    pub fn enter_recovered(&mut self, day: u32, rates: &EpidemicRates) {
        self.compartment = Compartment::Recovered;
        self.recovered_outside = false;
        self.immunity_expires_day = match rates.natural_waning {
            WaningKind::Fixed => {
                let days = rates.natural_days_for(self.ever_vaccinated, self.prior_infection);
                Some(day + days.round() as u32)
            }
            WaningKind::Exponential => None,
        };
    }

    fn wane_to_susceptible(&mut self) {
        self.compartment = Compartment::Susceptible;
        self.immunity_expires_day = None;
    }
}

/// All per-day transition rates of the compartment model.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicRates {
    /// Per-contact per-day transmission probability.
    pub beta: f64,
    /// Per-day recovery probability (applies to both E and U).
    pub delta: f64,
    /// Per-day testing probability before symptoms.
    pub lambda: f64,
    /// Inverse incubation period per day.
    pub tau: f64,
    pub immunity_mode: ImmunityMode,
    pub natural_waning: WaningKind,
    pub vaccine_waning: WaningKind,
    /// Natural immunity period in the homogeneous regime.
    pub natural_immunity_days: f64,
    /// Vaccine immunity period (same for every dose).
    pub vaccine_immunity_days: f64,
}

impl EpidemicRates {
    /// Daily probability of an exposed person being detected and
    /// quarantined, clamped into `[0, 1]`.
    pub fn detection_probability(&self) -> f64 {
        (self.lambda + self.tau).min(1.0)
    }

    /// Natural-immunity period for an agent with the given history.
    pub fn natural_days_for(&self, ever_vaccinated: bool, prior_infection: bool) -> f64 {
        match self.immunity_mode {
            ImmunityMode::Homogeneous => self.natural_immunity_days,
            ImmunityMode::RuleBased => {
                natural_immunity_duration(ever_vaccinated, prior_infection, ImmunityMode::RuleBased)
                    as f64
            }
        }
    }
}

/// Natural-immunity period in days. Homogeneous: 180 for everyone.
/// Rule-based: 140 with no history, 180 after either a prior infection or
/// any vaccination, 200 after both.
pub fn natural_immunity_duration(
    ever_vaccinated: bool,
    prior_infection: bool,
    mode: ImmunityMode,
) -> u32 {
    match mode {
        ImmunityMode::Homogeneous => 180,
        ImmunityMode::RuleBased => match (ever_vaccinated, prior_infection) {
            (false, false) => 140,
            (false, true) | (true, false) => 180,
            (true, true) => 200,
        },
    }
}

/// Probability of infection given `k` infectious neighbors, each contact
/// transmitting independently: `1 - (1 - beta)^k`.
pub fn infection_probability(infectious_neighbors: u32, beta: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&beta));
    1.0 - (1.0 - beta).powi(infectious_neighbors as i32)
}

/// Basic reproduction number `beta / delta`.
pub fn r0(beta: f64, delta: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "recovery rate must be positive, got {delta}"
        )));
    }
    Ok(beta / delta)
}

/// Moves `count` uniformly chosen distinct susceptible agents to Exposed.
pub fn seed_infections<R: Rng>(agents: &mut [Agent], count: usize, rng: &mut R) -> Result<()> {
    let mut susceptible: Vec<usize> = agents
        .iter()
        .enumerate()
        .filter(|(_, a)| a.compartment == Compartment::Susceptible)
        .map(|(i, _)| i)
        .collect();
    if count > susceptible.len() {
        return Err(Error::InsufficientSusceptibles {
            requested: count,
            available: susceptible.len(),
        });
    }
    for pick in 0..count {
        let j = rng.random_range(pick..susceptible.len());
        susceptible.swap(pick, j);
        agents[susceptible[pick]].enter_exposed();
    }
    Ok(())
}

/// Reusable per-node buffer for the transmission phase.
pub struct InfectionScratch {
    counts: Vec<u32>,
    touched: Vec<u32>,
}

impl InfectionScratch {
    pub fn new(n: usize) -> InfectionScratch {
        InfectionScratch { counts: vec![0; n], touched: Vec::new() }
    }
}

/// Advances every agent one day through the five phases.
///
/// Only in-town agents transmit, get detected, or recover here; disease
/// while outside is the travel module's business. Immunity waning applies
/// everywhere, except that people who recovered outside hold no timer until
/// they return.
pub fn step_day<R: Rng>(
    agents: &mut [Agent],
    net: &ContactNetwork,
    rates: &EpidemicRates,
    day: u32,
    rng: &mut R,
    scratch: &mut InfectionScratch,
) {
    let n = agents.len();
    debug_assert_eq!(net.node_count(), n);

    // Phase 1: transmission, driven from yesterday's Exposed set.
    scratch.touched.clear();
    for i in 0..n {
        if agents[i].compartment != Compartment::Exposed || agents[i].location != Location::InTown
        {
            continue;
        }
        for &nb in net.neighbors(i as u32) {
            let target = &agents[nb as usize];
            if target.compartment == Compartment::Susceptible
                && target.location == Location::InTown
            {
                if scratch.counts[nb as usize] == 0 {
                    scratch.touched.push(nb);
                }
                scratch.counts[nb as usize] += 1;
            }
        }
    }
    for idx in 0..scratch.touched.len() {
        let node = scratch.touched[idx] as usize;
        let k = scratch.counts[node];
        scratch.counts[node] = 0;
        if rng.random::<f64>() < infection_probability(k, rates.beta) {
            agents[node].enter_exposed();
        }
    }

    // Phase 2: detection E -> U. Includes people exposed this very day, so
    // an instant detection rate quarantines them before they transmit.
    let p_detect = rates.detection_probability();
    for agent in agents.iter_mut() {
        if agent.compartment == Compartment::Exposed
            && agent.location == Location::InTown
            && rng.random::<f64>() < p_detect
        {
            agent.compartment = Compartment::Quarantined;
        }
    }

    // Phase 3: recovery, both E -> R and U -> R.
    for i in 0..n {
        if agents[i].compartment.is_infected()
            && agents[i].location == Location::InTown
            && rng.random::<f64>() < rates.delta
        {
            agents[i].enter_recovered(day, rates);
        }
    }

    // Phase 4: natural immunity waning R -> S.
    for agent in agents.iter_mut() {
        if agent.compartment != Compartment::Recovered || agent.recovered_outside {
            continue;
        }
        match rates.natural_waning {
            WaningKind::Fixed => {
                if agent.immunity_expires_day.is_some_and(|d| d <= day) {
                    agent.wane_to_susceptible();
                }
            }
            WaningKind::Exponential => {
                let days = rates.natural_days_for(agent.ever_vaccinated, agent.prior_infection);
                if rng.random::<f64>() < 1.0 / days {
                    agent.wane_to_susceptible();
                }
            }
        }
    }

    // Phase 5: vaccine immunity waning V_i -> S.
    for agent in agents.iter_mut() {
        if agent.compartment.vaccinated_dose().is_none() {
            continue;
        }
        match rates.vaccine_waning {
            WaningKind::Fixed => {
                if agent.immunity_expires_day.is_some_and(|d| d <= day) {
                    agent.wane_to_susceptible();
                }
            }
            WaningKind::Exponential => {
                if rng.random::<f64>() < 1.0 / rates.vaccine_immunity_days {
                    agent.wane_to_susceptible();
                }
            }
        }
    }

    debug_assert!(validate_agents(agents).is_ok());
}

/// Checks per-agent invariants; used at phase boundaries in debug builds and
/// by tests.
pub fn validate_agents(agents: &[Agent]) -> Result<()> {
    for agent in agents {
        if let Some(dose) = agent.compartment.vaccinated_dose() {
            if !agent.ever_vaccinated || agent.doses_received < dose {
                return Err(Error::InconsistentState(format!(
                    "agent {} in V{dose} with {} doses",
                    agent.id, agent.doses_received
                )));
            }
        }
        if (agent.compartment.is_infected() || agent.compartment == Compartment::Recovered)
            && !agent.ever_infected
        {
            return Err(Error::InconsistentState(format!(
                "agent {} in {:?} but never infected",
                agent.id, agent.compartment
            )));
        }
        if agent.prior_infection && !agent.ever_infected {
            return Err(Error::InconsistentState(format!(
                "agent {} has prior_infection without ever_infected",
                agent.id
            )));
        }
        if agent.doses_received > 3 {
            return Err(Error::InconsistentState(format!(
                "agent {} has {} doses",
                agent.id, agent.doses_received
            )));
        }
        if agent.recovered_outside && agent.compartment != Compartment::Recovered {
            return Err(Error::InconsistentState(format!(
                "agent {} flagged recovered_outside in {:?}",
                agent.id, agent.compartment
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_rates() -> EpidemicRates {
        EpidemicRates {
            beta: 0.14,
            delta: 0.05,
            lambda: 0.01,
            tau: 1.0 / 14.0,
            immunity_mode: ImmunityMode::Homogeneous,
            natural_waning: WaningKind::Fixed,
            vaccine_waning: WaningKind::Fixed,
            natural_immunity_days: 180.0,
            vaccine_immunity_days: 180.0,
        }
    }

    fn fresh_agents(n: usize) -> Vec<Agent> {
        (0..n as u32).map(Agent::new).collect()
    }

    #[test]
    fn infection_probability_values() {
        assert_eq!(infection_probability(0, 0.14), 0.0);
        assert!((infection_probability(1, 0.14) - 0.14).abs() < 1e-15);
        // 1 - 0.86^2
        assert!((infection_probability(2, 0.14) - 0.2604).abs() < 1e-12);
    }

    #[test]
    fn natural_immunity_duration_table() {
        for &v in &[false, true] {
            for &p in &[false, true] {
                assert_eq!(natural_immunity_duration(v, p, ImmunityMode::Homogeneous), 180);
            }
        }
        assert_eq!(natural_immunity_duration(false, false, ImmunityMode::RuleBased), 140);
        assert_eq!(natural_immunity_duration(false, true, ImmunityMode::RuleBased), 180);
        assert_eq!(natural_immunity_duration(true, false, ImmunityMode::RuleBased), 180);
        assert_eq!(natural_immunity_duration(true, true, ImmunityMode::RuleBased), 200);
    }

    #[test]
    fn r0_values() {
        assert!((r0(0.14, 0.05).unwrap() - 2.8).abs() < 1e-12);
        assert_eq!(r0(0.0, 0.05).unwrap(), 0.0);
        assert_eq!(r0(0.05, 0.05).unwrap(), 1.0);
        assert!(r0(0.14, 0.0).is_err());
    }

    #[test]
    fn seeding_counts_and_determinism() {
        let mut a = fresh_agents(10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        seed_infections(&mut a, 0, &mut rng).unwrap();
        assert!(a.iter().all(|x| x.compartment == Compartment::Susceptible));

        seed_infections(&mut a, 4, &mut rng).unwrap();
        let exposed: Vec<u32> =
            a.iter().filter(|x| x.compartment == Compartment::Exposed).map(|x| x.id).collect();
        assert_eq!(exposed.len(), 4);
        assert_eq!(
            a.iter().filter(|x| x.compartment == Compartment::Susceptible).count(),
            9_996
        );

        // Same seed, same picks.
        let mut b = fresh_agents(10_000);
        let mut rng1 = ChaCha8Rng::seed_from_u64(77);
        seed_infections(&mut b, 4, &mut rng1).unwrap();
        let mut c = fresh_agents(10_000);
        let mut rng2 = ChaCha8Rng::seed_from_u64(77);
        seed_infections(&mut c, 4, &mut rng2).unwrap();
        let ids = |xs: &[Agent]| {
            xs.iter()
                .filter(|x| x.compartment == Compartment::Exposed)
                .map(|x| x.id)
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&b), ids(&c));
    }

    #[test]
    fn seeding_rejects_overdraw() {
        let mut a = fresh_agents(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(seed_infections(&mut a, 4, &mut rng).is_err());
    }

    #[test]
    fn closed_all_susceptible_system_stays_put() {
        let net = ContactNetwork::generate_ba(100, 4.0, 5).unwrap();
        let mut agents = fresh_agents(100);
        let rates = default_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut scratch = InfectionScratch::new(100);
        for day in 1..=50 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
        }
        assert!(agents.iter().all(|a| a.compartment == Compartment::Susceptible));
    }

    #[test]
    fn detection_residence_matches_geometric_mean() {
        // 10^4 agents start Exposed with no recovery and no transmission;
        // days until quarantine should be geometric with mean 1/(lambda+tau).
        let n = 10_000;
        let net = ContactNetwork::from_edges(n, &[]).unwrap();
        let mut agents = fresh_agents(n);
        for a in agents.iter_mut() {
            a.enter_exposed();
        }
        let mut rates = default_rates();
        rates.beta = 0.0;
        rates.delta = 0.0;
        let p = rates.detection_probability();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut scratch = InfectionScratch::new(n);
        let mut detected_day = vec![0u32; n];
        for day in 1..=2_000 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
            for (i, a) in agents.iter().enumerate() {
                if detected_day[i] == 0 && a.compartment == Compartment::Quarantined {
                    detected_day[i] = day;
                }
            }
        }
        assert!(detected_day.iter().all(|&d| d > 0), "some agents never detected");
        let mean = detected_day.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
        let expected = 1.0 / p; // ~12.28 days
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "mean {mean}, expected {expected}"
        );
    }

    #[test]
    fn fixed_natural_immunity_expires_exactly() {
        let net = ContactNetwork::from_edges(1, &[]).unwrap();
        let mut agents = fresh_agents(1);
        agents[0].enter_exposed();
        let rates = default_rates();
        agents[0].enter_recovered(100, &rates);
        assert_eq!(agents[0].immunity_expires_day, Some(280));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut scratch = InfectionScratch::new(1);
        for day in 101..=279 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
            assert_eq!(agents[0].compartment, Compartment::Recovered, "day {day}");
        }
        step_day(&mut agents, &net, &rates, 280, &mut rng, &mut scratch);
        assert_eq!(agents[0].compartment, Compartment::Susceptible);
    }

    #[test]
    fn exponential_waning_matches_rate_mean() {
        let n = 10_000;
        let net = ContactNetwork::from_edges(n, &[]).unwrap();
        let mut agents = fresh_agents(n);
        let mut rates = default_rates();
        rates.natural_waning = WaningKind::Exponential;
        rates.natural_immunity_days = 50.0;
        for a in agents.iter_mut() {
            a.enter_exposed();
            a.enter_recovered(0, &rates);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut scratch = InfectionScratch::new(n);
        let mut left_day = vec![0u32; n];
        for day in 1..=3_000 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
            for (i, a) in agents.iter().enumerate() {
                if left_day[i] == 0 && a.compartment == Compartment::Susceptible {
                    left_day[i] = day;
                }
            }
        }
        assert!(left_day.iter().all(|&d| d > 0));
        let mean = left_day.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
        assert!((mean - 50.0).abs() / 50.0 < 0.05, "mean residence {mean}");
    }

    #[test]
    fn instant_quarantine_stops_chains_at_first_generation() {
        let net = ContactNetwork::generate_ba(500, 6.0, 8).unwrap();
        let mut agents = fresh_agents(500);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        seed_infections(&mut agents, 5, &mut rng).unwrap();
        let seeds: Vec<u32> = agents
            .iter()
            .filter(|a| a.compartment == Compartment::Exposed)
            .map(|a| a.id)
            .collect();

        let mut allowed: std::collections::HashSet<u32> = seeds.iter().copied().collect();
        for &s in &seeds {
            allowed.extend(net.neighbors(s).iter().copied());
        }

        let mut rates = default_rates();
        rates.beta = 0.9; // spread hard, but detection is instant
        rates.lambda = 1.0;
        rates.tau = 0.5;
        let mut scratch = InfectionScratch::new(500);
        for day in 1..=200 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
        }
        for a in &agents {
            if a.ever_infected {
                assert!(allowed.contains(&a.id), "agent {} infected beyond one hop", a.id);
            }
        }
    }

    #[test]
    fn zero_beta_means_no_new_infections() {
        let net = ContactNetwork::generate_ba(300, 5.0, 6).unwrap();
        let mut agents = fresh_agents(300);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        seed_infections(&mut agents, 10, &mut rng).unwrap();
        let mut rates = default_rates();
        rates.beta = 0.0;
        let mut scratch = InfectionScratch::new(300);
        for day in 1..=400 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
        }
        assert_eq!(agents.iter().filter(|a| a.ever_infected).count(), 10);
    }

    #[test]
    fn instant_recovery_caps_infected_residence_at_one_day() {
        let net = ContactNetwork::generate_ba(400, 5.0, 10).unwrap();
        let mut agents = fresh_agents(400);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        seed_infections(&mut agents, 8, &mut rng).unwrap();
        let mut rates = default_rates();
        rates.delta = 1.0;
        let mut scratch = InfectionScratch::new(400);
        let mut longest = vec![0u32; 400];
        let mut streak = vec![0u32; 400];
        for day in 1..=150 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
            for (i, a) in agents.iter().enumerate() {
                if a.compartment.is_infected() {
                    streak[i] += 1;
                    longest[i] = longest[i].max(streak[i]);
                } else {
                    streak[i] = 0;
                }
            }
        }
        assert!(longest.iter().all(|&d| d <= 1), "max {:?}", longest.iter().max());
    }

    #[test]
    fn monotone_history_flags() {
        let net = ContactNetwork::generate_ba(200, 5.0, 12).unwrap();
        let mut agents = fresh_agents(200);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        seed_infections(&mut agents, 5, &mut rng).unwrap();
        let rates = default_rates();
        let mut scratch = InfectionScratch::new(200);
        let mut infected_flags = vec![false; 200];
        for day in 1..=500 {
            step_day(&mut agents, &net, &rates, day, &mut rng, &mut scratch);
            for (i, a) in agents.iter().enumerate() {
                assert!(!(infected_flags[i] && !a.ever_infected), "flag flipped back");
                infected_flags[i] = a.ever_infected;
            }
        }
        validate_agents(&agents).unwrap();
    }
}
