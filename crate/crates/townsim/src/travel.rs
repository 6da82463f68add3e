//! Movement between the town and a large, well-mixed outside city where the
//! epidemic keeps circulating. Travelers can contract the disease outside
//! and reseed the town when they return.

use rand::Rng;

use crate::epidemic::{Agent, Compartment, EpidemicRates, Location, WaningKind};
use crate::error::{Error, Result};

/// Deterministic mean-field SIRS model of the outside population, advanced
/// one day at a time by forward Euler.
#[derive(Debug, Clone, PartialEq)]
pub struct OutsideCity {
    pub susceptible: f64,
    pub infected: f64,
    pub recovered: f64,
    /// Per-day transmission rate in the well-mixed population.
    pub beta: f64,
    /// Per-day recovery rate.
    pub delta: f64,
    /// Per-day rate of recovered people becoming susceptible again.
    pub resusceptibility: f64,
}

impl OutsideCity {
    /// Starts the outside epidemic at `(1 - eps, eps, 0)`.
    pub fn new(beta: f64, delta: f64, resusceptibility: f64, initial_infected: f64) -> OutsideCity {
        OutsideCity {
            susceptible: 1.0 - initial_infected,
            infected: initial_infected,
            recovered: 0.0,
            beta,
            delta,
            resusceptibility,
        }
    }

    /// One forward-Euler day of the SIRS flow, clamped and renormalized so
    /// the fractions stay a probability vector.
    pub fn step(&mut self) {
        let new_infections = self.beta * self.susceptible * self.infected;
        let recoveries = self.delta * self.infected;
        let resusceptible = self.resusceptibility * self.recovered;

        self.susceptible = (self.susceptible - new_infections + resusceptible).clamp(0.0, 1.0);
        self.infected = (self.infected + new_infections - recoveries).clamp(0.0, 1.0);
        self.recovered = (self.recovered + recoveries - resusceptible).clamp(0.0, 1.0);

        let total = self.susceptible + self.infected + self.recovered;
        self.susceptible /= total;
        self.infected /= total;
        self.recovered /= total;
    }

    /// Fraction conservation check, to within 1e-9.
    pub fn check_conservation(&self) -> Result<()> {
        let total = self.susceptible + self.infected + self.recovered;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InconsistentState(format!(
                "outside-city fractions sum to {total}"
            )));
        }
        Ok(())
    }
}

/// Daily movement rates.
///
/// Both rates are calibrated from aggregate arrival/departure counts divided
/// by the whole population, so each is a *flow* per person per day: expected
/// departures are `departure * population` and expected returns are
/// `return_rate * population` (capped by how many people are actually away).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelRates {
    /// Daily departure flow per inhabitant.
    pub departure: f64,
    /// Daily return flow per inhabitant.
    pub return_rate: f64,
}

impl TravelRates {
    pub fn disabled(&self) -> bool {
        self.departure == 0.0 && self.return_rate == 0.0
    }
}

/// One day of travel: departures, disease while outside, and returns.
///
/// While outside, a susceptible traveler is infected with probability
/// `city.beta * city.infected` and an infected traveler recovers with
/// probability `city.delta`. Travelers holding unexpired natural or vaccine
/// immunity cannot contract the disease outside. A traveler who recovered
/// outside re-enters town in Recovered with a fresh natural-immunity timer
/// granted on the day of return.
pub fn step_travel<R: Rng>(
    agents: &mut [Agent],
    city: &OutsideCity,
    rates: &TravelRates,
    epidemic: &EpidemicRates,
    day: u32,
    rng: &mut R,
) {
    let p_infect_outside = city.beta * city.infected;
    let outside_count = agents.iter().filter(|a| a.location == Location::Outside).count();
    // The return flow is shared among whoever is currently away.
    let p_return = if outside_count == 0 {
        0.0
    } else {
        (rates.return_rate * agents.len() as f64 / outside_count as f64).min(1.0)
    };
    for agent in agents.iter_mut() {
        match agent.location {
            Location::InTown => {
                // Quarantined people never depart.
                if agent.compartment != Compartment::Quarantined
                    && rates.departure > 0.0
                    && rng.random::<f64>() < rates.departure
                {
                    agent.location = Location::Outside;
                }
            }
            Location::Outside => {
                match agent.compartment {
                    Compartment::Susceptible => {
                        if p_infect_outside > 0.0 && rng.random::<f64>() < p_infect_outside {
                            agent.enter_exposed();
                        }
                    }
                    Compartment::Exposed => {
                        if rng.random::<f64>() < city.delta {
                            agent.compartment = Compartment::Recovered;
                            agent.recovered_outside = true;
                            agent.immunity_expires_day = None;
                        }
                    }
                    // R and V waning is handled by the daily step; immune
                    // travelers contract nothing out here.
                    _ => {}
                }
                if p_return > 0.0 && rng.random::<f64>() < p_return {
                    agent.location = Location::InTown;
                    if agent.recovered_outside {
                        agent.recovered_outside = false;
                        agent.immunity_expires_day = match epidemic.natural_waning {
                            WaningKind::Fixed => {
                                let days = epidemic
                                    .natural_days_for(agent.ever_vaccinated, agent.prior_infection);
                                Some(day + days.round() as u32)
                            }
                            WaningKind::Exponential => None,
                        };
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::ImmunityMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_city() -> OutsideCity {
        OutsideCity::new(0.14, 0.05, 1.0 / 180.0, 100.0 / 4_000_000.0)
    }

    fn epidemic_rates() -> EpidemicRates {
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

    #[test]
    fn disease_free_city_is_a_fixed_point() {
        let mut city = OutsideCity::new(0.14, 0.05, 1.0 / 180.0, 0.0);
        let before = city.clone();
        for _ in 0..500 {
            city.step();
        }
        assert_eq!(city, before);
    }

    #[test]
    fn city_reaches_endemic_equilibrium() {
        let mut city = paper_city();
        for _ in 0..3_000 {
            city.step();
            city.check_conservation().unwrap();
        }
        // Fixed point of the SIRS map: i* = (1 - delta/beta) * g/(g + delta).
        let g = 1.0 / 180.0;
        let expected = (1.0 - 0.05 / 0.14) * g / (g + 0.05);
        assert!((city.infected - expected).abs() < 1e-3, "i = {}", city.infected);
    }

    #[test]
    fn early_growth_factor_matches_linearization() {
        let mut city = OutsideCity::new(0.14, 0.05, 1.0 / 180.0, 1e-8);
        let i0 = city.infected;
        city.step();
        let factor = city.infected / i0;
        assert!((factor - 1.09).abs() < 1e-6, "growth {factor}");
    }

    #[test]
    fn zero_departure_rate_moves_nobody() {
        let mut agents: Vec<Agent> = (0..200).map(Agent::new).collect();
        let city = paper_city();
        let rates = TravelRates { departure: 0.0, return_rate: 0.5 };
        let epi = epidemic_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for day in 1..=100 {
            step_travel(&mut agents, &city, &rates, &epi, day, &mut rng);
        }
        assert!(agents.iter().all(|a| a.location == Location::InTown));
    }

    #[test]
    fn zero_rates_change_no_state() {
        let mut agents: Vec<Agent> = (0..50).map(Agent::new).collect();
        agents[3].enter_exposed();
        let before = agents.clone();
        let city = paper_city();
        let rates = TravelRates { departure: 0.0, return_rate: 0.0 };
        let epi = epidemic_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for day in 1..=50 {
            step_travel(&mut agents, &city, &rates, &epi, day, &mut rng);
        }
        assert_eq!(agents, before);
    }

    #[test]
    fn departure_counts_match_rate() {
        let n = 10_000;
        let mut agents: Vec<Agent> = (0..n).map(Agent::new).collect();
        let city = OutsideCity::new(0.14, 0.05, 1.0 / 180.0, 0.0);
        let rates = TravelRates { departure: 0.00012, return_rate: 0.0 };
        let epi = epidemic_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut expected = 0.0;
        for day in 1..=1_000 {
            let in_town = agents.iter().filter(|a| a.location == Location::InTown).count();
            expected += in_town as f64 * rates.departure;
            step_travel(&mut agents, &city, &rates, &epi, day, &mut rng);
        }
        let departed = agents.iter().filter(|a| a.location == Location::Outside).count() as f64;
        let sigma = expected.sqrt();
        assert!(
            (departed - expected).abs() <= 3.0 * sigma,
            "departed {departed}, expected {expected} +- {sigma}"
        );
    }

    #[test]
    fn quarantined_agents_never_depart() {
        let mut agents: Vec<Agent> = (0..500).map(Agent::new).collect();
        for a in agents.iter_mut() {
            a.enter_exposed();
            a.compartment = Compartment::Quarantined;
        }
        let city = paper_city();
        let rates = TravelRates { departure: 0.9, return_rate: 0.0 };
        let epi = epidemic_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for day in 1..=20 {
            step_travel(&mut agents, &city, &rates, &epi, day, &mut rng);
        }
        assert!(agents.iter().all(|a| a.location == Location::InTown));
    }

    #[test]
    fn immune_travelers_do_not_contract_outside() {
        let mut agents: Vec<Agent> = (0..300).map(Agent::new).collect();
        for a in agents.iter_mut() {
            a.location = Location::Outside;
            a.doses_received = 2;
            a.ever_vaccinated = true;
            a.compartment = Compartment::Vaccinated2;
            a.immunity_expires_day = Some(10_000);
        }
        let mut city = paper_city();
        city.infected = 0.06;
        let rates = TravelRates { departure: 0.0, return_rate: 0.0 };
        let epi = epidemic_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for day in 1..=365 {
            step_travel(&mut agents, &city, &rates, &epi, day, &mut rng);
        }
        assert!(agents.iter().all(|a| !a.ever_infected));
    }

    #[test]
    fn outside_recovery_gets_fresh_timer_on_return() {
        let mut agents: Vec<Agent> = (0..1).map(Agent::new).collect();
        agents[0].location = Location::Outside;
        agents[0].enter_exposed();
        let mut city = paper_city();
        city.delta = 1.0; // recover immediately outside
        let rates = TravelRates { departure: 0.0, return_rate: 1.0 };
        let epi = epidemic_rates();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        step_travel(&mut agents, &city, &rates, &epi, 500, &mut rng);
        assert_eq!(agents[0].location, Location::InTown);
        assert_eq!(agents[0].compartment, Compartment::Recovered);
        assert!(!agents[0].recovered_outside);
        assert_eq!(agents[0].immunity_expires_day, Some(500 + 180));
    }
}
