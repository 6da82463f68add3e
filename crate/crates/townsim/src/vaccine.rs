//! Vaccine supply ramp-up, per-dose willingness, dose scheduling, efficacy,
//! and daily allocation of scarce doses.

use rand::Rng;

use crate::epidemic::{Agent, Compartment, EpidemicRates, Location, WaningKind};

/// Supply schedule, dose intervals, uptake and efficacy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VaccineSchedule {
    /// First day any supply arrives.
    pub start_day: u32,
    /// Doses delivered on the first day; supply doubles daily until capped.
    pub initial_doses: u32,
    /// Steady-state daily dose cap.
    pub daily_cap: u32,
    /// Days between dose 1 and dose 2.
    pub dose2_interval: u32,
    /// Days between dose 2 and dose 3.
    pub dose3_interval: u32,
    /// Scenario cap on doses per person (0 disables the program).
    pub max_doses: u8,
    /// Per-dose willingness probability.
    pub uptake: f64,
    /// Probability dose d confers immunity (moves the person into V_d).
    pub efficacy: [f64; 3],
    /// How first doses are allocated when supply is short.
    pub first_dose_order: FirstDoseOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstDoseOrder {
    /// Uniformly random among willing, never-dosed susceptible people.
    Random,
    /// Most-connected people first.
    DegreeDesc,
}

/// One administered dose, for the optional event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DoseEvent {
    pub day: u32,
    pub agent_id: u32,
    pub dose_number: u8,
    pub succeeded: bool,
}

/// Doses available on `day`: zero before the program starts, then an
/// exponential ramp from `initial_doses` capped at `daily_cap`.
pub fn daily_supply(day: u32, sched: &VaccineSchedule) -> u32 {
    if day < sched.start_day {
        return 0;
    }
    let doublings = day - sched.start_day;
    if doublings >= 32 {
        return sched.daily_cap.min(u32::MAX) * u32::from(sched.initial_doses > 0);
    }
    ((sched.initial_doses as u64) << doublings).min(sched.daily_cap as u64) as u32
}

/// Draws per-dose willingness independently for every agent. A person takes
/// dose d only if willing for every dose up to d, which compounds the uptake
/// rate dose by dose.
pub fn assign_willingness<R: Rng>(agents: &mut [Agent], uptake: f64, rng: &mut R) {
    for agent in agents.iter_mut() {
        for slot in agent.willing.iter_mut() {
            *slot = rng.random::<f64>() < uptake;
        }
    }
}

fn willing_through(agent: &Agent, dose: u8) -> bool {
    (0..dose as usize).all(|d| agent.willing[d])
}

/// Eligible to receive a dose right now: in town and either susceptible or
/// holding vaccine immunity. Quarantined, exposed and recovered people have
/// their due doses retried daily.
fn dosable_now(agent: &Agent) -> bool {
    agent.location == Location::InTown
        && (agent.compartment == Compartment::Susceptible
            || agent.compartment.vaccinated_dose().is_some())
}

/// Allocates up to the day's supply in priority order: due third doses, due
/// second doses, then first doses to willing never-dosed susceptible people.
/// Returns the number of doses used; over-demand simply queues.
pub fn administer_doses<R: Rng>(
    agents: &mut [Agent],
    degrees: &[u32],
    day: u32,
    sched: &VaccineSchedule,
    rates: &EpidemicRates,
    rng: &mut R,
    mut log: Option<&mut Vec<DoseEvent>>,
) -> u32 {
    let mut remaining = daily_supply(day, sched);
    if remaining == 0 || sched.max_doses == 0 {
        return 0;
    }
    let mut used = 0;

    // Boosters first: the supply is steady by the time they come due, and
    // serving them first keeps every willing person on schedule.
    for booster in [3u8, 2u8] {
        if sched.max_doses < booster {
            continue;
        }
        for i in 0..agents.len() {
            if remaining == 0 {
                break;
            }
            let a = &agents[i];
            if a.doses_received == booster - 1
                && a.next_dose_due_day.is_some_and(|d| d <= day)
                && willing_through(a, booster)
                && dosable_now(a)
            {
                give_dose(&mut agents[i], booster, day, sched, rates, rng, &mut log);
                remaining -= 1;
                used += 1;
            }
        }
    }

    if remaining > 0 && sched.max_doses >= 1 {
        let mut eligible: Vec<u32> = agents
            .iter()
            .filter(|a| {
                a.doses_received == 0
                    && a.willing[0]
                    && a.compartment == Compartment::Susceptible
                    && a.location == Location::InTown
            })
            .map(|a| a.id)
            .collect();
        let picks = (remaining as usize).min(eligible.len());
        match sched.first_dose_order {
            FirstDoseOrder::Random => {
                for pick in 0..picks {
                    let j = rng.random_range(pick..eligible.len());
                    eligible.swap(pick, j);
                }
            }
            FirstDoseOrder::DegreeDesc => {
                eligible.sort_by_key(|&id| (std::cmp::Reverse(degrees[id as usize]), id));
            }
        }
        for &id in eligible.iter().take(picks) {
            give_dose(&mut agents[id as usize], 1, day, sched, rates, rng, &mut log);
            remaining -= 1;
            used += 1;
        }
    }

    let _ = remaining;
    used
}

fn give_dose<R: Rng>(
    agent: &mut Agent,
    dose: u8,
    day: u32,
    sched: &VaccineSchedule,
    rates: &EpidemicRates,
    rng: &mut R,
    log: &mut Option<&mut Vec<DoseEvent>>,
) {
    agent.doses_received = dose;
    agent.ever_vaccinated = true;
    let succeeded = rng.random::<f64>() < sched.efficacy[dose as usize - 1];
    if succeeded {
        agent.compartment = Compartment::vaccinated(dose);
        agent.immunity_expires_day = match rates.vaccine_waning {
            WaningKind::Fixed => Some(day + rates.vaccine_immunity_days.round() as u32),
            WaningKind::Exponential => None,
        };
    }
    // A failed dose still books the next one; programs schedule by calendar.
    agent.next_dose_due_day = match dose {
        1 if sched.max_doses >= 2 => Some(day + sched.dose2_interval),
        2 if sched.max_doses >= 3 => Some(day + sched.dose3_interval),
        _ => None,
    };
    if let Some(events) = log.as_deref_mut() {
        events.push(DoseEvent { day, agent_id: agent.id, dose_number: dose, succeeded });
    }
}
