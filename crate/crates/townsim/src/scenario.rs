//! The full simulation loop: build the network, seed infections, iterate the
//! daily phases across all modules in a fixed order, and record a per-day
//! time series. Replicate batches run in parallel, each with its own RNG
//! streams, and are bitwise reproducible for a given configuration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::epidemic::{
    seed_infections, step_day, validate_agents, Agent, Compartment, InfectionScratch, Location,
};
use crate::error::{Error, Result};
use crate::network::ContactNetwork;
use crate::travel::step_travel;
use crate::vaccine::{administer_doses, assign_willingness, DoseEvent};

/// End-of-day snapshot. Compartment counts cover in-town agents only;
/// `outside` counts travelers, so the columns sum to the population.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRecord {
    pub day: u32,
    pub susceptible: u32,
    pub exposed: u32,
    pub quarantined: u32,
    pub recovered: u32,
    pub v1: u32,
    pub v2: u32,
    pub v3: u32,
    pub outside: u32,
    /// `(exposed + quarantined) / population`.
    pub infected_proportion: f64,
    /// Mean contact count of currently infected in-town people; 0 when
    /// nobody is infected.
    pub mean_degree_infected: f64,
    pub cumulative_doses: u64,
    /// Infected fraction of the outside city.
    pub outside_prevalence: f64,
}

impl DailyRecord {
    /// Compartment counts plus travelers must cover everyone exactly.
    pub fn validate(&self, population: u32) -> Result<()> {
        let total = self.susceptible
            + self.exposed
            + self.quarantined
            + self.recovered
            + self.v1
            + self.v2
            + self.v3
            + self.outside;
        if total != population {
            return Err(Error::InconsistentState(format!(
                "day {}: compartments sum to {total}, population is {population}",
                self.day
            )));
        }
        if !(0.0..=1.0).contains(&self.infected_proportion) {
            return Err(Error::InconsistentState(format!(
                "day {}: infected proportion {}",
                self.day, self.infected_proportion
            )));
        }
        Ok(())
    }
}

pub const TIMESERIES_HEADER: &str = "day,susceptible,exposed,quarantined,recovered,v1,v2,v3,\
outside,infected_proportion,mean_degree_infected,cumulative_doses,outside_prevalence";

/// A completed run: one record per day, day 0 included.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub records: Vec<DailyRecord>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn infected_proportion(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.infected_proportion).collect()
    }

    pub fn mean_degree_infected(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_degree_infected).collect()
    }

    /// CSV with exactly one header row, comma delimiter, and a terminating
    /// newline; floating-point columns use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 64);
        out.push_str(TIMESERIES_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.day,
                r.susceptible,
                r.exposed,
                r.quarantined,
                r.recovered,
                r.v1,
                r.v2,
                r.v3,
                r.outside,
                r.infected_proportion,
                r.mean_degree_infected,
                r.cumulative_doses,
                r.outside_prevalence,
            ));
        }
        out
    }

    /// Parses the CSV written by [`to_csv`](Self::to_csv), reporting the
    /// offending row on malformed input.
    pub fn parse_csv(text: &str) -> Result<TimeSeries> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(Error::MalformedInput { row: 1, message: "empty file".into() })?;
        if header.trim() != TIMESERIES_HEADER {
            return Err(Error::MalformedInput {
                row: 1,
                message: format!("unexpected header `{header}`"),
            });
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let row = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 13 {
                return Err(Error::MalformedInput {
                    row,
                    message: format!("expected 13 fields, got {}", fields.len()),
                });
            }
            fn field<T: std::str::FromStr>(fields: &[&str], i: usize, row: usize) -> Result<T> {
                fields[i].trim().parse().map_err(|_| Error::MalformedInput {
                    row,
                    message: format!("invalid value `{}` in column {}", fields[i], i + 1),
                })
            }
            records.push(DailyRecord {
                day: field(&fields, 0, row)?,
                susceptible: field(&fields, 1, row)?,
                exposed: field(&fields, 2, row)?,
                quarantined: field(&fields, 3, row)?,
                recovered: field(&fields, 4, row)?,
                v1: field(&fields, 5, row)?,
                v2: field(&fields, 6, row)?,
                v3: field(&fields, 7, row)?,
                outside: field(&fields, 8, row)?,
                infected_proportion: field(&fields, 9, row)?,
                mean_degree_infected: field(&fields, 10, row)?,
                cumulative_doses: field(&fields, 11, row)?,
                outside_prevalence: field(&fields, 12, row)?,
            });
        }
        Ok(TimeSeries { records })
    }
}

/// Extra outputs a run can produce besides the time series.
#[derive(Debug, Default)]
pub struct RunOptions {
    /// Record every administered dose.
    pub log_doses: bool,
    /// Use this network instead of generating one (node count must match
    /// the configured population).
    pub network: Option<ContactNetwork>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub series: TimeSeries,
    pub dose_events: Vec<DoseEvent>,
    pub network: ContactNetwork,
    /// Daily outside-city trajectory `(day, s, i, r)`.
    pub outside_trajectory: Vec<(u32, f64, f64, f64)>,
}

// Distinct RNG streams per module, derived from the scenario seed, so that
// e.g. disabling vaccination cannot perturb the epidemic's draws.
const STREAM_NETWORK: u64 = 1;
const STREAM_WILLINGNESS: u64 = 2;
const STREAM_SEEDING: u64 = 3;
const STREAM_EPIDEMIC: u64 = 4;
const STREAM_TRAVEL: u64 = 5;
const STREAM_VACCINE: u64 = 6;

fn module_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn module_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(module_seed(seed, stream))
}

/// Runs one scenario to completion and returns the daily time series
/// (length `days + 1`, including the day-0 snapshot).
pub fn run_scenario(config: &ScenarioConfig) -> Result<TimeSeries> {
    Ok(run_scenario_with(config, RunOptions::default())?.series)
}

/// Runs one scenario with extra outputs.
pub fn run_scenario_with(config: &ScenarioConfig, options: RunOptions) -> Result<RunArtifacts> {
    config.validate()?;
    let n = config.population as usize;
    let seed = config.rng_seed;

    let network = match options.network {
        Some(net) => {
            if net.node_count() != n {
                return Err(Error::InvalidParameter(format!(
                    "network has {} nodes, population is {n}",
                    net.node_count()
                )));
            }
            net
        }
        None => ContactNetwork::generate_ba(
            n,
            config.mean_degree,
            module_seed(seed, STREAM_NETWORK),
        )?,
    };

    let mut agents: Vec<Agent> = (0..config.population).map(Agent::new).collect();
    assign_willingness(&mut agents, config.uptake, &mut module_rng(seed, STREAM_WILLINGNESS));
    seed_infections(
        &mut agents,
        config.initial_infections as usize,
        &mut module_rng(seed, STREAM_SEEDING),
    )?;

    let rates = config.rates();
    let schedule = config.schedule();
    let travel_rates = config.travel_rates();
    let mut city = config.outside_city();
    let mut epidemic_rng = module_rng(seed, STREAM_EPIDEMIC);
    let mut travel_rng = module_rng(seed, STREAM_TRAVEL);
    let mut vaccine_rng = module_rng(seed, STREAM_VACCINE);
    let mut scratch = InfectionScratch::new(n);

    let mut dose_events = Vec::new();
    let mut cumulative_doses = 0u64;
    let mut records = Vec::with_capacity(config.days as usize + 1);
    let mut outside_trajectory = Vec::with_capacity(config.days as usize + 1);

    records.push(snapshot(0, &agents, &network, cumulative_doses, city.infected));
    outside_trajectory.push((0, city.susceptible, city.infected, city.recovered));

    for day in 1..=config.days {
        // Travel first, so infections brought home face detection the same
        // day; then the outside city advances its deterministic backdrop.
        if !travel_rates.disabled() {
            step_travel(&mut agents, &city, &travel_rates, &rates, day, &mut travel_rng);
        }
        city.step();
        city.check_conservation()?;
        step_day(&mut agents, &network, &rates, day, &mut epidemic_rng, &mut scratch);
        let log = options.log_doses.then_some(&mut dose_events);
        cumulative_doses += administer_doses(
            &mut agents,
            network.degrees(),
            day,
            &schedule,
            &rates,
            &mut vaccine_rng,
            log,
        ) as u64;

        let record = snapshot(day, &agents, &network, cumulative_doses, city.infected);
        record.validate(config.population)?;
        records.push(record);
        outside_trajectory.push((day, city.susceptible, city.infected, city.recovered));
    }
    validate_agents(&agents)?;

    Ok(RunArtifacts {
        series: TimeSeries { records },
        dose_events,
        network,
        outside_trajectory,
    })
}

fn snapshot(
    day: u32,
    agents: &[Agent],
    network: &ContactNetwork,
    cumulative_doses: u64,
    outside_prevalence: f64,
) -> DailyRecord {
    let mut record = DailyRecord {
        day,
        susceptible: 0,
        exposed: 0,
        quarantined: 0,
        recovered: 0,
        v1: 0,
        v2: 0,
        v3: 0,
        outside: 0,
        infected_proportion: 0.0,
        mean_degree_infected: 0.0,
        cumulative_doses,
        outside_prevalence,
    };
    let mut infected_degree_sum = 0u64;
    for agent in agents {
        if agent.location == Location::Outside {
            record.outside += 1;
            continue;
        }
        match agent.compartment {
            Compartment::Susceptible => record.susceptible += 1,
            Compartment::Exposed => record.exposed += 1,
            Compartment::Quarantined => record.quarantined += 1,
            Compartment::Recovered => record.recovered += 1,
            Compartment::Vaccinated1 => record.v1 += 1,
            Compartment::Vaccinated2 => record.v2 += 1,
            Compartment::Vaccinated3 => record.v3 += 1,
        }
        if agent.compartment.is_infected() {
            infected_degree_sum += network.degree(agent.id) as u64;
        }
    }
    let infected = record.exposed + record.quarantined;
    record.infected_proportion = infected as f64 / agents.len() as f64;
    if infected > 0 {
        record.mean_degree_infected = infected_degree_sum as f64 / infected as f64;
    }
    record
}

/// Pointwise replicate summary of the infected proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummaryRow {
    pub day: u32,
    pub mean: f64,
    /// 5th percentile (lower edge of the central 90% band).
    pub lower: f64,
    /// 95th percentile.
    pub upper: f64,
}

#[derive(Debug)]
pub struct ReplicateSet {
    pub runs: Vec<TimeSeries>,
    pub summary: Vec<ReplicateSummaryRow>,
}

/// Runs `n_replicates` scenarios in parallel; replicate `r` uses
/// `rng_seed + r`, so batches are reproducible and auditable.
pub fn run_replicates(config: &ScenarioConfig, n_replicates: u32) -> Result<ReplicateSet> {
    run_replicates_shared(config, n_replicates, None)
}

/// As [`run_replicates`], optionally pinning one contact network shared
/// read-only by every replicate (otherwise each replicate grows its own from
/// its seed).
pub fn run_replicates_shared(
    config: &ScenarioConfig,
    n_replicates: u32,
    network: Option<&ContactNetwork>,
) -> Result<ReplicateSet> {
    if n_replicates < 1 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let runs: Vec<TimeSeries> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut replicate = config.clone();
            replicate.rng_seed = config.rng_seed.wrapping_add(r as u64);
            let options =
                RunOptions { network: network.cloned(), ..Default::default() };
            Ok(run_scenario_with(&replicate, options)?.series)
        })
        .collect::<Result<_>>()?;

    let days = runs[0].len();
    let mut summary = Vec::with_capacity(days);
    let mut buffer = vec![0.0; runs.len()];
    for d in 0..days {
        for (i, run) in runs.iter().enumerate() {
            buffer[i] = run.records[d].infected_proportion;
        }
        buffer.sort_by(f64::total_cmp);
        let mean = buffer.iter().sum::<f64>() / buffer.len() as f64;
        summary.push(ReplicateSummaryRow {
            day: runs[0].records[d].day,
            mean,
            lower: percentile(&buffer, 0.05),
            upper: percentile(&buffer, 0.95),
        });
    }
    Ok(ReplicateSet { runs, summary })
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Mean spacing between infection peaks, in days.
///
/// The series is smoothed with a centered moving average, then peaks are
/// extracted with a prominence hysteresis: a new extreme counts only after
/// the series has moved away from it by at least `min_prominence`. Returns
/// `None` with fewer than two peaks.
pub fn detect_endemic_period(
    series: &[f64],
    smoothing_window: usize,
    min_prominence: f64,
) -> Option<f64> {
    if series.len() < smoothing_window.max(4) {
        return None;
    }
    let half = smoothing_window / 2;
    let n = series.len();
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            series[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    #[derive(PartialEq)]
    enum Seeking {
        Either,
        Peak,
        Trough,
    }
    let mut peaks: Vec<usize> = Vec::new();
    let mut mode = Seeking::Either;
    let mut max_val = smoothed[0];
    let mut max_idx = 0usize;
    let mut min_val = smoothed[0];
    for (i, &v) in smoothed.iter().enumerate() {
        match mode {
            Seeking::Either => {
                if v > max_val {
                    max_val = v;
                    max_idx = i;
                }
                if v < min_val {
                    min_val = v;
                }
                if max_val - v >= min_prominence {
                    peaks.push(max_idx);
                    mode = Seeking::Trough;
                    min_val = v;
                } else if v - min_val >= min_prominence {
                    mode = Seeking::Peak;
                    max_val = v;
                    max_idx = i;
                }
            }
            Seeking::Peak => {
                if v > max_val {
                    max_val = v;
                    max_idx = i;
                } else if max_val - v >= min_prominence {
                    peaks.push(max_idx);
                    mode = Seeking::Trough;
                    min_val = v;
                }
            }
            Seeking::Trough => {
                if v < min_val {
                    min_val = v;
                } else if v - min_val >= min_prominence {
                    mode = Seeking::Peak;
                    max_val = v;
                    max_idx = i;
                }
            }
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    let spacing: f64 =
        peaks.windows(2).map(|w| (w[1] - w[0]) as f64).sum::<f64>() / (peaks.len() - 1) as f64;
    Some(spacing)
}
