//! Scenario configuration: every simulation parameter in one flat struct,
//! parsed from `key = value` text with `#` comments. Unspecified keys take
//! the default scenario values; unknown keys are hard errors.

use sha2::{Digest, Sha256};

use crate::epidemic::{EpidemicRates, ImmunityMode, WaningKind};
use crate::error::{Error, Result};
use crate::travel::{OutsideCity, TravelRates};
use crate::vaccine::{FirstDoseOrder, VaccineSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Town population.
    pub population: u32,
    /// Simulated days (the output has one extra day-0 row).
    pub days: u32,
    /// Infections seeded on day 0.
    pub initial_infections: u32,
    pub rng_seed: u64,
    /// Replicate count used by batch runs.
    pub replicates: u32,

    /// Per-contact per-day transmission probability.
    pub beta: f64,
    /// Per-day recovery probability.
    pub delta: f64,
    /// Per-day testing probability.
    pub lambda: f64,
    /// Incubation period in days (detection rate adds its inverse).
    pub incubation_days: f64,
    /// Homogeneous natural-immunity period in days.
    pub natural_immunity_days: f64,
    /// Vaccine-immunity period in days.
    pub vaccine_immunity_days: f64,
    pub immunity_mode: ImmunityMode,
    pub natural_waning: WaningKind,
    pub vaccine_waning: WaningKind,

    /// Dose cap per person, 0..=3.
    pub max_doses: u8,
    /// Per-dose willingness probability.
    pub uptake: f64,
    pub vaccine_start_day: u32,
    pub vaccine_initial_doses: u32,
    pub vaccine_daily_cap: u32,
    pub dose2_interval_days: u32,
    pub dose3_interval_days: u32,
    pub efficacy_dose1: f64,
    pub efficacy_dose2: f64,
    pub efficacy_dose3: f64,
    pub first_dose_order: FirstDoseOrder,

    /// Target mean contact count of the generated network.
    pub mean_degree: f64,

    /// Daily probability of leaving town.
    pub departure_rate: f64,
    /// Daily probability of returning.
    pub return_rate: f64,
    pub outside_population: u64,
    pub outside_beta: f64,
    pub outside_delta: f64,
    /// Mean days of immunity in the outside city's SIRS flow.
    pub outside_immunity_days: f64,
}

impl Default for ScenarioConfig {
    fn default() -> ScenarioConfig {
        ScenarioConfig {
            population: 10_000,
            days: 1_080,
            initial_infections: 4,
            rng_seed: 42,
            replicates: 1,
            beta: 0.14,
            delta: 0.05,
            lambda: 0.01,
            incubation_days: 14.0,
            natural_immunity_days: 180.0,
            vaccine_immunity_days: 180.0,
            immunity_mode: ImmunityMode::Homogeneous,
            natural_waning: WaningKind::Fixed,
            vaccine_waning: WaningKind::Fixed,
            max_doses: 3,
            uptake: 0.9,
            vaccine_start_day: 60,
            vaccine_initial_doses: 10,
            vaccine_daily_cap: 100,
            dose2_interval_days: 28,
            dose3_interval_days: 180,
            efficacy_dose1: 0.92,
            efficacy_dose2: 0.86,
            efficacy_dose3: 0.96,
            first_dose_order: FirstDoseOrder::Random,
            mean_degree: 5.0,
            departure_rate: 0.00012,
            return_rate: 0.0001,
            outside_population: 4_000_000,
            outside_beta: 0.14,
            outside_delta: 0.05,
            outside_immunity_days: 180.0,
        }
    }
}

impl ScenarioConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let mut config = ScenarioConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            config
                .apply(key.trim(), value.trim())
                .map_err(|message| Error::ConfigParse { line, message })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one `key = value` override; the error is a bare message for
    /// the caller to attach context to.
    pub fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value.parse().map_err(|_| format!("invalid value `{value}` for key `{key}`"))
        }
        match key {
            "population" => self.population = num(key, value)?,
            "days" => self.days = num(key, value)?,
            "initial_infections" => self.initial_infections = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "incubation_days" => self.incubation_days = num(key, value)?,
            "natural_immunity_days" => self.natural_immunity_days = num(key, value)?,
            "vaccine_immunity_days" => self.vaccine_immunity_days = num(key, value)?,
            "immunity_mode" => {
                self.immunity_mode = match value {
                    "homogeneous" => ImmunityMode::Homogeneous,
                    "rulebased" => ImmunityMode::RuleBased,
                    other => {
                        return Err(format!(
                            "immunity_mode must be `homogeneous` or `rulebased`, got `{other}`"
                        ))
                    }
                }
            }
            "natural_waning" => self.natural_waning = parse_waning(value)?,
            "vaccine_waning" => self.vaccine_waning = parse_waning(value)?,
            "max_doses" => self.max_doses = num(key, value)?,
            "uptake" => self.uptake = num(key, value)?,
            "vaccine_start_day" => self.vaccine_start_day = num(key, value)?,
            "vaccine_initial_doses" => self.vaccine_initial_doses = num(key, value)?,
            "vaccine_daily_cap" => self.vaccine_daily_cap = num(key, value)?,
            "dose2_interval_days" => self.dose2_interval_days = num(key, value)?,
            "dose3_interval_days" => self.dose3_interval_days = num(key, value)?,
            "efficacy_dose1" => self.efficacy_dose1 = num(key, value)?,
            "efficacy_dose2" => self.efficacy_dose2 = num(key, value)?,
            "efficacy_dose3" => self.efficacy_dose3 = num(key, value)?,
            "first_dose_order" => {
                self.first_dose_order = match value {
                    "random" => FirstDoseOrder::Random,
                    "degree_desc" => FirstDoseOrder::DegreeDesc,
                    other => {
                        return Err(format!(
                            "first_dose_order must be `random` or `degree_desc`, got `{other}`"
                        ))
                    }
                }
            }
            "mean_degree" => self.mean_degree = num(key, value)?,
            "departure_rate" => self.departure_rate = num(key, value)?,
            "return_rate" => self.return_rate = num(key, value)?,
            "outside_population" => self.outside_population = num(key, value)?,
            "outside_beta" => self.outside_beta = num(key, value)?,
            "outside_delta" => self.outside_delta = num(key, value)?,
            "outside_immunity_days" => self.outside_immunity_days = num(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Canonical text form; `parse(serialize(c)) == c` for every valid config.
    pub fn serialize(&self) -> String {
        let mode = match self.immunity_mode {
            ImmunityMode::Homogeneous => "homogeneous",
            ImmunityMode::RuleBased => "rulebased",
        };
        let waning = |w: WaningKind| match w {
            WaningKind::Fixed => "fixed",
            WaningKind::Exponential => "exponential",
        };
        let order = match self.first_dose_order {
            FirstDoseOrder::Random => "random",
            FirstDoseOrder::DegreeDesc => "degree_desc",
        };
        format!(
            "population = {}\n\
             days = {}\n\
             initial_infections = {}\n\
             rng_seed = {}\n\
             replicates = {}\n\
             beta = {}\n\
             delta = {}\n\
             lambda = {}\n\
             incubation_days = {}\n\
             natural_immunity_days = {}\n\
             vaccine_immunity_days = {}\n\
             immunity_mode = {}\n\
             natural_waning = {}\n\
             vaccine_waning = {}\n\
             max_doses = {}\n\
             uptake = {}\n\
             vaccine_start_day = {}\n\
             vaccine_initial_doses = {}\n\
             vaccine_daily_cap = {}\n\
             dose2_interval_days = {}\n\
             dose3_interval_days = {}\n\
             efficacy_dose1 = {}\n\
             efficacy_dose2 = {}\n\
             efficacy_dose3 = {}\n\
             first_dose_order = {}\n\
             mean_degree = {}\n\
             departure_rate = {}\n\
             return_rate = {}\n\
             outside_population = {}\n\
             outside_beta = {}\n\
             outside_delta = {}\n\
             outside_immunity_days = {}\n",
            self.population,
            self.days,
            self.initial_infections,
            self.rng_seed,
            self.replicates,
            self.beta,
            self.delta,
            self.lambda,
            self.incubation_days,
            self.natural_immunity_days,
            self.vaccine_immunity_days,
            mode,
            waning(self.natural_waning),
            waning(self.vaccine_waning),
            self.max_doses,
            self.uptake,
            self.vaccine_start_day,
            self.vaccine_initial_doses,
            self.vaccine_daily_cap,
            self.dose2_interval_days,
            self.dose3_interval_days,
            self.efficacy_dose1,
            self.efficacy_dose2,
            self.efficacy_dose3,
            order,
            self.mean_degree,
            self.departure_rate,
            self.return_rate,
            self.outside_population,
            self.outside_beta,
            self.outside_delta,
            self.outside_immunity_days,
        )
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        fn probability(name: &str, v: f64) -> Result<()> {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::ConfigValidation(format!("{name} must lie in [0,1]")));
            }
            Ok(())
        }
        fn at_least(name: &str, v: f64, bound: f64) -> Result<()> {
            if !v.is_finite() || v < bound {
                return Err(Error::ConfigValidation(format!("{name} must be at least {bound}")));
            }
            Ok(())
        }
        if self.population < 10 {
            return Err(Error::ConfigValidation("population must be at least 10".into()));
        }
        if self.days < 1 {
            return Err(Error::ConfigValidation("days must be at least 1".into()));
        }
        if self.initial_infections > self.population {
            return Err(Error::ConfigValidation(
                "initial_infections must not exceed population".into(),
            ));
        }
        if self.replicates < 1 {
            return Err(Error::ConfigValidation("replicates must be at least 1".into()));
        }
        probability("beta", self.beta)?;
        probability("delta", self.delta)?;
        probability("lambda", self.lambda)?;
        probability("uptake", self.uptake)?;
        probability("efficacy_dose1", self.efficacy_dose1)?;
        probability("efficacy_dose2", self.efficacy_dose2)?;
        probability("efficacy_dose3", self.efficacy_dose3)?;
        probability("departure_rate", self.departure_rate)?;
        probability("return_rate", self.return_rate)?;
        probability("outside_beta", self.outside_beta)?;
        probability("outside_delta", self.outside_delta)?;
        at_least("incubation_days", self.incubation_days, 1.0)?;
        at_least("natural_immunity_days", self.natural_immunity_days, 1.0)?;
        at_least("vaccine_immunity_days", self.vaccine_immunity_days, 1.0)?;
        at_least("outside_immunity_days", self.outside_immunity_days, 1.0)?;
        if self.max_doses > 3 {
            return Err(Error::ConfigValidation("max_doses must lie in 0..=3".into()));
        }
        if self.dose2_interval_days < 1 || self.dose3_interval_days < 1 {
            return Err(Error::ConfigValidation("dose intervals must be at least 1 day".into()));
        }
        if self.vaccine_initial_doses > self.vaccine_daily_cap {
            return Err(Error::ConfigValidation(
                "vaccine_initial_doses must not exceed vaccine_daily_cap".into(),
            ));
        }
        if !self.mean_degree.is_finite()
            || self.mean_degree < 2.0
            || self.mean_degree > (self.population - 1) as f64
        {
            return Err(Error::ConfigValidation(
                "mean_degree must lie in [2, population-1]".into(),
            ));
        }
        if self.outside_population < 1 {
            return Err(Error::ConfigValidation("outside_population must be positive".into()));
        }
        Ok(())
    }

    pub fn rates(&self) -> EpidemicRates {
        EpidemicRates {
            beta: self.beta,
            delta: self.delta,
            lambda: self.lambda,
            tau: 1.0 / self.incubation_days,
            immunity_mode: self.immunity_mode,
            natural_waning: self.natural_waning,
            vaccine_waning: self.vaccine_waning,
            natural_immunity_days: self.natural_immunity_days,
            vaccine_immunity_days: self.vaccine_immunity_days,
        }
    }

    pub fn schedule(&self) -> VaccineSchedule {
        VaccineSchedule {
            start_day: self.vaccine_start_day,
            initial_doses: self.vaccine_initial_doses,
            daily_cap: self.vaccine_daily_cap,
            dose2_interval: self.dose2_interval_days,
            dose3_interval: self.dose3_interval_days,
            max_doses: self.max_doses,
            uptake: self.uptake,
            efficacy: [self.efficacy_dose1, self.efficacy_dose2, self.efficacy_dose3],
            first_dose_order: self.first_dose_order,
        }
    }

    pub fn travel_rates(&self) -> TravelRates {
        TravelRates { departure: self.departure_rate, return_rate: self.return_rate }
    }

    pub fn outside_city(&self) -> OutsideCity {
        OutsideCity::new(
            self.outside_beta,
            self.outside_delta,
            1.0 / self.outside_immunity_days,
            100.0 / self.outside_population as f64,
        )
    }
}

fn parse_waning(value: &str) -> std::result::Result<WaningKind, String> {
    match value {
        "fixed" => Ok(WaningKind::Fixed),
        "exponential" => Ok(WaningKind::Exponential),
        other => Err(format!("waning must be `fixed` or `exponential`, got `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let config = ScenarioConfig::parse("").unwrap();
        assert_eq!(config, ScenarioConfig::default());
        assert_eq!(config.beta, 0.14);
        assert_eq!(config.delta, 0.05);
        assert_eq!(config.population, 10_000);
        assert_eq!(config.days, 1_080);
    }

    #[test]
    fn out_of_range_beta_names_the_bound() {
        let err = ScenarioConfig::parse("beta = 1.5\n").unwrap_err();
        match err {
            Error::ConfigValidation(msg) => assert_eq!(msg, "beta must lie in [0,1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn override_changes_only_named_key() {
        let config = ScenarioConfig::parse("max_doses = 2\n").unwrap();
        let expected = ScenarioConfig { max_doses: 2, ..ScenarioConfig::default() };
        assert_eq!(config, expected);
    }

    #[test]
    fn unknown_key_is_a_hard_error_with_line() {
        let err = ScenarioConfig::parse("beta = 0.1\nfrobnicate = 3\n").unwrap_err();
        match err {
            Error::ConfigParse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("frobnicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# scenario\n\nbeta = 0.2 # inline comment\n";
        let config = ScenarioConfig::parse(text).unwrap();
        assert_eq!(config.beta, 0.2);
    }

    #[test]
    fn serialize_round_trips() {
        let config = ScenarioConfig {
            beta: 0.123456789,
            immunity_mode: ImmunityMode::RuleBased,
            natural_waning: WaningKind::Exponential,
            max_doses: 1,
            rng_seed: 987654321,
            first_dose_order: FirstDoseOrder::DegreeDesc,
            ..ScenarioConfig::default()
        };
        let parsed = ScenarioConfig::parse(&config.serialize()).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ScenarioConfig::default();
        let mut b = ScenarioConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.rng_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
