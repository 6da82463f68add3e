//! File emission: run manifests, dose logs, replicate summaries, and the
//! analysis report files (cross-correlation table, Granger summary, figure
//! data). All CSVs carry exactly one header row, comma delimiters, and a
//! terminating newline.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::Result;
use crate::scenario::{ReplicateSummaryRow, TimeSeries};
use crate::stats::AnalysisReport;
use crate::vaccine::DoseEvent;

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    /// SHA-256 of the canonical config text.
    pub config_hash: String,
    /// Seeds actually used, one per replicate.
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    /// `ok` or an error description.
    pub status: String,
}

impl RunManifest {
    pub fn new(config_hash: String) -> RunManifest {
        RunManifest {
            config_hash,
            seeds: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: "ok".to_string(),
        }
    }

    pub fn finish(&mut self, status: impl Into<String>) {
        self.finished_unix = unix_now();
        self.status = status.into();
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "config_hash = {}", self.config_hash);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(","));
        let _ = writeln!(out, "started_unix = {}", self.started_unix);
        let _ = writeln!(out, "finished_unix = {}", self.finished_unix);
        for path in &self.outputs {
            let _ = writeln!(out, "output = {}", path.display());
        }
        let _ = writeln!(out, "status = {}", self.status);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// `day,agent_id,dose_number,succeeded` rows.
pub fn dose_log_csv(events: &[DoseEvent]) -> String {
    let mut out = String::from("day,agent_id,dose_number,succeeded\n");
    for e in events {
        let _ = writeln!(out, "{},{},{},{}", e.day, e.agent_id, e.dose_number, e.succeeded);
    }
    out
}

/// `day,mean_infected,lower_90,upper_90` rows for a replicate batch.
pub fn summary_csv(rows: &[ReplicateSummaryRow]) -> String {
    let mut out = String::from("day,mean_infected,lower_90,upper_90\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.day, r.mean, r.lower, r.upper);
    }
    out
}

/// `day,outside_susceptible,outside_infected,outside_recovered` rows.
pub fn outside_trajectory_csv(trajectory: &[(u32, f64, f64, f64)]) -> String {
    let mut out = String::from("day,outside_susceptible,outside_infected,outside_recovered\n");
    for (day, s, i, r) in trajectory {
        let _ = writeln!(out, "{day},{s},{i},{r}");
    }
    out
}

/// `lag,rho` rows from `-L` to `L`; undefined correlations leave the field
/// empty.
pub fn ccf_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("lag,rho\n");
    for (lag, rho) in report.ccf.rows() {
        match rho {
            Some(r) => {
                let _ = writeln!(out, "{lag},{r}");
            }
            None => {
                let _ = writeln!(out, "{lag},");
            }
        }
    }
    out
}

/// Plain-text Granger summary: chosen lag, F statistic, p-value, verdict.
pub fn granger_text(report: &AnalysisReport) -> String {
    let g = &report.granger;
    let verdict = if g.significant() {
        "significant at 0.05"
    } else {
        "not significant at 0.05"
    };
    let best = match (report.ccf.best_negative_lag, report.ccf.best_rho) {
        (Some(lag), Some(rho)) => format!("{lag} (rho = {rho})"),
        _ => "undefined".to_string(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "chosen_lag = {}", g.lag);
    let _ = writeln!(out, "reported_lead = -{}", g.lag);
    let _ = writeln!(out, "n_eff = {}", g.n_eff);
    let _ = writeln!(out, "rss_restricted = {}", g.rss_restricted);
    let _ = writeln!(out, "rss_unrestricted = {}", g.rss_unrestricted);
    let _ = writeln!(out, "f_statistic = {}", g.f_statistic);
    let _ = writeln!(out, "p_value = {}", g.p_value);
    let _ = writeln!(out, "dof = ({}, {})", g.df_numerator, g.df_denominator);
    let _ = writeln!(out, "verdict = {verdict}");
    let _ = writeln!(out, "best_negative_ccf_lag = {best}");
    let _ = writeln!(out, "dropped_zero_infection_days = {}", report.dropped_days);
    out
}

/// `day,mean_degree_infected,infected_proportion` rows: the data behind the
/// hub-infection-versus-infection comparison plot.
pub fn figure_ik_csv(series: &TimeSeries) -> String {
    let mut out = String::from("day,mean_degree_infected,infected_proportion\n");
    for r in &series.records {
        let _ = writeln!(out, "{},{},{}", r.day, r.mean_degree_infected, r.infected_proportion);
    }
    out
}

/// `lag,aic` rows from the order selection scan.
pub fn aic_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("lag,aic\n");
    for (lag, aic) in &report.selection.aic_by_lag {
        let _ = writeln!(out, "{lag},{aic}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scenario::run_scenario;
    use crate::stats::analyze_series;

    #[test]
    fn manifest_contains_all_fields() {
        let mut manifest = RunManifest::new("deadbeef".into());
        manifest.seeds = vec![42, 43];
        manifest.outputs.push(PathBuf::from("timeseries.csv"));
        manifest.finish("ok");
        let text = manifest.to_text();
        assert!(text.contains("config_hash = deadbeef"));
        assert!(text.contains("seeds = 42,43"));
        assert!(text.contains("output = timeseries.csv"));
        assert!(text.contains("status = ok"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_emitters_have_header_and_trailing_newline() {
        let events = vec![DoseEvent { day: 61, agent_id: 9, dose_number: 1, succeeded: true }];
        let text = dose_log_csv(&events);
        assert_eq!(text, "day,agent_id,dose_number,succeeded\n61,9,1,true\n");

        let config = ScenarioConfig {
            population: 300,
            days: 250,
            vaccine_daily_cap: 10,
            vaccine_initial_doses: 2,
            ..ScenarioConfig::default()
        };
        let series = run_scenario(&config).unwrap();
        let report = analyze_series(
            &series.mean_degree_infected(),
            &series.infected_proportion(),
            10,
            20,
        )
        .unwrap();
        for text in [ccf_csv(&report), aic_csv(&report), figure_ik_csv(&series)] {
            assert_eq!(text.lines().count(), text.trim_end().lines().count());
            assert!(text.ends_with('\n'));
            assert!(!text.starts_with('\n'));
        }
        let granger = granger_text(&report);
        assert!(granger.contains("verdict = "));
        assert!(granger.contains("p_value = "));
    }
}
