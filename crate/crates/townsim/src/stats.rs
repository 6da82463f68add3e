//! Time-series analysis: lagged cross-correlation, bivariate VAR fitting with
//! AIC lag selection, and the Granger causality F-test.
//!
//! Everything here is a pure function of its inputs. The convention
//! throughout is that a *negative* lag means the first series (`x`, the mean
//! degree of infected people) leads the second (`y`, the infected
//! proportion).

pub mod dist;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lagged Pearson cross-correlation table.
#[derive(Debug, Clone)]
pub struct CcfResult {
    /// Half-width `L` of the lag range `[-L, L]`.
    pub max_lag: usize,
    /// One entry per lag, index 0 holding lag `-L`; `None` where the
    /// windowed series were degenerate (constant or too short).
    pub rho: Vec<Option<f64>>,
    /// Lag with the highest correlation among strictly negative lags.
    pub best_negative_lag: Option<i64>,
    /// Correlation at `best_negative_lag`.
    pub best_rho: Option<f64>,
}

impl CcfResult {
    pub fn rho_at(&self, lag: i64) -> Option<f64> {
        let idx = lag + self.max_lag as i64;
        if idx < 0 || idx as usize >= self.rho.len() {
            return None;
        }
        self.rho[idx as usize]
    }

    /// `(lag, rho)` rows from `-L` to `L`.
    pub fn rows(&self) -> impl Iterator<Item = (i64, Option<f64>)> + '_ {
        let l = self.max_lag as i64;
        (-l..=l).zip(self.rho.iter().copied())
    }
}

/// Cross-correlation of `x` against `y` for lags in `[-max_lag, max_lag]`,
/// where `rho(l)` correlates the pairs `(x[t+l], y[t])`.
pub fn cross_correlation(x: &[f64], y: &[f64], max_lag: usize) -> Result<CcfResult> {
    let valid = vec![true; x.len()];
    cross_correlation_masked(x, y, &valid, max_lag)
}

/// As [`cross_correlation`], but pairs touching an invalid day (on either
/// side of the lag) are dropped. Used to exclude days where the mean degree
/// of infected people is undefined.
pub fn cross_correlation_masked(
    x: &[f64],
    y: &[f64],
    valid: &[bool],
    max_lag: usize,
) -> Result<CcfResult> {
    let n = x.len();
    if y.len() != n || valid.len() != n {
        return Err(Error::InvalidParameter("series lengths differ".into()));
    }
    if n <= 2 * max_lag + 2 {
        return Err(Error::InvalidParameter(format!(
            "need more than {} observations for max_lag {max_lag}, got {n}",
            2 * max_lag + 2
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series contain non-finite values".into()));
    }

    let l = max_lag as i64;
    let mut rho = Vec::with_capacity(2 * max_lag + 1);
    let mut best_negative_lag = None;
    let mut best_rho = None;
    for lag in -l..=l {
        let t_lo = 0.max(-lag) as usize;
        let t_hi = n - 0.max(lag) as usize;
        let pairs = (t_lo..t_hi).filter_map(|t| {
            let s = (t as i64 + lag) as usize;
            (valid[t] && valid[s]).then(|| (x[s], y[t]))
        });
        let r = pearson(pairs);
        if lag < 0 {
            if let Some(r) = r {
                if best_rho.is_none_or(|b| r > b) {
                    best_rho = Some(r);
                    best_negative_lag = Some(lag);
                }
            }
        }
        rho.push(r);
    }
    Ok(CcfResult { max_lag, rho, best_negative_lag, best_rho })
}

/// Pearson correlation of a pair stream; `None` when fewer than three pairs
/// or either side has (numerically) zero variance.
fn pearson(pairs: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (a, b) in pairs {
        xs.push(a);
        ys.push(b);
    }
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// One ordinary-least-squares fit of an autoregression of `y`, optionally
/// augmented with lagged values of `x`.
#[derive(Debug, Clone)]
pub struct VarFit {
    pub lag: usize,
    /// Number of rows used.
    pub n_obs: usize,
    pub intercept: f64,
    /// Coefficients on `y[t-1] .. y[t-lag]`.
    pub y_coefficients: Vec<f64>,
    /// Coefficients on `x[t-1] .. x[t-lag]`; empty for the restricted model.
    pub x_coefficients: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
}

/// Restricted (autoregression only) and unrestricted (plus lagged `x`)
/// fits over the same rows.
#[derive(Debug, Clone)]
pub struct NestedVarFit {
    pub restricted: VarFit,
    pub unrestricted: VarFit,
}

/// Fits the nested VAR pair at order `lag`, using rows `t >= skip`.
///
/// `skip` must be at least `lag`; passing a larger value keeps the row set
/// fixed while comparing different lags (as AIC selection requires).
pub fn fit_var(y: &[f64], x: &[f64], lag: usize, skip: usize) -> Result<NestedVarFit> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::InvalidParameter("series lengths differ".into()));
    }
    if lag < 1 {
        return Err(Error::InvalidParameter("lag must be at least 1".into()));
    }
    if skip < lag {
        return Err(Error::InvalidParameter("skip must be >= lag".into()));
    }
    let rows = n.saturating_sub(skip);
    if rows < 2 * lag + 3 {
        return Err(Error::InsufficientData(format!(
            "need at least {} observations after skipping {skip}, got {rows}",
            2 * lag + 3
        )));
    }

    let target = DVector::from_iterator(rows, y[skip..].iter().copied());

    let restricted_cols = 1 + lag;
    let mut design = DMatrix::zeros(rows, restricted_cols + lag);
    for (r, t) in (skip..n).enumerate() {
        design[(r, 0)] = 1.0;
        for j in 1..=lag {
            design[(r, j)] = y[t - j];
            design[(r, lag + j)] = x[t - j];
        }
    }

    let restricted = ols(&design.columns(0, restricted_cols).into(), &target)?;
    let unrestricted = ols(&design, &target)?;
    if unrestricted.rss > restricted.rss + 1e-9 {
        return Err(Error::InconsistentState(format!(
            "unrestricted RSS {} exceeds restricted RSS {}",
            unrestricted.rss, restricted.rss
        )));
    }

    let split = |coef: Vec<f64>, with_x: bool| {
        let intercept = coef[0];
        let y_coefficients = coef[1..=lag].to_vec();
        let x_coefficients = if with_x { coef[lag + 1..].to_vec() } else { Vec::new() };
        (intercept, y_coefficients, x_coefficients)
    };
    let (ri, ry, rx) = split(restricted.coefficients, false);
    let (ui, uy, ux) = split(unrestricted.coefficients, true);
    Ok(NestedVarFit {
        restricted: VarFit {
            lag,
            n_obs: rows,
            intercept: ri,
            y_coefficients: ry,
            x_coefficients: rx,
            rss: restricted.rss,
        },
        unrestricted: VarFit {
            lag,
            n_obs: rows,
            intercept: ui,
            y_coefficients: uy,
            x_coefficients: ux,
            rss: unrestricted.rss,
        },
    })
}

struct OlsSolution {
    coefficients: Vec<f64>,
    rss: f64,
}

/// Least squares through a singular-value decomposition; rank deficiency is
/// reported rather than silently regularized.
fn ols(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<OlsSolution> {
    let cols = design.ncols();
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-10;
    if max_sv <= 0.0 || svd.rank(tol) < cols {
        return Err(Error::SingularDesign(
            "regressor matrix is rank-deficient (constant or collinear series)".into(),
        ));
    }
    let solution =
        svd.solve(target, tol).map_err(|e| Error::SingularDesign(e.to_string()))?;
    let residual = design * &solution - target;
    Ok(OlsSolution {
        coefficients: solution.iter().copied().collect(),
        rss: residual.norm_squared(),
    })
}

/// AIC table over candidate lags, all fitted on the same rows.
#[derive(Debug, Clone)]
pub struct LagSelection {
    pub chosen_lag: usize,
    /// `(lag, aic)` for every candidate.
    pub aic_by_lag: Vec<(usize, f64)>,
}

/// Chooses the VAR order minimizing
/// `AIC(p) = n_eff * ln(RSS_u(p) / n_eff) + 2 * (2p + 1)`,
/// with `n_eff = n - max_lag` held fixed so values are comparable.
pub fn select_lag_aic(y: &[f64], x: &[f64], max_lag: usize) -> Result<LagSelection> {
    if max_lag < 1 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    let n_eff = y.len().saturating_sub(max_lag) as f64;
    let mut aic_by_lag = Vec::with_capacity(max_lag);
    let mut chosen = None;
    for lag in 1..=max_lag {
        let fits = fit_var(y, x, lag, max_lag)?;
        let k = 2 * lag + 1;
        let aic = n_eff * (fits.unrestricted.rss / n_eff).ln() + 2.0 * k as f64;
        aic_by_lag.push((lag, aic));
        match chosen {
            None => chosen = Some((lag, aic)),
            Some((_, best)) if aic < best => chosen = Some((lag, aic)),
            _ => {}
        }
    }
    let (chosen_lag, _) = chosen.expect("max_lag >= 1 yields at least one candidate");
    Ok(LagSelection { chosen_lag, aic_by_lag })
}

/// Granger causality F-test of "lagged `x` improves the prediction of `y`".
#[derive(Debug, Clone)]
pub struct GrangerResult {
    /// VAR order the test was run at.
    pub lag: usize,
    /// Observations entering the fits (`n - lag`).
    pub n_eff: usize,
    pub f_statistic: f64,
    pub p_value: f64,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub df_numerator: usize,
    pub df_denominator: usize,
}

impl GrangerResult {
    /// Verdict at the conventional 5% level.
    pub fn significant(&self) -> bool {
        self.p_value < 0.05
    }
}

/// Runs the Granger test at order `lag`:
/// `F = ((RSS_r - RSS_u)/p) / (RSS_u/(n_eff - 2p - 1))` with a p-value from
/// the F distribution evaluated through the regularized incomplete beta.
pub fn granger_test(y: &[f64], x: &[f64], lag: usize) -> Result<GrangerResult> {
    let fits = fit_var(y, x, lag, lag)?;
    let n_eff = fits.restricted.n_obs;
    let df1 = lag;
    let df2 = n_eff as i64 - 2 * lag as i64 - 1;
    if df2 < 1 {
        return Err(Error::InvalidDof(format!(
            "n_eff - 2p - 1 = {df2} with n_eff = {n_eff}, p = {lag}"
        )));
    }
    let df2 = df2 as usize;
    let rss_r = fits.restricted.rss;
    let rss_u = fits.unrestricted.rss;
    let (f_statistic, p_value) = if rss_u <= f64::EPSILON * rss_r.max(1.0) {
        // Perfect unrestricted fit: infinitely strong evidence.
        (f64::INFINITY, 0.0)
    } else {
        let f = ((rss_r - rss_u).max(0.0) / df1 as f64) / (rss_u / df2 as f64);
        (f, dist::f_survival(f, df1 as f64, df2 as f64))
    };
    Ok(GrangerResult {
        lag,
        n_eff,
        f_statistic,
        p_value,
        rss_restricted: rss_r,
        rss_unrestricted: rss_u,
        df_numerator: df1,
        df_denominator: df2,
    })
}

/// Full analysis of one simulated run: cross-correlation between the mean
/// degree of infected people and the infected proportion, AIC lag selection,
/// and the Granger test at the chosen lag.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub ccf: CcfResult,
    pub selection: LagSelection,
    pub granger: GrangerResult,
    /// Days excluded because nobody was infected (mean degree undefined).
    pub dropped_days: usize,
}

pub fn analyze_series(
    mean_degree_infected: &[f64],
    infected_proportion: &[f64],
    max_lag: usize,
    ccf_window: usize,
) -> Result<AnalysisReport> {
    let n = infected_proportion.len();
    if mean_degree_infected.len() != n {
        return Err(Error::InvalidParameter("series lengths differ".into()));
    }
    let valid: Vec<bool> = infected_proportion.iter().map(|&v| v > 0.0).collect();
    let dropped_days = valid.iter().filter(|&&v| !v).count();

    let ccf =
        cross_correlation_masked(mean_degree_infected, infected_proportion, &valid, ccf_window)?;

    let xs: Vec<f64> = mean_degree_infected
        .iter()
        .zip(&valid)
        .filter_map(|(&v, &ok)| ok.then_some(v))
        .collect();
    let ys: Vec<f64> = infected_proportion
        .iter()
        .zip(&valid)
        .filter_map(|(&v, &ok)| ok.then_some(v))
        .collect();

    // Cap the order so the unrestricted fit keeps a few denominator dof.
    let feasible = ys.len().saturating_sub(6) / 3;
    let max_lag = max_lag.min(feasible).max(1);
    let selection = select_lag_aic(&ys, &xs, max_lag)?;
    let granger = granger_test(&ys, &xs, selection.chosen_lag)?;
    Ok(AnalysisReport { ccf, selection, granger, dropped_days })
}
