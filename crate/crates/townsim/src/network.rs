//! Scale-free contact network generation and characterization.
//!
//! The town's contact structure is grown with the Barabasi-Albert
//! preferential-attachment model. Non-integer target mean degrees are hit in
//! expectation by attaching `floor(m)` edges per new node plus one extra edge
//! with probability `frac(m)`, where `m = target_mean_degree / 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Immutable undirected contact network: adjacency lists plus a degree array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactNetwork {
    n: usize,
    adjacency: Vec<Vec<u32>>,
    degree: Vec<u32>,
}

/// Bookkeeping from a Barabasi-Albert growth run, kept separate so tests can
/// check the exact edge-count identity without touching the network itself.
#[derive(Debug, Clone)]
pub struct BaGrowthStats {
    /// Edges in the initial complete seed graph.
    pub seed_edges: usize,
    /// Edges attached by each growth node, in insertion order.
    pub attachments: Vec<usize>,
}

impl ContactNetwork {
    /// Builds a network from an explicit edge list over nodes `0..n`.
    ///
    /// Rejects self-loops, duplicate edges and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if hi as usize >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if !seen.insert((lo, hi)) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({lo}, {hi})")));
            }
            adjacency[lo as usize].push(hi);
            adjacency[hi as usize].push(lo);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degree = adjacency.iter().map(|l| l.len() as u32).collect();
        Ok(ContactNetwork { n, adjacency, degree })
    }

    /// Grows a connected Barabasi-Albert network with `n` nodes whose expected
    /// mean degree is `target_mean_degree`. Deterministic for a given seed.
    pub fn generate_ba(n: usize, target_mean_degree: f64, seed: u64) -> Result<Self> {
        Ok(Self::generate_ba_with_stats(n, target_mean_degree, seed)?.0)
    }

    /// As [`generate_ba`](Self::generate_ba), also returning growth bookkeeping.
    pub fn generate_ba_with_stats(
        n: usize,
        target_mean_degree: f64,
        seed: u64,
    ) -> Result<(Self, BaGrowthStats)> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("n must be at least 3, got {n}")));
        }
        if !target_mean_degree.is_finite()
            || target_mean_degree < 2.0
            || target_mean_degree > (n - 1) as f64
        {
            return Err(Error::InvalidParameter(format!(
                "target_mean_degree must lie in [2, n-1], got {target_mean_degree}"
            )));
        }

        let m = target_mean_degree / 2.0;
        let m_floor = m.floor() as usize;
        let m_frac = m - m.floor();
        let seed_size = ((m.ceil() as usize) + 1).min(n);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
        // One entry per edge endpoint; sampling an index uniformly is
        // degree-proportional node sampling.
        let mut endpoints: Vec<u32> = Vec::with_capacity((target_mean_degree * n as f64) as usize);

        for i in 0..seed_size {
            for j in (i + 1)..seed_size {
                adjacency[i].push(j as u32);
                adjacency[j].push(i as u32);
                endpoints.push(i as u32);
                endpoints.push(j as u32);
            }
        }
        let seed_edges = seed_size * (seed_size - 1) / 2;
        let mut attachments = Vec::with_capacity(n - seed_size);

        let mut targets: Vec<u32> = Vec::with_capacity(m_floor + 1);
        for v in seed_size..n {
            let mut wanted = m_floor;
            if m_frac > 0.0 && rng.random::<f64>() < m_frac {
                wanted += 1;
            }
            // A node cannot attach twice to the same target.
            wanted = wanted.min(v);
            targets.clear();
            while targets.len() < wanted {
                let t = endpoints[rng.random_range(0..endpoints.len())];
                if !targets.contains(&t) {
                    targets.push(t);
                }
            }
            for &t in &targets {
                adjacency[v].push(t);
                adjacency[t as usize].push(v as u32);
                endpoints.push(v as u32);
                endpoints.push(t);
            }
            attachments.push(wanted);
        }

        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degree = adjacency.iter().map(|l| l.len() as u32).collect();
        let network = ContactNetwork { n, adjacency, degree };
        Ok((network, BaGrowthStats { seed_edges, attachments }))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.degree.iter().map(|&d| d as usize).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> u32 {
        self.degree[node as usize]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degree
    }

    /// Mean contact count over all nodes; 0 for an edgeless network.
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.degree.iter().map(|&d| d as f64).sum::<f64>() / self.n as f64
    }

    /// Sorted `i j` edge list, one edge per line with `i < j`, 0-indexed.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for &j in &self.adjacency[i] {
                if (i as u32) < j {
                    out.push_str(&format!("{i} {j}\n"));
                }
            }
        }
        out
    }

    /// Parses the `i j` edge-list format produced by
    /// [`to_edge_list_text`](Self::to_edge_list_text) for a network over
    /// nodes `0..n`.
    pub fn parse_edge_list_text(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let row = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let a = parts
                .next()
                .ok_or(Error::MalformedInput { row, message: "missing first endpoint".into() })?;
            let b = parts
                .next()
                .ok_or(Error::MalformedInput { row, message: "missing second endpoint".into() })?;
            if parts.next().is_some() {
                return Err(Error::MalformedInput {
                    row,
                    message: "expected exactly two node ids".into(),
                });
            }
            let a: u32 = a.parse().map_err(|_| Error::MalformedInput {
                row,
                message: format!("invalid node id `{a}`"),
            })?;
            let b: u32 = b.parse().map_err(|_| Error::MalformedInput {
                row,
                message: format!("invalid node id `{b}`"),
            })?;
            edges.push((a, b));
        }
        Self::from_edges(n, &edges).map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::MalformedInput { row: 0, message: msg },
            other => other,
        })
    }

    /// Checks the structural invariants: symmetric adjacency, no self-loops,
    /// no duplicate edges, consistent degree array.
    pub fn validate(&self) -> Result<()> {
        let mut total = 0usize;
        for i in 0..self.n {
            let list = &self.adjacency[i];
            if list.len() != self.degree[i] as usize {
                return Err(Error::InconsistentState(format!("degree mismatch at node {i}")));
            }
            total += list.len();
            for w in list.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::InconsistentState(format!("duplicate edge at node {i}")));
                }
            }
            for &j in list {
                if j as usize == i {
                    return Err(Error::InconsistentState(format!("self-loop at node {i}")));
                }
                if self.adjacency[j as usize].binary_search(&(i as u32)).is_err() {
                    return Err(Error::InconsistentState(format!(
                        "asymmetric edge ({i}, {j})"
                    )));
                }
            }
        }
        if total % 2 != 0 {
            return Err(Error::InconsistentState("odd degree sum".into()));
        }
        Ok(())
    }
}

/// Discrete power-law fit of a degree sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// Estimated scale-free exponent.
    pub omega: f64,
    /// Lower degree cutoff used in the fit.
    pub kmin: u32,
    /// Goodness of fit in `[0, 1]`: one minus the Kolmogorov-Smirnov distance
    /// between the empirical tail CDF and the fitted CDF. Forced to 0 when
    /// the tail is degenerate (fewer than two distinct degree values).
    pub fitness: f64,
}

const MIN_TAIL_POINTS: usize = 50;

/// Fits a discrete power law `p_k ~ k^-omega` over the full observed range
/// (cutoff at the smallest positive degree).
///
/// The exponent is the discrete maximum-likelihood estimate: the root of the
/// zeta-function score equation, found by bisection. The common closed-form
/// approximation `1 + n / sum(ln(k_i/(kmin-0.5)))` is measurably biased at
/// small cutoffs (about -0.13 at `kmin = 2`, `omega = 2.5`), so it is not
/// used here.
pub fn fit_power_law(degrees: &[u32]) -> Result<PowerLawFit> {
    let kmin = degrees
        .iter()
        .copied()
        .filter(|&k| k >= 1)
        .min()
        .ok_or_else(|| Error::InsufficientData("no positive degrees".into()))?;
    fit_power_law_at(degrees, kmin)
}

/// Fits a discrete power law on the tail `k >= kmin`.
pub fn fit_power_law_at(degrees: &[u32], kmin: u32) -> Result<PowerLawFit> {
    if kmin < 1 {
        return Err(Error::InvalidParameter("kmin must be at least 1".into()));
    }
    let tail: Vec<u32> = degrees.iter().copied().filter(|&k| k >= kmin).collect();
    if tail.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "power-law tail needs at least {MIN_TAIL_POINTS} points, got {}",
            tail.len()
        )));
    }
    let kmax = *tail.iter().max().expect("non-empty tail");
    let mean_log = tail.iter().map(|&k| (k as f64).ln()).sum::<f64>() / tail.len() as f64;
    let omega = solve_power_law_mle(mean_log, kmin, kmax);

    let distinct = {
        let mut vals: Vec<u32> = tail.clone();
        vals.sort_unstable();
        vals.dedup();
        vals.len()
    };
    if distinct < 2 {
        return Ok(PowerLawFit { omega, kmin, fitness: 0.0 });
    }

    let fitness = 1.0 - ks_distance(&tail, kmin, omega);
    Ok(PowerLawFit { omega, kmin, fitness })
}

/// Solves the maximum-likelihood condition for the exponent of a discrete
/// power law on `k >= kmin`: the fitted mean of `ln k` must equal the
/// empirical `mean_log`. The fitted mean is strictly decreasing in omega, so
/// plain bisection suffices.
fn solve_power_law_mle(mean_log: f64, kmin: u32, kmax: u32) -> f64 {
    let fitted_mean_log = |omega: f64| {
        let (zeta, zeta_log) = zeta_moments(omega, kmin, kmax);
        zeta_log / zeta
    };
    let mut lo = 1.0 + 1e-6;
    let mut hi = 30.0;
    if fitted_mean_log(lo) <= mean_log {
        return lo; // heavier tail than representable; clamp
    }
    if fitted_mean_log(hi) >= mean_log {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if fitted_mean_log(mid) > mean_log {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(sum j^-omega, sum ln(j) j^-omega)` over `j >= kmin`, truncated well past
/// `kmax` with integral tail corrections.
fn zeta_moments(omega: f64, kmin: u32, kmax: u32) -> (f64, f64) {
    let cutoff = (kmax as u64 * 4).max(10_000);
    let mut zeta = 0.0;
    let mut zeta_log = 0.0;
    for j in kmin as u64..=cutoff {
        let w = (j as f64).powf(-omega);
        zeta += w;
        zeta_log += (j as f64).ln() * w;
    }
    if omega > 1.0 {
        let a = cutoff as f64 + 0.5;
        let om1 = omega - 1.0;
        zeta += a.powf(-om1) / om1;
        zeta_log += a.powf(-om1) * (a.ln() / om1 + 1.0 / (om1 * om1));
    }
    (zeta, zeta_log)
}

/// Clauset-style fit: scans candidate cutoffs (every distinct degree leaving
/// at least [`MIN_TAIL_POINTS`] tail points) and keeps the cutoff minimizing
/// the Kolmogorov-Smirnov distance.
pub fn fit_power_law_scan(degrees: &[u32]) -> Result<PowerLawFit> {
    let mut candidates: Vec<u32> = degrees.iter().copied().filter(|&k| k >= 1).collect();
    if candidates.is_empty() {
        return Err(Error::InsufficientData("no positive degrees".into()));
    }
    candidates.sort_unstable();
    candidates.dedup();
    let mut best: Option<PowerLawFit> = None;
    for &kmin in &candidates {
        match fit_power_law_at(degrees, kmin) {
            Ok(fit) => {
                if best.map_or(true, |b| fit.fitness > b.fitness) {
                    best = Some(fit);
                }
            }
            Err(Error::InsufficientData(_)) => break,
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| {
        Error::InsufficientData(format!("no cutoff leaves {MIN_TAIL_POINTS} tail points"))
    })
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `tail` and the
/// discrete power law with exponent `omega` on `k >= kmin`.
fn ks_distance(tail: &[u32], kmin: u32, omega: f64) -> f64 {
    let kmax = *tail.iter().max().expect("non-empty tail");
    let n = tail.len() as f64;

    let mut counts = vec![0u32; (kmax - kmin + 1) as usize];
    for &k in tail {
        counts[(k - kmin) as usize] += 1;
    }

    let z = hurwitz_zeta(omega, kmin, kmax);
    let mut emp = 0.0;
    let mut fit = 0.0;
    let mut ks: f64 = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let k = kmin as f64 + i as f64;
        emp += c as f64 / n;
        fit += k.powf(-omega) / z;
        ks = ks.max((emp - fit).abs());
    }
    ks
}

/// `sum_{j >= kmin} j^-omega`, truncated well past `kmax` with an integral
/// tail correction.
fn hurwitz_zeta(omega: f64, kmin: u32, kmax: u32) -> f64 {
    let cutoff = (kmax as u64 * 4).max(100_000);
    let mut sum = 0.0;
    for j in kmin as u64..=cutoff {
        sum += (j as f64).powf(-omega);
    }
    if omega > 1.0 {
        sum += (cutoff as f64 + 0.5).powf(1.0 - omega) / (omega - 1.0);
    }
    sum
}
