//! Half-distance sweeps: LCR and Vendi scores across a grid of kernel rates `k`,
//! and their correlation across a collection of datasets at each `(k, q)`.

use core::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diversity::{lcr_profile, Abundance};
use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::order::Order;
use crate::simkernel::{expand_to_zn, kernel_similarity, DistanceMatrix, KernelRate};
use crate::spectral::{eigen_spectrum, spectrum_entropy_curve};

/// Number of points in the default `k` grid.
pub const DEFAULT_GRID_POINTS: usize = 33;

/// Standard deviations at or below `DEGENERATE_REL_STD · max(1, |mean|)` count as zero.
pub const DEGENERATE_REL_STD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStats {
    pub pearson: f64,
    pub r_squared: f64,
    /// Sample covariance, denominator `n − 1`.
    pub covariance: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_degenerate(v: &[f64], var: f64) -> bool {
    var.sqrt() <= DEGENERATE_REL_STD * mean(v).abs().max(1.0)
}

/// Sample covariance, Pearson correlation and `r²` of paired samples.
pub fn correlation_stats(xs: &[f64], ys: &[f64]) -> Result<CorrelationStats> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 pairs, got {}",
            xs.len()
        )));
    }
    let m = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (m - 1.0);
    let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / (m - 1.0);
    let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / (m - 1.0);
    if is_degenerate(xs, vx) {
        return Err(Error::DegenerateVariance("first sample"));
    }
    if is_degenerate(ys, vy) {
        return Err(Error::DegenerateVariance("second sample"));
    }
    let pearson = (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationStats {
        pearson,
        r_squared: pearson * pearson,
        covariance: cov,
    })
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo < hi and at least 2 points (lo={lo}, hi={hi}, count={count})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (count - 1) as f64;
    let mut ks: Vec<f64> = (0..count).map(|i| (a + step * i as f64).exp()).collect();
    ks[0] = lo;
    ks[count - 1] = hi;
    Ok(ks)
}

/// Default grid bracketing the reciprocal distances of all datasets:
/// 33 log-spaced values from `0.1 / d_max` to `10 / d_min⁺`.
pub fn default_grid(datasets: &[SweepDataset]) -> Result<Vec<f64>> {
    let d_max = datasets
        .iter()
        .map(|d| d.distances.max_distance())
        .fold(0.0, f64::max);
    let d_min = datasets
        .iter()
        .filter_map(|d| d.distances.min_positive_distance())
        .fold(f64::INFINITY, f64::min);
    if d_max.is_nan() || d_max <= 0.0 || !d_min.is_finite() {
        return Err(Error::InvalidArgument(
            "no positive distances to bracket".into(),
        ));
    }
    log_grid(0.1 / d_max, 10.0 / d_min, DEFAULT_GRID_POINTS)
}

/// One dataset of a sweep. With `counts`, `distances` are between unique elements
/// and element `i` occurs `counts[i]` times.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepDataset {
    pub id: String,
    pub distances: DistanceMatrix,
    pub counts: Option<Vec<usize>>,
}

impl SweepDataset {
    pub fn new(id: impl Into<String>, distances: DistanceMatrix) -> Self {
        SweepDataset {
            id: id.into(),
            distances,
            counts: None,
        }
    }

    /// Number of observations: `Σ counts`, or the matrix order.
    pub fn size(&self) -> usize {
        self.counts
            .as_ref()
            .map_or(self.distances.n(), |c| c.iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub dataset: String,
    pub k: f64,
    pub q: Order,
    pub lcr: Option<f64>,
    pub vs: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsCell {
    pub k: f64,
    pub q: Order,
    pub stats: Option<CorrelationStats>,
    /// Set when either sample had zero variance; the stats then report
    /// `pearson = r² = 1`.
    pub degenerate: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub ks: Vec<f64>,
    pub qs: Vec<Order>,
    /// Ordered by `(dataset, k, q)`.
    pub cells: Vec<SweepCell>,
    /// Ordered by `(k, q)`.
    pub stats: Vec<StatsCell>,
}

/// Where the correlation curve of one order is most extreme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveExtrema {
    pub k_min_pearson: f64,
    pub min_pearson: f64,
    pub k_max_covariance: f64,
    pub max_covariance: f64,
}

impl SweepResult {
    pub fn cells_for<'a>(
        &'a self,
        dataset: &'a str,
        q: Order,
    ) -> impl Iterator<Item = &'a SweepCell> {
        self.cells
            .iter()
            .filter(move |c| c.dataset == dataset && c.q == q)
    }

    /// Extrema of the non-degenerate part of the correlation curve at `q`.
    pub fn extrema(&self, q: Order) -> Option<CurveExtrema> {
        let pts: Vec<(f64, CorrelationStats)> = self
            .stats
            .iter()
            .filter(|s| s.q == q && !s.degenerate)
            .filter_map(|s| s.stats.map(|st| (s.k, st)))
            .collect();
        let lo = pts
            .iter()
            .min_by(|a, b| a.1.pearson.total_cmp(&b.1.pearson))?;
        let hi = pts
            .iter()
            .max_by(|a, b| a.1.covariance.total_cmp(&b.1.covariance))?;
        Some(CurveExtrema {
            k_min_pearson: lo.0,
            min_pearson: lo.1.pearson,
            k_max_covariance: hi.0,
            max_covariance: hi.1.covariance,
        })
    }

    /// Long format: `dataset_id,k,q,lcr,vs,status`.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("dataset_id,k,q,lcr,vs,status\n");
        for c in &self.cells {
            let status = c
                .error
                .as_deref()
                .map_or("ok".to_string(), |e| format!("failed: {e}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&c.dataset),
                fmt17(c.k),
                c.q,
                c.lcr.map(fmt17).unwrap_or_default(),
                c.vs.map(fmt17).unwrap_or_default(),
                csv_field(&status)
            );
        }
        out
    }

    /// `k,q,pearson,r2,cov,flag`.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("k,q,pearson,r2,cov,flag\n");
        for s in &self.stats {
            let flag = match (&s.error, s.degenerate) {
                (Some(e), _) => format!("failed: {e}"),
                (None, true) => "degenerate".into(),
                (None, false) => "ok".into(),
            };
            let (p, r2, cov) = s
                .stats
                .map_or((String::new(), String::new(), String::new()), |st| {
                    (fmt17(st.pearson), fmt17(st.r_squared), fmt17(st.covariance))
                });
            let _ = writeln!(
                out,
                "{},{},{p},{r2},{cov},{}",
                fmt17(s.k),
                s.q,
                csv_field(&flag)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn evaluate_cell(ds: &SweepDataset, k: f64, qs: &[Order]) -> Result<Vec<(f64, f64)>> {
    let z = kernel_similarity(&ds.distances, KernelRate::new(k)?);
    let (p, zn) = match &ds.counts {
        Some(counts) => (Abundance::from_counts(counts)?, expand_to_zn(&z, counts)?),
        None => (Abundance::uniform(z.n())?, z.clone()),
    };
    let lcr = lcr_profile(&p, &z, qs)?;
    let vs = spectrum_entropy_curve(&eigen_spectrum(&zn)?, qs)?;
    Ok(lcr
        .iter()
        .zip(&vs)
        .map(|(a, b)| (a.1.value(), b.1.value()))
        .collect())
}

/// Evaluates LCR and VS for every dataset, `k` and `q`, then correlates them across
/// datasets at each `(k, q)`. Failed cells are recorded and the sweep continues.
pub fn sweep_half_distance(
    datasets: &[SweepDataset],
    ks: &[f64],
    qs: &[Order],
) -> Result<SweepResult> {
    if datasets.is_empty() || ks.is_empty() || qs.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    if let Some(&k) = ks.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidRate(k));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "k grid must be strictly increasing".into(),
        ));
    }
    if let Some(ds) = datasets.iter().find(|d| {
        d.counts
            .as_ref()
            .is_some_and(|c| c.len() != d.distances.n())
    }) {
        return Err(Error::InvalidArgument(format!(
            "counts of dataset {} do not match its size",
            ds.id
        )));
    }

    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..ks.len()).map(move |k| (d, k)))
        .collect();
    let results: Vec<Result<Vec<(f64, f64)>>> = jobs
        .par_iter()
        .map(|&(d, ki)| evaluate_cell(&datasets[d], ks[ki], qs))
        .collect();

    let mut cells = Vec::with_capacity(jobs.len() * qs.len());
    for (&(d, ki), res) in jobs.iter().zip(&results) {
        for (qi, &q) in qs.iter().enumerate() {
            let (lcr, vs, error) = match res {
                Ok(v) => (Some(v[qi].0), Some(v[qi].1), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            cells.push(SweepCell {
                dataset: datasets[d].id.clone(),
                k: ks[ki],
                q,
                lcr,
                vs,
                error,
            });
        }
    }

    let mut stats = Vec::with_capacity(ks.len() * qs.len());
    for (ki, &k) in ks.iter().enumerate() {
        for (qi, &q) in qs.iter().enumerate() {
            let (xs, ys): (Vec<f64>, Vec<f64>) = (0..datasets.len())
                .filter_map(|d| results[d * ks.len() + ki].as_ref().ok().map(|v| v[qi]))
                .unzip();
            stats.push(stats_cell(k, q, &xs, &ys));
        }
    }
    Ok(SweepResult {
        ks: ks.to_vec(),
        qs: qs.to_vec(),
        cells,
        stats,
    })
}

fn stats_cell(k: f64, q: Order, xs: &[f64], ys: &[f64]) -> StatsCell {
    match correlation_stats(xs, ys) {
        Ok(st) => StatsCell {
            k,
            q,
            stats: Some(st),
            degenerate: false,
            error: None,
        },
        Err(Error::DegenerateVariance(_)) => {
            let m = xs.len() as f64;
            let (mx, my) = (mean(xs), mean(ys));
            let covariance = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / (m - 1.0);
            StatsCell {
                k,
                q,
                stats: Some(CorrelationStats {
                    pearson: 1.0,
                    r_squared: 1.0,
                    covariance,
                }),
                degenerate: true,
                error: None,
            }
        }
        Err(e) => StatsCell {
            k,
            q,
            stats: None,
            degenerate: false,
            error: Some(e.to_string()),
        },
    }
}

/// LCR and VS at a tiny and a huge kernel rate, checked against their limits 1 and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub q: Order,
    pub n: usize,
    pub k_small: f64,
    pub k_large: f64,
    pub lcr_small: f64,
    pub vs_small: f64,
    pub lcr_large: f64,
    pub vs_large: f64,
    pub small_ok: bool,
    pub large_ok: bool,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.small_ok && self.large_ok
    }
}

/// Checks `LCR, VS → 1` as `k → 0` and `→ n` as `k → ∞` (uniform abundance), to
/// within `eps`.
///
/// The rates are chosen from the data so the limits are reached to well within
/// `eps`: `k_small = 1e-3 · eps / (n · d_max)` and
/// `k_large = (ln(n² / eps) + 5) / d_min⁺`. For `0 < q < 1` the small eigenvalues
/// of `Z/n` (of size about `k · d`) enter as `λ^q`, so `k_small` is further reduced
/// to `(1e-3 · eps / n)^(1/q) / d_max`. Requires `q > 0`: the order-0 Vendi score
/// is the rank, which does not approach 1. The large-`k` limit is the number
/// of distinct points, so `D` should not contain duplicates.
pub fn limit_check(d: &DistanceMatrix, eps: f64, q: Order) -> Result<LimitReport> {
    let n = d.n();
    if n < 2 {
        return Err(Error::Precondition(
            "limit check needs at least 2 elements".into(),
        ));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps {eps} must be positive"
        )));
    }
    if q.value() <= 0.0 {
        return Err(Error::Precondition(format!("order {q} must be > 0")));
    }
    let d_min = d
        .min_positive_distance()
        .ok_or_else(|| Error::Precondition("all distances are zero".into()))?;
    let d_max = d.max_distance();
    let nf = n as f64;
    let base = 1e-3 * eps / nf;
    let mut k_small = base / d_max;
    if q.value() < 1.0 {
        k_small = k_small.min(base.powf(1.0 / q.value()) / d_max);
    }
    let k_small = k_small.max(1e-300 / d_max);
    let k_large = ((nf * nf / eps).ln() + 5.0) / d_min;
    let ds = SweepDataset::new("limit", d.clone());
    let small = evaluate_cell(&ds, k_small, &[q])?[0];
    let large = evaluate_cell(&ds, k_large, &[q])?[0];
    Ok(LimitReport {
        q,
        n,
        k_small,
        k_large,
        lcr_small: small.0,
        vs_small: small.1,
        lcr_large: large.0,
        vs_large: large.1,
        small_ok: (small.0 - 1.0).abs() <= eps && (small.1 - 1.0).abs() <= eps,
        large_ok: (large.0 - nf).abs() <= eps && (large.1 - nf).abs() <= eps,
    })
}
