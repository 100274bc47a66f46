//! Local-minimization search for counterexamples to `VS_q(Z) ≥ D_q(Z, 1/n)`.
//!
//! Each grid point draws `x ~ Normal(0, scale²)` elementwise (`r × n`), maps it to a
//! Gram matrix with [`gram_from_parameters`] and minimizes the gap with BFGS. A
//! minimized gap below [`SearchConfig::candidate_threshold`] is re-evaluated with an
//! independent Jacobi eigensolver; only if that also falls below
//! [`SearchConfig::confirm_threshold`] is the record flagged as a candidate.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{conjecture1_gap, gram_from_parameters};
use crate::diversity::{lcr_diversity, Abundance};
use crate::error::{Error, Result};
use crate::optimize::{minimize_bfgs, BfgsConfig, StopReason};
use crate::order::Order;
use crate::simkernel::SimilarityMatrix;
use crate::spectral::{jacobi_eigenvalues, vendi_from_spectrum, EigenSpectrum};

/// How the inner dimension `r` is chosen for each `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RRule {
    /// `{2, ⌊n/2⌋, n}` without duplicates and without values below 2.
    TwoHalfFull,
    Fixed(Vec<usize>),
}

impl RRule {
    pub fn values(&self, n: usize) -> Vec<usize> {
        let mut rs = match self {
            RRule::TwoHalfFull => vec![2, n / 2, n],
            RRule::Fixed(v) => v.clone(),
        };
        rs.retain(|&r| r >= 2);
        rs.sort_unstable();
        rs.dedup();
        rs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub qs: Vec<Order>,
    pub ns: Vec<usize>,
    pub r_rule: RRule,
    pub scales: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
}

fn orders(vs: &[f64]) -> Vec<Order> {
    vs.iter()
        .map(|&v| Order::new(v).expect("literal order"))
        .collect()
}

impl SearchGrid {
    /// The full reference grid: 17 orders, `n ∈ {3, 5, 10, 20, 50}`, four scales and
    /// five replicates, 4420 minimizations.
    pub fn full(seed: u64) -> Self {
        SearchGrid {
            qs: orders(&[
                -10.0,
                -2.7,
                -2.0,
                -1.0,
                -0.3,
                0.0,
                0.3,
                1.0,
                2.7,
                3.4,
                4.0,
                5.0,
                core::f64::consts::TAU,
                7.0,
                8.0,
                9.1,
                10.0,
            ]),
            ns: vec![3, 5, 10, 20, 50],
            r_rule: RRule::TwoHalfFull,
            scales: vec![0.1, 1.0, 2.0, 10.0],
            replicates: 5,
            seed,
        }
    }

    /// Reduced grid that runs in minutes: `q ∈ {−2, 0, 1, 2.7, 5}`,
    /// `n ∈ {3, 5, 10}`, scales `{0.1, 1, 10}`, two replicates.
    pub fn acceptance(seed: u64) -> Self {
        SearchGrid {
            qs: orders(&[-2.0, 0.0, 1.0, 2.7, 5.0]),
            ns: vec![3, 5, 10],
            r_rule: RRule::TwoHalfFull,
            scales: vec![0.1, 1.0, 10.0],
            replicates: 2,
            seed,
        }
    }

    /// Smoke-test grid: `q ∈ {0, 1, 2}`, `n ∈ {3, 5}`, scale 1, two replicates.
    pub fn desk(seed: u64) -> Self {
        SearchGrid {
            qs: orders(&[0.0, 1.0, 2.0]),
            ns: vec![3, 5],
            r_rule: RRule::TwoHalfFull,
            scales: vec![1.0],
            replicates: 2,
            seed,
        }
    }

    /// All grid points in lexicographic `(q, n, scale, replicate, r)` order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &q in &self.qs {
            for &n in &self.ns {
                for &scale in &self.scales {
                    for replicate in 0..self.replicates {
                        for r in self.r_rule.values(n) {
                            let index = out.len();
                            out.push(GridPoint {
                                index,
                                q,
                                n,
                                r,
                                scale,
                                replicate,
                                seed: point_seed(self.seed, index as u64),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.qs.is_empty()
            || self.ns.is_empty()
            || self.scales.is_empty()
            || self.replicates == 0
        {
            return Err(Error::Empty("search grid"));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidArgument(format!("n = {n} must be >= 2")));
        }
        if let Some(&s) = self.scales.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "scale {s} must be positive"
            )));
        }
        if let RRule::Fixed(rs) = &self.r_rule {
            if rs.iter().any(|&r| r < 2) {
                return Err(Error::InvalidArgument("r values must be >= 2".into()));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over `(base, index)`; gives each grid point its own stream.
fn point_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub q: Order,
    pub n: usize,
    pub r: usize,
    pub scale: f64,
    pub replicate: usize,
    pub seed: u64,
}

impl GridPoint {
    /// Initial parameters `x ~ Normal(0, scale²)`, `r × n`, drawn from this point's seed.
    pub fn initial_parameters(&self) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.scale).expect("positive scale");
        // row-major draw order
        let draws: Vec<f64> = (0..self.r * self.n)
            .map(|_| normal.sample(&mut rng))
            .collect();
        DMatrix::from_row_slice(self.r, self.n, &draws)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub bfgs: BfgsConfig,
    pub candidate_threshold: f64,
    pub confirm_threshold: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            bfgs: BfgsConfig::default(),
            candidate_threshold: -1e-6,
            confirm_threshold: -1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    Failed,
    CounterexampleCandidate,
}

/// Outcome of one minimization. Matrices are flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub index: usize,
    pub q: Order,
    pub n: usize,
    pub r: usize,
    pub scale: f64,
    pub replicate: usize,
    pub seed: u64,
    pub status: SearchStatus,
    pub initial_gap: Option<f64>,
    pub gap: Option<f64>,
    /// Gap at the minimizer from the Jacobi re-evaluation, when it was triggered.
    pub confirmed_gap: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: Option<StopReason>,
    pub initial_x: Vec<f64>,
    pub minimizer_z: Vec<f64>,
    pub error: Option<String>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// `VS_q − D_q` with eigenvalues from the Jacobi solver instead of Householder/QR.
pub fn gap_high_precision(z: &SimilarityMatrix, q: Order) -> Result<f64> {
    let n = z.n();
    let raw = jacobi_eigenvalues(&(z.values() / n as f64))?;
    let vs = vendi_from_spectrum(&EigenSpectrum::from_raw(raw, n)?, q).value();
    let lcr = lcr_diversity(&Abundance::uniform(n)?, z, q)?.value();
    Ok(vs - lcr)
}

fn objective(x: &[f64], r: usize, n: usize, q: Order) -> Result<f64> {
    let z = gram_from_parameters(&DMatrix::from_row_slice(r, n, x))?;
    Ok(conjecture1_gap(&z, q)?.gap)
}

/// Runs the minimization for one grid point. Linear-algebra failures yield a
/// `Failed` record rather than an error.
pub fn run_point(point: &GridPoint, cfg: &SearchConfig) -> SearchRecord {
    let x0 = point.initial_parameters();
    let x0_flat = row_major(&x0);
    let mut record = SearchRecord {
        index: point.index,
        q: point.q,
        n: point.n,
        r: point.r,
        scale: point.scale,
        replicate: point.replicate,
        seed: point.seed,
        status: SearchStatus::Failed,
        initial_gap: None,
        gap: None,
        confirmed_gap: None,
        iterations: 0,
        evaluations: 0,
        stop: None,
        initial_x: x0_flat.clone(),
        minimizer_z: Vec::new(),
        error: None,
    };
    let (r, n, q) = (point.r, point.n, point.q);
    let outcome = (|| -> Result<()> {
        record.initial_gap = Some(objective(&x0_flat, r, n, q)?);
        let min = minimize_bfgs(|x| objective(x, r, n, q), &x0_flat, &cfg.bfgs)?;
        let z = gram_from_parameters(&DMatrix::from_row_slice(r, n, &min.x))?;
        record.gap = Some(min.value);
        record.iterations = min.iterations;
        record.evaluations = min.evaluations;
        record.stop = Some(min.stop);
        record.minimizer_z = row_major(z.values());
        record.status = SearchStatus::Converged;
        if min.value < cfg.candidate_threshold {
            let confirmed = gap_high_precision(&z, q)?;
            record.confirmed_gap = Some(confirmed);
            if confirmed < cfg.confirm_threshold {
                record.status = SearchStatus::CounterexampleCandidate;
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.status = SearchStatus::Failed;
        record.error = Some(e.to_string());
    }
    record
}

/// Runs every grid point (in parallel) and returns records in grid order.
pub fn counterexample_search(grid: &SearchGrid, cfg: &SearchConfig) -> Result<Vec<SearchRecord>> {
    grid.validate()?;
    let points = grid.points();
    Ok(points.par_iter().map(|p| run_point(p, cfg)).collect())
}

/// Minimum gap per `(q, n, r, scale)` over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub q: Order,
    pub n: usize,
    pub r: usize,
    pub scale: f64,
    pub runs: usize,
    pub failed: usize,
    pub candidates: usize,
    pub min_gap: Option<f64>,
}

pub fn summarize(records: &[SearchRecord]) -> Vec<SummaryRow> {
    let mut slots: HashMap<(u64, usize, usize, u64), usize> = HashMap::new();
    let mut rows: Vec<SummaryRow> = Vec::new();
    for rec in records {
        let key = (rec.q.value().to_bits(), rec.n, rec.r, rec.scale.to_bits());
        let slot = *slots.entry(key).or_insert_with(|| {
            rows.push(SummaryRow {
                q: rec.q,
                n: rec.n,
                r: rec.r,
                scale: rec.scale,
                runs: 0,
                failed: 0,
                candidates: 0,
                min_gap: None,
            });
            rows.len() - 1
        });
        let row = &mut rows[slot];
        row.runs += 1;
        match rec.status {
            SearchStatus::Failed => row.failed += 1,
            SearchStatus::CounterexampleCandidate => row.candidates += 1,
            SearchStatus::Converged => {}
        }
        if let Some(g) = rec.gap {
            row.min_gap = Some(row.min_gap.map_or(g, |m: f64| m.min(g)));
        }
    }
    rows
}

/// Summary CSV: `q,n,r,scale,runs,failed,candidates,min_gap`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    use core::fmt::Write as _;
    let mut out = String::from("q,n,r,scale,runs,failed,candidates,min_gap\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.q,
            r.n,
            r.r,
            r.scale,
            r.runs,
            r.failed,
            r.candidates,
            r.min_gap.map(crate::format::fmt17).unwrap_or_default()
        );
    }
    out
}
