//! Executable checks of the inequalities relating the Vendi score `VS_q(Z)` and the
//! uniform-abundance LCR diversity `D_q(Z, 1/n)`, and the numerical search for
//! counterexamples to `VS_q ≥ D_q`.
//!
//! Proven: `VS_q ≥ D_q` at `q ∈ {2, 3, ∞}`; `VS_q ≥ n ≥ D_q` for `q ≤ 0` and full-rank
//! `Z`; `VS_1 ≤ (T/n) D_1` with `T = Σ_ij Z_ij`. Conjectured: `VS_q ≥ D_q` for all `q`,
//! plus two trace inequalities that would imply it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diversity::{lcr_diversity, Abundance};
use crate::error::{Error, Result};
use crate::order::Order;
use crate::simkernel::{Provenance, SimilarityMatrix};
use crate::spectral::{
    eigen_spectrum, symmetric_eigen, symmetric_eigenvalues, vendi_from_spectrum,
};

pub mod search;

pub use search::{
    counterexample_search, gap_high_precision, run_point, summarize, summary_csv, GridPoint, RRule,
    SearchConfig, SearchGrid, SearchRecord, SearchStatus, SummaryRow,
};

/// Absolute slack allowed on the gaps of proven and conjectured bounds.
pub const GAP_TOL: f64 = 1e-9;

/// `λ_min(Z)` above which `Z` counts as full rank.
pub const FULL_RANK_TOL: f64 = 1e-10;

/// Eigenvalues of `Z` down to `-NEGATIVE_EIGEN_TOL · n` are treated as rounding noise
/// when taking fractional powers.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    /// Holds with equality, `|gap| ≤ tol`.
    NearZero,
}

impl Verdict {
    pub fn from_gap(gap: f64, tol: f64) -> Self {
        if gap.is_nan() || gap < -tol {
            Verdict::Violated
        } else if gap <= tol {
            Verdict::NearZero
        } else {
            Verdict::Holds
        }
    }

    pub fn is_violated(self) -> bool {
        self == Verdict::Violated
    }
}

/// `gap = VS_q(Z) − D_q(Z, 1/n)` at one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub q: Order,
    pub gap: f64,
    pub vs_value: f64,
    pub lcr_value: f64,
    pub verdict: Verdict,
}

impl GapReport {
    fn new(q: Order, vs_value: f64, lcr_value: f64) -> Self {
        let gap = vs_value - lcr_value;
        GapReport {
            q,
            gap,
            vs_value,
            lcr_value,
            verdict: Verdict::from_gap(gap, GAP_TOL),
        }
    }
}

/// Maps free parameters `x` (`r × n`) to the Gram matrix `Z = wᵀw` with
/// `w_ij = exp(x_ij) / sqrt(Σ_k exp(2 x_kj))`.
///
/// Columns of `w` are nonnegative unit vectors, so `Z` is PSD with unit diagonal
/// and entries in `[0, 1]`. Each column is shifted by its max before
/// exponentiating; the map is invariant to that shift.
pub fn gram_from_parameters(x: &DMatrix<f64>) -> Result<SimilarityMatrix> {
    let (r, n) = x.shape();
    if r < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need r >= 2 and n >= 2, got {r}x{n}"
        )));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite parameter {v}")));
    }
    let mut w = DMatrix::zeros(r, n);
    for j in 0..n {
        let col = x.column(j);
        let m = col.max();
        let norm = col
            .iter()
            .map(|v| (2.0 * (v - m)).exp())
            .sum::<f64>()
            .sqrt();
        for i in 0..r {
            w[(i, j)] = (x[(i, j)] - m).exp() / norm;
        }
    }
    let g = w.tr_mul(&w);
    let mut z = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = g[(i, j)].clamp(0.0, 1.0);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    Ok(SimilarityMatrix::from_trusted(z, Provenance::Gram { r }))
}

/// Gap of `VS_q(Z) ≥ D_q(Z, 1/n)` on the uniform abundance.
pub fn conjecture1_gap(z: &SimilarityMatrix, q: Order) -> Result<GapReport> {
    let spectrum = eigen_spectrum(z)?;
    let vs = vendi_from_spectrum(&spectrum, q).value();
    let lcr = lcr_diversity(&Abundance::uniform(z.n())?, z, q)?.value();
    Ok(GapReport::new(q, vs, lcr))
}

/// `n² / Σ_ij Z_ij²`.
pub fn vs2_closed_form(z: &SimilarityMatrix) -> f64 {
    let n = z.n() as f64;
    n * n / z.values().iter().map(|v| v * v).sum::<f64>()
}

/// `tr(Z³) = Σ_ij (Z²)_ij Z_ij`.
pub fn trace_cube(z: &SimilarityMatrix) -> f64 {
    let zz = z.values() * z.values();
    zz.component_mul(z.values()).sum()
}

/// `sqrt(n³ / tr Z³)`.
pub fn vs3_closed_form(z: &SimilarityMatrix) -> f64 {
    let n = z.n() as f64;
    (n * n * n / trace_cube(z)).sqrt()
}

/// `D_2(Z, 1/n) = n² / Σ_ij Z_ij`.
pub fn lcr2_closed_form(z: &SimilarityMatrix) -> f64 {
    let n = z.n() as f64;
    n * n / z.total()
}

/// `D_3(Z, 1/n) = sqrt(n³ / Σ_i r_i²)` with row sums `r_i`.
pub fn lcr3_closed_form(z: &SimilarityMatrix) -> f64 {
    let n = z.n() as f64;
    (n * n * n / z.row_sums().iter().map(|r| r * r).sum::<f64>()).sqrt()
}

/// `D_∞(Z, 1/n) = n / max_i r_i`.
pub fn lcr_inf_closed_form(z: &SimilarityMatrix) -> f64 {
    let r_max = z.row_sums().into_iter().fold(f64::NEG_INFINITY, f64::max);
    z.n() as f64 / r_max
}

/// Gaps at `q = 2, 3, ∞` from the closed forms used in the proof:
/// `VS_2 = n²/ΣZ²`, `VS_3 = sqrt(n³/tr Z³)`, `VS_∞ = n/λ_max`, and
/// `D_2 = n²/ΣZ`, `D_3 = sqrt(n³/Σr²)`, `D_∞ = n/r_max`.
pub fn theorem_q2_q3_qinf(z: &SimilarityMatrix) -> Result<[GapReport; 3]> {
    let n = z.n() as f64;
    let lambda_max = symmetric_eigenvalues(z.values())?[0];
    Ok([
        GapReport::new(Order::new(2.0)?, vs2_closed_form(z), lcr2_closed_form(z)),
        GapReport::new(Order::new(3.0)?, vs3_closed_form(z), lcr3_closed_form(z)),
        GapReport::new(Order::INFINITY, n / lambda_max, lcr_inf_closed_form(z)),
    ])
}

/// `VS_q ≥ n ≥ D_q` for `q ≤ 0` on full-rank `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub q: Order,
    pub vs_value: f64,
    pub n: usize,
    pub lcr_value: f64,
    pub verdict: Verdict,
}

pub fn lemma_negative_q(z: &SimilarityMatrix, q: Order) -> Result<LemmaReport> {
    if q.value() > 0.0 {
        return Err(Error::Precondition(format!("order {q} must be <= 0")));
    }
    let lambda_min = *symmetric_eigenvalues(z.values())?.last().unwrap();
    if lambda_min <= FULL_RANK_TOL {
        return Err(Error::Precondition(format!(
            "Z is not full rank: smallest eigenvalue {lambda_min:e}"
        )));
    }
    let vs = vendi_from_spectrum(&eigen_spectrum(z)?, q).value();
    let lcr = lcr_diversity(&Abundance::uniform(z.n())?, z, q)?.value();
    let n = z.n() as f64;
    let slack = (vs - n).min(n - lcr);
    Ok(LemmaReport {
        q,
        vs_value: vs,
        n: z.n(),
        lcr_value: lcr,
        verdict: Verdict::from_gap(slack, GAP_TOL),
    })
}

/// `VS_1(Z) ≤ (T/n) · D_1(Z, 1/n)` with `T = Σ_ij Z_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReverseBoundReport {
    pub vs1: f64,
    pub lcr1: f64,
    pub total: f64,
    /// `(T/n) · D_1`.
    pub bound: f64,
    /// `bound − VS_1`.
    pub gap: f64,
    pub verdict: Verdict,
}

pub fn theorem2_reverse_bound(z: &SimilarityMatrix) -> Result<ReverseBoundReport> {
    let vs1 = vendi_from_spectrum(&eigen_spectrum(z)?, Order::SHANNON).value();
    let lcr1 = lcr_diversity(&Abundance::uniform(z.n())?, z, Order::SHANNON)?.value();
    let total = z.total();
    let bound = total / z.n() as f64 * lcr1;
    let gap = bound - vs1;
    Ok(ReverseBoundReport {
        vs1,
        lcr1,
        total,
        bound,
        gap,
        verdict: Verdict::from_gap(gap, GAP_TOL),
    })
}

/// A conjectured inequality `lhs ≤ rhs` evaluated numerically; `gap = rhs − lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityGap {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Judged relative to `max(1, |rhs|)`.
    pub verdict: Verdict,
}

impl InequalityGap {
    fn new(lhs: f64, rhs: f64) -> Self {
        let gap = rhs - lhs;
        let scale = rhs.abs().max(lhs.abs()).max(1.0);
        InequalityGap {
            lhs,
            rhs,
            gap,
            verdict: Verdict::from_gap(gap / scale, GAP_TOL),
        }
    }
}

fn small_integer(v: f64) -> Option<u32> {
    (v.fract() == 0.0 && (0.0..=64.0).contains(&v)).then_some(v as u32)
}

fn clamp_noise(eigenvalues: &mut [f64], n: usize) -> Result<()> {
    let floor = -NEGATIVE_EIGEN_TOL * n as f64;
    for l in eigenvalues.iter_mut() {
        if *l < floor {
            return Err(Error::Precondition(format!(
                "fractional power of a materially non-PSD matrix (eigenvalue {l:e})"
            )));
        }
        *l = l.max(0.0);
    }
    Ok(())
}

/// `tr(Z^q)` against `Σ_i r_i^(q−1)`.
///
/// For `q > 1` the conjecture is `tr(Z^q) ≤ Σ r_i^(q−1)`; for `q < 1` the direction
/// flips and the returned `lhs`/`rhs` are swapped so that `gap ≥ 0` always means
/// the conjecture holds.
pub fn conjecture2_gap(z: &SimilarityMatrix, q: f64) -> Result<InequalityGap> {
    if !q.is_finite() || q == 1.0 {
        return Err(Error::InvalidArgument(format!(
            "order {q} must be finite and != 1"
        )));
    }
    let n = z.n();
    let row_side: f64 = z.row_sums().iter().map(|r| r.powf(q - 1.0)).sum();
    let trace = match small_integer(q) {
        Some(k) if q > 1.0 => {
            let mut p = z.values().clone();
            for _ in 1..k {
                p = &p * z.values();
            }
            p.trace()
        }
        _ => {
            let mut eig = symmetric_eigenvalues(z.values())?;
            if q < 1.0 {
                let lambda_min = *eig.last().unwrap();
                if lambda_min <= FULL_RANK_TOL {
                    return Err(Error::Precondition(format!(
                        "Z^{q} undefined for rank-deficient Z (smallest eigenvalue {lambda_min:e})"
                    )));
                }
            }
            clamp_noise(&mut eig, n)?;
            eig.iter().map(|l| l.powf(q)).sum()
        }
    };
    Ok(if q > 1.0 {
        InequalityGap::new(trace, row_side)
    } else {
        InequalityGap::new(row_side, trace)
    })
}

/// `1ᵀ M^α 1 ≤ 1ᵀ (M 1)^α` for symmetric `M` with entries in `[0, 1]` and `α ≥ 0`.
///
/// Integer `α ≤ 64` uses repeated products and accepts any such `M`; other `α`
/// go through the eigendecomposition and reject materially non-PSD `M`.
pub fn conjecture3_gap(m: &DMatrix<f64>, alpha: f64) -> Result<InequalityGap> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} must be finite and >= 0"
        )));
    }
    for i in 0..r {
        for j in 0..r {
            let v = m[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i},{j}) = {v} outside [0,1]"
                )));
            }
            if (v - m[(j, i)]).abs() > crate::simkernel::SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    let ones = DVector::from_element(r, 1.0);
    let row_side: f64 = (m * &ones).iter().map(|s| s.powf(alpha)).sum();
    let quad = match small_integer(alpha) {
        Some(k) => {
            let mut v = ones.clone();
            for _ in 0..k {
                v = m * v;
            }
            ones.dot(&v)
        }
        None => {
            let (mut eig, vecs) = symmetric_eigen(m)?;
            clamp_noise(&mut eig, r)?;
            eig.iter()
                .enumerate()
                .map(|(i, l)| {
                    let proj = vecs.column(i).sum();
                    l.powf(alpha) * proj * proj
                })
                .sum()
        }
    };
    Ok(InequalityGap::new(quad, row_side))
}
