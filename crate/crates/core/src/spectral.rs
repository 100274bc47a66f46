//! Eigenspectra of similarity matrices and Vendi scores.
//!
//! `VS_q(Z)` is the Hill number of order `q` of the eigenvalues of `Z/n`, which form a
//! probability vector when `Z` is PSD with unit diagonal. Eigenvalues at or below
//! [`TRUNCATION_THRESHOLD`] are dropped and counted; the rest are not renormalized.

use core::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::order::{weighted_power_mean_inverse, EffectiveNumber, Order, OrderKind};
use crate::simkernel::SimilarityMatrix;

/// Eigenvalues of `Z/n` at or below this are treated as zero.
pub const TRUNCATION_THRESHOLD: f64 = 1e-12;

/// Eigenvalues of `Z` below `-NEGATIVE_WARN_TOL · n` mark `Z` as materially non-PSD.
pub const NEGATIVE_WARN_TOL: f64 = 1e-8;

/// Allowed deviation of `Σ λ_i` from `tr(Z/n) = 1` and slack on the Gershgorin bound.
pub const TRACE_TOL: f64 = 1e-9;

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if let Some((idx, v)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        let n = m.nrows();
        return Err(Error::NonFinite {
            row: idx % n,
            col: idx / n,
            value: *v,
        });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, sorted nonincreasing.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_square_finite(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// Full eigendecomposition `(eigenvalues, eigenvectors as columns)`.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_square_finite(m)?;
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::Eigen(format!("no convergence for {n}x{n} matrix")))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Cyclic Jacobi eigenvalue iteration.
///
/// Slow (`O(n³)` per sweep) but accurate for small matrices, and independent of
/// the Householder/QR path in [`symmetric_eigenvalues`]. Used to re-check search
/// candidates. Sorted nonincreasing.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_square_finite(m)?;
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-32 * scale.max(f64::MIN_POSITIVE) {
            let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            eig.sort_by(|x, y| y.total_cmp(x));
            return Ok(eig);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::Eigen("Jacobi iteration did not converge".into()))
}

/// Positive spectrum of `Z/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
    truncated: usize,
    /// Smallest eigenvalue of `Z/n` before truncation.
    min_raw: f64,
    /// Sum of all eigenvalues of `Z/n` before truncation.
    raw_sum: f64,
    order: usize,
}

impl EigenSpectrum {
    /// Builds a spectrum from raw eigenvalues of `Z/n` for a matrix of order `n`.
    pub fn from_raw(mut raw: Vec<f64>, n: usize) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("spectrum"));
        }
        raw.sort_by(|a, b| b.total_cmp(a));
        let raw_sum = raw.iter().sum();
        let min_raw = *raw.last().unwrap();
        let eigenvalues: Vec<f64> = raw
            .iter()
            .copied()
            .filter(|&v| v > TRUNCATION_THRESHOLD)
            .collect();
        if eigenvalues.is_empty() {
            return Err(Error::Eigen("no positive eigenvalues".into()));
        }
        Ok(EigenSpectrum {
            truncated: raw.len() - eigenvalues.len(),
            eigenvalues,
            min_raw,
            raw_sum,
            order: n,
        })
    }

    /// Retained eigenvalues, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues dropped as nonpositive.
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    /// Number of retained eigenvalues, the numerical rank.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn min_raw(&self) -> f64 {
        self.min_raw
    }

    /// `1 - Σ retained λ_i`: mass lost to truncation.
    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.eigenvalues.iter().sum::<f64>()
    }

    /// Sum of all eigenvalues before truncation.
    pub fn raw_sum(&self) -> f64 {
        self.raw_sum
    }

    /// True when some eigenvalue of `Z` is below `-1e-8 · n`; VS is then ill-defined.
    pub fn materially_non_psd(&self) -> bool {
        self.min_raw < -NEGATIVE_WARN_TOL
    }
}

/// Eigenvalues of `Z/n` with the nonpositive part truncated.
///
/// Fails when the solver output violates `Σ λ = 1` or the Gershgorin bound
/// `λ_max(Z) ≤ max_i Σ_j Z_ij`.
pub fn eigen_spectrum(z: &SimilarityMatrix) -> Result<EigenSpectrum> {
    let n = z.n();
    let scaled = z.values() / n as f64;
    let raw = symmetric_eigenvalues(&scaled)?;
    let spectrum = EigenSpectrum::from_raw(raw, n)?;
    if (spectrum.raw_sum - 1.0).abs() > TRACE_TOL {
        return Err(Error::Eigen(format!(
            "eigenvalues of Z/n sum to {}, expected 1",
            spectrum.raw_sum
        )));
    }
    let r_max = z.row_sums().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if spectrum.max() * n as f64 > r_max + TRACE_TOL * n as f64 {
        return Err(Error::Eigen(format!(
            "largest eigenvalue {} exceeds the Gershgorin bound {r_max}",
            spectrum.max() * n as f64
        )));
    }
    Ok(spectrum)
}

/// `VS_q` from a precomputed spectrum.
pub fn vendi_from_spectrum(spectrum: &EigenSpectrum, q: Order) -> EffectiveNumber {
    let l = &spectrum.eigenvalues;
    if q.value() == 0.0 {
        return EffectiveNumber::new(l.len() as f64);
    }
    let value = match q.kind() {
        OrderKind::PosInfinity => 1.0 / spectrum.max(),
        OrderKind::NegInfinity => 1.0 / spectrum.min(),
        _ => weighted_power_mean_inverse(l, l, q),
    };
    EffectiveNumber::new(value)
}

/// Vendi score of order `q`: the Hill number of the positive spectrum of `Z/n`.
pub fn vendi_score(z: &SimilarityMatrix, q: Order) -> Result<EffectiveNumber> {
    Ok(vendi_from_spectrum(&eigen_spectrum(z)?, q))
}

/// `VS_q` for each order from one decomposition.
pub fn spectrum_entropy_curve(
    spectrum: &EigenSpectrum,
    qs: &[Order],
) -> Result<Vec<(Order, EffectiveNumber)>> {
    if qs.is_empty() {
        return Err(Error::Empty("order list"));
    }
    Ok(qs
        .iter()
        .map(|&q| (q, vendi_from_spectrum(spectrum, q)))
        .collect())
}

/// One row of an exported spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    /// 1-based rank.
    pub rank: usize,
    pub eigenvalue: f64,
    /// `Σ_{j ≤ rank} λ_j`.
    pub cumulative: f64,
}

pub fn export_spectrum(spectrum: &EigenSpectrum) -> Vec<SpectrumRow> {
    let mut acc = 0.0;
    spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            acc += l;
            SpectrumRow {
                rank: i + 1,
                eigenvalue: l,
                cumulative: acc,
            }
        })
        .collect()
}

/// CSV with header `rank,eigenvalue,cumulative` and 17 significant digits.
pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from("rank,eigenvalue,cumulative\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.rank,
            fmt17(r.eigenvalue),
            fmt17(r.cumulative)
        );
    }
    out
}
