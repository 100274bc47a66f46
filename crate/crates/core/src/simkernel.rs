//! Similarity matrices: construction from features or distances, validation,
//! PSD checks and expansion from unique elements to all observations.
//!
//! The kernel is `z_ij = exp(-k · ‖x_i - x_j‖₂)`. The rate `k` sets the distance
//! scale: adding `ln 2 / k` to a distance halves the similarity. As `k → 0` every
//! similarity tends to 1 and as `k → ∞` the matrix tends to the identity.

use core::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::symmetric_eigenvalues;

/// Absolute per-entry tolerance for symmetry and unit diagonal of user-supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default PSD tolerance; [`is_psd`] scales it by the matrix order.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// `n` elements (rows) with `d` real features (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Empty("data matrix"));
        }
        check_finite(&values)?;
        Ok(DataMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Returns a new matrix whose row `i` is row `indices[i]` of `self`.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range"
            )));
        }
        Self::new(self.values.select_rows(indices))
    }
}

/// Supported distance metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => f.write_str("euclidean"),
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
    metric: Option<Metric>,
}

impl DistanceMatrix {
    /// Validates a user-supplied distance matrix.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (r, c) = values.shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        if r == 0 {
            return Err(Error::Empty("distance matrix"));
        }
        check_finite(&values)?;
        for i in 0..r {
            if values[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "distance diagonal ({i},{i}) = {} is not zero",
                    values[(i, i)]
                )));
            }
            for j in (i + 1)..r {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if a < 0.0 || b < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "negative distance at ({i},{j})"
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "distance asymmetry {} at ({i},{j})",
                        (a - b).abs()
                    )));
                }
            }
        }
        let values = mirror_upper(values);
        Ok(DistanceMatrix {
            values,
            metric: None,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn metric(&self) -> Option<Metric> {
        self.metric
    }

    /// Largest distance, or 0 for a single element.
    pub fn max_distance(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest strictly positive distance, if any pair is distinct.
    pub fn min_positive_distance(&self) -> Option<f64> {
        self.values
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
    }
}

fn mirror_upper(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}

/// Rate `k > 0` of the exponential distance kernel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KernelRate(f64);

impl KernelRate {
    pub fn new(k: f64) -> Result<Self> {
        if k > 0.0 && k.is_finite() {
            Ok(KernelRate(k))
        } else {
            Err(Error::InvalidRate(k))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Distance increment that halves every similarity: `ln 2 / k`.
    pub fn halving_distance(self) -> f64 {
        core::f64::consts::LN_2 / self.0
    }
}

impl TryFrom<f64> for KernelRate {
    type Error = Error;
    fn try_from(k: f64) -> Result<Self> {
        KernelRate::new(k)
    }
}

impl From<KernelRate> for f64 {
    fn from(k: KernelRate) -> f64 {
        k.0
    }
}

/// Rate `k = 1/√d`, which turns the Euclidean norm over `d` features into the
/// root-mean-square distance.
pub fn rmsd_rate(d: usize) -> Result<KernelRate> {
    if d == 0 {
        return Err(Error::InvalidArgument(
            "feature dimension must be at least 1".into(),
        ));
    }
    KernelRate::new(1.0 / (d as f64).sqrt())
}

/// Where a similarity matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Kernel { k: f64, metric: Option<Metric> },
    UserSupplied,
    Gram { r: usize },
    Expanded { unique: usize },
}

/// Outcome of the last PSD check on a similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdStatus {
    Verified,
    Failed,
    Unchecked,
}

/// Symmetric matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
    provenance: Provenance,
    psd_status: PsdStatus,
}

impl SimilarityMatrix {
    /// Builds without validation. Callers guarantee the invariants.
    pub(crate) fn from_trusted(values: DMatrix<f64>, provenance: Provenance) -> Self {
        debug_assert!(values.is_square());
        SimilarityMatrix {
            values,
            provenance,
            psd_status: PsdStatus::Unchecked,
        }
    }

    /// Validates `values`, returning an error describing the violations if any.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        match validate_similarity(values)? {
            Validation::Valid(z) => Ok(z),
            Validation::Invalid(report) => Err(Error::InvalidSimilarity(report.to_string())),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_trusted(DMatrix::identity(n, n), Provenance::UserSupplied)
    }

    pub fn ones(n: usize) -> Self {
        Self::from_trusted(DMatrix::from_element(n, n, 1.0), Provenance::UserSupplied)
    }

    /// 2×2 matrix with off-diagonal similarity `s`.
    pub fn pair(s: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[1.0, s, s, 1.0]))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn psd_status(&self) -> PsdStatus {
        self.psd_status
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.row_iter().map(|r| r.sum()).collect()
    }

    /// Σ_ij Z_ij.
    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    /// Runs [`is_psd`] and records the outcome on the matrix.
    pub fn check_psd(mut self, tol: f64) -> Result<(Self, PsdCheck)> {
        let check = is_psd(&self, tol)?;
        self.psd_status = if check.is_psd {
            PsdStatus::Verified
        } else {
            PsdStatus::Failed
        };
        Ok((self, check))
    }

    /// Simultaneously permutes rows and columns: entry `(i, j)` of the result is
    /// entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let values = DMatrix::from_fn(n, n, |i, j| self.values[(perm[i], perm[j])]);
        Ok(Self::from_trusted(values, self.provenance.clone()))
    }
}

/// Euclidean distances between all pairs of rows.
///
/// Rows are processed in parallel; each entry is computed by the same sequential
/// sum regardless of thread count, so the result is bitwise deterministic.
pub fn pairwise_distances(x: &DataMatrix, metric: Metric) -> DistanceMatrix {
    let n = x.rows();
    let rows: Vec<Vec<f64>> = x
        .values
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| match metric {
                    Metric::Euclidean => rows[i]
                        .iter()
                        .zip(&rows[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                })
                .collect()
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    DistanceMatrix {
        values: d,
        metric: Some(metric),
    }
}

/// `Z_ij = exp(-k · D_ij)` with the diagonal set to exactly 1.
///
/// Entries that underflow at very large `k` stay at 0.
pub fn kernel_similarity(d: &DistanceMatrix, k: KernelRate) -> SimilarityMatrix {
    let n = d.n();
    let mut z = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-k.0 * d.values[(i, j)]).exp();
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    SimilarityMatrix::from_trusted(
        z,
        Provenance::Kernel {
            k: k.0,
            metric: d.metric,
        },
    )
}

/// One invariant violation found by [`validate_similarity`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { i: usize, j: usize },
    OutOfRange { i: usize, j: usize, value: f64 },
    Asymmetry { i: usize, j: usize, magnitude: f64 },
    NonUnitDiagonal { i: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NonFinite { i, j } => write!(f, "non-finite entry at ({i},{j})"),
            Violation::OutOfRange { i, j, value } => {
                write!(f, "entry out of [0,1] at ({i},{j}): {value}")
            }
            Violation::Asymmetry { i, j, magnitude } => {
                write!(f, "asymmetry of {magnitude:.6e} at ({i},{j})")
            }
            Violation::NonUnitDiagonal { i, value } => {
                write!(f, "non-unit diagonal at ({i},{i}): {value}")
            }
        }
    }
}

/// Every invariant violated by a candidate similarity matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub n: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest `|Z_ij - Z_ji|` among reported asymmetries.
    pub fn worst_asymmetry(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .filter(|v| matches!(v, Violation::Asymmetry { .. }))
            .max_by(|a, b| magnitude(a).total_cmp(&magnitude(b)))
    }

    /// Entry furthest outside `[0, 1]`.
    pub fn worst_out_of_range(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .filter(|v| matches!(v, Violation::OutOfRange { .. }))
            .max_by(|a, b| magnitude(a).total_cmp(&magnitude(b)))
    }

    /// Diagonal entry furthest from 1.
    pub fn worst_diagonal(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .filter(|v| matches!(v, Violation::NonUnitDiagonal { .. }))
            .max_by(|a, b| magnitude(a).total_cmp(&magnitude(b)))
    }
}

fn magnitude(v: &Violation) -> f64 {
    match *v {
        Violation::NonFinite { .. } => f64::INFINITY,
        Violation::OutOfRange { value, .. } => {
            if value < 0.0 {
                -value
            } else {
                value - 1.0
            }
        }
        Violation::Asymmetry { magnitude, .. } => magnitude,
        Violation::NonUnitDiagonal { value, .. } => (value - 1.0).abs(),
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} violation(s) in {}x{} matrix",
            self.violations.len(),
            self.n,
            self.n
        )?;
        let worst = [
            self.worst_asymmetry(),
            self.worst_out_of_range(),
            self.worst_diagonal(),
        ];
        for v in worst.into_iter().flatten() {
            write!(f, "; worst {v}")?;
        }
        if let Some(v) = self
            .violations
            .iter()
            .find(|v| matches!(v, Violation::NonFinite { .. }))
        {
            write!(f, "; {v}")?;
        }
        Ok(())
    }
}

/// Result of validating a raw matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Valid(SimilarityMatrix),
    Invalid(ValidationReport),
}

impl Validation {
    pub fn into_result(self) -> core::result::Result<SimilarityMatrix, ValidationReport> {
        match self {
            Validation::Valid(z) => Ok(z),
            Validation::Invalid(r) => Err(r),
        }
    }
}

/// Checks symmetry (1e-12 absolute), unit diagonal and the `[0, 1]` range.
///
/// Valid input is returned exactly symmetric (upper triangle mirrored) with the
/// diagonal set to exactly 1. Only a non-square or empty input is an error.
pub fn validate_similarity(raw: DMatrix<f64>) -> Result<Validation> {
    let (r, c) = raw.shape();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if r == 0 {
        return Err(Error::Empty("similarity matrix"));
    }
    let mut report = ValidationReport {
        n: r,
        violations: Vec::new(),
    };
    for i in 0..r {
        for j in 0..r {
            let v = raw[(i, j)];
            if !v.is_finite() {
                report.violations.push(Violation::NonFinite { i, j });
                continue;
            }
            if i == j {
                if (v - 1.0).abs() > SYMMETRY_TOL {
                    report
                        .violations
                        .push(Violation::NonUnitDiagonal { i, value: v });
                }
                continue;
            }
            if !(0.0..=1.0).contains(&v) {
                report
                    .violations
                    .push(Violation::OutOfRange { i, j, value: v });
            }
            if j > i {
                let w = raw[(j, i)];
                if w.is_finite() && (v - w).abs() > SYMMETRY_TOL {
                    report.violations.push(Violation::Asymmetry {
                        i,
                        j,
                        magnitude: (v - w).abs(),
                    });
                }
            }
        }
    }
    if !report.is_empty() {
        return Ok(Validation::Invalid(report));
    }
    let mut z = mirror_upper(raw);
    z.fill_diagonal(1.0);
    Ok(Validation::Valid(SimilarityMatrix::from_trusted(
        z,
        Provenance::UserSupplied,
    )))
}

/// Outcome of a PSD check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    /// The threshold actually applied, `-tol · n`.
    pub threshold: f64,
}

/// PSD iff the smallest eigenvalue is at least `-tol · n`.
pub fn is_psd(z: &SimilarityMatrix, tol: f64) -> Result<PsdCheck> {
    let eig = symmetric_eigenvalues(&z.values)?;
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = -tol * z.n() as f64;
    Ok(PsdCheck {
        is_psd: min_eigenvalue >= threshold,
        min_eigenvalue,
        threshold,
    })
}

/// Expands `Z` over `m` unique elements to `Z_n` over all `n = Σ counts` observations.
///
/// Observation `i` is an instance of unique element `s(i)` and `(Z_n)_ij = Z_s(i),s(j)`.
/// Unique elements keep their input order and their copies are contiguous.
pub fn expand_to_zn(z: &SimilarityMatrix, counts: &[usize]) -> Result<SimilarityMatrix> {
    let m = z.n();
    if counts.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: counts.len(),
        });
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCount(i));
    }
    let block: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(u, &c)| core::iter::repeat_n(u, c))
        .collect();
    let n = block.len();
    let values = DMatrix::from_fn(n, n, |i, j| z.values[(block[i], block[j])]);
    Ok(SimilarityMatrix {
        values,
        provenance: Provenance::Expanded { unique: m },
        psd_status: z.psd_status,
    })
}
