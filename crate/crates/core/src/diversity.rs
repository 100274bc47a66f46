//! Hill numbers and the similarity-sensitive (LCR) diversity of order `q`.
//!
//! Both are effective numbers. With ordinariness `(Zp)_i = Σ_j Z_ij p_j`, the LCR
//! diversity is `(Σ_i p_i (Zp)_i^(q-1))^(1/(1-q))` with the usual limits at
//! `q = 1` and `q = ±∞`; sums run over the support of `p`. For `Z = I` it reduces
//! to the Hill number of `p`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::{weighted_power_mean_inverse, EffectiveNumber, Order};
use crate::simkernel::SimilarityMatrix;

/// Tolerance on `Σ p_i = 1`.
pub const ABUNDANCE_SUM_TOL: f64 = 1e-12;

/// Relative frequencies of unique elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Abundance(Vec<f64>);

impl Abundance {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Empty("abundance"));
        }
        if let Some((i, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidAbundance(format!("p[{i}] = {v}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > ABUNDANCE_SUM_TOL {
            return Err(Error::InvalidAbundance(format!(
                "entries sum to {s}, not 1"
            )));
        }
        Ok(Abundance(p))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("abundance"));
        }
        Ok(Abundance(vec![1.0 / n as f64; n]))
    }

    /// Normalizes nonnegative counts into relative frequencies.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidAbundance("counts sum to zero".into()));
        }
        Self::from_weights(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
    }

    /// Normalizes nonnegative weights by their sum.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidAbundance(format!("weights sum to {s}")));
        }
        let p: Vec<f64> = w.iter().map(|x| x / s).collect();
        if p.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidAbundance(
                "negative or non-finite weight".into(),
            ));
        }
        Ok(Abundance(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Number of elements with `p_i > 0`.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: perm.len(),
            });
        }
        Ok(Abundance(perm.iter().map(|&i| self.0[i]).collect()))
    }
}

impl TryFrom<Vec<f64>> for Abundance {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Abundance::new(p)
    }
}

impl From<Abundance> for Vec<f64> {
    fn from(p: Abundance) -> Vec<f64> {
        p.0
    }
}

/// Hill number (effective number of elements) of order `q`.
pub fn hill_number(p: &Abundance, q: Order) -> EffectiveNumber {
    let support: Vec<f64> = p.0.iter().copied().filter(|&v| v > 0.0).collect();
    EffectiveNumber::new(weighted_power_mean_inverse(&support, &support, q))
}

/// Ordinariness vector `Zp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordinariness(Vec<f64>);

impl Ordinariness {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `(Zp)_i = Σ_j Z_ij p_j`, the frequency-weighted mean similarity of element `i`.
pub fn ordinariness(p: &Abundance, z: &SimilarityMatrix) -> Result<Ordinariness> {
    if z.n() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: z.n(),
            got: p.len(),
        });
    }
    let zp = z.values() * DVector::from_column_slice(&p.0);
    Ok(Ordinariness(zp.iter().copied().collect()))
}

fn lcr_from_ordinariness(p: &Abundance, zp: &Ordinariness, q: Order) -> EffectiveNumber {
    let (w, x): (Vec<f64>, Vec<f64>) =
        p.0.iter()
            .zip(&zp.0)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &xi)| (pi, xi))
            .unzip();
    EffectiveNumber::new(weighted_power_mean_inverse(&w, &x, q))
}

/// Similarity-sensitive diversity `D_q^Z(p)` in effective-number form.
pub fn lcr_diversity(p: &Abundance, z: &SimilarityMatrix, q: Order) -> Result<EffectiveNumber> {
    let zp = ordinariness(p, z)?;
    Ok(lcr_from_ordinariness(p, &zp, q))
}

/// [`lcr_diversity`] over several orders, sharing one `Zp` product.
pub fn lcr_profile(
    p: &Abundance,
    z: &SimilarityMatrix,
    qs: &[Order],
) -> Result<Vec<(Order, EffectiveNumber)>> {
    if qs.is_empty() {
        return Err(Error::Empty("order list"));
    }
    let zp = ordinariness(p, z)?;
    Ok(qs
        .iter()
        .map(|&q| (q, lcr_from_ordinariness(p, &zp, q)))
        .collect())
}
