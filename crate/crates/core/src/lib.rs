//! Similarity-sensitive diversity of datasets.
//!
//! Two families of effective numbers are computed from a similarity matrix `Z`:
//!
//! | Measure | Input | Order-`q` form |
//! |---------|-------|----------------|
//! | [`hill_number`] | abundance `p` | `(Σ p_i^q)^(1/(1-q))` |
//! | [`lcr_diversity`] | `p`, `Z` | `(Σ p_i (Zp)_i^(q-1))^(1/(1-q))` |
//! | [`vendi_score`] | `Z` | Hill number of the eigenvalues of `Z/n` |
//!
//! [`simkernel`] builds `Z = exp(-k · D)` from Euclidean distances, [`sweep`] varies
//! the rate `k`, and [`bounds`] checks the inequalities between the two families
//! and searches for counterexamples to `VS_q ≥ D_q` on the uniform abundance.
//!
//! ```rust
//! use simdiv::{lcr_diversity, vendi_score, Abundance, Order, SimilarityMatrix};
//!
//! let z = SimilarityMatrix::pair(0.5).unwrap();
//! let p = Abundance::uniform(2).unwrap();
//! let lcr = lcr_diversity(&p, &z, Order::SHANNON).unwrap();
//! let vs = vendi_score(&z, Order::SHANNON).unwrap();
//! assert!((lcr.value() - 4.0 / 3.0).abs() < 1e-12);
//! assert!(vs.value() > lcr.value());
//! ```

#![forbid(unsafe_code)]

pub use nalgebra::DMatrix;

pub mod bounds;
pub mod diversity;
pub mod error;
pub mod format;
pub mod generate;
pub mod optimize;
pub mod order;
pub mod simkernel;
pub mod spectral;
pub mod sweep;

pub use diversity::{
    hill_number, lcr_diversity, lcr_profile, ordinariness, Abundance, Ordinariness,
};
pub use error::{Error, Result};
pub use order::{parse_orders, EffectiveNumber, Form, Order, OrderKind};
pub use simkernel::{
    expand_to_zn, is_psd, kernel_similarity, pairwise_distances, rmsd_rate, validate_similarity,
    DataMatrix, DistanceMatrix, KernelRate, Metric, Provenance, PsdCheck, PsdStatus,
    SimilarityMatrix, Validation, ValidationReport, Violation,
};
pub use spectral::{
    eigen_spectrum, export_spectrum, spectrum_csv, spectrum_entropy_curve, vendi_from_spectrum,
    vendi_score, EigenSpectrum, SpectrumRow,
};
