//! Command-line flags and the optional TOML config file that mirrors them.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use simdiv::{parse_orders, rmsd_rate, KernelRate, Order};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Feature table with a header row; one element per row.
    #[default]
    #[value(name = "features_csv", alias = "features")]
    #[serde(alias = "features_csv")]
    Features,
    /// Dense square distance matrix.
    #[value(name = "distance_csv", alias = "distance")]
    #[serde(alias = "distance_csv")]
    Distance,
    /// Dense square similarity matrix.
    #[value(name = "similarity_csv", alias = "similarity")]
    #[serde(alias = "similarity_csv")]
    Similarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPreset {
    Desk,
    Acceptance,
    Full,
}

/// Every option, settable by flag or by the same key in the config file.
/// Flags win over the file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Input CSV file(s); `sweep` accepts several.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,

    /// How to interpret the input.
    #[arg(long, value_enum, global = true)]
    pub kind: Option<InputKind>,

    /// Kernel rate: a positive number, or `rmsd` for 1/sqrt(feature count).
    #[arg(long, global = true)]
    pub k: Option<String>,

    /// Comma-separated orders, e.g. `0,1,2,inf`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub q: Option<String>,

    /// Keep a uniformly random subset of this many rows.
    #[arg(long, global = true)]
    pub subsample: Option<usize>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, global = true)]
    pub format: Option<OutputFormat>,

    /// Extra identifier column names to drop from feature tables.
    #[arg(long, global = true, value_delimiter = ',')]
    pub id_columns: Vec<String>,

    /// Multiplicities of the unique elements (comma-separated).
    #[arg(long, global = true)]
    pub counts: Option<String>,

    /// `entropy`: use Z = I, giving Hill numbers.
    #[arg(long, global = true)]
    pub identity: bool,

    /// `vendi`: also emit the eigenvalue spectrum.
    #[arg(long, global = true)]
    pub spectrum: bool,

    /// `validate`: exit with status 2 if the matrix is not PSD.
    #[arg(long, global = true)]
    pub require_psd: bool,

    /// `sweep`: explicit comma-separated k grid instead of the default bracket.
    #[arg(long, global = true)]
    pub ks: Option<String>,

    /// `sweep`: path for the correlation statistics CSV.
    #[arg(long, global = true)]
    pub stats: Option<PathBuf>,

    /// `sweep`: tolerance for the endpoint limit check.
    #[arg(long, global = true)]
    pub eps: Option<f64>,

    /// `search`: grid preset.
    #[arg(long, value_enum, global = true)]
    pub grid: Option<GridPreset>,

    /// `search`: BFGS iteration cap.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    /// `search`: path for the per-grid-point summary CSV.
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,

    /// `bench`: comma-separated matrix orders.
    #[arg(long, global = true)]
    pub sizes: Option<String>,

    /// `bench`: timed repetitions per size (at least 5).
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
}

impl Options {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills every option not set on the command line from `file`.
    pub fn merged_over(self, file: Options) -> Options {
        Options {
            input: if self.input.is_empty() {
                file.input
            } else {
                self.input
            },
            kind: self.kind.or(file.kind),
            k: self.k.or(file.k),
            q: self.q.or(file.q),
            subsample: self.subsample.or(file.subsample),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            id_columns: if self.id_columns.is_empty() {
                file.id_columns
            } else {
                self.id_columns
            },
            counts: self.counts.or(file.counts),
            identity: self.identity || file.identity,
            spectrum: self.spectrum || file.spectrum,
            require_psd: self.require_psd || file.require_psd,
            ks: self.ks.or(file.ks),
            stats: self.stats.or(file.stats),
            eps: self.eps.or(file.eps),
            grid: self.grid.or(file.grid),
            max_iter: self.max_iter.or(file.max_iter),
            summary: self.summary.or(file.summary),
            sizes: self.sizes.or(file.sizes),
            replicates: self.replicates.or(file.replicates),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn kind(&self) -> InputKind {
        self.kind.unwrap_or_default()
    }

    pub fn orders(&self, default: &str) -> anyhow::Result<Vec<Order>> {
        Ok(parse_orders(self.q.as_deref().unwrap_or(default))?)
    }

    pub fn single_input(&self) -> anyhow::Result<&Path> {
        match self.input.as_slice() {
            [one] => Ok(one),
            [] => bail!("--input is required"),
            _ => bail!("this command takes exactly one --input"),
        }
    }

    pub fn kernel_spec(&self) -> anyhow::Result<Option<KernelSpec>> {
        self.k.as_deref().map(str::parse).transpose()
    }

    pub fn count_list(&self) -> anyhow::Result<Option<Vec<usize>>> {
        self.counts
            .as_deref()
            .map(|s| parse_list(s, "counts"))
            .transpose()
    }

    pub fn k_list(&self) -> anyhow::Result<Option<Vec<f64>>> {
        self.ks.as_deref().map(|s| parse_list(s, "ks")).transpose()
    }

    pub fn size_list(&self) -> anyhow::Result<Vec<usize>> {
        parse_list(self.sizes.as_deref().unwrap_or("100,200,400"), "sizes")
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    let v = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| anyhow::anyhow!("invalid {what} entry {t:?}"))
        })
        .collect::<anyhow::Result<Vec<T>>>()?;
    if v.is_empty() {
        bail!("empty {what} list");
    }
    Ok(v)
}

/// Kernel rate as given by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Rate(KernelRate),
    /// `1/sqrt(d)` for `d` features.
    Rmsd,
}

impl KernelSpec {
    pub fn resolve(self, features: Option<usize>) -> anyhow::Result<KernelRate> {
        match (self, features) {
            (KernelSpec::Rate(k), _) => Ok(k),
            (KernelSpec::Rmsd, Some(d)) => Ok(rmsd_rate(d)?),
            (KernelSpec::Rmsd, None) => {
                bail!("--k rmsd needs a feature table to know the dimension")
            }
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if s.trim().eq_ignore_ascii_case("rmsd") {
            return Ok(KernelSpec::Rmsd);
        }
        let v: f64 = s
            .trim()
            .parse()
            .with_context(|| format!("invalid kernel rate {s:?}"))?;
        Ok(KernelSpec::Rate(KernelRate::new(v)?))
    }
}
