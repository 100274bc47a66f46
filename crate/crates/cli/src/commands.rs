//! The subcommands. Each returns a [`Report`]; nothing here touches the process
//! exit code or stdout directly, so commands can be driven from tests.

use std::fmt::{self, Write as _};
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;
use simdiv::bounds::{
    conjecture1_gap, counterexample_search, lemma_negative_q, summarize, summary_csv,
    theorem2_reverse_bound, theorem_q2_q3_qinf, SearchConfig, SearchGrid, SearchStatus, Verdict,
    FULL_RANK_TOL,
};
use simdiv::format::{fmt17, fmt6};
use simdiv::spectral::symmetric_eigenvalues;
use simdiv::sweep::{default_grid, limit_check, sweep_half_distance, SweepDataset};
use simdiv::{
    eigen_spectrum, expand_to_zn, export_spectrum, hill_number, is_psd, kernel_similarity,
    lcr_diversity, pairwise_distances, spectrum_csv, validate_similarity, vendi_from_spectrum,
    Abundance, DMatrix, DistanceMatrix, Metric, Order, SimilarityMatrix, Validation,
    ValidationReport,
};

use crate::bench::run_bench;
use crate::config::{GridPreset, InputKind, Options, OutputFormat};
use crate::io::{load_features, load_matrix, DropReason, FeatureOptions};

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success = 0,
    ValidationFailure = 2,
    ProvenBoundViolation = 3,
    CounterexampleCandidate = 4,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// What a command produced: the primary output, diagnostics for stderr, and the
/// exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub output: String,
    pub notes: Vec<String>,
    pub status: Status,
}

impl Report {
    fn new(output: String) -> Self {
        Report {
            output,
            notes: Vec::new(),
            status: Status::Success,
        }
    }

    fn escalate(&mut self, status: Status) {
        self.status = self.status.max(status);
    }
}

/// Input that failed similarity validation. Maps to exit status 2.
#[derive(Debug)]
pub struct ValidationFailed(pub ValidationReport);

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid similarity matrix: {}", self.0)
    }
}

impl std::error::Error for ValidationFailed {}

/// Exit status for an error returned by a command: 2 for bad input data, 1 otherwise.
pub fn error_code(err: &anyhow::Error) -> u8 {
    use simdiv::Error as E;
    for cause in err.chain() {
        if cause.is::<ValidationFailed>() {
            return Status::ValidationFailure.code();
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NonFinite { .. }
                | E::NotSquare { .. }
                | E::DimensionMismatch { .. }
                | E::Empty(_)
                | E::InvalidAbundance(_)
                | E::InvalidSimilarity(_)
                | E::ZeroCount(_) => Status::ValidationFailure.code(),
                _ => 1,
            };
        }
    }
    1
}

/// Orders at which `VS_q ≥ D_q` is a theorem rather than a conjecture.
fn is_proven_order(q: Order) -> bool {
    q.is_infinite() && q.value() > 0.0 || q.value() == 2.0 || q.value() == 3.0
}

fn violation_status(q: Order) -> Status {
    if is_proven_order(q) {
        Status::ProvenBoundViolation
    } else {
        Status::CounterexampleCandidate
    }
}

/// A similarity matrix built from the configured input, with any diagnostics.
pub struct Loaded {
    pub z: SimilarityMatrix,
    pub notes: Vec<String>,
}

fn feature_options(opts: &Options) -> FeatureOptions {
    FeatureOptions {
        id_columns: opts.id_columns.clone(),
        subsample: opts.subsample,
        seed: opts.seed(),
    }
}

fn describe_drops(dropped: &[(String, DropReason)]) -> Option<String> {
    if dropped.is_empty() {
        return None;
    }
    let list: Vec<String> = dropped
        .iter()
        .map(|(name, why)| match why {
            DropReason::Identifier => format!("{name} (identifier)"),
            DropReason::NonNumeric => format!("{name} (non-numeric)"),
        })
        .collect();
    Some(format!("dropped columns: {}", list.join(", ")))
}

/// Distances from a features or distance CSV, plus the feature count when known.
fn load_distances(
    path: &Path,
    opts: &Options,
    notes: &mut Vec<String>,
) -> anyhow::Result<(DistanceMatrix, Option<usize>)> {
    match opts.kind() {
        InputKind::Features => {
            let table = load_features(path, &feature_options(opts))?;
            notes.extend(describe_drops(&table.dropped));
            if table.rows.len() < table.data.rows() || opts.subsample.is_some() {
                notes.push(format!("using {} rows", table.rows.len()));
            }
            Ok((
                pairwise_distances(&table.data, Metric::Euclidean),
                Some(table.data.cols()),
            ))
        }
        InputKind::Distance => {
            let d = DistanceMatrix::new(load_matrix(path)?)
                .with_context(|| format!("distance matrix {}", path.display()))?;
            Ok((d, None))
        }
        InputKind::Similarity => bail!("a distance or feature input is required here"),
    }
}

pub fn load_similarity(opts: &Options) -> anyhow::Result<Loaded> {
    let path = opts.single_input()?;
    let mut notes = Vec::new();
    let z = match opts.kind() {
        InputKind::Similarity => match validate_similarity(load_matrix(path)?)? {
            Validation::Valid(z) => z,
            Validation::Invalid(report) => return Err(ValidationFailed(report).into()),
        },
        InputKind::Features | InputKind::Distance => {
            let Some(spec) = opts.kernel_spec()? else {
                bail!("--k is required unless the input is a similarity matrix");
            };
            let (d, features) = load_distances(path, opts, &mut notes)?;
            kernel_similarity(&d, spec.resolve(features)?)
        }
    };
    Ok(Loaded { z, notes })
}

fn abundance_for(opts: &Options, n: usize) -> anyhow::Result<Abundance> {
    match opts.count_list()? {
        Some(c) if c.len() != n => bail!("{} counts given for {n} elements", c.len()),
        Some(c) => Ok(Abundance::from_counts(&c)?),
        None => Ok(Abundance::uniform(n)?),
    }
}

/// A table of numbers keyed by order, rendered per the output format.
struct OrderTable {
    columns: Vec<&'static str>,
    rows: Vec<(Order, Vec<f64>)>,
}

impl OrderTable {
    fn render(&self, format: Option<OutputFormat>) -> anyhow::Result<String> {
        let mut out = String::new();
        match format {
            Some(OutputFormat::Csv) => {
                writeln!(out, "q,{}", self.columns.join(","))?;
                for (q, vals) in &self.rows {
                    let cells: Vec<String> = vals.iter().map(|&v| fmt17(v)).collect();
                    writeln!(out, "{q},{}", cells.join(","))?;
                }
            }
            Some(OutputFormat::Json) => {
                let objs: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|(q, vals)| {
                        let mut m = serde_json::Map::new();
                        m.insert(
                            "q".into(),
                            serde_json::to_value(q).expect("order serializes"),
                        );
                        for (c, &v) in self.columns.iter().zip(vals) {
                            m.insert((*c).into(), json_number(v));
                        }
                        serde_json::Value::Object(m)
                    })
                    .collect();
                out = serde_json::to_string_pretty(&objs)?;
                out.push('\n');
            }
            None => {
                write!(out, "{:>8}", "q")?;
                for c in &self.columns {
                    write!(out, " {c:>14}")?;
                }
                out.push('\n');
                for (q, vals) in &self.rows {
                    write!(out, "{:>8}", q.to_string())?;
                    for &v in vals {
                        write!(out, " {:>14}", fmt6(v))?;
                    }
                    out.push('\n');
                }
            }
        }
        Ok(out)
    }
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or_else(
        || serde_json::Value::String(fmt17(v)),
        serde_json::Value::Number,
    )
}

/// The format to use: explicit, else CSV when writing to a file, else a human table.
fn effective_format(opts: &Options) -> Option<OutputFormat> {
    opts.format.or(opts.out.as_ref().map(|_| OutputFormat::Csv))
}

pub fn cmd_entropy(opts: &Options) -> anyhow::Result<Report> {
    let qs = opts.orders("0,1,2,inf")?;
    let loaded = if opts.input.is_empty() && opts.identity {
        None
    } else {
        Some(load_similarity(opts)?)
    };
    let n = match (&loaded, opts.count_list()?) {
        (Some(l), _) => l.z.n(),
        (None, Some(c)) => c.len(),
        (None, None) => bail!("--identity without --input needs --counts"),
    };
    let p = abundance_for(opts, n)?;

    let mut columns = Vec::new();
    if loaded.is_some() {
        columns.push("lcr");
    }
    if opts.identity {
        columns.push("hill");
    }
    let mut rows = Vec::with_capacity(qs.len());
    for &q in &qs {
        let mut vals = Vec::new();
        if let Some(l) = &loaded {
            vals.push(lcr_diversity(&p, &l.z, q)?.value());
        }
        if opts.identity {
            vals.push(hill_number(&p, q).value());
        }
        rows.push((q, vals));
    }
    let mut report = Report::new(OrderTable { columns, rows }.render(effective_format(opts))?);
    if let Some(l) = loaded {
        report.notes = l.notes;
    }
    Ok(report)
}

/// `Z`, expanded to one row per observation when counts are given.
fn observation_similarity(opts: &Options) -> anyhow::Result<Loaded> {
    let mut loaded = load_similarity(opts)?;
    if let Some(c) = opts.count_list()? {
        loaded.z = expand_to_zn(&loaded.z, &c)?;
        loaded
            .notes
            .push(format!("expanded to {} observations", loaded.z.n()));
    }
    Ok(loaded)
}

pub fn cmd_vendi(opts: &Options) -> anyhow::Result<Report> {
    let qs = opts.orders("0,1,2,inf")?;
    let loaded = observation_similarity(opts)?;
    let spectrum = eigen_spectrum(&loaded.z)?;
    let rows: Vec<(Order, Vec<f64>)> = qs
        .iter()
        .map(|&q| (q, vec![vendi_from_spectrum(&spectrum, q).value()]))
        .collect();
    let table = OrderTable {
        columns: vec!["vs"],
        rows,
    };

    let mut notes = loaded.notes;
    if spectrum.materially_non_psd() {
        notes.push(format!(
            "warning: Z is materially non-PSD (eigenvalue {} of Z/n); VS is ill-defined",
            fmt6(spectrum.min_raw())
        ));
    }
    if spectrum.truncated() > 0 {
        notes.push(format!(
            "{} eigenvalue(s) at or below 1e-12 dropped",
            spectrum.truncated()
        ));
    }
    let mut report = if opts.spectrum {
        notes.push(table.render(None)?.trim_end().to_string());
        Report::new(spectrum_csv(&export_spectrum(&spectrum)))
    } else {
        Report::new(table.render(effective_format(opts))?)
    };
    report.notes = notes;
    Ok(report)
}

pub fn cmd_spectrum(opts: &Options) -> anyhow::Result<Report> {
    let loaded = observation_similarity(opts)?;
    let spectrum = eigen_spectrum(&loaded.z)?;
    let mut report = Report::new(spectrum_csv(&export_spectrum(&spectrum)));
    report.notes = loaded.notes;
    if spectrum.materially_non_psd() {
        report.notes.push(format!(
            "warning: Z is materially non-PSD (eigenvalue {})",
            fmt6(spectrum.min_raw())
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub q: Option<Order>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateSummary {
    pub n: usize,
    pub valid: bool,
    pub problems: Option<String>,
    pub psd: Option<bool>,
    pub min_eigenvalue: Option<f64>,
    pub psd_threshold: Option<f64>,
    pub checks: Vec<CheckRow>,
}

/// Validates the input and, on PSD matrices, evaluates the proven bounds and
/// `VS_q ≥ D_q` at the requested orders.
pub fn cmd_validate(opts: &Options) -> anyhow::Result<Report> {
    let mut notes = Vec::new();
    let z = match opts.kind() {
        InputKind::Similarity => {
            let raw: DMatrix<f64> = load_matrix(opts.single_input()?)?;
            let n = raw.nrows();
            match validate_similarity(raw)? {
                Validation::Valid(z) => z,
                Validation::Invalid(report) => {
                    let summary = ValidateSummary {
                        n,
                        valid: false,
                        problems: Some(report.to_string()),
                        psd: None,
                        min_eigenvalue: None,
                        psd_threshold: None,
                        checks: Vec::new(),
                    };
                    let mut out = Report::new(render_validate(&summary, opts.format)?);
                    out.escalate(Status::ValidationFailure);
                    return Ok(out);
                }
            }
        }
        _ => {
            let l = load_similarity(opts)?;
            notes = l.notes;
            l.z
        }
    };

    let psd = is_psd(&z, simdiv::simkernel::DEFAULT_PSD_TOL)?;
    let mut checks = Vec::new();
    let mut status = Status::Success;
    if psd.is_psd {
        for g in theorem_q2_q3_qinf(&z)? {
            if g.verdict.is_violated() {
                status = status.max(Status::ProvenBoundViolation);
            }
            checks.push(CheckRow {
                check: "theorem",
                q: Some(g.q),
                lhs: g.vs_value,
                rhs: g.lcr_value,
                gap: g.gap,
                verdict: g.verdict,
            });
        }
        let rb = theorem2_reverse_bound(&z)?;
        if rb.verdict.is_violated() {
            status = status.max(Status::ProvenBoundViolation);
        }
        checks.push(CheckRow {
            check: "reverse_bound",
            q: Some(Order::SHANNON),
            lhs: rb.bound,
            rhs: rb.vs1,
            gap: rb.gap,
            verdict: rb.verdict,
        });
        let lambda_min = *symmetric_eigenvalues(z.values())?.last().expect("nonempty");
        if lambda_min > FULL_RANK_TOL {
            for q in [Order::new(0.0)?, Order::new(-1.0)?, Order::NEG_INFINITY] {
                let l = lemma_negative_q(&z, q)?;
                if l.verdict.is_violated() {
                    status = status.max(Status::ProvenBoundViolation);
                }
                checks.push(CheckRow {
                    check: "lemma",
                    q: Some(q),
                    lhs: l.vs_value,
                    rhs: l.lcr_value,
                    gap: l.vs_value - l.lcr_value,
                    verdict: l.verdict,
                });
            }
        } else {
            notes.push("Z is rank deficient; negative-order lemma skipped".into());
        }
        for q in opts.orders("0,0.5,1,2,3,10,inf")? {
            let g = conjecture1_gap(&z, q)?;
            if g.verdict.is_violated() {
                status = status.max(violation_status(q));
            }
            checks.push(CheckRow {
                check: "conjecture1",
                q: Some(q),
                lhs: g.vs_value,
                rhs: g.lcr_value,
                gap: g.gap,
                verdict: g.verdict,
            });
        }
    } else {
        notes.push("Z is not PSD; bound checks skipped".into());
        if opts.require_psd {
            status = Status::ValidationFailure;
        }
    }

    let summary = ValidateSummary {
        n: z.n(),
        valid: true,
        problems: None,
        psd: Some(psd.is_psd),
        min_eigenvalue: Some(psd.min_eigenvalue),
        psd_threshold: Some(psd.threshold),
        checks,
    };
    let mut report = Report::new(render_validate(&summary, opts.format)?);
    report.notes = notes;
    report.escalate(status);
    Ok(report)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::NearZero => "near_zero",
    }
}

fn render_validate(s: &ValidateSummary, format: Option<OutputFormat>) -> anyhow::Result<String> {
    let mut out = String::new();
    match format {
        Some(OutputFormat::Json) => {
            out = serde_json::to_string_pretty(s)?;
            out.push('\n');
        }
        Some(OutputFormat::Csv) => {
            writeln!(out, "check,q,lhs,rhs,gap,verdict")?;
            for c in &s.checks {
                let q = c.q.map(|q| q.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{q},{},{},{},{}",
                    c.check,
                    fmt17(c.lhs),
                    fmt17(c.rhs),
                    fmt17(c.gap),
                    verdict_name(c.verdict)
                )?;
            }
        }
        None => {
            writeln!(out, "n: {}", s.n)?;
            match &s.problems {
                Some(p) => writeln!(out, "valid: no ({p})")?,
                None => writeln!(out, "valid: yes")?,
            }
            if let (Some(psd), Some(min), Some(thr)) = (s.psd, s.min_eigenvalue, s.psd_threshold) {
                writeln!(
                    out,
                    "psd: {} (min eigenvalue {}, threshold {})",
                    if psd { "yes" } else { "no" },
                    fmt6(min),
                    fmt6(thr)
                )?;
            }
            if !s.checks.is_empty() {
                writeln!(
                    out,
                    "{:<14} {:>6} {:>14} {:>14} {:>14}  verdict",
                    "check", "q", "lhs", "rhs", "gap"
                )?;
                for c in &s.checks {
                    let q = c.q.map(|q| q.to_string()).unwrap_or_default();
                    writeln!(
                        out,
                        "{:<14} {q:>6} {:>14} {:>14} {:>14}  {}",
                        c.check,
                        fmt6(c.lhs),
                        fmt6(c.rhs),
                        fmt6(c.gap),
                        verdict_name(c.verdict)
                    )?;
                }
            }
        }
    }
    Ok(out)
}

fn dataset_id(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

pub fn cmd_sweep(opts: &Options) -> anyhow::Result<Report> {
    if opts.input.is_empty() {
        bail!("--input is required");
    }
    let qs = opts.orders("1")?;
    let mut notes = Vec::new();
    let mut datasets = Vec::with_capacity(opts.input.len());
    for path in &opts.input {
        let (d, _) = load_distances(path, opts, &mut notes)?;
        datasets.push(SweepDataset::new(dataset_id(path), d));
    }
    if let Some(c) = opts.count_list()? {
        if datasets.len() != 1 {
            bail!("--counts applies to a single input");
        }
        datasets[0].counts = Some(c);
    }
    let ks = match opts.k_list()? {
        Some(ks) => ks,
        None => default_grid(&datasets)?,
    };
    let result = sweep_half_distance(&datasets, &ks, &qs)?;

    let mut report = Report::new(match opts.format {
        Some(OutputFormat::Json) => serde_json::to_string_pretty(&result)? + "\n",
        _ => result.cells_csv(),
    });
    for cell in &result.cells {
        if let Some(e) = &cell.error {
            notes.push(format!(
                "{} k={} q={}: {e}",
                cell.dataset,
                fmt6(cell.k),
                cell.q
            ));
        }
        if let (Some(lcr), Some(vs)) = (cell.lcr, cell.vs) {
            let gap = vs - lcr;
            if gap < -simdiv::bounds::GAP_TOL * lcr.max(1.0) {
                notes.push(format!(
                    "{} k={} q={}: VS {} below LCR {}",
                    cell.dataset,
                    fmt17(cell.k),
                    cell.q,
                    fmt17(vs),
                    fmt17(lcr)
                ));
                report.escalate(violation_status(cell.q));
            }
        }
    }
    if let Some(path) = &opts.stats {
        std::fs::write(path, result.stats_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let eps = opts.eps.unwrap_or(1e-4);
    for ds in datasets
        .iter()
        .filter(|ds| ds.counts.is_none() && ds.distances.n() >= 2)
    {
        for &q in qs.iter().filter(|q| q.value() > 0.0) {
            let lc = limit_check(&ds.distances, eps, q)?;
            notes.push(format!(
                "{} q={q}: k={} lcr={} vs={} (want 1); k={} lcr={} vs={} (want {}){}",
                ds.id,
                fmt6(lc.k_small),
                fmt6(lc.lcr_small),
                fmt6(lc.vs_small),
                fmt6(lc.k_large),
                fmt6(lc.lcr_large),
                fmt6(lc.vs_large),
                lc.n,
                if lc.passed() {
                    ""
                } else {
                    " [limit not reached]"
                }
            ));
        }
    }
    report.notes = notes;
    Ok(report)
}

pub fn cmd_search(opts: &Options) -> anyhow::Result<Report> {
    let seed = opts.seed();
    let grid = match opts.grid.unwrap_or(GridPreset::Desk) {
        GridPreset::Desk => SearchGrid::desk(seed),
        GridPreset::Acceptance => SearchGrid::acceptance(seed),
        GridPreset::Full => SearchGrid::full(seed),
    };
    let mut cfg = SearchConfig::default();
    if let Some(m) = opts.max_iter {
        cfg.bfgs.max_iterations = m;
    }
    let records = counterexample_search(&grid, &cfg)?;

    let mut output = String::new();
    for r in &records {
        output.push_str(&serde_json::to_string(r)?);
        output.push('\n');
    }
    let mut report = Report::new(output);
    let summary = summarize(&records);
    if let Some(path) = &opts.summary {
        std::fs::write(path, summary_csv(&summary))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let failed = records
        .iter()
        .filter(|r| r.status == SearchStatus::Failed)
        .count();
    let candidates: Vec<_> = records
        .iter()
        .filter(|r| r.status == SearchStatus::CounterexampleCandidate)
        .collect();
    let min_gap = records
        .iter()
        .filter_map(|r| r.gap)
        .fold(f64::INFINITY, f64::min);
    report.notes.push(format!(
        "{} minimizations, {failed} failed, {} counterexample candidates, min gap {}",
        records.len(),
        candidates.len(),
        fmt17(min_gap)
    ));
    for c in candidates {
        report.notes.push(format!(
            "candidate: index {} q={} n={} r={} scale={} gap {}",
            c.index,
            c.q,
            c.n,
            c.r,
            c.scale,
            c.confirmed_gap.or(c.gap).map_or("n/a".into(), fmt17)
        ));
        report.escalate(violation_status(c.q));
    }
    Ok(report)
}

pub fn cmd_bench(opts: &Options) -> anyhow::Result<Report> {
    let records = run_bench(
        &opts.size_list()?,
        opts.replicates.unwrap_or(5),
        opts.seed(),
    )?;
    let mut out = String::new();
    match opts.format {
        Some(OutputFormat::Json) => {
            out = serde_json::to_string_pretty(&records)? + "\n";
        }
        Some(OutputFormat::Csv) => {
            writeln!(out, "n,lcr_time,vs_time,replicates,lcr,vs")?;
            for r in &records {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.n,
                    fmt17(r.lcr_time),
                    fmt17(r.vs_time),
                    r.replicates,
                    fmt17(r.lcr_value),
                    fmt17(r.vs_value)
                )?;
            }
        }
        None => {
            writeln!(
                out,
                "{:>8} {:>14} {:>14} {:>10}",
                "n", "lcr_time_s", "vs_time_s", "replicates"
            )?;
            for r in &records {
                writeln!(
                    out,
                    "{:>8} {:>14} {:>14} {:>10}",
                    r.n,
                    fmt6(r.lcr_time),
                    fmt6(r.vs_time),
                    r.replicates
                )?;
            }
        }
    }
    Ok(Report::new(out))
}
