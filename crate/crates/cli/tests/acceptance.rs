//! Acceptance criteria, run sequentially without the libtest harness. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simdiv::bounds::{
    conjecture1_gap, counterexample_search, lemma_negative_q, theorem2_reverse_bound,
    theorem_q2_q3_qinf, vs2_closed_form, vs3_closed_form, SearchConfig, SearchGrid, SearchStatus,
    FULL_RANK_TOL,
};
use simdiv::generate::{random_abundance, random_data, random_gram_instance, two_clusters};
use simdiv::spectral::symmetric_eigenvalues;
use simdiv::sweep::{limit_check, sweep_half_distance, SweepDataset};
use simdiv::{
    expand_to_zn, hill_number, kernel_similarity, lcr_diversity, pairwise_distances, vendi_score,
    Abundance, DMatrix, DataMatrix, DistanceMatrix, KernelRate, Metric, Order, SimilarityMatrix,
};
use simdiv_cli::bench::run_bench;

const INSTANCES: usize = 1000;
const SEED: u64 = 20_240_917;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn ord(q: f64) -> Order {
    Order::new(q).unwrap()
}

fn instances() -> Vec<SimilarityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..INSTANCES)
        .map(|_| random_gram_instance(&mut rng, 2, 50))
        .collect()
}

fn closed_forms(zs: &[SimilarityMatrix]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for z in zs {
        worst = worst.max(rel_err(
            vendi_score(z, ord(2.0)).unwrap().value(),
            vs2_closed_form(z),
        ));
        worst = worst.max(rel_err(
            vendi_score(z, ord(3.0)).unwrap().value(),
            vs3_closed_form(z),
        ));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(60),
        format!(
            "{} instances, max relative error {worst:.3e}, {:.2?}",
            zs.len(),
            elapsed
        ),
    )
}

fn proven_bounds(zs: &[SimilarityMatrix]) -> Outcome {
    let mut min_theorem = f64::INFINITY;
    let mut min_reverse = f64::INFINITY;
    let mut min_lemma = f64::INFINITY;
    let mut full_rank = 0;
    let negative = [ord(0.0), ord(-1.0), Order::NEG_INFINITY];
    for z in zs {
        for g in theorem_q2_q3_qinf(z).unwrap() {
            min_theorem = min_theorem.min(g.gap);
        }
        min_reverse = min_reverse.min(theorem2_reverse_bound(z).unwrap().gap);
        let lambda_min = *symmetric_eigenvalues(z.values()).unwrap().last().unwrap();
        if lambda_min > FULL_RANK_TOL {
            full_rank += 1;
            for q in negative {
                let l = lemma_negative_q(z, q).unwrap();
                let n = l.n as f64;
                min_lemma = min_lemma.min((l.vs_value - n).min(n - l.lcr_value));
            }
        }
    }
    let ok = min_theorem >= -1e-9 && min_reverse >= -1e-9 && min_lemma >= -1e-9 && full_rank > 0;
    outcome(
        ok,
        format!(
            "min gap: q=2,3,inf {min_theorem:.3e}; reverse {min_reverse:.3e}; lemma {min_lemma:.3e} on {full_rank} full-rank instances"
        ),
    )
}

fn findings_path() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("conjecture1-findings.jsonl")
}

fn conjecture1(zs: &[SimilarityMatrix]) -> Outcome {
    let qs = [0.0, 0.5, 1.0, 2.0, 3.0, 10.0, f64::INFINITY].map(ord);
    let mut min_gap = f64::INFINITY;
    let mut findings = Vec::new();
    for (idx, z) in zs.iter().enumerate() {
        for q in qs {
            let g = conjecture1_gap(z, q).unwrap();
            min_gap = min_gap.min(g.gap);
            if g.gap < -1e-9 {
                let row_major: Vec<f64> = z.values().transpose().as_slice().to_vec();
                findings.push(serde_json::json!({
                    "instance": idx, "n": z.n(), "q": q, "gap": g.gap,
                    "vs": g.vs_value, "lcr": g.lcr_value, "z": row_major,
                }));
            }
        }
    }
    let path = findings_path();
    let mut file = fs::File::create(&path).unwrap();
    for f in &findings {
        writeln!(file, "{f}").unwrap();
    }
    outcome(
        findings.is_empty(),
        format!(
            "{} instances x {} orders, min gap {min_gap:.3e}, {} violations (written to {})",
            zs.len(),
            qs.len(),
            findings.len(),
            path.display()
        ),
    )
}

fn search() -> Outcome {
    let grid = SearchGrid::acceptance(SEED);
    let start = Instant::now();
    let records = counterexample_search(&grid, &SearchConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let candidates = records
        .iter()
        .filter(|r| r.status == SearchStatus::CounterexampleCandidate)
        .count();
    let failed = records
        .iter()
        .filter(|r| r.status == SearchStatus::Failed)
        .count();
    let min_gap = records
        .iter()
        .filter_map(|r| r.gap)
        .fold(f64::INFINITY, f64::min);
    outcome(
        candidates == 0 && elapsed < Duration::from_secs(600),
        format!(
            "{} minimizations in {elapsed:.2?}, {candidates} candidates, {failed} failed, min gap {min_gap:.3e}",
            records.len()
        ),
    )
}

fn line_points(n: usize) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(n, 1, |i, _| i as f64 * 0.37)).unwrap()
}

/// Synthetic datasets of a common size.
fn corpus() -> Vec<(String, DistanceMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let n = 24;
    let data = vec![
        ("gauss_d2".to_string(), random_data(&mut rng, n, 2)),
        ("gauss_d8".to_string(), random_data(&mut rng, n, 8)),
        ("gauss_d32".to_string(), random_data(&mut rng, n, 32)),
        (
            "clusters_near".to_string(),
            two_clusters(&mut rng, n / 2, 3, 1.0),
        ),
        (
            "clusters_far".to_string(),
            two_clusters(&mut rng, n / 2, 3, 25.0),
        ),
        ("line".to_string(), line_points(n)),
    ];
    data.into_iter()
        .map(|(id, x)| (id, pairwise_distances(&x, Metric::Euclidean)))
        .collect()
}

fn half_distance_limits() -> Outcome {
    let eps = 1e-4;
    let qs = [0.5, 1.0, 2.0, f64::INFINITY].map(ord);
    let mut datasets = corpus();
    let pair = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
    let mut limit_sets = datasets.clone();
    limit_sets.push((
        "two_points".into(),
        pairwise_distances(&pair, Metric::Euclidean),
    ));

    let mut failures = Vec::new();
    let mut k_tiny = f64::INFINITY;
    let mut k_huge: f64 = 0.0;
    for (id, d) in &limit_sets {
        for q in qs {
            let r = limit_check(d, eps, q).unwrap();
            if !r.passed() {
                failures.push(format!("{id} q={q}"));
            }
            k_tiny = k_tiny.min(r.k_small);
            k_huge = k_huge.max(r.k_large);
        }
    }

    let ks = [k_tiny * 1e-3, 0.1, 1.0, 10.0, k_huge * 100.0];
    let sweep_sets: Vec<SweepDataset> = datasets
        .drain(..)
        .map(|(id, d)| SweepDataset::new(id, d))
        .collect();
    let result = sweep_half_distance(&sweep_sets, &ks, &qs).unwrap();
    let mut extremes_ok = true;
    for cell in &result.stats {
        if cell.k == ks[0] || cell.k == ks[ks.len() - 1] {
            let unit = cell
                .stats
                .as_ref()
                .is_some_and(|s| s.pearson == 1.0 && s.r_squared == 1.0);
            if !(cell.degenerate && unit) {
                extremes_ok = false;
                failures.push(format!(
                    "stats at k={:e} q={} not flagged degenerate",
                    cell.k, cell.q
                ));
            }
        }
    }
    outcome(
        failures.is_empty() && extremes_ok,
        format!(
            "{} datasets x {} orders at eps {eps:e}; R² flagged degenerate at both extremes: {extremes_ok}{}",
            limit_sets.len(),
            qs.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

fn pair_battery() -> Outcome {
    let z = SimilarityMatrix::pair(0.5).unwrap();
    let p = Abundance::uniform(2).unwrap();
    let lcr = |q: Order| lcr_diversity(&p, &z, q).unwrap().value();
    let vs = |q: Order| vendi_score(&z, q).unwrap().value();
    let checks = [
        ("D1", lcr(Order::SHANNON), 4.0 / 3.0),
        ("D2", lcr(ord(2.0)), 4.0 / 3.0),
        ("Dinf", lcr(Order::INFINITY), 4.0 / 3.0),
        ("VS1", vs(Order::SHANNON), 1.754_765_350_603_323_3),
        ("VS2", vs(ord(2.0)), 1.6),
        ("VSinf", vs(Order::INFINITY), 4.0 / 3.0),
    ];
    let worst = checks
        .iter()
        .map(|(_, got, want)| (got - want).abs())
        .fold(0.0, f64::max);
    let bad: Vec<&str> = checks
        .iter()
        .filter(|(_, g, w)| (g - w).abs() > 1e-9)
        .map(|c| c.0)
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "6 values, max abs error {worst:.3e}{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; off: {bad:?}")
            }
        ),
    )
}

fn reduction_and_monotonicity() -> Outcome {
    const RUNS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let qs = [
        f64::NEG_INFINITY,
        -2.0,
        -1.0,
        0.0,
        0.5,
        1.0,
        2.0,
        3.0,
        10.0,
        f64::INFINITY,
    ]
    .map(ord);
    let mut problems = Vec::new();

    let mut worst_reduction: f64 = 0.0;
    for _ in 0..RUNS {
        let n = rng.random_range(1..=30);
        let p = random_abundance(&mut rng, n, 0.3);
        let id = SimilarityMatrix::identity(n);
        for q in qs {
            worst_reduction = worst_reduction.max(rel_err(
                lcr_diversity(&p, &id, q).unwrap().value(),
                hill_number(&p, q).value(),
            ));
        }
    }
    if worst_reduction > 1e-9 {
        problems.push(format!("LCR(I) vs Hill rel err {worst_reduction:.3e}"));
    }

    let mut below_hill = 0;
    let mut q_monotone = 0;
    for _ in 0..RUNS {
        let z = random_gram_instance(&mut rng, 2, 30);
        let p = random_abundance(&mut rng, z.n(), 0.2);
        let uniform = Abundance::uniform(z.n()).unwrap();
        let mut prev_lcr = f64::INFINITY;
        let mut prev_lcr_u = f64::INFINITY;
        let mut prev_vs = f64::INFINITY;
        for q in qs {
            let lcr = lcr_diversity(&p, &z, q).unwrap().value();
            let lcr_u = lcr_diversity(&uniform, &z, q).unwrap().value();
            let vs = vendi_score(&z, q).unwrap().value();
            if lcr > hill_number(&p, q).value() * (1.0 + 1e-9) {
                below_hill += 1;
            }
            if lcr > prev_lcr * (1.0 + 1e-9)
                || lcr_u > prev_lcr_u * (1.0 + 1e-9)
                || vs > prev_vs * (1.0 + 1e-9)
            {
                q_monotone += 1;
            }
            (prev_lcr, prev_lcr_u, prev_vs) = (lcr, lcr_u, vs);
        }
    }
    if below_hill > 0 {
        problems.push(format!("{below_hill} cases of LCR > Hill"));
    }
    if q_monotone > 0 {
        problems.push(format!("{q_monotone} increases in q"));
    }

    let ks: Vec<f64> = (0..12).map(|i| 0.02 * 1.8f64.powi(i)).collect();
    let k_orders = [
        f64::NEG_INFINITY,
        -1.0,
        0.0,
        0.5,
        1.0,
        2.0,
        3.0,
        f64::INFINITY,
    ]
    .map(ord);
    let mut k_monotone = 0;
    let mut vs_negative_falls = 0;
    for _ in 0..RUNS {
        let n = rng.random_range(2..=25);
        let d = rng.random_range(1..=6);
        let dist = pairwise_distances(&random_data(&mut rng, n, d), Metric::Euclidean);
        let p = random_abundance(&mut rng, n, 0.0);
        let mut prev = vec![(0.0, 0.0); k_orders.len()];
        for &k in &ks {
            let z = kernel_similarity(&dist, KernelRate::new(k).unwrap());
            for (slot, &q) in prev.iter_mut().zip(&k_orders) {
                let lcr = lcr_diversity(&p, &z, q).unwrap().value();
                let vs = vendi_score(&z, q).unwrap().value();
                if lcr < slot.0 * (1.0 - 1e-9) {
                    k_monotone += 1;
                }
                if vs < slot.1 * (1.0 - 1e-9) {
                    if q.value() >= 0.0 {
                        k_monotone += 1;
                    } else {
                        vs_negative_falls += 1;
                    }
                }
                *slot = (lcr, vs);
            }
        }
    }
    if k_monotone > 0 {
        problems.push(format!("{k_monotone} decreases in k"));
    }

    outcome(
        problems.is_empty(),
        format!(
            "{RUNS} instances per suite over {} orders; reduction max rel err {worst_reduction:.3e}; \
             k checked for LCR at all orders and VS at q >= 0 ({vs_negative_falls} VS decreases at q < 0){}",
            qs.len(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn bench_direction() -> Outcome {
    let recs = run_bench(&[1000, 2000], 5, SEED).unwrap();
    let (small, large) = (&recs[0], &recs[1]);
    let ratio = large.vs_time / small.vs_time;
    outcome(
        large.vs_time > large.lcr_time,
        format!(
            "n=2000 medians over 5 runs: VS {:.4}s, LCR {:.6}s; VS time ratio n=2000/n=1000 {ratio:.2}",
            large.vs_time, large.lcr_time
        ),
    )
}

fn repeat_rows(x: &DataMatrix, counts: &[usize]) -> DataMatrix {
    let idx: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
        .collect();
    x.select_rows(&idx).unwrap()
}

fn zn_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let qs = [0.0, 0.5, 1.0, 2.0, 3.0, f64::INFINITY].map(ord);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(1..=4);
        let x = random_data(&mut rng, n, d);
        let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
        let k = KernelRate::new(rng.random_range(0.2..3.0)).unwrap();
        let z = kernel_similarity(&pairwise_distances(&x, Metric::Euclidean), k);
        let zn = expand_to_zn(&z, &counts).unwrap();
        let repeated = kernel_similarity(
            &pairwise_distances(&repeat_rows(&x, &counts), Metric::Euclidean),
            k,
        );
        let p = Abundance::from_counts(&counts).unwrap();
        let uniform = Abundance::uniform(zn.n()).unwrap();
        for q in qs {
            let vs_zn = vendi_score(&zn, q).unwrap().value();
            let vs_rep = vendi_score(&repeated, q).unwrap().value();
            let lcr_counts = lcr_diversity(&p, &z, q).unwrap().value();
            let lcr_zn = lcr_diversity(&uniform, &zn, q).unwrap().value();
            let lcr_rep = lcr_diversity(&uniform, &repeated, q).unwrap().value();
            worst = worst
                .max(rel_err(vs_zn, vs_rep))
                .max(rel_err(lcr_zn, lcr_rep))
                .max(rel_err(lcr_counts, lcr_rep));
        }
    }
    outcome(
        worst <= 1e-9,
        format!(
            "50 pairs x {} orders, max relative difference {worst:.3e}",
            qs.len()
        ),
    )
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let zs = instances();
    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        (
            "VS_2, VS_3 match closed forms",
            Box::new(|| closed_forms(&zs)),
        ),
        ("proven bounds hold", Box::new(|| proven_bounds(&zs))),
        (
            "VS_q >= D_q on random instances",
            Box::new(|| conjecture1(&zs)),
        ),
        ("counterexample search finds none", Box::new(search)),
        ("half-distance limits", Box::new(half_distance_limits)),
        ("2x2 hand-derived values", Box::new(pair_battery)),
        (
            "reduction and monotonicity",
            Box::new(reduction_and_monotonicity),
        ),
        (
            "bench: VS slower than LCR at n >= 2000",
            Box::new(bench_direction),
        ),
        (
            "Z_n expansion matches repeated data",
            Box::new(zn_consistency),
        ),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failed += 1;
        }
        println!(
            "criterion {} {}: {name} ({})",
            i + 1,
            if result.passed { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
