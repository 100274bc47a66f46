//! Wall-clock comparison of LCR diversity and the Vendi score.

use std::time::{Duration, Instant};

use anyhow::{bail, ensure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use simdiv::generate::random_gram;
use simdiv::{lcr_diversity, vendi_score, Abundance, Order};

pub const MIN_REPLICATES: usize = 5;

/// Latent dimension of the benchmark Gram matrices.
pub const BENCH_RANK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    /// Median seconds for `lcr_diversity` at `q = 1`, uniform abundance.
    pub lcr_time: f64,
    /// Median seconds for `vendi_score` at `q = 1`.
    pub vs_time: f64,
    pub replicates: usize,
    pub lcr_value: f64,
    pub vs_value: f64,
}

fn median(mut xs: Vec<Duration>) -> f64 {
    xs.sort_unstable();
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m].as_secs_f64()
    } else {
        (xs[m - 1].as_secs_f64() + xs[m].as_secs_f64()) / 2.0
    }
}

fn ensure_allocatable(n: usize) -> anyhow::Result<()> {
    let Some(len) = n.checked_mul(n).and_then(|nn| nn.checked_mul(3)) else {
        bail!("cannot allocate matrices of order {n}: size overflows");
    };
    let mut probe: Vec<f64> = Vec::new();
    if probe.try_reserve_exact(len).is_err() {
        bail!("cannot allocate matrices of order {n}");
    }
    Ok(())
}

/// Times both measures on one random Gram matrix per size.
pub fn run_bench(
    sizes: &[usize],
    replicates: usize,
    seed: u64,
) -> anyhow::Result<Vec<BenchRecord>> {
    ensure!(
        replicates >= MIN_REPLICATES,
        "at least {MIN_REPLICATES} replicates are required, got {replicates}"
    );
    ensure!(!sizes.is_empty(), "no sizes given");
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        ensure!(n >= 1, "matrix order must be positive");
        ensure_allocatable(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let z = random_gram(&mut rng, n, BENCH_RANK.min(n), 1.0);
        let p = Abundance::uniform(n)?;

        let mut lcr_times = Vec::with_capacity(replicates);
        let mut vs_times = Vec::with_capacity(replicates);
        let mut lcr_value = f64::NAN;
        let mut vs_value = f64::NAN;
        for _ in 0..replicates {
            let t = Instant::now();
            lcr_value = lcr_diversity(&p, &z, Order::SHANNON)?.value();
            lcr_times.push(t.elapsed());
            let t = Instant::now();
            vs_value = vendi_score(&z, Order::SHANNON)?.value();
            vs_times.push(t.elapsed());
        }
        ensure!(
            vs_value >= lcr_value * (1.0 - 1e-9),
            "VS_1 = {vs_value} below LCR_1 = {lcr_value} at n = {n}"
        );
        out.push(BenchRecord {
            n,
            lcr_time: median(lcr_times),
            vs_time: median(vs_times),
            replicates,
            lcr_value,
            vs_value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bench_reports_positive_times() {
        let recs = run_bench(&[100], 5, 1).unwrap();
        let r = &recs[0];
        assert_eq!((r.n, r.replicates), (100, 5));
        assert!(r.lcr_time > 0.0 && r.lcr_time.is_finite());
        assert!(r.vs_time > 0.0 && r.vs_time.is_finite());
        assert!(r.vs_value >= r.lcr_value);
    }

    #[test]
    fn too_few_replicates_rejected() {
        assert!(run_bench(&[10], 4, 1).is_err());
    }

    #[test]
    fn absurd_size_is_a_named_failure() {
        let err = run_bench(&[usize::MAX / 2], 5, 1).unwrap_err();
        assert!(err.to_string().contains("cannot allocate"), "{err}");
    }

    #[test]
    fn median_of_even_and_odd() {
        let d = |s: u64| Duration::from_secs(s);
        assert_eq!(median(vec![d(3), d(1), d(2)]), 2.0);
        assert_eq!(median(vec![d(4), d(1), d(2), d(3)]), 2.5);
    }
}
