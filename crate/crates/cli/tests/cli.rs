use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use simdiv::{lcr_diversity, vendi_score, Abundance, Order, SimilarityMatrix};
use simdiv_cli::commands::{
    cmd_bench, cmd_entropy, cmd_search, cmd_sweep, cmd_validate, cmd_vendi,
};
use simdiv_cli::config::InputKind;
use simdiv_cli::{Options, Status};
use tempfile::TempDir;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn similarity_opts(path: &Path, q: &str) -> Options {
    Options {
        input: vec![path.to_path_buf()],
        kind: Some(InputKind::Similarity),
        q: Some(q.into()),
        ..Default::default()
    }
}

fn identity_csv(n: usize) -> String {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn simdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simdiv"))
        .args(args)
        .output()
        .unwrap()
}

fn last_number(table: &str) -> f64 {
    table
        .lines()
        .last()
        .unwrap()
        .split_whitespace()
        .last()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn entropy_of_identity_is_n() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "id.csv", &identity_csv(4));
    let r = cmd_entropy(&similarity_opts(&p, "1")).unwrap();
    assert_eq!(last_number(&r.output), 4.0);
}

#[test]
fn entropy_of_half_pair() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "s.csv", "1,0.5\n0.5,1\n");
    let r = cmd_entropy(&similarity_opts(&p, "1")).unwrap();
    assert!(r.output.contains("1.333333"), "{}", r.output);
}

#[test]
fn entropy_from_features_matches_direct_pair() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "f.csv",
        &format!("id,x\na,0\nb,{}\n", std::f64::consts::LN_2),
    );
    let opts = Options {
        input: vec![p],
        k: Some("1".into()),
        q: Some("1".into()),
        ..Default::default()
    };
    let r = cmd_entropy(&opts).unwrap();
    assert!(r.output.contains("1.333333"), "{}", r.output);
    assert!(
        r.notes.iter().any(|n| n.contains("id (identifier)")),
        "{:?}",
        r.notes
    );
}

#[test]
fn entropy_identity_gives_hill_numbers() {
    let opts = Options {
        identity: true,
        counts: Some("1,1,2".into()),
        q: Some("2".into()),
        ..Default::default()
    };
    let r = cmd_entropy(&opts).unwrap();
    let hill2 = 1.0 / (0.25f64 * 0.25 + 0.25 * 0.25 + 0.5 * 0.5);
    assert!(
        (last_number(&r.output) - hill2).abs() < 1e-6,
        "{}",
        r.output
    );
}

#[test]
fn entropy_requires_k_for_features() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "f.csv", "x\n0\n1\n");
    let opts = Options {
        input: vec![p],
        ..Default::default()
    };
    assert!(cmd_entropy(&opts).is_err());
}

#[test]
fn vendi_values() {
    let dir = TempDir::new().unwrap();
    let id = write(&dir, "id.csv", &identity_csv(3));
    assert_eq!(
        last_number(&cmd_vendi(&similarity_opts(&id, "1")).unwrap().output),
        3.0
    );
    let pair = write(&dir, "s.csv", "1,0.5\n0.5,1\n");
    let r = cmd_vendi(&similarity_opts(&pair, "1")).unwrap();
    assert!(r.output.contains("1.754765"), "{}", r.output);
}

#[test]
fn vendi_spectrum_flag_emits_spectrum_csv() {
    let dir = TempDir::new().unwrap();
    let pair = write(&dir, "s.csv", "1,0.5\n0.5,1\n");
    let opts = Options {
        spectrum: true,
        ..similarity_opts(&pair, "1")
    };
    let out = cmd_vendi(&opts).unwrap().output;
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "rank,eigenvalue,cumulative");
    assert_eq!(lines[1], "1,7.5000000000000000e-1,7.5000000000000000e-1");
    assert_eq!(lines.len(), 3);
}

#[test]
fn csv_output_reproduces_module_values_exactly() {
    let dir = TempDir::new().unwrap();
    let text = "1,0.3,0.1\n0.3,1,0.6\n0.1,0.6,1\n";
    let path = write(&dir, "z.csv", text);
    let opts = Options {
        format: Some(simdiv_cli::config::OutputFormat::Csv),
        ..similarity_opts(&path, "0.5,1,inf")
    };

    let z = SimilarityMatrix::new(simdiv_cli::io::read_matrix(text.as_bytes()).unwrap()).unwrap();
    let p = Abundance::uniform(3).unwrap();
    let parse = |out: &str| -> Vec<f64> {
        out.lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let qs: Vec<Order> = ["0.5", "1", "inf"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let lcr = parse(&cmd_entropy(&opts).unwrap().output);
    let vs = parse(&cmd_vendi(&opts).unwrap().output);
    for (i, &q) in qs.iter().enumerate() {
        assert_eq!(lcr[i], lcr_diversity(&p, &z, q).unwrap().value());
        assert_eq!(vs[i], vendi_score(&z, q).unwrap().value());
    }
}

#[test]
fn validate_rejects_asymmetric_matrix() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.csv", "1,0.5\n0.4,1\n");
    let r = cmd_validate(&similarity_opts(&p, "1")).unwrap();
    assert_eq!(r.status, Status::ValidationFailure);
    assert!(r.output.contains("asymmetry"), "{}", r.output);

    let out = simdiv(&[
        "validate",
        "--input",
        p.to_str().unwrap(),
        "--kind",
        "similarity_csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_bounds_on_valid_matrix() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "s.csv", "1,0.5\n0.5,1\n");
    let r = cmd_validate(&similarity_opts(&p, "0,1,inf")).unwrap();
    assert_eq!(r.status, Status::Success);
    for check in ["theorem", "reverse_bound", "lemma", "conjecture1"] {
        assert!(r.output.contains(check), "{}", r.output);
    }
    assert!(!r.output.contains("violated"));
}

#[test]
fn validate_flags_non_psd_when_required() {
    let dir = TempDir::new().unwrap();
    // Valid similarity (symmetric, unit diagonal, entries in [0,1]) but indefinite.
    let p = write(&dir, "np.csv", "1,1,0\n1,1,1\n0,1,1\n");
    let opts = Options {
        require_psd: true,
        ..similarity_opts(&p, "1")
    };
    let r = cmd_validate(&opts).unwrap();
    assert_eq!(r.status, Status::ValidationFailure);
    assert!(r.output.contains("psd: no"), "{}", r.output);
    assert_eq!(
        cmd_validate(&similarity_opts(&p, "1")).unwrap().status,
        Status::Success
    );
}

#[test]
fn entropy_on_invalid_similarity_exits_2() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.csv", "1,2\n2,1\n");
    let out = simdiv(&[
        "entropy",
        "--input",
        p.to_str().unwrap(),
        "--kind",
        "similarity_csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of [0,1]"));
}

#[test]
fn missing_file_exits_1() {
    let out = simdiv(&[
        "entropy",
        "--input",
        "/nonexistent/x.csv",
        "--kind",
        "similarity_csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn search_desk_grid_finds_no_candidates() {
    let dir = TempDir::new().unwrap();
    let summary = dir.path().join("summary.csv");
    let opts = Options {
        summary: Some(summary.clone()),
        seed: Some(5),
        ..Default::default()
    };
    let r = cmd_search(&opts).unwrap();
    assert_eq!(r.status, Status::Success);
    assert!(
        r.notes[0].contains("0 counterexample candidates"),
        "{:?}",
        r.notes
    );
    assert_eq!(r.output.lines().count(), 24);
    for line in r.output.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["seed"].is_u64() && v["gap"].is_f64() && v["minimizer_z"].is_array());
    }
    let s = fs::read_to_string(summary).unwrap();
    assert!(s.starts_with("q,n,r,scale,runs,failed,candidates,min_gap"));
}

#[test]
fn sweep_two_points_pins_endpoints() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "two.csv", "x,y\n0,0\n3,4\n");
    let stats = dir.path().join("stats.csv");
    let opts = Options {
        input: vec![p],
        q: Some("1,2".into()),
        stats: Some(stats.clone()),
        ..Default::default()
    };
    let r = cmd_sweep(&opts).unwrap();
    assert_eq!(r.status, Status::Success);
    assert!(r.output.starts_with("dataset_id,k,q,lcr,vs,status\n"));
    let limits: Vec<&String> = r.notes.iter().filter(|n| n.contains("want 2")).collect();
    assert_eq!(limits.len(), 2);
    assert!(
        limits.iter().all(|n| !n.contains("limit not reached")),
        "{limits:?}"
    );
    assert!(fs::read_to_string(stats)
        .unwrap()
        .starts_with("k,q,pearson,r2,cov,flag\n"));
}

#[test]
fn sweep_needs_distances() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "s.csv", "1,0.5\n0.5,1\n");
    assert!(cmd_sweep(&similarity_opts(&p, "1")).is_err());
}

#[test]
fn bench_reports_positive_times_and_echoes_replicates() {
    let opts = Options {
        sizes: Some("100".into()),
        replicates: Some(5),
        format: Some(simdiv_cli::config::OutputFormat::Json),
        ..Default::default()
    };
    let r = cmd_bench(&opts).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.output).unwrap();
    let rec = &v[0];
    assert_eq!(rec["n"], 100);
    assert_eq!(rec["replicates"], 5);
    assert!(rec["lcr_time"].as_f64().unwrap() > 0.0);
    assert!(rec["vs_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let z = write(&dir, "s.csv", "1,0.5\n0.5,1\n");
    let cfg = write(
        &dir,
        "run.toml",
        &format!(
            "input = [{:?}]\nkind = \"similarity_csv\"\nq = \"1\"\nformat = \"csv\"\n",
            z.to_str().unwrap()
        ),
    );
    let run = |extra: &[&str]| {
        let mut args = vec!["vendi", "--config", cfg.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = simdiv(&args);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("q,vs"));
        let (q, v) = lines.next().unwrap().split_once(',').unwrap();
        assert_eq!(lines.next(), None);
        (q.to_string(), v.parse::<f64>().unwrap())
    };
    let (q, v) = run(&[]);
    assert_eq!(q, "1");
    assert!((v - 1.754_765_350_603_323_3).abs() < 1e-12);
    let (q, v) = run(&["--q", "2"]);
    assert_eq!(q, "2");
    assert!((v - 1.6).abs() < 1e-12);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("id,a,b,label\n");
    for i in 0..60 {
        csv.push_str(&format!(
            "{i},{},{},c{}\n",
            (i as f64 * 0.7).sin(),
            (i as f64 * 1.3).cos(),
            i % 3
        ));
    }
    let p = write(&dir, "feat.csv", &csv);
    let args = |out: &Path| {
        vec![
            "entropy".to_string(),
            "--input".into(),
            p.to_str().unwrap().into(),
            "--k".into(),
            "rmsd".into(),
            "--q".into(),
            "0,1,2,inf".into(),
            "--subsample".into(),
            "20".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let argv = args(out);
        let o = simdiv(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(
            err.contains("label (non-numeric)") && err.contains("using 20 rows"),
            "{err}"
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(fs::read_to_string(&a).unwrap().starts_with("q,lcr\n"));
}
