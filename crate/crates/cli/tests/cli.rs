use std::path::Path;
use std::process::{Command, Output};

fn gfen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfen"))
        .arg("-q")
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn gfen")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = gfen(dir, args);
    assert!(
        out.status.success(),
        "gfen {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

/// Simulated inputs plus graph and tree in `dir`.
fn prepare(dir: &Path) {
    ok(
        dir,
        &[
            "simulate",
            "--grid",
            "6",
            "--spatial",
            "linear",
            "--missing",
            "0.2",
            "--seed",
            "4",
            "--output",
            "sim",
        ],
    );
    ok(
        dir,
        &[
            "graph",
            "--locations",
            "sim/locations.csv",
            "--adjacency",
            "sim/adjacency.csv",
            "--times",
            "6",
            "--topology",
            "linear",
            "--output",
            "graph.json",
        ],
    );
    ok(
        dir,
        &[
            "tree",
            "--observations",
            "sim/observations.csv",
            "--depth",
            "2",
            "--left-tail-splits",
            "0",
            "--tail-splits",
            "0",
            "--output",
            "tree.json",
        ],
    );
}

const FIT: [&str; 8] = [
    "fit",
    "--graph",
    "graph.json",
    "--tree",
    "tree.json",
    "--observations",
    "sim/observations.csv",
    "--lambda",
];

#[test]
fn fit_query_sample_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    let mut args = FIT.to_vec();
    args.extend(["0.2,1,0.2,1", "--output", "model"]);
    ok(d, &args);
    for f in [
        "density.csv",
        "tree.json",
        "graph.json",
        "manifest.json",
        "fields/split_000.csv",
        "fields/split_002.csv",
    ] {
        assert!(d.join("model").join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(
        manifest["inputs"]["graph"]["sha256"]
            .as_str()
            .unwrap()
            .len(),
        64
    );
    assert_eq!(manifest["n_vertices"], 36);

    ok(
        d,
        &[
            "query",
            "--model",
            "model",
            "--preset",
            "living-wage",
            "--alpha",
            "0.1,0.9",
            "--output",
            "q",
        ],
    );
    let tail = read_csv(&d.join("q/tail_probability_21.64.csv"));
    assert_eq!(tail.len(), 36);
    assert!(tail
        .iter()
        .all(|r| (0.0..=1.0).contains(&r[2].parse::<f64>().unwrap())));
    let lo = read_csv(&d.join("q/quantile_0.1.csv"));
    let hi = read_csv(&d.join("q/quantile_0.9.csv"));
    for (a, b) in lo.iter().zip(&hi) {
        assert_eq!((&a[0], &a[1]), (&b[0], &b[1]));
        assert!(a[2].parse::<f64>().unwrap() <= b[2].parse::<f64>().unwrap());
    }

    ok(
        d,
        &[
            "query", "--model", "model", "--query", "mean", "--hour", "3", "--output", "q3",
        ],
    );
    let rows = read_csv(&d.join("q3/mean.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[1] == "3"));

    ok(
        d,
        &[
            "sample",
            "--model",
            "model",
            "--iterations",
            "120",
            "--burn-in",
            "20",
            "--query",
            "mean",
            "--output",
            "post",
        ],
    );
    let bands = read_csv(&d.join("post/mean_bands.csv"));
    assert_eq!(bands.len(), 36);
    for r in &bands {
        let v: Vec<f64> = r[2..].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[2] <= v[1] && v[1] <= v[3], "{r:?}");
    }
    assert_eq!(read_csv(&d.join("post/beta_summary.csv")).len(), 3 * 36);
}

#[test]
fn tune_then_fit_with_penalty_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    ok(
        d,
        &[
            "tune",
            "--graph",
            "graph.json",
            "--tree",
            "tree.json",
            "--observations",
            "sim/observations.csv",
            "--generations",
            "2",
            "--per-generation",
            "3",
            "--folds",
            "3",
            "--output",
            "tuned",
        ],
    );
    let log = read_csv(&d.join("tuned/tuning_log.csv"));
    assert_eq!(log.len(), 3 * 2 * 3);
    let best: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("tuned/best_lambda.json")).unwrap())
            .unwrap();
    assert_eq!(best["splits"].as_array().unwrap().len(), 3);
    ok(
        d,
        &[
            "fit",
            "--graph",
            "graph.json",
            "--tree",
            "tree.json",
            "--observations",
            "sim/observations.csv",
            "--penalties",
            "tuned/best_lambda.json",
            "--output",
            "model",
        ],
    );
    assert!(d.join("model/density.csv").exists());
}

#[test]
fn missing_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    let out = gfen(
        d,
        &[
            "fit",
            "--graph",
            "nope.json",
            "--tree",
            "tree.json",
            "--lambda",
            "1,1,1,1",
            "--output",
            "m",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = gfen(
        d,
        &[
            "fit",
            "--graph",
            "graph.json",
            "--tree",
            "tree.json",
            "--observations",
            "sim/observations.csv",
            "--output",
            "m",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--penalties"));
    assert!(!d.join("m").exists());
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    std::fs::write(d.join("bad.toml"), "[solver]\ntol = \"tight\"\n").unwrap();
    let mut args = vec!["--config", "bad.toml"];
    args.extend(FIT);
    args.extend(["1,1,1,1", "--output", "m"]);
    let out = gfen(d, &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("m").exists());

    std::fs::write(d.join("neg.toml"), "[solver]\ntol = -1.0\n").unwrap();
    args[1] = "neg.toml";
    assert_eq!(gfen(d, &args).status.code(), Some(2));
    assert!(!d.join("m").exists());
}

#[test]
fn config_supplies_paths_and_penalties() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    std::fs::write(
        d.join("run.toml"),
        "penalties = [0.1, 1.0, 0.1, 1.0]\n[paths]\ngraph = \"graph.json\"\ntree = \"tree.json\"\nobservations = \"sim/observations.csv\"\noutput = \"m\"\n",
    )
    .unwrap();
    ok(d, &["--config", "run.toml", "fit"]);
    assert!(d.join("m/density.csv").exists());
}

#[test]
fn nonconvergence_exits_3_and_lists_splits() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    let mut args = FIT.to_vec();
    args.extend(["0.2,1,0.2,1", "--max-iter", "2", "--output", "m"]);
    let out = gfen(d, &args);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("splits [0, 1, 2]"));
    assert!(!d.join("m").exists());
    args.push("--allow-nonconverged");
    ok(d, &args);
}

#[test]
fn unknown_preset_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    let mut args = FIT.to_vec();
    args.extend(["0.2,1,0.2,1", "--output", "model"]);
    ok(d, &args);
    let out = gfen(
        d,
        &[
            "query",
            "--model",
            "model",
            "--preset",
            "poverty-line",
            "--output",
            "q",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("q").exists());
}

#[test]
fn manifest_rejects_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepare(d);
    let mut args = FIT.to_vec();
    args.extend(["0.2,1,0.2,1", "--output", "m1"]);
    ok(d, &args);
    ok(
        d,
        &["fit", "--manifest", "m1/manifest.json", "--output", "m2"],
    );
    assert_eq!(
        std::fs::read(d.join("m1/density.csv")).unwrap(),
        std::fs::read(d.join("m2/density.csv")).unwrap()
    );
    let mut obs = std::fs::read_to_string(d.join("sim/observations.csv")).unwrap();
    obs.push_str("s000,0,0.5\n");
    std::fs::write(d.join("sim/observations.csv"), obs).unwrap();
    let out = gfen(
        d,
        &["fit", "--manifest", "m1/manifest.json", "--output", "m3"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prox_debug_matches_small_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("a.csv"), "y\n1\n3\n").unwrap();
    ok(
        d,
        &[
            "prox", "--kind", "tv1", "--lambda", "1", "--input", "a.csv", "--output", "z1.csv",
        ],
    );
    let z: Vec<f64> = read_csv(&d.join("z1.csv"))
        .iter()
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert_eq!(z, vec![2.0, 2.0]);
    std::fs::write(d.join("b.csv"), "y\n0\n4\n").unwrap();
    ok(
        d,
        &[
            "prox", "--kind", "tv2", "--lambda", "1", "--input", "b.csv", "--output", "z2.csv",
        ],
    );
    let z: Vec<f64> = read_csv(&d.join("z2.csv"))
        .iter()
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert!((z[0] - 4.0 / 3.0).abs() < 1e-12 && (z[1] - 8.0 / 3.0).abs() < 1e-12);
}

#[test]
fn ingest_writes_observations() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("trips.csv"),
        "driver_id,dispatched_on,started_on,completed_on,end_taz,fare\n\
         d1,2017-03-06 10:00,2017-03-06 10:05,2017-03-06 10:30,48453001100,12\n\
         d1,2017-03-06 10:40,2017-03-06 10:45,2017-03-06 11:00,48453001200,10\n",
    )
    .unwrap();
    ok(
        d,
        &["ingest", "--trips", "trips.csv", "--output", "obs.csv"],
    );
    let rows = read_csv(&d.join("obs.csv"));
    assert_eq!(
        rows,
        vec![vec!["48453001100".to_string(), "34".into(), "20.0".into()]]
    );
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("obs.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["settings"]["config"]["timezone"], "America/Chicago");
    assert_eq!(m["settings"]["report"]["emitted"], 1);
}

#[test]
fn bench_shape_and_seed_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let args = |out: &'static str| {
        vec![
            "bench",
            "--grid",
            "4",
            "--replicates",
            "1",
            "--n-lambda",
            "2",
            "--folds",
            "2",
            "--depth",
            "2",
            "--seed",
            "5",
            "--output",
            out,
        ]
    };
    ok(d, &args("b1"));
    ok(d, &args("b2"));
    let summary = read_csv(&d.join("b1/summary.csv"));
    assert_eq!(summary.len(), 14);
    assert_eq!(
        std::fs::read(d.join("b1/summary.csv")).unwrap(),
        std::fs::read(d.join("b2/summary.csv")).unwrap()
    );
    assert_eq!(read_csv(&d.join("b1/bench.csv")).len(), 14 * 3);
}
