use std::path::Path;

use jams::config::ExperimentSpec;
use jams::pipeline::{BenchReport, ReplicationSummary};

fn run(args: &[&str]) -> u8 {
    jams::cli::run(std::iter::once("jams").chain(args.iter().copied()))
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn pipeline_commands_chain_together() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 3\nreplications = 2\n[target]\nkind = \"gaussian_mixture\"\ndim = 3\n[mode_search]\nn_starts = 50\n[run]\nn_iters = 1000\nrecord_stride = 7\ndiscard = 10\n",
    );
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(run(&["find-modes", "--config", &cfg, "--out", out_s]), 0);
    assert_eq!(run(&["burnin", "--config", &cfg, "--out", out_s]), 0);
    assert_eq!(run(&["sample", "--config", &cfg, "--out", out_s]), 0);
    for r in 0..2 {
        let dir = out.join(format!("rep_{r:02}"));
        let csv = std::fs::read_to_string(dir.join("samples.csv")).unwrap();
        // ⌈(1000 − 10)/7⌉ rows plus the header
        assert_eq!(csv.lines().count(), 142 + 1);
        assert!(csv.starts_with("iter,mode,move,accepted,x0,x1,x2\n11,"));
        let s: ReplicationSummary = read(&dir.join("summary.json"));
        assert_eq!(s.seed, 3 + r as u64);
        assert_eq!(s.n_recorded, 142);
        assert_eq!(s.occupancy.iter().sum::<u64>(), 142);
        // the echo is the full resolved config
        let mut expected = ExperimentSpec::load(Path::new(&cfg)).unwrap();
        expected.output_dir = None;
        assert_eq!(s.config, expected);
        assert_eq!(s.config.adaptation.ac2, 1000);
    }
}

#[test]
fn bench_reports_lowest_and_highest_per_jump_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let code = run(&[
        "bench", "--target", "gaussian_mixture", "--dim", "4", "--iters", "5000", "--replications", "1", "--seed", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let b: BenchReport = read(&out.join("bench.json"));
    let kinds: Vec<&str> = b.rows.iter().map(|r| r.jump_kind.as_str()).collect();
    assert_eq!(kinds, ["deterministic", "gaussian", "t"]);
    for row in &b.rows {
        let a = row.jump_acceptance.unwrap();
        assert_eq!(a.lowest, a.highest);
    }
    let table = std::fs::read_to_string(out.join("bench.txt")).unwrap();
    assert!(table.contains("Lowest") && table.contains("Highest"));
    let long = std::fs::read_to_string(out.join("bench_long.csv")).unwrap();
    assert!(long.starts_with("replication,seed,jump_kind,metric,from,to,value\n"));
    assert!(long.lines().any(|l| l.starts_with("0,2,t,jump_acceptance,1,2,")));
    assert!(!out.join("rep_00/gaussian/samples.csv").exists());
    assert!(out.join("rep_00/gaussian/timing.json").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out_s = out.to_str().unwrap();
    assert_eq!(run(&["bench"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["bench", "--config", "/no/such/file.toml"]), 2);
    let bad = write_config(tmp.path(), "[target]\nkind = \"gaussian_mixture\"\ndim = 2\n[run]\nepsilon = 2.0\n");
    assert_eq!(run(&["find-modes", "--config", &bad, "--out", out_s]), 2);
    // a burn-in report from another target fails fast
    assert_eq!(
        run(&["find-modes", "--target", "gaussian_mixture", "--dim", "16", "--out", out_s]),
        0
    );
    assert_eq!(run(&["burnin", "--target", "gaussian_mixture", "--dim", "16", "--out", out_s]), 0);
    assert_eq!(run(&["sample", "--target", "sensor", "--iters", "10", "--out", out_s]), 2);
    // numeric abort: no optimum survives the KKT filter
    let flat = write_config(
        tmp.path(),
        "[target]\nkind = \"gaussian_mixture\"\ndim = 2\n[mode_search]\nn_starts = 3\n[mode_search.bfgs]\nmax_iters = 0\n",
    );
    assert_eq!(run(&["find-modes", "--config", &flat, "--out", out_s]), 3);
}

#[test]
fn partial_replication_failure_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    std::fs::create_dir_all(&out).unwrap();
    // a file where replication 1 wants its directory
    std::fs::write(out.join("rep_01"), "").unwrap();
    let code = run(&[
        "bench", "--target", "gaussian_mixture", "--dim", "2", "--iters", "500", "--replications", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 4);
    let b: BenchReport = read(&out.join("bench.json"));
    assert_eq!(b.failures, 1);
    assert!(b.per_replication[0].error.is_none());
    assert!(b.per_replication[1].error.is_some());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap().flatten() {
        let spec = ExperimentSpec::load(&e.path()).unwrap_or_else(|err| panic!("{}: {err}", e.path().display()));
        assert_eq!(ExperimentSpec::parse(&spec.to_toml(), None).unwrap(), spec);
        n += 1;
    }
    assert_eq!(n, 5);
}
