use std::collections::HashMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use shiftscope::adapt::{EmPriorResult, KmmResult};
use shiftscope::cli::{dispatch_with, CliConfig, Context, DiagnoseReport, Io, TrainSummary};
use shiftscope::data::{read_weights_csv, write_csv, ScenarioKind};
use shiftscope::density::{DivergenceEstimate, Measure};
use shiftscope::learners::EvalReport;
use shiftscope::repro::KlTableReport;
use shiftscope::stats::{FeatureShiftScreen, TestResult};
use shiftscope::synth::{generate, ScenarioSpec};

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run_in(dir: &Path, env: &[(&str, &str)], stdin: &str, args: &[&str]) -> Run {
    let mut vars: HashMap<String, String> = env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    vars.entry("SHIFTSCOPE_VERBOSITY".into()).or_insert_with(|| "error".into());
    let ctx = Context {
        cwd: dir.to_path_buf(),
        env: vars,
    };
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut io = Io {
        input: &mut input,
        out: &mut out,
        err: &mut err,
    };
    let code = dispatch_with(std::iter::once("shiftscope").chain(args.iter().copied()), &ctx, &mut io);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn json<T: DeserializeOwned>(dir: &Path, args: &[&str]) -> T {
    let mut full = args.to_vec();
    full.push("--json");
    let r = run_in(dir, &[], "", &full);
    assert_eq!(r.code, 0, "{args:?}: {}", r.err);
    serde_json::from_str(&r.out).unwrap_or_else(|e| panic!("{args:?}: {e}\n{}", r.out))
}

/// Covariate-shift pair written as `source.csv`, `target.csv` (labeled) and
/// `target_unlabeled.csv`.
fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let pair = generate(&ScenarioSpec::new(ScenarioKind::Covariate, 150, 0)).unwrap().pair;
    let write = |name: &str, ds: &shiftscope::data::Dataset| {
        write_csv(ds, None, std::fs::File::create(dir.path().join(name)).unwrap()).unwrap();
    };
    write("source.csv", &pair.source);
    write("target.csv", &pair.target);
    write("target_unlabeled.csv", &pair.target.without_labels());
    dir
}

const PAIR: [&str; 4] = ["--source", "source.csv", "--target", "target.csv"];

#[test]
fn divergence_of_a_sample_with_itself_is_zero() {
    let dir = fixture();
    for measure in ["kl", "js", "renyi"] {
        let est: DivergenceEstimate = json(
            dir.path(),
            &["divergence", "--source", "source.csv", "--target", "source.csv", "--measure", measure, "--column", "x0"],
        );
        assert!(est.value.abs() < 1e-9, "{measure}: {}", est.value);
    }
    let est: DivergenceEstimate = json(
        dir.path(),
        &["divergence", "--source", "source.csv", "--target", "source.csv", "--measure", "mmd"],
    );
    assert_eq!(est.measure, Measure::MmdBiased);
    assert!(est.value.abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2_and_domain_errors_exit_1() {
    let dir = fixture();
    let r = run_in(dir.path(), &[], "", &["divergence", "--source", "source.csv"]);
    assert_eq!(r.code, 2);
    assert!(r.err.contains("--target"), "{}", r.err);
    assert_eq!(run_in(dir.path(), &[], "", &["no-such-command"]).code, 2);

    let r = run_in(dir.path(), &[], "", &["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.out.contains("divergence"));

    let r = run_in(dir.path(), &[], "", &["divergence", "--source", "missing.csv", "--target", "target.csv", "--measure", "kl"]);
    assert_eq!(r.code, 1);
    assert!(r.err.starts_with("error: "), "{}", r.err);
    assert_eq!(r.err.lines().count(), 1);

    let r = run_in(dir.path(), &[], "", &["test", "label", "--source", "source.csv", "--target", "target_unlabeled.csv"]);
    assert_eq!(r.code, 1);
}

#[test]
fn kl_table_has_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report: KlTableReport = json(dir.path(), &["repro", "kl-table"]);
    let bs: Vec<f64> = report.rows.iter().map(|r| r.b).collect();
    assert_eq!(bs.len(), 11);
    for (i, b) in bs.iter().enumerate() {
        assert!((b - 0.2 * i as f64).abs() < 1e-12, "row {i}: b = {b}");
    }
}

#[test]
fn json_outputs_decode_into_library_types() {
    let dir = fixture();
    let p = dir.path();
    let with_pair = |head: &[&'static str]| -> Vec<&'static str> { head.iter().chain(PAIR.iter()).copied().collect() };

    let ks: TestResult = json(p, &[&with_pair(&["test", "ks"])[..], &["--column", "x1"]].concat());
    assert!(ks.p_value < 0.05, "target moves along x1");
    let screen: FeatureShiftScreen = json(p, &with_pair(&["test", "ks"]));
    assert_eq!(screen.per_dimension.len(), 2);
    let _: TestResult = json(p, &with_pair(&["test", "label"]));
    let mmd: TestResult = json(p, &[&with_pair(&["test", "mmd"])[..], &["--permutations", "200"]].concat());
    assert!((0.0..=1.0).contains(&mmd.p_value));

    let summary: TrainSummary = json(p, &["train", "--data", "source.csv", "--kind", "logistic", "--out", "model.json"]);
    assert_eq!(summary.labels.len(), 2);
    assert!(p.join("model.json").exists());
    let eval: EvalReport = json(p, &["eval", "--model", "model.json", "--data", "target.csv"]);
    assert_eq!(eval.n_eval, 150);

    let em: EmPriorResult = json(
        p,
        &[&with_pair(&["adapt", "prior"])[..], &["--model", "model.json", "--weights-out", "prior_w.csv"]].concat(),
    );
    assert!((em.estimated_target_prior.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let w = read_weights_csv(std::fs::File::open(p.join("prior_w.csv")).unwrap()).unwrap();
    assert_eq!(w.len(), 150);

    let kmm: KmmResult = json(
        p,
        &["adapt", "covariate", "--source", "source.csv", "--target", "target_unlabeled.csv", "--weights-out", "kmm_w.csv"],
    );
    assert_eq!(kmm.weights.len(), 150);
    let w = read_weights_csv(std::fs::File::open(p.join("kmm_w.csv")).unwrap()).unwrap();
    assert_eq!(w.values(), kmm.weights.values());

    let weighted: TrainSummary = json(
        p,
        &["train", "--data", "source.csv", "--kind", "logistic", "--out", "weighted.json", "--weights", "kmm_w.csv"],
    );
    assert_eq!(weighted.kind, summary.kind);

    let report: DiagnoseReport = json(
        p,
        &[
            &with_pair(&["diagnose"])[..],
            &["--causality", "x-to-y", "--assert", "concept_stable=yes:labels follow a fixed rule"],
        ]
        .concat(),
    );
    assert_eq!(report.diagnosis.scenario.kind(), ScenarioKind::Covariate, "{:?}", report.diagnosis.rationale);
}

#[test]
fn flags_beat_env_beat_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("shiftscope.toml"), "seed = 5\nlevel = 0.1\n").unwrap();
    let show = |env: &[(&str, &str)], extra: &[&str]| -> CliConfig {
        let mut args = vec!["--show-config", "--json"];
        args.extend_from_slice(extra);
        let r = run_in(dir.path(), env, "", &args);
        assert_eq!(r.code, 0, "{}", r.err);
        serde_json::from_str(&r.out).unwrap()
    };
    let from_file = show(&[], &[]);
    assert_eq!((from_file.seed, from_file.level), (5, 0.1));
    let from_env = show(&[("SHIFTSCOPE_SEED", "6")], &[]);
    assert_eq!((from_env.seed, from_env.level), (6, 0.1));
    let from_flag = show(&[("SHIFTSCOPE_SEED", "6")], &["--seed", "7"]);
    assert_eq!(from_flag.seed, 7);

    let r = run_in(dir.path(), &[("SHIFTSCOPE_SEED", "many")], "", &["--show-config"]);
    assert_eq!(r.code, 1);
    assert!(r.err.starts_with("error: "));
}

#[test]
fn runs_are_reproducible_for_a_seed() {
    let dir = fixture();
    let args = [&["test", "mmd"][..], &PAIR[..], &["--permutations", "200", "--seed", "11"]].concat();
    let a = run_in(dir.path(), &[], "", &args);
    let b = run_in(dir.path(), &[], "", &args);
    assert_eq!(a.code, 0, "{}", a.err);
    assert_eq!(a.out, b.out);
}
