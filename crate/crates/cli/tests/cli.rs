use std::fs;
use std::path::Path;
use std::process::Command;

use smartema::data::{ingest, SchemaConfig};
use smartema::eval::run_in_memory;
use smartema::trigger::SimulationResult;
use smartema_cli::artifacts::{Stats, CANDIDATES, METRICS, MODELS, SIMULATION, STATS, STATS_SCHEMA};
use smartema_cli::store::{read_json, Envelope, Manifest};
use smartema_cli::{Outcome, Overrides, RunConfig, Runner, Stage};

const BIN: &str = env!("CARGO_BIN_EXE_smartema");

fn small(seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.seed = Some(seed);
    c.cohort.participants = 5;
    c.cohort.days = 4;
    c
}

fn runner(out: &Path, cfg: RunConfig, o: &Overrides) -> Runner {
    Runner::new(out, cfg.resolve(o).unwrap()).unwrap()
}

#[test]
fn stage_without_inputs_names_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, small(1).to_toml()).unwrap();
    let out = Command::new(BIN)
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "simulate"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("smartema generate"), "{err}");
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .env_remove("SMARTEMA_CONFIG")
        .args(["--out", dir.path().to_str().unwrap(), "generate"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));
}

#[test]
fn unknown_config_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 1\n[trigger]\nwu = 2.0\n").unwrap();
    let out = Command::new(BIN)
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "generate"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("trigger"));
}

#[test]
fn pipeline_writes_versioned_artifacts_and_reruns_as_noop() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = runner(dir.path(), small(3), &Overrides::default());
    let first = r.pipeline().unwrap();
    assert_eq!(first.len(), 7);
    assert!(first.iter().all(|(_, o)| *o == Outcome::Ran));
    for name in ["labels.csv", "features.csv", MODELS, CANDIDATES, SIMULATION, METRICS, STATS, "curve.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    for name in ["report.md", "metrics_table.csv", "stats_table.csv", "j_curve.csv", "j_box.csv"] {
        assert!(dir.path().join("report").join(name).is_file(), "{name}");
    }
    let stats: Envelope<Stats> = read_json(&dir.path().join(STATS), STATS_SCHEMA).unwrap();
    assert_eq!(stats.seed, 3);
    let m = Manifest::load(dir.path()).unwrap();
    assert_eq!(m.stages.len(), 7);
    assert!(m.stages.values().all(|s| s.config_hash == stats.config_hash));

    let before = fs::read(dir.path().join(STATS)).unwrap();
    let mut again = runner(dir.path(), small(3), &Overrides::default());
    assert!(again.pipeline().unwrap().iter().all(|(_, o)| *o == Outcome::UpToDate));
    assert_eq!(fs::read(dir.path().join(STATS)).unwrap(), before);

    // A changed weight invalidates the simulation and everything after it.
    let o = Overrides {
        w_u: Some(0.5),
        ..Overrides::default()
    };
    let mut changed = runner(dir.path(), small(3), &o);
    let ran = changed.pipeline().unwrap();
    assert!(ran.iter().all(|(_, o)| *o == Outcome::Ran));
}

#[test]
fn edited_output_is_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = runner(dir.path(), small(4), &Overrides::default());
    for s in [Stage::Generate, Stage::Label] {
        r.run_stage(s).unwrap();
    }
    let labels = dir.path().join("labels.csv");
    let good = fs::read(&labels).unwrap();
    fs::write(&labels, "junk").unwrap();
    assert_eq!(r.run_stage(Stage::Label).unwrap(), Outcome::Ran);
    assert_eq!(fs::read(&labels).unwrap(), good);
}

#[test]
fn report_stubs_missing_sections() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = runner(dir.path(), small(5), &Overrides::default());
    r.run_stage(Stage::Report).unwrap();
    let md = fs::read_to_string(dir.path().join("report/report.md")).unwrap();
    assert_eq!(md.matches("_Missing:").count(), 6, "{md}");
    assert!(md.contains("smartema evaluate"));
}

#[test]
fn report_refuses_mixed_configs() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = runner(dir.path(), small(6), &Overrides::default());
    r.pipeline().unwrap();
    let p = dir.path().join(METRICS);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    v["config_hash"] = "0000".into();
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let err = r.run_stage(Stage::Report).unwrap_err();
    assert!(format!("{err:#}").contains("config"), "{err:#}");
}

#[test]
fn staged_run_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(8);
    let res = cfg.clone().resolve(&Overrides::default()).unwrap();
    let opts = res.run_options();
    let mut r = Runner::new(dir.path(), res).unwrap();
    r.pipeline().unwrap();

    let cohort_dir = dir.path().join("cohort");
    let schema = SchemaConfig::load(&cohort_dir.join("schema.toml")).unwrap();
    let (cohort, _) = ingest(&cohort_dir, &schema).unwrap();
    let mem = run_in_memory(&cohort, None, &opts).unwrap();

    let stats: Envelope<Stats> = read_json(&dir.path().join(STATS), STATS_SCHEMA).unwrap();
    assert_eq!(stats.data.rq1, mem.evaluation.rq1);
    assert_eq!(stats.data.rq2, mem.evaluation.rq2);
    assert_eq!(stats.data.rq3, mem.evaluation.rq3);
    let sim: Envelope<SimulationResult> =
        read_json(&dir.path().join(SIMULATION), smartema_cli::artifacts::SIMULATION_SCHEMA).unwrap();
    assert_eq!(sim.data, mem.simulation);
}
