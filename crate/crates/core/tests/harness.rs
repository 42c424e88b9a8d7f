use colorflag::circuit::Method;
use colorflag::harness::{emit_outputs, fit_groups, read_results, run_experiment, run_memory, wilson_interval, ExperimentConfig, RunSpec};
use colorflag::weights::Scheme;
use colorflag::{Basis, Family};

fn spec(p: f64, shots: u64, seed: u64) -> RunSpec {
    RunSpec {
        family: Family::C666,
        distance: 3,
        p,
        method: Method::Flagged,
        scheme: Scheme::Uniform,
        deflag: true,
        basis: Basis::Z,
        shots,
        seed,
        node_budget: 1_000_000,
        strict: false,
    }
}

#[test]
fn runs_are_reproducible_for_a_seed() {
    let a = run_memory(&spec(5e-3, 3000, 4), None).unwrap();
    let b = run_memory(&spec(5e-3, 3000, 4), None).unwrap();
    assert_eq!(a, b);
    assert!(a.failures > 0);
    let c = run_memory(&spec(5e-3, 3000, 5), None).unwrap();
    assert_eq!(c.shots, 3000);
    assert_eq!(c.seed, 5);
}

#[test]
fn noiseless_runs_never_fail() {
    for method in [Method::SingleAncilla, Method::Flagged] {
        for basis in [Basis::X, Basis::Z] {
            let mut s = spec(0.0, 200, 1);
            s.method = method;
            s.deflag = method == Method::Flagged;
            s.basis = basis;
            let r = run_memory(&s, None).unwrap();
            assert_eq!(r.failures, 0);
            assert_eq!((r.ci_lo, r.rate), (0.0, 0.0));
        }
    }
}

#[test]
fn bad_specs_are_rejected() {
    let mut s = spec(1e-3, 10, 1);
    s.method = Method::SingleAncilla;
    assert!(run_memory(&s, None).is_err(), "deflag without flags");
    let mut s = spec(1e-3, 10, 1);
    s.scheme = Scheme::Flagged;
    assert!(run_memory(&s, None).is_err(), "flagged weights without a table");
    assert!(run_memory(&spec(1.5, 10, 1), None).is_err());
    assert!(run_memory(&spec(1e-3, 0, 1), None).is_err());
}

#[test]
fn wilson_interval_brackets_and_shrinks() {
    let (a, b) = wilson_interval(50, 1000);
    let (c, d) = wilson_interval(500, 10000);
    assert!(a < 0.05 && 0.05 < b && c < 0.05 && 0.05 < d);
    assert!(d - c < b - a);
    assert_eq!(wilson_interval(10, 10).1, 1.0);
}

#[test]
fn experiment_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: ExperimentConfig = toml::from_str(&format!(
        r#"
family = "6.6.6"
distances = [3, 5]
p_grid = [0.002, 0.003, 0.004]
method = "flagged"
scheme = "conventional"
deflag = true
shots = 300
seed = 9
bases = ["X"]
estimation_samples = 20000
table_dir = "{}"
output = "{}"
"#,
        dir.path().join("tables").display(),
        dir.path().join("out").display()
    ))
    .unwrap();
    let results = run_experiment(&cfg).unwrap();
    assert_eq!(results.len(), 6);
    // Tables were cached on the first pass and are reused on the second.
    assert_eq!(std::fs::read_dir(dir.path().join("tables")).unwrap().count(), 6);
    assert_eq!(run_experiment(&cfg).unwrap(), results);
    let fits = fit_groups(&results, (1e-3, 1e-2));
    let written = emit_outputs(&results, &fits, &cfg.output).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert!(names.contains(&"results.csv".to_string()));
    assert_eq!(names.iter().filter(|n| n.starts_with("series_")).count(), 2);
    let header = std::fs::read_to_string(cfg.output.join("results.csv")).unwrap();
    assert!(header.starts_with(
        "family,d,p,method,scheme,deflag,basis,shots,failures,rate,ci_lo,ci_hi,seed,schedule_version,table_version\n"
    ));
    let back = read_results(&cfg.output.join("results.csv")).unwrap();
    assert_eq!(back.len(), results.len());
    for (a, b) in back.iter().zip(&results) {
        assert_eq!((a.d, a.failures, a.shots, a.scheme), (b.d, b.failures, b.shots, b.scheme));
    }
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(toml::from_str::<ExperimentConfig>("family = \"4.8.8\"\nbogus = 1").is_err());
    let cfg: ExperimentConfig = toml::from_str(
        "family = \"4.8.8\"\ndistances = [4]\np_grid = [0.001]\nmethod = \"flagged\"\nscheme = \"uniform\"\nshots = 1\nseed = 1",
    )
    .unwrap();
    assert!(cfg.validate().is_err());
}
