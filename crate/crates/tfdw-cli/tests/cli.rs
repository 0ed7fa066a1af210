//! End-to-end tests of the tfdw binary. Every subcommand is exercised
//! through a real process in a temporary directory, and the assertions
//! read the emitted artifacts rather than trusting the terminal output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use tfdw::io::save_state;
use tfdw::radial::{RadialFunction, RadialGridSpec};
use tfdw::State;

fn tfdw_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfdw"))
        .args(args)
        .current_dir(dir)
        .env_remove("TFDW_OUT")
        .output()
        .expect("the tfdw binary runs")
}

fn assert_exit(out: &Output, expected: i32) {
    let code = out.status.code().expect("no signal");
    assert_eq!(
        code,
        expected,
        "exit {code}, expected {expected}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    name.to_string()
}

/// Artifacts carry the config hash in their names; match on the fixed
/// prefix and suffix instead.
fn find_artifacts(dir: &Path, prefix: &str, suffix: &str) -> Vec<PathBuf> {
    let mut hits: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with(prefix) && n.ends_with(suffix))
                .unwrap_or(false)
        })
        .collect();
    hits.sort();
    hits
}

fn find_artifact(dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    let hits = find_artifacts(dir, prefix, suffix);
    assert_eq!(
        hits.len(),
        1,
        "expected one {prefix}*{suffix} under {}, found {hits:?}",
        dir.display()
    );
    hits.into_iter().next().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(value: &Value, pointer: &str) -> f64 {
    value
        .pointer(pointer)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("no number at {pointer} in {value:#}"))
}

/// Pure-Weizsacker hydrogen setup: the one configuration with a known
/// exact ground energy, -m/4 at charge 1.
fn hydrogen_config() -> Value {
    json!({
        "constants": { "with_tf": false, "with_dirac": false, "with_hartree": false },
        "potential": { "type": "atomic", "z": 1.0 },
        "solve": {
            "m": 0.5,
            "radial_grid": { "kind": "logarithmic", "r_min": 1e-4, "r_max": 40.0, "n": 800 },
            "tol": 1e-9,
            "max_iter": 20000
        }
    })
}

fn free_curve_config(masses: &[f64]) -> Value {
    json!({
        "solve": {
            "m": 1.0,
            "radial_grid": { "kind": "logarithmic", "r_min": 1e-4, "r_max": 50.0, "n": 600 },
            "tol": 1e-7,
            "max_iter": 8000
        },
        "curve": { "masses": masses }
    })
}

// ===========================================================================
// energy
// ===========================================================================

#[test]
fn energy_of_a_unit_gaussian_matches_the_closed_forms() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();

    // Unit-mass, unit-width Gaussian: every term of the free functional
    // has a closed form.
    let grid = RadialGridSpec::default().build().expect("default grid");
    let norm = std::f64::consts::PI.powf(-0.75);
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| norm * (-0.5 * r * r).exp())
        .collect();
    let u = RadialFunction::new(grid, values).expect("gaussian state");
    save_state(&State::from(u), "external", &dir.join("gauss.json")).expect("state saved");

    let out = tfdw_in(dir, &["energy", "gauss.json"]);
    assert_exit(&out, 0);

    let artifact = read_json(&find_artifact(dir, "energy_", ".json"));
    assert_eq!(artifact["format"], json!("tfdw-energy-v1"));
    assert_eq!(artifact["state_hash"], json!("external"));
    // Tolerances cover the default grid's quadrature error (about 1e-5)
    // with margin; a convention slip in any term would miss by far more.
    let checks = [
        ("/breakdown/weizsacker", 1.5, 1e-4),
        ("/breakdown/thomas_fermi", 0.147935889, 1e-4),
        ("/breakdown/dirac", 0.366451598, 1e-4),
        ("/breakdown/external", 0.0, 0.0),
        ("/breakdown/hartree", 0.3989422804014327, 1e-4),
        ("/breakdown/total", 1.6804265714014327, 2e-4),
    ];
    for (pointer, expected, tol) in checks {
        let got = num(&artifact, pointer);
        assert!(
            (got - expected).abs() <= tol,
            "{pointer} = {got}, expected {expected} within {tol}"
        );
    }
}

#[test]
fn energy_on_a_missing_state_file_reports_io_context() {
    let tmp = TempDir::new().unwrap();
    let out = tfdw_in(tmp.path(), &["energy", "nope.json"]);
    assert_exit(&out, 2);
    let err = stderr_text(&out);
    assert!(err.contains("i/o error on nope.json"), "stderr: {err}");
}

#[test]
fn unknown_config_keys_are_rejected_before_artifacts_are_written() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &json!({ "solve": { "m": 1.0 }, "bogus": 1 }));

    let out = tfdw_in(dir, &["--config", &cfg, "minimize"]);
    assert_exit(&out, 2);
    assert!(stderr_text(&out).contains("bogus"));
    let leftovers: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != "run.json")
        .collect();
    assert!(leftovers.is_empty(), "unexpected files: {leftovers:?}");
}

// ===========================================================================
// minimize
// ===========================================================================

#[test]
fn minimize_reproduces_the_hydrogen_ground_energy() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &hydrogen_config());

    let out = tfdw_in(dir, &["--config", &cfg, "minimize"]);
    assert_exit(&out, 0);

    let summary = read_json(&find_artifact(dir, "summary_", ".json"));
    assert_eq!(summary["format"], json!("tfdw-summary-v1"));
    assert_eq!(summary["converged"], json!(true));
    assert_eq!(num(&summary, "/mass_target"), 0.5);
    let total = num(&summary, "/breakdown/total");
    assert!(
        (total + 0.125).abs() <= 0.00125,
        "ground energy {total}, expected -0.125 within 1 percent"
    );

    // The state and the trace come out alongside the summary.
    find_artifact(dir, "state_", ".json");
    let trace = std::fs::read_to_string(find_artifact(dir, "trace_", ".dat")).unwrap();
    assert!(trace.lines().count() >= 2, "trace too short:\n{trace}");
}

#[test]
fn set_overrides_reach_the_solver() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &hydrogen_config());

    let out = tfdw_in(dir, &["--config", &cfg, "--set", "solve.m=0.25", "minimize"]);
    assert_exit(&out, 0);

    let summary = read_json(&find_artifact(dir, "summary_", ".json"));
    assert_eq!(num(&summary, "/mass_target"), 0.25);
}

#[test]
fn free_minimization_finds_negative_energy() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "run.json",
        &json!({
            "solve": {
                "m": 1.0,
                "radial_grid": { "kind": "logarithmic", "r_min": 1e-4, "r_max": 60.0, "n": 900 },
                "tol": 1e-8,
                "max_iter": 20000
            }
        }),
    );

    let out = tfdw_in(dir, &["--config", &cfg, "minimize"]);
    assert_exit(&out, 0);

    let summary = read_json(&find_artifact(dir, "summary_", ".json"));
    let total = num(&summary, "/breakdown/total");
    assert!(total < 0.0, "free minimum at mass 1 is {total}, not negative");
}

// ===========================================================================
// curve
// ===========================================================================

#[test]
fn curve_emits_matching_csv_json_and_gnuplot_tables() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &free_curve_config(&[0.25, 0.5, 1.0]));

    let out = tfdw_in(dir, &["--config", &cfg, "curve"]);
    assert_exit(&out, 0);

    let csv = std::fs::read_to_string(find_artifact(dir, "curve_", ".csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,energy,residual,converged"));
    let masses: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(masses, ["0.25", "0.5", "1"]);

    // The JSON artifact is a valid curve file in its own right.
    let curve = tfdw::curves::import_curve(&find_artifact(dir, "curve_", ".json"))
        .expect("emitted curve imports back");
    assert_eq!(curve.samples.len(), 3);
    assert!(curve.samples.iter().all(|s| s.converged));

    let dat = std::fs::read_to_string(find_artifact(dir, "curve_", ".dat")).unwrap();
    assert_eq!(dat.lines().count(), 3, "gnuplot table:\n{dat}");
}

#[test]
fn curve_resume_reuses_checkpoints_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &free_curve_config(&[0.25, 0.5]));

    let out = tfdw_in(dir, &["--config", &cfg, "curve"]);
    assert_exit(&out, 0);
    let json_path = find_artifact(dir, "curve_", ".json");
    let first = std::fs::read(&json_path).unwrap();
    std::fs::remove_file(&json_path).unwrap();

    // Both checkpoints exist, so the resumed run solves nothing anew.
    let out = tfdw_in(dir, &["--config", &cfg, "--resume", "curve"]);
    assert_exit(&out, 0);
    let second = std::fs::read(&json_path).unwrap();
    assert_eq!(first, second, "resumed curve differs from the original");
}

#[test]
fn parallel_cold_sweeps_match_sequential_ones() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mut config = free_curve_config(&[0.25, 0.5, 1.0]);
    config["curve"]["cold"] = json!(true);
    config["out_dir"] = json!("seq");
    let cfg = write_config(dir, "run.json", &config);

    let out = tfdw_in(dir, &["--config", &cfg, "curve"]);
    assert_exit(&out, 0);
    let out = tfdw_in(
        dir,
        &["--config", &cfg, "--set", "out_dir=par", "--jobs", "2", "curve"],
    );
    assert_exit(&out, 0);

    let seq_path = find_artifact(&dir.join("seq"), "curve_", ".json");
    let par_path = find_artifact(&dir.join("par"), "curve_", ".json");
    assert_eq!(
        seq_path.file_name(),
        par_path.file_name(),
        "sweep mode and physics fix the artifact name"
    );
    assert_eq!(
        std::fs::read(&seq_path).unwrap(),
        std::fs::read(&par_path).unwrap(),
        "parallel sweep changed the samples"
    );
}

#[test]
fn jobs_above_one_requires_a_cold_sweep() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &free_curve_config(&[0.25, 0.5]));

    let out = tfdw_in(dir, &["--config", &cfg, "--jobs", "2", "curve"]);
    assert_exit(&out, 2);
    assert!(stderr_text(&out).contains("curve.cold"));
}

// ===========================================================================
// binding
// ===========================================================================

#[test]
fn binding_derives_splits_from_the_sampled_masses() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &free_curve_config(&[0.25, 0.5, 1.0]));

    let out = tfdw_in(dir, &["--config", &cfg, "curve"]);
    assert_exit(&out, 0);
    let free = find_artifact(dir, "curve_", ".json");

    let out = tfdw_in(
        dir,
        &[
            "--config",
            &cfg,
            "--set",
            r#"potential={"type":"atomic","z":1.0}"#,
            "curve",
        ],
    );
    assert_exit(&out, 0);
    let atomic = find_artifacts(dir, "curve_", ".json")
        .into_iter()
        .find(|p| p != &free)
        .expect("second curve artifact");

    let out = tfdw_in(
        dir,
        &[
            "--config",
            &cfg,
            "--set",
            &format!("binding.curve_v={}", atomic.file_name().unwrap().to_str().unwrap()),
            "--set",
            &format!("binding.curve_0={}", free.file_name().unwrap().to_str().unwrap()),
            "binding",
        ],
    );
    assert_exit(&out, 0);

    // Splits of m into m' + (m - m') with every part on its curve: the
    // pair (1, 0.25) is absent because mass 0.75 was never sampled.
    let csv = std::fs::read_to_string(find_artifact(dir, "binding_", ".csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,m_prime,residual"));
    let pairs: Vec<String> = lines
        .map(|l| {
            let mut it = l.split(',');
            format!("{},{}", it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(
        pairs,
        [
            "0.25,0", "0.25,0.25", "0.5,0", "0.5,0.25", "0.5,0.5", "1,0", "1,0.5", "1,1"
        ],
        "derived split pairs"
    );

    let artifact = read_json(&find_artifact(dir, "binding_", ".json"));
    assert_eq!(artifact["residuals"].as_array().unwrap().len(), 8);
}

#[test]
fn binding_refuses_curves_from_different_configurations() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &free_curve_config(&[0.25, 0.5]));

    let out = tfdw_in(dir, &["--config", &cfg, "curve"]);
    assert_exit(&out, 0);
    let first = find_artifact(dir, "curve_", ".json");

    let out = tfdw_in(dir, &["--config", &cfg, "--set", "solve.tol=1e-6", "curve"]);
    assert_exit(&out, 0);
    let second = find_artifacts(dir, "curve_", ".json")
        .into_iter()
        .find(|p| p != &first)
        .expect("second curve artifact");

    let out = tfdw_in(
        dir,
        &[
            "--config",
            &cfg,
            "--set",
            &format!("binding.curve_v={}", second.file_name().unwrap().to_str().unwrap()),
            "--set",
            &format!("binding.curve_0={}", first.file_name().unwrap().to_str().unwrap()),
            "binding",
        ],
    );
    assert_exit(&out, 2);
    let err = stderr_text(&out);
    assert!(err.contains("refusing to mix"), "stderr: {err}");
}

#[test]
fn binding_reports_missing_samples_for_off_grid_pairs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &free_curve_config(&[0.25, 0.5]));

    let out = tfdw_in(dir, &["--config", &cfg, "curve"]);
    assert_exit(&out, 0);
    let curve = find_artifact(dir, "curve_", ".json");
    let name = curve.file_name().unwrap().to_str().unwrap();

    let out = tfdw_in(
        dir,
        &[
            "--config",
            &cfg,
            "--set",
            &format!("binding.curve_v={name}"),
            "--set",
            &format!("binding.curve_0={name}"),
            "--set",
            "binding.pairs=[[0.5,0.1]]",
            "binding",
        ],
    );
    assert_exit(&out, 2);
    let err = stderr_text(&out);
    assert!(
        err.contains("missing sample") && err.contains("0.1"),
        "stderr: {err}"
    );
}

// ===========================================================================
// diagnose
// ===========================================================================

#[test]
fn diagnose_reports_localization_of_a_saved_minimizer() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &hydrogen_config());

    let out = tfdw_in(dir, &["--config", &cfg, "minimize"]);
    assert_exit(&out, 0);
    let state = find_artifact(dir, "state_", ".json");
    let state_name = state.file_name().unwrap().to_str().unwrap().to_string();

    let out = tfdw_in(
        dir,
        &[
            "--config",
            &cfg,
            "--set",
            &format!("diagnose.state={state_name}"),
            "diagnose",
        ],
    );
    assert_exit(&out, 0);

    let artifact = read_json(&find_artifact(dir, "diagnose_", ".json"));
    assert_eq!(artifact["format"], json!("tfdw-diagnose-v1"));
    assert!((num(&artifact, "/report/mass") - 0.5).abs() < 1e-9);
    assert!(num(&artifact, "/report/system_radius") > 0.0);
    assert_eq!(
        artifact["report"]["localization_gaps"]
            .as_array()
            .unwrap()
            .len(),
        4,
        "one gap row per default radius"
    );

    let conc = std::fs::read_to_string(find_artifact(dir, "concentration_", ".csv")).unwrap();
    assert!(conc.starts_with("R,M_R"), "concentration table:\n{conc}");
    let gaps = std::fs::read_to_string(find_artifact(dir, "localization_gap_", ".dat")).unwrap();
    assert_eq!(gaps.lines().count(), 4, "gap table:\n{gaps}");
}

#[test]
fn diagnose_refuses_states_from_another_configuration() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "run.json", &hydrogen_config());

    let out = tfdw_in(dir, &["--config", &cfg, "minimize"]);
    assert_exit(&out, 0);
    let state = find_artifact(dir, "state_", ".json");
    let state_name = state.file_name().unwrap().to_str().unwrap().to_string();

    let out = tfdw_in(
        dir,
        &[
            "--config",
            &cfg,
            "--set",
            &format!("diagnose.state={state_name}"),
            "--set",
            "solve.tol=1e-6",
            "diagnose",
        ],
    );
    assert_exit(&out, 2);
    let err = stderr_text(&out);
    assert!(err.contains("refusing to mix"), "stderr: {err}");
}

// ===========================================================================
// asymptotics
// ===========================================================================

#[test]
fn asymptotics_tabulates_slopes_against_the_quotient_limit() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "run.json",
        &json!({
            "solve": {
                "m": 1.0,
                "radial_grid": { "kind": "logarithmic", "r_min": 1e-3, "r_max": 90.0, "n": 1200 },
                "tol": 1e-8,
                "max_iter": 20000
            },
            "asymptotics": { "masses": [0.1] }
        }),
    );

    let out = tfdw_in(dir, &["--config", &cfg, "asymptotics"]);
    assert_exit(&out, 0);

    let artifact = read_json(&find_artifact(dir, "asymptotics_", ".json"));
    assert_eq!(artifact["gn_converged"], json!(true));
    assert!(
        num(&artifact, "/supremum") > 0.08,
        "quotient supremum {}",
        num(&artifact, "/supremum")
    );

    let csv = std::fs::read_to_string(find_artifact(dir, "asymptotics_", ".csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,ratio,limit,deviation,linear_ratio"));
    assert_eq!(lines.count(), 1, "one row per requested mass");
}

#[test]
fn asymptotics_requires_the_free_potential() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "run.json",
        &json!({
            "potential": { "type": "atomic", "z": 1.0 },
            "solve": { "m": 1.0 },
            "asymptotics": { "masses": [0.1] }
        }),
    );

    let out = tfdw_in(dir, &["--config", &cfg, "asymptotics"]);
    assert_exit(&out, 2);
    let err = stderr_text(&out);
    assert!(err.contains("free problem"), "stderr: {err}");
}

// ===========================================================================
// output routing
// ===========================================================================

#[test]
fn tfdw_out_redirects_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let mut config = hydrogen_config();
    config["out_dir"] = json!("a");
    let cfg = write_config(dir, "run.json", &config);

    let out = Command::new(env!("CARGO_BIN_EXE_tfdw"))
        .args(["--config", &cfg, "minimize"])
        .current_dir(dir)
        .env("TFDW_OUT", "b")
        .output()
        .expect("the tfdw binary runs");
    assert_exit(&out, 0);

    find_artifact(&dir.join("b"), "summary_", ".json");
    assert!(!dir.join("a").exists(), "configured out_dir was still used");
}
