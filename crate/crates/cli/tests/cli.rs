//! End-to-end runs of the `lattice-ent` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lattice_entanglement::bandstructure::wannier_for;
use lattice_entanglement::bound::{entanglement_bound, MomentumSpec};
use lattice_entanglement::imaging::io::read_stack;
use lattice_entanglement::imaging::Analyzer;
use lattice_entanglement::states::OneBodyDM;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-ent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn report_value(dir: &Path, key: &str) -> toml::Value {
    let text = fs::read_to_string(dir.join("report.toml")).unwrap();
    let table: toml::Table = toml::from_str(&text).unwrap();
    table
        .get(key)
        .cloned()
        .unwrap_or_else(|| panic!("no `{key}` in report"))
}

#[test]
fn bands_writes_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d");
    ok(&["bands", "--depth", "9", "--out", p(&out)]);
    for name in [
        "bands.csv",
        "wannier.csv",
        "wannier_fourier.csv",
        "envelope.csv",
    ] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.lines().count() > 2, "{name} is empty");
    }
}

#[test]
fn out_of_range_depth_exits_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let out = run(&["bands", "--depth", "75", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("depth"));
}

#[test]
fn envelope_matches_golden_table() {
    let dir = TempDir::new().unwrap();
    ok(&["bands", "--depth", "9", "--out", p(dir.path())]);
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/envelope_s9.csv");
    let fresh = csv_rows(&dir.path().join("envelope.csv"));
    let reference = csv_rows(&golden);
    assert_eq!(fresh.len(), reference.len());
    for (a, b) in fresh.iter().zip(&reference) {
        for (x, y) in a.iter().zip(b) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() <= 1e-8 * y.abs(), "{x} vs {y}");
        }
    }
}

fn simulate(out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["simulate", "--out", p(out)];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn simulate_writes_stack_deterministically() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let flags = [
        "--sites",
        "2",
        "--atoms",
        "2",
        "--U-over-J",
        "0",
        "--frames",
        "40",
        "--seed",
        "7",
    ];
    simulate(&a, &flags);
    simulate(&b, &flags);
    let frames = fs::read_dir(&a)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("frame_")
        })
        .count();
    assert_eq!(frames, 40);
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
    assert!(a.join("manifest.toml").exists());
}

#[test]
fn single_frame_has_no_statistical_error() {
    let dir = TempDir::new().unwrap();
    let stack = dir.path().join("stack");
    simulate(&stack, &["--frames", "1", "--seed", "3"]);
    let out = dir.path().join("res");
    let stdout = ok(&["analyze", p(&stack), "--out", p(&out)]);
    assert!(stdout.contains("sigma_stat: unavailable"), "{stdout}");
    assert_eq!(
        report_value(&out, "sigma_stat_available"),
        toml::Value::Boolean(false)
    );
}

/// Truth for a CLI-simulated stack from the written correlation matrix.
fn truth(stack_dir: &Path, positions: Vec<[i32; 3]>, total: f64, symmetry: bool) -> f64 {
    let (_, stack) = read_stack(&stack_dir.join("manifest.toml")).unwrap();
    let g = OneBodyDM::read_csv(&stack_dir.join("one_body_dm.csv"), positions).unwrap();
    let g = g.scaled(total / g.n_total());
    let w = wannier_for(&stack.lattice).unwrap();
    let analyzer = Analyzer::for_stack(&stack, &w).unwrap();
    let weights = analyzer
        .weights(&analyzer.default_region().unwrap(), symmetry)
        .unwrap();
    let tau = stack.lattice.tau(stack.tof_time);
    weights
        .iter()
        .map(|&(px, c)| {
            let spec = MomentumSpec::new(analyzer.k(px), tau).unwrap();
            -c * entanglement_bound(&g, &spec).unwrap().witness_expectation
        })
        .sum()
}

fn as_f64(v: toml::Value) -> f64 {
    v.as_float().unwrap()
}

#[test]
fn analyze_recovers_superfluid_truth_and_respects_symmetry_flag() {
    let dir = TempDir::new().unwrap();
    let stack = dir.path().join("stack");
    simulate(
        &stack,
        &[
            "--sites",
            "2",
            "--atoms",
            "2",
            "--U-over-J",
            "0",
            "--frames",
            "20",
            "--seed",
            "11",
        ],
    );
    let positions = vec![[0, 0, 0], [1, 0, 0]];

    let sym_out = dir.path().join("sym");
    ok(&["analyze", p(&stack), "--out", p(&sym_out)]);
    let e = as_f64(report_value(&sym_out, "e_bar_a"));
    let sigma = as_f64(report_value(&sym_out, "sigma_total"));
    let t = truth(&stack, positions.clone(), 1e4, true);
    assert!((e - t).abs() <= 2.0 * sigma, "{e} vs {t} (sigma {sigma})");

    let plain_out = dir.path().join("plain");
    ok(&[
        "analyze",
        p(&stack),
        "--out",
        p(&plain_out),
        "--no-symmetry",
    ]);
    assert_eq!(
        report_value(&plain_out, "symmetry"),
        toml::Value::Boolean(false)
    );
    assert_eq!(
        report_value(&sym_out, "symmetry"),
        toml::Value::Boolean(true)
    );
    // same region, frames and backgrounds; only the averaging differs
    assert_eq!(
        report_value(&plain_out, "region"),
        report_value(&sym_out, "region")
    );
    assert_eq!(
        report_value(&plain_out, "mu0"),
        report_value(&sym_out, "mu0")
    );
    assert_eq!(
        report_value(&plain_out, "n_bar"),
        report_value(&sym_out, "n_bar")
    );
    let e_plain = as_f64(report_value(&plain_out, "e_bar_a"));
    let t_plain = truth(&stack, positions, 1e4, false);
    assert!((e_plain - t_plain).abs() <= 2.0 * as_f64(report_value(&plain_out, "sigma_total")));
    assert_ne!(
        fs::read(sym_out.join("map.csv")).unwrap(),
        fs::read(plain_out.join("map.csv")).unwrap()
    );
}

#[test]
fn deep_mott_stack_gives_no_bound() {
    let dir = TempDir::new().unwrap();
    let stack = dir.path().join("stack");
    simulate(
        &stack,
        &[
            "--sites",
            "2",
            "--atoms",
            "2",
            "--U-over-J",
            "1e9",
            "--frames",
            "20",
            "--seed",
            "5",
        ],
    );
    let out = dir.path().join("res");
    ok(&["analyze", p(&stack), "--out", p(&out)]);
    let e = as_f64(report_value(&out, "e_bar_a"));
    let sigma = as_f64(report_value(&out, "sigma_total"));
    assert!(e <= 3.0 * sigma, "{e} vs {sigma}");
}

#[test]
fn analyze_refuses_to_write_into_stack_and_rejects_bad_manifests() {
    let dir = TempDir::new().unwrap();
    let stack = dir.path().join("stack");
    simulate(&stack, &["--frames", "2"]);
    let before: Vec<_> = fs::read_dir(&stack)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    let out = run(&["analyze", p(&stack), "--out", p(&stack.join("inside"))]);
    assert_eq!(out.status.code(), Some(2));
    let after: Vec<_> = fs::read_dir(&stack)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(before.len(), after.len());

    let broken = dir.path().join("broken");
    fs::create_dir_all(&broken).unwrap();
    fs::write(broken.join("manifest.toml"), "pixel_size = \"wide\"\n").unwrap();
    let out = run(&["analyze", p(&broken), "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_sector_exits_with_capacity_code() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "simulate",
        "--sites",
        "12",
        "--atoms",
        "12",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn config_file_is_validated_and_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[lattice]\ndepth = 20.0\n[simulate]\nframes = 3\nseed = 2\n",
    )
    .unwrap();
    // the configured depth alone spills outside the default frame
    let out = run(&[
        "--config",
        p(&cfg),
        "simulate",
        "--out",
        p(&dir.path().join("deep")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let a = dir.path().join("a");
    ok(&[
        "--config",
        p(&cfg),
        "simulate",
        "--depth",
        "9",
        "--out",
        p(&a),
    ]);
    let manifest: toml::Table =
        toml::from_str(&fs::read_to_string(a.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["frames"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["depth_s"].as_float(), Some(9.0));

    fs::write(&cfg, "[simulate]\nframez = 3\n").unwrap();
    let out = run(&[
        "--config",
        p(&cfg),
        "simulate",
        "--out",
        p(&dir.path().join("b")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn examples_table_matches_closed_forms() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("examples.csv");
    ok(&["examples", "--out", p(&csv)]);
    let rows = csv_rows(&csv);
    let value = |kind: &str, param: &str| -> f64 {
        rows.iter()
            .find(|r| r[0] == kind && r[1] == param)
            .unwrap_or_else(|| panic!("no row {kind} {param}"))[2]
            .parse()
            .unwrap()
    };
    assert!((value("two_mode_psi", "N=1") - 1.0).abs() < 1e-12);
    assert!((value("symmetric", "N=10") - 10.0).abs() < 1e-9);
    assert!((value("data_hiding", "N=1") - 0.5).abs() < 1e-12);
    assert!((value("coherent_mixture", "alpha=1") - 2.0).abs() < 1e-5);
}

fn column(path: &Path, idx: usize) -> Vec<f64> {
    csv_rows(path)
        .iter()
        .map(|r| r[idx].parse().unwrap())
        .collect()
}

#[test]
fn reproduce_writes_monotone_sweeps() {
    let dir = TempDir::new().unwrap();
    ok(&["reproduce", "--out", p(dir.path())]);
    let e_u = column(&dir.path().join("bound_vs_interaction.csv"), 1);
    let e_t = column(&dir.path().join("bound_vs_temperature.csv"), 1);
    assert_eq!(e_u.len(), 6);
    assert!(e_u.windows(2).all(|w| w[1] < w[0]), "{e_u:?}");
    assert!(e_t.windows(2).all(|w| w[1] <= w[0]), "{e_t:?}");
    // three sites on a ring at U = 0: symmetric state, E/N = 1 - |1 - 1 + 1|^2 / 3
    let ratio = column(&dir.path().join("bound_vs_interaction.csv"), 3)[0];
    assert!((ratio - 2.0 / 3.0).abs() < 1e-3, "{ratio}");
}

#[test]
fn two_site_interaction_sweep_reaches_full_bound() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "reproduce",
        "--sites",
        "2",
        "--atoms",
        "2",
        "--out",
        p(dir.path()),
    ]);
    let ratio = column(&dir.path().join("bound_vs_interaction.csv"), 3)[0];
    assert!(ratio > 0.999, "{ratio}");
}

#[test]
fn verify_passes() {
    let stdout = ok(&["verify", "--trials", "200", "--channel-states", "20"]);
    assert!(stdout.matches("status: PASS").count() == 2, "{stdout}");
}
