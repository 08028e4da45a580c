use std::path::Path;
use std::process::{Command, Output};

fn fluordet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluordet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

const SUBCOMMANDS: [&str; 9] = [
    "params",
    "dist",
    "optimize",
    "curve",
    "table1",
    "mc",
    "fit",
    "ccd-sim",
    "crosstalk",
];

#[test]
fn every_subcommand_has_help() {
    assert!(fluordet(&["--help"]).status.success());
    for sub in SUBCOMMANDS {
        let out = fluordet(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in [
            "--config",
            "--out",
            "--seed",
            "--species",
            "--scheme",
            "--eta",
            "--trials",
        ] {
            assert!(text.contains(flag), "{sub} lacks {flag}");
        }
    }
}

#[test]
fn exit_codes_separate_bad_input_from_failures() {
    let dir = tempfile::tempdir().unwrap();

    assert_eq!(fluordet(&["params", "--eta", "1.5"]).status.code(), Some(2));
    assert_eq!(
        fluordet(&["params", "--scheme", "d52"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fluordet(&["params", "--species", "unobtainium"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fluordet(&["params", "--eta"]).status.code(), Some(2));
    assert_eq!(fluordet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fluordet(&["ccd-sim"]).status.code(), Some(2));

    let cfg = write_config(dir.path(), r#"{"register": {"crosstalk_epsilon": 0.01}}"#);
    let out = fluordet(&[
        "ccd-sim",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("register.crosstalk_epsilon"));

    let missing = dir.path().join("absent.json");
    assert_eq!(
        fluordet(&["params", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let missing_csv = dir.path().join("absent.csv");
    let out = fluordet(&[
        "fit",
        "--dark",
        missing_csv.to_str().unwrap(),
        "--bright",
        missing_csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"eta": 0.01, "species": "yb171", "scheme": "p12"}"#,
    );
    let from_file = stdout(&fluordet(&["params", "--config", &cfg]));
    assert_eq!(value(&from_file, "eta"), 0.01);
    assert!(from_file.contains("171Yb+"));
    let overridden = stdout(&fluordet(&["params", "--config", &cfg, "--eta", "0.002"]));
    assert_eq!(value(&overridden, "eta"), 0.002);
    let ratio = value(&from_file, "lambda0") / value(&overridden, "lambda0");
    assert!((ratio - 5.0).abs() < 1e-6, "{ratio}");
    let other = stdout(&fluordet(&[
        "params",
        "--config",
        &cfg,
        "--species",
        "hg199",
    ]));
    assert!(other.contains("199Hg+"));
}

#[test]
fn table_matches_published_fidelities() {
    let printed = [
        ("111Cd+", [0.967, 0.9965, 0.99988]),
        ("171Yb+", [0.9933, 0.9993, 0.99998]),
        ("199Hg+", [0.9943, 0.99943, 0.99998]),
    ];
    let csv = stdout(&fluordet(&["table1"]));
    let rows: Vec<Vec<String>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    for (k, row) in rows.iter().enumerate() {
        let (name, values) = printed[k / 3];
        assert_eq!(row[0], name);
        let f: f64 = row[2].parse().unwrap();
        assert!((f - values[k % 3]).abs() <= 0.003, "{name} row {k}: {f}");
    }
}

#[test]
fn leak_free_distributions_are_poisson() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"lambda0": 6.5, "alpha1": 0, "alpha2": 0}"#);
    let out_dir = dir.path().join("dist");
    stdout(&fluordet(&[
        "dist",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]));

    let rows = |file: &str| -> Vec<(usize, f64)> {
        std::fs::read_to_string(out_dir.join(file))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| {
                let (n, p) = l.split_once(',').unwrap();
                (n.parse().unwrap(), p.parse().unwrap())
            })
            .collect()
    };
    let dark = rows("dark.csv");
    assert_eq!(dark[0].1, 1.0);
    assert!(dark[1..].iter().all(|&(_, p)| p == 0.0));

    let mut pmf = (-6.5f64).exp();
    for (n, p) in rows("bright.csv") {
        if n > 0 {
            pmf *= 6.5 / n as f64;
        }
        assert!(
            (p - pmf).abs() <= 1e-8 * pmf.max(1e-300) + 1e-300,
            "n={n}: {p} vs {pmf}"
        );
    }
}

#[test]
fn simulate_then_fit_recovers_the_light() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"species": "cd111", "eta": 1.4e-3, "saturation_s": 0.25, "tau_d_us": 150, "p_pi": 1.5e-3, "trials": 20000}"#,
    );
    let dark = dir.path().join("dark.csv");
    let bright = dir.path().join("bright.csv");
    for (seed, initial, path) in [("4001", "dark", &dark), ("4002", "bright", &bright)] {
        let args = [
            "mc",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--initial",
            initial,
            "--out",
            path.to_str().unwrap(),
        ];
        stdout(&fluordet(&args));
    }
    let head = std::fs::read_to_string(&dark).unwrap();
    assert!(head.starts_with("# trials=20000 seed=4001 mode=rate_equation\n"));

    let fit_dir = dir.path().join("fit");
    let args = [
        "fit",
        "--dark",
        dark.to_str().unwrap(),
        "--bright",
        bright.to_str().unwrap(),
        "--out",
        fit_dir.to_str().unwrap(),
    ];
    stdout(&fluordet(&args));
    let report = std::fs::read_to_string(fit_dir.join("fit.txt")).unwrap();
    assert!(
        (value(&report, "eta") / 1.4e-3 - 1.0).abs() < 0.05,
        "{report}"
    );
    assert!((value(&report, "s") / 0.25 - 1.0).abs() < 0.10, "{report}");
    assert!(report.contains("converged: true"));
    let table = std::fs::read_to_string(fit_dir.join("model_vs_data.csv")).unwrap();
    assert!(table.starts_with("n,dark_data,dark_model,bright_data,bright_model\n"));
}

#[test]
fn seeded_runs_repeat_exactly() {
    let mc = [
        "mc",
        "--trials",
        "30000",
        "--seed",
        "9",
        "--mode",
        "photon_level",
        "--initial",
        "bright",
    ];
    assert_eq!(stdout(&fluordet(&mc)), stdout(&fluordet(&mc)));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"register": {"calibration_trials": 2000, "pgm_frames": 2}}"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        stdout(&fluordet(&[
            "ccd-sim",
            "--config",
            &cfg,
            "--trials",
            "500",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]));
        [
            "readouts.csv",
            "correlations.txt",
            "frame_0000.pgm",
            "frame_0001.pgm",
        ]
        .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn crosstalk_reports_the_solid_angle_fraction() {
    let text = stdout(&fluordet(&[
        "crosstalk",
        "--wavelength-nm",
        "214.5",
        "--spacing-um",
        "4",
    ]));
    let r = value(&text, "crosstalk_ratio");
    let x = 4000.0 / 214.5;
    let expected = 3.0 / (4.0 * std::f64::consts::PI * x * x);
    assert!((r / expected - 1.0).abs() < 1e-8, "{r} vs {expected}");
}
