//! End-to-end runs of the `boole-lab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boole_lab::svg::{render, SvgOptions};

const BIN: &str = env!("CARGO_BIN_EXE_boole-lab");

struct Case {
    golden: &'static str,
    subcommand: &'static str,
    config: &'static str,
}

const CASES: &[Case] = &[
    Case {
        golden: "mix",
        subcommand: "mix",
        config: "subcommand = \"mix\"\nseed = 7\n[observable]\nname = \"square_wave\"\n[density]\nname = \"normal\"\n[run]\nn = [0, 1, 4]\nmethod = \"monte_carlo\"\nsamples = 20000\nbatches = 20\n",
    },
    Case {
        golden: "zerotype",
        subcommand: "zerotype",
        config: "subcommand = \"zerotype\"\n[run]\nn = [0, 1, 2, 3]\n",
    },
    Case {
        golden: "av",
        subcommand: "av",
        config: "subcommand = \"av\"\n[observable]\nname = \"sine\"\n[run]\ncompose = true\n",
    },
    Case {
        golden: "cone",
        subcommand: "cone",
        config: "subcommand = \"cone\"\n[density]\nname = \"exp_abs\"\nrate = 0.5\n[run]\nk_max = 2\ngrid_points = 500\n",
    },
    Case {
        golden: "hypotheses",
        subcommand: "hypotheses",
        config: "subcommand = \"hypotheses\"\n[map]\nname = \"folded\"\n",
    },
    Case {
        golden: "dist",
        subcommand: "dist",
        config: "subcommand = \"dist\"\nseed = 3\n[observable]\nname = \"fractional_part\"\n[law]\nname = \"normal\"\n[run]\nn = 10\nsamples = 20000\nks_target = \"uniform\"\n",
    },
    Case {
        golden: "birkhoff",
        subcommand: "birkhoff",
        config: "subcommand = \"birkhoff\"\nseed = 3\n[observable]\nname = \"tent_periodized\"\n[law]\nname = \"normal\"\n[run]\nk = 2\nn = 10\nsamples = 20000\n",
    },
    Case {
        golden: "birkhoff_scan",
        subcommand: "birkhoff",
        config: "subcommand = \"birkhoff\"\nseed = 3\n[observable]\nname = \"tent_periodized\"\n[law]\nname = \"uniform\"\nlo = -2\nhi = 2\n[run]\nk = [1, 2]\nn = [5, 10]\nsamples = 5000\n",
    },
    Case {
        golden: "boole-identity",
        subcommand: "boole-identity",
        config: "subcommand = \"boole-identity\"\n[function]\nname = \"gaussian\"\n",
    },
];

fn write_config(dir: &Path, name: &str, src: &str) -> PathBuf {
    let p = dir.join(format!("{name}.cfg"));
    std::fs::write(&p, src).unwrap();
    p
}

fn boole_lab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_case(dir: &Path, case: &Case, tag: &str, extra: &[&str]) -> (Output, String) {
    let cfg = write_config(dir, &format!("{}-{tag}", case.golden), case.config);
    let csv = dir.join(format!("{}-{tag}.csv", case.golden));
    let mut args = vec![case.subcommand, "--config", cfg.to_str().unwrap(), "--csv", csv.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = boole_lab(&args);
    let text = std::fs::read_to_string(&csv).unwrap_or_default();
    (out, text)
}

#[test]
fn csv_schemas_match_golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for case in CASES {
        let (out, csv) = run_case(dir.path(), case, "schema", &[]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", case.golden, String::from_utf8_lossy(&out.stderr));
        let golden = std::fs::read_to_string(golden_dir.join(format!("{}.header", case.golden))).unwrap();
        let header = csv.lines().next().unwrap();
        assert_eq!(format!("{header}\n"), golden, "{}", case.golden);
        let columns = header.split(',').count();
        let rows: Vec<&str> = csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
        assert!(!rows.is_empty(), "{}", case.golden);
        for r in rows {
            assert_eq!(r.split(',').count(), columns, "{}: {r}", case.golden);
        }
        let stdout = String::from_utf8(out.stdout).unwrap();
        let summary = stdout.lines().last().unwrap();
        assert!(summary.starts_with(&format!("{}:", case.subcommand)), "{summary}");
    }
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for case in CASES {
        let (_, a) = run_case(dir.path(), case, "a", &[]);
        let (_, b) = run_case(dir.path(), case, "b", &[]);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{}", case.golden);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let case = &CASES[5];
    let (_, base) = run_case(dir.path(), case, "base", &[]);
    let (_, same) = run_case(dir.path(), case, "same", &["--seed", "3"]);
    let (_, other) = run_case(dir.path(), case, "other", &["--seed", "4"]);
    assert_eq!(base, same);
    assert_ne!(base, other);
}

#[test]
fn svg_is_a_function_of_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let case = &CASES[1];
    let svg_path = dir.path().join("z.svg");
    let (out, csv) = run_case(dir.path(), case, "svg", &["--svg", svg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    let opts = SvgOptions {
        title: "zerotype".into(),
        y_columns: vec!["value".into()],
        ..Default::default()
    };
    assert_eq!(render(&csv, &opts).unwrap(), svg);
}

#[test]
fn example_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mix = CASES.iter().find(|c| c.golden == "mix").unwrap();
    let (_, csv) = run_case(dir.path(), mix, "target", &[]);
    for row in csv.lines().skip(1) {
        assert_eq!(row.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0, "{row}");
    }
    let hyp = CASES.iter().find(|c| c.golden == "hypotheses").unwrap();
    let (out, csv) = run_case(dir.path(), hyp, "report", &[]);
    for row in csv.lines().skip(1).filter(|l| !l.starts_with('#')) {
        assert_eq!(row.split(',').nth(1), Some("pass"), "{row}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("overall: pass"));
    let summary = stdout.lines().last().unwrap();
    assert!(summary.contains("x1=5.25166"), "{summary}");
    assert!(summary.contains("x2=6.90122"), "{summary}");
    assert!(summary.contains("x3=1.93158"), "{summary}");
}

#[test]
fn exit_codes_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "empty", "");
    let out = boole_lab(&["mix", "--config", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing subcommand"));

    let bad = write_config(dir.path(), "bad", "subcommand = \"zerotype\"\n[run]\nn = [1, 2\n");
    let out = boole_lab(&["zerotype", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column"), "{err}");

    let unknown = write_config(dir.path(), "unknown", "subcommand = \"zerotype\"\ncolour = \"red\"\n");
    let out = boole_lab(&["zerotype", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 1: unknown key `colour`"));

    let no_seed = write_config(
        dir.path(),
        "noseed",
        "subcommand = \"dist\"\n[observable]\nname = \"sine\"\n[law]\nname = \"normal\"\n[run]\nn = 1\nsamples = 10\n",
    );
    let out = boole_lab(&["dist", "--config", no_seed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing `seed`"));
    let out = boole_lab(&["dist", "--config", no_seed.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let zt = write_config(dir.path(), "zt", CASES[1].config);
    let out = boole_lab(&["mix", "--config", zt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = boole_lab(&["nonsense", "--config", zt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // quadrature of F∘Tⁿ for the square wave cannot resolve the jumps piling
    // up at 0 within its budget: flagged non-convergence
    let flagged = write_config(
        dir.path(),
        "flagged",
        "subcommand = \"mix\"\nseed = 1\n[observable]\nname = \"square_wave\"\n[density]\nname = \"normal\"\n[run]\nn = [3]\nmethod = \"quadrature\"\nquad_tol = 1e-12\n",
    );
    let out = boole_lab(&["mix", "--config", flagged.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("flagged=true"));
}
