use std::path::Path;
use std::process::{Command, Output};

use winkler::format;
use winkler::manifest::Manifest;
use winkler::run;
use winkler_core::harness::Mode;

fn winkler(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_winkler"))
        .args(args)
        .current_dir(cwd)
        .env("WINKLER_OUT", cwd.join("root"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Every file under `dir`, relative to it.
fn tree(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn invert_example_creates_the_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let o = winkler(
        tmp.path(),
        &[
            "invert",
            "--test-case",
            "exp",
            "--gamma",
            "0.01",
            "--J",
            "100",
            "--seed",
            "7",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tmp.path().join("root/inverse_exp_gamma1e-2_seed7");
    for f in run::output_files(Mode::Inverse)
        .into_iter()
        .chain([run::MANIFEST])
    {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let m = Manifest::read(&dir.join(run::MANIFEST)).unwrap();
    for key in [
        "mode",
        "truth",
        "n",
        "gamma",
        "beta",
        "J",
        "sigma_mode",
        "dt",
        "N",
        "seed",
        "k_floor",
        "gamma_reg",
    ] {
        assert!(m.get(key).is_some(), "{key}");
    }
    assert!(m.get("stop_reason").is_some() && m.get("eta_norm").is_some());
    let rows = format::read_report(&dir.join(run::REPORT)).unwrap();
    assert_eq!(
        rows.last().unwrap().iter.to_string(),
        m.get("iterations").unwrap()
    );
}

#[test]
fn forward_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = winkler(
            tmp.path(),
            &[
                "forward",
                "--k",
                "constant:1.0",
                "--dump-matrix",
                "--out",
                out,
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let files = tree(&tmp.path().join("a"));
    assert_eq!(
        files,
        ["k.csv", "load.csv", "manifest", "matrix.csv", "w.csv"]
    );
    for f in files {
        let a = std::fs::read(tmp.path().join("a").join(&f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(&f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn negative_gamma_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = winkler(tmp.path(), &["invert", "--gamma", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--gamma"), "{}", stderr(&o));
    assert!(tree(tmp.path()).is_empty());
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["invert", "--bogus"][..],
        &["invert", "--J", "1"],
        &["invert", "--N", "0"],
        &["invert", "--n", "3"],
        &["invert", "--noise-free", "--gamma", "0.1"],
        &["invert", "--sigma-mode", "sometimes"],
        &["reproduce"],
        &["reproduce", "--figure", "9"],
        &["report", "does-not-exist"],
        &["invert", "--manifest", "missing-manifest"],
        &[],
    ] {
        let o = winkler(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = winkler(tmp.path(), &["invert", "--J", "1"]);
    assert!(stderr(&o).contains("--J"));
    for args in [&["--help"][..], &["invert", "--help"], &["--version"]] {
        assert_eq!(winkler(tmp.path(), args).status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn solver_breakdown_exits_two_after_writing_a_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = winkler(
        tmp.path(),
        &["invert", "--beta", "1e12", "--N", "5", "--out", "run"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let dir = tmp.path().join("run");
    let m = Manifest::read(&dir.join(run::MANIFEST)).unwrap();
    assert_eq!(m.get("stop_reason"), Some("solver_failure"));
    assert!(m.get("failure").unwrap().contains("linear solve failed"));
    assert!(format::read_report(&dir.join(run::REPORT))
        .unwrap()
        .is_empty());

    let o = winkler(
        tmp.path(),
        &["forward", "--k", "constant:-1e7", "--out", "fw"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_stay_inside_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = winkler(
        tmp.path(),
        &["observe", "--test-case", "piecewise", "--seed", "3"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = winkler(
        tmp.path(),
        &[
            "invert",
            "--mode",
            "direct",
            "--J",
            "10",
            "--N",
            "3",
            "--dump-prior",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = tree(tmp.path());
    assert!(files.iter().all(|f| f.starts_with("root/")), "{files:?}");
    let obs = "root/observe_piecewise_gamma5e-3_seed3/";
    for f in ["manifest", "obs.csv", "truth.csv", "w_true.csv"] {
        assert!(files.contains(&format!("{obs}{f}")), "{f}");
    }
    let direct = "root/direct_exp_gamma1e-2_seed0/";
    assert!(files.contains(&format!("{direct}w_true.csv")));
    assert!(files.contains(&format!("{direct}prior/member_9.csv")));
    assert!(files.contains(&format!("{direct}prior/manifest")));
}

#[test]
fn reproduce_targets_enumerate_the_noise_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = winkler(tmp.path(), &["reproduce", "--figure", "5", "--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 3);
    for (line, gamma) in lines.iter().zip(["gamma=0.01", "gamma=1e-8", "gamma=0.0"]) {
        assert!(
            line.contains("truth=exp") && line.contains(gamma) && line.contains("mode=inverse"),
            "{line}"
        );
    }
    let o = winkler(
        tmp.path(),
        &["reproduce", "--figure", "8", "--dry-run", "--full-scale"],
    );
    assert!(stdout(&o)
        .lines()
        .all(|l| l.contains("truth=piecewise") && l.contains("J=100")));
    let o = winkler(tmp.path(), &["reproduce", "--all", "--dry-run"]);
    assert_eq!(stdout(&o).lines().count(), 8);
    assert!(tree(tmp.path()).is_empty());
}

#[test]
fn reproduce_records_the_figure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = winkler(
        tmp.path(),
        &["reproduce", "--figure", "3", "--threads", "2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tmp.path().join("root/reproduce/fig3_exp_direct_gamma1e-2");
    let m = Manifest::read(&dir.join(run::MANIFEST)).unwrap();
    assert_eq!(m.get("figure"), Some("3"));
    assert_eq!(m.get("mode"), Some("direct"));

    let o = winkler(tmp.path(), &["report", dir.to_str().unwrap(), "--rows"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("stop_reason"));
    assert!(text.contains("iter,theta,resid_mean,dev_mean,theta_min,theta_max"));
}
