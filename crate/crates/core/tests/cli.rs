mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::scenario_path;

fn sdn_evb(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdn-evb"))
        .args(&args[..1])
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(&args[1..])
        .env("SDN_EVB_WORKERS", "1")
        .output()
        .unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn check_exits_zero_when_everything_holds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sdn_evb(
        &["check", "--level", "L1"],
        &scenario_path("s1"),
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(tmp.path());
    let names: Vec<_> = r["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "SP_a",
            "SP_b",
            "SP_c",
            "typing",
            "LP_OKstatus",
            "LP_deliv",
            "LP_OKMach"
        ]
    );
    assert!(r["verdicts"].as_array().unwrap()[..6]
        .iter()
        .all(|v| v["verdict"] == "holds"));
    assert_eq!(r["graph"]["nodes"], 7197);
}

#[test]
fn failing_property_exits_one_with_counterexample() {
    let tmp = tempfile::tempdir().unwrap();
    let ltl = tmp.path().join("p.ltl");
    std::fs::write(&ltl, "never_emit: G(not e(ctl_emitPkt))\n").unwrap();
    let out = tmp.path().join("out");
    let o = sdn_evb(
        &["check", "--ltl", ltl.to_str().unwrap()],
        &scenario_path("s1"),
        &out,
    );
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    let v = &r["verdicts"].as_array().unwrap()[4];
    assert_eq!(v["verdict"], "fails");
    assert!(out.join(v["counterexample"].as_str().unwrap()).exists());
}

#[test]
fn report_only_properties_never_fail_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let ltl = tmp.path().join("p.ltl");
    // Some schedules pick up both packets first, others emit in between.
    std::fs::write(&ltl, "report second_pickup: X(e(ctl_havePacket))\n").unwrap();
    let o = sdn_evb(
        &["check", "--ltl", ltl.to_str().unwrap()],
        &scenario_path("s2"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    let v = &r["verdicts"].as_array().unwrap()[4];
    assert_eq!(
        (v["verdict"].as_str(), v["report_only"].as_bool()),
        (Some("fails"), Some(true))
    );
    assert!(tmp.path().join(v["witness"].as_str().unwrap()).exists());
    assert!(tmp
        .path()
        .join(v["counterexample"].as_str().unwrap())
        .exists());
}

#[test]
fn usage_and_input_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let s1 = scenario_path("s1");
    assert_eq!(
        sdn_evb(&["check"], Path::new("/nonexistent.scenario"), tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        sdn_evb(&["check", "--level", "L7"], &s1, tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        sdn_evb(&["check", "--policy", "random"], &s1, tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        sdn_evb(&["frobnicate"], &s1, tmp.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        sdn_evb(&["refine-check", "--level", "L0"], &s1, tmp.path())
            .status
            .code(),
        Some(2)
    );

    let ltl = tmp.path().join("bad.ltl");
    std::fs::write(&ltl, "P: F(\n").unwrap();
    let o = sdn_evb(&["check", "--ltl", ltl.to_str().unwrap()], &s1, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.ltl:1"));

    std::fs::write(&ltl, "P: F(e(ctl_teleport))\n").unwrap();
    assert_eq!(
        sdn_evb(&["check", "--ltl", ltl.to_str().unwrap()], &s1, tmp.path())
            .status
            .code(),
        Some(2)
    );

    let bad = tmp.path().join("bad.scenario");
    std::fs::write(&bad, "name = \"x\"\nunknown_key = 1\n").unwrap();
    assert_eq!(
        sdn_evb(&["explore"], &bad, tmp.path()).status.code(),
        Some(2)
    );

    let o = Command::new(env!("CARGO_BIN_EXE_sdn-evb"))
        .args(["explore", "--scenario"])
        .arg(&s1)
        .arg("--out")
        .arg(tmp.path())
        .env("SDN_EVB_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_mode_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let s1 = scenario_path("s1");
    for (mode, extra) in [
        ("simulate", vec!["--policy", "priority", "--level", "L2"]),
        ("explore", vec!["--depth", "10", "--branch", "2"]),
        ("refine-check", vec!["--level", "L3", "--depth", "12"]),
        (
            "decompose-check",
            vec!["--level", "L0", "--component-depth", "6"],
        ),
    ] {
        let out = tmp.path().join(mode);
        let mut args = vec![mode];
        args.extend(extra);
        let o = sdn_evb(&args, &s1, &out);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{mode}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(report(&out)["mode"], mode);
    }
    assert!(tmp.path().join("simulate/trace.jsonl").exists());
    assert!(tmp.path().join("decompose-check/controller.toml").exists());
    assert_eq!(
        report(&tmp.path().join("explore"))["graph"]["complete"],
        false
    );
}
