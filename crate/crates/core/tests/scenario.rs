use std::fs;
use std::path::Path;
use std::process::{Command as Proc, Output};

use edgar_twin::fmt::num;
use edgar_twin::scenario::*;
use edgar_twin::store::RideStore;
use proptest::prelude::*;

mod common;
use common::*;

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_edgar-twin"))
}

fn cli(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn text(o: &Output) -> (String, String) {
    (String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn parse(text: &str) -> ScenarioConfig {
    parse_scenario_str(text, Path::new(".")).unwrap()
}

fn lines_of<'a>(report: &'a ScenarioReport, title: &str) -> &'a [String] {
    match &report.section(title).unwrap().body {
        SectionBody::Lines(l) => l,
        other => panic!("{title}: {other:?}"),
    }
}

#[test]
fn straight_line_at_30_kmh() {
    let cfg = parse("name = \"straight\"\nduration = 10.0\ninitial_speed_kmh = 30.0\n[store]\nscene_duration = 5.0\n");
    let run = run_scenario(&cfg).unwrap();
    assert!(run.report.passed(), "{}", run.report.render());
    // v t kinematics
    let expect = 30.0 / 3.6 * 10.0;
    let dynamics = lines_of(&run.report, "dynamics");
    assert!(dynamics.iter().any(|l| l == &format!("distance: {} m", num(expect))), "{dynamics:?}");

    let tmp = tempfile::tempdir().unwrap();
    write_outputs(&run, tmp.path(), false).unwrap();
    let store = RideStore::load(&tmp.path().join("ride")).unwrap();
    assert!(store.integrity_check().is_clean());
    assert_eq!(store.rides[0].id, "straight-0001");
    let ts: std::collections::BTreeMap<&str, f64> =
        store.samples.iter().map(|s| (s.id.as_str(), s.timestamp)).collect();
    for p in &store.ego_poses {
        let t = ts[p.sample_id.as_str()];
        assert!((p.pose.x - 30.0 / 3.6 * t).abs() < 1e-6, "{t} {}", p.pose.x);
        assert_eq!(p.pose.y, 0.0);
    }
    let last = store.ego_poses.iter().map(|p| p.pose.x).fold(0.0, f64::max);
    assert!(last > 80.0 && last <= expect + 1e-9, "{last}");
    let csv = fs::read_to_string(tmp.path().join("dynamics.csv")).unwrap();
    let end = csv.lines().last().unwrap();
    let x: f64 = end.split(',').nth(1).unwrap().parse().unwrap();
    assert!((x - expect).abs() < 1e-3, "{end}");
}

#[test]
fn disabled_sections_are_marked() {
    let run = run_scenario(&parse("duration = 1.0\n")).unwrap();
    let text = run.report.render();
    for title in ["iso4138", "coverage", "ptp", "network", "store"] {
        assert!(text.contains(&format!("== {title} ==\ndisabled\n")), "{text}");
    }
    assert!(text.contains("status: ok"));
    assert!(text.contains("== effective config ==\nname = \"scenario\""));
    assert_eq!(run.report.exit_code(), 0);
}

#[test]
fn csv_numbers_round_trip_at_six_digits() {
    let cfg = parse("duration = 3.0\ninitial_speed = 5.0\n[[maneuver.step]]\nt = 0.5\nswa_deg = 40.0\nspeed = 7.0\n");
    let run = run_scenario(&cfg).unwrap();
    let csv = &run.artifacts.iter().find(|a| a.0 == "dynamics.csv").unwrap().1;
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(DYNAMICS_CSV_HEADER));
    let mut rows = 0;
    for line in lines {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(num(v), field);
        }
        rows += 1;
    }
    assert_eq!(rows, 301);
}

#[test]
fn high_dynamic_speed_is_capped_at_130_kmh() {
    let m = DrivingMode::HighDynamic;
    let l = limit_command(m, &ModeLimits::for_mode(m), Command { speed_target: 140.0 / 3.6, ..Default::default() })
        .unwrap();
    assert_eq!(l.command.speed_target, 130.0 / 3.6);
    assert_eq!(format!("{:.4}", l.command.speed_target), "36.1111");
    assert!(l.flags.speed);

    let cfg = parse(
        "duration = 20.0\nmode = \"high_dynamic\"\ninitial_speed_kmh = 120.0\n\
         [[maneuver.step]]\nt = 0.0\nspeed_kmh = 140.0\n",
    );
    let run = run_scenario(&cfg).unwrap();
    let csv = &run.artifacts.iter().find(|a| a.0 == "dynamics.csv").unwrap().1;
    let vmax = csv.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(vmax <= 130.0 / 3.6 * (1.0 + 1e-5), "{vmax}");
    assert!(vmax > 130.0 / 3.6 - 0.01, "{vmax}");
    let dynamics = lines_of(&run.report, "dynamics");
    assert!(dynamics.iter().any(|l| l.starts_with("clamped steps: speed 20000,")), "{dynamics:?}");
}

#[test]
fn autonomous_acceleration_is_capped() {
    let cfg = parse("duration = 3.0\n[[maneuver.step]]\nt = 0.0\nspeed_kmh = 50.0\naccel = 3.0\n");
    let run = run_scenario(&cfg).unwrap();
    let csv = &run.artifacts.iter().find(|a| a.0 == "dynamics.csv").unwrap().1;
    let at = |t: &str| -> f64 {
        let row = csv.lines().find(|l| l.starts_with(&format!("{t},"))).unwrap();
        row.split(',').nth(4).unwrap().parse().unwrap()
    };
    // 2.5 m/s^2 from standstill; the first step starts without rolling resistance feedforward
    assert!((at("1") - 2.5).abs() < 2e-4, "{}", at("1"));
    assert!((at("2") - at("1") - 2.5).abs() < 1e-4, "{}", at("2"));
}

#[test]
fn steering_follows_the_rate_limit() {
    let cfg = parse("duration = 2.0\ninitial_speed = 5.0\n[[maneuver.step]]\nt = 0.0\nswa_deg = 90.0\n");
    let run = run_scenario(&cfg).unwrap();
    let csv = &run.artifacts.iter().find(|a| a.0 == "dynamics.csv").unwrap().1;
    let ratio = edgar_twin::dynamics::VehicleParams::default().steering_ratio;
    let row = csv.lines().find(|l| l.starts_with("1,")).unwrap();
    let delta: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
    // 0.3 rad/s for one second; a row holds the input applied over the following step
    assert!((delta * ratio - 0.3).abs() <= 0.3 * 0.001 + 1e-5, "{row}");
}

const FULL: &str = r#"
name = "full"
duration = 4.0
seed = 11
initial_speed_kmh = 20.0

[[maneuver.step]]
t = 1.0
swa_deg = 30.0

[coverage]
cell = 1.0
window = 20.0
min_range = false

[ptp]

[network]
preset = "seven_hop"

[store]
scene_duration = 1.5
"#;

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("full.toml"), FULL).unwrap();
    for out in ["a", "b"] {
        let o = cli(tmp.path(), &["run", "full.toml", "--out", out]);
        assert!(o.status.success(), "{:?}", text(&o));
    }
    let (a, b) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert!(a.len() > 10);
    assert_eq!(a, b);
    let report = String::from_utf8(a.iter().find(|f| f.0 == "report.txt").unwrap().1.clone()).unwrap();
    assert!(report.contains("PASS sr_a SR-A"), "{report}");
    assert!(report.contains("integrity: clean"), "{report}");
    assert!(!report.contains("runtime"));

    // another seed moves the clock noise and with it the ride
    let o = cli(tmp.path(), &["run", "full.toml", "--out", "c", "--seed", "12"]);
    assert!(o.status.success());
    let c = files(&tmp.path().join("c"));
    assert_ne!(a.iter().find(|f| f.0 == "ptp_offsets.csv"), c.iter().find(|f| f.0 == "ptp_offsets.csv"));
    assert!(c.iter().any(|f| f.0.starts_with("ride/full-0012")));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let write = |name: &str, body: &str| fs::write(dir.join(name), body).unwrap();

    write("unknown.toml", "duration = 1.0\nturbo = true\n");
    let o = cli(dir, &["run", "unknown.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).1.contains("turbo"), "{:?}", text(&o));

    write("series.toml", "duration = 1.0\nmode = \"series\"\n[[maneuver.step]]\nt = 0.5\nspeed = 3.0\n");
    let o = cli(dir, &["run", "series.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).1.contains("electronically separated"));

    write("fifo.toml", "duration = 1.0\n[network]\npreset = \"seven_hop\"\nqos = \"fifo\"\nduration = 0.05\n");
    let o = cli(dir, &["run", "fifo.toml", "--out", "fifo"]);
    assert_eq!(o.status.code(), Some(3));
    let report = fs::read_to_string(dir.join("fifo/report.txt")).unwrap();
    assert!(report.contains("FAIL network flow sr_a"), "{report}");
    assert!(report.contains("status: FAIL"));
    let o = cli(dir, &["netcheck", "fifo.toml"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).0.contains("FAIL sr_a"));

    write("cbs.toml", "duration = 1.0\n[network]\npreset = \"seven_hop\"\n");
    let o = cli(dir, &["netcheck", "cbs.toml"]);
    assert_eq!(o.status.code(), Some(0), "{:?}", text(&o));
    assert!(text(&o).0.contains("PASS sr_a"));

    write(
        "raw_rig.toml",
        "[[sensor]]\nid = \"mid_cam\"\nmodality = \"camera\"\nh_fov_deg = 60.0\nv_fov_deg = 40.0\n\
         max_range = 100.0\nrate = 40.0\npayload_per_frame = 6912000\nposition = [0.0, 0.0, 2.0]\n",
    );
    write("raw.toml", "duration = 1.0\nrig = \"raw_rig.toml\"\n[network]\n");
    let o = cli(dir, &["run", "raw.toml", "--out", "raw"]);
    assert_eq!(o.status.code(), Some(2));
    let report = fs::read_to_string(dir.join("raw/report.txt")).unwrap();
    assert!(report.contains("status: INCOMPLETE") && report.contains("mid_cam"), "{report}");
    // the dynamics had finished before the network failed
    assert!(dir.join("raw/dynamics.csv").is_file());

    let o = cli(dir, &["run"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn store_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("s.toml"), "name = \"q\"\nduration = 6.0\ninitial_speed = 3.0\n[store]\nscene_duration = 2.0\n").unwrap();
    assert!(cli(dir, &["run", "s.toml", "--out", "o"]).status.success());
    let o = cli(dir, &["store", "check", "o/ride"]);
    assert_eq!(o.status.code(), Some(0));
    let o = cli(dir, &["store", "query", "o/ride", "dynamics.speed.low AND sensors.modality.lidar"]);
    assert_eq!(text(&o).0, "q-0001-scene-0000\nq-0001-scene-0001\nq-0001-scene-0002\n");
    let o = cli(dir, &["store", "query", "o/ride", "NOT"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).1.contains("position 3"));

    let samples = dir.join("o/ride/q-0001/sample.jsonl");
    let body = fs::read_to_string(&samples).unwrap();
    fs::write(&samples, body.split_once('\n').unwrap().1).unwrap();
    let o = cli(dir, &["store", "check", "o/ride"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).0.contains("sample_data"));
}

#[test]
fn standalone_tools() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(tmp.path(), &["coverage", "edgar", "--window", "20", "--cell", "1", "--csv", "cov.csv"]);
    assert!(o.status.success(), "{:?}", text(&o));
    assert!(text(&o).0.starts_with("grid: 40 x 40 cells"));
    assert!(tmp.path().join("cov.csv").is_file());

    let o = cli(tmp.path(), &["iso4138", "edgar", "--swa", "45", "--mode", "continuous"]);
    assert!(o.status.success(), "{:?}", text(&o));
    let (out, err) = text(&o);
    assert_eq!(out.lines().count(), 27);
    assert!(err.contains("26 of 26 points converged"), "{err}");

    let o = cli(tmp.path(), &["iso4138", "edgar", "--swa", "600"]);
    assert_eq!(o.status.code(), Some(1));
}

fn limits() -> impl Strategy<Value = (DrivingMode, ModeLimits)> {
    prop_oneof![Just(DrivingMode::Autonomous), Just(DrivingMode::HighDynamic)].prop_flat_map(|m| {
        let base = ModeLimits::for_mode(m);
        (0.1f64..1.0, 0.1f64..1.0).prop_map(move |(a, b)| {
            let mut l = base;
            l.max_speed *= a;
            if l.max_accel.is_finite() {
                l.max_accel *= b;
            }
            (m, l)
        })
    })
}

proptest! {
    #[test]
    fn limiting_is_idempotent_and_sign_preserving(
        (mode, lim) in limits(),
        speed in -60.0f64..60.0,
        rate in -5.0f64..5.0,
        accel in -20.0f64..20.0,
    ) {
        let cmd = Command { speed_target: speed, steering_rate: rate, accel };
        let once = limit_command(mode, &lim, cmd).unwrap();
        let twice = limit_command(mode, &lim, once.command).unwrap();
        prop_assert_eq!(twice.command, once.command);
        prop_assert!(!twice.flags.any());
        let pairs = [
            (cmd.speed_target, once.command.speed_target, once.flags.speed),
            (cmd.steering_rate, once.command.steering_rate, once.flags.steering_rate),
            (cmd.accel, once.command.accel, once.flags.accel),
        ];
        for (before, after, flag) in pairs {
            prop_assert!(after.abs() <= before.abs());
            prop_assert!(after == 0.0 || after.signum() == before.signum());
            prop_assert_eq!(flag, after != before);
        }
        prop_assert!(once.command.speed_target.abs() <= lim.max_speed);
        prop_assert!(once.command.accel <= lim.max_accel && once.command.accel >= -lim.max_decel);
    }
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            parse_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}
