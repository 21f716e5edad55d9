//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use edgar_twin::dynamics::*;
use edgar_twin::net::*;
use edgar_twin::ptp::*;
use edgar_twin::scenario::{self, limit_command, Command, DrivingMode, ModeLimits};
use edgar_twin::sensors::*;
use edgar_twin::store::{align_samples, slowest_stream, RideStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    let s = elapsed.as_secs_f64();
    if s < limit {
        Ok(())
    } else {
        Err(format!("took {s:.1} s, limit {limit} s"))
    }
}

fn tire_model() -> Outcome {
    let start = Instant::now();
    let loads = static_axle_loads(&VehicleParams::default());
    let mut worst_slope = 0.0f64;
    for (tire, f_z) in [(TireParams::FRONT, loads.f_z_f), (TireParams::REAR, loads.f_z_r)] {
        let d = tire.d_scale * f_z;
        let n = 200_000;
        for k in 0..=n {
            let a = -1.0 + 2.0 * k as f64 / n as f64;
            let f = pacejka_lateral_force(a, &tire, f_z);
            ensure!(f == -pacejka_lateral_force(-a, &tire, f_z), "not odd at alpha {a}");
            ensure!(f.abs() <= d * (1.0 + 1e-6), "|F_y| {f} above D {d} at alpha {a}");
        }
        let h = 1e-7;
        let slope = (pacejka_lateral_force(h, &tire, f_z) - pacejka_lateral_force(-h, &tire, f_z)) / (2.0 * h);
        let bcd = tire.b * tire.c * d;
        let rel = ((slope - bcd) / bcd).abs();
        ensure!(rel < 1e-4, "origin slope {slope} vs BCD {bcd}");
        worst_slope = worst_slope.max(rel);
    }
    within(start.elapsed(), 1.0)?;
    Ok(format!("odd, bounded by D, origin slope within {worst_slope:.1e} of BCD"))
}

fn axle_loads() -> Outcome {
    let p = VehicleParams::default();
    let loads = static_axle_loads(&p);
    // moment balance about each contact patch
    let l = p.l_f + p.l_r;
    let front = p.m * p.g * p.l_r / l;
    let rear = p.m * p.g * p.l_f / l;
    for (got, oracle, quoted) in [(loads.f_z_f, front, 10376.0), (loads.f_z_r, rear, 14345.2)] {
        ensure!(((got - oracle) / oracle).abs() < 1e-6, "{got} vs moment balance {oracle}");
        // the quoted figures are rounded
        ensure!(((got - quoted) / quoted).abs() < 1e-4, "{got} vs {quoted}");
    }
    Ok(format!("F_z_f {:.2} N, F_z_r {:.2} N", loads.f_z_f, loads.f_z_r))
}

fn integrator_order() -> Outcome {
    let start = Instant::now();
    let model = SingleTrack::edgar();
    let reference = sine_steer_final(&model, 0.05e-3, 2.0);
    let dts = [4e-3, 2e-3, 1e-3, 0.5e-3];
    let errs: Vec<f64> = dts.iter().map(|&dt| max_abs_diff(&sine_steer_final(&model, dt, 2.0), &reference)).collect();
    let order = fitted_order(&dts, &errs);
    ensure!((3.5..=4.5).contains(&order), "order {order:.3}, errors {errs:?}");
    within(start.elapsed(), 30.0)?;
    Ok(format!("fitted order {order:.3}"))
}

fn kinematic_limit() -> Outcome {
    let model = SingleTrack::edgar();
    let swa = 0.05 * model.params.steering_ratio;
    let rep = run_iso4138_discrete(&model, swa, &[5.0 / 3.6], &Iso4138Options::default()).map_err(|e| e.to_string())?;
    let p = rep.points[0];
    ensure!(p.converged, "5 km/h point did not settle");
    let rel = (p.yaw_rate - 0.02337) / 0.02337;
    ensure!(rel.abs() < 0.02, "yaw rate {} ({:+.2}%)", p.yaw_rate, rel * 100.0);
    Ok(format!("yaw rate {:.5} rad/s ({:+.2}%)", p.yaw_rate, rel * 100.0))
}

fn iso4138_sweep() -> Outcome {
    let start = Instant::now();
    let model = SingleTrack::edgar();
    let swa = 45f64.to_radians();
    let speeds = default_speeds();
    ensure!(speeds.len() == 26, "expected 5..130 km/h in 5 km/h steps");
    let opts = Iso4138Options::default();
    let discrete = run_iso4138_discrete(&model, swa, &speeds, &opts).map_err(|e| e.to_string())?;
    ensure!(discrete.points.len() == speeds.len(), "{} points for {} speeds", discrete.points.len(), speeds.len());
    for p in &discrete.points {
        ensure!(!p.converged || (p.yaw_rate.is_finite() && p.lateral_accel.is_finite()), "non-finite point {p:?}");
    }
    let continuous = run_iso4138_continuous(&model, swa, 0.1, &speeds, &opts).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut shared = 0;
    for (d, c) in discrete.points.iter().zip(&continuous.points) {
        ensure!((d.speed - c.speed).abs() < 1e-3, "speed mismatch {} vs {}", d.speed, c.speed);
        if d.converged && c.converged {
            let rel = ((c.yaw_rate - d.yaw_rate) / d.yaw_rate).abs();
            ensure!(rel < 0.03, "at {:.1} km/h continuous {} vs discrete {}", d.speed * 3.6, c.yaw_rate, d.yaw_rate);
            worst = worst.max(rel);
            shared += 1;
        }
    }
    ensure!(shared > 0, "no speed converged in both tests");
    within(start.elapsed(), 120.0)?;
    let flagged = discrete.points.len() - discrete.converged_points().count();
    Ok(format!("{shared} shared points, worst yaw-rate gap {:.2}%, {flagged} flagged", worst * 100.0))
}

fn coverage_oracle() -> Outcome {
    let rig = edgar_rig();
    let window = GridWindow::centered(30.0, 30.0, 0.25);
    let map = coverage_map(&rig, &window, DEFAULT_QUERY_HEIGHT).map_err(|e| e.to_string())?;
    let (nx, ny) = map.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut agree = 0;
    for _ in 0..n {
        let (ix, iy) = (rng.gen_range(0..nx), rng.gen_range(0..ny));
        let c = window.cell_center(ix, iy);
        let p = [c[0], c[1], DEFAULT_QUERY_HEIGHT];
        let ok = [Modality::Camera, Modality::Lidar, Modality::Radar]
            .into_iter()
            .all(|m| map.count(m, ix, iy) == oracle_count(&rig, m, p));
        agree += usize::from(ok);
    }
    let frac = agree as f64 / n as f64;
    ensure!(frac >= 0.999, "agreement {frac}");

    let mut ranges = Vec::new();
    for m in [Modality::Camera, Modality::Lidar, Modality::Radar] {
        let Some(r) = min_full_coverage_range(&rig, m, &SweepOptions::default()).map_err(|e| e.to_string())? else {
            continue;
        };
        let r_hit = r + 1e-5;
        let gap = (0..3600).find(|&k| {
            let a = (k as f64 * 0.1).to_radians();
            oracle_count(&rig, m, [r_hit * a.cos(), r_hit * a.sin(), DEFAULT_QUERY_HEIGHT]) == 0
        });
        ensure!(gap.is_none(), "{} ring at {r} m open at {} deg", m.name(), gap.unwrap_or(0) as f64 * 0.1);
        ranges.push(format!("{} {r:.2} m", m.name()));
    }
    ensure!(!ranges.is_empty(), "no modality closes a ring");
    Ok(format!("agreement {:.2}%, gap-free rings: {}", frac * 100.0, ranges.join(", ")))
}

fn ptp() -> Outcome {
    let start = Instant::now();
    // zero-noise symmetric exchange
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let master = ClockModel::ideal(ClockRole::Gm);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let offset = rng.gen_range(-1e-2..1e-2);
        let delay = rng.gen_range(0.0..1e-3);
        let t = rng.gen_range(0.0..1000.0);
        let turnaround = rng.gen_range(0.0..1e-2);
        let slave = ClockModel::new(ClockRole::Oc, offset, 0.0, 0.0).map_err(|e| e.to_string())?;
        let r = sync_exchange(&master, &slave, &SyncPath::symmetric(delay), t, turnaround, true, &mut rng)
            .map_err(|e| e.to_string())?;
        worst = worst.max((r.offset_estimate - offset).abs());
    }
    // floating-point rounding of timestamps near t = 1000 s only
    ensure!(worst <= 1e-12, "offset error {worst:e}");

    // residence sweep through a transparent clock
    let bc = ClockModel::ideal(ClockRole::Bc);
    let slave = ClockModel::new(ClockRole::Oc, 20e-6, 0.0, 0.0).map_err(|e| e.to_string())?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=100 {
        let path = SyncPath {
            link_delay_ms: 1e-6,
            link_delay_sm: 1e-6,
            residence_ms: vec![k as f64 * 1e-5],
            residence_sm: vec![2e-6],
        };
        let r = sync_exchange(&bc, &slave, &path, 10.0, 1e-4, true, &mut rng).map_err(|e| e.to_string())?;
        lo = lo.min(r.offset_estimate);
        hi = hi.max(r.offset_estimate);
    }
    ensure!(hi - lo < 1e-9, "estimate varies {:e} s over the residence sweep", hi - lo);

    // drifting chain with timestamp noise
    let p = ChainParams::default();
    ensure!((p.drift_rate - 7.92e-9).abs() < 1e-11 && p.noise_sigma == 100e-9, "unexpected chain defaults {p:?}");
    let ocs: Vec<String> = (0..20).map(|i| format!("sensor{i}")).collect();
    let topo = SyncTopology::vehicle_chain(&ocs, &p).map_err(|e| e.to_string())?;
    let res = run_sync_simulation(&topo, &SyncConfig { duration: 600.0, sync_interval: 1.0, seed: 11, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let rms = res.summary.steady_rms;
    ensure!(rms < 1e-6, "steady-state RMS {rms:e} s");
    within(start.elapsed(), 10.0)?;
    Ok(format!("exchange error {worst:.1e} s, sweep spread {:.1e} s, steady RMS {:.1} ns", hi - lo, rms * 1e9))
}

fn simulate_for(topo: &NetTopology, flows: &[Flow], qos: QosMode, duration: f64) -> Result<SimReport, String> {
    let cfg = SimConfig { duration, qos, enforce_min_duration: false, ..Default::default() };
    simulate(topo, flows, &cfg).map_err(|e| e.to_string())
}

fn sr_a(rep: &SimReport) -> Result<&FlowStats, String> {
    rep.flows.iter().find(|f| f.flow_id == "sr_a").ok_or_else(|| "no sr_a flow".to_string())
}

fn network_exactness() -> Outcome {
    let start = Instant::now();
    let idle = SevenHopOptions { cross_flows: 0, ..Default::default() };
    let (topo, flows) = seven_hop_scenario(&idle).map_err(|e| e.to_string())?;
    let rep = simulate_for(&topo, &flows, QosMode::Cbs, 0.02)?;
    let s = sr_a(&rep)?;
    // 8 links of 1.024 us (128 B at 1 Gbit/s) and 7 switches of 2 us, by hand
    let by_hand: Ps = 8 * 1_024_000 + 7 * 2_000_000;
    ensure!(seven_hop_closed_form(&idle) == by_hand, "closed form {}", seven_hop_closed_form(&idle));
    ensure!(
        secs_to_ps(s.lat_min) == by_hand && secs_to_ps(s.lat_max) == by_hand,
        "idle latency {}..{} ps vs {by_hand}",
        secs_to_ps(s.lat_min),
        secs_to_ps(s.lat_max)
    );

    let (topo, flows) = seven_hop_scenario(&SevenHopOptions::default()).map_err(|e| e.to_string())?;
    let budgets = ClassBudgets::default();
    let cbs = simulate_for(&topo, &flows, QosMode::Cbs, 0.5)?;
    let fifo = simulate_for(&topo, &flows, QosMode::Fifo, 0.5)?;
    let (a, b) = (sr_a(&cbs)?, sr_a(&fifo)?);
    let shaped = check_sr_class(a, TrafficClass::SrA, &budgets);
    let unshaped = check_sr_class(b, TrafficClass::SrA, &budgets);
    ensure!(a.lat_max < 2e-3 && a.jitter < 125e-6 && shaped.pass, "CBS: max {} s, jitter {} s", a.lat_max, a.jitter);
    ensure!(!unshaped.pass, "FIFO met the budget: max {} s, jitter {} s", b.lat_max, b.jitter);
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "idle {} ps exact; CBS max {:.1} us jitter {:.1} us; FIFO max {:.1} us jitter {:.1} us",
        by_hand,
        a.lat_max * 1e6,
        a.jitter * 1e6,
        b.lat_max * 1e6,
        b.jitter * 1e6
    ))
}

fn cbs_credit() -> Outcome {
    let (topo, flows) = seven_hop_scenario(&SevenHopOptions::default()).map_err(|e| e.to_string())?;
    let rep = simulate_for(&topo, &flows, QosMode::Cbs, 1.0)?;
    ensure!(rep.events >= 100_000, "only {} events", rep.events);
    ensure!(rep.credit_checks >= 100_000, "only {} credit checks", rep.credit_checks);
    ensure!(rep.credit_violations == 0, "{} violations", rep.credit_violations);
    Ok(format!("{} events, {} credit checks, 0 violations", rep.events, rep.credit_checks))
}

const FULL: &str = r#"
name = "acceptance"
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

fn ride_store() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let streams = random_streams(&mut rng);
        let tol = rng.gen_range(0.002..0.03);
        let anchor = slowest_stream(&streams).ok_or("no streams")?;
        ensure!(align_samples(&streams, tol, None) == brute_align(&streams, tol, anchor), "case {case} differs");
    }

    let cfg = scenario::parse_scenario_str(FULL, Path::new(".")).map_err(|e| e.to_string())?;
    let run = scenario::run_scenario(&cfg).map_err(|f| f.error.to_string())?;
    let store = run.store.as_ref().ok_or("scenario produced no ride")?;
    let report = store.integrity_check();
    ensure!(report.is_clean(), "{}", report.render());

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    store.save(&a).map_err(|e| e.to_string())?;
    RideStore::load(&a).and_then(|s| s.save(&b)).map_err(|e| e.to_string())?;
    let (fa, fb) = (files(&a), files(&b));
    ensure!(fa == fb, "round trip changed the files");
    Ok(format!("100 alignment cases, {} samples clean, {} files round-tripped", store.samples.len(), fa.len()))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = scenario::parse_scenario_str(FULL, Path::new(".")).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for dir in ["one", "two"] {
        let run = scenario::run_scenario(&cfg).map_err(|f| f.error.to_string())?;
        let out = tmp.path().join(dir);
        scenario::write_outputs(&run, &out, false).map_err(|e| e.to_string())?;
        trees.push(files(&out));
    }
    ensure!(trees[0].iter().any(|f| f.0 == "report.txt"), "no report written");
    ensure!(trees[0].iter().any(|f| f.0.starts_with("ride")), "no ride written");
    if let Some(diff) = trees[0].iter().zip(&trees[1]).find(|(x, y)| x != y) {
        return Err(format!("{} differs", diff.0 .0));
    }
    ensure!(trees[0].len() == trees[1].len(), "file sets differ");
    Ok(format!("{} files byte-identical", trees[0].len()))
}

fn mode_limits() -> Outcome {
    let mode = DrivingMode::HighDynamic;
    let cmd = Command { speed_target: 140.0 / 3.6, steering_rate: 0.0, accel: 0.0 };
    let l = limit_command(mode, &ModeLimits::for_mode(mode), cmd).map_err(|e| e.to_string())?;
    ensure!(l.command.speed_target == 130.0 / 3.6, "clamped to {}", l.command.speed_target);
    ensure!(format!("{:.4}", l.command.speed_target) == "36.1111", "{}", l.command.speed_target);
    ensure!(l.flags.speed, "clamp not flagged");

    let cfg = scenario::parse_scenario_str(
        "duration = 20.0\nmode = \"high_dynamic\"\ninitial_speed_kmh = 120.0\n[[maneuver.step]]\nt = 0.0\nspeed_kmh = 140.0\n",
        Path::new("."),
    )
    .map_err(|e| e.to_string())?;
    let run = scenario::run_scenario(&cfg).map_err(|f| f.error.to_string())?;
    let csv = &run.artifacts.iter().find(|a| a.0 == "dynamics.csv").ok_or("no dynamics.csv")?.1;
    let vmax = csv
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(4)?.parse::<f64>().ok())
        .fold(0.0, f64::max);
    ensure!(vmax <= 36.1111 + 1e-4, "simulated speed reached {vmax}");
    Ok(format!("command clamped to {:.4} m/s, simulated peak {vmax:.4} m/s", l.command.speed_target))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("tire model", tire_model),
        ("axle loads", axle_loads),
        ("integrator order", integrator_order),
        ("kinematic limit", kinematic_limit),
        ("iso4138 sweep", iso4138_sweep),
        ("coverage oracle", coverage_oracle),
        ("ptp", ptp),
        ("network exactness", network_exactness),
        ("cbs credit bounds", cbs_credit),
        ("ride store", ride_store),
        ("end-to-end determinism", determinism),
        ("mode limits", mode_limits),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
