use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use edgar_twin::dynamics::{run_iso4138_continuous, run_iso4138_discrete, understeer_gradient, Iso4138Options};
use edgar_twin::fmt::num;
use edgar_twin::scenario::{self, load_rig_ref, load_vehicle_ref, ScenarioError};
use edgar_twin::sensors::{coverage_map, GridWindow, Modality};
use edgar_twin::store::RideStore;

#[derive(Parser)]
#[command(name = "edgar-twin", version, about = "Desk-scale digital twin of the EDGAR research vehicle")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write report.txt, CSVs and the ride store
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output` key, then ./out
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Steady-state circular driving test; prints the result table as CSV
    Iso4138 {
        /// Vehicle file, or "edgar"
        vehicle: String,
        /// Steering-wheel angle [deg]
        #[arg(long)]
        swa: f64,
        #[arg(long, value_enum, default_value_t = IsoMode::Discrete)]
        mode: IsoMode,
        /// Ramp rate of the continuous test [m/s^2]
        #[arg(long, default_value_t = 0.1)]
        accel_rate: f64,
    },
    /// Bird's-eye coverage summary of a rig
    Coverage {
        /// Rig file, or "edgar"
        rig: String,
        /// Half extent of the grid [m]
        #[arg(long, default_value_t = 40.0)]
        window: f64,
        /// Cell size [m]
        #[arg(long, default_value_t = 0.25)]
        cell: f64,
        /// Query plane height [m]
        #[arg(long, default_value_t = edgar_twin::sensors::DEFAULT_QUERY_HEIGHT)]
        height: f64,
        /// Also write the per-cell counts to this CSV file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate only the network section of a scenario and check SR budgets
    Netcheck { scenario: PathBuf },
    /// Ride store maintenance
    Store {
        #[command(subcommand)]
        command: StoreCmd,
    },
}

#[derive(Subcommand)]
enum StoreCmd {
    /// Referential integrity check; exit code 3 on violations
    Check { dir: PathBuf },
    /// Scene ids matching a tag expression such as
    /// "dynamics.speed.low AND NOT weather.condition.rain"
    Query { dir: PathBuf, expr: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum IsoMode {
    Discrete,
    Continuous,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match cli.command {
        Cmd::Run { scenario, out, seed } => run(&scenario, out, seed),
        Cmd::Iso4138 { vehicle, swa, mode, accel_rate } => iso4138(&vehicle, swa, mode, accel_rate),
        Cmd::Coverage { rig, window, cell, height, csv } => coverage(&rig, window, cell, height, csv.as_deref()),
        Cmd::Netcheck { scenario } => netcheck(&scenario),
        Cmd::Store { command: StoreCmd::Check { dir } } => store_check(&dir),
        Cmd::Store { command: StoreCmd::Query { dir, expr } } => store_query(&dir, &expr),
    };
    ExitCode::from(code as u8)
}

fn fail(e: &ScenarioError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn run(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> i32 {
    let cfg = match scenario::parse_scenario_seeded(path, seed) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = out
        .or_else(|| cfg.output.as_ref().map(|o| cfg.base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let export = cfg.store.as_ref().is_some_and(|s| s.export_csv);
    match scenario::run_scenario(&cfg) {
        Ok(run) => {
            if let Err(e) = scenario::write_outputs(&run, &dir, export) {
                return fail(&e);
            }
            print!("{}", run.report.render());
            eprintln!("runtime: {:.3} s, outputs in {}", run.report.runtime.as_secs_f64(), dir.display());
            run.report.exit_code()
        }
        Err(f) => {
            // keep whatever was produced, marked incomplete
            let _ = scenario::write_outputs(&f.partial, &dir, false);
            print!("{}", f.partial.report.render());
            eprintln!("runtime: {:.3} s, partial outputs in {}", f.partial.report.runtime.as_secs_f64(), dir.display());
            fail(&f.error)
        }
    }
}

fn iso4138(vehicle: &str, swa_deg: f64, mode: IsoMode, accel_rate: f64) -> i32 {
    let model = match load_vehicle_ref(vehicle, Path::new(".")) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let speeds = edgar_twin::dynamics::default_speeds();
    let opts = Iso4138Options::default();
    let swa = swa_deg.to_radians();
    let result = match mode {
        IsoMode::Discrete => run_iso4138_discrete(&model, swa, &speeds, &opts),
        IsoMode::Continuous => run_iso4138_continuous(&model, swa, accel_rate, &speeds, &opts),
    };
    match result {
        Ok(rep) => {
            print!("{}", rep.to_csv());
            let converged = rep.converged_points().count();
            eprintln!("{converged} of {} points converged", rep.points.len());
            match understeer_gradient(&rep, &model.params, 4.0) {
                Ok(k) => eprintln!("understeer gradient: {} rad/(m/s^2)", num(k)),
                Err(e) => eprintln!("understeer gradient: n/a ({e})"),
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, edgar_twin::dynamics::DynamicsError::Divergence { .. }) {
                2
            } else {
                1
            }
        }
    }
}

fn coverage(rig: &str, window: f64, cell: f64, height: f64, csv: Option<&Path>) -> i32 {
    let rig = match load_rig_ref(rig, Path::new(".")) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let grid = GridWindow::centered(window, window, cell);
    let map = match coverage_map(&rig, &grid, height) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let (nx, ny) = map.shape();
    println!("grid: {nx} x {ny} cells of {} m over +/-{} m", num(cell), num(window));
    let present = rig.modalities();
    let perception: Vec<Modality> =
        Modality::ALL.into_iter().filter(|m| m.is_perception() && present.contains(m)).collect();
    for &m in &perception {
        println!(
            "{}: devices {}, max overlap {}, uncovered cells {}",
            m.name(),
            rig.device_count(m),
            map.max_count(m),
            map.zero_cells(&[m])
        );
    }
    let regions = map.blind_regions(&perception);
    println!("blind regions: {}", regions.len());
    for r in regions.iter().take(5) {
        println!("  {} m^2 around ({}, {}) m", num(r.area), num(r.centroid[0]), num(r.centroid[1]));
    }
    if let Some(path) = csv {
        if let Err(e) = std::fs::write(path, map.to_csv()) {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    }
    0
}

fn netcheck(path: &Path) -> i32 {
    let cfg = match scenario::parse_scenario(path) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let rig = match cfg.load_rig() {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    match scenario::run_network(&cfg, &rig) {
        Ok((lines, checks, _)) => {
            for l in lines {
                println!("{l}");
            }
            if checks.iter().all(|c| c.0) {
                0
            } else {
                3
            }
        }
        Err(e) => fail(&e),
    }
}

fn load_store(dir: &Path) -> Result<RideStore, i32> {
    RideStore::load(dir).map_err(|e| {
        eprintln!("error: {e}");
        2
    })
}

fn store_check(dir: &Path) -> i32 {
    let store = match load_store(dir) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = store.integrity_check();
    if report.is_clean() {
        println!(
            "clean: {} rides, {} scenes, {} samples, {} sample data",
            store.rides.len(),
            store.scenes.len(),
            store.samples.len(),
            store.sample_data.len()
        );
        0
    } else {
        print!("{}", report.render());
        3
    }
}

fn store_query(dir: &Path, expr: &str) -> i32 {
    let store = match load_store(dir) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match store.query(expr) {
        Ok(ids) => {
            for id in ids {
                println!("{id}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
