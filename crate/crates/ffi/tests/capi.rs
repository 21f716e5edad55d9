use std::ffi::{CStr, CString};
use std::ptr;

use edgar_twin_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(et_last_error()) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null(), "{}", last_error());
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    et_string_free(s);
    out
}

#[test]
fn vehicle_round_trip() {
    unsafe {
        let mut v = ptr::null_mut();
        assert_eq!(et_vehicle_new_edgar(&mut v), EtStatus::Ok);
        let (mut f, mut r) = (0.0, 0.0);
        assert_eq!(et_vehicle_axle_loads(v, &mut f, &mut r), EtStatus::Ok);
        let model = edgar_twin::dynamics::SingleTrack::edgar();
        assert_eq!((f, r), (model.loads.f_z_f, model.loads.f_z_r));

        let mut s = EtState { v_x: 10.0, ..Default::default() };
        for _ in 0..100 {
            assert_eq!(et_vehicle_step(v, &mut s, 0.0, 0.0, 0.01), EtStatus::Ok);
        }
        // coasting straight: no lateral motion, speed decays slowly
        assert!(s.x > 9.0 && s.x < 10.0, "{s:?}");
        assert_eq!(s.y, 0.0);

        assert_eq!(et_vehicle_step(v, &mut s, 0.0, 0.0, -1.0), EtStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(et_vehicle_step(ptr::null(), &mut s, 0.0, 0.0, 0.01), EtStatus::NullPointer);
        et_vehicle_free(v);
        et_vehicle_free(ptr::null_mut());

        let bad = CString::new("wheelbase = -1.0").unwrap();
        let mut v = ptr::null_mut();
        assert_eq!(et_vehicle_parse(bad.as_ptr(), &mut v), EtStatus::Config);
        assert!(v.is_null());
    }
}

#[test]
fn rig_visibility() {
    unsafe {
        let mut rig = ptr::null_mut();
        assert_eq!(et_rig_new_edgar(&mut rig), EtStatus::Ok);
        let mut n = 0usize;
        assert_eq!(et_rig_device_count(rig, &mut n), EtStatus::Ok);
        assert_eq!(n, edgar_twin::sensors::edgar_rig().devices().len());

        let native = edgar_twin::sensors::edgar_rig();
        let id = native.devices()[0].to_string();
        let cid = CString::new(id.clone()).unwrap();
        for p in [[20.0, 0.0, 1.0], [-20.0, 0.0, 1.0], [0.0, 15.0, 0.5]] {
            let mut seen = false;
            assert_eq!(et_rig_is_point_visible(rig, cid.as_ptr(), p[0], p[1], p[2], &mut seen), EtStatus::Ok);
            assert_eq!(seen, edgar_twin::sensors::is_point_visible(&native, &id, &p).unwrap());
        }
        let unknown = CString::new("no_such_sensor").unwrap();
        let mut seen = false;
        assert_eq!(et_rig_is_point_visible(rig, unknown.as_ptr(), 1.0, 0.0, 1.0, &mut seen), EtStatus::InvalidArgument);
        et_rig_free(rig);
    }
}

#[test]
fn limit_command_matches_mode_limits() {
    unsafe {
        let cmd = EtCommand { speed_target: 140.0 / 3.6, steering_rate: 0.1, accel: 1.0 };
        let mut out = EtCommand::default();
        let mut flags = 0;
        assert_eq!(et_limit_command(EtMode::HighDynamic, cmd, &mut out, &mut flags), EtStatus::Ok);
        assert_eq!(out.speed_target, 130.0 / 3.6);
        assert_eq!(flags, ET_CLAMPED_SPEED);

        let cmd = EtCommand { speed_target: 5.0, steering_rate: -1.0, accel: -4.0 };
        assert_eq!(et_limit_command(EtMode::Autonomous, cmd, &mut out, &mut flags), EtStatus::Ok);
        assert_eq!((out.steering_rate, out.accel), (-0.3, -2.5));
        assert_eq!(flags, ET_CLAMPED_STEERING_RATE | ET_CLAMPED_ACCEL);

        assert_eq!(et_limit_command(EtMode::Series, cmd, &mut out, &mut flags), EtStatus::Config);
        assert!(last_error().contains("series"), "{}", last_error());
    }
}

#[test]
fn scenario_run_and_store() {
    let tmp = tempfile::tempdir().unwrap();
    let text = CString::new("name = \"ffi\"\nduration = 6.0\ninitial_speed = 3.0\n[store]\nscene_duration = 2.0\n").unwrap();
    let out_dir = CString::new(tmp.path().join("out").to_str().unwrap()).unwrap();
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(et_scenario_parse(text.as_ptr(), ptr::null(), &mut sc), EtStatus::Ok);
        let cfg = take(et_scenario_effective_config(sc));
        assert!(cfg.contains("name = \"ffi\""), "{cfg}");

        let mut rep = ptr::null_mut();
        assert_eq!(et_scenario_run(sc, out_dir.as_ptr(), &mut rep), EtStatus::Ok, "{}", last_error());
        assert_eq!(et_report_exit_code(rep), 0);
        let rendered = take(et_report_render(rep));
        assert_eq!(rendered, std::fs::read_to_string(tmp.path().join("out/report.txt")).unwrap());
        let name = CString::new("dynamics.csv").unwrap();
        let csv = take(et_report_artifact(rep, name.as_ptr()));
        assert!(csv.starts_with("time_s,"));
        let missing = CString::new("nope.csv").unwrap();
        assert!(et_report_artifact(rep, missing.as_ptr()).is_null());
        et_report_free(rep);
        et_scenario_free(sc);

        let ride = CString::new(tmp.path().join("out/ride").to_str().unwrap()).unwrap();
        let mut store = ptr::null_mut();
        assert_eq!(et_store_load(ride.as_ptr(), &mut store), EtStatus::Ok, "{}", last_error());
        let mut violations = usize::MAX;
        assert_eq!(et_store_check(store, &mut violations), EtStatus::Ok);
        assert_eq!(violations, 0);
        let expr = CString::new("NOT weather.condition.rain").unwrap();
        let mut ids = ptr::null_mut();
        assert_eq!(et_store_query(store, expr.as_ptr(), &mut ids), EtStatus::Ok, "{}", last_error());
        assert_eq!(take(ids).lines().count(), 3);
        let bad = CString::new("AND AND").unwrap();
        assert_eq!(et_store_query(store, bad.as_ptr(), &mut ids), EtStatus::InvalidArgument);
        et_store_free(store);
    }
}

#[test]
fn scenario_failures_map_to_status() {
    unsafe {
        let mut sc = ptr::null_mut();
        let unknown = CString::new("duration = 1.0\nturbo = true\n").unwrap();
        assert_eq!(et_scenario_parse(unknown.as_ptr(), ptr::null(), &mut sc), EtStatus::Config);
        assert!(last_error().contains("turbo"), "{}", last_error());

        let fifo = CString::new("duration = 1.0\n[network]\npreset = \"seven_hop\"\nqos = \"fifo\"\nduration = 0.05\n").unwrap();
        assert_eq!(et_scenario_parse(fifo.as_ptr(), ptr::null(), &mut sc), EtStatus::Ok);
        let mut rep = ptr::null_mut();
        assert_eq!(et_scenario_run(sc, ptr::null(), &mut rep), EtStatus::CheckFailed);
        assert!(!rep.is_null());
        assert_eq!(et_report_exit_code(rep), 3);
        et_report_free(rep);
        et_scenario_free(sc);

        let missing = CString::new("/nonexistent/scenario.toml").unwrap();
        assert_ne!(et_scenario_load(missing.as_ptr(), -1, &mut sc), EtStatus::Ok);
        let bytes = [0xffu8, 0];
        assert_eq!(et_scenario_load(bytes.as_ptr().cast(), -1, &mut sc), EtStatus::InvalidUtf8);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(et_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
