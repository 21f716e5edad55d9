use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/edgar_twin.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    assert!(h.starts_with("#ifndef EDGAR_TWIN_H"));
    for name in [
        "typedef struct EtVehicle EtVehicle;",
        "typedef struct EtScenario EtScenario;",
        "ET_STATUS_CHECK_FAILED = 8",
        "ET_MODE_HIGH_DYNAMIC = 3",
        "et_last_error(void)",
        "et_scenario_run(",
        "et_store_query(",
        "et_string_free(",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        "#include \"edgar_twin.h\"\n\
         int smoke(void) {\n\
           EtVehicle *v = 0;\n\
           EtState s = {0};\n\
           s.v_x = 5.0;\n\
           if (et_vehicle_new_edgar(&v) != ET_STATUS_OK) return 1;\n\
           EtStatus st = et_vehicle_step(v, &s, 0.0, 0.0, 0.001);\n\
           et_vehicle_free(v);\n\
           return st == ET_STATUS_OK ? 0 : 2;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-c", "-o"])
        .arg(dir.path().join("smoke.o"))
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}
