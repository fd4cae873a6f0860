//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::env;
use std::path::{Path, PathBuf};
use std::process::Command;

fn static_lib() -> PathBuf {
    let deps = env::current_exe().unwrap().parent().unwrap().to_path_buf();
    [
        deps.join("libsoftquant_ffi.a"),
        deps.parent().unwrap().join("libsoftquant_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists())
    .expect("static library built next to the test binary")
}

#[test]
fn c_program_links_and_runs() {
    let cc = env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let build = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(static_lib())
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "exit {:?}\n{stdout}\n{}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(stdout.starts_with("m=8 dim=1 distinct=1 "), "{stdout}");
}

#[test]
fn header_declares_the_abi() {
    let header =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/softquant.h"))
            .unwrap();
    for item in [
        "typedef struct SqRun SqRun;",
        "SQ_STATUS_OK = 0",
        "SQ_STATUS_PANIC = 7",
        "sq_last_error(void)",
        "sq_smooth_min(",
        "sq_softmin(",
        "sq_hard_assignment(",
        "sq_closed_form_value(",
        "sq_run_from_recipe(",
        "sq_run_from_toml(",
        "sq_run_execute(",
        "sq_run_free(",
    ] {
        assert!(header.contains(item), "{item} missing");
    }
}
