mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use hashgen::checkpoint::{Checkpoint, ModelKind};

/// Test builds only produce the rlib, so build the static library explicitly.
fn build_static_library() -> PathBuf {
    // target/debug/deps/<test exe>
    let exe = std::env::current_exe().unwrap();
    let target = exe.ancestors().nth(3).unwrap().to_path_buf();
    let status = Command::new(env!("CARGO"))
        .args([
            "build",
            "--quiet",
            "--lib",
            "-p",
            "hashgen-ffi",
            "--target-dir",
        ])
        .arg(&target)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .status()
        .unwrap();
    assert!(status.success(), "cargo build failed");
    target.join("debug/libhashgen_ffi.a")
}

#[test]
fn c_program_links_against_static_library() {
    let lib = build_static_library();
    assert!(lib.is_file(), "{} not built", lib.display());
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let checkpoint = common::train_tiny(&tmp.path().join("data"), ModelKind::MaskedLm);
    let run = Command::new(&exe).arg(&checkpoint).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let expected = Checkpoint::load(&checkpoint)
        .unwrap()
        .predict_title("Produto chegou rápido, muito bom!")
        .unwrap();
    assert_eq!(
        String::from_utf8(run.stdout).unwrap(),
        format!("1\t{expected}\n")
    );
}
