use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "micky.h"

int main(void) {
    MickyMatrix *m = NULL;
    char *planted = NULL;
    if (micky_synth_generate("{\"n_workloads\": 10, \"n_configs\": 5}", &m, &planted) != MICKY_STATUS_OK) return 1;
    MickyRun *run = NULL;
    if (micky_run_micky(m, MICKY_POLICY_UCB1, 0.0, 1, 0.5, MICKY_REWARD_MODE_ORACLE, 42, &run) != MICKY_STATUS_OK) return 2;
    uint64_t cost = 0;
    micky_run_cost(run, &cost);
    uint64_t k = 0;
    micky_knee_point(0.05, 3.15, 10.0, &k);
    size_t nc = 0;
    if (micky_matrix_n_configs(NULL, &nc) != MICKY_STATUS_NULL_POINTER) return 3;
    if (strcmp(micky_last_error_message(), "matrix is null") != 0) return 4;
    printf("%llu %llu %d\n", (unsigned long long)cost, (unsigned long long)k, planted != NULL);
    micky_string_free(planted);
    micky_run_free(run);
    micky_matrix_free(m);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = target_dir().join("libmicky_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    let exe = tmp.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout), "10 7 1\n");
}
