//! Compiles and runs a small C program against the generated header and
//! the static library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "foamagent.h"

int main(void) {
    int32_t dims[7];
    if (cfa_expected_dimensions("p", true, dims) != CFA_STATUS_OK) return 1;
    if (dims[0] != 1 || dims[1] != -1 || dims[2] != -2) return 2;
    char *cost = NULL;
    if (cfa_call_cost(CFA_ROLE_REASONER, 1000, 1000, &cost) != CFA_STATUS_OK) return 3;
    int same = strcmp(cost, "0.00275") == 0;
    cfa_string_free(cost);
    if (!same) return 4;
    char *out = NULL;
    if (cfa_dict_normalize("a {", &out) != CFA_STATUS_PARSE_ERROR) return 5;
    if (cfa_last_error() == NULL) return 6;
    puts("ok");
    return 0;
}
"#;

#[test]
fn header_compiles_and_links() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipped");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // integration tests live in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libfoamagent_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipped", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let st = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success(), "C program failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
