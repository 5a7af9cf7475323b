//! Builds a small C program against the generated header and the static
//! library, then runs it. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "freespace_flow.h"

int main(void) {
    FsofIntrinsics k = {721.5377, 721.5377, 609.5593, 172.854};
    FsofMount m = {1.65, 0.0};
    FsofPose pose = {0.1, 1.0, 0.0349};
    FsofModel model = {0};
    model.kind = FSOF_MODEL_KIND_FULL_DISPLACEMENT;
    model.pose = pose;

    FsofFlowMap *map = NULL;
    if (fsof_render_flow_map(620, 190, NULL, &model, &k, &m, &map) != FSOF_STATUS_OK) return 1;
    FsofMetrics r;
    if (fsof_evaluate(map, map, NULL, &r) != FSOF_STATUS_OK || r.e_e != 0.0) return 2;

    FsofFlow f;
    FsofStatus s = fsof_displacement_flow(600.0, 10.0, &k, &m, &pose, &f);
    if (s != FSOF_STATUS_HORIZON || fsof_last_error_message() == NULL) return 3;
    printf("%s: %s\n", fsof_status_name(s), fsof_last_error_message());

    if (fsof_read_flow(NULL, &map) != FSOF_STATUS_NULL_POINTER) return 4;
    fsof_flow_map_free(map);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_owned()
}

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler ({cc}); skipping");
        return;
    }
    let lib = target_dir().join("libfreespace_flow_ffi.a");
    assert!(
        lib.exists(),
        "static library not built at {}",
        lib.display()
    );
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let build = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );

    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "exit {:?}: {stdout}",
        run.status.code()
    );
    assert!(
        stdout.starts_with("pixel at or above the horizon: "),
        "{stdout}"
    );
}
