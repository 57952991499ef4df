//! Compiles a small C program against the generated header and the static
//! library, then runs it.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "qrelay.h"

int main(void) {
    QrChannel *ch = NULL;
    if (qr_channel_family("overlap-pair", &ch) != QR_STATUS_OK) return 10;
    double chi = 0.0;
    if (qr_holevo_chi(ch, NULL, 0, &chi) != QR_STATUS_OK) return 11;
    double p = (1.0 + sqrt(0.5)) / 2.0;
    double h = -p * log2(p) - (1.0 - p) * log2(1.0 - p);
    if (fabs(chi - h) > 1e-9) return 12;

    QrChannel *bad = NULL;
    if (qr_channel_from_json("{}", &bad) != QR_STATUS_INVALID_INPUT) return 13;
    if (qr_last_error() == NULL) return 14;

    QrChannel *mac = NULL;
    QrRegion *region = NULL;
    size_t n = 0;
    if (qr_channel_family("adder-mac", &mac) != QR_STATUS_OK) return 15;
    if (qr_region_mac(mac, 64, QR_MAC_VARIANT_CONDITIONAL, &region) != QR_STATUS_OK) return 16;
    if (qr_region_vertex_count(region, &n) != QR_STATUS_OK || n < 3) return 17;
    double xy[64];
    if (n > 32 || qr_region_vertices(region, xy, n) != QR_STATUS_OK) return 18;

    printf("chi=%.9f vertices=%zu version=%s\n", chi, n, qr_version());
    qr_region_free(region);
    qr_channel_free(mac);
    qr_channel_free(ch);
    return 0;
}
"#;

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| cc)
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary> → target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libqrelay_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("chi=0.600876037"));
}
