//! Runs the Python smoke test against the freshly built extension.

use std::path::Path;
use std::process::Command;

#[test]
fn python_smoke_test() {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("python/smoke_test.py");
    let out = match Command::new("python3").arg(&script).output() {
        Ok(out) => out,
        Err(e) => {
            eprintln!("skipping: python3 not available ({e})");
            return;
        }
    };
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("smoke test passed"));
}
