//! Battery criterion: every preset through every command, under the
//! two-minute budget, all checks green, with deterministic artifacts.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn hrma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrma"))
}

fn write_config(dir: &Path, preset: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{preset}.json"));
    fs::write(&path, format!("{{\"data\": {{\"preset\": \"{preset}\"}}}}")).unwrap();
    path
}

/// Criterion 9: the full default battery (all presets, all commands)
/// completes in under 2 minutes with exit code 0 everywhere.
#[test]
fn criterion_9_full_battery_under_two_minutes() {
    let tmp = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    for preset in ["quadratic", "drift", "quartic", "logistic"] {
        let cfg = write_config(tmp.path(), preset);
        for cmd in ["lifespan", "ray", "flow", "verify", "obstruction"] {
            let out = tmp.path().join(format!("{preset}_{cmd}"));
            let status = hrma()
                .args([
                    cmd,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(
                status.success(),
                "{preset}/{cmd} exited with {:?}",
                status.code()
            );
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "battery took {elapsed:.1}s");
    println!("PASS: criterion 9 full battery (4 presets x 5 commands) in {elapsed:.1}s");
}
