//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test -p advice-learn-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use advice_learn_core::verify::{self, Check};
use advice_learn_core::Seed;

const SEED: u64 = 20240601;

fn reproducibility(config: &Path, dir: &Path) -> Check {
    let started = Instant::now();
    let run = |tag: &str| -> Result<String, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_advice-learn"))
            .args(["learn", "--config"])
            .arg(config)
            .arg("--out")
            .arg(dir.join(tag))
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        let summary: serde_json::Value =
            serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        Ok(summary["hash"].as_str().unwrap_or_default().to_string())
    };
    let (passed, detail) = match (run("first"), run("second")) {
        (Ok(a), Ok(b)) => (a == b && !a.is_empty(), format!("hashes {a} / {b}")),
        (Err(e), _) | (_, Err(e)) => (false, format!("learn failed: {e}")),
    };
    Check {
        name: "learn-reproducibility".into(),
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn main() {
    let seed = Seed(SEED);
    let dir = tempfile::tempdir().expect("temp dir");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/standard.toml");

    type Criterion<'a> = (f64, Box<dyn Fn() -> Check + 'a>);
    let wrap = |f: fn(Seed) -> advice_learn_core::Result<Check>, s: Seed| {
        move || {
            f(s).unwrap_or_else(|e| Check {
                name: "error".into(),
                passed: false,
                detail: e.to_string(),
                seconds: 0.0,
            })
        }
    };
    // (time budget in seconds, check)
    let criteria: Vec<Criterion> = vec![
        (60.0, Box::new(wrap(verify::statistic_moments, seed.child(1)))),
        (60.0, Box::new(wrap(verify::tester_separation, seed.child(2)))),
        (300.0, Box::new(wrap(verify::approx_l1_sandwich, seed.child(3)))),
        (60.0, Box::new(wrap(verify::projection_matches_oracle, seed.child(4)))),
        (60.0, Box::new(wrap(verify::lasso_error_bound, seed.child(5)))),
        (60.0, Box::new(wrap(verify::divergence_sandwich, seed.child(6)))),
        (600.0, Box::new(wrap(verify::end_to_end_small, seed.child(7)))),
        (1800.0, Box::new(wrap(verify::sublinear_budget, seed.child(8)))),
        (60.0, Box::new(wrap(verify::instance_exactness, seed.child(9)))),
        (120.0, Box::new(|| reproducibility(&config, dir.path()))),
    ];

    let mut failed = 0;
    for (i, (budget, run)) in criteria.iter().enumerate() {
        let mut check = run();
        if check.seconds > *budget {
            check.passed = false;
            check.detail = format!("{}; over the {budget}s budget", check.detail);
        }
        if !check.passed {
            failed += 1;
        }
        println!("criterion {:>2}: {check}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
