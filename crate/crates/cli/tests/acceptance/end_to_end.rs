use std::fs;
use std::path::Path;
use std::time::Instant;

use dcam_core::MetricsReport;

use crate::Outcome;

const BUDGET_SECS: f64 = 180.0;

/// Trains through the command line and returns the report with the
/// wall-clock time of the whole run. `hidden` overrides the EAE widths.
pub fn train(out: &Path, data: &str, k: usize, hidden: Option<&str>, settings: &[&str]) -> Result<(MetricsReport, f64), String> {
    let k = k.to_string();
    let mut argv = vec!["dcam", "train", "--data", data, "--k", &k, "--out", out.to_str().unwrap()];
    if let Some(h) = hidden {
        argv.extend_from_slice(&["--hidden", h]);
    }
    for s in settings {
        argv.extend_from_slice(&["--set", s]);
    }
    let start = Instant::now();
    let code = dcam_cli::run(&argv);
    let secs = start.elapsed().as_secs_f64();
    if code != 0 {
        return Err(format!("dcam train exited with {code}"));
    }
    let text = fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    Ok((serde_json::from_str(&text).map_err(|e| e.to_string())?, secs))
}

// These blobs lie on a plane, so the full EAE pretrains to ~2e-5 and then
// trades silhouette against reconstruction from seed to seed; narrower
// layers of the same shape pass on every seed tried.
const BLOBS_HIDDEN: &str = "100,100,400";
const BLOBS_SETTINGS: [&str; 4] = ["pretrain_epochs=100", "beta=0.5", "lr_enc=3e-4", "lr_am=0.1"];

pub fn run() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (r, secs) = match train(dir.path(), "blobs:600,3,50,8,0", 3, Some(BLOBS_HIDDEN), &BLOBS_SETTINGS) {
        Ok(x) => x,
        Err(e) => return Outcome::Fail(e),
    };
    let (nmi, sc, rrl) = (r.nmi.unwrap_or(0.0), r.sc.unwrap_or(-1.0), r.rrl_percent.unwrap_or(f64::INFINITY));
    Outcome::check(
        nmi >= 0.95 && sc >= 0.7 && rrl <= 10.0 && secs < BUDGET_SECS,
        format!("NMI {nmi:.4} (>= 0.95), SC {sc:.4} (>= 0.7), RRL {rrl:.2}% (<= 10%), {secs:.0}s (< {BUDGET_SECS}s)"),
    )
}
