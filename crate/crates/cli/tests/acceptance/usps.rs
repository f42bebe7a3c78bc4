use crate::end_to_end::train;
use crate::Outcome;

/// Dataset spec for the 2007-image USPS test split, e.g.
/// `csv:/data/usps_test.csv#label` or `idx:IMAGES,LABELS`.
pub const USPS_ENV: &str = "DCAM_USPS";

const BUDGET_SECS: f64 = 1800.0;

pub fn run() -> Outcome {
    let Ok(spec) = std::env::var(USPS_ENV) else {
        return Outcome::Blocked(format!("USPS is not bundled and cannot be downloaded; set {USPS_ENV} to its dataset spec"));
    };
    let dir = tempfile::tempdir().unwrap();
    let (r, secs) = match train(dir.path(), &spec, 10, None, &[]) {
        Ok(x) => x,
        Err(e) => return Outcome::Fail(e),
    };
    let pre = r.rl_pretrained.unwrap_or(f64::NAN);
    let (sc, rrl) = (r.sc.unwrap_or(-1.0), r.rrl_percent.unwrap_or(f64::INFINITY));
    Outcome::check(
        (0.00025..=0.0015).contains(&pre) && sc >= 0.6 && rrl <= 10.0 && secs <= BUDGET_SECS,
        format!("pretrained RL {pre:.2e} (in [2.5e-4, 1.5e-3]), SC {sc:.4} (>= 0.6), RRL {rrl:.2}% (<= 10%), {secs:.0}s"),
    )
}
