use std::fs;

use crate::end_to_end::train;
use crate::Outcome;

pub fn run() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let settings = ["pretrain_epochs=40", "max_epochs=40", "beta=0.5", "lr_am=0.1"];
    let data = "blobs:300,4,20,6,3";
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        match train(&out, data, 4, None, &settings) {
            Ok((report, _)) => runs.push((report, fs::read(out.join("labels.csv")).unwrap())),
            Err(e) => return Outcome::Fail(e),
        }
    }
    let labels_equal = runs[0].1 == runs[1].1;
    let reports_equal = runs[0].0 == runs[1].0;
    Outcome::check(
        labels_equal && reports_equal,
        format!(
            "label files {} ({} bytes), reports {}",
            if labels_equal { "byte-identical" } else { "differ" },
            runs[0].1.len(),
            if reports_equal { "field-identical" } else { "differ" }
        ),
    )
}
