//! Result files: one CSV row per sweep point and a JSON manifest that parses
//! back into the spec that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Manifest, SweepSpec};
use crate::error::{Error, Result};
use crate::sim::SweepResult;

pub const CSV_HEADER: [&str; 7] = [
    "sweep_var",
    "mse_empirical",
    "bound_nominal",
    "bound_perturbed",
    "robust_shift",
    "robust_envelope",
    "admissible_fraction",
];
pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Shortest decimal that parses back to the same `f64`.
fn fmt_float(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Render the results table.
pub fn results_csv(result: &SweepResult) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv encoding failed: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in &result.points {
        w.write_record([
            p.value.to_string(),
            fmt_opt(p.mse_empirical),
            fmt_float(p.bound_nominal),
            fmt_opt(p.bound_perturbed),
            fmt_float(p.robust_shift),
            fmt_float(p.robust_envelope),
            fmt_float(p.admissible_fraction),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv encoding failed: {e}")))
}

pub fn manifest_json(spec: &SweepSpec) -> String {
    let mut text = serde_json::to_string_pretty(&Manifest::new(spec)).expect("manifest serializes");
    text.push('\n');
    text
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Write `results.csv` and `manifest.json` into `dir`, creating it if needed.
/// Returns the two paths.
pub fn emit_results(result: &SweepResult, spec: &SweepSpec, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let csv = write(dir.join(RESULTS_FILE), &results_csv(result)?)?;
    let manifest = write(dir.join(MANIFEST_FILE), manifest_json(spec).as_bytes())?;
    Ok((csv, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SweepPoint;

    fn point(value: u64, mse: Option<f64>, perturbed: Option<f64>) -> SweepPoint {
        SweepPoint {
            value,
            mse_empirical: mse,
            bound_nominal: 0.1,
            bound_perturbed: perturbed,
            robust_shift: 1.0 / 3.0,
            robust_envelope: f64::INFINITY,
            admissible_fraction: 1.0,
            records: Vec::new(),
        }
    }

    #[test]
    fn golden_csv() {
        let result = SweepResult {
            variable: "shots_per_config".into(),
            trials: 2,
            points: vec![point(100, Some(2.5e-7), Some(8.333333333333334e-3)), point(1000, None, None)],
        };
        let got = String::from_utf8(results_csv(&result).unwrap()).unwrap();
        let want = "sweep_var,mse_empirical,bound_nominal,bound_perturbed,robust_shift,robust_envelope,admissible_fraction\n\
                    100,0.00000025,0.1,0.008333333333333333,0.3333333333333333,inf,1\n\
                    1000,,0.1,,0.3333333333333333,inf,1\n";
        assert_eq!(got, want);
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, 123456789.125, 8.333333333333334e-8] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn emit_creates_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let spec = SweepSpec::new(crate::config::ExperimentKind::BoundsOnly);
        let result = SweepResult {
            variable: "copies".into(),
            trials: 0,
            points: vec![point(5, None, None)],
        };
        let (csv, manifest) = emit_results(&result, &spec, &out).unwrap();
        assert!(fs::read_to_string(csv).unwrap().starts_with("sweep_var,"));
        let text = fs::read_to_string(manifest).unwrap();
        let back = crate::config::parse_config_str(&text, &Default::default()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unwritable_path_reports_it() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let spec = SweepSpec::new(crate::config::ExperimentKind::BoundsOnly);
        let result = SweepResult {
            variable: "copies".into(),
            trials: 0,
            points: vec![],
        };
        match emit_results(&result, &spec, &blocker.join("sub")) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("{other:?}"),
        }
    }
}
