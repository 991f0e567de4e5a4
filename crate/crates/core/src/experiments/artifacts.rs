use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ConvergenceCurve;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, to_json};

/// `n,mean,std_error,correction`
pub fn curve_csv(curve: &ConvergenceCurve) -> String {
    let mut out = String::from("n,mean,std_error,correction\n");
    for r in &curve.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.n,
            fmt_f64(r.mean),
            fmt_f64(r.std_error),
            fmt_f64(r.correction)
        );
    }
    out
}

/// `n,replicate,sup_deviation`, one line per replicate.
pub fn replicates_csv(curve: &ConvergenceCurve) -> String {
    let mut out = String::from("n,replicate,sup_deviation\n");
    for r in &curve.rows {
        for (i, v) in r.replicates.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", r.n, i, fmt_f64(*v));
        }
    }
    out
}

/// Output directory for one run.
#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)
            .map_err(|e| Error::Configuration(format!("cannot create {}: {e}", root.display())))?;
        Ok(ArtifactDir { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_text(&self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, content).map_err(|e| Error::Configuration(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = to_json(value);
        text.push('\n');
        self.write_text(name, &text)
    }
}

/// Markdown summary that always records the config hash and library version.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    text: String,
}

impl ReportBuilder {
    pub fn new(title: &str, config_hash: &str) -> Self {
        let mut text = format!("# {title}\n\n");
        let _ = writeln!(text, "- uclab version: {}", crate::VERSION);
        let _ = writeln!(text, "- config hash (sha256): `{config_hash}`");
        text.push('\n');
        ReportBuilder { text }
    }

    pub fn line(&mut self, line: impl AsRef<str>) -> &mut Self {
        self.text.push_str(line.as_ref());
        self.text.push('\n');
        self
    }

    pub fn section(&mut self, heading: &str) -> &mut Self {
        let _ = write!(self.text, "\n## {heading}\n\n");
        self
    }

    pub fn verdict(&mut self, name: &str, passed: bool, worst_ratio: f64, slack: f64) -> &mut Self {
        let _ = writeln!(
            self.text,
            "- {name}: **{}** (worst ratio {}, slack {})",
            if passed { "PASS" } else { "FAIL" },
            fmt_f64(worst_ratio),
            fmt_f64(slack)
        );
        self
    }

    /// Markdown table with a header row.
    pub fn table(&mut self, header: &[&str], rows: &[Vec<String>]) -> &mut Self {
        let _ = writeln!(self.text, "| {} |", header.join(" | "));
        let _ = writeln!(self.text, "|{}", "---|".repeat(header.len()));
        for r in rows {
            let _ = writeln!(self.text, "| {} |", r.join(" | "));
        }
        self
    }

    pub fn finish(&self) -> String {
        self.text.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::CurveRow;

    fn sample_curve() -> ConvergenceCurve {
        ConvergenceCurve {
            setting: "ncsc".into(),
            net_size: 4,
            net_radius: 0.5,
            lambda: None,
            rows: vec![CurveRow {
                n: 64,
                mean: 0.25,
                std_error: 0.01,
                per_point_solver_budget: 10,
                correction: 1.5,
                replicates: vec![0.2, 0.3],
            }],
        }
    }

    #[test]
    fn csv_layouts() {
        let c = sample_curve();
        assert_eq!(
            curve_csv(&c),
            "n,mean,std_error,correction\n64,2.5000000000000000e-1,1.0000000000000000e-2,1.5000000000000000e0\n"
        );
        let r = replicates_csv(&c);
        assert!(r.starts_with("n,replicate,sup_deviation\n64,0,"));
        assert_eq!(r.lines().count(), 3);
    }

    #[test]
    fn writes_files_and_report() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = ArtifactDir::create(tmp.path().join("run")).unwrap();
        let p = dir.write_json("curve.json", &sample_curve()).unwrap();
        assert!(fs::read_to_string(p).unwrap().contains("\"net_size\": 4"));
        let mut rep = ReportBuilder::new("Test", "abc");
        rep.verdict("check", true, 0.5, 1.05).table(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        let text = rep.finish();
        assert!(text.contains("config hash (sha256): `abc`"));
        assert!(text.contains("**PASS**"));
        assert!(text.contains("| 1 | 2 |"));
    }
}
