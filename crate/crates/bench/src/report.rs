//! Benchmark records and their CSV/JSON serialization, including the
//! per-landscape mean rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use msad::{ColorSpace, Method, SceneKind};
use serde::{Deserialize, Serialize};

use crate::plan::InputKind;

/// One evaluated matrix cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scene_id: String,
    pub kind: SceneKind,
    pub input: InputKind,
    pub method: Method,
    pub colorspace: ColorSpace,
    pub thermal: bool,
    pub auprc: f64,
    pub best_fbeta: f64,
    pub best_threshold: f64,
    pub runtime_ms: f64,
}

impl EvalRecord {
    pub fn space_label(&self) -> String {
        msad::ColorSpaceId::new(self.colorspace, self.thermal).to_string()
    }
}

/// Mean over color spaces of the scene-averaged values, per
/// (landscape, input, method, thermal) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub kind: SceneKind,
    pub input: InputKind,
    pub method: Method,
    pub thermal: bool,
    pub auprc: f64,
    pub best_fbeta: f64,
    pub runtime_ms: f64,
    pub spaces: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<EvalRecord>,
    pub means: Vec<GroupMean>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

pub fn group_means(records: &[EvalRecord]) -> Vec<GroupMean> {
    type Key = (String, InputKind, Method, bool);
    let mut groups: BTreeMap<Key, BTreeMap<ColorSpace, Vec<&EvalRecord>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.kind.to_string(), r.input, r.method, r.thermal))
            .or_default()
            .entry(r.colorspace)
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|by_space| {
            let first = by_space
                .values()
                .next()
                .and_then(|v| v.first())
                .expect("non-empty group");
            let per_space = |f: fn(&EvalRecord) -> f64| mean(by_space.values().map(|rs| mean(rs.iter().map(|r| f(r)))));
            GroupMean {
                kind: first.kind,
                input: first.input,
                method: first.method,
                thermal: first.thermal,
                auprc: per_space(|r| r.auprc),
                best_fbeta: per_space(|r| r.best_fbeta),
                runtime_ms: per_space(|r| r.runtime_ms),
                spaces: by_space.len(),
            }
        })
        .collect()
}

const HEADER: [&str; 10] = [
    "scene_id",
    "kind",
    "input",
    "method",
    "colorspace",
    "thermal",
    "auprc",
    "best_fbeta",
    "best_threshold",
    "runtime_ms",
];

/// Records in the given order, followed by one `mean` row per group.
pub fn write_csv(records: &[EvalRecord], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.scene_id.clone(),
            r.kind.to_string(),
            r.input.to_string(),
            r.method.token().to_string(),
            r.colorspace.token().to_string(),
            r.thermal.to_string(),
            r.auprc.to_string(),
            r.best_fbeta.to_string(),
            r.best_threshold.to_string(),
            r.runtime_ms.to_string(),
        ])?;
    }
    for m in group_means(records) {
        w.write_record([
            "mean".to_string(),
            m.kind.to_string(),
            m.input.to_string(),
            m.method.token().to_string(),
            "all".to_string(),
            m.thermal.to_string(),
            m.auprc.to_string(),
            m.best_fbeta.to_string(),
            String::new(),
            m.runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report(records: &[EvalRecord], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    match format {
        ReportFormat::Csv => write_csv(records, file),
        ReportFormat::Json => {
            let report = Report {
                records: records.to_vec(),
                means: group_means(records),
            };
            serde_json::to_writer_pretty(file, &report)?;
            Ok(())
        }
    }
}

pub fn read_json_report(path: impl AsRef<Path>) -> Result<Report> {
    let text = fs::read_to_string(path.as_ref())?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(space: ColorSpace, auprc: f64, runtime: f64) -> EvalRecord {
        EvalRecord {
            scene_id: "s0".into(),
            kind: SceneKind::Forest,
            input: InputKind::Integral,
            method: Method::Rxg,
            colorspace: space,
            thermal: false,
            auprc,
            best_fbeta: auprc / 2.0,
            best_threshold: 1.5,
            runtime_ms: runtime,
        }
    }

    #[test]
    fn csv_has_header_rows_and_mean() {
        let recs = vec![record(ColorSpace::Rgb, 0.2, 10.0), record(ColorSpace::Hsv, 0.4, 30.0)];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], HEADER.join(","));
        assert!(lines[3].starts_with("mean,forest,integral,rxg,all,false,"));
        let fields: Vec<&str> = lines[3].split(',').collect();
        let auprc: f64 = fields[6].parse().unwrap();
        assert!((auprc - (0.2 + 0.4) / 2.0).abs() < 1e-15);
        let runtime: f64 = fields[9].parse().unwrap();
        assert!((runtime - 20.0).abs() < 1e-12);
    }

    #[test]
    fn groups_split_by_thermal_and_method() {
        let mut a = record(ColorSpace::Rgb, 0.1, 1.0);
        let mut b = a.clone();
        b.thermal = true;
        b.auprc = 0.3;
        let mut c = a.clone();
        c.method = Method::Lof;
        a.auprc = 0.2;
        let means = group_means(&[a, b, c]);
        assert_eq!(means.len(), 3);
    }
}
