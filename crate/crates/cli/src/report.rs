//! Run reports and truth files.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ordinalflow::metrics::EvalReport;
use ordinalflow::{CongestionLevel, FrameTrace, PipelineConfig, SegmentPrediction};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub index: usize,
    pub start_frame: usize,
    /// Exclusive.
    pub end_frame: usize,
    pub frame_count: usize,
    pub level: CongestionLevel,
    pub smoothed_level: CongestionLevel,
    pub confidence: f64,
}

impl From<&SegmentPrediction> for SegmentReport {
    fn from(s: &SegmentPrediction) -> Self {
        Self {
            index: s.segment_index,
            start_frame: s.start_frame,
            end_frame: s.start_frame + s.frame_count,
            frame_count: s.frame_count,
            level: s.level,
            smoothed_level: s.smoothed_level,
            confidence: s.confidence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub frame_count: usize,
    pub segments: Vec<SegmentReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<FrameTrace>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EvalReport>,
    /// Engine time only; absent unless requested so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl RunReport {
    pub fn final_levels(&self) -> Vec<CongestionLevel> {
        self.segments.iter().map(|s| s.smoothed_level).collect()
    }
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and floats cut to 9 significant digits.
pub fn to_stable_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Writes next to the target and renames, so a failed run leaves no partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(contents)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))
}

pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

/// One integer level per line; blank lines are ignored.
pub fn parse_truth(text: &str) -> Result<Vec<CongestionLevel>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Ok(v) = line.parse::<u8>() else {
            bail!("truth line {}: expected a level, got {line:?}", i + 1);
        };
        match CongestionLevel::new(v) {
            Ok(l) => out.push(l),
            Err(_) => bail!("truth line {}: level {v} outside 1..=5", i + 1),
        }
    }
    Ok(out)
}

pub fn format_truth(levels: &[CongestionLevel]) -> String {
    levels.iter().map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_nine_digits() {
        assert_eq!(round_sig(0.123456789123), 0.123456789);
        assert_eq!(round_sig(1234.56789012), 1234.56789);
        assert_eq!(round_sig(0.0), 0.0);
        let json = to_stable_json(&serde_json::json!({"b": 1.0 / 3.0, "a": [2.0f64.sqrt()]})).unwrap();
        assert!(json.find("\"a\"").unwrap() < json.find("\"b\"").unwrap());
        assert!(json.contains("0.333333333"));
        assert!(!json.contains("0.3333333333"));
        assert!(json.contains("1.41421356"));
    }

    #[test]
    fn report_round_trips() {
        let report = RunReport {
            config: PipelineConfig::default(),
            frame_count: 3,
            segments: vec![SegmentReport {
                index: 0,
                start_frame: 0,
                end_frame: 3,
                frame_count: 3,
                level: CongestionLevel::new(2).unwrap(),
                smoothed_level: CongestionLevel::new(2).unwrap(),
                confidence: 0.625,
            }],
            frames: None,
            metrics: None,
            wall_clock_seconds: None,
        };
        let text = to_stable_json(&report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(to_stable_json(&back).unwrap(), text);
        assert!(!text.contains("wall_clock"));
    }

    #[test]
    fn truth_parsing() {
        let l = parse_truth("1\n3\n\n5\n").unwrap();
        assert_eq!(l.len(), 3);
        assert_eq!(format_truth(&l), "1\n3\n5\n");
        assert!(parse_truth("1\n6\n").is_err());
        assert!(parse_truth("x\n").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_atomic(&path, b"{}").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"{}");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
