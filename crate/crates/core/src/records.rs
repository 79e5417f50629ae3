//! Per-step log rows and the CSV files built from them.
//!
//! Every file starts with `#`-prefixed provenance lines, then a header.
//! Floats are written with 9 significant digits; writes go through a temporary
//! file in the target directory and are renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Result, StefanError};

pub const TRAJECTORY_COLUMNS: [&str; 11] = [
    "t_s",
    "s_m",
    "sdot_mps",
    "qc_Wpm2",
    "E",
    "E_r",
    "Phi",
    "T_min_C",
    "T_at0_C",
    "safe_flux",
    "safe_temp",
];

pub const PLAN_COLUMNS: [&str; 5] = ["t_s", "s_r_m", "sdot_r_mps", "q_ff_Wpm2", "E_r"];

pub const FIELD_COLUMNS: [&str; 3] = ["t_s", "x_m", "T_C"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub s: f64,
    pub sdot: f64,
    pub q_c: f64,
    pub energy: f64,
    pub energy_ref: f64,
    /// Tracking functional; `None` when the reference could not be evaluated.
    pub phi: Option<f64>,
    pub t_min: f64,
    pub t_at0: f64,
    pub safe_flux: bool,
    pub safe_temp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRecord {
    pub t: f64,
    pub s_r: f64,
    pub sdot_r: f64,
    pub q_ff: f64,
    pub energy_ref: f64,
}

/// `value` with 9 significant digits.
pub fn format_float(value: f64) -> String {
    format!("{value:.8e}")
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_owned()
}

impl TrajectoryRecord {
    fn fields(&self) -> Vec<String> {
        vec![
            format_float(self.t),
            format_float(self.s),
            format_float(self.sdot),
            format_float(self.q_c),
            format_float(self.energy),
            format_float(self.energy_ref),
            self.phi.map(format_float).unwrap_or_default(),
            format_float(self.t_min),
            format_float(self.t_at0),
            flag(self.safe_flux),
            flag(self.safe_temp),
        ]
    }
}

impl PlanRecord {
    fn fields(&self) -> Vec<String> {
        [self.t, self.s_r, self.sdot_r, self.q_ff, self.energy_ref]
            .into_iter()
            .map(format_float)
            .collect()
    }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> StefanError + '_ {
    move |source| StefanError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> StefanError + '_ {
    move |source| StefanError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a CSV atomically: comment lines, header, rows.
pub fn write_csv<I>(path: &Path, comments: &[String], header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(path))?;
    {
        let file = tmp.as_file_mut();
        let mut buf = std::io::BufWriter::new(file);
        for c in comments {
            writeln!(buf, "# {c}").map_err(io_error(path))?;
        }
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(csv_error(path))?;
        for row in rows {
            w.write_record(&row).map_err(csv_error(path))?;
        }
        w.flush().map_err(io_error(path))?;
        drop(w);
        buf.flush().map_err(io_error(path))?;
    }
    tmp.persist(path).map_err(|e| StefanError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn write_records(path: &Path, comments: &[String], records: &[TrajectoryRecord]) -> Result<()> {
    write_csv(
        path,
        comments,
        &TRAJECTORY_COLUMNS,
        records.iter().map(TrajectoryRecord::fields),
    )
}

pub fn write_plan(path: &Path, comments: &[String], records: &[PlanRecord]) -> Result<()> {
    write_csv(
        path,
        comments,
        &PLAN_COLUMNS,
        records.iter().map(PlanRecord::fields),
    )
}

/// Writes `(t, x, T)` triples.
pub fn write_field(path: &Path, comments: &[String], samples: &[(f64, f64, f64)]) -> Result<()> {
    write_csv(
        path,
        comments,
        &FIELD_COLUMNS,
        samples
            .iter()
            .map(|&(t, x, u)| vec![format_float(t), format_float(x), format_float(u)]),
    )
}

/// Writes `key: value` lines atomically.
pub fn write_report(path: &Path, lines: &[(String, String)]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_error(path))?;
    for (k, v) in lines {
        writeln!(tmp, "{k}: {v}").map_err(io_error(path))?;
    }
    tmp.persist(path).map_err(|e| StefanError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Deserialize)]
struct RawRecord {
    t_s: f64,
    s_m: f64,
    sdot_mps: f64,
    #[serde(rename = "qc_Wpm2")]
    qc: f64,
    #[serde(rename = "E")]
    energy: f64,
    #[serde(rename = "E_r")]
    energy_ref: f64,
    #[serde(rename = "Phi")]
    phi: Option<f64>,
    #[serde(rename = "T_min_C")]
    t_min: f64,
    #[serde(rename = "T_at0_C")]
    t_at0: f64,
    safe_flux: u8,
    safe_temp: u8,
}

pub fn parse_records_str(text: &str, path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .deserialize::<RawRecord>()
        .map(|row| {
            let r = row.map_err(csv_error(path))?;
            Ok(TrajectoryRecord {
                t: r.t_s,
                s: r.s_m,
                sdot: r.sdot_mps,
                q_c: r.qc,
                energy: r.energy,
                energy_ref: r.energy_ref,
                phi: r.phi,
                t_min: r.t_min,
                t_at0: r.t_at0,
                safe_flux: r.safe_flux != 0,
                safe_temp: r.safe_temp != 0,
            })
        })
        .collect()
}

pub fn parse_records(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    parse_records_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryRecord {
        TrajectoryRecord {
            t: 12.5,
            s: 0.100_012_345_678,
            sdot: 3.1e-5,
            q_c: 23_043.123_456_7,
            energy: 29.239_6,
            energy_ref: 32.918_7,
            phi: Some(1.234_567_891_23e-3),
            t_min: 0.0,
            t_at0: 10.0,
            safe_flux: true,
            safe_temp: false,
        }
    }

    fn round9(v: f64) -> f64 {
        format_float(v).parse().unwrap()
    }

    #[test]
    fn empty_list_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_records(&path, &["config-hash: x".into()], &[]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            format!("# config-hash: x\n{}\n", TRAJECTORY_COLUMNS.join(","))
        );
        assert!(parse_records(&path).unwrap().is_empty());
    }

    #[test]
    fn record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut unavailable = sample();
        unavailable.phi = None;
        unavailable.t = 13.0;
        write_records(&path, &[], &[sample(), unavailable.clone()]).unwrap();
        let back = parse_records(&path).unwrap();
        let r = &back[0];
        let s = sample();
        assert_eq!(r.s, round9(s.s));
        assert_eq!(r.q_c, round9(s.q_c));
        assert_eq!(r.phi, Some(round9(s.phi.unwrap())));
        assert_eq!((r.safe_flux, r.safe_temp), (true, false));
        assert_eq!(back[1].phi, None);
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_float(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(format_float(-23043.0), "-2.30430000e4");
    }

    #[test]
    fn missing_directory_names_path() {
        let path = Path::new("/nonexistent-dir-for-test/t.csv");
        let err = write_records(path, &[], &[sample()]).unwrap_err();
        assert!(err.to_string().contains("nonexistent-dir-for-test"), "{err}");
    }

    #[test]
    fn report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.txt");
        write_report(&path, &[("a".into(), "1".into()), ("b".into(), "x y".into())]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a: 1\nb: x y\n");
    }
}
