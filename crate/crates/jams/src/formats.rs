//! On-disk formats: sensor network data, samples.csv and JSON documents.
//!
//! Sensor data is line oriented, `#` starts a comment, sensor numbers are
//! 1-based (1–8 unknown, 9–11 known):
//!
//! ```text
//! sensors 11 known 3 dim 2
//! known 9 0.35 0.95
//! obs 1 6 0.4213
//! ```
//!
//! samples.csv has the header `iter,mode,move,accepted,x0,…,x{d-1}`; modes
//! are 1-based and floats carry 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use jams_core::kernels::MoveType;
use jams_core::sampler::{Sample, SampleSink};
use jams_core::targets::{Observation, SensorData, N_KNOWN, N_SENSORS, N_UNKNOWN};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub fn parse_sensor_data(text: &str) -> Result<SensorData, CliError> {
    let bad = |line: usize, m: &str| CliError::Config(format!("sensor data line {line}: {m}"));
    let mut header = false;
    let mut known: [Option<[f64; 2]>; N_KNOWN] = [None; N_KNOWN];
    let mut obs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let n = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("'{s}' is not a number")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad(n, &format!("'{s}' is not a sensor number")));
        match f[0] {
            "sensors" => {
                let expected = format!("sensors {N_SENSORS} known {N_KNOWN} dim 2");
                if f.join(" ") != expected {
                    return Err(bad(n, &format!("header must read '{expected}'")));
                }
                header = true;
            }
            _ if !header => return Err(bad(n, "missing header")),
            "known" if f.len() == 4 => {
                let s = idx(f[1])?;
                if !(N_UNKNOWN + 1..=N_SENSORS).contains(&s) {
                    return Err(bad(n, &format!("known sensors are {}..{N_SENSORS}", N_UNKNOWN + 1)));
                }
                let slot = &mut known[s - N_UNKNOWN - 1];
                if slot.is_some() {
                    return Err(bad(n, "sensor listed twice"));
                }
                *slot = Some([num(f[2])?, num(f[3])?]);
            }
            "obs" if f.len() == 4 => {
                let (i, j) = (idx(f[1])?, idx(f[2])?);
                if i == 0 || j == 0 {
                    return Err(bad(n, "sensor numbers are 1-based"));
                }
                let (i, j) = (i.min(j) - 1, i.max(j) - 1);
                obs.push(Observation { i, j, y: num(f[3])? });
            }
            _ => return Err(bad(n, "expected 'known s x y' or 'obs i j y'")),
        }
    }
    if !header {
        return Err(CliError::Config("sensor data has no header".into()));
    }
    let mut locs = [[0.0; 2]; N_KNOWN];
    for (k, slot) in known.iter().enumerate() {
        locs[k] = slot.ok_or_else(|| CliError::Config(format!("known sensor {} missing", N_UNKNOWN + 1 + k)))?;
    }
    Ok(SensorData::new(locs, obs)?)
}

pub fn format_sensor_data(data: &SensorData) -> String {
    let mut s = format!("sensors {N_SENSORS} known {N_KNOWN} dim 2\n");
    for (k, z) in data.known_locations().iter().enumerate() {
        s += &format!("known {} {:?} {:?}\n", N_UNKNOWN + 1 + k, z[0], z[1]);
    }
    for o in data.observations() {
        s += &format!("obs {} {} {:?}\n", o.i + 1, o.j + 1, o.y);
    }
    s
}

/// Streams samples to a CSV file. Write errors are kept and reported by
/// [`CsvSampleWriter::finish`].
pub struct CsvSampleWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    error: Option<std::io::Error>,
    line: String,
}

impl CsvSampleWriter {
    pub fn create(path: &Path, dim: usize) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = Self {
            out: BufWriter::with_capacity(1 << 16, file),
            path: path.to_path_buf(),
            error: None,
            line: String::new(),
        };
        let mut head = String::from("iter,mode,move,accepted");
        for j in 0..dim {
            head += &format!(",x{j}");
        }
        head.push('\n');
        w.write(head.as_bytes());
        Ok(w)
    }

    fn write(&mut self, bytes: &[u8]) {
        if self.error.is_none() {
            if let Err(e) = self.out.write_all(bytes) {
                self.error = Some(e);
            }
        }
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        if let Some(e) = self.error.take() {
            return Err(CliError::io(&self.path, e));
        }
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

impl SampleSink for CsvSampleWriter {
    fn push(&mut self, s: &Sample) {
        use std::fmt::Write as _;
        let mut line = std::mem::take(&mut self.line);
        line.clear();
        let mv = match s.move_type {
            MoveType::Local => "local",
            MoveType::Jump => "jump",
        };
        let _ = write!(line, "{},{},{},{}", s.iter, s.mode + 1, mv, s.accepted as u8);
        for v in &s.x {
            let _ = write!(line, ",{v:.16e}");
        }
        line.push('\n');
        self.write(line.as_bytes());
        self.line = line;
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensor_text_round_trip() {
        let data = crate::experiments::bundled_sensor_data();
        let again = parse_sensor_data(&format_sensor_data(&data)).unwrap();
        assert_eq!(again, data);
    }

    #[test]
    fn sensor_text_errors() {
        let head = "sensors 11 known 3 dim 2\n";
        let known = "known 9 0 0\nknown 10 1 0\nknown 11 0 1\n";
        assert!(parse_sensor_data(&format!("{head}{known}obs 2 1 0.3 # comment\n")).is_ok());
        for bad in [
            known.to_string(),
            format!("{head}known 9 0 0\n"),
            format!("{head}{known}obs 0 1 0.3\n"),
            format!("{head}{known}obs 9 10 0.3\n"),
            format!("{head}{known}obs 1 2 -0.3\n"),
            format!("{head}{known}known 9 0 0\n"),
            format!("{head}{known}obs 1 2\n"),
        ] {
            assert!(matches!(parse_sensor_data(&bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn csv_rows_round_trip_doubles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut w = CsvSampleWriter::create(&path, 2).unwrap();
        let x = vec![0.1 + 0.2, -1.0 / 3.0];
        w.push(&Sample { iter: 7, mode: 1, move_type: MoveType::Jump, accepted: true, x: x.clone() });
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,mode,move,accepted,x0,x1"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&row[..4], &["7", "2", "jump", "1"]);
        assert_eq!(row[4].parse::<f64>().unwrap(), x[0]);
        assert_eq!(row[5].parse::<f64>().unwrap(), x[1]);
    }
}
