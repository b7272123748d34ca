use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DataError, Manifest, Result, NULL_CLASS};

/// Recording session tag: free-living ADL runs or the scripted drill run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RunId {
    Adl(u8),
    Drill,
}

impl RunId {
    pub(crate) fn code(self) -> u8 {
        match self {
            RunId::Drill => 0,
            RunId::Adl(n) => n,
        }
    }

    pub(crate) fn from_code(code: u8) -> Self {
        if code == 0 {
            RunId::Drill
        } else {
            RunId::Adl(code)
        }
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunId::Adl(n) => write!(f, "ADL{n}"),
            RunId::Drill => f.write_str("Drill"),
        }
    }
}

impl FromStr for RunId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("drill") {
            return Ok(RunId::Drill);
        }
        let digits = s
            .strip_prefix("ADL")
            .or_else(|| s.strip_prefix("adl"))
            .ok_or_else(|| format!("unrecognized run tag {s:?}"))?;
        match digits.parse::<u8>() {
            Ok(n) if n >= 1 => Ok(RunId::Adl(n)),
            _ => Err(format!("unrecognized run tag {s:?}")),
        }
    }
}

impl Serialize for RunId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RunId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One subject-run of raw multichannel sensor data.
///
/// Missing sensor values are stored as `NaN` until cleaned.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecording {
    pub subject_id: u32,
    pub run: RunId,
    pub sample_rate: f64,
    /// `[T × C]`.
    pub channels: Array2<f64>,
    /// Per-instant class ids; 0 is null.
    pub labels: Vec<u16>,
    pub channel_mask: Vec<bool>,
}

impl SensorRecording {
    pub fn new(
        subject_id: u32,
        run: RunId,
        sample_rate: f64,
        channels: Array2<f64>,
        labels: Vec<u16>,
    ) -> Result<Self> {
        let rec = SensorRecording {
            subject_id,
            run,
            sample_rate,
            channel_mask: vec![true; channels.ncols()],
            channels,
            labels,
        };
        rec.check()?;
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.ncols()
    }

    pub fn check(&self) -> Result<()> {
        if self.channels.nrows() != self.labels.len() {
            return Err(DataError::Recording(format!(
                "{} rows of channel data but {} labels",
                self.channels.nrows(),
                self.labels.len()
            )));
        }
        if self.channel_mask.len() != self.channels.ncols() {
            return Err(DataError::Recording("channel mask length mismatch".into()));
        }
        Ok(())
    }

    pub fn missing_count(&self) -> usize {
        self.channels.iter().filter(|v| v.is_nan()).count()
    }
}

/// Parse a delimited recording. Rows are time instants; blank lines and
/// lines starting with `#` are skipped. Line numbers in errors are 1-based.
pub fn parse_recording<R: BufRead>(
    reader: R,
    manifest: &Manifest,
    subject_id: u32,
    run: RunId,
) -> Result<SensorRecording> {
    let columns = manifest.channel_columns();
    let needed = manifest.max_column() + 1;
    let mut expected_width: Option<usize> = None;
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<u16> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells = manifest.delimiter.split(trimmed);
        match expected_width {
            None => {
                if cells.len() < needed {
                    return Err(DataError::Parse {
                        line: line_no,
                        message: format!(
                            "row has {} columns but the manifest references column {}",
                            cells.len(),
                            needed - 1
                        ),
                    });
                }
                expected_width = Some(cells.len());
            }
            Some(w) if w != cells.len() => {
                return Err(DataError::Parse {
                    line: line_no,
                    message: format!("expected {w} columns, found {}", cells.len()),
                });
            }
            Some(_) => {}
        }

        for (col, _) in &columns {
            let tok = cells[*col];
            let v = if manifest.is_missing_token(tok) {
                f64::NAN
            } else {
                parse_number(tok, line_no)?
            };
            values.push(v);
        }

        let tok = cells[manifest.label_column];
        let raw = parse_number(tok, line_no)?;
        if raw.fract() != 0.0 || raw.abs() > 9.0e15 {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("label {tok:?} is not an integer code"),
            });
        }
        let code = raw as i64;
        let class = if manifest.null_codes.contains(&code) {
            NULL_CLASS
        } else {
            manifest
                .labels
                .class_of(code)
                .ok_or(DataError::UnknownLabel { line: line_no, code })?
        };
        labels.push(class);
    }

    let t = labels.len();
    let channels = Array2::from_shape_vec((t, columns.len()), values)
        .expect("row-major buffer matches shape");
    SensorRecording::new(subject_id, run, manifest.sample_rate, channels, labels)
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| DataError::Parse {
        line,
        message: format!("cannot parse {tok:?} as a number"),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DataError::Parse {
            line,
            message: format!("non-finite value {tok:?}"),
        })
    }
}

/// Load a recording file named after the OPPORTUNITY convention
/// (`S3-ADL1.dat`, `S4-Drill.dat`); subject and run come from the file name.
pub fn load_recording(path: &Path, manifest: &Manifest) -> Result<SensorRecording> {
    let (subject, run) = parse_file_name(path).ok_or_else(|| DataError::Parse {
        line: 0,
        message: format!(
            "cannot infer subject and run from file name {}",
            path.display()
        ),
    })?;
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_recording(BufReader::new(file), manifest, subject, run)
}

pub(crate) fn parse_file_name(path: &Path) -> Option<(u32, RunId)> {
    let stem = path.file_stem()?.to_str()?;
    let (subject, run) = stem.split_once('-')?;
    let subject = subject.strip_prefix('S')?.parse().ok()?;
    Some((subject, run.parse().ok()?))
}
