//! Kernel files, detection CSV, truth segments and score reports.

use std::fmt::Write as _;
use std::path::Path;

use morphsep_core::kam::binarize_kernel;
use morphsep_core::metrics::ClassScore;
use morphsep_core::{DetectionLattice, DetectionScore, FrameRecord, Kernel, SeparationScore, SourceRole};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::fsutil::{atomic_write_str, read_to_string};
use crate::Error;

/// Binarization threshold used by the trained-kernel workflow.
pub const DEFAULT_KERNEL_THRESHOLD: f64 = 0.54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Real,
    Binary,
}

/// One kernel per JSON line; `values` are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub label: String,
    pub h: usize,
    pub w: usize,
    pub threshold: f64,
    pub kind: KernelKind,
    pub values: Vec<f64>,
}

impl KernelFile {
    pub fn from_kernel(kernel: &Kernel, threshold: f64) -> Self {
        let v = kernel.values();
        let (h, w) = v.shape();
        let values = (0..h).flat_map(|r| (0..w).map(move |c| v[(r, c)])).collect();
        Self {
            label: kernel.label.as_str().to_string(),
            h,
            w,
            threshold: kernel.threshold.unwrap_or(threshold),
            kind: if kernel.is_binary() {
                KernelKind::Binary
            } else {
                KernelKind::Real
            },
            values,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.values.len() != self.h * self.w {
            return Err(Error::format(format!(
                "kernel `{}` has {} values for {}x{}",
                self.label,
                self.values.len(),
                self.h,
                self.w
            )));
        }
        if self.kind == KernelKind::Binary && self.values.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::format(format!(
                "binary kernel `{}` holds values other than 0/1",
                self.label
            )));
        }
        if SourceRole::parse(&self.label).is_none() {
            return Err(Error::format(format!("unknown kernel label `{}`", self.label)));
        }
        Ok(())
    }

    /// The kernel ready for separation: real kernels are binarized at their
    /// recorded threshold.
    pub fn to_kernel(&self) -> Result<Kernel, Error> {
        self.validate()?;
        let role = SourceRole::parse(&self.label).expect("validated label");
        let kernel = Kernel::new(DMatrix::from_row_slice(self.h, self.w, &self.values), role)?;
        Ok(match self.kind {
            KernelKind::Binary => binarize_kernel(&kernel, 0.5).map(|mut k| {
                k.threshold = Some(self.threshold);
                k
            })?,
            KernelKind::Real => binarize_kernel(&kernel, self.threshold)?,
        })
    }
}

pub fn write_kernels(path: &Path, kernels: &[KernelFile]) -> Result<(), Error> {
    let mut text = String::new();
    for k in kernels {
        k.validate()?;
        text.push_str(&serde_json::to_string(k).map_err(|e| Error::format(e.to_string()))?);
        text.push('\n');
    }
    atomic_write_str(path, &text)
}

pub fn read_kernels(path: &Path) -> Result<Vec<KernelFile>, Error> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let k: KernelFile =
            serde_json::from_str(line).map_err(|e| Error::format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        k.validate()?;
        out.push(k);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    center_time_s: f64,
    energy: f64,
    vtmr: f64,
    decision: u8,
}

pub fn write_detection_csv(path: &Path, lattice: &DetectionLattice) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in &lattice.frames {
        w.serialize(CsvRow {
            center_time_s: f.center_time_s,
            energy: f.energy,
            vtmr: f.vtmr,
            decision: u8::from(f.decision),
        })
        .map_err(|e| Error::format(e.to_string()))?;
    }
    if lattice.frames.is_empty() {
        w.write_record(["center_time_s", "energy", "vtmr", "decision"])
            .map_err(|e| Error::format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    atomic_write_str(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_detection_csv(path: &Path) -> Result<DetectionLattice, Error> {
    let text = read_to_string(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let frames = r
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
            if row.decision > 1 {
                return Err(Error::format(format!("{}: decision must be 0 or 1", path.display())));
            }
            Ok(FrameRecord {
                center_time_s: row.center_time_s,
                energy: row.energy,
                vtmr: row.vtmr,
                decision: row.decision == 1,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DetectionLattice { frames, truth: None })
}

/// `start_s<TAB>end_s` per line; `#` starts a comment.
pub fn parse_segments(text: &str) -> Result<Vec<(f64, f64)>, Error> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64, Error> {
            s.and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(format!("segment line {}: expected `start<TAB>end`", i + 1)))
        };
        let (start, end) = (parse(parts.next())?, parse(parts.next())?);
        if parts.next().is_some() || !(start >= 0.0 && start < end) {
            return Err(Error::format(format!("segment line {}: need 0 <= start < end", i + 1)));
        }
        out.push((start, end));
    }
    Ok(out)
}

pub fn format_segments(segments: &[(f64, f64)]) -> String {
    segments.iter().fold(String::new(), |mut s, (a, b)| {
        let _ = writeln!(s, "{a}\t{b}");
        s
    })
}

pub fn read_segments(path: &Path) -> Result<Vec<(f64, f64)>, Error> {
    parse_segments(&read_to_string(path)?)
}

pub fn write_segments(path: &Path, segments: &[(f64, f64)]) -> Result<(), Error> {
    atomic_write_str(path, &format_segments(segments))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub role: String,
    pub estimate: String,
    pub rqf_db: f64,
    pub sdr_db: f64,
    pub sir_db: f64,
    pub sar_db: f64,
}

impl SourceReport {
    pub fn new(role: &str, estimate: &str, s: &SeparationScore) -> Self {
        Self {
            role: role.to_string(),
            estimate: estimate.to_string(),
            rqf_db: s.rqf_db,
            sdr_db: s.sdr_db,
            sir_db: s.sir_db,
            sar_db: s.sar_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BssReport {
    pub sources: Vec<SourceReport>,
}

impl BssReport {
    pub fn table(&self) -> String {
        let width = self.sources.iter().map(|s| s.role.len()).max().unwrap_or(0).max(6);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}\n",
            "source", "RQF(dB)", "SDR(dB)", "SIR(dB)", "SAR(dB)"
        );
        for s in &self.sources {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.3}  {:>9.3}  {:>9.3}  {:>9.3}",
                s.role, s.rqf_db, s.sdr_db, s.sir_db, s.sar_db
            );
        }
        out
    }
}

/// Undefined recall or precision values are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadReport {
    pub frames: usize,
    pub av_rec: f64,
    pub av_prec: f64,
    pub f_meas: f64,
    pub voice_recall: Option<f64>,
    pub voice_precision: Option<f64>,
    pub music_recall: Option<f64>,
    pub music_precision: Option<f64>,
}

impl VadReport {
    pub fn new(frames: usize, s: &DetectionScore) -> Self {
        let ClassScore {
            recall: vr,
            precision: vp,
        } = s.voice;
        let ClassScore {
            recall: mr,
            precision: mp,
        } = s.music;
        Self {
            frames,
            av_rec: s.av_rec,
            av_prec: s.av_prec,
            f_meas: s.f_meas,
            voice_recall: vr,
            voice_precision: vp,
            music_recall: mr,
            music_precision: mp,
        }
    }

    pub fn table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        format!(
            "{:<8}  {:>9}  {:>9}\n{:<8}  {:>9}  {:>9}\n{:<8}  {:>9}  {:>9}\n{:<8}  {:>9.3}  {:>9.3}\nF-measure {:.3} over {} frames\n",
            "class", "recall", "precision",
            "voice", cell(self.voice_recall), cell(self.voice_precision),
            "music", cell(self.music_recall), cell(self.music_precision),
            "average", self.av_rec, self.av_prec,
            self.f_meas, self.frames
        )
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    text.push('\n');
    atomic_write_str(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}
