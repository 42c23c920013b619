//! WAV ingestion and export.
//!
//! Reading accepts 8/16/24/32-bit integer PCM and 32/64-bit float files,
//! averages channels to mono and scales integers to full-scale units.
//! Writing always produces mono 32-bit float.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use morphsep_core::AudioSignal;

use crate::fsutil::atomic_write;
use crate::Error;

const WAVE_FORMAT_IEEE_FLOAT: u16 = 3;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

pub fn load_wav(path: &Path) -> Result<AudioSignal, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Some(signal) = read_float64(&bytes).map_err(|m| Error::wav(path, m))? {
        return Ok(signal);
    }
    let reader = WavReader::new(BufReader::new(&bytes[..])).map_err(|e| Error::wav(path, e.to_string()))?;
    decode(reader).map_err(|e| Error::wav(path, e.to_string()))
}

fn decode<R: Read>(reader: WavReader<R>) -> Result<AudioSignal, hound::Error> {
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let full_scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / full_scale))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(AudioSignal::new(downmix(&interleaved, channels), spec.sample_rate))
}

fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

/// Decodes the file when it holds 64-bit float samples, which hound does
/// not read. Returns `Ok(None)` for every other format.
fn read_float64(bytes: &[u8]) -> Result<Option<AudioSignal>, String> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Ok(None);
    }
    let u16_at = |p: usize| u16::from_le_bytes([bytes[p], bytes[p + 1]]);
    let u32_at = |p: usize| u32::from_le_bytes([bytes[p], bytes[p + 1], bytes[p + 2], bytes[p + 3]]);
    let mut pos = 12;
    let mut format: Option<(u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + size > bytes.len() {
                return Err("truncated fmt chunk".into());
            }
            let mut tag = u16_at(body);
            if tag == WAVE_FORMAT_EXTENSIBLE && size >= 26 {
                tag = u16_at(body + 24);
            }
            let bits = u16_at(body + 14);
            if tag != WAVE_FORMAT_IEEE_FLOAT || bits != 64 {
                return Ok(None);
            }
            format = Some((u16_at(body + 2), u32_at(body + 4), bits));
        } else if id == b"data" {
            let Some((channels, rate, _)) = format else {
                return Ok(None);
            };
            let end = body + size;
            if end > bytes.len() {
                return Err("truncated data chunk".into());
            }
            let interleaved: Vec<f64> = bytes[body..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            return Ok(Some(AudioSignal::new(
                downmix(&interleaved, usize::from(channels.max(1))),
                rate,
            )));
        }
        pos = body + size + (size & 1);
    }
    Ok(None)
}

/// Writes mono 32-bit float samples.
pub fn save_wav(path: &Path, signal: &AudioSignal) -> Result<(), Error> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    atomic_write(path, |file: &mut File| {
        let mut writer = WavWriter::new(BufWriter::new(file), spec).map_err(std::io::Error::other)?;
        for s in &signal.samples {
            writer.write_sample(*s as f32).map_err(std::io::Error::other)?;
        }
        writer.finalize().map_err(std::io::Error::other)
    })
}
