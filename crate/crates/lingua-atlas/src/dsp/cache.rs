//! Per-utterance feature cache files.
//!
//! ```text
//! lingua-atlas-mel v1\n
//! <n_frames> <n_bins> <frame_shift_seconds>\n
//! <n_frames * n_bins little-endian f32 values, row-major>
//! ```

use std::path::Path;

use super::{DspError, MelSpectrogram};

const HEADER: &[u8] = b"lingua-atlas-mel v1";

pub fn write_mel(spec: &MelSpectrogram, path: &Path) -> Result<(), DspError> {
    let mut out = Vec::with_capacity(64 + spec.n_frames() * spec.n_bins() * 4);
    out.extend_from_slice(HEADER);
    out.push(b'\n');
    out.extend_from_slice(
        format!(
            "{} {} {}\n",
            spec.n_frames(),
            spec.n_bins(),
            spec.frame_shift
        )
        .as_bytes(),
    );
    for frame in spec.frames() {
        for &v in frame {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|source| DspError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_mel(path: &Path) -> Result<MelSpectrogram, DspError> {
    let bytes = std::fs::read(path).map_err(|source| DspError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mel_bytes(&bytes).map_err(|e| DspError::CacheParse(format!("{}: {e}", path.display())))
}

/// Decode a feature cache. Never panics; dimension claims are checked
/// against the actual payload length before any allocation.
pub fn parse_mel_bytes(bytes: &[u8]) -> Result<MelSpectrogram, DspError> {
    let e = |m: &str| DspError::CacheParse(m.to_owned());
    let (header, rest) = split_line(bytes).ok_or_else(|| e("missing header line"))?;
    if header != HEADER {
        return Err(e("bad header"));
    }
    let (dims, payload) = split_line(rest).ok_or_else(|| e("missing dims line"))?;
    let dims_str = std::str::from_utf8(dims).map_err(|_| e("dims line is not utf-8"))?;
    let mut parts = dims_str.split(' ');
    let n_frames: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| e("bad frame count"))?;
    let n_bins: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| e("bad bin count"))?;
    let frame_shift: f64 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| e("bad frame shift"))?;
    if parts.next().is_some() {
        return Err(e("trailing fields on dims line"));
    }
    if n_frames == 0 || n_bins == 0 {
        return Err(e("dimensions must be positive"));
    }
    if !(frame_shift.is_finite() && frame_shift > 0.0) {
        return Err(e("frame shift must be positive and finite"));
    }
    let expected = n_frames
        .checked_mul(n_bins)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| e("dimension overflow"))?;
    if payload.len() != expected {
        return Err(e(&format!(
            "payload is {} bytes, dims require {expected}",
            payload.len()
        )));
    }
    let mut rows = Vec::with_capacity(n_frames);
    for chunk in payload.chunks_exact(n_bins * 4) {
        let row: Vec<f64> = chunk
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        rows.push(row);
    }
    let mut spec = MelSpectrogram::from_rows(rows, frame_shift)?;
    spec.language_id = None;
    Ok(spec)
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let pos = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..pos], &bytes[pos + 1..]))
}
