//! Mono 16-bit PCM WAV reading and writing.

use std::io::Cursor;
use std::path::Path;

use super::CorpusError;

/// Read a mono 16-bit PCM WAV file. Samples are scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32), CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_wav_bytes(&bytes).map_err(|e| match e {
        CorpusError::Wav { message, .. } => CorpusError::Wav {
            path: path.display().to_string(),
            message,
        },
        CorpusError::UnsupportedWav { channels, bits, .. } => CorpusError::UnsupportedWav {
            path: path.display().to_string(),
            channels,
            bits,
        },
        other => other,
    })
}

/// Decode WAV bytes. Only mono 16-bit integer PCM is accepted.
pub fn read_wav_bytes(bytes: &[u8]) -> Result<(Vec<f64>, u32), CorpusError> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| CorpusError::Wav {
        path: "<memory>".to_owned(),
        message: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(CorpusError::UnsupportedWav {
            path: "<memory>".to_owned(),
            channels: spec.channels,
            bits: spec.bits_per_sample,
        });
    }
    let mut samples = Vec::with_capacity(reader.len() as usize);
    for s in reader.into_samples::<i16>() {
        let s = s.map_err(|e| CorpusError::Wav {
            path: "<memory>".to_owned(),
            message: e.to_string(),
        })?;
        samples.push(f64::from(s) / 32768.0);
    }
    Ok((samples, spec.sample_rate))
}

/// Write samples in [-1, 1] as mono 16-bit PCM. Values outside the range are
/// clamped.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), CorpusError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let io_err = |e: hound::Error| match e {
        hound::Error::IoError(source) => CorpusError::Io {
            path: path.display().to_string(),
            source,
        },
        other => CorpusError::Wav {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(io_err)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(io_err)?;
    }
    writer.finalize().map_err(io_err)
}
