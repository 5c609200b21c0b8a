//! Checkpoint files: a text config block, the class-order language ids, and
//! named parameter/moment tensors as little-endian f32.
//!
//! ```text
//! lingua-atlas-ckpt v1\n
//! <key>\t<value>\n            (config fields)
//! languages\t<id> <id> ...\n
//! tensors\t<count>\n
//! tensor\t<name>\t<rows>\t<cols>\n<rows*cols f32 LE>\n   (repeated)
//! ```

use std::path::Path;

use super::{tensor_dims, ClassifierConfig, ClassifierParams, ClassifierState, ModelError};
use crate::corpus::LanguageId;

const HEADER: &[u8] = b"lingua-atlas-ckpt v1";

/// A trained classifier plus the language ids in class-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: ClassifierState,
    pub class_ids: Vec<LanguageId>,
}

impl Checkpoint {
    /// Short provenance string recorded in derived artifacts.
    pub fn id(&self) -> String {
        format!(
            "ckpt-seed{}-step{}",
            self.state.config.seed, self.state.step
        )
    }
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, checkpoint_to_bytes(ckpt)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_checkpoint_bytes(&bytes)
        .map_err(|e| ModelError::CheckpointParse(format!("{}: {e}", path.display())))
}

pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let cfg = &ckpt.state.config;
    let mut out = Vec::new();
    out.extend_from_slice(HEADER);
    out.push(b'\n');
    let mut kv = |k: &str, v: String| {
        out.extend_from_slice(format!("{k}\t{v}\n").as_bytes());
    };
    kv("input_dim", cfg.input_dim.to_string());
    kv("hidden_dim", cfg.hidden_dim.to_string());
    kv("embed_dim", cfg.embed_dim.to_string());
    kv("n_classes", cfg.n_classes.to_string());
    kv("learning_rate", format!("{}", cfg.learning_rate));
    kv("beta1", format!("{}", cfg.beta1));
    kv("beta2", format!("{}", cfg.beta2));
    kv("epsilon", format!("{}", cfg.epsilon));
    kv("max_epochs", cfg.max_epochs.to_string());
    kv("batch_size", cfg.batch_size.to_string());
    kv("plateau_epochs", cfg.plateau_epochs.to_string());
    kv("seed", cfg.seed.to_string());
    kv("step", ckpt.state.step.to_string());
    kv(
        "languages",
        ckpt.class_ids
            .iter()
            .map(LanguageId::as_str)
            .collect::<Vec<_>>()
            .join(" "),
    );

    let dims = tensor_dims(cfg);
    let groups: [(&str, &ClassifierParams); 3] = [
        ("", &ckpt.state.params),
        ("adam_m.", &ckpt.state.adam_m),
        ("adam_v.", &ckpt.state.adam_v),
    ];
    out.extend_from_slice(format!("tensors\t{}\n", dims.len() * groups.len()).as_bytes());
    for (prefix, params) in groups {
        for ((name, rows, cols), slice) in dims.iter().zip(params.slices()) {
            out.extend_from_slice(format!("tensor\t{prefix}{name}\t{rows}\t{cols}\n").as_bytes());
            for &v in slice {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
            out.push(b'\n');
        }
    }
    out
}

/// Decode a checkpoint. Dimension claims are validated against the payload
/// before any allocation, so hostile inputs cannot trigger huge allocations
/// or panics.
pub fn parse_checkpoint_bytes(bytes: &[u8]) -> Result<Checkpoint, ModelError> {
    let e = |m: String| ModelError::CheckpointParse(m);
    let mut rest = bytes;
    let next_line = |rest: &mut &[u8]| -> Result<String, ModelError> {
        let pos = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| e("unexpected end of file".into()))?;
        let line = std::str::from_utf8(&rest[..pos])
            .map_err(|_| e("non-utf8 text line".into()))?
            .to_owned();
        *rest = &rest[pos + 1..];
        Ok(line)
    };

    if next_line(&mut rest)?.as_bytes() != HEADER {
        return Err(e("bad header".into()));
    }

    let mut cfg = ClassifierConfig::new(2);
    let mut step: u64 = 0;
    let mut class_ids: Option<Vec<LanguageId>> = None;
    let n_tensors: usize;
    loop {
        let line = next_line(&mut rest)?;
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| e(format!("malformed line {line:?}")))?;
        let parse_usize = |v: &str| -> Result<usize, ModelError> {
            v.parse::<usize>()
                .ok()
                .filter(|&x| x <= 1 << 20)
                .ok_or_else(|| e(format!("bad count {v:?}")))
        };
        let parse_f64 = |v: &str| -> Result<f64, ModelError> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| e(format!("bad float {v:?}")))
        };
        match key {
            "input_dim" => cfg.input_dim = parse_usize(value)?,
            "hidden_dim" => cfg.hidden_dim = parse_usize(value)?,
            "embed_dim" => cfg.embed_dim = parse_usize(value)?,
            "n_classes" => cfg.n_classes = parse_usize(value)?,
            "learning_rate" => cfg.learning_rate = parse_f64(value)?,
            "beta1" => cfg.beta1 = parse_f64(value)?,
            "beta2" => cfg.beta2 = parse_f64(value)?,
            "epsilon" => cfg.epsilon = parse_f64(value)?,
            "max_epochs" => cfg.max_epochs = parse_usize(value)?,
            "batch_size" => cfg.batch_size = parse_usize(value)?,
            "plateau_epochs" => cfg.plateau_epochs = parse_usize(value)?,
            "seed" => {
                step_guard(value)?;
                cfg.seed = value
                    .parse()
                    .map_err(|_| e(format!("bad seed {value:?}")))?;
            }
            "step" => {
                step_guard(value)?;
                step = value
                    .parse()
                    .map_err(|_| e(format!("bad step {value:?}")))?;
            }
            "languages" => {
                let ids: Result<Vec<LanguageId>, _> = value
                    .split(' ')
                    .filter(|s| !s.is_empty())
                    .map(LanguageId::new)
                    .collect();
                class_ids = Some(ids.map_err(|err| e(err.to_string()))?);
            }
            "tensors" => {
                n_tensors = parse_usize(value)?;
                break;
            }
            other => return Err(e(format!("unknown config key {other:?}"))),
        }
    }
    cfg.validate().map_err(|err| e(err.to_string()))?;
    let class_ids = class_ids.ok_or_else(|| e("missing languages line".into()))?;
    if class_ids.len() != cfg.n_classes {
        return Err(e(format!(
            "{} language ids for {} classes",
            class_ids.len(),
            cfg.n_classes
        )));
    }

    let dims = tensor_dims(&cfg);
    if n_tensors != dims.len() * 3 {
        return Err(e(format!(
            "expected {} tensors, header declares {n_tensors}",
            dims.len() * 3
        )));
    }
    // Size the declared tensors against the remaining payload before any
    // allocation happens.
    let total_floats: usize = dims
        .iter()
        .try_fold(0usize, |acc, (_, r, c)| {
            r.checked_mul(*c).and_then(|n| acc.checked_add(n))
        })
        .ok_or_else(|| e("tensor dims overflow".into()))?;
    let payload_needed = total_floats
        .checked_mul(12)
        .ok_or_else(|| e("tensor dims overflow".into()))?;
    if rest.len() < payload_needed {
        return Err(e(format!(
            "payload is {} bytes, config requires at least {payload_needed}",
            rest.len()
        )));
    }

    let mut params = ClassifierParams::zeros(&cfg);
    let mut adam_m = ClassifierParams::zeros(&cfg);
    let mut adam_v = ClassifierParams::zeros(&cfg);
    let mut filled = vec![false; n_tensors];
    for _ in 0..n_tensors {
        let line = next_line(&mut rest)?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 || fields[0] != "tensor" {
            return Err(e(format!("malformed tensor record {line:?}")));
        }
        let name = fields[1];
        let rows: usize = fields[2].parse().map_err(|_| e("bad tensor rows".into()))?;
        let cols: usize = fields[3].parse().map_err(|_| e("bad tensor cols".into()))?;
        let (group, base_name) = match name.strip_prefix("adam_m.") {
            Some(b) => (1usize, b),
            None => match name.strip_prefix("adam_v.") {
                Some(b) => (2, b),
                None => (0, name),
            },
        };
        let slot = dims
            .iter()
            .position(|(n, _, _)| *n == base_name)
            .ok_or_else(|| e(format!("unknown tensor {name:?}")))?;
        let (_, want_rows, want_cols) = dims[slot];
        if rows != want_rows || cols != want_cols {
            return Err(e(format!(
                "tensor {name} is {rows}x{cols}, expected {want_rows}x{want_cols}"
            )));
        }
        let count = rows * cols;
        let need = count
            .checked_mul(4)
            .and_then(|n| n.checked_add(1))
            .ok_or_else(|| e("tensor size overflow".into()))?;
        if rest.len() < need {
            return Err(e(format!("tensor {name} payload truncated")));
        }
        let target = match group {
            0 => &mut params,
            1 => &mut adam_m,
            _ => &mut adam_v,
        };
        {
            let mut slices = target.slices_mut();
            let dst = &mut slices[slot];
            for (k, chunk) in rest[..count * 4].chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                if !v.is_finite() {
                    return Err(e(format!("non-finite value in tensor {name}")));
                }
                dst[k] = f64::from(v);
            }
        }
        if rest[count * 4] != b'\n' {
            return Err(e(format!("missing terminator after tensor {name}")));
        }
        rest = &rest[count * 4 + 1..];
        let flat = group * dims.len() + slot;
        if filled[flat] {
            return Err(e(format!("duplicate tensor {name}")));
        }
        filled[flat] = true;
    }
    if !rest.is_empty() {
        return Err(e("trailing bytes after last tensor".into()));
    }
    if !filled.iter().all(|&f| f) {
        return Err(e("missing tensors".into()));
    }

    Ok(Checkpoint {
        state: ClassifierState {
            config: cfg,
            params,
            adam_m,
            adam_v,
            step,
        },
        class_ids,
    })
}

fn step_guard(value: &str) -> Result<(), ModelError> {
    if value.len() > 20 {
        return Err(ModelError::CheckpointParse(format!(
            "numeric field too long: {value:?}"
        )));
    }
    Ok(())
}
