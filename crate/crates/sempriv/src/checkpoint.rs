//! Binary checkpoints holding all four networks of a bundle.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "SEMPCKP1"
//! str config_hash, str utility_hash, str training_mode, u8 eve_trained
//! u32 module count, then per module:
//!     str name, u32 tensor count, then per tensor: str name, u64 len, len x f32
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8 bytes.

use std::path::Path;

use sempriv_core::config::ExperimentConfig;
use sempriv_core::models::{ModelBundle, MODULE_NAMES};
use sempriv_core::rng::RandomStreams;
use sempriv_core::Error as CoreError;

use crate::config_io::write_atomic;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SEMPCKP1";

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

/// Serializes every module of `bundle`.
pub fn encode_bundle(bundle: &ModelBundle<f32>) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    put_str(&mut out, &bundle.config_hash);
    put_str(&mut out, &bundle.utility_hash);
    put_str(&mut out, &bundle.training_mode.to_string());
    out.push(u8::from(bundle.eve_trained));
    let modules = bundle.modules();
    out.extend((modules.len() as u32).to_le_bytes());
    for (name, module) in modules {
        put_str(&mut out, name);
        let state = module.state();
        out.extend((state.len() as u32).to_le_bytes());
        for (tensor, values) in state {
            put_str(&mut out, &tensor);
            out.extend((values.len() as u64).to_le_bytes());
            for v in values {
                out.extend(v.to_le_bytes());
            }
        }
    }
    out
}

pub fn save_checkpoint(bundle: &ModelBundle<f32>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_bundle(bundle))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(truncated)?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, CoreError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CoreError::Checkpoint("string is not UTF-8".into()))
    }
}

fn truncated() -> CoreError {
    CoreError::Checkpoint("file is truncated".into())
}

/// Rebuilds the bundle described by `cfg` and fills it from `bytes`. The
/// stored config hash must match `cfg`, and all four modules must be present.
pub fn decode_bundle(bytes: &[u8], cfg: &ExperimentConfig) -> Result<ModelBundle<f32>, CoreError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(CoreError::Checkpoint("not a sempriv checkpoint".into()));
    }
    let config_hash = r.string()?;
    if config_hash != cfg.hash() {
        return Err(CoreError::Checkpoint(format!(
            "checkpoint was written for config {config_hash}, not {}",
            cfg.hash()
        )));
    }
    let utility_hash = r.string()?;
    let mode = r.string()?.parse().map_err(CoreError::Checkpoint)?;
    let eve_trained = match r.take(1)?[0] {
        0 => false,
        1 => true,
        other => return Err(CoreError::Checkpoint(format!("bad eavesdropper flag {other}"))),
    };
    let mut bundle = ModelBundle::<f32>::new(cfg, &RandomStreams::new(cfg.seed))?;
    let count = r.u32()? as usize;
    let mut seen = Vec::new();
    for _ in 0..count {
        let name = r.string()?;
        let tensors = r.u32()? as usize;
        let mut state = Vec::with_capacity(tensors);
        for _ in 0..tensors {
            let key = r.string()?;
            let len = usize::try_from(r.u64()?).map_err(|_| truncated())?;
            let raw = r.take(len.checked_mul(4).ok_or_else(truncated)?)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            state.push((key, values));
        }
        if seen.contains(&name) {
            return Err(CoreError::Checkpoint(format!("module {name} appears twice")));
        }
        let module = bundle.module_mut(&name).ok_or_else(|| CoreError::Checkpoint(format!("unknown module {name}")))?;
        module.load_state(&state).map_err(|e| CoreError::Checkpoint(format!("module {name}: {e}")))?;
        seen.push(name);
    }
    if let Some(absent) = MODULE_NAMES.iter().find(|m| !seen.iter().any(|s| s == *m)) {
        return Err(CoreError::Checkpoint(format!("partial bundle: module {absent} is missing")));
    }
    if r.at != bytes.len() {
        return Err(CoreError::Checkpoint("trailing bytes after the last module".into()));
    }
    bundle.utility_hash = utility_hash;
    bundle.training_mode = mode;
    bundle.eve_trained = eve_trained;
    Ok(bundle)
}

pub fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<ModelBundle<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&bytes, cfg).map_err(|e| match e {
        CoreError::Checkpoint(msg) => CoreError::Checkpoint(format!("{}: {msg}", path.display())).into(),
        other => other.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sempriv_core::data::ImageShape;
    use sempriv_core::models::TrainingMode;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.synthetic.shape = ImageShape::new(8, 8, 1);
        cfg.latent_dim = 4;
        cfg.model.cls_hidden = [16, 8];
        cfg
    }

    #[test]
    fn round_trip_restores_every_tensor() {
        let cfg = small_config();
        let mut bundle = ModelBundle::<f32>::new(&cfg, &RandomStreams::new(3)).unwrap();
        bundle.training_mode = TrainingMode::Minmax;
        bundle.eve_trained = true;
        let bytes = encode_bundle(&bundle);
        let back = decode_bundle(&bytes, &cfg).unwrap();
        for ((_, a), (_, b)) in bundle.modules().iter().zip(back.modules().iter()) {
            assert_eq!(a.state(), b.state());
        }
        assert_eq!(back.training_mode, TrainingMode::Minmax);
        assert!(back.eve_trained);
        assert_eq!(back.config_hash, cfg.hash());
    }

    #[test]
    fn rejects_foreign_config() {
        let cfg = small_config();
        let bundle = ModelBundle::<f32>::new(&cfg, &RandomStreams::new(3)).unwrap();
        let other = ExperimentConfig { seed: 1, ..cfg };
        let err = decode_bundle(&encode_bundle(&bundle), &other).unwrap_err();
        assert!(err.to_string().contains("config"), "{err}");
    }

    #[test]
    fn rejects_partial_bundle() {
        let cfg = small_config();
        let bundle = ModelBundle::<f32>::new(&cfg, &RandomStreams::new(3)).unwrap();
        let mut bytes = MAGIC.to_vec();
        put_str(&mut bytes, &bundle.config_hash);
        put_str(&mut bytes, &bundle.utility_hash);
        put_str(&mut bytes, "baseline");
        bytes.push(0);
        bytes.extend(1u32.to_le_bytes());
        put_str(&mut bytes, "encoder");
        let state = bundle.encoder.state();
        bytes.extend((state.len() as u32).to_le_bytes());
        for (k, v) in state {
            put_str(&mut bytes, &k);
            bytes.extend((v.len() as u64).to_le_bytes());
            v.iter().for_each(|x| bytes.extend(x.to_le_bytes()));
        }
        let err = decode_bundle(&bytes, &cfg).unwrap_err();
        assert!(err.to_string().contains("partial bundle"), "{err}");
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let cfg = small_config();
        let bytes = encode_bundle(&ModelBundle::<f32>::new(&cfg, &RandomStreams::new(3)).unwrap());
        for cut in [0, 5, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_bundle(&bytes[..cut], &cfg).is_err(), "cut at {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_bundle(&extra, &cfg).is_err());
    }
}
