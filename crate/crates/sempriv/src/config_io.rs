//! Config files on disk and command-line overrides.

use std::fs;
use std::path::Path;

use sempriv_core::config::ExperimentConfig;

use crate::error::{Error, Result};

/// Reads and validates a `key=value` config file; missing keys take defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(ExperimentConfig::parse(&text)?)
}

/// Writes the canonical form of `cfg`, which [`load_config`] reads back unchanged.
pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    write_atomic(path, cfg.to_kv_string().as_bytes())
}

/// Applies `key=value` overrides on top of `cfg`; the last value for a key wins.
pub fn apply_overrides(cfg: &ExperimentConfig, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    if overrides.is_empty() {
        return Ok(cfg.clone());
    }
    let mut pairs: Vec<(String, String)> = cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    pairs.extend(overrides.iter().cloned());
    Ok(ExperimentConfig::from_pairs(&pairs)?)
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_default_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        fs::write(&path, "dataset=mnist latent_dim=32\n").unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.weights.w_mse, 5.0);
        assert_eq!(cfg.weights.w_sem, 1.0);
        assert_eq!(cfg.weights.w_ssim, 1.0);
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        let cfg = apply_overrides(
            &ExperimentConfig::default(),
            &[("perturb.method".into(), "pgd".into()), ("perturb.steps".into(), "7".into()), ("w_p".into(), "1".into())],
        )
        .unwrap();
        save_config(&cfg, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_config(&path).unwrap();
        assert_eq!(loaded, cfg);
        save_config(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn overrides_last_writer_wins() {
        let base = ExperimentConfig::default();
        let cfg = apply_overrides(&base, &[("seed".into(), "3".into()), ("seed".into(), "9".into())]).unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_override_names_the_key() {
        let err = apply_overrides(&ExperimentConfig::default(), &[("latent".into(), "3".into())]).unwrap_err();
        assert!(err.to_string().contains("latent"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_config(Path::new("/nonexistent/exp.cfg")).unwrap_err();
        assert_eq!(err.category(), crate::error::Category::Io);
    }
}
