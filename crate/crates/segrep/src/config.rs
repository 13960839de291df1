//! TOML model configuration. Every field has a default, so a minimal file
//! names only the task and composition.

use std::fs;
use std::path::{Path, PathBuf};

use segrep_core::model::ModelConfig;

use crate::error::{Error, ErrorClass, Result};

pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let config: ModelConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Reads a configuration and resolves embedding paths against the
/// directory holding the file.
pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, ErrorClass::Config, e))?;
    let mut config = parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut config.unit_embeddings, &mut config.segment_embeddings]
        .into_iter()
        .flatten()
    {
        let resolved: PathBuf = base.join(&*p);
        *p = resolved.to_string_lossy().into_owned();
    }
    Ok(config)
}

pub fn to_toml(config: &ModelConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use segrep_core::composition::CompositionKind;
    use segrep_core::TaskKind;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = parse_config("task = \"word_seg\"\ncomposition = \"srnn\"\n").unwrap();
        assert_eq!(c.task, TaskKind::WordSeg);
        assert_eq!(c.composition, CompositionKind::Srnn);
        assert_eq!(c.segment_dim, 100);
        assert_eq!(c.train.eta0, 0.1);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(parse_config("composition = \"lstm\"\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("hidden_dim = 0\n"), Err(Error::Model(_))));
        assert!(matches!(parse_config("unknown_key = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = parse_config("[train]\nmax_epochs = 7\n").unwrap();
        c.max_segment_len = Some(4);
        c.unit_embeddings = Some("vec.txt".into());
        assert_eq!(parse_config(&to_toml(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        fs::write(&path, "unit_embeddings = \"emb/units.txt\"\n").unwrap();
        let c = load_config(&path).unwrap();
        assert_eq!(PathBuf::from(c.unit_embeddings.unwrap()), dir.path().join("emb/units.txt"));
    }
}
