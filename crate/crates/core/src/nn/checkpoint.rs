//! Versioned JSON checkpoints of named parameter arrays plus optional
//! optimizer state. JSON f64 serialization round-trips bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::AdamW;
use super::tape::Matrix;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Model kind tag, e.g. "evaluator" or "generator".
    pub kind: String,
    pub params: BTreeMap<String, Matrix>,
    pub optimizer: Option<AdamW>,
    /// Free-form metadata (hyperparameters, training stats).
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, params: BTreeMap<String, Matrix>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            kind: kind.into(),
            params,
            optimizer: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Model(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Model(format!("checkpoint kind {:?}, expected {kind:?}", self.kind)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut params = BTreeMap::new();
        // awkward values: tiny, repeating-binary, subnormal, negative zero
        params.insert(
            "enc.w0".to_string(),
            Matrix::from_vec(2, 3, vec![0.1, 1e-17, f64::MIN_POSITIVE, -0.0, 2.0 / 3.0, 1e300]).unwrap(),
        );
        params.insert("head.b".to_string(), Matrix::zeros(1, 4));
        let mut ckpt = Checkpoint::new("evaluator", params);
        ckpt.optimizer = Some(AdamW::new(1e-3, 5e-4));
        ckpt.meta.insert("epochs".into(), serde_json::json!(100));
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.kind, "evaluator");
        for (name, m) in &ckpt.params {
            let lm = &loaded.params[name];
            assert_eq!(m.shape(), lm.shape());
            for (a, b) in m.data.iter().zip(&lm.data) {
                assert_eq!(a.to_bits(), b.to_bits(), "{name} not bit-exact");
            }
        }
        assert_eq!(loaded.meta["epochs"], serde_json::json!(100));
    }

    #[test]
    fn version_and_kind_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut ckpt = Checkpoint::new("generator", BTreeMap::new());
        ckpt.version = 99;
        let json = serde_json::to_string(&ckpt).unwrap();
        std::fs::write(&path, json).unwrap();
        assert!(Checkpoint::load(&path).is_err());

        let good = Checkpoint::new("generator", BTreeMap::new());
        assert!(good.expect_kind("generator").is_ok());
        assert!(good.expect_kind("evaluator").is_err());
    }
}
