//! JSON network checkpoints. `serde_json` writes floats with shortest
//! round-trip formatting, so parameters survive a write/read bitwise.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Architecture, Network};
use super::params::{Layout, ParamVector};
use super::CnnError;

pub const CHECKPOINT_FORMAT: &str = "cnnma-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub architecture_tag: String,
    pub architecture: Architecture,
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn of(net: &Network) -> Self {
        let params = net.flatten();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            architecture_tag: net.architecture().tag(),
            architecture: net.architecture().clone(),
            layout: params.layout,
            values: params.values,
        }
    }

    pub fn to_network(&self) -> Result<Network, CnnError> {
        let invalid = |msg: String| CnnError::Checkpoint(msg);
        if self.format != CHECKPOINT_FORMAT {
            return Err(invalid(format!("unknown format {:?}", self.format)));
        }
        if self.architecture_tag != self.architecture.tag() {
            return Err(invalid(format!(
                "tag {:?} does not describe architecture {:?}",
                self.architecture_tag,
                self.architecture.tag()
            )));
        }
        let mut net = Network::zeroed(self.architecture.clone())?;
        net.load_params(&ParamVector::new(self.layout.clone(), self.values.clone())?)?;
        Ok(net)
    }
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<(), CnnError> {
    let text = serde_json::to_string_pretty(&Checkpoint::of(net))
        .map_err(|e| CnnError::Checkpoint(e.to_string()))?;
    fs::write(path, text).map_err(|e| CnnError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Network, CnnError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CnnError::Checkpoint(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| CnnError::Checkpoint(e.to_string()))?;
    ck.to_network()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_is_bitwise() {
        let net = Network::init(Architecture::mnist(), 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_checkpoint(&net, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        let (a, b) = (net.flatten(), back.flatten());
        assert!(a
            .values
            .iter()
            .zip(&b.values)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(net, back);
    }

    #[test]
    fn tampered_tag_is_rejected() {
        let net = Network::init(Architecture::mnist(), 1).unwrap();
        let mut ck = Checkpoint::of(&net);
        ck.architecture_tag = "i-6c-2s".into();
        assert!(matches!(ck.to_network(), Err(CnnError::Checkpoint(_))));
        let mut ck = Checkpoint::of(&net);
        ck.values.pop();
        assert!(ck.to_network().is_err());
    }
}
