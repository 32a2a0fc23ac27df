use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, Network};
use crate::error::{Error, Result};

/// Current version of the network JSON schema.
pub const NETWORK_SCHEMA_VERSION: u32 = 1;

fn default_version() -> u32 {
    NETWORK_SCHEMA_VERSION
}

/// On-disk network representation.
///
/// ```json
/// {"version": 1, "input_shape": [2],
///  "layers": [{"kind": "fully_connected", "W": [[1.0, -1.0]], "b": [0.5]},
///             {"kind": "relu"}]}
/// ```
///
/// Weights are written with shortest round-trip float formatting, so a
/// save/load cycle reproduces every `f64` bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Network> {
        let file: NetworkFile = serde_json::from_slice(bytes)?;
        if file.version != NETWORK_SCHEMA_VERSION {
            return Err(Error::InvalidNetwork(format!(
                "unsupported schema version {} (expected {NETWORK_SCHEMA_VERSION})",
                file.version
            )));
        }
        Network::new(file.input_shape, file.layers)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            version: NETWORK_SCHEMA_VERSION,
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
        };
        serde_json::to_string(&file).expect("network serialization cannot fail")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        Network::from_json_slice(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}
