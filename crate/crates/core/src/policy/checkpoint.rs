//! Checkpoint file: one text line `roadrl-checkpoint <version>`, one line of
//! compact JSON header, then the parameters as little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layout, NetConfig, PolicyNet};
use crate::dynamics::ActionGrid;
use crate::obs::ObsConfig;
use crate::PolicyError;

const MAGIC: &str = "roadrl-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub net: NetConfig,
    pub obs: ObsConfig,
    pub actions: ActionGrid,
    pub param_count: usize,
    pub global_step: u64,
    /// Hash of the run configuration that produced this file, if any.
    #[serde(default)]
    pub config_hash: Option<String>,
    /// Feature order of the observation vector, for humans.
    pub obs_layout: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub net: PolicyNet<f32>,
}

pub const OBS_LAYOUT: &str = "ego[speed,length,width,goal_x,goal_y,collision] \
    road[max_road_points x (x,y,length,width,height,orientation,onehot7)] \
    partners[max_partners x (speed,x,y,cos_dh,sin_dh,width,length,height)]";

impl Checkpoint {
    pub fn new(net: PolicyNet<f32>, obs: ObsConfig, global_step: u64, config_hash: Option<String>) -> Self {
        let header = CheckpointHeader {
            net: net.config.clone(),
            obs,
            actions: ActionGrid::default(),
            param_count: net.count_params(),
            global_step,
            config_hash,
            obs_layout: OBS_LAYOUT.to_string(),
        };
        Self { header, net }
    }

    /// Refuse to run with an observation layout the network was not built for.
    pub fn check_compatible(&self, obs: &ObsConfig) -> Result<(), PolicyError> {
        if &self.header.obs != obs {
            return Err(PolicyError::CheckpointMismatch(format!(
                "checkpoint observation config {:?} differs from requested {:?}",
                self.header.obs, obs
            )));
        }
        if self.header.net.obs_width() != obs.width() {
            return Err(PolicyError::CheckpointMismatch(format!(
                "checkpoint expects observation width {}, config gives {}",
                self.header.net.obs_width(),
                obs.width()
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<(), PolicyError> {
    let path = path.as_ref();
    let header = serde_json::to_string(&ckpt.header).map_err(|e| PolicyError::Format(e.to_string()))?;
    let mut bytes = Vec::with_capacity(header.len() + 32 + 4 * ckpt.net.params.len());
    writeln!(bytes, "{MAGIC} {VERSION}").expect("write to vec");
    writeln!(bytes, "{header}").expect("write to vec");
    for p in &ckpt.net.params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| PolicyError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, PolicyError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PolicyError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let magic = lines.next().unwrap_or_default();
    let expected = format!("{MAGIC} {VERSION}");
    if magic != expected.as_bytes() {
        return Err(PolicyError::Format(format!("{} is not a version {VERSION} checkpoint", path.display())));
    }
    let header = lines.next().ok_or_else(|| PolicyError::Format("missing header".into()))?;
    let header: CheckpointHeader =
        serde_json::from_slice(header).map_err(|e| PolicyError::Format(format!("bad header: {e}")))?;
    let body = lines.next().unwrap_or_default();
    let layout = Layout::new(&header.net);
    if header.param_count != layout.total {
        return Err(PolicyError::CheckpointMismatch(format!(
            "header declares {} parameters but the architecture has {}",
            header.param_count, layout.total
        )));
    }
    if body.len() != 4 * layout.total {
        return Err(PolicyError::CheckpointMismatch(format!(
            "parameter block holds {} bytes, expected {}",
            body.len(),
            4 * layout.total
        )));
    }
    if header.net.obs_width() != header.obs.width() {
        return Err(PolicyError::CheckpointMismatch("network and observation widths disagree".into()));
    }
    let params = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let net = PolicyNet { config: header.net.clone(), layout, params };
    Ok(Checkpoint { header, net })
}
