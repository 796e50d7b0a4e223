use serde::{Deserialize, Serialize};

use super::ModelError;

/// Architecture hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of stacked layers (all sharing one parameter set).
    pub layers: usize,
    pub heads: usize,
    /// Links per frame `k`; must be even so the hop `k/2` is whole.
    pub frame_len: usize,
    /// Frames per timeline `n`.
    pub timeline_len: usize,
    pub hidden_dim: usize,
    pub time_dim: usize,
    pub link_feature_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 2,
            frame_len: 20,
            timeline_len: 3,
            hidden_dim: 32,
            time_dim: 172,
            link_feature_dim: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.layers == 0 {
            return fail("layers must be at least 1".into());
        }
        if self.heads == 0 {
            return fail("heads must be at least 1".into());
        }
        if self.frame_len < 2 || !self.frame_len.is_multiple_of(2) {
            return fail(format!("frame length {} must be even and at least 2", self.frame_len));
        }
        if self.timeline_len == 0 {
            return fail("timeline length must be at least 1".into());
        }
        if self.time_dim == 0 {
            return fail("time encoding dimension must be positive".into());
        }
        if self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.heads) {
            return fail(format!(
                "hidden dimension {} must be a positive multiple of the head count {}",
                self.hidden_dim, self.heads
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    /// Width of a time-aware feature row: hidden ‖ time ‖ link features.
    pub fn row_dim(&self) -> usize {
        self.hidden_dim + self.time_dim + self.link_feature_dim
    }

    /// Width of the feed-forward input: the target row plus all head outputs.
    pub fn ffn_input_dim(&self) -> usize {
        self.row_dim() + self.hidden_dim
    }
}
