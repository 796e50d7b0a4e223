//! Link-based framing: a frame is the `k` most recent links of a node before
//! a reference time, and a timeline is `n` frames whose reference times step
//! back by half a frame (hop length `k/2`).

pub mod oracle;

use serde::Serialize;

use crate::graph::{GraphError, NodeId, TemporalGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameEntry {
    pub neighbor: NodeId,
    pub link_index: usize,
    pub timestamp: f64,
}

/// Most recent links of `node` strictly before `ref_time`, newest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    pub node: NodeId,
    pub ref_time: f64,
    pub entries: Vec<FrameEntry>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `target_length` frame slots ending at `query_time`. Only constructible
/// frames are stored (oldest first); the missing leading slots are invalid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline {
    pub node: NodeId,
    pub query_time: f64,
    pub target_length: usize,
    pub frames: Vec<Frame>,
}

impl Timeline {
    pub fn valid_count(&self) -> usize {
        self.frames.len()
    }

    /// All `target_length` slots in order, `None` for invalid leading slots.
    pub fn slots(&self) -> impl Iterator<Item = Option<&Frame>> {
        let missing = self.target_length - self.frames.len();
        std::iter::repeat_n(None, missing).chain(self.frames.iter().map(Some))
    }

    pub fn ref_times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.ref_time).collect()
    }
}

pub fn extract_frame(g: &TemporalGraph, node: NodeId, t: f64, frame_len: usize) -> Result<Frame, GraphError> {
    let history = g.history_before(node, t)?;
    let entries = history
        .iter()
        .rev()
        .take(frame_len)
        .map(|&i| {
            let link = g.link(i);
            FrameEntry {
                neighbor: link.other(node),
                link_index: i,
                timestamp: link.timestamp,
            }
        })
        .collect();
    Ok(Frame {
        node,
        ref_time: t,
        entries,
    })
}

/// Builds frames back to front: the last frame sits at `t`, and each earlier
/// reference time is the timestamp of the `(k/2)`-th most recent link before
/// the next one. Stops once a frame would be empty or fewer than `k/2` links
/// remain.
pub fn build_timeline(
    g: &TemporalGraph,
    node: NodeId,
    t: f64,
    frame_len: usize,
    timeline_len: usize,
) -> Result<Timeline, GraphError> {
    debug_assert!(frame_len >= 2 && frame_len.is_multiple_of(2), "frame length must be even");
    let hop = frame_len / 2;
    let mut frames = Vec::with_capacity(timeline_len);
    let mut ref_time = t;
    for _ in 0..timeline_len {
        let history = g.history_before(node, ref_time)?;
        if history.is_empty() {
            break;
        }
        frames.push(extract_frame(g, node, ref_time, frame_len)?);
        if history.len() < hop {
            break;
        }
        ref_time = g.link(history[history.len() - hop]).timestamp;
    }
    frames.reverse();
    Ok(Timeline {
        node,
        query_time: t,
        target_length: timeline_len,
        frames,
    })
}
