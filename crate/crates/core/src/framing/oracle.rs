//! Index-free reference implementation of timeline construction, used to
//! cross-check [`build_timeline`](super::build_timeline). It only scans the
//! global link list.

use crate::graph::{NodeId, TemporalGraph, TemporalLink};

use super::{Frame, FrameEntry, Timeline};

fn scan_before(g: &TemporalGraph, node: NodeId, t: f64) -> Vec<&TemporalLink> {
    let mut hits: Vec<&TemporalLink> = Vec::new();
    for link in g.links() {
        if (link.src == node || link.dst == node) && link.timestamp < t {
            hits.push(link);
        }
    }
    hits.sort_by(|a, b| {
        b.timestamp
            .partial_cmp(&a.timestamp)
            .unwrap()
            .then(b.link_index.cmp(&a.link_index))
    });
    hits
}

pub fn oracle_timeline(g: &TemporalGraph, node: NodeId, t: f64, frame_len: usize, timeline_len: usize) -> Timeline {
    let hop = frame_len / 2;
    let mut frames = Vec::new();
    let mut ref_time = t;
    while frames.len() < timeline_len {
        let hits = scan_before(g, node, ref_time);
        if hits.is_empty() {
            break;
        }
        let entries = hits
            .iter()
            .take(frame_len)
            .map(|l| FrameEntry {
                neighbor: if l.src == node { l.dst } else { l.src },
                link_index: l.link_index,
                timestamp: l.timestamp,
            })
            .collect();
        frames.insert(
            0,
            Frame {
                node,
                ref_time,
                entries,
            },
        );
        if hits.len() < hop {
            break;
        }
        ref_time = hits[hop - 1].timestamp;
    }
    Timeline {
        node,
        query_time: t,
        target_length: timeline_len,
        frames,
    }
}
