use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GraphError, TemporalGraph};

/// Adds to every link's features a Gaussian direction rescaled to norm
/// `intensity × max_link_feature_norm`. Topology, timestamps and labels are
/// untouched; intensity 0 returns an exact copy.
pub fn inject_noise(g: &TemporalGraph, intensity: f64, seed: u64) -> Result<TemporalGraph, GraphError> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(GraphError::Validation(format!(
            "attack intensity {intensity} must be nonnegative"
        )));
    }
    if intensity == 0.0 || g.feature_dim() == 0 {
        return Ok(g.clone());
    }
    let max_norm = g
        .links()
        .iter()
        .map(|l| l.features.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let target = intensity * max_norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(g.map_link_features(|link| {
        let direction: Vec<f64> = loop {
            let d: Vec<f64> = (0..link.features.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            if d.iter().any(|v: &f64| *v != 0.0) {
                break d;
            }
        };
        let scale = target / direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        link.features.iter().zip(&direction).map(|(f, d)| f + d * scale).collect()
    }))
}
