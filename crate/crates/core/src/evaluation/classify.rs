use serde::{Deserialize, Serialize};

use super::{roc_auc, EvalError, EvalReport};
use crate::graph::{inject_noise, TemporalGraph};
use crate::model::FtmModel;
use crate::tensor::{Adam, ParamStore, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Fraction of labeled instances (oldest first) used for fitting.
    pub train_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            learning_rate: 1e-2,
            train_fraction: 0.7,
        }
    }
}

/// Affine layer followed by a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl LogisticModel {
    /// Logit for one raw (unstandardized) feature vector.
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .zip(&self.weights)
                .map(|(((v, m), s), w)| (v - m) / s * w)
                .sum::<f64>()
    }
}

fn standardizer(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

/// Full-batch logistic regression on standardized features, trained with
/// Adam from zero weights.
pub fn fit_logistic(rows: &[Vec<f64>], labels: &[bool], config: &ClassifierConfig) -> Result<LogisticModel, EvalError> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(EvalError::Input(format!("{} rows, {} labels", rows.len(), labels.len())));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(EvalError::SingleClass);
    }
    let dim = rows[0].len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(EvalError::Input("feature rows must share a positive width".into()));
    }
    let (mean, scale) = standardizer(rows);
    let mut x = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        x.extend(r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s));
    }
    let x = Tensor::matrix(rows.len(), dim, x)?;
    let signs = Tensor::column(labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect());

    let mut store = ParamStore::new();
    let w = store.insert("weights", Tensor::zeros(&[dim, 1]))?;
    let b = store.insert("bias", Tensor::zeros(&[1, 1]))?;
    let mut adam = Adam::new(&store, config.learning_rate);
    for _ in 0..config.steps {
        let tape = Tape::new();
        let xs = tape.constant(x.clone());
        let logits = tape.add_row(tape.matmul(xs, tape.param(&store, w))?, tape.param(&store, b))?;
        let signed = tape.mul(logits, tape.constant(signs.clone()))?;
        let loss = tape.scale(tape.mean(tape.log_sigmoid(signed)?)?, -1.0)?;
        let grads = tape.backward(loss, &store)?;
        adam.step(&mut store, &grads)?;
    }
    Ok(LogisticModel {
        weights: store.get(w).data().to_vec(),
        bias: store.get(b).item(),
        mean,
        scale,
    })
}

/// Links carrying a label, in chronological order.
pub fn labeled_instances(graph: &TemporalGraph) -> Vec<usize> {
    (0..graph.len()).filter(|&i| graph.link(i).label.is_some()).collect()
}

/// Node classification with a frozen backbone: source-node embeddings at
/// each labeled link's time feed a logistic layer fitted on the oldest
/// instances; AUC is measured on the rest.
pub fn finetune_node_classifier(
    model: &FtmModel,
    graph: &TemporalGraph,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    let instances = labeled_instances(graph);
    let labels: Vec<bool> = instances.iter().map(|&i| graph.link(i).label == Some(true)).collect();
    let cut = ((instances.len() as f64 * config.train_fraction) + 1e-9).floor() as usize;
    if cut == 0 || cut >= instances.len() {
        return Err(EvalError::EmptyTestSet(format!(
            "{} labeled links cannot be split {:.2}/{:.2}",
            instances.len(),
            config.train_fraction,
            1.0 - config.train_fraction
        )));
    }
    let queries: Vec<_> = instances
        .iter()
        .map(|&i| (graph.link(i).src, graph.link(i).timestamp))
        .collect();
    let embeddings = model.embeddings(graph, &queries)?;
    let classifier = fit_logistic(&embeddings[..cut], &labels[..cut], config)?;
    let scores: Vec<f64> = embeddings[cut..].iter().map(|e| classifier.logit(e)).collect();
    let value = roc_auc(&scores, &labels[cut..])?;
    Ok(EvalReport {
        task: "node".into(),
        setting: None,
        metric: "AUC".into(),
        value,
        instances: scores.len(),
        seed,
        config: serde_json::Value::Null,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSweep {
    /// Noise norm relative to the largest link-feature norm.
    pub intensities: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for AttackSweep {
    fn default() -> Self {
        Self {
            intensities: vec![0.0, 0.01, 0.10, 0.20, 0.30, 0.40, 0.50],
            repetitions: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub intensities: Vec<f64>,
    /// Mean AUC per intensity.
    pub auc: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
}

/// Node classification AUC on noised copies of the graph, averaged over
/// repetitions. Intensity 0 is the clean run.
pub fn attack_eval(
    model: &FtmModel,
    graph: &TemporalGraph,
    config: &ClassifierConfig,
    sweep: &AttackSweep,
) -> Result<AttackResult, EvalError> {
    if sweep.repetitions == 0 {
        return Err(EvalError::Input("attack sweep needs at least one repetition".into()));
    }
    let mut auc = Vec::with_capacity(sweep.intensities.len());
    for (k, &intensity) in sweep.intensities.iter().enumerate() {
        if intensity == 0.0 {
            auc.push(finetune_node_classifier(model, graph, config, sweep.seed)?.value);
            continue;
        }
        let mut total = 0.0;
        for rep in 0..sweep.repetitions {
            let noise_seed = sweep.seed ^ ((k as u64) << 32) ^ rep as u64;
            let noisy = inject_noise(graph, intensity, noise_seed)?;
            total += finetune_node_classifier(model, &noisy, config, sweep.seed)?.value;
        }
        auc.push(total / sweep.repetitions as f64);
    }
    Ok(AttackResult {
        intensities: sweep.intensities.clone(),
        auc,
        repetitions: sweep.repetitions,
        seed: sweep.seed,
    })
}
