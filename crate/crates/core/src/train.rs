//! Full-graph training: splits, Adam, early stopping and multi-seed runs.

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, LabeledNodes};
use crate::io::Split;
use crate::nn::{GraphOperators, Mode, Model, ModelConfig, Tape};
use crate::par::Execution;

// RNG streams derived from a run seed; weight init uses stream 0.
const STREAM_SPLIT: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Shuffle `0..n` and cut it into train/val/test blocks of
/// `round(n·f_train)`, `round(n·f_val)` and the remainder.
pub fn random_split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let n_train = (n as f64 * ft).round() as usize;
    let n_val = ((n as f64 * fv).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, STREAM_SPLIT));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(Split {
        train: order,
        val,
        test,
    })
}

/// Check that a split is disjoint, in range and usable for training.
pub fn validate_split(split: &Split, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in split.train.iter().chain(&split.val).chain(&split.test) {
        if i >= n {
            return Err(Error::config(format!(
                "split node {i} out of range for {n} nodes"
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::config(format!(
                "node {i} appears in more than one split"
            )));
        }
    }
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::config(
            "train, validation and test sets must be non-empty",
        ));
    }
    Ok(())
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8 and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// First and second moment estimates, one per parameter.
    pub fn moments(&self) -> (&[Array2<f64>], &[Array2<f64>]) {
        (&self.m, &self.v)
    }

    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Array2<f64>>,
        grads: &[Array2<f64>],
    ) -> Result<()> {
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { op: "adam" });
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut count = 0;
        for (k, p) in params.into_iter().enumerate() {
            let g = grads
                .get(k)
                .ok_or_else(|| Error::shape("fewer gradients than parameters"))?;
            if g.dim() != p.dim() || self.m[k].dim() != p.dim() {
                return Err(Error::shape(format!(
                    "gradient {k} has shape {:?}, parameter {:?}",
                    g.dim(),
                    p.dim()
                )));
            }
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            ndarray::Zip::from(p)
                .and(&mut self.m[k])
                .and(&mut self.v[k])
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
            count += 1;
        }
        if count != grads.len() {
            return Err(Error::shape("more gradients than parameters"));
        }
        Ok(())
    }
}

/// Fraction of `rows` whose argmax (lowest index on ties) equals the label.
pub fn accuracy(logits: ArrayView2<'_, f64>, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Contract("accuracy over an empty index set".into()));
    }
    let mut hits = 0usize;
    for &i in rows {
        let row = logits.row(i);
        let mut best = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        hits += usize::from(best == labels[i]);
    }
    Ok(hits as f64 / rows.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    Random { train: f64, val: f64, test: f64 },
    Fixed(Split),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub split: SplitSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            max_epochs: 10_000,
            patience: 200,
            seed: 0,
            split: SplitSpec::Random {
                train: 0.5,
                val: 0.25,
                test: 0.25,
            },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::config(
                "patience and epoch budget must be at least 1",
            ));
        }
        Ok(())
    }

    fn resolve_split(&self, n: usize) -> Result<Split> {
        let split = match &self.split {
            SplitSpec::Random { train, val, test } => {
                random_split(n, (*train, *val, *test), self.seed)?
            }
            SplitSpec::Fixed(s) => s.clone(),
        };
        validate_split(&split, n)?;
        Ok(split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    /// 1-based epoch whose parameters scored the best validation accuracy.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
    pub val_trajectory: Vec<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub result: RunResult,
    /// Parameters at the best validation epoch.
    pub model: Model,
}

/// All-ones single-column features for graphs shipped without any.
pub fn constant_features(n: usize) -> Array2<f64> {
    Array2::ones((n, 1))
}

pub fn train(
    model_cfg: &ModelConfig,
    graph: &DirectedGraph,
    nodes: &LabeledNodes,
    cfg: &TrainConfig,
) -> Result<RunResult> {
    train_model(model_cfg, graph, nodes, cfg, Execution::default()).map(|t| t.result)
}

/// Train from scratch, evaluating every epoch before its update and
/// stopping once validation accuracy has not improved for `patience` epochs.
pub fn train_model(
    model_cfg: &ModelConfig,
    graph: &DirectedGraph,
    nodes: &LabeledNodes,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainedModel> {
    let start = Instant::now();
    cfg.validate()?;
    model_cfg.validate()?;
    nodes.check_matches(graph)?;
    let n = graph.num_nodes();
    let split = cfg.resolve_split(n)?;
    let owned;
    let x = match nodes.features() {
        Some(f) => f,
        None => {
            owned = constant_features(n);
            &owned
        }
    };
    let labels = nodes.labels();
    let ops = GraphOperators::build(graph, model_cfg.kind, exec);
    let mut model = Model::new(*model_cfg, x.ncols(), nodes.num_classes(), cfg.seed)?;
    let mut dropout_rng = stream(cfg.seed, STREAM_DROPOUT);
    let mut adam = Adam::new(cfg.lr);

    let mut best: Option<(usize, f64, f64, f64, Model)> = None;
    let mut trajectory = Vec::new();
    let mut epoch = 0;
    while epoch < cfg.max_epochs {
        epoch += 1;
        let fail = |e: Error, best: &Option<(usize, f64, f64, f64, Model)>| Error::Training {
            epoch,
            last_good: best.as_ref().map(|_| epoch - 1),
            source: Box::new(e),
        };
        let mut tape = Tape::new(exec);
        let mode = if model_cfg.dropout > 0.0 {
            Mode::Train(&mut dropout_rng)
        } else {
            Mode::Eval
        };
        let fwd = model
            .forward(&mut tape, &ops, x, mode)
            .map_err(|e| fail(e, &best))?;
        let eval_logits = if model_cfg.dropout > 0.0 {
            model.predict(&ops, x, exec).map_err(|e| fail(e, &best))?
        } else {
            tape.value(fwd.logits).clone()
        };
        let val = accuracy(eval_logits.view(), labels, &split.val)?;
        trajectory.push(val);
        if best.as_ref().is_none_or(|b| val > b.1) {
            let test = accuracy(eval_logits.view(), labels, &split.test)?;
            let tr = accuracy(eval_logits.view(), labels, &split.train)?;
            best = Some((epoch, val, test, tr, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= cfg.patience || epoch == cfg.max_epochs {
            break;
        }
        let loss = tape
            .softmax_cross_entropy(fwd.logits, labels, &split.train)
            .map_err(|e| fail(e, &best))?;
        let mut grads = tape.backward(loss).map_err(|e| fail(e, &best))?;
        let g: Vec<Array2<f64>> = fwd.params.iter().map(|&v| grads.take(v)).collect();
        adam.step(model.params_mut().values_mut(), &g)
            .map_err(|e| fail(e, &best))?;
    }
    let (best_epoch, best_val, test, tr, best_model) = best.expect("at least one epoch ran");
    Ok(TrainedModel {
        result: RunResult {
            seed: cfg.seed,
            best_epoch,
            epochs_run: epoch,
            best_val_accuracy: best_val,
            test_accuracy: test,
            train_accuracy: tr,
            val_trajectory: trajectory,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
        model: best_model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatSummary {
    pub runs: Vec<RunResult>,
    pub test_mean: f64,
    /// Population standard deviation over runs.
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One independent run per seed (concurrently under a parallel policy).
pub fn train_repeated(
    model_cfg: &ModelConfig,
    graph: &DirectedGraph,
    nodes: &LabeledNodes,
    cfg: &TrainConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<RepeatSummary> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let runs = exec
        .map_slice(seeds, |&seed| {
            let cfg = TrainConfig {
                seed,
                ..cfg.clone()
            };
            train_model(model_cfg, graph, nodes, &cfg, Execution::Sequential).map(|t| t.result)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let tests: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let vals: Vec<f64> = runs.iter().map(|r| r.best_val_accuracy).collect();
    let (test_mean, test_std) = mean_std(&tests);
    let (val_mean, val_std) = mean_std(&vals);
    Ok(RepeatSummary {
        runs,
        test_mean,
        test_std,
        val_mean,
        val_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn split_sizes() {
        let s = random_split(4, (0.5, 0.25, 0.25), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (2, 1, 1));
        let s = random_split(100, (0.5, 0.25, 0.25), 7).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (50, 25, 25));
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, random_split(100, (0.5, 0.25, 0.25), 7).unwrap());
        assert!(random_split(10, (0.5, 0.5, 0.5), 0).is_err());
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut p = vec![array![[1.0, -2.0]]];
        let mut adam = Adam::new(0.1);
        adam.step(p.iter_mut(), &[array![[0.5, 0.5]]]).unwrap();
        let after_one = p[0].clone();
        adam.step(p.iter_mut(), &[array![[0.0, 0.0]]]).unwrap();
        // the first moment keeps pushing while it decays
        assert!(p[0][[0, 0]] < after_one[[0, 0]]);
        let mut q = vec![array![[1.0]]];
        let mut fresh = Adam::new(0.1);
        fresh.step(q.iter_mut(), &[array![[0.0]]]).unwrap();
        assert_eq!(q[0][[0, 0]], 1.0);
        assert_eq!(fresh.moments().0[0][[0, 0]], 0.0);
    }

    #[test]
    fn adam_first_step_and_fixed_point() {
        let g = 0.37;
        let mut p = vec![array![[0.0]]];
        let mut adam = Adam::new(0.01);
        adam.step(p.iter_mut(), &[array![[g]]]).unwrap();
        let expected = -0.01 * g / (g + 1e-8);
        assert!((p[0][[0, 0]] - expected).abs() < 1e-15);
        for _ in 0..2000 {
            let before = p[0][[0, 0]];
            adam.step(p.iter_mut(), &[array![[g]]]).unwrap();
            assert!(((before - p[0][[0, 0]]) - 0.01).abs() < 1e-6);
        }
        assert!(adam.step(p.iter_mut(), &[array![[f64::NAN]]]).is_err());
    }

    #[test]
    fn accuracy_rules() {
        let logits = array![[2.0, 1.0], [0.0, 3.0], [1.0, 1.0]];
        assert_eq!(
            accuracy(logits.view(), &[0, 1, 0], &[0, 1, 2]).unwrap(),
            1.0
        );
        assert!(
            (accuracy(logits.view(), &[0, 1, 1], &[0, 1, 2]).unwrap() - 2.0 / 3.0).abs() < 1e-15
        );
        let uniform = Array2::zeros((4, 2));
        assert_eq!(
            accuracy(uniform.view(), &[0, 1, 1, 0], &[0, 1, 2, 3]).unwrap(),
            0.5
        );
        assert!(accuracy(logits.view(), &[0, 1, 0], &[]).is_err());
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
