//! Layer stacks with jumping knowledge and a linear decoder.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::nn::layers::{self, Activation, DirLayerParams};
use crate::nn::params::ParamStore;
use crate::nn::tape::{Propagation, Tape, Var};
use crate::operators::OperatorKind;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    DirGcn,
    DirSage,
    Gcn,
    Sage,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::DirGcn => "dir-gcn",
            LayerKind::DirSage => "dir-sage",
            LayerKind::Gcn => "gcn",
            LayerKind::Sage => "sage",
        }
    }

    pub fn is_directed(self) -> bool {
        matches!(self, LayerKind::DirGcn | LayerKind::DirSage)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            LayerKind::DirGcn,
            LayerKind::DirSage,
            LayerKind::Gcn,
            LayerKind::Sage,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::config(format!("unknown model {s:?}")))
    }
}

/// Jumping-knowledge combination of the per-layer outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Jk {
    None,
    Max,
    Cat,
}

impl FromStr for Jk {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Jk::None),
            "max" => Ok(Jk::Max),
            "cat" => Ok(Jk::Cat),
            _ => Err(Error::config(format!("unknown jumping knowledge {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: LayerKind,
    pub num_layers: usize,
    pub hidden: usize,
    pub alpha: f64,
    pub jk: Jk,
    pub l2_normalize: bool,
    pub dropout: f64,
    pub activation: Activation,
}

impl ModelConfig {
    /// Ablation defaults: 3 layers of width 64, row normalization, max JK.
    pub fn ablation(kind: LayerKind, alpha: f64) -> Self {
        Self {
            kind,
            num_layers: 3,
            hidden: 64,
            alpha,
            jk: Jk::Max,
            l2_normalize: true,
            dropout: 0.0,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::config("at least one layer is required"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Width of the decoder input.
    pub fn readout_width(&self) -> usize {
        match self.jk {
            Jk::Cat => self.hidden * self.num_layers,
            Jk::None | Jk::Max => self.hidden,
        }
    }
}

/// Propagation matrices a model kind needs, built once per graph.
#[derive(Debug, Clone)]
pub enum GraphOperators {
    DirGcn {
        s_fwd: Propagation,
    },
    DirSage {
        row_fwd: Propagation,
        row_bwd: Propagation,
    },
    Gcn {
        s_sym: Propagation,
    },
    Sage {
        row_u: Propagation,
    },
}

impl GraphOperators {
    pub fn build(graph: &DirectedGraph, kind: LayerKind, exec: Execution) -> Self {
        let prop = |k: OperatorKind| Propagation::new(k.build(graph, exec));
        match kind {
            LayerKind::DirGcn => GraphOperators::DirGcn {
                s_fwd: prop(OperatorKind::SFwdGcn),
            },
            LayerKind::DirSage => GraphOperators::DirSage {
                row_fwd: prop(OperatorKind::SRowFwd),
                row_bwd: prop(OperatorKind::SRowBwd),
            },
            LayerKind::Gcn => GraphOperators::Gcn {
                s_sym: prop(OperatorKind::SSymGcn),
            },
            LayerKind::Sage => GraphOperators::Sage {
                row_u: prop(OperatorKind::SRowUndirected),
            },
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            GraphOperators::DirGcn { .. } => LayerKind::DirGcn,
            GraphOperators::DirSage { .. } => LayerKind::DirSage,
            GraphOperators::Gcn { .. } => LayerKind::Gcn,
            GraphOperators::Sage { .. } => LayerKind::Sage,
        }
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            GraphOperators::DirGcn { s_fwd: p }
            | GraphOperators::DirSage { row_fwd: p, .. }
            | GraphOperators::Gcn { s_sym: p }
            | GraphOperators::Sage { row_u: p } => p.matrix().n_rows(),
        }
    }
}

/// Whether a forward pass samples dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Leaves for every parameter, in [`ParamStore`] order, plus the logits.
#[derive(Debug, Clone)]
pub struct Forward {
    pub params: Vec<Var>,
    pub logits: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    cfg: ModelConfig,
    in_dim: usize,
    num_classes: usize,
    params: ParamStore,
}

fn layer_param_names(kind: LayerKind, l: usize) -> Vec<String> {
    let names: &[&str] = match kind {
        LayerKind::DirGcn => &["w_fwd", "w_bwd"],
        LayerKind::DirSage => &["omega", "w_fwd", "w_bwd"],
        LayerKind::Gcn => &["w"],
        LayerKind::Sage => &["omega", "w"],
    };
    names.iter().map(|n| format!("layer{l}.{n}")).collect()
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit))
}

impl Model {
    /// Glorot-uniform weights and a zero decoder bias, drawn from `seed`.
    pub fn new(cfg: ModelConfig, in_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if in_dim == 0 || num_classes == 0 {
            return Err(Error::config(
                "input width and class count must be positive",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, (r, c)) in Self::layout(&cfg, in_dim, num_classes) {
            let value = if name == "decoder.b" {
                Array2::zeros((r, c))
            } else {
                glorot(r, c, &mut rng)
            };
            params.insert(name, value);
        }
        Ok(Self {
            cfg,
            in_dim,
            num_classes,
            params,
        })
    }

    /// Rebuild a model from stored parameters, checking names and shapes.
    pub fn from_params(
        cfg: ModelConfig,
        in_dim: usize,
        num_classes: usize,
        params: ParamStore,
    ) -> Result<Self> {
        cfg.validate()?;
        let layout = Self::layout(&cfg, in_dim, num_classes);
        if layout.len() != params.len() {
            return Err(Error::shape(format!(
                "expected {} parameters, found {}",
                layout.len(),
                params.len()
            )));
        }
        let mut ordered = ParamStore::new();
        for (name, shape) in layout {
            let v = params
                .get(&name)
                .ok_or_else(|| Error::shape(format!("missing parameter {name}")))?;
            if v.dim() != shape {
                return Err(Error::shape(format!(
                    "{name} is {:?}, expected {shape:?}",
                    v.dim()
                )));
            }
            ordered.insert(name, v.clone());
        }
        Ok(Self {
            cfg,
            in_dim,
            num_classes,
            params: ordered,
        })
    }

    fn layout(
        cfg: &ModelConfig,
        in_dim: usize,
        num_classes: usize,
    ) -> Vec<(String, (usize, usize))> {
        let mut out = Vec::new();
        for l in 0..cfg.num_layers {
            let d_in = if l == 0 { in_dim } else { cfg.hidden };
            for name in layer_param_names(cfg.kind, l) {
                out.push((name, (d_in, cfg.hidden)));
            }
        }
        out.push(("decoder.w".into(), (cfg.readout_width(), num_classes)));
        out.push(("decoder.b".into(), (1, num_classes)));
        out
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Record the whole model on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        ops: &GraphOperators,
        x: &Array2<f64>,
        mut mode: Mode<'_>,
    ) -> Result<Forward> {
        if ops.kind() != self.cfg.kind {
            return Err(Error::config(format!(
                "operators for {} given to a {} model",
                ops.kind(),
                self.cfg.kind
            )));
        }
        if x.dim() != (ops.num_nodes(), self.in_dim) {
            return Err(Error::shape(format!(
                "features are {:?}, expected ({}, {})",
                x.dim(),
                ops.num_nodes(),
                self.in_dim
            )));
        }
        let params: Vec<Var> = self
            .params
            .values()
            .map(|v| tape.leaf(v.clone()))
            .collect::<Result<_>>()?;
        let per_layer = layer_param_names(self.cfg.kind, 0).len();
        let act = self.cfg.activation;
        let mut h = tape.leaf(x.clone())?;
        let mut outputs = Vec::with_capacity(self.cfg.num_layers);
        for l in 0..self.cfg.num_layers {
            if let Mode::Train(rng) = &mut mode {
                h = tape.dropout(h, self.cfg.dropout, *rng)?;
            }
            let p = &params[l * per_layer..(l + 1) * per_layer];
            h = match ops {
                GraphOperators::DirGcn { s_fwd } => {
                    let dp = DirLayerParams {
                        w_fwd: p[0],
                        w_bwd: p[1],
                        omega: None,
                        alpha: self.cfg.alpha,
                    };
                    layers::dir_gcn_layer(tape, h, s_fwd, &dp, act)?
                }
                GraphOperators::DirSage { row_fwd, row_bwd } => {
                    let dp = DirLayerParams {
                        omega: Some(p[0]),
                        w_fwd: p[1],
                        w_bwd: p[2],
                        alpha: self.cfg.alpha,
                    };
                    layers::dir_sage_layer(tape, h, row_fwd, row_bwd, &dp, act)?
                }
                GraphOperators::Gcn { s_sym } => layers::gcn_layer(tape, h, s_sym, p[0], act)?,
                GraphOperators::Sage { row_u } => {
                    layers::sage_layer(tape, h, row_u, p[0], p[1], act)?
                }
            };
            if self.cfg.l2_normalize {
                h = tape.row_l2_normalize(h)?;
            }
            outputs.push(h);
        }
        let readout = match self.cfg.jk {
            Jk::None => h,
            Jk::Max => tape.max_pool(&outputs)?,
            Jk::Cat => tape.concat_cols(&outputs)?,
        };
        let n = params.len();
        let z = tape.matmul(readout, params[n - 2])?;
        let logits = tape.add_bias(z, params[n - 1])?;
        Ok(Forward { params, logits })
    }

    /// Logits without dropout.
    pub fn predict(
        &self,
        ops: &GraphOperators,
        x: &Array2<f64>,
        exec: Execution,
    ) -> Result<Array2<f64>> {
        let mut tape = Tape::new(exec);
        let f = self.forward(&mut tape, ops, x, Mode::Eval)?;
        Ok(tape.value(f.logits).clone())
    }
}
