//! Directed and undirected message-passing layers.

use crate::error::{Error, Result};
use crate::nn::tape::{Propagation, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

pub fn activate(tape: &mut Tape, x: Var, act: Activation) -> Result<Var> {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Identity => Ok(x),
    }
}

/// Weights of one directed layer. `omega` is the self-transform used by the
/// Sage flavour only.
#[derive(Debug, Clone, Copy)]
pub struct DirLayerParams {
    pub w_fwd: Var,
    pub w_bwd: Var,
    pub omega: Option<Var>,
    pub alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::config(format!("alpha {alpha} outside [0, 1]")))
    }
}

fn scaled(tape: &mut Tape, x: Var, c: f64) -> Result<Var> {
    if c == 1.0 {
        Ok(x)
    } else {
        tape.scale(x, c)
    }
}

fn sum(tape: &mut Tape, terms: &[Var]) -> Result<Var> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}

/// `2α·P→XW→ + 2(1−α)·P←XW←`; a branch with zero weight is not evaluated.
fn directed_terms(
    tape: &mut Tape,
    x: Var,
    fwd: &Propagation,
    bwd: &Propagation,
    p: &DirLayerParams,
) -> Result<Vec<Var>> {
    check_alpha(p.alpha)?;
    let mut terms = Vec::with_capacity(2);
    for (prop, w, c) in [
        (fwd, p.w_fwd, 2.0 * p.alpha),
        (bwd, p.w_bwd, 2.0 * (1.0 - p.alpha)),
    ] {
        if c > 0.0 {
            let h = tape.matmul(x, w)?;
            let m = tape.spmm(prop, h)?;
            terms.push(scaled(tape, m, c)?);
        }
    }
    Ok(terms)
}

/// `σ(2α·S→XW→ + 2(1−α)·S→ᵀXW←)` with `S→` the directed GCN normalization.
pub fn dir_gcn_layer(
    tape: &mut Tape,
    x: Var,
    s_fwd: &Propagation,
    p: &DirLayerParams,
    act: Activation,
) -> Result<Var> {
    let terms = directed_terms(tape, x, s_fwd, &s_fwd.transposed(), p)?;
    let pre = sum(tape, &terms)?;
    activate(tape, pre, act)
}

/// `σ(XΩ + 2α·D→⁻¹AXW→ + 2(1−α)·D←⁻¹AᵀXW←)`.
pub fn dir_sage_layer(
    tape: &mut Tape,
    x: Var,
    row_fwd: &Propagation,
    row_bwd: &Propagation,
    p: &DirLayerParams,
    act: Activation,
) -> Result<Var> {
    let omega = p
        .omega
        .ok_or_else(|| Error::config("Sage layer needs a self-transform"))?;
    let mut terms = vec![tape.matmul(x, omega)?];
    terms.extend(directed_terms(tape, x, row_fwd, row_bwd, p)?);
    let pre = sum(tape, &terms)?;
    activate(tape, pre, act)
}

/// Undirected GCN layer `σ(S XW)` with `S` the symmetric normalization of `Au`.
pub fn gcn_layer(
    tape: &mut Tape,
    x: Var,
    s_sym: &Propagation,
    w: Var,
    act: Activation,
) -> Result<Var> {
    let h = tape.matmul(x, w)?;
    let pre = tape.spmm(s_sym, h)?;
    activate(tape, pre, act)
}

/// Undirected Sage layer `σ(XΩ + D⁻¹Au XW)`.
pub fn sage_layer(
    tape: &mut Tape,
    x: Var,
    row_u: &Propagation,
    omega: Var,
    w: Var,
    act: Activation,
) -> Result<Var> {
    let own = tape.matmul(x, omega)?;
    let h = tape.matmul(x, w)?;
    let agg = tape.spmm(row_u, h)?;
    let pre = tape.add(own, agg)?;
    activate(tape, pre, act)
}
