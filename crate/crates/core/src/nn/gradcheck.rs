//! Central finite-difference checks of tape gradients.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::tape::{Tape, Var};
use crate::par::Execution;

/// Default perturbation for [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Entries whose analytic and numeric gradients are both below this are
/// compared absolutely rather than relatively.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries skipped because a perturbation crossed a ReLU or max-pool kink.
    pub skipped_kinks: usize,
}

/// Relative discrepancy `|a − b| / max(|a|, |b|, ABS_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ABS_FLOOR)
}

/// Compare `∂loss/∂param` from [`Tape::backward`] with central differences.
///
/// `build` records a scalar loss on a fresh tape from one leaf per entry of
/// `params`. It must be deterministic; any randomness (dropout) has to be
/// reseeded inside it.
pub fn gradient_check<F>(params: &[Array2<f64>], step: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Array2<f64>]| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new(Execution::Sequential);
        let leaves = values
            .iter()
            .map(|v| tape.leaf(v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let loss = build(&mut tape, &leaves)?;
        if tape.shape(loss) != (1, 1) {
            return Err(Error::shape("gradient check needs a scalar loss"));
        }
        Ok((tape, leaves, loss))
    };
    let (tape, leaves, loss) = eval(params)?;
    let grads = tape.backward(loss)?;
    let pattern = tape.kink_pattern();
    let mut work: Vec<Array2<f64>> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for (k, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get(*leaf);
        for idx in 0..params[k].len() {
            let orig = params[k].as_slice_memory_order().expect("contiguous")[idx];
            let mut probe = |delta: f64| -> Result<(f64, bool)> {
                work[k].as_slice_memory_order_mut().expect("contiguous")[idx] = orig + delta;
                let (t, _, l) = eval(&work)?;
                Ok((t.scalar(l), t.kink_pattern() == pattern))
            };
            let (plus, same_plus) = probe(step)?;
            let (minus, same_minus) = probe(-step)?;
            work[k].as_slice_memory_order_mut().expect("contiguous")[idx] = orig;
            if !(same_plus && same_minus) {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.as_slice_memory_order().expect("contiguous")[idx];
            report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matmul_chain() {
        let a = array![[0.3, -1.2], [0.5, 0.8]];
        let b = array![[1.1, 0.2, -0.4], [0.7, -0.9, 0.6]];
        let r = gradient_check(&[a, b], FD_STEP, |t, p| {
            let z = t.matmul(p[0], p[1])?;
            t.softmax_cross_entropy(z, &[2, 0], &[0, 1])
        })
        .unwrap();
        assert_eq!(r.checked, 10);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn relu_away_from_kink() {
        let x = array![[1.5, -0.7, 2.0], [-1.0, 0.9, 0.4]];
        let r = gradient_check(&[x], FD_STEP, |t, p| {
            let h = t.relu(p[0])?;
            t.softmax_cross_entropy(h, &[1, 2], &[0, 1])
        })
        .unwrap();
        assert_eq!(r.skipped_kinks, 0);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn kink_crossing_is_skipped() {
        let x = array![[1e-7, 1.0]];
        let r = gradient_check(&[x], FD_STEP, |t, p| {
            let h = t.relu(p[0])?;
            t.softmax_cross_entropy(h, &[0], &[0])
        })
        .unwrap();
        assert_eq!(r.skipped_kinks, 1);
        assert_eq!(r.checked, 1);
    }
}
