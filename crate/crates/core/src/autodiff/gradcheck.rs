//! Central finite-difference checks against [`Tape::backward`].

use super::{ParamId, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Compares reverse-mode gradients of `f` with central differences.
///
/// `f` receives a fresh tape and one [`Var`] per entry of `params`
/// (registered as `ParamId(0)`, `ParamId(1)`, ...) and must return a scalar
/// loss slot. The result is the maximum over all parameter entries of
/// `|g_ad − g_fd| / max(1e-8, |g_ad| + |g_fd|)`.
pub fn finite_diff_check<F>(f: F, params: &[Tensor], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {step}")));
    }
    let eval = |ps: &[Tensor]| -> Result<(Tape, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(ParamId(i), p.clone()))
            .collect();
        let loss = f(&mut tape, &vars)?;
        Ok((tape, loss))
    };

    let (tape, loss) = eval(params)?;
    let grads = tape.backward(loss)?;

    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let ad = grads.get(ParamId(pi)).expect("every registered param has a gradient");
        for e in 0..p.len() {
            let orig = p.data()[e];
            work[pi].data_mut()[e] = orig + step;
            let (t_plus, l_plus) = eval(&work)?;
            work[pi].data_mut()[e] = orig - step;
            let (t_minus, l_minus) = eval(&work)?;
            work[pi].data_mut()[e] = orig;

            let fd = (t_plus.value(l_plus).item() - t_minus.value(l_minus).item()) / (2.0 * step);
            let g = ad.data()[e];
            let rel = (g - fd).abs() / (g.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
