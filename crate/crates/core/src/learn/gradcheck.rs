use super::tape::{Tape, Var};
use super::tensor::Matrix;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub failures: usize,
    /// Largest |analytic - numeric| / (atol + rtol * |numeric|) seen.
    pub worst_ratio: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences for every entry of every input.
pub fn check_gradients<F>(inputs: &[Matrix], f: F, step: f64, rtol: f64, atol: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars = xs.iter().map(|x| tape.leaf(x.clone())).collect::<Result<Vec<_>>>()?;
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data[0])
    };
    let mut tape = Tape::new();
    let vars = inputs.iter().map(|x| tape.leaf(x.clone())).collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let mut report = GradCheck {
        checked: 0,
        failures: 0,
        worst_ratio: 0.0,
    };
    let mut probe = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        for e in 0..inputs[k].data.len() {
            let orig = inputs[k].data[e];
            probe[k].data[e] = orig + step;
            let up = eval(&probe)?;
            probe[k].data[e] = orig - step;
            let down = eval(&probe)?;
            probe[k].data[e] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads[v.0].as_ref().map_or(0.0, |g| g.data[e]);
            let ratio = (analytic - numeric).abs() / (atol + rtol * numeric.abs());
            report.checked += 1;
            if ratio > 1.0 {
                report.failures += 1;
            }
            report.worst_ratio = report.worst_ratio.max(ratio);
        }
    }
    Ok(report)
}
