//! Finite-difference verification of taped gradients.

use crate::autodiff::{Gradients, ParamId, ParamSet, Tape, Var};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct ParamReport {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub params: Vec<ParamReport>,
    /// Number of coordinates where either gradient was NaN.
    pub nan_count: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }
}

/// Denominator floor for [`rel_error`]; keeps vanishing gradients from
/// turning finite-difference round-off into huge relative errors.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// `|a − b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / REL_ERROR_FLOOR.max(a.abs()).max(b.abs())
}

/// Compares taped gradients of the scalar `f` with central differences of
/// step `h` for every coordinate of every parameter in `ids`.
pub fn check_gradients<F>(params: &ParamSet, ids: &[ParamId], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    let mut grads = Gradients::new(params);
    {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        tape.backward(loss, &mut grads)?;
    }
    let eval = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new(ps);
        let loss = f(&mut tape)?;
        Ok(tape.value(loss).item())
    };

    let mut work = params.clone();
    let mut report = GradCheckReport::default();
    for &id in ids {
        let analytic = grads.dense(id);
        let mut pr = ParamReport {
            name: params.get(id).name.clone(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for i in 0..analytic.len() {
            let orig = work.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = orig + h;
            let up = eval(&work)?;
            work.value_mut(id).data_mut()[i] = orig - h;
            let down = eval(&work)?;
            work.value_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data()[i];
            if a.is_nan() || numeric.is_nan() {
                report.nan_count += 1;
                continue;
            }
            pr.max_rel_error = pr.max_rel_error.max(rel_error(a, numeric));
            pr.max_abs_error = pr.max_abs_error.max((a - numeric).abs());
        }
        report.params.push(pr);
    }
    Ok(report)
}
