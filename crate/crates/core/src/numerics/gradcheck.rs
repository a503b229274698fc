//! Central finite-difference checks of analytic gradients.

use super::{Graph, ParamStore, Tensor, Var};
use crate::error::Result;

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Relative errors are measured against `max(|analytic|, |numeric|, REL_FLOOR)`
/// so that entries whose true gradient is ~0 are compared absolutely.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct InputReport {
    pub name: String,
    pub max_rel_error: f64,
    /// Index of the worst entry.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub inputs: Vec<InputReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.inputs.iter().all(|i| i.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.inputs.iter().map(|i| i.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn compare(name: String, analytic: &[f64], numeric: &[f64]) -> InputReport {
    let mut report = InputReport {
        name,
        max_rel_error: 0.0,
        worst: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (k, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(a, n);
        if e > report.max_rel_error || k == 0 {
            report.max_rel_error = e.max(report.max_rel_error);
            report.worst = k;
            report.analytic = a;
            report.numeric = n;
        }
    }
    report
}

/// Checks `d f / d inputs` for a scalar function of free tensors.
pub fn gradient_check<F>(f: F, inputs: &[Tensor], tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_inputs(&f, inputs, tolerance, None)
}

/// Same as [`gradient_check`] but adds `delta` to one analytic gradient entry
/// first. A correct checker must fail this negative control.
pub fn gradient_check_with_corruption<F>(
    f: F,
    inputs: &[Tensor],
    tolerance: f64,
    corrupt_input: usize,
    corrupt_entry: usize,
    delta: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    check_inputs(&f, inputs, tolerance, Some((corrupt_input, corrupt_entry, delta)))
}

fn check_inputs<F>(
    f: &F,
    inputs: &[Tensor],
    tolerance: f64,
    corruption: Option<(usize, usize, f64)>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let empty = ParamStore::new();
    let mut analytic: Vec<Tensor> = {
        let mut g = Graph::new(&empty);
        let vars = inputs
            .iter()
            .map(|t| g.variable(t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut g, &vars)?;
        let grads = g.backward(out)?;
        vars.iter()
            .zip(inputs)
            .map(|(v, t)| grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros_like(t)))
            .collect()
    };
    if let Some((i, k, delta)) = corruption {
        analytic[i].data_mut()[k] += delta;
    }
    let mut reports = Vec::new();
    for (i, a) in analytic.iter().enumerate() {
        let numeric = numeric_gradient(f, inputs, i)?;
        reports.push(compare(format!("input{i}"), a.data(), &numeric));
    }
    Ok(GradCheckReport {
        tolerance,
        inputs: reports,
    })
}

/// Checks gradients with respect to every parameter in `store`.
pub fn gradient_check_params<F>(f: F, store: &ParamStore, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let out = f(&mut g)?;
        g.backward(out)?.into_params()
    };
    let mut work = store.clone();
    let mut reports = Vec::new();
    for (id, param) in store.iter() {
        let a = analytic
            .iter()
            .find(|(pid, _)| *pid == id)
            .map(|(_, t)| t.clone())
            .unwrap_or_else(|| Tensor::zeros_like(&param.value));
        let mut numeric = vec![0.0; param.value.len()];
        for (k, num) in numeric.iter_mut().enumerate() {
            let orig = param.value.data()[k];
            work.get_mut(id).value.data_mut()[k] = orig + FD_STEP;
            let plus = {
                let mut g = Graph::new(&work);
                let out = f(&mut g)?;
                g.value(out).item()
            };
            work.get_mut(id).value.data_mut()[k] = orig - FD_STEP;
            let minus = {
                let mut g = Graph::new(&work);
                let out = f(&mut g)?;
                g.value(out).item()
            };
            work.get_mut(id).value.data_mut()[k] = orig;
            *num = (plus - minus) / (2.0 * FD_STEP);
        }
        reports.push(compare(param.name.clone(), a.data(), &numeric));
    }
    Ok(GradCheckReport {
        tolerance,
        inputs: reports,
    })
}

fn numeric_gradient<F>(f: &F, inputs: &[Tensor], which: usize) -> Result<Vec<f64>>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let empty = ParamStore::new();
    let mut work = inputs.to_vec();
    let mut out = vec![0.0; inputs[which].len()];
    for (k, num) in out.iter_mut().enumerate() {
        let orig = inputs[which].data()[k];
        let at = |x: f64, work: &mut Vec<Tensor>| -> Result<f64> {
            work[which].data_mut()[k] = x;
            let mut g = Graph::new(&empty);
            let vars = work
                .iter()
                .map(|t| g.variable(t.clone()))
                .collect::<Result<Vec<_>>>()?;
            let y = f(&mut g, &vars)?;
            Ok(g.value(y).item())
        };
        let plus = at(orig + FD_STEP, &mut work)?;
        let minus = at(orig - FD_STEP, &mut work)?;
        work[which].data_mut()[k] = orig;
        *num = (plus - minus) / (2.0 * FD_STEP);
    }
    Ok(out)
}
