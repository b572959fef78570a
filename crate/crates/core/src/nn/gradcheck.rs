use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Module;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Entries checked per parameter tensor; smaller tensors are checked fully.
    pub samples_per_param: usize,
    /// Errors are measured relative to `max(|analytic|, |numeric|, floor)`
    /// with `floor = floor_ratio * max |gradient|` over the whole model.
    pub floor_ratio: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, samples_per_param: 12, floor_ratio: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `name[index]` of the worst entry.
    pub worst: String,
    /// Analytic and numeric gradient at the worst entry.
    pub worst_pair: (f64, f64),
    /// Largest analytic gradient magnitude in the model.
    pub scale: f64,
    pub n_checked: usize,
}

/// Compare analytic parameter gradients against central finite differences.
///
/// `eval(model, backward)` must return the scalar loss; when `backward` is
/// true it must also accumulate gradients into the model's parameters.
pub fn grad_check<M, F>(model: &mut M, mut eval: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    M: Module<f64>,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    model.zero_grad();
    eval(model, true)?;
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.data().to_vec()).collect();
    model.zero_grad();
    let scale = analytic.iter().flatten().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = (opts.floor_ratio * scale).max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report =
        GradCheckReport { max_rel_error: 0.0, worst: String::new(), worst_pair: (0.0, 0.0), scale, n_checked: 0 };
    for (pi, grads) in analytic.iter().enumerate() {
        let len = grads.len();
        let picks: Vec<usize> = if len <= opts.samples_per_param {
            (0..len).collect()
        } else {
            sample(&mut rng, len, opts.samples_per_param).into_vec()
        };
        for idx in picks {
            let orig = model.params()[pi].value.data()[idx];
            model.params_mut()[pi].value.data_mut()[idx] = orig + opts.step;
            let plus = eval(model, false)?;
            model.params_mut()[pi].value.data_mut()[idx] = orig - opts.step;
            let minus = eval(model, false)?;
            model.params_mut()[pi].value.data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grads[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            report.n_checked += 1;
            if report.worst.is_empty() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = format!("{}[{idx}]", model.params()[pi].name);
                report.worst_pair = (a, numeric);
            }
        }
    }
    model.zero_grad();
    Ok(report)
}
