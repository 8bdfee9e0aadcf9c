use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Parameters;

/// `|a − n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1.0f64.max(analytic.abs()).max(numeric.abs())
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `theta` for every coordinate.
pub fn central_difference<F>(theta: &[f64], step: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|k| central_difference_at(&mut work, k, step, &mut f))
        .collect()
}

fn central_difference_at<F>(work: &mut [f64], k: usize, step: f64, f: &mut F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let orig = work[k];
    work[k] = orig + step;
    let plus = f(work);
    work[k] = orig - step;
    let minus = f(work);
    work[k] = orig;
    (plus - minus) / (2.0 * step)
}

/// Worst relative error between `analytic` (laid out like
/// `params.flatten()`) and central differences of `loss`.
///
/// With `subsample = Some((n, seed))` and more than `n` parameters, only `n`
/// coordinates chosen by `seed` are probed.
pub fn gradient_check<P, L>(
    params: &P,
    analytic: &[f64],
    step: f64,
    subsample: Option<(usize, u64)>,
    mut loss: L,
) -> f64
where
    P: Parameters + Clone,
    L: FnMut(&P) -> f64,
{
    let theta = params.flatten();
    assert_eq!(theta.len(), analytic.len(), "gradient layout mismatch");
    let indices: Vec<usize> = match subsample {
        Some((n, seed)) if n < theta.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, theta.len(), n).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..theta.len()).collect(),
    };

    let mut probe = params.clone();
    let mut work = theta;
    let mut eval = |v: &[f64]| {
        probe.assign_flat(v).expect("same layout");
        loss(&probe)
    };
    indices
        .into_iter()
        .map(|k| {
            let numeric = central_difference_at(&mut work, k, step, &mut eval);
            relative_error(analytic[k], numeric)
        })
        .fold(0.0, f64::max)
}
