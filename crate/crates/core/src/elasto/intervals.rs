use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::layout::ParameterLayout;
use super::records::DeflectionRecord;
use super::regressor::{build_regressor, ElastostaticEstimate};
use super::separate::separate_compensator;
use crate::compensator::CompensatorGeometry;
use crate::error::{Error, Result};
use crate::model::ManipulatorModel;

/// ±3σ half-widths from residual resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ElastoIntervals {
    /// Per layout column, rad/(N·mm).
    pub compliances: DVector<f64>,
    /// `(K0, K_c, s0)` when the separation ran.
    pub separation: Option<[f64; 3]>,
    /// Bare joint-2 compliance `1/K0`.
    pub bare_k2: Option<f64>,
    /// Samples whose separation failed or turned non-physical, excluded.
    pub rejected: usize,
}

fn three_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    3.0 * (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Parametric residual resampling through the whole pipeline.
///
/// Each sample adds `N(0, σ̂²)` noise to the fitted deflections, re-solves
/// the compliances (same regressor, so the least-squares gain is reused) and
/// re-runs the compensator separation, so the `s0 = (s0·K_c)/K_c` and
/// `K = 1/k` nonlinearities propagate. Sample `i` uses a generator seeded
/// with `seed + i`.
pub fn confidence_intervals_elasto(
    records: &[DeflectionRecord],
    layout: &ParameterLayout,
    model: &ManipulatorModel,
    geometry: Option<&CompensatorGeometry>,
    estimate: &ElastostaticEstimate,
    n_samples: usize,
    seed: u64,
) -> Result<ElastoIntervals> {
    if n_samples < 100 {
        return Err(Error::invalid("n_samples", "at least 100 resamples required"));
    }
    let regressor = build_regressor(records, layout, model)?;
    let fit = &estimate.fit;
    let p = layout.len();
    let with_separation = estimate.separation.is_some() && geometry.is_some();
    let sigma = fit.sigma2.sqrt();
    // exact data: residuals are round-off only
    if sigma <= 1e-10 * regressor.dp.amax() {
        return Ok(ElastoIntervals {
            compliances: DVector::zeros(p),
            separation: with_separation.then_some([0.0; 3]),
            bare_k2: with_separation.then_some(0.0),
            rejected: 0,
        });
    }
    let gain = &fit.information_inverse * regressor.b.transpose();
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let n_eq = regressor.equations();

    let draws: Vec<(DVector<f64>, Option<[f64; 4]>)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let eps = DVector::from_fn(n_eq, |_, _| noise.sample(&mut rng));
            let k = &fit.k + &gain * eps;
            let sep = match (with_separation, geometry) {
                (true, Some(geom)) => {
                    let stiff: Vec<f64> = (0..layout.buckets().len())
                        .map(|b| 1.0 / k[layout.bucket_column(b).unwrap()])
                        .collect();
                    separate_compensator(&stiff, geom, layout.buckets())
                        .ok()
                        .filter(|s| s.kc > 0.0 && s.k0 > 0.0)
                        .map(|s| [s.k0, s.kc, s.s0, 1.0 / s.k0])
                }
                _ => None,
            };
            (k, sep)
        })
        .collect();

    let compliances = DVector::from_fn(p, |c, _| three_sd(&draws.iter().map(|(k, _)| k[c]).collect::<Vec<_>>()));
    let seps: Vec<[f64; 4]> = draws.iter().filter_map(|(_, s)| *s).collect();
    let rejected = if with_separation { n_samples - seps.len() } else { 0 };
    let (separation, bare_k2) = if with_separation {
        let col = |i: usize| three_sd(&seps.iter().map(|s| s[i]).collect::<Vec<_>>());
        (Some([col(0), col(1), col(2)]), Some(col(3)))
    } else {
        (None, None)
    };
    Ok(ElastoIntervals {
        compliances,
        separation,
        bare_k2,
        rejected,
    })
}
