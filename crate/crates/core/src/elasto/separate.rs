use nalgebra::{DMatrix, DVector};

use crate::compensator::{spring_length, CompensatorGeometry};
use crate::error::{Error, Result};
use crate::linalg::condition_number;

/// Bare joint-2 stiffness and spring parameters recovered from bucket stiffnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorSeparation {
    /// Bare joint-2 stiffness, N·mm/rad.
    pub k0: f64,
    /// Spring stiffness, N/mm.
    pub kc: f64,
    /// Unloaded spring length, mm.
    pub s0: f64,
    /// `s0·K_c`, the third linear unknown.
    pub kc_s0: f64,
    /// 2-norm condition number of the unscaled design matrix.
    pub condition_number: f64,
    /// Rms misfit of the bucket stiffnesses, N·mm/rad.
    pub rms: f64,
    pub warnings: Vec<String>,
}

/// Design row for `[K0, K_c, s0·K_c]` at `q2`:
/// `[1, −aL cos γ, (aL/s)((aL/s²) sin²γ + cos γ)]`.
pub fn separation_row(geom: &CompensatorGeometry, q2: f64) -> [f64; 3] {
    let al = geom.a() * geom.l();
    let s = spring_length(geom, q2);
    let g = geom.gamma(q2);
    [1.0, -al * g.cos(), al / s * (al / (s * s) * g.sin().powi(2) + g.cos())]
}

/// Linear least squares on `K_θ2,i = K0 + K_c·aL·η(q2_i)` with `s0 = (s0·K_c)/K_c`.
pub fn separate_compensator(stiffness: &[f64], geom: &CompensatorGeometry, q2: &[f64]) -> Result<CompensatorSeparation> {
    let m = stiffness.len();
    if m != q2.len() {
        return Err(Error::invalid("buckets", "one stiffness per bucket angle required"));
    }
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "compensator separation needs >= 3 distinct q2 buckets (got {m})"
        )));
    }
    let c = DMatrix::from_fn(m, 3, |i, j| separation_row(geom, q2[i])[j]);
    let scale = DVector::from_fn(3, |j, _| 1.0 / c.column(j).norm());
    let scaled = DMatrix::from_fn(m, 3, |i, j| c[(i, j)] * scale[j]);
    let svd = scaled.clone().svd(true, true);
    let sv = &svd.singular_values;
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(Error::RankDeficient {
            context: "compensator design matrix".into(),
            null_directions: vec![],
        });
    }
    let rhs = DVector::from_column_slice(stiffness);
    let y = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::SingularConfiguration(e.to_string()))?;
    let x = y.component_mul(&scale);
    let (k0, kc, kc_s0) = (x[0], x[1], x[2]);
    let rms = ((&c * &x - &rhs).norm_squared() / m as f64).sqrt();
    let mut warnings = Vec::new();
    if !(kc > 0.0) {
        warnings.push(format!("non-physical spring stiffness K_c = {kc:.4e} N/mm (expected > 0)"));
    }
    if !(k0 > 0.0) {
        warnings.push(format!("non-physical bare joint-2 stiffness K0 = {k0:.4e} N·mm/rad"));
    }
    Ok(CompensatorSeparation {
        k0,
        kc,
        s0: kc_s0 / kc,
        kc_s0,
        condition_number: condition_number(&c),
        rms,
        warnings,
    })
}
