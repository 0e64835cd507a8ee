use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{conditional_expectation, op_norm, polar_unitarize, LocalOperator};
use super::state::DEFAULT_AMPLITUDE_BUDGET;
use crate::circuit::Circuit;
use crate::error::Result;

/// Relative distance of a Heisenberg-evolved operator from its truncation to
/// growing windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityProfile {
    pub radii: Vec<usize>,
    pub deviations: Vec<f64>,
}

impl LocalityProfile {
    /// First radius with deviation below `tol`.
    pub fn radius_at(&self, tol: f64) -> Option<usize> {
        self.radii
            .iter()
            .zip(&self.deviations)
            .find(|(_, &d)| d <= tol)
            .map(|(&r, _)| r)
    }
}

/// `α(op) = U† op U`, then `‖α(op) − Π_{I_r}(α(op))‖ / ‖op‖` where `I_r`
/// is every site within distance `r` of `center`. Radii run until the
/// window covers the chain.
pub fn locality_profile(circuit: &Circuit, op: &LocalOperator, center: &[usize]) -> Result<LocalityProfile> {
    let dims = circuit.dims().to_vec();
    let n = dims.len();
    let all: Vec<usize> = (0..n).collect();
    let u = circuit.unitary(DEFAULT_AMPLITUDE_BUDGET)?;
    let full = op.extend_to(&all, &dims)?;
    let evolved: DMatrix<C64> = u.adjoint() * full.matrix() * &u;
    let evolved = LocalOperator::new(all.clone(), dims.clone(), evolved)?;
    let scale = op.norm();
    let lo = center.iter().copied().min().unwrap_or(0);
    let hi = center.iter().copied().max().unwrap_or(0);
    let max_r = lo.max(n.saturating_sub(1).saturating_sub(hi));
    let radii: Vec<usize> = (0..=max_r).collect();
    let mut deviations: Vec<f64> = radii
        .par_iter()
        .map(|&r| -> Result<f64> {
            let window: Vec<usize> = (lo.saturating_sub(r)..=(hi + r).min(n - 1)).collect();
            let truncated = conditional_expectation(&evolved, &window).extend_to(&all, &dims)?;
            Ok(op_norm(&(evolved.matrix() - truncated.matrix())) / scale)
        })
        .collect::<Result<_>>()?;
    // clamp rounding noise so the profile is monotone
    for k in 1..deviations.len() {
        if deviations[k] > deviations[k - 1] {
            deviations[k] = deviations[k - 1];
        }
    }
    for d in &mut deviations {
        if *d < 1e-13 {
            *d = 0.0;
        }
    }
    Ok(LocalityProfile { radii, deviations })
}

/// Distances behind the local replacement of a unitary `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryTruncation {
    /// `‖T − Π(T)‖`.
    pub truncation_error: f64,
    /// `‖T − T_r‖` with `T_r` the polar part of `Π(T)`.
    pub unitary_distance: f64,
}

impl UnitaryTruncation {
    /// `‖T − T_r‖ ≤ factor · ‖T − Π(T)‖` up to rounding.
    pub fn within(&self, factor: f64) -> bool {
        self.unitary_distance <= factor * self.truncation_error + 1e-12
    }
}

/// Conditional expectation of `t` onto `window`, unitarized by its polar
/// part. Returns `T_r` on `window` and the two distances, both measured on
/// the full support of `t`.
pub fn truncate_unitary(t: &LocalOperator, window: &[usize]) -> Result<(LocalOperator, UnitaryTruncation)> {
    let projected = conditional_expectation(t, window);
    let (tr, _) = polar_unitarize(&projected)?;
    let full = |op: &LocalOperator| op.extend_to(t.sites(), t.dims());
    let report = UnitaryTruncation {
        truncation_error: op_norm(&(t.matrix() - full(&projected)?.matrix())),
        unitary_distance: op_norm(&(t.matrix() - full(&tr)?.matrix())),
    };
    Ok((tr, report))
}
