//! Self-check suites run by the `checks` command.

use std::sync::Arc;

use crate::error::Result;
use crate::exact::{brute_force_replica, exact_solve, overlap_moments, ReplicaObservable};
use crate::lattice::LatticeGeometry;
use crate::mc::{detailed_balance_check, UpdateRule};
use crate::models::{DisorderRealization, Family, FieldDist, ModelSpec};
use crate::stats::gh_expectation;

/// Central-difference step for the derivative checks.
pub const FD_STEP: f64 = 1e-4;

/// `|a - b| / max(|b|, 1e-3)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

/// Copy of `real` with `δ r_x` added to every site field (`r_x = 1` off the
/// site-diluted model), i.e. the realization at `h + δ`.
pub fn shift_field(real: &DisorderRealization, delta: f64) -> Result<DisorderRealization> {
    let fields = real
        .site_fields()
        .iter()
        .zip(real.site_mask())
        .map(|(&f, &m)| if m { f + delta } else { f })
        .collect();
    DisorderRealization::from_parts(
        Arc::clone(real.geometry_arc()),
        real.family(),
        fields,
        real.bond_couplings().to_vec(),
        real.site_mask().to_vec(),
        real.gauss().to_vec(),
    )
}

/// Relative gaps between central differences of `ψ_L` and the analytic
/// derivatives: `(∂ψ/∂h vs (β/|Λ|) Σ r_x <σ_x>, ∂ψ/∂μ vs β <ξ_L>)`.
pub fn psi_gradient_gaps(real: &DisorderRealization, beta: f64, mu: f64) -> Result<(f64, f64)> {
    let d = FD_STEP;
    let sol = exact_solve(real, beta, mu)?;
    let n = real.site_count() as f64;
    let dh_exact = beta / n
        * sol
            .magnetization
            .iter()
            .zip(real.site_mask())
            .filter(|(_, &m)| m)
            .map(|(s, _)| s)
            .sum::<f64>();
    let plus = exact_solve(&shift_field(real, d)?, beta, mu)?.psi;
    let minus = exact_solve(&shift_field(real, -d)?, beta, mu)?.psi;
    let dh_fd = (plus - minus) / (2.0 * d);

    let dmu_exact = beta * sol.xi_mean;
    let plus = exact_solve(real, beta, mu + d)?.psi;
    let minus = exact_solve(real, beta, mu - d)?.psi;
    let dmu_fd = (plus - minus) / (2.0 * d);
    Ok((
        relative_gap(dh_fd, dh_exact),
        relative_gap(dmu_fd, dmu_exact),
    ))
}

/// Largest `|reduced - brute force|` over every replica observable.
pub fn replica_oracle_gap(real: &DisorderRealization, beta: f64, mu: f64) -> Result<f64> {
    let sol = exact_solve(real, beta, mu)?;
    let m = overlap_moments(&sol, &real.overlap_weights())?;
    let mut worst = 0.0f64;
    for f in ReplicaObservable::ALL {
        let brute = brute_force_replica(real, beta, mu, f)?;
        worst = worst.max((f.reduced(&m) - brute).abs());
    }
    Ok(worst)
}

/// Largest kernel violation over both update rules.
pub fn kernel_gap(real: &DisorderRealization, beta: f64, mu: f64) -> Result<f64> {
    let hb = detailed_balance_check(real, beta, mu, UpdateRule::HeatBath)?;
    let me = detailed_balance_check(real, beta, mu, UpdateRule::Metropolis)?;
    Ok(hb.max(me))
}

/// Quadrature checks on a two-site Gaussian random field model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGaps {
    /// `|E g_1 <σ_1> - βμ E(1 - <σ_1>^2)|`.
    pub integration_by_parts: f64,
    /// `|E <R_{1,2}> - (1 - (β^2 μ)^{-1} ∂p/∂μ)|`.
    pub pressure_derivative: f64,
    pub eq1: f64,
}

/// `spec` must be a Gaussian random field model with `μ != 0`.
pub fn quadrature_gaps(spec: &ModelSpec, nodes: usize) -> Result<QuadratureGaps> {
    let geom = Arc::new(LatticeGeometry::new(1, 2)?);
    let (beta, mu) = (spec.beta, spec.mu);
    let v = gh_expectation(spec, &geom, nodes, |real, sol| {
        let q1 = overlap_moments(sol, &real.overlap_weights()).map_or(f64::NAN, |m| m.q1);
        vec![
            real.gauss()[0] * sol.magnetization[0],
            1.0 - sol.magnetization[0].powi(2),
            q1,
        ]
    })?;
    let p = |m: f64| -> Result<f64> {
        let s = spec.clone().with_mu(m);
        Ok(gh_expectation(&s, &geom, nodes, |_, sol| vec![sol.psi])?[0])
    };
    let dp = (p(mu + FD_STEP)? - p(mu - FD_STEP)?) / (2.0 * FD_STEP);
    Ok(QuadratureGaps {
        integration_by_parts: (v[0] - beta * mu * v[1]).abs(),
        pressure_derivative: (v[2] - (1.0 - dp / (beta * beta * mu))).abs(),
        eq1: v[2],
    })
}

/// The two-site model used by [`quadrature_gaps`] for a given base spec.
pub fn quadrature_spec(base: &ModelSpec) -> ModelSpec {
    let mut s = ModelSpec::random_field(base.beta, base.h, base.b);
    s.field_dist = FieldDist::Gaussian;
    s.mu = if base.mu != 0.0 { base.mu } else { 0.2 };
    if s.b == 0.0 || base.family != Family::RandomField {
        s.b = 1.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_disorder;

    #[test]
    fn gradients_on_small_lattices() {
        let geom = Arc::new(LatticeGeometry::new(2, 2).unwrap());
        for family in Family::ALL {
            let spec = ModelSpec {
                family,
                ..ModelSpec::default()
            };
            let real = sample_disorder(&spec, &geom, 5, 0).unwrap();
            let (a, b) = psi_gradient_gaps(&real, 0.7, 0.2).unwrap();
            assert!(a < 1e-6 && b < 1e-6, "{family}: {a} {b}");
        }
    }

    #[test]
    fn shifted_field_is_h_plus_delta() {
        let geom = Arc::new(LatticeGeometry::new(1, 3).unwrap());
        let spec = ModelSpec::random_field(0.5, 0.3, 0.0);
        let real = sample_disorder(&spec, &geom, 1, 0).unwrap();
        let moved = shift_field(&real, 0.2).unwrap();
        let direct = sample_disorder(&spec.clone().with_h(0.5), &geom, 1, 0).unwrap();
        for (a, b) in moved.site_fields().iter().zip(direct.site_fields()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
