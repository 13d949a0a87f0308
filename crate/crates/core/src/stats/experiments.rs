use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, DisorderAggregate, Engine};
use super::jackknife::Stat;
use super::quadrature::GaussHermite;
use crate::error::{Error, Result};
use crate::exact::{exact_solve, overlap_moments, GibbsSolution};
use crate::lattice::LatticeGeometry;
use crate::models::{DisorderRealization, Draws, Family, FieldDist, ModelSpec};

/// Largest number of Gaussian variables integrated by tensor quadrature.
pub const MAX_QUADRATURE_DIMS: usize = 6;

/// Tensor-product Gauss-Hermite average of `obs` over every Gaussian
/// variable of the model: `g_x` on each site, plus `r_x` for a Gaussian
/// random field with `b != 0`. Dilution must be absent (`p = 1`).
pub fn gh_expectation<F>(
    spec: &ModelSpec,
    geom: &Arc<LatticeGeometry>,
    nodes: usize,
    obs: F,
) -> Result<Vec<f64>>
where
    F: Fn(&DisorderRealization, &GibbsSolution) -> Vec<f64> + Sync,
{
    spec.validate()?;
    let n = geom.site_count();
    let random_field = spec.family == Family::RandomField && spec.b != 0.0;
    if random_field && spec.field_dist != FieldDist::Gaussian {
        return Err(Error::invalid(
            "model.field_dist",
            "quadrature needs Gaussian random fields",
        ));
    }
    if spec.family != Family::RandomField && spec.p < 1.0 {
        return Err(Error::invalid(
            "model.p",
            "quadrature needs p = 1 (no dilution)",
        ));
    }
    let dims = if random_field { 2 * n } else { n };
    if dims > MAX_QUADRATURE_DIMS {
        return Err(Error::CapExceeded {
            what: "quadrature dimensions",
            value: dims,
            cap: MAX_QUADRATURE_DIMS,
        });
    }
    let gh = GaussHermite::new(nodes)?;
    let k = gh.len();
    let inner: usize = k.pow(dims as u32 - 1);

    let eval = |idx: &[usize]| -> Result<(f64, Vec<f64>)> {
        let mut draws = Draws {
            gauss: idx[..n].iter().map(|&i| gh.nodes[i]).collect(),
            ..Draws::default()
        };
        match spec.family {
            Family::RandomField if random_field => {
                draws.fields = idx[n..].iter().map(|&i| gh.nodes[i]).collect();
            }
            Family::RandomField => draws.fields = vec![0.0; n],
            Family::BondDiluted => draws.bonds = vec![true; geom.bond_count()],
            Family::SiteDiluted => draws.mask = vec![true; n],
        }
        let w: f64 = idx.iter().map(|&i| gh.weights[i]).product();
        let real = DisorderRealization::from_draws(spec, geom, draws)?;
        let sol = exact_solve(&real, spec.beta, spec.mu)?;
        Ok((w, obs(&real, &sol)))
    };

    let partial: Vec<Result<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|first| {
            let mut idx = vec![0usize; dims];
            idx[0] = first;
            let mut acc: Vec<f64> = Vec::new();
            for mut code in 0..inner {
                for slot in idx[1..].iter_mut() {
                    *slot = code % k;
                    code /= k;
                }
                let (w, v) = eval(&idx)?;
                if acc.is_empty() {
                    acc = vec![0.0; v.len()];
                } else if acc.len() != v.len() {
                    return Err(Error::SizeMismatch {
                        expected: acc.len(),
                        got: v.len(),
                    });
                }
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a += w * b);
            }
            Ok(acc)
        })
        .collect();

    let mut total: Vec<f64> = Vec::new();
    for p in partial {
        let p = p?;
        if total.is_empty() {
            total = p;
        } else {
            total.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        }
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quadrature average"));
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub volume: usize,
    pub var_psi: Stat,
    /// `|Λ| Var ψ_L`.
    pub scaled_var_psi: Stat,
    pub eq1: Stat,
    pub v1: Stat,
    pub v2: Stat,
    pub v3: Stat,
    pub xi_var: Stat,
    pub xi_abs_dev: Stat,
    pub gg2: Stat,
    pub gg3: Stat,
    pub gap_a: Stat,
    pub gap_b: Stat,
}

impl ScalingRow {
    fn new(l: usize, volume: usize, a: &DisorderAggregate) -> Self {
        let v = volume as f64;
        ScalingRow {
            l,
            volume,
            var_psi: a.var_psi,
            scaled_var_psi: Stat {
                value: a.var_psi.value * v,
                err: a.var_psi.err * v,
            },
            eq1: a.eq1,
            v1: a.v1,
            v2: a.v2,
            v3: a.v3,
            xi_var: a.xi_var,
            xi_abs_dev: a.xi_abs_dev,
            gg2: a.gg2,
            gg3: a.gg3,
            gap_a: a.gap_a,
            gap_b: a.gap_b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln Var ψ_L` against `ln |Λ|`.
    pub slope: f64,
}

pub fn concentration_sweep(
    spec: &ModelSpec,
    dim: usize,
    sides: &[usize],
    n_samples: usize,
    master_seed: u64,
    engine: &Engine,
) -> Result<ScalingTable> {
    if sides.is_empty() {
        return Err(Error::invalid("scaling.L", "need at least one side length"));
    }
    let mut rows = Vec::with_capacity(sides.len());
    for &l in sides {
        let geom = Arc::new(LatticeGeometry::new(dim, l)?);
        let a = aggregate(spec, &geom, n_samples, master_seed, engine)?;
        rows.push(ScalingRow::new(l, geom.site_count(), &a));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.volume as f64).ln(), r.var_psi.value.ln()))
        .collect();
    Ok(ScalingTable {
        slope: ls_slope(&pts),
        rows,
    })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 || pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisorderAverage {
    /// Monte Carlo over disorder; every `μ` reuses the same realizations.
    Sampling {
        n_samples: usize,
        master_seed: u64,
    },
    Quadrature {
        nodes: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub mu: f64,
    pub eq1: Stat,
    pub eq1_sq: Stat,
}

/// `E <R>` and `E <R_{1,4} R_{2,3}>` along a list of perturbation strengths.
pub fn mu_continuity_check(
    spec: &ModelSpec,
    geom: &Arc<LatticeGeometry>,
    mus: &[f64],
    avg: &DisorderAverage,
) -> Result<Vec<ContinuityRow>> {
    mus.iter()
        .map(|&mu| {
            let spec = spec.clone().with_mu(mu);
            match *avg {
                DisorderAverage::Sampling {
                    n_samples,
                    master_seed,
                } => {
                    let a = aggregate(&spec, geom, n_samples, master_seed, &Engine::Exact)?;
                    Ok(ContinuityRow {
                        mu,
                        eq1: a.eq1,
                        eq1_sq: a.eq1_sq,
                    })
                }
                DisorderAverage::Quadrature { nodes } => {
                    let v =
                        gh_expectation(&spec, geom, nodes, |real, sol| {
                            match overlap_moments(sol, &real.overlap_weights()) {
                                Ok(m) => vec![m.q1, m.q1_squared()],
                                Err(_) => vec![f64::NAN, f64::NAN],
                            }
                        })?;
                    Ok(ContinuityRow {
                        mu,
                        eq1: Stat::exact(v[0]),
                        eq1_sq: Stat::exact(v[1]),
                    })
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integration_by_parts() {
        // E g_x <σ_x> = βμ E(1 - <σ_x>^2)
        let geom = Arc::new(LatticeGeometry::new(1, 2).unwrap());
        let spec = ModelSpec::random_field(0.8, 0.3, 1.0).with_mu(0.2);
        let v = gh_expectation(&spec, &geom, 24, |real, sol| {
            let g = real.gauss();
            vec![
                g[0] * sol.magnetization[0],
                1.0 - sol.magnetization[0].powi(2),
            ]
        })
        .unwrap();
        assert!((v[0] - 0.8 * 0.2 * v[1]).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn quadrature_caps_and_domain() {
        let geom = Arc::new(LatticeGeometry::new(2, 2).unwrap());
        let spec = ModelSpec::random_field(0.5, 0.1, 1.0);
        let e = gh_expectation(&spec, &geom, 4, |_, _| vec![1.0]).unwrap_err();
        assert!(matches!(e, Error::CapExceeded { .. }));
        let diluted = ModelSpec::bond_diluted(0.5, 0.1, 1.0, 0.5);
        assert!(gh_expectation(&diluted, &geom, 4, |_, _| vec![1.0]).is_err());
        // p = 1: only the four g_x are integrated
        let pure = ModelSpec::bond_diluted(0.5, 0.1, 1.0, 1.0);
        let one = gh_expectation(&pure, &geom, 5, |_, _| vec![1.0]).unwrap();
        assert!((one[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [4.0f64, 9.0, 16.0]
            .iter()
            .map(|&v| (v.ln(), (0.3 / v).ln()))
            .collect();
        assert!((ls_slope(&pts) + 1.0).abs() < 1e-14);
        assert!(ls_slope(&pts[..1]).is_nan());
    }

    #[test]
    fn continuity_at_zero_field_strength() {
        let geom = Arc::new(LatticeGeometry::new(1, 2).unwrap());
        let spec = ModelSpec::random_field(0.8, 0.3, 1.0);
        let rows = mu_continuity_check(
            &spec,
            &geom,
            &[0.0, 1e-4],
            &DisorderAverage::Quadrature { nodes: 16 },
        )
        .unwrap();
        assert!((rows[0].eq1.value - rows[1].eq1.value).abs() < 1e-6);
        let sampled = mu_continuity_check(
            &spec,
            &geom,
            &[0.0, 1e-4],
            &DisorderAverage::Sampling {
                n_samples: 50,
                master_seed: 3,
            },
        )
        .unwrap();
        assert!((sampled[0].eq1_sq.value - sampled[1].eq1_sq.value).abs() < 1e-5);
    }
}
