use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jackknife::{jackknife_by, jackknife_means, Stat};
use crate::error::{Error, Result};
use crate::exact::{exact_solve, fkg_min, overlap_moments};
use crate::lattice::LatticeGeometry;
use crate::mc::{run_mc, MCConfig};
use crate::models::{sample_disorder, DisorderRealization, ModelSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum Engine {
    Exact,
    MonteCarlo(MCConfig),
}

/// Gibbs-level quantities of one realization. Entries an engine cannot
/// provide (`psi` and `fkg_min` under Monte Carlo) are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationStats {
    pub index: u64,
    pub psi: f64,
    pub q1: f64,
    pub q2: f64,
    pub q11: f64,
    /// `<R_{1,4} R_{2,3}>`.
    pub q1_sq: f64,
    pub xi_mean: f64,
    pub xi_var: f64,
    pub fkg_min: f64,
}

pub fn solve_realization(
    spec: &ModelSpec,
    real: &DisorderRealization,
    engine: &Engine,
) -> Result<RealizationStats> {
    let index = real.provenance().map_or(0, |p| p.index);
    let weights = real.overlap_weights();
    match engine {
        Engine::Exact => {
            let sol = exact_solve(real, spec.beta, spec.mu)?;
            let m = overlap_moments(&sol, &weights)?;
            Ok(RealizationStats {
                index,
                psi: sol.psi,
                q1: m.q1,
                q2: m.q2,
                q11: m.q11,
                q1_sq: m.q1_squared(),
                xi_mean: sol.xi_mean,
                xi_var: sol.xi_variance(),
                fkg_min: fkg_min(&sol),
            })
        }
        Engine::MonteCarlo(cfg) => {
            let est = run_mc(real, spec.beta, spec.mu, cfg)?;
            // time-averaged q1, squared: biased by O(std_err^2)
            Ok(RealizationStats {
                index,
                psi: f64::NAN,
                q1: est.q1.mean,
                q2: est.q2.mean,
                q11: est.q11.map_or(f64::NAN, |e| e.mean),
                q1_sq: est.q1.mean * est.q1.mean,
                xi_mean: est.xi.mean,
                xi_var: est.xi_second.mean - est.xi.mean * est.xi.mean,
                fkg_min: f64::NAN,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderAggregate {
    pub n_samples: usize,
    /// `p_L = E ψ_L`.
    pub p_l: Stat,
    /// Sample variance of `ψ_L` over realizations.
    pub var_psi: Stat,
    pub eq1: Stat,
    pub eq2: Stat,
    pub eq11: Stat,
    /// `E <R_{1,4} R_{2,3}>`.
    pub eq1_sq: Stat,
    /// `E <R^2> - E <R_{1,4} R_{2,3}>` (thermal part).
    pub v1: Stat,
    /// `E <R^2> - (E <R>)^2` (total).
    pub v2: Stat,
    /// `E <R_{1,4} R_{2,3}> - (E <R>)^2` (disorder part).
    pub v3: Stat,
    /// `E <δξ_L^2>`.
    pub xi_var: Stat,
    /// `E |<ξ_L> - E <ξ_L>|`.
    pub xi_abs_dev: Stat,
    /// Two-replica residual with `f = R_{1,2}`.
    pub gg2: Stat,
    /// Three-replica residual with `f = R_{2,3}`.
    pub gg3: Stat,
    /// `|3 V1 - 2 V2|`.
    pub gap_a: Stat,
    /// `|2 V2 - 6 V3|`.
    pub gap_b: Stat,
    /// Smallest connected correlation seen (exact engine only).
    pub min_fkg: f64,
    pub records: Vec<RealizationStats>,
}

impl DisorderAggregate {
    pub fn from_records(records: Vec<RealizationStats>) -> Result<Self> {
        let n = records.len();
        if n < 2 {
            return Err(Error::invalid(
                "aggregate.n_samples",
                "need at least two realizations",
            ));
        }
        let col = |f: fn(&RealizationStats) -> f64| records.iter().map(f).collect::<Vec<f64>>();
        let psi0 = records[0].psi;
        let psi: Vec<f64> = records.iter().map(|r| r.psi - psi0).collect();
        let q1 = col(|r| r.q1);
        let q2 = col(|r| r.q2);
        let q11 = col(|r| r.q11);
        let q1sq = col(|r| r.q1_sq);
        let xi_var = col(|r| r.xi_var);
        let xi_mean = col(|r| r.xi_mean);

        let mean = |c: &[f64]| jackknife_means(&[c], |m| m[0]);
        let mut p_l = mean(&psi);
        p_l.value += psi0;

        let s1: f64 = psi.iter().sum();
        let s2: f64 = psi.iter().map(|v| v * v).sum();
        let var_psi = jackknife_by(n, |skip| {
            let (a, b, k) = match skip {
                None => (s1, s2, n as f64),
                Some(i) => (s1 - psi[i], s2 - psi[i] * psi[i], (n - 1) as f64),
            };
            if k < 2.0 {
                return f64::NAN;
            }
            ((b - a * a / k) / (k - 1.0)).max(0.0)
        });

        let xs = xi_mean.clone();
        let xsum: f64 = xs.iter().sum();
        let xi_abs_dev = jackknife_by(n, |skip| {
            let (sum, k) = match skip {
                None => (xsum, n as f64),
                Some(i) => (xsum - xs[i], (n - 1) as f64),
            };
            let m = sum / k;
            xs.iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, v)| (v - m).abs())
                .sum::<f64>()
                / k
        });

        let moments: [&[f64]; 4] = [&q1, &q2, &q11, &q1sq];
        let over = |f: fn(&[f64]) -> f64| jackknife_means(&moments, f);
        let v1 = |m: &[f64]| m[1] - m[3];
        let v2 = |m: &[f64]| m[1] - m[0] * m[0];
        let v3 = |m: &[f64]| m[3] - m[0] * m[0];

        Ok(DisorderAggregate {
            n_samples: n,
            p_l,
            var_psi,
            eq1: mean(&q1),
            eq2: mean(&q2),
            eq11: mean(&q11),
            eq1_sq: mean(&q1sq),
            v1: over(v1),
            v2: over(v2),
            v3: over(v3),
            xi_var: mean(&xi_var),
            xi_abs_dev,
            gg2: over(|m| m[1] - 2.0 * m[2] + m[0] * m[0]),
            gg3: over(|m| 2.0 * m[2] - 3.0 * m[3] + m[0] * m[0]),
            gap_a: over(|m| (3.0 * (m[1] - m[3]) - 2.0 * (m[1] - m[0] * m[0])).abs()),
            gap_b: over(|m| (2.0 * (m[1] - m[0] * m[0]) - 6.0 * (m[3] - m[0] * m[0])).abs()),
            min_fkg: records
                .iter()
                .map(|r| r.fkg_min)
                .fold(f64::INFINITY, f64::min),
            records,
        })
    }
}

/// Solves `n_samples` realizations drawn from `(master_seed, 0..n_samples)`
/// and averages them. Results do not depend on the rayon pool size.
pub fn aggregate(
    spec: &ModelSpec,
    geom: &Arc<LatticeGeometry>,
    n_samples: usize,
    master_seed: u64,
    engine: &Engine,
) -> Result<DisorderAggregate> {
    spec.validate()?;
    if let Engine::MonteCarlo(cfg) = engine {
        cfg.validate()?;
    }
    if n_samples < 2 {
        return Err(Error::invalid(
            "aggregate.n_samples",
            "need at least two realizations",
        ));
    }
    let results: Vec<Result<RealizationStats>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            sample_disorder(spec, geom, master_seed, i)
                .and_then(|real| solve_realization(spec, &real, engine))
                .map_err(|e| e.at_realization(i))
        })
        .collect();
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    DisorderAggregate::from_records(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GGResidual {
    /// Replica count `n`.
    pub n: usize,
    /// Test function, `R12` for `n = 2` and `R23` for `n = 3`.
    pub f: String,
    pub value: Stat,
}

impl GGResidual {
    pub fn from_aggregate(agg: &DisorderAggregate, n: usize) -> Result<Self> {
        match n {
            2 => Ok(GGResidual {
                n,
                f: "R12".into(),
                value: agg.gg2,
            }),
            3 => Ok(GGResidual {
                n,
                f: "R23".into(),
                value: agg.gg3,
            }),
            _ => Err(Error::invalid(
                "gg.n",
                format!("supported replica counts are 2 and 3, got {n}"),
            )),
        }
    }
}

/// Ghirlanda-Guerra residual for `n` replicas; needs `μ != 0`.
pub fn gg_residual(
    spec: &ModelSpec,
    geom: &Arc<LatticeGeometry>,
    n_samples: usize,
    master_seed: u64,
    n: usize,
    engine: &Engine,
) -> Result<GGResidual> {
    if spec.mu == 0.0 {
        return Err(Error::invalid(
            "model.mu",
            "the residual is only meaningful for mu != 0",
        ));
    }
    if !(2..=3).contains(&n) {
        return Err(Error::invalid(
            "gg.n",
            format!("supported replica counts are 2 and 3, got {n}"),
        ));
    }
    let agg = aggregate(spec, geom, n_samples, master_seed, engine)?;
    GGResidual::from_aggregate(&agg, n)
}

/// `(|3 V1 - 2 V2|, |2 V2 - 6 V3|)`.
pub fn variance_relation_check(agg: &DisorderAggregate) -> (f64, f64) {
    (agg.gap_a.value, agg.gap_b.value)
}
