//! Exact Gibbs states by enumeration of `Σ_L`, and replica overlap moments.
//!
//! Energies are produced by a Gray-code walk (one spin flip per step) and
//! stored by configuration bits. Weights are shifted by the ground-state
//! energy before exponentiating. One- and two-point functions are accumulated
//! by splitting the configuration bits into a low and a high half, which
//! keeps the cost at `O(2^N N)` instead of `O(2^N N^2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{hamiltonian, DisorderRealization, SpinConfiguration};

/// Largest volume the enumeration engine accepts.
pub const MAX_EXACT_SITES: usize = 20;
/// Largest `N * replicas` the brute-force replica oracle accepts.
pub const MAX_REPLICA_BITS: usize = 24;
/// Largest volume the brute-force replica oracle accepts.
pub const MAX_REPLICA_SITES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSolution {
    pub sites: usize,
    pub log_z: f64,
    /// `log Z / |Λ|`.
    pub psi: f64,
    pub magnetization: Vec<f64>,
    /// Row-major `N x N` matrix of `<σ_x σ_y>`.
    pub pair_corr: Vec<f64>,
    /// `<H_μ>`.
    pub mean_energy: f64,
    pub xi_mean: f64,
    pub xi_second: f64,
}

impl GibbsSolution {
    #[inline]
    pub fn corr(&self, x: usize, y: usize) -> f64 {
        self.pair_corr[x * self.sites + y]
    }

    /// `<σ_x ; σ_y> = <σ_x σ_y> - <σ_x><σ_y>`.
    #[inline]
    pub fn connected(&self, x: usize, y: usize) -> f64 {
        self.corr(x, y) - self.magnetization[x] * self.magnetization[y]
    }

    /// Thermal variance `<δξ_L^2>`.
    pub fn xi_variance(&self) -> f64 {
        self.xi_second - self.xi_mean * self.xi_mean
    }
}

pub fn exact_solve(real: &DisorderRealization, beta: f64, mu: f64) -> Result<GibbsSolution> {
    let n = real.site_count();
    if n > MAX_EXACT_SITES {
        return Err(Error::CapExceeded {
            what: "exact enumeration sites",
            value: n,
            cap: MAX_EXACT_SITES,
        });
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(
            "model.beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    if !mu.is_finite() {
        return Err(Error::invalid("model.mu", "must be finite"));
    }

    let field = real.effective_field(mu);
    let energies = gray_code_energies(real, &field);
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("configuration energy"));
    }

    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = energies
        .iter()
        .map(|&e| (-beta * (e - e_min)).exp())
        .collect();
    let z_shifted: f64 = weights.iter().sum();
    let log_z = -beta * e_min + z_shifted.ln();
    if !log_z.is_finite() {
        return Err(Error::NonFinite("log partition function"));
    }
    let inv = 1.0 / z_shifted;
    for w in &mut weights {
        *w *= inv;
    }
    let mean_energy = weights.iter().zip(&energies).map(|(w, e)| w * e).sum();

    let (magnetization, pair_corr) = correlators(&weights, n);

    let coeff = real.perturbation_weights();
    let nf = n as f64;
    let xi_mean = coeff
        .iter()
        .zip(&magnetization)
        .map(|(c, m)| c * m)
        .sum::<f64>()
        / nf;
    let mut xi_second = 0.0;
    for x in 0..n {
        let row = &pair_corr[x * n..(x + 1) * n];
        xi_second += coeff[x] * row.iter().zip(&coeff).map(|(c2, c)| c2 * c).sum::<f64>();
    }
    xi_second /= nf * nf;

    Ok(GibbsSolution {
        sites: n,
        log_z,
        psi: log_z / nf,
        magnetization,
        pair_corr,
        mean_energy,
        xi_mean,
        xi_second,
    })
}

/// Energy of every configuration, indexed by its bit pattern (bit set = up).
fn gray_code_energies(real: &DisorderRealization, field: &[f64]) -> Vec<f64> {
    let n = real.site_count();
    let states = 1usize << n;
    let mut spins = vec![-1i8; n];
    let mut energy = real.energy_with_field(field, &spins);
    let mut out = vec![0.0; states];
    out[0] = energy;
    let mut code = 0usize;
    for k in 1..states {
        let x = k.trailing_zeros() as usize;
        energy += 2.0 * f64::from(spins[x]) * real.local_field(field, &spins, x);
        spins[x] = -spins[x];
        code ^= 1 << x;
        out[code] = energy;
    }
    out
}

#[inline]
fn spin_of(bits: usize, x: usize) -> f64 {
    if bits >> x & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Magnetizations and the full two-point matrix from normalized weights.
fn correlators(weights: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let n_low = n / 2;
    let n_high = n - n_low;
    let low_states = 1usize << n_low;
    let high_states = 1usize << n_high;

    let mut low_marginal = vec![0.0; low_states];
    let mut high_marginal = vec![0.0; high_states];
    // cross[h * n_low + x] = Σ_l w(h, l) σ_x(l)
    let mut cross = vec![0.0; high_states * n_low];
    for h in 0..high_states {
        let row = &weights[h * low_states..(h + 1) * low_states];
        let mut total = 0.0;
        let acc = &mut cross[h * n_low..(h + 1) * n_low];
        for (l, &w) in row.iter().enumerate() {
            low_marginal[l] += w;
            total += w;
            for (x, a) in acc.iter_mut().enumerate() {
                if l >> x & 1 == 1 {
                    *a += w;
                }
            }
        }
        for a in acc.iter_mut() {
            *a = 2.0 * *a - total;
        }
        high_marginal[h] = total;
    }

    let mut mag = vec![0.0; n];
    let mut corr = vec![0.0; n * n];
    for x in 0..n {
        corr[x * n + x] = 1.0;
    }

    for (l, &w) in low_marginal.iter().enumerate() {
        for x in 0..n_low {
            let sx = spin_of(l, x);
            mag[x] += w * sx;
            for y in x + 1..n_low {
                corr[x * n + y] += w * sx * spin_of(l, y);
            }
        }
    }
    for (h, &w) in high_marginal.iter().enumerate() {
        for i in 0..n_high {
            let si = spin_of(h, i);
            mag[n_low + i] += w * si;
            for j in i + 1..n_high {
                corr[(n_low + i) * n + n_low + j] += w * si * spin_of(h, j);
            }
        }
    }
    for h in 0..high_states {
        let acc = &cross[h * n_low..(h + 1) * n_low];
        for i in 0..n_high {
            let si = spin_of(h, i);
            for (x, &a) in acc.iter().enumerate() {
                corr[x * n + n_low + i] += si * a;
            }
        }
    }
    for x in 0..n {
        for y in x + 1..n {
            corr[y * n + x] = corr[x * n + y];
        }
    }
    (mag, corr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapMoments {
    /// `<R_{1,2}>`.
    pub q1: f64,
    /// `<R_{1,2}^2>`.
    pub q2: f64,
    /// `<R_{1,2} R_{1,3}>`, equal to `<R_{1,2} R_{2,3}>`.
    pub q11: f64,
    /// `<R_{1,2}^2> - <R_{1,2}>^2`.
    pub gibbs_var: f64,
    pub weights_used: Vec<f64>,
}

impl OverlapMoments {
    /// `<R_{1,4} R_{2,3}> = <R_{1,2}>^2`.
    pub fn q1_squared(&self) -> f64 {
        self.q1 * self.q1
    }
}

/// Replica-reduced overlap moments of a single Gibbs state.
///
/// `weights` are `1` per site, or `r_x^2` for site dilution.
pub fn overlap_moments(sol: &GibbsSolution, weights: &[f64]) -> Result<OverlapMoments> {
    let n = sol.sites;
    if weights.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    let nf = n as f64;
    let m = &sol.magnetization;
    let q1 = weights
        .iter()
        .zip(m)
        .map(|(w, mx)| w * mx * mx)
        .sum::<f64>()
        / nf;
    let mut q2 = 0.0;
    let mut q11 = 0.0;
    for x in 0..n {
        let mut row2 = 0.0;
        let mut row11 = 0.0;
        for y in 0..n {
            let c = sol.corr(x, y);
            row2 += weights[y] * c * c;
            row11 += weights[y] * c * m[y];
        }
        q2 += weights[x] * row2;
        q11 += weights[x] * m[x] * row11;
    }
    q2 /= nf * nf;
    q11 /= nf * nf;
    Ok(OverlapMoments {
        q1,
        q2,
        q11,
        gibbs_var: q2 - q1 * q1,
        weights_used: weights.to_vec(),
    })
}

/// Minimum connected correlation `<σ_x σ_y> - <σ_x><σ_y>` over pairs `x < y`.
///
/// A single-site system has no pairs; 0 is returned.
pub fn fkg_min(sol: &GibbsSolution) -> f64 {
    let n = sol.sites;
    let mut min = f64::INFINITY;
    for x in 0..n {
        for y in x + 1..n {
            min = min.min(sol.connected(x, y));
        }
    }
    if min.is_finite() {
        min
    } else {
        0.0
    }
}

/// Multi-replica observables understood by [`brute_force_replica`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReplicaObservable {
    R12,
    R12Sq,
    R12R13,
    R12R23,
    R14R23,
}

impl ReplicaObservable {
    pub const ALL: [ReplicaObservable; 5] = [
        ReplicaObservable::R12,
        ReplicaObservable::R12Sq,
        ReplicaObservable::R12R13,
        ReplicaObservable::R12R23,
        ReplicaObservable::R14R23,
    ];

    pub fn replicas(self) -> usize {
        match self {
            ReplicaObservable::R12 | ReplicaObservable::R12Sq => 2,
            ReplicaObservable::R12R13 | ReplicaObservable::R12R23 => 3,
            ReplicaObservable::R14R23 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReplicaObservable::R12 => "R12",
            ReplicaObservable::R12Sq => "R12^2",
            ReplicaObservable::R12R13 => "R12*R13",
            ReplicaObservable::R12R23 => "R12*R23",
            ReplicaObservable::R14R23 => "R14*R23",
        }
    }

    /// The same expectation from replica-reduced moments.
    pub fn reduced(self, m: &OverlapMoments) -> f64 {
        match self {
            ReplicaObservable::R12 => m.q1,
            ReplicaObservable::R12Sq => m.q2,
            ReplicaObservable::R12R13 | ReplicaObservable::R12R23 => m.q11,
            ReplicaObservable::R14R23 => m.q1_squared(),
        }
    }
}

impl fmt::Display for ReplicaObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReplicaObservable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match key.to_ascii_uppercase().as_str() {
            "R12" => Ok(ReplicaObservable::R12),
            "R12^2" | "R12SQ" | "R12*R12" => Ok(ReplicaObservable::R12Sq),
            "R12*R13" | "R12R13" => Ok(ReplicaObservable::R12R13),
            "R12*R23" | "R12R23" => Ok(ReplicaObservable::R12R23),
            "R14*R23" | "R14R23" => Ok(ReplicaObservable::R14R23),
            _ => Err(Error::invalid(
                "observable",
                format!("unknown replica observable `{s}`"),
            )),
        }
    }
}

/// Direct sum of `f` over `(Σ_L)^n` with product Gibbs weights.
///
/// Gibbs weights come from [`hamiltonian`] evaluated configuration by
/// configuration, and overlaps from their definition, so nothing here shares
/// code with [`exact_solve`] or [`overlap_moments`].
pub fn brute_force_replica(
    real: &DisorderRealization,
    beta: f64,
    mu: f64,
    f: ReplicaObservable,
) -> Result<f64> {
    let n = real.site_count();
    if n > MAX_REPLICA_SITES {
        return Err(Error::CapExceeded {
            what: "replica oracle sites",
            value: n,
            cap: MAX_REPLICA_SITES,
        });
    }
    let k = f.replicas();
    if n * k > MAX_REPLICA_BITS {
        return Err(Error::CapExceeded {
            what: "replica oracle bits (sites x replicas)",
            value: n * k,
            cap: MAX_REPLICA_BITS,
        });
    }
    let states = 1usize << n;
    let configs: Vec<SpinConfiguration> = (0..states)
        .map(|s| SpinConfiguration::from_bits(s as u64, n))
        .collect();
    let mut log_w = Vec::with_capacity(states);
    for c in &configs {
        log_w.push(-beta * hamiltonian(real, c, mu)?);
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut prob: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = prob.iter().sum();
    prob.iter_mut().for_each(|p| *p /= z);

    let weights = real.overlap_weights();
    let mut overlap = vec![0.0; states * states];
    for a in 0..states {
        for b in 0..states {
            let sa = configs[a].spins();
            let sb = configs[b].spins();
            let sum: f64 = (0..n).map(|x| weights[x] * f64::from(sa[x] * sb[x])).sum();
            overlap[a * states + b] = sum / n as f64;
        }
    }
    let r = |a: usize, b: usize| overlap[a * states + b];

    let mut total = 0.0;
    match f {
        ReplicaObservable::R12 | ReplicaObservable::R12Sq => {
            for s1 in 0..states {
                for s2 in 0..states {
                    let v = r(s1, s2);
                    let v = if f == ReplicaObservable::R12 {
                        v
                    } else {
                        v * v
                    };
                    total += prob[s1] * prob[s2] * v;
                }
            }
        }
        ReplicaObservable::R12R13 | ReplicaObservable::R12R23 => {
            for s1 in 0..states {
                for s2 in 0..states {
                    let p12 = prob[s1] * prob[s2];
                    let r12 = r(s1, s2);
                    for s3 in 0..states {
                        let other = if f == ReplicaObservable::R12R13 {
                            r(s1, s3)
                        } else {
                            r(s2, s3)
                        };
                        total += p12 * prob[s3] * r12 * other;
                    }
                }
            }
        }
        ReplicaObservable::R14R23 => {
            for s1 in 0..states {
                for s2 in 0..states {
                    for s3 in 0..states {
                        let p123 = prob[s1] * prob[s2] * prob[s3];
                        let r23 = r(s2, s3);
                        for s4 in 0..states {
                            total += p123 * prob[s4] * r(s1, s4) * r23;
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}
