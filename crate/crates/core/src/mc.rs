//! Single-spin-flip Monte Carlo for `n` replicas sharing one realization.
//!
//! Replicas are swept in lockstep (sites visited in index order), so overlaps
//! `R_{a,b}` are measured between configurations at the same sweep. Each
//! replica draws from its own keyed stream.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{hamiltonian, DisorderRealization, SpinConfiguration};
use crate::rng::{self, StreamRole};

/// Largest volume for which [`detailed_balance_check`] builds explicit kernels.
pub const MAX_KERNEL_SITES: usize = 4;

/// Sweeps between full energy recomputations.
const ENERGY_CHECK_INTERVAL: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    HeatBath,
    Metropolis,
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::HeatBath => "heat-bath",
            UpdateRule::Metropolis => "metropolis",
        })
    }
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heat-bath" | "heatbath" | "glauber" => Ok(UpdateRule::HeatBath),
            "metropolis" => Ok(UpdateRule::Metropolis),
            other => Err(Error::invalid(
                "mc.update_rule",
                format!("unknown rule `{other}` (expected heat-bath or metropolis)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    /// Measurement sweeps after burn-in.
    pub sweeps: usize,
    pub burn_in: usize,
    /// Sweeps between measurements.
    pub thinning: usize,
    pub n_replicas: usize,
    pub update_rule: UpdateRule,
    pub chain_seed: u64,
    /// Estimate `<R_{1,2} R_{1,3}>` (needs three replicas).
    pub estimate_q11: bool,
    /// Keep the raw per-measurement trace.
    pub record_trace: bool,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig {
            sweeps: 100_000,
            burn_in: 1_000,
            thinning: 1,
            n_replicas: 3,
            update_rule: UpdateRule::HeatBath,
            chain_seed: 20240001,
            estimate_q11: true,
            record_trace: false,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::invalid("mc.sweeps", "must be positive"));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("mc.thinning", "must be at least 1"));
        }
        if self.n_replicas < 2 {
            return Err(Error::invalid(
                "mc.n_replicas",
                "overlaps need at least 2 replicas",
            ));
        }
        if self.estimate_q11 && self.n_replicas < 3 {
            return Err(Error::invalid(
                "mc.n_replicas",
                "three replicas are required to estimate <R12 R13>",
            ));
        }
        if self.sweeps / self.thinning < 2 {
            return Err(Error::invalid("mc.sweeps", "fewer than two measurements"));
        }
        Ok(())
    }
}

/// Mean with blocked standard error and integrated autocorrelation time
/// (in units of measurements).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: usize,
    pub magnetization: Vec<f64>,
    /// `R_{a,b}` for `a < b`, in lexicographic pair order.
    pub overlaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimates {
    /// Per-site `<σ_x>` (mean over replicas and time) with standard errors.
    pub magnetization: Vec<Estimate>,
    /// `ψ_L` is not available from sampling.
    pub psi: Option<f64>,
    pub q1: Estimate,
    pub q2: Estimate,
    pub q11: Option<Estimate>,
    pub xi: Estimate,
    /// `<ξ_L^2>`.
    pub xi_second: Estimate,
    pub energy: Estimate,
    pub measurements: usize,
    /// Block length used for error bars, in measurements.
    pub block_length: usize,
    pub acceptance_rate: f64,
    /// Largest gap between incremental and recomputed energies.
    pub max_energy_drift: f64,
    pub trace: Option<Vec<TraceRow>>,
}

struct Replica {
    spins: Vec<i8>,
    energy: f64,
    rng: ChaCha8Rng,
}

struct Sweeper<'a> {
    real: &'a DisorderRealization,
    field: Vec<f64>,
    beta: f64,
    rule: UpdateRule,
    accepted: u64,
    attempted: u64,
}

impl Sweeper<'_> {
    fn sweep(&mut self, rep: &mut Replica) {
        let n = rep.spins.len();
        for x in 0..n {
            let local = self.real.local_field(&self.field, &rep.spins, x);
            let s = rep.spins[x];
            let delta = 2.0 * f64::from(s) * local;
            let u: f64 = rep.rng.random();
            let flip = match self.rule {
                UpdateRule::HeatBath => {
                    let p_up = 1.0 / (1.0 + (-2.0 * self.beta * local).exp());
                    let new = if u < p_up { 1 } else { -1 };
                    new != s
                }
                UpdateRule::Metropolis => delta <= 0.0 || u < (-self.beta * delta).exp(),
            };
            self.attempted += 1;
            if flip {
                rep.spins[x] = -s;
                rep.energy += delta;
                self.accepted += 1;
            }
        }
    }
}

pub fn run_mc(
    real: &DisorderRealization,
    beta: f64,
    mu: f64,
    cfg: &MCConfig,
) -> Result<MCEstimates> {
    cfg.validate()?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(
            "model.beta",
            format!("must be finite and >= 0, got {beta}"),
        ));
    }
    let n = real.site_count();
    let nf = n as f64;
    let field = real.effective_field(mu);
    let overlap_w = real.overlap_weights();
    let xi_w = real.perturbation_weights();
    let stream_index = real.provenance().map_or(0, |p| p.index);

    let mut replicas: Vec<Replica> = (0..cfg.n_replicas)
        .map(|a| {
            let mut rng = rng::stream(cfg.chain_seed, stream_index, StreamRole::Replica(a as u32));
            let spins: Vec<i8> = (0..n)
                .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            let energy = real.energy_with_field(&field, &spins);
            Replica { spins, energy, rng }
        })
        .collect();

    let mut sweeper = Sweeper {
        real,
        field: field.clone(),
        beta,
        rule: cfg.update_rule,
        accepted: 0,
        attempted: 0,
    };

    let pairs: Vec<(usize, usize)> = (0..cfg.n_replicas)
        .flat_map(|a| (a + 1..cfg.n_replicas).map(move |b| (a, b)))
        .collect();
    let measurements = cfg.sweeps / cfg.thinning;
    // Per-site sums are accumulated into bins so memory stays bounded.
    let bin = measurements.div_ceil(4096).max(1);
    let n_bins = measurements.div_ceil(bin);

    let mut s_q1 = Vec::with_capacity(measurements);
    let mut s_q2 = Vec::with_capacity(measurements);
    let mut s_q11 = Vec::with_capacity(if cfg.estimate_q11 { measurements } else { 0 });
    let mut s_xi = Vec::with_capacity(measurements);
    let mut s_xi2 = Vec::with_capacity(measurements);
    let mut s_energy = Vec::with_capacity(measurements);
    let mut site_bins = vec![0.0; n_bins * n];
    let mut trace = cfg.record_trace.then(|| Vec::with_capacity(measurements));
    let mut max_drift = 0.0f64;
    let mut overlap = vec![0.0; cfg.n_replicas * cfg.n_replicas];

    let total = cfg.burn_in + measurements * cfg.thinning;
    for sweep in 1..=total {
        for rep in replicas.iter_mut() {
            sweeper.sweep(rep);
        }
        if sweep % ENERGY_CHECK_INTERVAL == 0 || sweep == total {
            for rep in replicas.iter_mut() {
                let exact = real.energy_with_field(&field, &rep.spins);
                if !exact.is_finite() {
                    return Err(Error::NonFinite("Monte Carlo energy"));
                }
                max_drift = max_drift.max((exact - rep.energy).abs());
                rep.energy = exact;
            }
        }
        if sweep <= cfg.burn_in || (sweep - cfg.burn_in) % cfg.thinning != 0 {
            continue;
        }
        let m_idx = (sweep - cfg.burn_in) / cfg.thinning - 1;

        for &(a, b) in &pairs {
            let sa = &replicas[a].spins;
            let sb = &replicas[b].spins;
            let r: f64 = (0..n)
                .map(|x| overlap_w[x] * f64::from(sa[x] * sb[x]))
                .sum::<f64>()
                / nf;
            overlap[a * cfg.n_replicas + b] = r;
            overlap[b * cfg.n_replicas + a] = r;
        }
        let np = pairs.len() as f64;
        s_q1.push(
            pairs
                .iter()
                .map(|&(a, b)| overlap[a * cfg.n_replicas + b])
                .sum::<f64>()
                / np,
        );
        s_q2.push(
            pairs
                .iter()
                .map(|&(a, b)| overlap[a * cfg.n_replicas + b].powi(2))
                .sum::<f64>()
                / np,
        );
        if cfg.estimate_q11 {
            // R_{a,b} R_{a,c} over all a and b < c distinct from a
            let k = cfg.n_replicas;
            let mut acc = 0.0;
            let mut count = 0usize;
            for a in 0..k {
                for b in 0..k {
                    for c in b + 1..k {
                        if b != a && c != a {
                            acc += overlap[a * k + b] * overlap[a * k + c];
                            count += 1;
                        }
                    }
                }
            }
            s_q11.push(acc / count as f64);
        }

        let reps = cfg.n_replicas as f64;
        let mut xi_acc = 0.0;
        let mut xi2_acc = 0.0;
        let mut e_acc = 0.0;
        let bin_row = &mut site_bins[(m_idx / bin) * n..(m_idx / bin + 1) * n];
        for rep in &replicas {
            let xi = xi_w
                .iter()
                .zip(&rep.spins)
                .map(|(g, &s)| g * f64::from(s))
                .sum::<f64>()
                / nf;
            xi_acc += xi;
            xi2_acc += xi * xi;
            e_acc += rep.energy;
            for (acc, &s) in bin_row.iter_mut().zip(&rep.spins) {
                *acc += f64::from(s) / reps;
            }
        }
        s_xi.push(xi_acc / reps);
        s_xi2.push(xi2_acc / reps);
        s_energy.push(e_acc / reps);

        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                sweep,
                magnetization: replicas
                    .iter()
                    .map(|r| r.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / nf)
                    .collect(),
                overlaps: pairs
                    .iter()
                    .map(|&(a, b)| overlap[a * cfg.n_replicas + b])
                    .collect(),
            });
        }
    }

    let mut taus = vec![
        integrated_autocorrelation(&s_q1),
        integrated_autocorrelation(&s_q2),
        integrated_autocorrelation(&s_xi),
        integrated_autocorrelation(&s_energy),
    ];
    if cfg.estimate_q11 {
        taus.push(integrated_autocorrelation(&s_q11));
    }
    let tau_max = taus.iter().copied().fold(0.5, f64::max);
    let mut block = ((10.0 * tau_max).ceil() as usize).max(1);
    // keep at least 8 blocks
    block = block.min(measurements / 8).max(1);
    // align to the per-site bins
    block = block.div_ceil(bin) * bin;

    let estimate = |series: &[f64], tau: f64| Estimate {
        mean: series.iter().sum::<f64>() / series.len() as f64,
        std_err: blocked_std_err(series, block),
        tau,
    };

    let block_bins = block / bin;
    let full_bins = measurements / bin;
    let magnetization = (0..n)
        .map(|x| {
            let mut total = 0.0;
            for k in 0..n_bins {
                total += site_bins[k * n + x];
            }
            let mean = total / measurements as f64;
            let means: Vec<f64> = (0..full_bins / block_bins)
                .map(|blk| {
                    let sum: f64 = (blk * block_bins..(blk + 1) * block_bins)
                        .map(|k| site_bins[k * n + x])
                        .sum();
                    sum / block as f64
                })
                .collect();
            Estimate {
                mean,
                std_err: std_err_of_means(&means),
                tau: f64::NAN,
            }
        })
        .collect();

    Ok(MCEstimates {
        magnetization,
        psi: None,
        q1: estimate(&s_q1, taus[0]),
        q2: estimate(&s_q2, taus[1]),
        q11: cfg.estimate_q11.then(|| estimate(&s_q11, taus[4])),
        xi: estimate(&s_xi, taus[2]),
        xi_second: estimate(&s_xi2, integrated_autocorrelation(&s_xi2)),
        energy: estimate(&s_energy, taus[3]),
        measurements,
        block_length: block,
        acceptance_rate: sweeper.accepted as f64 / sweeper.attempted.max(1) as f64,
        max_energy_drift: max_drift,
        trace,
    })
}

/// Integrated autocorrelation time with Sokal's automatic window (c = 6).
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let m = series.len();
    if m < 4 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = centered.iter().map(|v| v * v).sum::<f64>() / m as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..m / 2 {
        let ct = centered[..m - t]
            .iter()
            .zip(&centered[t..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (m - t) as f64;
        tau += ct / c0;
        if (t as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Standard error of the mean from non-overlapping blocks of `block` points.
pub fn blocked_std_err(series: &[f64], block: usize) -> f64 {
    let block = block.max(1);
    let means: Vec<f64> = series
        .chunks_exact(block)
        .map(|c| c.iter().sum::<f64>() / block as f64)
        .collect();
    std_err_of_means(&means)
}

fn std_err_of_means(means: &[f64]) -> f64 {
    let k = means.len();
    if k < 2 {
        return f64::NAN;
    }
    let mean = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

/// Violations found in the explicit transition kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelReport {
    /// `max |π(σ)P_x(σ→σ') - π(σ')P_x(σ'→σ)|` over single-site kernels and
    /// all pairs of the random-scan kernel.
    pub detailed_balance: f64,
    /// `max |πP - π|` for the sequential sweep kernel.
    pub stationarity: f64,
    /// `max |Σ_σ' P(σ→σ') - 1|`.
    pub row_sum: f64,
}

impl KernelReport {
    pub fn max_violation(&self) -> f64 {
        self.detailed_balance
            .max(self.stationarity)
            .max(self.row_sum)
    }
}

pub fn kernel_report(
    real: &DisorderRealization,
    beta: f64,
    mu: f64,
    rule: UpdateRule,
) -> Result<KernelReport> {
    let n = real.site_count();
    if n > MAX_KERNEL_SITES {
        return Err(Error::CapExceeded {
            what: "transition kernel sites",
            value: n,
            cap: MAX_KERNEL_SITES,
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
    let mut pi: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= z);

    let field = real.effective_field(mu);
    let site_kernel = |x: usize| {
        let mut p = vec![0.0; states * states];
        for s in 0..states {
            let spins = configs[s].spins();
            let local = real.local_field(&field, spins, x);
            let t = s ^ (1 << x);
            let move_prob = match rule {
                UpdateRule::HeatBath => {
                    let p_up = 1.0 / (1.0 + (-2.0 * beta * local).exp());
                    if spins[x] == 1 {
                        1.0 - p_up
                    } else {
                        p_up
                    }
                }
                UpdateRule::Metropolis => {
                    let delta = 2.0 * f64::from(spins[x]) * local;
                    (-beta * delta).exp().min(1.0)
                }
            };
            p[s * states + t] += move_prob;
            p[s * states + s] += 1.0 - move_prob;
        }
        p
    };

    let kernels: Vec<Vec<f64>> = (0..n).map(site_kernel).collect();
    let mut detailed = 0.0f64;
    let mut row_sum = 0.0f64;
    let mut random_scan = vec![0.0; states * states];
    for k in &kernels {
        for s in 0..states {
            row_sum =
                row_sum.max((k[s * states..(s + 1) * states].iter().sum::<f64>() - 1.0).abs());
            for t in 0..states {
                detailed =
                    detailed.max((pi[s] * k[s * states + t] - pi[t] * k[t * states + s]).abs());
                random_scan[s * states + t] += k[s * states + t] / n as f64;
            }
        }
    }
    for s in 0..states {
        for t in 0..states {
            detailed = detailed.max(
                (pi[s] * random_scan[s * states + t] - pi[t] * random_scan[t * states + s]).abs(),
            );
        }
    }

    // sweep kernel P_0 P_1 ... P_{n-1}
    let mut sweep = vec![0.0; states * states];
    for s in 0..states {
        sweep[s * states + s] = 1.0;
    }
    for k in &kernels {
        let mut next = vec![0.0; states * states];
        for s in 0..states {
            for m in 0..states {
                let a = sweep[s * states + m];
                if a == 0.0 {
                    continue;
                }
                for t in 0..states {
                    next[s * states + t] += a * k[m * states + t];
                }
            }
        }
        sweep = next;
    }
    let mut stationarity = 0.0f64;
    for t in 0..states {
        let flow: f64 = (0..states).map(|s| pi[s] * sweep[s * states + t]).sum();
        stationarity = stationarity.max((flow - pi[t]).abs());
    }
    for s in 0..states {
        row_sum =
            row_sum.max((sweep[s * states..(s + 1) * states].iter().sum::<f64>() - 1.0).abs());
    }

    Ok(KernelReport {
        detailed_balance: detailed,
        stationarity,
        row_sum,
    })
}

/// Largest violation of detailed balance, stationarity or normalization of
/// the update kernels targeting `exp(-β H_μ)`.
pub fn detailed_balance_check(
    real: &DisorderRealization,
    beta: f64,
    mu: f64,
    rule: UpdateRule,
) -> Result<f64> {
    Ok(kernel_report(real, beta, mu, rule)?.max_violation())
}
