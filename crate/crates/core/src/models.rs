//! Model families, quenched disorder and the (perturbed) Hamiltonian.
//!
//! A realization stores the per-site fields `h_x(r)`, the per-bond couplings
//! `J_X(r)`, the site mask (site dilution only) and the Gaussian perturbation
//! field `g_x`. The perturbed energy is
//!
//! ```text
//! H_μ(σ) = -Σ_X J_X σ_X - Σ_x h_x σ_x - μ Σ_x g_x m_x σ_x
//! ```
//!
//! with `m_x = r_x` for site dilution and `m_x = 1` otherwise.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::rng::{self, StreamRole};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Random field Ising model: `J_X = 1`, `h_x = b r_x + h`.
    #[serde(rename = "rfi")]
    RandomField,
    /// Bond dilution: `J_X = J r_X`, `r_X ~ Bernoulli(p)`, `h_x = h`.
    #[serde(rename = "bdi")]
    BondDiluted,
    /// Site dilution: `J_{xy} = J r_x r_y`, `h_x = h r_x`, `r_x ~ Bernoulli(p)`.
    #[serde(rename = "sdi")]
    SiteDiluted,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::RandomField,
        Family::BondDiluted,
        Family::SiteDiluted,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::RandomField => "rfi",
            Family::BondDiluted => "bdi",
            Family::SiteDiluted => "sdi",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rfi" | "random-field" => Ok(Family::RandomField),
            "bdi" | "bond-diluted" => Ok(Family::BondDiluted),
            "sdi" | "site-diluted" => Ok(Family::SiteDiluted),
            other => Err(Error::invalid(
                "model.family",
                format!("unknown family `{other}` (expected rfi, bdi or sdi)"),
            )),
        }
    }
}

/// Distribution of the random-field variables `r_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldDist {
    Gaussian,
    /// Symmetric `±1`.
    Bernoulli,
    /// Finite discrete law; must have zero mean.
    Discrete {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl FieldDist {
    fn validate(&self) -> Result<()> {
        if let FieldDist::Discrete { values, weights } = self {
            if values.is_empty() || values.len() != weights.len() {
                return Err(Error::invalid(
                    "model.field_dist",
                    "discrete law needs equally many values and weights",
                ));
            }
            if values.iter().chain(weights).any(|v| !v.is_finite())
                || weights.iter().any(|&w| w < 0.0)
            {
                return Err(Error::invalid(
                    "model.field_dist",
                    "values must be finite and weights nonnegative",
                ));
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::invalid("model.field_dist", "weights sum to zero"));
            }
            let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if mean.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::invalid(
                    "model.field_dist",
                    format!("discrete law must have zero mean, got {mean}"),
                ));
            }
        }
        Ok(())
    }

    fn sampler(&self) -> FieldSampler {
        match self {
            FieldDist::Gaussian => FieldSampler::Gaussian,
            FieldDist::Bernoulli => FieldSampler::Sign,
            FieldDist::Discrete { values, weights } => FieldSampler::Discrete(
                values.clone(),
                WeightedIndex::new(weights).expect("validated weights"),
            ),
        }
    }
}

impl fmt::Display for FieldDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldDist::Gaussian => f.write_str("gaussian"),
            FieldDist::Bernoulli => f.write_str("bernoulli"),
            FieldDist::Discrete { values, weights } => {
                let pairs: Vec<String> = values
                    .iter()
                    .zip(weights)
                    .map(|(v, w)| format!("{v:?}:{w:?}"))
                    .collect();
                write!(f, "discrete:{}", pairs.join(","))
            }
        }
    }
}

impl FromStr for FieldDist {
    type Err = Error;

    /// `gaussian`, `bernoulli`, or `discrete:v1:w1,v2:w2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => return Ok(FieldDist::Gaussian),
            "bernoulli" | "pm1" => return Ok(FieldDist::Bernoulli),
            _ => {}
        }
        let body = s.strip_prefix("discrete:").ok_or_else(|| {
            Error::invalid("model.field_dist", format!("unknown distribution `{s}`"))
        })?;
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for pair in body.split(',') {
            let (v, w) = pair.split_once(':').ok_or_else(|| {
                Error::invalid(
                    "model.field_dist",
                    format!("expected value:weight, got `{pair}`"),
                )
            })?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid("model.field_dist", format!("not a number: `{t}`")))
            };
            values.push(parse(v)?);
            weights.push(parse(w)?);
        }
        let dist = FieldDist::Discrete { values, weights };
        dist.validate()?;
        Ok(dist)
    }
}

enum FieldSampler {
    Gaussian,
    Sign,
    Discrete(Vec<f64>, WeightedIndex<f64>),
}

impl FieldSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            FieldSampler::Gaussian => rng.sample(StandardNormal),
            FieldSampler::Sign => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            FieldSampler::Discrete(values, index) => values[index.sample(rng)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub beta: f64,
    /// Uniform field.
    pub h: f64,
    /// Random-field amplitude (random field model only).
    pub b: f64,
    pub field_dist: FieldDist,
    /// Ferromagnetic coupling for the diluted models; the random field model uses 1.
    pub coupling: f64,
    /// Retention probability for the diluted models.
    pub p: f64,
    /// Strength of the Gaussian perturbation.
    pub mu: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            family: Family::RandomField,
            beta: 0.8,
            h: 0.3,
            b: 1.0,
            field_dist: FieldDist::Gaussian,
            coupling: 1.0,
            p: 0.5,
            mu: 0.0,
        }
    }
}

impl ModelSpec {
    pub fn random_field(beta: f64, h: f64, b: f64) -> Self {
        ModelSpec {
            family: Family::RandomField,
            beta,
            h,
            b,
            ..ModelSpec::default()
        }
    }

    pub fn bond_diluted(beta: f64, h: f64, coupling: f64, p: f64) -> Self {
        ModelSpec {
            family: Family::BondDiluted,
            beta,
            h,
            b: 0.0,
            coupling,
            p,
            ..ModelSpec::default()
        }
    }

    pub fn site_diluted(beta: f64, h: f64, coupling: f64, p: f64) -> Self {
        ModelSpec {
            family: Family::SiteDiluted,
            ..ModelSpec::bond_diluted(beta, h, coupling, p)
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite, got {v}")))
            }
        };
        finite("model.beta", self.beta)?;
        finite("model.h", self.h)?;
        finite("model.b", self.b)?;
        finite("model.J", self.coupling)?;
        finite("model.mu", self.mu)?;
        if self.beta < 0.0 {
            return Err(Error::invalid("model.beta", "must be nonnegative"));
        }
        if self.coupling < 0.0 {
            return Err(Error::invalid(
                "model.J",
                "couplings must be ferromagnetic (J >= 0)",
            ));
        }
        if self.family != Family::RandomField && !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(
                "model.p",
                format!("must lie in (0, 1], got {}", self.p),
            ));
        }
        self.field_dist.validate()
    }

    /// Bernoulli variance `v = p (1 - p)` of the dilution variables.
    pub fn dilution_variance(&self) -> f64 {
        self.p * (1.0 - self.p)
    }

    /// True when the realization does not depend on the sampled `r`.
    pub fn is_deterministic(&self) -> bool {
        match self.family {
            Family::RandomField => self.b == 0.0,
            Family::BondDiluted | Family::SiteDiluted => self.p >= 1.0,
        }
    }
}

/// Raw i.i.d. draws from which a realization is assembled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Draws {
    /// `r_x` per site (random field model).
    pub fields: Vec<f64>,
    /// `r_X` per bond (bond dilution).
    pub bonds: Vec<bool>,
    /// `r_x` per site (site dilution).
    pub mask: Vec<bool>,
    /// `g_x` per site.
    pub gauss: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
    pub index: u64,
}

#[derive(Clone, Debug)]
pub struct DisorderRealization {
    geom: Arc<LatticeGeometry>,
    family: Family,
    site_fields: Vec<f64>,
    bond_couplings: Vec<f64>,
    site_mask: Vec<bool>,
    gauss: Vec<f64>,
    provenance: Option<SeedProvenance>,
}

/// Draws realization `index` of the stream keyed by `master_seed`.
pub fn sample_disorder(
    spec: &ModelSpec,
    geom: &Arc<LatticeGeometry>,
    master_seed: u64,
    index: u64,
) -> Result<DisorderRealization> {
    spec.validate()?;
    let n = geom.site_count();
    let mut draws = Draws::default();
    match spec.family {
        Family::RandomField => {
            let sampler = spec.field_dist.sampler();
            let mut rng = rng::stream(master_seed, index, StreamRole::Fields);
            draws.fields = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        }
        Family::BondDiluted => {
            let mut rng = rng::stream(master_seed, index, StreamRole::Bonds);
            draws.bonds = (0..geom.bond_count())
                .map(|_| rng.random_bool(spec.p))
                .collect();
        }
        Family::SiteDiluted => {
            let mut rng = rng::stream(master_seed, index, StreamRole::Mask);
            draws.mask = (0..n).map(|_| rng.random_bool(spec.p)).collect();
        }
    }
    let mut rng = rng::stream(master_seed, index, StreamRole::Gauss);
    draws.gauss = (0..n).map(|_| rng.sample(StandardNormal)).collect();

    let mut real = DisorderRealization::from_draws(spec, geom, draws)?;
    real.provenance = Some(SeedProvenance { master_seed, index });
    Ok(real)
}

impl DisorderRealization {
    /// Assembles `J_X(r)` and `h_x(r)` for the family in `spec` from raw draws.
    pub fn from_draws(spec: &ModelSpec, geom: &Arc<LatticeGeometry>, draws: Draws) -> Result<Self> {
        spec.validate()?;
        let n = geom.site_count();
        let nb = geom.bond_count();
        check_len(n, draws.gauss.len())?;
        let (site_fields, bond_couplings, site_mask) = match spec.family {
            Family::RandomField => {
                check_len(n, draws.fields.len())?;
                let fields = draws.fields.iter().map(|r| spec.b * r + spec.h).collect();
                (fields, vec![1.0; nb], vec![true; n])
            }
            Family::BondDiluted => {
                check_len(nb, draws.bonds.len())?;
                let couplings = draws
                    .bonds
                    .iter()
                    .map(|&kept| if kept { spec.coupling } else { 0.0 })
                    .collect();
                (vec![spec.h; n], couplings, vec![true; n])
            }
            Family::SiteDiluted => {
                check_len(n, draws.mask.len())?;
                let mask = draws.mask;
                let couplings = geom
                    .bonds()
                    .iter()
                    .map(|&(x, y)| {
                        if mask[x] && mask[y] {
                            spec.coupling
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let fields = mask.iter().map(|&m| if m { spec.h } else { 0.0 }).collect();
                (fields, couplings, mask)
            }
        };
        Self::from_parts(
            Arc::clone(geom),
            spec.family,
            site_fields,
            bond_couplings,
            site_mask,
            draws.gauss,
        )
    }

    /// Builds a realization from explicit arrays. Couplings must be nonnegative.
    pub fn from_parts(
        geom: Arc<LatticeGeometry>,
        family: Family,
        site_fields: Vec<f64>,
        bond_couplings: Vec<f64>,
        site_mask: Vec<bool>,
        gauss: Vec<f64>,
    ) -> Result<Self> {
        let n = geom.site_count();
        check_len(n, site_fields.len())?;
        check_len(geom.bond_count(), bond_couplings.len())?;
        check_len(n, site_mask.len())?;
        check_len(n, gauss.len())?;
        if bond_couplings
            .iter()
            .any(|&j| !(j >= 0.0) || !j.is_finite())
        {
            return Err(Error::invalid(
                "bond_couplings",
                "couplings must be finite and nonnegative",
            ));
        }
        if site_fields.iter().chain(&gauss).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("realization fields"));
        }
        if family != Family::SiteDiluted && site_mask.iter().any(|&m| !m) {
            return Err(Error::invalid(
                "site_mask",
                "only site dilution may mask sites",
            ));
        }
        Ok(DisorderRealization {
            geom,
            family,
            site_fields,
            bond_couplings,
            site_mask,
            gauss,
            provenance: None,
        })
    }

    /// Replaces the perturbation field `g`.
    pub fn with_gauss(mut self, gauss: Vec<f64>) -> Result<Self> {
        check_len(self.site_count(), gauss.len())?;
        if gauss.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("perturbation field"));
        }
        self.gauss = gauss;
        Ok(self)
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geom
    }

    pub fn geometry_arc(&self) -> &Arc<LatticeGeometry> {
        &self.geom
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn site_count(&self) -> usize {
        self.geom.site_count()
    }

    pub fn site_fields(&self) -> &[f64] {
        &self.site_fields
    }

    pub fn bond_couplings(&self) -> &[f64] {
        &self.bond_couplings
    }

    pub fn site_mask(&self) -> &[bool] {
        &self.site_mask
    }

    pub fn gauss(&self) -> &[f64] {
        &self.gauss
    }

    pub fn provenance(&self) -> Option<SeedProvenance> {
        self.provenance
    }

    /// Coefficients of `σ_x` in `|Λ| ξ_L`: `g_x`, or `g_x r_x` under site dilution.
    pub fn perturbation_weights(&self) -> Vec<f64> {
        self.gauss
            .iter()
            .zip(&self.site_mask)
            .map(|(&g, &m)| if m { g } else { 0.0 })
            .collect()
    }

    /// Per-site overlap weights: `r_x^2` under site dilution, 1 otherwise.
    pub fn overlap_weights(&self) -> Vec<f64> {
        self.site_mask
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect()
    }

    /// `h_x + μ g_x` (with `g_x r_x` under site dilution).
    pub fn effective_field(&self, mu: f64) -> Vec<f64> {
        self.site_fields
            .iter()
            .zip(self.perturbation_weights())
            .map(|(&h, g)| h + mu * g)
            .collect()
    }

    /// `Σ_{y~x} J_xy σ_y + field[x]`.
    #[inline]
    pub fn local_field(&self, field: &[f64], spins: &[i8], x: usize) -> f64 {
        let mut acc = field[x];
        for &(y, b) in self.geom.neighbors(x) {
            acc += self.bond_couplings[b] * f64::from(spins[y]);
        }
        acc
    }

    /// Energy for an explicit effective field (see [`effective_field`](Self::effective_field)).
    pub fn energy_with_field(&self, field: &[f64], spins: &[i8]) -> f64 {
        let bond: f64 = self
            .geom
            .bonds()
            .iter()
            .zip(&self.bond_couplings)
            .map(|(&(x, y), &j)| j * f64::from(spins[x] * spins[y]))
            .sum();
        let site: f64 = field
            .iter()
            .zip(spins)
            .map(|(&h, &s)| h * f64::from(s))
            .sum();
        -bond - site
    }

    pub fn to_record(&self) -> RealizationRecord {
        RealizationRecord {
            family: self.family,
            d: self.geom.dim(),
            l: self.geom.side(),
            seed: self.provenance,
            site_fields: self.site_fields.clone(),
            bond_couplings: self.bond_couplings.clone(),
            site_mask: self.site_mask.iter().map(|&m| u8::from(m)).collect(),
            gauss: self.gauss.clone(),
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

/// One realization as a JSON-lines record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub family: Family,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub seed: Option<SeedProvenance>,
    pub site_fields: Vec<f64>,
    pub bond_couplings: Vec<f64>,
    pub site_mask: Vec<u8>,
    pub gauss: Vec<f64>,
}

impl RealizationRecord {
    pub fn into_realization(self) -> Result<DisorderRealization> {
        let geom = Arc::new(LatticeGeometry::new(self.d, self.l)?);
        let mut real = DisorderRealization::from_parts(
            geom,
            self.family,
            self.site_fields,
            self.bond_couplings,
            self.site_mask.into_iter().map(|m| m != 0).collect(),
            self.gauss,
        )?;
        real.provenance = self.seed;
        Ok(real)
    }
}

/// A point of `Σ_L = {-1, +1}^Λ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("sigma", "spins must be +1 or -1"));
        }
        Ok(SpinConfiguration(spins))
    }

    pub fn all_up(n: usize) -> Self {
        SpinConfiguration(vec![1; n])
    }

    /// Bit `x` of `state` set means `σ_x = +1`.
    pub fn from_bits(state: u64, n: usize) -> Self {
        SpinConfiguration(
            (0..n)
                .map(|x| if state >> x & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        SpinConfiguration(self.0.iter().map(|s| -s).collect())
    }
}

/// `H(r, σ) - μ |Λ| ξ_L(g, σ)`.
pub fn hamiltonian(real: &DisorderRealization, sigma: &SpinConfiguration, mu: f64) -> Result<f64> {
    check_len(real.site_count(), sigma.len())?;
    Ok(real.energy_with_field(&real.effective_field(mu), sigma.spins()))
}

/// `ξ_L = |Λ|^{-1} Σ_x g_x σ_x` (`g_x r_x` under site dilution).
pub fn xi(real: &DisorderRealization, sigma: &SpinConfiguration) -> Result<f64> {
    check_len(real.site_count(), sigma.len())?;
    let sum: f64 = real
        .perturbation_weights()
        .iter()
        .zip(sigma.spins())
        .map(|(&g, &s)| g * f64::from(s))
        .sum();
    Ok(sum / real.site_count() as f64)
}
