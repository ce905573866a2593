//! Hypothesis spaces, the observation channel `q(z | a, s, u)` and the prior.
//!
//! The channel is stored densely as a row-major tensor indexed
//! `[action][secret][useful][observation]`, so every `(a, s, u)` row is a
//! contiguous slice that sums to one.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for row and prior normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Version written into, and required from, model files.
pub const MODEL_FILE_VERSION: u32 = 1;

/// Sizes of the secret, useful, action and observation alphabets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_secret: usize,
    pub n_useful: usize,
    pub n_actions: usize,
    pub n_obs: usize,
}

impl ModelSpec {
    pub fn new(n_secret: usize, n_useful: usize, n_actions: usize, n_obs: usize) -> Result<Self> {
        let spec = Self {
            n_secret,
            n_useful,
            n_actions,
            n_obs,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_secret == 0 || self.n_useful == 0 || self.n_actions == 0 {
            return Err(Error::config(format!(
                "hypothesis and action counts must be >= 1, got N={}, M={}, |A|={}",
                self.n_secret, self.n_useful, self.n_actions
            )));
        }
        if self.n_obs < 2 {
            return Err(Error::config(format!(
                "observation alphabet needs at least 2 symbols, got {}",
                self.n_obs
            )));
        }
        Ok(())
    }

    /// Number of joint hypotheses `N * M`.
    pub fn n_hypotheses(&self) -> usize {
        self.n_secret * self.n_useful
    }

    fn q_len(&self) -> usize {
        self.n_actions * self.n_hypotheses() * self.n_obs
    }
}

/// One broken invariant of an [`ObservationModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Negative {
        action: usize,
        secret: usize,
        useful: usize,
        observation: usize,
        value: f64,
    },
    NonFinite {
        action: usize,
        secret: usize,
        useful: usize,
        observation: usize,
    },
    RowSum {
        action: usize,
        secret: usize,
        useful: usize,
        sum: f64,
    },
    PriorNegative {
        secret: usize,
        useful: usize,
        value: f64,
    },
    PriorSum {
        sum: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Negative {
                action,
                secret,
                useful,
                observation,
                value,
            } => write!(
                f,
                "negative probability {value} at q[a={action}][s={secret}][u={useful}][z={observation}]"
            ),
            Violation::NonFinite {
                action,
                secret,
                useful,
                observation,
            } => write!(
                f,
                "non-finite probability at q[a={action}][s={secret}][u={useful}][z={observation}]"
            ),
            Violation::RowSum {
                action,
                secret,
                useful,
                sum,
            } => write!(
                f,
                "normalization: row q[a={action}][s={secret}][u={useful}] sums to {sum}"
            ),
            Violation::PriorNegative {
                secret,
                useful,
                value,
            } => write!(f, "negative prior {value} at (s={secret}, u={useful})"),
            Violation::PriorSum { sum } => write!(f, "normalization: prior sums to {sum}"),
        }
    }
}

/// The observation channel together with the prior over `(secret, useful)`.
///
/// Immutable after construction; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    spec: ModelSpec,
    q: Vec<f64>,
    prior: Vec<f64>,
    grid: Option<Vec<f64>>,
    seed: Option<u64>,
}

impl ObservationModel {
    /// Builds a model from a flat `[a][s][u][z]` tensor and a flat `[s][u]` prior.
    pub fn new(spec: ModelSpec, q: Vec<f64>, prior: Vec<f64>) -> Result<Self> {
        spec.check()?;
        if q.len() != spec.q_len() {
            return Err(Error::ShapeMismatch {
                expected: spec.q_len(),
                actual: q.len(),
            });
        }
        if prior.len() != spec.n_hypotheses() {
            return Err(Error::ShapeMismatch {
                expected: spec.n_hypotheses(),
                actual: prior.len(),
            });
        }
        let model = Self {
            spec,
            q,
            prior,
            grid: None,
            seed: None,
        };
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// Builds a model by evaluating `f(a, s, u, z)` for every entry, with a uniform prior.
    pub fn from_fn(spec: ModelSpec, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        spec.check()?;
        let mut q = Vec::with_capacity(spec.q_len());
        for a in 0..spec.n_actions {
            for s in 0..spec.n_secret {
                for u in 0..spec.n_useful {
                    for z in 0..spec.n_obs {
                        q.push(f(a, s, u, z));
                    }
                }
            }
        }
        let prior = vec![1.0 / spec.n_hypotheses() as f64; spec.n_hypotheses()];
        Self::new(spec, q, prior)
    }

    pub fn with_prior(self, prior: Vec<f64>) -> Result<Self> {
        let Self { spec, q, grid, seed, .. } = self;
        let mut model = Self::new(spec, q, prior)?;
        model.grid = grid;
        model.seed = seed;
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// `q(z | a, s, u)`.
    #[inline]
    pub fn q(&self, action: usize, secret: usize, useful: usize, observation: usize) -> f64 {
        self.q[self.row_offset(action, secret, useful) + observation]
    }

    /// The distribution of `z` for one `(a, s, u)` triple.
    #[inline]
    pub fn row(&self, action: usize, secret: usize, useful: usize) -> &[f64] {
        let start = self.row_offset(action, secret, useful);
        &self.q[start..start + self.spec.n_obs]
    }

    /// Flat `[a][s][u][z]` tensor.
    pub fn q_flat(&self) -> &[f64] {
        &self.q
    }

    /// Flat `[s][u]` prior table.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Observation grid used by the Gaussian generator, if any.
    pub fn grid(&self) -> Option<&[f64]> {
        self.grid.as_deref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    fn row_offset(&self, action: usize, secret: usize, useful: usize) -> usize {
        let s = &self.spec;
        ((action * s.n_secret + secret) * s.n_useful + useful) * s.n_obs
    }

    /// Lists every violated invariant; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let spec = self.spec;
        let mut violations = Vec::new();
        for a in 0..spec.n_actions {
            for s in 0..spec.n_secret {
                for u in 0..spec.n_useful {
                    let row = self.row(a, s, u);
                    let mut sum = 0.0;
                    for (z, &p) in row.iter().enumerate() {
                        if !p.is_finite() {
                            violations.push(Violation::NonFinite {
                                action: a,
                                secret: s,
                                useful: u,
                                observation: z,
                            });
                        } else if p < 0.0 {
                            violations.push(Violation::Negative {
                                action: a,
                                secret: s,
                                useful: u,
                                observation: z,
                                value: p,
                            });
                        }
                        sum += p;
                    }
                    if !((sum - 1.0).abs() <= NORMALIZATION_TOL) {
                        violations.push(Violation::RowSum {
                            action: a,
                            secret: s,
                            useful: u,
                            sum,
                        });
                    }
                }
            }
        }
        let mut sum = 0.0;
        for (i, &p) in self.prior.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                violations.push(Violation::PriorNegative {
                    secret: i / spec.n_useful,
                    useful: i % spec.n_useful,
                    value: p,
                });
            }
            sum += p;
        }
        if !((sum - 1.0).abs() <= NORMALIZATION_TOL) {
            violations.push(Violation::PriorSum { sum });
        }
        violations
    }

    /// Writes the model file. Floats are printed in shortest round-trip form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save_with_provenance(path, None)
    }

    /// Like [`save`](Self::save), embedding an arbitrary provenance record.
    pub fn save_with_provenance(&self, path: impl AsRef<Path>, provenance: Option<serde_json::Value>) -> Result<()> {
        let file = ModelFile::from_model(self, provenance);
        let mut out = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &file).map_err(Error::from_json)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(Error::from_json)?;
        file.into_model()
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelFile::from_model(self, None)).map_err(Error::from_json)
    }
}

/// On-disk layout of a model file.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    spec: ModelSpec,
    #[serde(default)]
    grid: Option<Vec<f64>>,
    #[serde(default)]
    seed: Option<u64>,
    q: Vec<Vec<Vec<Vec<f64>>>>,
    prior: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

impl ModelFile {
    fn from_model(model: &ObservationModel, provenance: Option<serde_json::Value>) -> Self {
        let spec = model.spec;
        let q = (0..spec.n_actions)
            .map(|a| {
                (0..spec.n_secret)
                    .map(|s| (0..spec.n_useful).map(|u| model.row(a, s, u).to_vec()).collect())
                    .collect()
            })
            .collect();
        let prior = model.prior.chunks(spec.n_useful).map(<[f64]>::to_vec).collect();
        Self {
            version: MODEL_FILE_VERSION,
            spec,
            grid: model.grid.clone(),
            seed: model.seed,
            q,
            prior,
            provenance,
        }
    }

    fn into_model(self) -> Result<ObservationModel> {
        if self.version != MODEL_FILE_VERSION {
            return Err(Error::VersionMismatch {
                found: self.version,
                expected: MODEL_FILE_VERSION,
            });
        }
        let spec = self.spec;
        spec.check()?;
        let shape_err = |what: &str, expected: usize, actual: usize| {
            Error::config(format!("model file: {what} has length {actual}, expected {expected}"))
        };
        if self.q.len() != spec.n_actions {
            return Err(shape_err("q", spec.n_actions, self.q.len()));
        }
        let mut flat = Vec::with_capacity(spec.q_len());
        for (a, per_action) in self.q.into_iter().enumerate() {
            if per_action.len() != spec.n_secret {
                return Err(shape_err(&format!("q[{a}]"), spec.n_secret, per_action.len()));
            }
            for (s, per_secret) in per_action.into_iter().enumerate() {
                if per_secret.len() != spec.n_useful {
                    return Err(shape_err(&format!("q[{a}][{s}]"), spec.n_useful, per_secret.len()));
                }
                for (u, row) in per_secret.into_iter().enumerate() {
                    if row.len() != spec.n_obs {
                        return Err(shape_err(&format!("q[{a}][{s}][{u}]"), spec.n_obs, row.len()));
                    }
                    flat.extend(row);
                }
            }
        }
        if self.prior.len() != spec.n_secret {
            return Err(shape_err("prior", spec.n_secret, self.prior.len()));
        }
        let mut prior = Vec::with_capacity(spec.n_hypotheses());
        for (s, row) in self.prior.into_iter().enumerate() {
            if row.len() != spec.n_useful {
                return Err(shape_err(&format!("prior[{s}]"), spec.n_useful, row.len()));
            }
            prior.extend(row);
        }
        if let Some(grid) = &self.grid {
            if grid.len() != spec.n_obs {
                return Err(shape_err("grid", spec.n_obs, grid.len()));
            }
        }
        let mut model = ObservationModel::new(spec, flat, prior)?;
        model.grid = self.grid;
        model.seed = self.seed;
        Ok(model)
    }
}

/// Recipe for the Gaussian-derived channel: each `(a, s, u)` row is a
/// discretized normal density on an evenly spaced observation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub spec: ModelSpec,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub grid_low: f64,
    pub grid_high: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub const DEFAULT_SIGMA_LOW: f64 = 0.5;
    pub const DEFAULT_SIGMA_HIGH: f64 = 1.5;
    pub const DEFAULT_GRID_LOW: f64 = -3.0;
    pub const DEFAULT_GRID_HIGH: f64 = 6.0;

    /// Default σ range and grid for the given sizes.
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        Self {
            spec,
            sigma_low: Self::DEFAULT_SIGMA_LOW,
            sigma_high: Self::DEFAULT_SIGMA_HIGH,
            grid_low: Self::DEFAULT_GRID_LOW,
            grid_high: Self::DEFAULT_GRID_HIGH,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.spec.check()?;
        if !(self.sigma_low > 0.0 && self.sigma_low <= self.sigma_high && self.sigma_high.is_finite()) {
            return Err(Error::config(format!(
                "sigma bounds must satisfy 0 < low <= high, got [{}, {}]",
                self.sigma_low, self.sigma_high
            )));
        }
        if !(self.grid_low < self.grid_high) || !self.grid_low.is_finite() || !self.grid_high.is_finite() {
            return Err(Error::config(format!(
                "grid bounds must satisfy low < high, got [{}, {}]",
                self.grid_low, self.grid_high
            )));
        }
        Ok(())
    }

    /// Evenly spaced observation grid, endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.spec.n_obs;
        let step = (self.grid_high - self.grid_low) / (n - 1) as f64;
        (0..n).map(|i| self.grid_low + step * i as f64).collect()
    }
}

/// A hand-written 2×2 instance with two actions and three observations,
/// small enough for exhaustive enumeration. Action 0 mostly separates the
/// secret, action 1 mostly separates the useful hypothesis.
pub fn tiny_model() -> ObservationModel {
    const ROWS: [[[f64; 3]; 4]; 2] = [
        [[0.6, 0.3, 0.1], [0.5, 0.3, 0.2], [0.2, 0.3, 0.5], [0.1, 0.4, 0.5]],
        [[0.3, 0.4, 0.3], [0.1, 0.2, 0.7], [0.3, 0.4, 0.3], [0.6, 0.2, 0.2]],
    ];
    let spec = ModelSpec {
        n_secret: 2,
        n_useful: 2,
        n_actions: 2,
        n_obs: 3,
    };
    ObservationModel::from_fn(spec, |a, s, u, z| ROWS[a][s * 2 + u][z]).expect("rows sum to one")
}

/// The secret that action `a` singles out: `s* = N - 1 - a`.
pub fn distinguished_secret(spec: &ModelSpec, action: usize) -> usize {
    spec.n_secret - 1 - action
}

/// Generates the Gaussian-derived model.
///
/// For action `a`, rows with `s != s*` are centred at 0 and rows with
/// `s == s*` at `u + 1`. Each row gets its own σ, drawn uniformly in
/// `(a, s, u)` lexicographic order. The prior is uniform.
pub fn generate_gaussian_model(gen: &GeneratorSpec) -> Result<ObservationModel> {
    gen.check()?;
    let spec = gen.spec;
    if spec.n_actions > spec.n_secret {
        return Err(Error::UnsupportedRecipe(format!(
            "the distinguished-secret recipe needs |A| <= N, got |A|={} and N={}",
            spec.n_actions, spec.n_secret
        )));
    }
    let grid = gen.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let mut q = Vec::with_capacity(spec.q_len());
    for a in 0..spec.n_actions {
        let special = distinguished_secret(&spec, a);
        for s in 0..spec.n_secret {
            for u in 0..spec.n_useful {
                let sigma = rng.random_range(gen.sigma_low..=gen.sigma_high);
                let mean = if s == special { (u + 1) as f64 } else { 0.0 };
                let start = q.len();
                q.extend(grid.iter().map(|&x| gaussian_density(x, mean, sigma)));
                let row = &mut q[start..];
                let total: f64 = row.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Numeric(format!(
                        "Gaussian row (a={a}, s={s}, u={u}) underflows on the grid"
                    )));
                }
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
    }
    let prior = vec![1.0 / spec.n_hypotheses() as f64; spec.n_hypotheses()];
    let mut model = ObservationModel::new(spec, q, prior)?;
    model.grid = Some(grid);
    model.seed = Some(gen.seed);
    Ok(model)
}

fn gaussian_density(x: f64, mean: f64, sigma: f64) -> f64 {
    let d = (x - mean) / sigma;
    (-0.5 * d * d).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}
