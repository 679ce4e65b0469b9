use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{NormKind, Vector};
use crate::oracle::{splitmix, Hyperplane, RobustnessSpec, TieBreakPolicy};

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "TOOL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    CfDiff,
    CfNondiff,
    RcfDiff,
    RcfNondiff,
}

impl Attack {
    pub const ALL: [Attack; 4] = [Attack::CfDiff, Attack::CfNondiff, Attack::RcfDiff, Attack::RcfNondiff];

    pub fn uses_rcf(self) -> bool {
        matches!(self, Attack::RcfDiff | Attack::RcfNondiff)
    }

    pub fn differentiable(self) -> bool {
        matches!(self, Attack::CfDiff | Attack::RcfDiff)
    }

    pub fn name(self) -> &'static str {
        match self {
            Attack::CfDiff => "cf-diff",
            Attack::CfNondiff => "cf-nondiff",
            Attack::RcfDiff => "rcf-diff",
            Attack::RcfNondiff => "rcf-nondiff",
        }
    }
}

/// Structure imposed on randomly drawn hidden weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelShape {
    #[default]
    Generic,
    /// Two coordinates share the largest magnitude.
    TiedMax,
    /// One coordinate is exactly zero.
    ZeroCoordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HiddenSpec {
    Explicit(Hyperplane),
    Seeded {
        seed: u64,
        #[serde(default)]
        shape: ModelShape,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: usize,
}

fn one() -> usize {
    1
}

fn default_agreement() -> usize {
    10_000
}

/// One experiment: a hidden model family, an oracle and an attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dimension: usize,
    /// Hidden hyperplane; drawn from `seed` when absent.
    #[serde(default)]
    pub model: Option<HiddenSpec>,
    pub norm1: NormKind,
    #[serde(default)]
    pub robustness: Option<RobustnessSpec>,
    #[serde(default)]
    pub tiebreak: TieBreakPolicy,
    pub attack: Attack,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub raster: Option<RasterSpec>,
    /// Consistent hyperplanes drawn for the sampler cross-check.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Off-band points used to score classification agreement.
    #[serde(default = "default_agreement")]
    pub agreement_samples: usize,
    /// Add perspective and touch-point rows to RCF region models.
    #[serde(default)]
    pub augment: bool,
}

impl ScenarioConfig {
    pub fn new(dimension: usize, norm1: NormKind, attack: Attack) -> Self {
        Self {
            dimension,
            model: None,
            norm1,
            robustness: None,
            tiebreak: TieBreakPolicy::Vertex,
            attack,
            trials: 1,
            seed: 0,
            raster: None,
            samples: None,
            agreement_samples: default_agreement(),
            augment: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Replaces `seed` with the value of [`SEED_ENV`] when set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| Error::Parse(format!("{SEED_ENV}={v} is not an integer")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        self.norm1.validate()?;
        self.tiebreak.validate()?;
        if let Some(spec) = &self.robustness {
            spec.validate()?;
        }
        if let Some(HiddenSpec::Explicit(h)) = &self.model {
            if h.dim() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, got: h.dim() });
            }
        }
        if self.attack.uses_rcf() && self.robustness.is_none() {
            return Err(Error::MissingRobustness);
        }
        if self.attack.differentiable() && !self.norm1.is_differentiable() {
            return Err(Error::UseNonDifferentiableAttack(format!("attack {} with norm {}", self.attack.name(), self.norm1)));
        }
        if !self.attack.differentiable() && !self.norm1.is_polyhedral() {
            return Err(Error::RequiresPolyhedralNorm(self.norm1.to_string()));
        }
        if let Some(r) = &self.raster {
            if self.dimension != 2 {
                return Err(Error::RasterDimension(self.dimension));
            }
            if r.resolution < 2 || !(r.lo[0] < r.hi[0] && r.lo[1] < r.hi[1]) {
                return Err(Error::InvalidArgument("raster needs lo < hi and resolution >= 2".into()));
            }
        }
        Ok(())
    }

    /// Seed for trial `trial`, independent across trials.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        splitmix(splitmix(self.seed) ^ trial as u64)
    }

    pub fn hidden_for_trial(&self, trial: usize) -> Result<Hyperplane> {
        match &self.model {
            Some(HiddenSpec::Explicit(h)) => Ok(h.clone()),
            Some(HiddenSpec::Seeded { seed, shape }) => random_hidden(self.dimension, splitmix(*seed ^ trial as u64), *shape),
            None => random_hidden(self.dimension, self.trial_seed(trial), ModelShape::Generic),
        }
    }

    pub fn policy_for_trial(&self, trial: usize) -> TieBreakPolicy {
        match self.tiebreak {
            TieBreakPolicy::Seeded(s) => TieBreakPolicy::Seeded(splitmix(s ^ trial as u64)),
            p => p,
        }
    }
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Vec<f64> {
    (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Hidden hyperplane with standard normal weights and offset.
pub fn random_hidden(p: usize, seed: u64, shape: ModelShape) -> Result<Hyperplane> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut a = gaussian_vector(&mut rng, p, 1.0);
        let b: f64 = rng.sample(StandardNormal);
        match shape {
            ModelShape::Generic => {}
            ModelShape::TiedMax if p >= 2 => {
                let (j, m) = a.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
                let k = (j + 1 + rng.random_range(0..p - 1)) % p;
                a[k] = if rng.random::<bool>() { m } else { -m };
            }
            ModelShape::ZeroCoordinate if p >= 2 => {
                let k = rng.random_range(0..p);
                a[k] = 0.0;
            }
            _ => {}
        }
        if a.iter().any(|v| *v != 0.0) {
            return Hyperplane::new(Vector::new(a)?, b);
        }
    }
}
