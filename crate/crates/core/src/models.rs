//! Observation models, change-time priors, and trial stream sampling.
//!
//! Subsystem 1 owns private stream X and subsystem 2 owns private stream Y;
//! both observe the shared stream Z. Stream X switches from its pre-change
//! to its post-change distribution at the change time k1, Y switches at k2,
//! and Z switches at min(k1, k2) because either fault disturbs it. Change
//! times are geometric: P(k = j) = rho (1 - rho)^(j-1) on j = 1, 2, ...

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Gaussian stream model: observations are N(mu0, sigma2) before the change
/// and N(mu1, sigma2) after it. The variance is common to both regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianShiftModel {
    mu0: f64,
    mu1: f64,
    sigma2: f64,
    sd: f64,
}

/// Information content of one stream: the divergences and the
/// log-likelihood-ratio variances that drive delay and coupling rates.
///
/// `q1` is the mean of the per-sample llr under the post-change law and `q0`
/// is its negated mean under the pre-change law (both are Kullback-Leibler
/// divergences, equal for a pure mean shift with common variance).
/// `var_llr_pre` / `var_llr_post` are the llr variances under each law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoProfile {
    pub q1: f64,
    pub q0: f64,
    pub var_llr_pre: f64,
    pub var_llr_post: f64,
}

impl GaussianShiftModel {
    /// Requires `sigma2 > 0` and distinct means.
    pub fn new(mu0: f64, mu1: f64, sigma2: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::invalid("sigma2", format!("must be finite and > 0, got {sigma2}")));
        }
        if !mu0.is_finite() || !mu1.is_finite() {
            return Err(Error::invalid("mu0/mu1", format!("must be finite, got {mu0}, {mu1}")));
        }
        if mu0 == mu1 {
            return Err(Error::invalid("mu0/mu1", "pre- and post-change means must differ".to_string()));
        }
        Ok(Self { mu0, mu1, sigma2, sd: sigma2.sqrt() })
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Log-likelihood ratio of one observation, post-change over pre-change.
    pub fn llr(&self, x: f64) -> f64 {
        let d0 = x - self.mu0;
        let d1 = x - self.mu1;
        (d0 * d0 - d1 * d1) / (2.0 * self.sigma2)
    }

    /// One observation from the pre-change law N(mu0, sigma2).
    pub fn sample_pre<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu0 + self.sd * z
    }

    /// One observation from the post-change law N(mu1, sigma2).
    pub fn sample_post<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu1 + self.sd * z
    }

    /// Divergences and llr variances for this model.
    ///
    /// For the mean shift with common variance: q1 = q0 = shift^2 / (2 sigma2)
    /// and the llr variance equals shift^2 / sigma2 under both laws.
    pub fn info_profile(&self) -> InfoProfile {
        let shift = self.mu1 - self.mu0;
        let q = shift * shift / (2.0 * self.sigma2);
        let v = shift * shift / self.sigma2;
        InfoProfile { q1: q, q0: q, var_llr_pre: v, var_llr_post: v }
    }
}

/// Geometric change-time prior on {1, 2, ...} with success rate `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricPrior {
    rho: f64,
    ln_rho: f64,
    ln_1m_rho: f64,
}

impl GeometricPrior {
    /// Requires `0 < rho < 1`.
    pub fn new(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
            return Err(Error::invalid("rho", format!("must lie strictly in (0, 1), got {rho}")));
        }
        // ln(1 - rho) through ln_1p keeps precision for tiny rho.
        Ok(Self { rho, ln_rho: rho.ln(), ln_1m_rho: (-rho).ln_1p() })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// P(k = j) for j >= 1. Errors on j = 0, the support starts at 1.
    pub fn pmf(&self, j: u64) -> Result<f64> {
        Ok(self.log_pmf(j)?.exp())
    }

    /// ln P(k = j).
    pub fn log_pmf(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::invalid("j", "geometric support starts at 1".to_string()));
        }
        Ok(self.ln_rho + (j - 1) as f64 * self.ln_1m_rho)
    }

    /// Tail mass P(k > n) = (1 - rho)^n.
    pub fn tail(&self, n: u64) -> f64 {
        self.log_tail(n).exp()
    }

    /// ln P(k > n) = n ln(1 - rho), exact for any n.
    pub fn log_tail(&self, n: u64) -> f64 {
        n as f64 * self.ln_1m_rho
    }

    /// Exponential tail rate d = -ln(1 - rho).
    pub fn tail_rate(&self) -> f64 {
        -self.ln_1m_rho
    }

    /// Smallest n with tail mass P(k > n) <= eps.
    pub fn tail_quantile(&self, eps: f64) -> u64 {
        debug_assert!(eps > 0.0 && eps < 1.0);
        (eps.ln() / self.ln_1m_rho).ceil().max(0.0) as u64
    }

    /// Draw a change time by inverse CDF; P(k > m) matches `tail(m)` exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        // 1 - u lies in (0, 1], so the log is finite and nonpositive.
        let t = (1.0 - u).ln() / self.ln_1m_rho;
        t.floor() as u64 + 1
    }
}

/// Full experiment description: the three stream models, the two change
/// priors, and the observation window length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamScenario {
    pub model_x: GaussianShiftModel,
    pub model_y: GaussianShiftModel,
    pub model_z: GaussianShiftModel,
    pub prior1: GeometricPrior,
    pub prior2: GeometricPrior,
    pub horizon: usize,
}

impl StreamScenario {
    /// Requires `horizon >= 1`.
    pub fn new(
        model_x: GaussianShiftModel,
        model_y: GaussianShiftModel,
        model_z: GaussianShiftModel,
        prior1: GeometricPrior,
        prior2: GeometricPrior,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1".to_string()));
        }
        Ok(Self { model_x, model_y, model_z, prior1, prior2, horizon })
    }
}

/// One sampled trial: the two change times (possibly beyond the horizon)
/// and the three observation streams over steps 1..=horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrial {
    pub k1: u64,
    pub k2: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Draw change times and streams for one trial.
///
/// Draw order is fixed for reproducibility: k1, then k2, then per step the
/// triple (x, y, z). X is post-change from step k1 on, Y from k2 on, and Z
/// from min(k1, k2) on.
pub fn sample_scenario<R: Rng + ?Sized>(scenario: &StreamScenario, rng: &mut R) -> SampledTrial {
    sample_scenario_conditioned(scenario, rng, false, false)
}

/// Like [`sample_scenario`], but either change time can be pinned beyond the
/// horizon (to `horizon + 1`, without consuming a draw) to simulate the
/// no-change regime for marginal false-alarm checks.
pub fn sample_scenario_conditioned<R: Rng + ?Sized>(
    scenario: &StreamScenario,
    rng: &mut R,
    no_change_1: bool,
    no_change_2: bool,
) -> SampledTrial {
    let h = scenario.horizon;
    let k1 = if no_change_1 { h as u64 + 1 } else { scenario.prior1.sample(rng) };
    let k2 = if no_change_2 { h as u64 + 1 } else { scenario.prior2.sample(rng) };
    let kz = k1.min(k2);

    let mut x = Vec::with_capacity(h);
    let mut y = Vec::with_capacity(h);
    let mut z = Vec::with_capacity(h);
    for i in 1..=h as u64 {
        x.push(if i >= k1 {
            scenario.model_x.sample_post(rng)
        } else {
            scenario.model_x.sample_pre(rng)
        });
        y.push(if i >= k2 {
            scenario.model_y.sample_post(rng)
        } else {
            scenario.model_y.sample_pre(rng)
        });
        z.push(if i >= kz {
            scenario.model_z.sample_post(rng)
        } else {
            scenario.model_z.sample_pre(rng)
        });
    }
    SampledTrial { k1, k2, x, y, z }
}
