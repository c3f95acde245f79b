use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipapprox::LipApproxParams;

/// Constants of the construction. `beta` is derived from `gamma` and `delta`
/// and `n0` from `m`, `n`; both are recomputed by [`Params::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    pub m0: f64,
    pub n0: u32,
    pub delta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub vartheta: f64,
    pub beta: f64,
    pub k_max: u32,
    /// Chart samples per axis across 8·M₀·ℓ(L), so the spacing is 8M₀ℓ/chart_samples;
    /// the chart spans 2·chart_samples+1 nodes per axis.
    pub chart_samples: usize,
    /// Samples per axis of g_L across the doubled cube L′.
    pub g_samples: usize,
    /// Largest excess admitted by the Lipschitz approximation.
    pub eps_bar: f64,
    /// Target spacing of the nodes of u on which ζ_k is evaluated; the base
    /// grid is subsampled by the largest integer stride not exceeding it.
    pub sample_spacing: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params::new(2, 1)
    }
}

/// Smallest N₀ with 32√n·σ·2^{−N₀} < 1.
pub fn minimal_level(n: usize, sigma: f64) -> u32 {
    let c = 32.0 * (n as f64).sqrt() * sigma;
    let mut k = 0u32;
    while c * 0.5f64.powi(k as i32) >= 1.0 {
        k += 1;
    }
    k
}

/// β with (1+γ)(2−2δ) = 2+2β.
pub fn derived_beta(gamma: f64, delta: f64) -> f64 {
    0.5 * ((1.0 + gamma) * (2.0 - 2.0 * delta) - 2.0)
}

impl Params {
    pub fn new(m: usize, n: usize) -> Self {
        let sigma = 1.0 / (2.0 * (m as f64).sqrt());
        let n0 = minimal_level(n, sigma);
        let (gamma, delta) = (0.25, 0.05);
        Params {
            m,
            n,
            sigma,
            m0: (n as f64).sqrt(),
            n0,
            delta,
            gamma,
            lambda: gamma,
            kappa: 0.05,
            vartheta: 0.1,
            beta: derived_beta(gamma, delta),
            k_max: n0 + 3,
            chart_samples: 2 * (8.0 * (n as f64).sqrt()).ceil() as usize,
            g_samples: 17,
            eps_bar: 0.05,
            sample_spacing: 1.0 / 32.0,
        }
    }

    /// Recomputes the derived constants and enforces the standing constraints.
    pub fn validate(mut self) -> Result<Self> {
        let bad = |msg: String| Err(Error::Params(msg));
        if self.m == 0 || self.n == 0 || self.m > 3 {
            return bad(format!("dimensions m={} n={} unsupported", self.m, self.n));
        }
        self.sigma = 1.0 / (2.0 * (self.m as f64).sqrt());
        self.m0 = (self.n as f64).sqrt();
        self.n0 = minimal_level(self.n, self.sigma);
        for (name, v) in [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("kappa", self.kappa),
            ("vartheta", self.vartheta),
            ("eps_bar", self.eps_bar),
            ("sample_spacing", self.sample_spacing),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.kappa >= self.vartheta {
            return bad(format!("kappa = {} must be below vartheta = {}", self.kappa, self.vartheta));
        }
        self.beta = derived_beta(self.gamma, self.delta);
        if self.beta <= 0.0 {
            return bad(format!(
                "beta = {} not positive; need delta < gamma/(1+gamma) = {}",
                self.beta,
                self.gamma / (1.0 + self.gamma)
            ));
        }
        if self.k_max < self.n0 {
            return bad(format!("k_max = {} below N0 = {}", self.k_max, self.n0));
        }
        let spacing = 8.0 * self.m0 / self.chart_samples as f64;
        if spacing > 0.5 {
            return bad(format!(
                "chart_samples = {} leaves the mollifier radius under two chart spacings",
                self.chart_samples
            ));
        }
        if self.g_samples < 9 {
            return bad(format!("g_samples = {} too few for fourth derivatives", self.g_samples));
        }
        Ok(self)
    }

    /// ℓ at level k: [−σ,σ]ᵐ split into 2^k cubes per axis.
    pub fn side(&self, k: u32) -> f64 {
        2.0 * self.sigma * 0.5f64.powi(k as i32)
    }

    pub fn lipapprox(&self) -> LipApproxParams {
        LipApproxParams {
            gamma: self.gamma,
            lambda: self.lambda,
            eps_bar: self.eps_bar,
            r_max: None,
        }
    }

    /// Half-side a base grid needs so that every 𝐁_L, L ∈ 𝒞_{N₀}, projects inside it.
    pub fn required_half_side(&self) -> f64 {
        self.sigma + 32.0 * self.m0 * self.side(self.n0)
    }

    /// Applies `key=value` overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Params(format!("parameter {key}: cannot parse {value:?}")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::Params(format!("parameter {key}: cannot parse {value:?} as an integer")))
        };
        match key {
            "m" => self.m = int()? as usize,
            "n" => self.n = int()? as usize,
            "delta" => self.delta = num()?,
            "gamma" => self.gamma = num()?,
            "lambda" => self.lambda = num()?,
            "kappa" => self.kappa = num()?,
            "vartheta" => self.vartheta = num()?,
            "k_max" => self.k_max = int()? as u32,
            "chart_samples" => self.chart_samples = int()? as usize,
            "g_samples" => self.g_samples = int()? as usize,
            "eps_bar" => self.eps_bar = num()?,
            "sample_spacing" => self.sample_spacing = num()?,
            _ => return Err(Error::Params(format!("unknown parameter {key:?}"))),
        }
        Ok(())
    }
}
