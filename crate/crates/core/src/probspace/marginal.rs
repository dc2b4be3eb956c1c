use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    Uniform,
    Normal,
    Lognormal,
    Gumbel,
}

/// Internal distribution parameters after moment matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Params {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    /// Parameters of the underlying normal of `ln X`.
    Lognormal { mu_ln: f64, sigma_ln: f64 },
    /// Max-type Gumbel.
    Gumbel { location: f64, scale: f64 },
}

/// Converts a (mean, sd) description into internal parameters.
///
/// Uniform is matched on its first two moments as well (`lo = mean - sqrt(3) sd`).
pub fn moment_match(kind: MarginalKind, mean: f64, sd: f64) -> Result<Params> {
    if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "{kind:?}: sd must be positive and finite (mean={mean}, sd={sd})"
        )));
    }
    Ok(match kind {
        MarginalKind::Uniform => {
            let half = 3f64.sqrt() * sd;
            Params::Uniform {
                lo: mean - half,
                hi: mean + half,
            }
        }
        MarginalKind::Normal => Params::Normal { mean, sd },
        MarginalKind::Lognormal => {
            if !(mean > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "lognormal mean must be positive, got {mean}"
                )));
            }
            let cv2 = (sd / mean).powi(2);
            let sigma2 = cv2.ln_1p();
            Params::Lognormal {
                mu_ln: mean.ln() - 0.5 * sigma2,
                sigma_ln: sigma2.sqrt(),
            }
        }
        MarginalKind::Gumbel => {
            let scale = sd * 6f64.sqrt() / PI;
            Params::Gumbel {
                location: mean - EULER_GAMMA * scale,
                scale,
            }
        }
    })
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Halley step against the erfc-based CDF. Evaluated in the lower tail and
/// mirrored, since `1 - u` is exact for `u >= 0.5`.
pub(crate) fn std_normal_ppf(u: f64) -> f64 {
    if u.is_nan() {
        return f64::NAN;
    }
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    if u > 0.5 {
        return -lower_tail_ppf(1.0 - u);
    }
    lower_tail_ppf(u)
}

fn lower_tail_ppf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let x = if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = std_normal_cdf(x) - p;
    let step = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - step / (1.0 + 0.5 * x * step)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl Params {
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Params::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Params::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Params::Lognormal { mu_ln, sigma_ln } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu_ln) / sigma_ln)
                }
            }
            Params::Gumbel { location, scale } => (-(-(x - location) / scale).exp()).exp(),
        }
    }

    fn ppf(&self, u: f64) -> f64 {
        match *self {
            Params::Uniform { lo, hi } => lo + u * (hi - lo),
            Params::Normal { mean, sd } => mean + sd * std_normal_ppf(u),
            Params::Lognormal { mu_ln, sigma_ln } => (mu_ln + sigma_ln * std_normal_ppf(u)).exp(),
            Params::Gumbel { location, scale } => {
                if u <= 0.0 {
                    f64::NEG_INFINITY
                } else if u >= 1.0 {
                    f64::INFINITY
                } else {
                    location - scale * (-u.ln()).ln()
                }
            }
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Params::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Params::Normal { mean, sd } => std_normal_pdf((x - mean) / sd) / sd,
            Params::Lognormal { mu_ln, sigma_ln } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((x.ln() - mu_ln) / sigma_ln) / (x * sigma_ln)
                }
            }
            Params::Gumbel { location, scale } => {
                let y = (x - location) / scale;
                (-y - (-y).exp()).exp() / scale
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Params::Uniform { lo, hi } => (lo, hi),
            Params::Normal { .. } | Params::Gumbel { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Params::Lognormal { .. } => (0.0, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Truncation {
    lo: f64,
    hi: f64,
    cdf_lo: f64,
    cdf_hi: f64,
}

/// A univariate marginal, optionally truncated to `[lo, hi]` by CDF renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    kind: MarginalKind,
    mean: f64,
    sd: f64,
    params: Params,
    truncation: Option<Truncation>,
}

impl Marginal {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "uniform bounds must satisfy lo < hi (lo={lo}, hi={hi})"
            )));
        }
        Ok(Self {
            kind: MarginalKind::Uniform,
            mean: 0.5 * (lo + hi),
            sd: (hi - lo) / 12f64.sqrt(),
            params: Params::Uniform { lo, hi },
            truncation: None,
        })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::from_moments(MarginalKind::Normal, mean, sd)
    }

    pub fn lognormal(mean: f64, sd: f64) -> Result<Self> {
        Self::from_moments(MarginalKind::Lognormal, mean, sd)
    }

    pub fn gumbel(mean: f64, sd: f64) -> Result<Self> {
        Self::from_moments(MarginalKind::Gumbel, mean, sd)
    }

    pub fn from_moments(kind: MarginalKind, mean: f64, sd: f64) -> Result<Self> {
        let params = moment_match(kind, mean, sd)?;
        Ok(Self {
            kind,
            mean,
            sd,
            params,
            truncation: None,
        })
    }

    /// Restricts the marginal to `[lo, hi]`. The interval must carry positive mass.
    pub fn truncated(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::ParameterDomain(format!(
                "truncation interval must satisfy lo < hi (lo={lo}, hi={hi})"
            )));
        }
        let (s_lo, s_hi) = self.params.support();
        let lo = lo.max(s_lo);
        let hi = hi.min(s_hi);
        let cdf_lo = self.params.cdf(lo);
        let cdf_hi = self.params.cdf(hi);
        if !(lo < hi) || !(cdf_hi - cdf_lo > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "truncation [{lo}, {hi}] has no probability mass"
            )));
        }
        self.truncation = Some(Truncation {
            lo,
            hi,
            cdf_lo,
            cdf_hi,
        });
        Ok(self)
    }

    pub fn without_truncation(&self) -> Self {
        Self {
            truncation: None,
            ..self.clone()
        }
    }

    pub fn kind(&self) -> MarginalKind {
        self.kind
    }

    pub fn params(&self) -> Params {
        self.params
    }

    /// Mean of the untruncated distribution.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard deviation of the untruncated distribution.
    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn truncation(&self) -> Option<(f64, f64)> {
        self.truncation.map(|t| (t.lo, t.hi))
    }

    pub fn support(&self) -> (f64, f64) {
        match self.truncation {
            Some(t) => (t.lo, t.hi),
            None => self.params.support(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.truncation {
            None => self.params.cdf(x),
            Some(t) => {
                if x <= t.lo {
                    0.0
                } else if x >= t.hi {
                    1.0
                } else {
                    ((self.params.cdf(x) - t.cdf_lo) / (t.cdf_hi - t.cdf_lo)).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn ppf(&self, u: f64) -> f64 {
        match self.truncation {
            None => self.params.ppf(u),
            Some(t) => {
                let x = self.params.ppf(t.cdf_lo + u * (t.cdf_hi - t.cdf_lo));
                x.clamp(t.lo, t.hi)
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.truncation {
            None => self.params.pdf(x),
            Some(t) => {
                if x < t.lo || x > t.hi {
                    0.0
                } else {
                    self.params.pdf(x) / (t.cdf_hi - t.cdf_lo)
                }
            }
        }
    }

    /// Whether `x` lies in the closed support.
    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x.is_finite() && x >= lo && x <= hi
    }
}
