//! Point estimators, variance estimators and normal-theory intervals.
//!
//! Every weighted estimator here has the generalized unequal-probability
//! form `sum(y_i / w_i) / sum(1 / w_i)`; they differ in the weights:
//! resampling frequencies `f_i`, true inclusion probabilities `pi_i`, or
//! reported degrees `d_i`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("weight {index} is {value}; weights must be positive and finite")]
    Domain { index: usize, value: f64 },
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("no joint frequency for sample edge ({0}, {1})")]
    MissingPair(usize, usize),
    #[error("alpha {0} must lie strictly between 0 and 1")]
    Alpha(f64),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Adherent,
    BrewerPi,
    VhCurrent,
    SampleMean,
    AdherentWr,
    Ratio,
}

impl EstimatorId {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorId::Adherent => "adherent",
            EstimatorId::BrewerPi => "brewer_pi",
            EstimatorId::VhCurrent => "vh_current",
            EstimatorId::SampleMean => "sample_mean",
            EstimatorId::AdherentWr => "adherent_wr",
            EstimatorId::Ratio => "ratio",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            EstimatorId::Adherent,
            EstimatorId::BrewerPi,
            EstimatorId::VhCurrent,
            EstimatorId::SampleMean,
            EstimatorId::AdherentWr,
            EstimatorId::Ratio,
        ]
        .into_iter()
        .find(|e| e.name() == s)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarianceId {
    SimpleN,
    SimpleTaylor,
    TaylorFull,
    TaylorEdges,
    TaylorDiag,
    TaylorConservative,
    Wr,
    Ratio,
}

impl VarianceId {
    pub fn name(self) -> &'static str {
        match self {
            VarianceId::SimpleN => "simple_n",
            VarianceId::SimpleTaylor => "simple_taylor",
            VarianceId::TaylorFull => "taylor_full",
            VarianceId::TaylorEdges => "taylor_edges",
            VarianceId::TaylorDiag => "taylor_diag",
            VarianceId::TaylorConservative => "taylor_conservative",
            VarianceId::Wr => "wr",
            VarianceId::Ratio => "ratio",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            VarianceId::SimpleN,
            VarianceId::SimpleTaylor,
            VarianceId::TaylorFull,
            VarianceId::TaylorEdges,
            VarianceId::TaylorDiag,
            VarianceId::TaylorConservative,
            VarianceId::Wr,
            VarianceId::Ratio,
        ]
        .into_iter()
        .find(|v| v.name() == s)
    }
}

impl fmt::Display for VarianceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub estimator: EstimatorId,
    pub variance_id: VarianceId,
    pub point: f64,
    pub variance: f64,
    pub half_width: f64,
    pub alpha: f64,
}

impl EstimateResult {
    pub fn new(
        estimator: EstimatorId,
        variance_id: VarianceId,
        point: f64,
        variance: f64,
        alpha: f64,
    ) -> Result<Self> {
        let ci = confidence_interval(point, variance, alpha)?;
        Ok(EstimateResult {
            estimator,
            variance_id,
            point,
            variance,
            half_width: ci.half_width,
            alpha,
        })
    }

    pub fn lo(&self) -> f64 {
        self.point - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.point + self.half_width
    }

    /// Interval clipped to `[0, 1]`, for proportions.
    pub fn clipped(&self) -> (f64, f64) {
        (self.lo().clamp(0.0, 1.0), self.hi().clamp(0.0, 1.0))
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lo() <= value && value <= self.hi()
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(EstimatorError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(EstimatorError::Empty);
    }
    Ok(())
}

fn check_weights(w: &[f64]) -> Result<()> {
    match w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(EstimatorError::Domain {
            index,
            value: w[index],
        }),
        None => Ok(()),
    }
}

fn inverse_sum(w: &[f64]) -> f64 {
    w.iter().map(|&v| 1.0 / v).sum()
}

/// Generalized unequal-probability mean: `sum(y/w) / sum(1/w)`.
pub fn mu_f(y: &[f64], w: &[f64]) -> Result<f64> {
    check_len(y.len(), w.len())?;
    check_weights(w)?;
    let num: f64 = y.iter().zip(w).map(|(&y, &w)| y / w).sum();
    Ok(num / inverse_sum(w))
}

/// Degree-weighted estimator with weights `1/d_i`.
pub fn vh_estimate(y: &[f64], degrees: &[f64]) -> Result<f64> {
    mu_f(y, degrees)
}

pub fn sample_mean(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(EstimatorError::Empty);
    }
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

/// Variance of the sample mean under simple random sampling, `s^2 / n`.
pub fn var_sample_mean(y: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 2 {
        return Err(EstimatorError::TooFew { needed: 2, got: n });
    }
    let m = sample_mean(y)?;
    Ok(y.iter().map(|&v| (v - m).powi(2)).sum::<f64>() / ((n - 1) * n) as f64)
}

/// Sample variance of the pseudo-values `t_i = n (y_i/w_i) / sum(1/w)`,
/// divided by `n`.
pub fn var_simple_n(y: &[f64], w: &[f64], point: f64) -> Result<f64> {
    check_len(y.len(), w.len())?;
    check_weights(w)?;
    let n = y.len();
    if n < 2 {
        return Err(EstimatorError::TooFew { needed: 2, got: n });
    }
    let inv = inverse_sum(w);
    let nf = n as f64;
    let ss: f64 = y
        .iter()
        .zip(w)
        .map(|(&y, &w)| (nf * (y / w) / inv - point).powi(2))
        .sum();
    Ok(ss / (nf * (nf - 1.0)))
}

/// Simplified linearization variance: `sum((y_i - point)^2 / w_i^2) / sum(1/w)^2`.
pub fn var_simple_taylor(y: &[f64], w: &[f64], point: f64) -> Result<f64> {
    check_len(y.len(), w.len())?;
    check_weights(w)?;
    let inv = inverse_sum(w);
    let s: f64 = y
        .iter()
        .zip(w)
        .map(|(&y, &w)| (y - point).powi(2) / (w * w))
        .sum();
    Ok(s / (inv * inv))
}

fn diag_terms(y: &[f64], f: &[f64], point: f64, finite_correction: bool) -> f64 {
    y.iter()
        .zip(f)
        .map(|(&y, &f)| {
            let c = if finite_correction { 1.0 - f } else { 1.0 };
            c * (y - point).powi(2) / f
        })
        .sum()
}

/// Diagonal terms of the linearization variance, with `(1 - f_i)` factors.
pub fn var_taylor_diag(y: &[f64], f: &[f64], point: f64) -> Result<f64> {
    check_len(y.len(), f.len())?;
    check_weights(f)?;
    let inv = inverse_sum(f);
    Ok((diag_terms(y, f, point, true) / (inv * inv)).max(0.0))
}

/// Diagonal terms without the `(1 - f_i)` factors; never smaller than
/// [`var_taylor_diag`].
pub fn var_taylor_conservative(y: &[f64], f: &[f64], point: f64) -> Result<f64> {
    check_len(y.len(), f.len())?;
    check_weights(f)?;
    let inv = inverse_sum(f);
    Ok(diag_terms(y, f, point, false) / (inv * inv))
}

/// Joint resampling frequencies keyed by unordered member pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairTable {
    map: HashMap<(usize, usize), f64>,
}

impl PairTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: usize, b: usize, f: f64) {
        self.map.insert(key(a, b), f);
    }

    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        self.map.get(&key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl FromIterator<(usize, usize, f64)> for PairTable {
    fn from_iter<I: IntoIterator<Item = (usize, usize, f64)>>(iter: I) -> Self {
        let mut t = PairTable::new();
        for (a, b, f) in iter {
            t.insert(a, b, f);
        }
        t
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeVariance {
    pub variance: f64,
    /// The raw sum was negative and the result was clamped to 0.
    pub clamped: bool,
    pub raw: f64,
}

/// Linearization variance restricted to the diagonal and the sample edge
/// set. Each undirected edge contributes both ordered pairs `(i, j)` and
/// `(j, i)`, as in the full double sum.
pub fn var_taylor_edges(
    y: &[f64],
    f: &[f64],
    edges: &[(usize, usize)],
    pairs: &PairTable,
    point: f64,
) -> Result<EdgeVariance> {
    check_len(y.len(), f.len())?;
    check_weights(f)?;
    let inv = inverse_sum(f);
    let mut total = diag_terms(y, f, point, true);
    for &(i, j) in edges {
        let fij = pairs.get(i, j).ok_or(EstimatorError::MissingPair(i, j))?;
        if !(fij > 0.0) {
            return Err(EstimatorError::Domain {
                index: i,
                value: fij,
            });
        }
        let delta = (fij - f[i] * f[j]) / fij;
        total += 2.0 * delta * ((y[i] - point) / f[i]) * ((y[j] - point) / f[j]);
    }
    let raw = total / (inv * inv);
    Ok(EdgeVariance {
        variance: raw.max(0.0),
        clamped: raw < 0.0,
        raw,
    })
}

/// With-replacement estimator from original selection counts `m` and mean
/// resampling counts `g`.
pub fn wr_estimate(y: &[f64], m: &[f64], g: &[f64]) -> Result<f64> {
    check_len(y.len(), m.len())?;
    check_len(y.len(), g.len())?;
    check_weights(g)?;
    if let Some(index) = m.iter().position(|&v| v < 1.0) {
        return Err(EstimatorError::Domain {
            index,
            value: m[index],
        });
    }
    let num: f64 = (0..y.len()).map(|i| m[i] * y[i] / g[i]).sum();
    let den: f64 = (0..y.len()).map(|i| m[i] / g[i]).sum();
    Ok(num / den)
}

pub fn wr_variance(y: &[f64], m: &[f64], g: &[f64], point: f64) -> Result<f64> {
    check_len(y.len(), m.len())?;
    check_len(y.len(), g.len())?;
    check_weights(g)?;
    let den: f64 = (0..y.len()).map(|i| m[i] / g[i]).sum();
    let s: f64 = (0..y.len())
        .map(|i| m[i] * (y[i] - point).powi(2) / (g[i] * g[i]))
        .sum();
    Ok(s / (den * den))
}

/// Ratio of weighted totals, `sum(y/f) / sum(x/f)`.
pub fn ratio_estimate(y: &[f64], x: &[f64], f: &[f64]) -> Result<f64> {
    check_len(y.len(), x.len())?;
    check_len(y.len(), f.len())?;
    check_weights(f)?;
    let den: f64 = x.iter().zip(f).map(|(&x, &f)| x / f).sum();
    if den == 0.0 {
        return Err(EstimatorError::ZeroDenominator);
    }
    let num: f64 = y.iter().zip(f).map(|(&y, &f)| y / f).sum();
    Ok(num / den)
}

/// Linearization variance of the ratio with residuals `y_i - x_i R`.
pub fn ratio_variance(y: &[f64], x: &[f64], f: &[f64], ratio: f64) -> Result<f64> {
    check_len(y.len(), x.len())?;
    check_len(y.len(), f.len())?;
    check_weights(f)?;
    let den: f64 = x.iter().zip(f).map(|(&x, &f)| x / f).sum();
    if den == 0.0 {
        return Err(EstimatorError::ZeroDenominator);
    }
    let s: f64 = (0..y.len())
        .map(|i| (y[i] - x[i] * ratio).powi(2) / (f[i] * f[i]))
        .sum();
    Ok(s / (den * den))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub half_width: f64,
}

/// Symmetric normal interval `point ± z_{1-alpha/2} sqrt(variance)`.
pub fn confidence_interval(point: f64, variance: f64, alpha: f64) -> Result<Interval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EstimatorError::Alpha(alpha));
    }
    if !(variance >= 0.0) {
        return Err(EstimatorError::Domain {
            index: 0,
            value: variance,
        });
    }
    let half_width = normal_quantile(1.0 - alpha / 2.0) * variance.sqrt();
    Ok(Interval {
        lo: point - half_width,
        hi: point + half_width,
        half_width,
    })
}

/// Standard normal quantile (Wichura, AS241 PPND16), relative accuracy
/// about 1e-16.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability {p} out of range");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
