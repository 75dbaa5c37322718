//! Quantitative checks of the analytic properties: long-range dependence,
//! asymptotic homogeneity, short/long-time asymptotics, quadratic and total
//! variation of η, the Markov triangular defect, increment-variance bounds,
//! self-similarity and Monte Carlo agreement.
//!
//! Every check is deterministic given its inputs (and seed, where one is
//! taken) and returns a [`VerificationReport`] listing each condition that
//! was tested.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::kernels::{self, FamilySpec, IncrementQuadruple, KernelError};
use crate::pd_analysis::{self, PdError, TimeGrid};
use crate::sampling::{self, PathEnsemble, SamplingError};
use crate::specfun::{self, adaptive_quad_endpoints, Endpoint, Tol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Pd(#[from] PdError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

impl From<specfun::SpecfunError> for CheckError {
    fn from(e: specfun::SpecfunError) -> Self {
        CheckError::Kernel(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CheckError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One tested inequality `value ≤ threshold` or `value ≥ threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Condition {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Condition {
            name: name.into(),
            value,
            threshold,
            relation: Relation::AtMost,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Condition {
            name: name.into(),
            value,
            threshold,
            relation: Relation::AtLeast,
            pass: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMeta {
    pub n: usize,
    pub seed: u64,
    pub stderr: f64,
    pub underpowered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub paths: usize,
    pub seed: u64,
}

/// Outcome of one check. `defect`, `threshold` and `relation` repeat the
/// first failing condition, or the first condition when all pass, so
/// `pass` agrees with `defect` compared to `threshold` under `relation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub spec: FamilySpec,
    pub parameters: BTreeMap<String, f64>,
    pub defect: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
    pub conditions: Vec<Condition>,
    pub samples: Option<MonteCarloMeta>,
}

impl VerificationReport {
    pub fn new(
        check_name: impl Into<String>,
        spec: FamilySpec,
        parameters: BTreeMap<String, f64>,
        conditions: Vec<Condition>,
        samples: Option<MonteCarloMeta>,
    ) -> Self {
        let pass = conditions.iter().all(|c| c.pass);
        let lead = conditions.iter().find(|c| !c.pass).or(conditions.first());
        let (defect, threshold, relation) = lead
            .map(|c| (c.value, c.threshold, c.relation))
            .unwrap_or((0.0, 0.0, Relation::AtMost));
        VerificationReport {
            check_name: check_name.into(),
            spec,
            parameters,
            defect,
            threshold,
            relation,
            pass,
            conditions,
            samples,
        }
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Errors at or below this level are rounding noise and not ranked.
const ERROR_FLOOR: f64 = 1e-9;

/// Number of steps where an error sequence fails to decrease strictly
/// while still above [`ERROR_FLOOR`].
fn non_decreasing_steps(xs: &[f64]) -> f64 {
    xs.windows(2).filter(|w| !(w[1] < w[0]) && w[1] > ERROR_FLOOR).count() as f64
}

fn non_increasing_steps(xs: &[f64]) -> f64 {
    xs.windows(2).filter(|w| !(w[1] > w[0])).count() as f64
}

fn rel_err(x: f64, limit: f64) -> f64 {
    if limit == 0.0 {
        x.abs()
    } else {
        ((x - limit) / limit).abs()
    }
}

/// Increment quadruple together with the horizons `T` at which the second
/// interval is shifted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrdQuadruple {
    pub quad: IncrementQuadruple,
    pub t_values: Vec<f64>,
}

impl LrdQuadruple {
    pub fn new(quad: IncrementQuadruple, t_values: Vec<f64>) -> Result<Self> {
        if t_values.is_empty() || t_values.iter().any(|&t| !(t >= 1.0)) {
            return Err(CheckError::Config("horizons must be >= 1".into()));
        }
        if t_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CheckError::Config("horizons must be increasing".into()));
        }
        Ok(LrdQuadruple { quad, t_values })
    }

    pub fn standard() -> Self {
        LrdQuadruple {
            quad: IncrementQuadruple::new(0.0, 1.0, 1.0, 2.0).expect("ordered"),
            t_values: vec![1e2, 1e3, 1e4, 1e5],
        }
    }
}

/// Limit of the scaled increment covariance and the power of `T` used to
/// scale it.
pub fn lrd_limit(spec: &FamilySpec, q: &IncrementQuadruple) -> Result<(f64, f64)> {
    let (r, v, s, t) = (q.r, q.v, q.s, q.t);
    Ok(match *spec {
        FamilySpec::Wfbm { a, b } => (b / (a + 1.0) * (t - s) * (v.powf(a + 1.0) - r.powf(a + 1.0)), 1.0 - b),
        FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => (
            h * (h - 1.0) * (h - 2.0).powi(2) / 2.0 * (t - s) * (v * v - r * r),
            3.0 - h,
        ),
        FamilySpec::Eta => ((t - s) * (v * v - r * r), 1.0),
        _ => {
            return Err(CheckError::Config(format!(
                "long-range dependence limit is not defined for {}",
                spec.name()
            )))
        }
    })
}

/// `T^κ Q(r, v, s+T, t+T)` against its limit: the relative error at the
/// largest horizon must be below `1e-2` and the errors must decrease.
pub fn check_lrd_limit(spec: &FamilySpec, q: &LrdQuadruple) -> Result<VerificationReport> {
    spec.check()?;
    let (limit, power) = lrd_limit(spec, &q.quad)?;
    let mut errors = Vec::with_capacity(q.t_values.len());
    let mut last = 0.0;
    for &horizon in &q.t_values {
        let shifted = q.quad.shifted(horizon)?;
        let scaled = horizon.powf(power) * kernels::incr_cov(spec, &shifted)?;
        errors.push(rel_err(scaled, limit));
        last = scaled;
    }
    let mut conditions = Vec::new();
    if limit == 0.0 {
        conditions.push(Condition::at_most("abs_scaled_at_max_T", errors[errors.len() - 1], 1e-12));
    } else {
        conditions.push(Condition::at_most("rel_error_at_max_T", errors[errors.len() - 1], 1e-2));
        conditions.push(Condition::at_most("non_decreasing_error_steps", non_decreasing_steps(&errors), 0.0));
    }
    let mut p = params(&[
        ("r", q.quad.r),
        ("v", q.quad.v),
        ("s", q.quad.s),
        ("t", q.quad.t),
        ("limit", limit),
        ("scaled_at_max_T", last),
        ("T_power", power),
    ]);
    for (h, e) in q.t_values.iter().zip(&errors) {
        p.insert(format!("rel_error_T={h:e}"), *e);
    }
    Ok(VerificationReport::new("lrd_limit", *spec, p, conditions, None))
}

/// `T^{−a} E((ξ_{t+T} − ξ_T)(ξ_{s+T} − ξ_T))`, computed as
/// `∫₀ˢ (1 + w/T)^a [(t−w)^b + (s−w)^b] dw` (the contributions below `T`
/// cancel exactly).
pub fn homogeneity_scaled(a: f64, b: f64, s: f64, t: f64, horizon: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let right = Endpoint::Power(b);
    let res = adaptive_quad_endpoints(
        |w: f64| (1.0 + w / horizon).powf(a) * ((t - w).powf(b) + (s - w).powf(b)),
        0.0,
        s,
        Endpoint::Smooth,
        right,
        Tol::rel(1e-13),
    )?;
    Ok(res.value)
}

/// Increment covariances after a long time `T` against those of fBm with
/// Hurst index `(1+b)/2` scaled by `2/(1+b)`.
pub fn check_asymptotic_homogeneity(a: f64, b: f64, s: f64, t: f64, t_values: &[f64]) -> Result<VerificationReport> {
    let spec = FamilySpec::Wfbm { a, b };
    spec.check()?;
    if !(0.0 <= s && s <= t) || t_values.is_empty() {
        return Err(CheckError::Config("need 0 <= s <= t and at least one horizon".into()));
    }
    let limit = (t.powf(b + 1.0) + s.powf(b + 1.0) - (t - s).powf(b + 1.0)) / (b + 1.0);
    let errors: Vec<f64> = t_values
        .iter()
        .map(|&h| homogeneity_scaled(a, b, s, t, h).map(|v| rel_err(v, limit)))
        .collect::<Result<_>>()?;
    let last = errors[errors.len() - 1];
    let conditions = if a == 0.0 || limit == 0.0 {
        vec![Condition::at_most("max_rel_error", errors.iter().copied().fold(0.0, f64::max), 1e-10)]
    } else {
        vec![
            Condition::at_most("rel_error_at_max_T", last, 1e-2),
            Condition::at_most("non_decreasing_error_steps", non_decreasing_steps(&errors), 0.0),
        ]
    };
    let mut p = params(&[("a", a), ("b", b), ("s", s), ("t", t), ("limit", limit)]);
    for (h, e) in t_values.iter().zip(&errors) {
        p.insert(format!("rel_error_T={h:e}"), *e);
    }
    Ok(VerificationReport::new("asymptotic_homogeneity", spec, p, conditions, None))
}

/// Short-time `ε^{−b−1} E(ξ_{t+ε}−ξ_t)² → 2t^a/(b+1)` and long-time
/// `T^{−(1+a+b)} E(ξ_{t+T}−ξ_t)² → 2B(a+1,b+1)`.
///
/// Each error sequence must decrease (unless it is at rounding level
/// throughout) and end below `5e-2`.
pub fn check_short_long_asymptotics(
    a: f64,
    b: f64,
    t: f64,
    eps_values: &[f64],
    t_values: &[f64],
) -> Result<VerificationReport> {
    let spec = FamilySpec::Wfbm { a, b };
    spec.check()?;
    if !(t > 0.0) || eps_values.is_empty() || t_values.is_empty() {
        return Err(CheckError::Config("need t > 0 and nonempty eps and T lists".into()));
    }
    let short_limit = 2.0 * t.powf(a) / (b + 1.0);
    let long_limit = 2.0 * specfun::beta(a + 1.0, b + 1.0)?;
    let short: Vec<f64> = eps_values
        .iter()
        .map(|&e| Ok(rel_err(e.powf(-b - 1.0) * kernels::wfbm_incr_var(a, b, t, t + e)?, short_limit)))
        .collect::<Result<_>>()?;
    let long: Vec<f64> = t_values
        .iter()
        .map(|&h| Ok(rel_err(h.powf(-(1.0 + a + b)) * kernels::wfbm_incr_var(a, b, t, t + h)?, long_limit)))
        .collect::<Result<_>>()?;
    let mut conditions = Vec::new();
    for (name, errs) in [("short", &short), ("long", &long)] {
        let last = errs[errs.len() - 1];
        conditions.push(Condition::at_most(format!("{name}_rel_error_final"), last, 5e-2));
        conditions.push(Condition::at_most(
            format!("{name}_non_decreasing_error_steps"),
            non_decreasing_steps(errs),
            0.0,
        ));
    }
    let p = params(&[
        ("a", a),
        ("b", b),
        ("t", t),
        ("short_limit", short_limit),
        ("long_limit", long_limit),
        ("short_rel_error_final", short[short.len() - 1]),
        ("long_rel_error_final", long[long.len() - 1]),
    ]);
    Ok(VerificationReport::new("short_long_asymptotics", spec, p, conditions, None))
}

/// `n² E(η_{(k+1)/n} − η_{k/n})² = E(η_{k+1} − η_k)²` for `k < kmax`.
pub fn eta_unit_increment_variances(kmax: usize) -> Result<Vec<f64>> {
    exec::map_indices(kmax, |k| kernels::eta_incr_var(k as f64, k as f64 + 1.0))
        .into_iter()
        .map(|r| r.map_err(CheckError::from))
        .collect()
}

fn validate_dyadic(n_values: &[usize]) -> Result<()> {
    if n_values.is_empty() || n_values.iter().any(|&n| n < 2) {
        return Err(CheckError::Config("partition sizes must be >= 2".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CheckError::Config("partition sizes must be increasing".into()));
    }
    Ok(())
}

/// `n = 2⁶ … 2¹²`.
pub fn dyadic_partitions() -> Vec<usize> {
    (6..=12).map(|k| 1usize << k).collect()
}

/// Whether the quadratic variation over `[0,1]` is expected to vanish.
fn qv_vanishes(spec: &FamilySpec) -> bool {
    match *spec {
        FamilySpec::Wfbm { b, .. } => b > 0.0,
        FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => h > 1.0,
        FamilySpec::OddBfbm { h } => h > 3.0,
        FamilySpec::Eta => true,
        FamilySpec::Fbm { hurst } => hurst > 0.5,
    }
}

/// First index `k` at which the upper bracket `log k / n²` is tested.
pub const ETA_BRACKET_KMIN: usize = 55;

/// `Σₖ E(X_{(k+1)/n} − X_{k/n})²` over dyadic partitions of `[0,1]`.
///
/// The sequence must decrease when the variation is expected to vanish and
/// must not decrease otherwise. For η each term is also tested against the
/// bracket `log k/(2n²) ≤ E(Δη)² ≤ log k/n²` (upper side for `k ≥ 55`).
/// With `mc`, the analytic sum at the finest partition up to 256 points is
/// compared to the mean empirical sum of squared increments.
pub fn check_quadratic_variation(
    spec: &FamilySpec,
    n_values: &[usize],
    mc: Option<McParams>,
) -> Result<VerificationReport> {
    spec.check()?;
    validate_dyadic(n_values)?;
    let nmax = *n_values.last().expect("nonempty");
    let mut p = BTreeMap::new();
    let mut conditions = Vec::new();
    let eta_v = if matches!(spec, FamilySpec::Eta) {
        Some(eta_unit_increment_variances(nmax)?)
    } else {
        None
    };
    let term = |k: usize, n: usize| -> Result<f64> {
        match &eta_v {
            Some(v) => Ok(v[k] / (n * n) as f64),
            None => Ok(kernels::incr_var(spec, k as f64 / n as f64, (k + 1) as f64 / n as f64)?),
        }
    };
    let mut sums = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let terms: Vec<f64> = (0..n).map(|k| term(k, n)).collect::<Result<_>>()?;
        let s: f64 = terms.iter().sum();
        p.insert(format!("qv_n={n}"), s);
        sums.push(s);
    }
    let last = sums[sums.len() - 1];
    if qv_vanishes(spec) {
        conditions.push(Condition::at_most("non_decreasing_steps", sums.windows(2).filter(|w| !(w[1] < w[0])).count() as f64, 0.0));
    } else {
        let drops = sums.windows(2).filter(|w| w[1] < w[0] * (1.0 - 1e-12)).count() as f64;
        conditions.push(Condition::at_most("decreasing_steps", drops, 0.0));
    }
    if let Some(v) = &eta_v {
        conditions.push(Condition::at_most("qv_at_max_n", last, 1e-2));
        // worst ratio to each side of the bracket, with the tested
        // variance and with the printed double integral (half of it)
        let mut upper = 0.0f64;
        let mut lower = f64::INFINITY;
        let mut upper_integral = 0.0f64;
        let mut lower_integral = f64::INFINITY;
        for &n in n_values {
            for k in 1..n {
                let lk = (k as f64).ln();
                let scaled = v[k]; // n² E(Δη)²
                if k >= ETA_BRACKET_KMIN {
                    upper = upper.max(scaled / lk);
                    upper_integral = upper_integral.max(0.5 * scaled / lk);
                }
                if k >= 2 {
                    lower = lower.min(scaled / (0.5 * lk));
                    lower_integral = lower_integral.min(0.5 * scaled / (0.5 * lk));
                }
            }
        }
        conditions.push(Condition::at_most("bracket_upper_max_ratio", upper, 1.0));
        conditions.push(Condition::at_least("bracket_lower_min_ratio", lower, 1.0));
        p.insert("bracket_upper_max_ratio_double_integral".into(), upper_integral);
        p.insert("bracket_lower_min_ratio_double_integral".into(), lower_integral);
    }
    let mut samples = None;
    if let Some(mc) = mc {
        let n = n_values.iter().copied().filter(|&n| n <= 256).max().unwrap_or(n_values[0].min(256));
        let grid = TimeGrid::new((0..=n).map(|k| k as f64 / n as f64).collect())?;
        let ens = sampling::sample(spec, &grid, mc.paths, mc.seed)?;
        let qv: Vec<f64> = (0..ens.n)
            .map(|i| ens.path(i).windows(2).map(|w| (w[1] - w[0]).powi(2)).sum())
            .collect();
        let mean = qv.iter().sum::<f64>() / ens.n as f64;
        let var = qv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ens.n.max(2) - 1) as f64;
        let stderr = (var / ens.n as f64).sqrt();
        let analytic: f64 = (0..n).map(|k| term(k, n)).collect::<Result<Vec<_>>>()?.iter().sum();
        let z = if stderr > 0.0 { (mean - analytic).abs() / stderr } else { 0.0 };
        p.insert("mc_partition".into(), n as f64);
        p.insert("mc_mean_qv".into(), mean);
        p.insert("mc_analytic_qv".into(), analytic);
        conditions.push(Condition::at_most("mc_z_score", z, 4.0));
        samples = Some(MonteCarloMeta {
            n: ens.n,
            seed: mc.seed,
            stderr,
            underpowered: ens.n < MIN_POWERED_PATHS,
        });
    }
    Ok(VerificationReport::new("quadratic_variation", *spec, p, conditions, samples))
}

/// `(1/n) Σ_{k=1}^{n−1} (log k)^{1/2}`.
pub fn variation_envelope(n: usize) -> f64 {
    (1..n).map(|k| (k as f64).ln().sqrt()).sum::<f64>() / n as f64
}

/// Expected variation `Lₙ = Σₖ E|Δη|` of η over `[0,1]`, using
/// `E|Z| = sd·√(2/π)`.
///
/// `Lₙ` must increase with `n`, stay above `c·(1/n)Σ(log k)^{1/2}` for the
/// fitted `c = minₙ Lₙ/envelopeₙ > 0`, and the envelope must grow by more
/// than 10% across the tested range. With `mc`, the mean sampled variation
/// at the finest partition up to 256 points is compared with `Lₙ`.
pub fn check_variation_growth(n_values: &[usize], mc: Option<McParams>) -> Result<VerificationReport> {
    validate_dyadic(n_values)?;
    let nmax = *n_values.last().expect("nonempty");
    let v = eta_unit_increment_variances(nmax)?;
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let ln: Vec<f64> = n_values
        .iter()
        .map(|&n| (0..n).map(|j| v[j].sqrt() / n as f64 * k).sum())
        .collect();
    let env: Vec<f64> = n_values.iter().map(|&n| variation_envelope(n)).collect();
    let c_fit = ln
        .iter()
        .zip(&env)
        .filter(|(_, &e)| e > 0.0)
        .map(|(l, e)| l / e)
        .fold(f64::INFINITY, f64::min);
    let growth = env[env.len() - 1] / env[0] - 1.0;
    let mut p = BTreeMap::new();
    for ((n, l), e) in n_values.iter().zip(&ln).zip(&env) {
        p.insert(format!("L_n={n}"), *l);
        p.insert(format!("envelope_n={n}"), *e);
    }
    p.insert("c_fit".into(), c_fit);
    p.insert("envelope_growth".into(), growth);
    let mut conditions = vec![
        Condition::at_most("non_increasing_steps", non_increasing_steps(&ln), 0.0),
        Condition::at_least("c_fit", c_fit, f64::MIN_POSITIVE),
        Condition::at_least("envelope_growth", growth, 0.10),
    ];
    let mut samples = None;
    if let Some(mc) = mc {
        let n = n_values.iter().copied().filter(|&n| n <= 256).max().unwrap_or(n_values[0].min(256));
        let grid = TimeGrid::new((0..=n).map(|j| j as f64 / n as f64).collect())?;
        let ens = sampling::sample(&FamilySpec::Eta, &grid, mc.paths, mc.seed)?;
        let tv: Vec<f64> = (0..ens.n)
            .map(|i| ens.path(i).windows(2).map(|w| (w[1] - w[0]).abs()).sum())
            .collect();
        let mean = tv.iter().sum::<f64>() / ens.n as f64;
        let var = tv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ens.n.max(2) - 1) as f64;
        let stderr = (var / ens.n as f64).sqrt();
        let analytic: f64 = (0..n).map(|j| v[j].sqrt() / n as f64 * k).sum();
        let z = if stderr > 0.0 { (mean - analytic).abs() / stderr } else { 0.0 };
        p.insert("mc_partition".into(), n as f64);
        p.insert("mc_mean_variation".into(), mean);
        p.insert("mc_analytic_variation".into(), analytic);
        conditions.push(Condition::at_most("mc_z_score", z, 4.0));
        samples = Some(MonteCarloMeta {
            n: ens.n,
            seed: mc.seed,
            stderr,
            underpowered: ens.n < MIN_POWERED_PATHS,
        });
    }
    Ok(VerificationReport::new("variation_growth", FamilySpec::Eta, p, conditions, samples))
}

fn is_markov(spec: &FamilySpec) -> bool {
    match *spec {
        FamilySpec::Wfbm { b, .. } => b == 0.0,
        FamilySpec::Fbm { hurst } => hurst == 0.5,
        FamilySpec::Sfbm { h } => h == 1.0,
        _ => false,
    }
}

/// Relative triangular defect
/// `|R(s,u)R(t,t) − R(s,t)R(t,u)| / (|R(s,u)R(t,t)| + |R(s,t)R(t,u)|)`.
///
/// Zero (to `1e-10`) for Markov kernels, at least `1e-3` is required
/// otherwise.
pub fn check_markov_defect(spec: &FamilySpec, s: f64, t: f64, u: f64) -> Result<VerificationReport> {
    if !(0.0 < s && s < t && t < u) {
        return Err(CheckError::Config(format!("need 0 < s < t < u (got {s}, {t}, {u})")));
    }
    let c = |x: f64, y: f64| kernels::cov(spec, x, y);
    let p1 = c(s, u)? * c(t, t)?;
    let p2 = c(s, t)? * c(t, u)?;
    let raw = (p1 - p2).abs();
    let scale = p1.abs() + p2.abs();
    let rel = if scale > 0.0 { raw / scale } else { 0.0 };
    let cond = if is_markov(spec) {
        Condition::at_most("relative_defect", rel, 1e-10)
    } else {
        Condition::at_least("relative_defect", rel, 1e-3)
    };
    let p = params(&[("s", s), ("t", t), ("u", u), ("raw_defect", raw), ("scale", scale)]);
    Ok(VerificationReport::new("markov_defect", *spec, p, vec![cond], None))
}

/// Equally spaced points in `[lo, hi]` at which increment variances are
/// compared with powers of the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrRegion {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BoundSide {
    Upper,
    Lower,
}

/// Bounds whose hypotheses hold on the region: `(label, side, exponent)`.
fn applicable_bounds(spec: &FamilySpec, region: &IncrRegion) -> Result<Vec<(&'static str, BoundSide, f64)>> {
    let away = region.lo > 0.0;
    let mut out = Vec::new();
    match *spec {
        FamilySpec::Wfbm { a, b } => {
            if a >= 0.0 || away {
                out.push(("upper_b_plus_1", BoundSide::Upper, b + 1.0));
            }
            if a < 0.0 && 1.0 + a + b > 0.0 {
                out.push(("upper_1_plus_a_plus_b", BoundSide::Upper, 1.0 + a + b));
            }
            if (a > 0.0 && away) || a <= 0.0 {
                out.push(("lower_b_plus_1", BoundSide::Lower, b + 1.0));
            }
        }
        FamilySpec::Nsfbm { h } if h > 2.0 && h < 4.0 => {
            out.push(("upper_2", BoundSide::Upper, 2.0));
            if away {
                out.push(("lower_2", BoundSide::Lower, 2.0));
            }
            out.push(("lower_h", BoundSide::Lower, h));
        }
        FamilySpec::Sfbm { h } if h < 2.0 => {
            out.push(("upper_h", BoundSide::Upper, h));
            out.push(("lower_h", BoundSide::Lower, h));
        }
        FamilySpec::Fbm { hurst } => {
            out.push(("upper_2H", BoundSide::Upper, 2.0 * hurst));
            out.push(("lower_2H", BoundSide::Lower, 2.0 * hurst));
        }
        _ => {}
    }
    if out.is_empty() {
        return Err(CheckError::Config(format!(
            "no increment-variance bound applies to {:?} on [{}, {}]",
            spec, region.lo, region.hi
        )));
    }
    Ok(out)
}

const SLOPE_TOL: f64 = 0.05;

/// Ratio statistics `E(Δ)²/|t−s|^p` for each bound whose hypotheses hold on
/// the region.
///
/// A finite grid always has a finite supremum, so boundedness is judged at
/// small gaps: at every grid point the log-log slope of the ratio between
/// the gaps `2^-11` and `2^-12` (relative to the region) must be at least
/// `−0.05` for an upper bound (no blow-up) and at most `0.05` for a lower
/// bound (no collapse). The extreme ratios over all grid pairs are also
/// reported, and the infimum must be positive.
pub fn check_incr_var_bounds(spec: &FamilySpec, region: &IncrRegion) -> Result<VerificationReport> {
    spec.check()?;
    if !(region.lo >= 0.0 && region.hi > region.lo && region.count >= 2) {
        return Err(CheckError::Config(format!("bad region {region:?}")));
    }
    let bounds = applicable_bounds(spec, region)?;
    let grid = TimeGrid::linspace(region.lo, region.hi, region.count)?;
    let pts = grid.points();
    let width = region.hi - region.lo;
    let var = |s: f64, t: f64| kernels::incr_var(spec, s, t);
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            pairs.push((pts[i], pts[j], var(pts[i], pts[j])?));
        }
    }
    let (d1, d2) = (width * 2f64.powi(-11), width * 2f64.powi(-12));
    let mut local = Vec::new();
    for &s in pts {
        let (base, dir) = if s + d1 <= region.hi { (s, 1.0) } else { (s, -1.0) };
        let v1 = if dir > 0.0 { var(base, base + d1)? } else { var(base - d1, base)? };
        let v2 = if dir > 0.0 { var(base, base + d2)? } else { var(base - d2, base)? };
        local.push((v1, v2));
    }
    let mut conditions = Vec::new();
    let mut p = params(&[("lo", region.lo), ("hi", region.hi), ("count", region.count as f64)]);
    for (label, side, exponent) in bounds {
        let ratios: Vec<f64> = pairs.iter().map(|&(s, t, v)| v / (t - s).powf(exponent)).collect();
        let sup = ratios.iter().copied().fold(0.0, f64::max);
        let inf = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let slopes: Vec<f64> = local
            .iter()
            .map(|&(v1, v2)| {
                let r1 = v1 / d1.powf(exponent);
                let r2 = v2 / d2.powf(exponent);
                (r2 / r1).ln() / (d2 / d1).ln()
            })
            .collect();
        p.insert(format!("{label}_sup_ratio"), sup);
        p.insert(format!("{label}_inf_ratio"), inf);
        match side {
            BoundSide::Upper => {
                let worst = slopes.iter().copied().fold(f64::INFINITY, f64::min);
                conditions.push(Condition::at_least(format!("{label}_min_small_gap_slope"), worst, -SLOPE_TOL));
                conditions.push(Condition::at_least(format!("{label}_sup_is_finite"), -sup, f64::MIN));
            }
            BoundSide::Lower => {
                let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                conditions.push(Condition::at_most(format!("{label}_max_small_gap_slope"), worst, SLOPE_TOL));
                conditions.push(Condition::at_least(format!("{label}_inf_ratio"), inf, f64::MIN_POSITIVE));
            }
        }
    }
    Ok(VerificationReport::new("incr_var_bounds", *spec, p, conditions, None))
}

/// Below this many paths Monte Carlo screens are reported as underpowered
/// and pass vacuously.
pub const MIN_POWERED_PATHS: usize = 30;

fn analytic_gram(ens: &PathEnsemble) -> Result<nalgebra::DMatrix<f64>> {
    if ens.m() == 0 {
        return Ok(nalgebra::DMatrix::zeros(0, 0));
    }
    Ok(pd_analysis::gram_unchecked(&ens.spec, &ens.grid)?.entries)
}

/// Per-pair z-scores of the empirical second moments against the analytic
/// covariance, with standard error `√((ΣᵢᵢΣⱼⱼ + Σᵢⱼ²)/n)`. At least 95% of
/// the pairs must lie within `tol_sigmas`. Pairs involving a zero-variance
/// point are excluded and counted.
pub fn check_empirical_cov(ens: &PathEnsemble, tol_sigmas: f64) -> Result<VerificationReport> {
    if ens.n == 0 {
        return Err(CheckError::Config("ensemble is empty".into()));
    }
    let sigma = analytic_gram(ens)?;
    let emp = ens.second_moments();
    let m = ens.m();
    let n = ens.n as f64;
    let underpowered = ens.n < MIN_POWERED_PATHS;
    let (mut within, mut tested, mut excluded) = (0usize, 0usize, 0usize);
    let mut max_z = 0.0f64;
    let mut max_se = 0.0f64;
    for i in 0..m {
        for j in i..m {
            if sigma[(i, i)] <= 0.0 || sigma[(j, j)] <= 0.0 {
                excluded += 1;
                continue;
            }
            let se = ((sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)].powi(2)) / n).sqrt();
            let z = (emp[(i, j)] - sigma[(i, j)]).abs() / se;
            tested += 1;
            max_z = max_z.max(z);
            max_se = max_se.max(se);
            if z <= tol_sigmas {
                within += 1;
            }
        }
    }
    let frac = if tested == 0 || underpowered { 1.0 } else { within as f64 / tested as f64 };
    let p = params(&[
        ("tol_sigmas", tol_sigmas),
        ("pairs_tested", tested as f64),
        ("pairs_excluded", excluded as f64),
        ("max_z", max_z),
    ]);
    let samples = Some(MonteCarloMeta {
        n: ens.n,
        seed: ens.seed,
        stderr: if underpowered { f64::INFINITY } else { max_se },
        underpowered,
    });
    Ok(VerificationReport::new(
        "empirical_cov",
        ens.spec,
        p,
        vec![Condition::at_least("fraction_within", frac, 0.95)],
        samples,
    ))
}

/// Compares the empirical covariances of two ensembles on the same grid.
/// A pair agrees when the difference is within `tol_sigmas` pooled
/// standard errors plus `allowance × max analytic variance`; at least 95%
/// must agree.
pub fn check_ensemble_agreement(
    x: &PathEnsemble,
    y: &PathEnsemble,
    tol_sigmas: f64,
    allowance: f64,
) -> Result<VerificationReport> {
    if x.grid != y.grid {
        return Err(CheckError::Config("ensembles live on different grids".into()));
    }
    let sigma = analytic_gram(x)?;
    let (ex, ey) = (x.second_moments(), y.second_moments());
    let m = x.m();
    let scale = (0..m).map(|i| sigma[(i, i)]).fold(0.0, f64::max);
    let (mut within, mut tested) = (0usize, 0usize);
    let mut z_sum = 0.0;
    for i in 0..m {
        for j in i..m {
            if sigma[(i, i)] <= 0.0 || sigma[(j, j)] <= 0.0 {
                continue;
            }
            let g = sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)].powi(2);
            let pooled = (g / x.n as f64 + g / y.n as f64).sqrt();
            let diff = (ex[(i, j)] - ey[(i, j)]).abs();
            tested += 1;
            z_sum += diff / pooled;
            if diff <= tol_sigmas * pooled + allowance * scale {
                within += 1;
            }
        }
    }
    let frac = if tested == 0 { 1.0 } else { within as f64 / tested as f64 };
    let p = params(&[
        ("tol_sigmas", tol_sigmas),
        ("allowance", allowance),
        ("pairs_tested", tested as f64),
        ("mean_abs_z", if tested > 0 { z_sum / tested as f64 } else { 0.0 }),
    ]);
    Ok(VerificationReport::new(
        "ensemble_agreement",
        x.spec,
        p,
        vec![Condition::at_least("fraction_within", frac, 0.95)],
        None,
    ))
}

/// Self-similarity of the kernel: `cov(cs, ct) = c^{2κ} cov(s, t)` on the
/// grid for each `c`, to `1e-10` relative.
pub fn check_self_similarity(spec: &FamilySpec, grid: &TimeGrid, c_values: &[f64]) -> Result<VerificationReport> {
    spec.check()?;
    let pts = grid.points();
    let power = 2.0 * spec.self_similarity_index();
    let mut worst = 0.0f64;
    for &c in c_values {
        let factor = c.powf(power);
        for (i, &s) in pts.iter().enumerate() {
            for &t in &pts[i..] {
                let base = kernels::cov(spec, s, t)?;
                let scaled = kernels::cov(spec, c * s, c * t)?;
                let scale = (kernels::cov(spec, c * s, c * s)? * kernels::cov(spec, c * t, c * t)?)
                    .abs()
                    .sqrt()
                    .max(scaled.abs());
                if scale > 0.0 {
                    worst = worst.max((scaled - factor * base).abs() / scale);
                }
            }
        }
    }
    let p = params(&[("exponent", power), ("grid_points", pts.len() as f64)]);
    Ok(VerificationReport::new(
        "self_similarity",
        *spec,
        p,
        vec![Condition::at_most("max_rel_defect", worst, 1e-10)],
        None,
    ))
}

/// Sign of the increment covariance on random ordered quadruples in
/// `[0, 10]` must match the sign of `b`.
pub fn check_increment_sign_law(a: f64, b: f64, count: usize, seed: u64) -> Result<VerificationReport> {
    let spec = FamilySpec::Wfbm { a, b };
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = || ((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0;
    let mut wrong = 0usize;
    for _ in 0..count {
        let mut xs = [uniform(), uniform(), uniform(), uniform()].map(|x| 10.0 * x);
        xs.sort_by(f64::total_cmp);
        let q = match IncrementQuadruple::new(xs[0], xs[1], xs[2], xs[3]) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let v = kernels::wfbm_incr_cov(a, b, &q)?;
        let ok = if b > 0.0 {
            v > 0.0
        } else if b < 0.0 {
            v < 0.0
        } else {
            v == 0.0
        };
        if !ok {
            wrong += 1;
        }
    }
    let p = params(&[("a", a), ("b", b), ("count", count as f64), ("seed", seed as f64)]);
    Ok(VerificationReport::new(
        "increment_sign_law",
        spec,
        p,
        vec![Condition::at_most("sign_violations", wrong as f64, 0.0)],
        None,
    ))
}
