//! Covariance kernels and increment moments for every process family, plus
//! the quadrature oracles that evaluate the defining integrals directly.
//!
//! Closed forms are used on the hot path:
//!
//! * weighted fBm, `s ≤ t`:
//!   `Q(s,t) = B(a+1,b+1) [t^{a+b+1} I_{s/t}(a+1,b+1) + s^{a+b+1}]`
//! * sub-/negative sub-fractional Bm:
//!   `K(s,t) = (2−h)(s^h + t^h − ½[(s+t)^h + |s−t|^h])`
//! * odd-part kernel: `K₀(s,t) = (s+t)^{h−2} − |s−t|^{h−2}`
//! * η: `R(s,t) = −(g(s) + g(t) − ½[g(s+t) + g(|s−t|)])`, `g(z) = z² log z`
//! * fBm: `½(s^{2H} + t^{2H} − |s−t|^{2H})`
//!
//! The `*_quad`, `*_double` and `*_triple` functions are independent
//! numerical routes used only for cross-checking.

use std::cell::Cell;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{self, adaptive_quad_endpoints, Endpoint, QuadRule, SpecfunError, Tol};

/// Slack used when testing parameters against the boundary of a valid
/// region, so points that lie on it analytically are not rejected because
/// of rounding in their construction.
pub const PARAM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("quadrature did not reach tolerance: value {value:e}, error estimate {error_estimate:e}")]
    Quadrature { value: f64, error_estimate: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<SpecfunError> for KernelError {
    fn from(e: SpecfunError) -> Self {
        match e {
            SpecfunError::Tolerance {
                value,
                error_estimate,
                ..
            } => KernelError::Quadrature {
                value,
                error_estimate,
            },
            SpecfunError::Domain(m) => KernelError::Domain(m),
            other => KernelError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Process family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Wfbm { a: f64, b: f64 },
    Sfbm { h: f64 },
    Nsfbm { h: f64 },
    OddBfbm { h: f64 },
    Eta,
    Fbm { hurst: f64 },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Wfbm { .. } => "wfbm",
            FamilySpec::Sfbm { .. } => "sfbm",
            FamilySpec::Nsfbm { .. } => "nsfbm",
            FamilySpec::OddBfbm { .. } => "odd_bfbm",
            FamilySpec::Eta => "eta",
            FamilySpec::Fbm { .. } => "fbm",
        }
    }

    /// `κ` in `X_{ct} =d c^κ X_t`.
    pub fn self_similarity_index(&self) -> f64 {
        match *self {
            FamilySpec::Wfbm { a, b } => 0.5 * (1.0 + a + b),
            FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => 0.5 * h,
            FamilySpec::OddBfbm { h } => 0.5 * (h - 2.0),
            FamilySpec::Eta => 1.0,
            FamilySpec::Fbm { hurst } => hurst,
        }
    }

    /// Parameter-domain check. `h = 2` is accepted for both sub-fractional
    /// families (the kernel vanishes identically) and `h = 4` for the
    /// negative one (rank-one kernel).
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            FamilySpec::Wfbm { a, b } => wfbm_params_valid(a, b),
            FamilySpec::Sfbm { h } => h.is_finite() && h > 0.0 && h <= 2.0,
            FamilySpec::Nsfbm { h } => h.is_finite() && (2.0..=4.0).contains(&h),
            FamilySpec::OddBfbm { h } => h.is_finite() && h > 2.0 && h < 4.0,
            FamilySpec::Eta => true,
            FamilySpec::Fbm { hurst } => hurst.is_finite() && hurst > 0.0 && hurst < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(KernelError::Parameter(format!("{self:?} is outside the family's valid range")))
        }
    }
}

/// `a > −1, −1 < b ≤ 1, |b| ≤ 1 + a`, with [`PARAM_EPS`] slack on the
/// closed boundaries.
pub fn wfbm_params_valid(a: f64, b: f64) -> bool {
    a.is_finite()
        && b.is_finite()
        && a > -1.0
        && b > -1.0
        && b <= 1.0 + PARAM_EPS
        && b.abs() <= 1.0 + a + PARAM_EPS
}

/// Two non-overlapping intervals `[r, v]` and `[s, t]`, `0 ≤ r < v ≤ s < t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementQuadruple {
    pub r: f64,
    pub v: f64,
    pub s: f64,
    pub t: f64,
}

impl IncrementQuadruple {
    pub fn new(r: f64, v: f64, s: f64, t: f64) -> Result<Self> {
        if !(r.is_finite() && v.is_finite() && s.is_finite() && t.is_finite()) {
            return Err(KernelError::Domain("non-finite time in quadruple".into()));
        }
        if !(0.0 <= r && r < v && v <= s && s < t) {
            return Err(KernelError::Ordering(format!(
                "quadruple must satisfy 0 <= r < v <= s < t (got {r}, {v}, {s}, {t})"
            )));
        }
        Ok(IncrementQuadruple { r, v, s, t })
    }

    /// Same quadruple with the second interval moved by `shift`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        IncrementQuadruple::new(self.r, self.v, self.s + shift, self.t + shift)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(KernelError::Domain(format!("time must be finite and >= 0 (got {t})")))
    }
}

/// Covariance `E X_s X_t` for the given family.
pub fn cov(spec: &FamilySpec, s: f64, t: f64) -> Result<f64> {
    spec.check()?;
    check_time(s)?;
    check_time(t)?;
    cov_unchecked(spec, s, t)
}

/// [`cov`] without the parameter and time checks.
pub fn cov_unchecked(spec: &FamilySpec, s: f64, t: f64) -> Result<f64> {
    Ok(match *spec {
        FamilySpec::Wfbm { a, b } => wfbm_kernel(a, b, s, t)?,
        FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => subfractional_kernel(h, s, t),
        FamilySpec::OddBfbm { h } => odd_kernel(h, s, t),
        FamilySpec::Eta => eta_kernel(s, t),
        FamilySpec::Fbm { hurst } => fbm_kernel(hurst, s, t),
    })
}

/// Closed form of `∫₀^{s∧t} u^a [(t−u)^b + (s−u)^b] du` for any `a, b > −1`,
/// whether or not the kernel is positive-definite there.
pub fn wfbm_kernel(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if lo <= 0.0 {
        return Ok(0.0);
    }
    let (p, q) = (a + 1.0, b + 1.0);
    let c = a + b + 1.0;
    let bb = specfun::beta(p, q)?;
    let i = specfun::reg_inc_beta(lo / hi, p, q)?;
    Ok(bb * (hi.powf(c) * i + lo.powf(c)))
}

/// `(2−h)(s^h + t^h − ½[(s+t)^h + |s−t|^h])` for any `h > 0`.
pub fn subfractional_kernel(h: f64, s: f64, t: f64) -> f64 {
    (2.0 - h) * (s.powf(h) + t.powf(h) - 0.5 * ((s + t).powf(h) + (s - t).abs().powf(h)))
}

pub fn odd_kernel(h: f64, s: f64, t: f64) -> f64 {
    let p = h - 2.0;
    (s + t).powf(p) - (s - t).abs().powf(p)
}

fn xlogx2(z: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z * z * z.ln()
    }
}

pub fn eta_kernel(s: f64, t: f64) -> f64 {
    if s == 0.0 || t == 0.0 {
        return 0.0;
    }
    -(xlogx2(s) + xlogx2(t) - 0.5 * (xlogx2(s + t) + xlogx2((s - t).abs())))
}

pub fn fbm_kernel(hurst: f64, s: f64, t: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (s.powf(p) + t.powf(p) - (s - t).abs().powf(p))
}

fn check_wfbm(a: f64, b: f64) -> Result<()> {
    FamilySpec::Wfbm { a, b }.check()
}

const ORACLE_TOL: Tol = Tol { abs: 0.0, rel: 1e-12 };

/// `∫₀^{lo} u^a (gap + lo − u)^b du`, split at the midpoint so each half
/// has at most one singular endpoint written in local coordinates.
fn power_pair_integral(a: f64, b: f64, lo: f64, gap: f64, tol: Tol) -> Result<f64> {
    let half = 0.5 * lo;
    let left = adaptive_quad_endpoints(
        |u: f64| u.powf(a) * (gap + lo - u).powf(b),
        0.0,
        half,
        Endpoint::Power(a),
        Endpoint::Smooth,
        tol,
    )?;
    let right = adaptive_quad_endpoints(
        |w: f64| (lo - w).powf(a) * (gap + w).powf(b),
        0.0,
        half,
        Endpoint::Power(b),
        Endpoint::Smooth,
        tol,
    )?;
    Ok(left.value + right.value)
}

/// Direct adaptive quadrature of `∫₀^{s∧t} u^a [(t−u)^b + (s−u)^b] du`.
pub fn wfbm_cov_quad(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    check_wfbm(a, b)?;
    check_time(s)?;
    check_time(t)?;
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if lo == 0.0 {
        return Ok(0.0);
    }
    Ok(power_pair_integral(a, b, lo, hi - lo, ORACLE_TOL)? + power_pair_integral(a, b, lo, 0.0, ORACLE_TOL)?)
}

/// Double-integral route `b ∬_{[0,s]×[0,t]} (u∧r)^a |u−r|^{b−1} dr du`,
/// valid for `0 < b ≤ 1`.
///
/// The part of the inner integral with `r > u` is the elementary
/// `u^a (t−u)^b / b`; the rest is integrated numerically in both variables.
pub fn wfbm_cov_double(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    if !(b > 0.0 && b <= 1.0) {
        return Err(KernelError::Domain(format!(
            "double-integral form needs 0 < b <= 1 (got b = {b})"
        )));
    }
    check_wfbm(a, b)?;
    check_time(s)?;
    check_time(t)?;
    if s == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let failure: Cell<Option<KernelError>> = Cell::new(None);
    let inner = |u: f64| -> f64 {
        let mm = u.min(t);
        let gap = u - mm;
        let half = 0.5 * mm;
        let left = adaptive_quad_endpoints(
            |r: f64| r.powf(a) * (u - r).powf(b - 1.0),
            0.0,
            half,
            Endpoint::Power(a),
            Endpoint::Smooth,
            ORACLE_TOL,
        );
        let right = adaptive_quad_endpoints(
            |w: f64| (mm - w).powf(a) * (gap + w).powf(b - 1.0),
            0.0,
            half,
            Endpoint::Power(b - 1.0),
            Endpoint::Smooth,
            ORACLE_TOL,
        );
        match (left, right) {
            (Ok(l), Ok(r)) => l.value + r.value,
            (Err(e), _) | (_, Err(e)) => {
                failure.set(Some(e.into()));
                f64::NAN
            }
        }
    };
    let outer = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let upper = if u < t { u.powf(a) * (t - u).powf(b) } else { 0.0 };
        b * inner(u) + upper
    };
    let tol = Tol::rel(1e-11);
    let value = if s <= t {
        let right = if s == t { Endpoint::Power(b) } else { Endpoint::Smooth };
        adaptive_quad_endpoints(outer, 0.0, s, Endpoint::Power(a), right, tol)
            .map(|r| r.value)
    } else {
        adaptive_quad_endpoints(outer, 0.0, t, Endpoint::Power(a), Endpoint::Power(b), tol)
            .and_then(|l| {
                adaptive_quad_endpoints(outer, t, s, Endpoint::Power(b), Endpoint::Smooth, tol)
                    .map(|r| l.value + r.value)
            })
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(value?)
}

/// `E(ξ_t − ξ_s)² = 2 ∫ₛᵗ u^a (t−u)^b du`, evaluated as
/// `2 t^{a+b+1} B(a+1,b+1) I_{1−s/t}(b+1, a+1)`.
///
/// Only integrability (`a, b > −1`) is required, not positive-definiteness.
pub fn wfbm_incr_var(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    if !(a > -1.0 && b > -1.0) {
        return Err(KernelError::Parameter(format!(
            "increment variance needs a, b > -1 (got a = {a}, b = {b})"
        )));
    }
    check_time(s)?;
    check_time(t)?;
    if s > t {
        return Err(KernelError::Ordering(format!("need s <= t (got s = {s}, t = {t})")));
    }
    if s == t {
        return Ok(0.0);
    }
    let (p, q) = (a + 1.0, b + 1.0);
    let bb = specfun::beta(p, q)?;
    let i = specfun::reg_inc_beta((t - s) / t, q, p)?;
    Ok(2.0 * t.powf(a + b + 1.0) * bb * i)
}

// ∫₀^x u^a (c − u)^b du for 0 <= x <= c
fn wfbm_partial(a: f64, b: f64, x: f64, c: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let (p, q) = (a + 1.0, b + 1.0);
    let i = specfun::reg_inc_beta((x / c).min(1.0), p, q)?;
    Ok(c.powf(a + b + 1.0) * specfun::beta(p, q)? * i)
}

/// `E[(ξ_t − ξ_s)(ξ_v − ξ_r)] = ∫ᵣᵛ u^a [(t−u)^b − (s−u)^b] du`.
pub fn wfbm_incr_cov(a: f64, b: f64, q: &IncrementQuadruple) -> Result<f64> {
    if !(a > -1.0 && b > -1.0) {
        return Err(KernelError::Parameter(format!(
            "increment covariance needs a, b > -1 (got a = {a}, b = {b})"
        )));
    }
    let q = IncrementQuadruple::new(q.r, q.v, q.s, q.t)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    let gap = q.s - q.v;
    let d = q.t - q.s;
    if gap > 0.0 && gap >= d {
        // distant intervals: integrate (s−u)^b [(1 + d/(s−u))^b − 1] directly
        let left = if q.r == 0.0 { Endpoint::Power(a) } else { Endpoint::Smooth };
        let res = adaptive_quad_endpoints(
            |u: f64| {
                let w = q.s - u;
                u.powf(a) * w.powf(b) * (b * (d / w).ln_1p()).exp_m1()
            },
            q.r,
            q.v,
            left,
            Endpoint::Smooth,
            ORACLE_TOL,
        )?;
        return Ok(res.value);
    }
    let far = wfbm_partial(a, b, q.v, q.t)? - wfbm_partial(a, b, q.r, q.t)?;
    let near = wfbm_partial(a, b, q.v, q.s)? - wfbm_partial(a, b, q.r, q.s)?;
    Ok(far - near)
}

fn legendre12() -> &'static QuadRule {
    static RULE: OnceLock<QuadRule> = OnceLock::new();
    RULE.get_or_init(|| specfun::gauss_legendre(12))
}

/// Mixed second difference `g(A+d₁+d₂) − g(A+d₁) − g(A+d₂) + g(A)`.
///
/// Far from the origin it is evaluated as `∫₀^{d₁}∫₀^{d₂} g''(A+x+y)`,
/// which avoids the cancellation of the four-term form.
fn mixed_second_difference<G, G2>(g: G, g2: G2, base: f64, d1: f64, d2: f64) -> f64
where
    G: Fn(f64) -> f64,
    G2: Fn(f64) -> f64,
{
    if base > 2.0 * (d1 + d2) {
        let rule = legendre12();
        let mut acc = 0.0;
        for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
            for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
                acc += wx * wy * g2(base + d1 * x + d2 * y);
            }
        }
        acc * d1 * d2
    } else {
        g(base + d1 + d2) - g(base + d1) - g(base + d2) + g(base)
    }
}

fn power_second_difference(p: f64, base: f64, d1: f64, d2: f64) -> f64 {
    mixed_second_difference(
        |z: f64| z.powf(p),
        |z: f64| p * (p - 1.0) * z.powf(p - 2.0),
        base,
        d1,
        d2,
    )
}

fn xlogx2_second_difference(base: f64, d1: f64, d2: f64) -> f64 {
    mixed_second_difference(xlogx2, |z: f64| 2.0 * z.ln() + 3.0, base, d1, d2)
}

/// Covariance of the increments over `[r, v]` and `[s, t]`.
///
/// Written as differences of mixed second differences so that distant
/// intervals keep full relative precision.
pub fn incr_cov(spec: &FamilySpec, q: &IncrementQuadruple) -> Result<f64> {
    spec.check()?;
    let q = IncrementQuadruple::new(q.r, q.v, q.s, q.t)?;
    let (d1, d2) = (q.t - q.s, q.v - q.r);
    let sum_base = q.r + q.s;
    let gap_base = q.s - q.v;
    Ok(match *spec {
        FamilySpec::Wfbm { a, b } => wfbm_incr_cov(a, b, &q)?,
        FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => {
            -(2.0 - h) / 2.0
                * (power_second_difference(h, sum_base, d1, d2)
                    - power_second_difference(h, gap_base, d1, d2))
        }
        FamilySpec::OddBfbm { h } => {
            power_second_difference(h - 2.0, sum_base, d1, d2)
                + power_second_difference(h - 2.0, gap_base, d1, d2)
        }
        FamilySpec::Eta => {
            0.5 * (xlogx2_second_difference(sum_base, d1, d2)
                - xlogx2_second_difference(gap_base, d1, d2))
        }
        FamilySpec::Fbm { hurst } => 0.5 * power_second_difference(2.0 * hurst, gap_base, d1, d2),
    })
}

/// `E(X_t − X_s)²` for `s ≤ t`.
pub fn incr_var(spec: &FamilySpec, s: f64, t: f64) -> Result<f64> {
    spec.check()?;
    check_time(s)?;
    check_time(t)?;
    if s > t {
        return Err(KernelError::Ordering(format!("need s <= t (got s = {s}, t = {t})")));
    }
    if s == t {
        return Ok(0.0);
    }
    Ok(match *spec {
        FamilySpec::Wfbm { a, b } => wfbm_incr_var(a, b, s, t)?,
        FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => {
            (2.0 - h)
                * ((s + t).powf(h) + (t - s).powf(h) - 2f64.powf(h - 1.0) * (t.powf(h) + s.powf(h)))
        }
        FamilySpec::OddBfbm { h } => {
            let p = h - 2.0;
            (2.0 * t).powf(p) + (2.0 * s).powf(p) - 2.0 * (s + t).powf(p) + 2.0 * (t - s).powf(p)
        }
        FamilySpec::Eta => eta_incr_var(s, t)?,
        FamilySpec::Fbm { hurst } => (t - s).powf(2.0 * hurst),
    })
}

/// `h(h−1)(h−2)² ∫₀^{s∧t} ∫ᵣˢ ∫ᵣᵗ (u+u′−2r)^{h−3} du′ du dr` for `2 < h < 4`.
///
/// The `u′` integral is taken in closed form, the other two numerically.
pub fn nsfbm_cov_triple(h: f64, s: f64, t: f64) -> Result<f64> {
    if !(h > 2.0 && h < 4.0) {
        return Err(KernelError::Domain(format!("triple-integral form needs 2 < h < 4 (got {h})")));
    }
    check_time(s)?;
    check_time(t)?;
    let m = s.min(t);
    if m == 0.0 {
        return Ok(0.0);
    }
    let p = h - 2.0;
    let failure: Cell<Option<KernelError>> = Cell::new(None);
    let outer = |r: f64| -> f64 {
        let len = s - r;
        if len <= 0.0 {
            return 0.0;
        }
        let shift = t - r;
        match adaptive_quad_endpoints(
            |w: f64| (w + shift).powf(p) - w.powf(p),
            0.0,
            len,
            Endpoint::Power(p),
            Endpoint::Smooth,
            Tol { abs: 1e-14 * len * (s + t).powf(p), rel: 1e-13 },
        ) {
            Ok(v) => v.value,
            Err(e) => {
                failure.set(Some(e.into()));
                f64::NAN
            }
        }
    };
    let res = adaptive_quad_endpoints(outer, 0.0, m, Endpoint::Smooth, Endpoint::Power(p), Tol::rel(1e-10));
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(h * (h - 1.0) * p * res?.value)
}

/// `2 ∫₀^{s∧t} ∫ᵣˢ ∫ᵣᵗ (u+u′−2r)^{−1} du′ du dr`, with the `u′` integral in
/// closed form.
pub fn eta_cov_triple(s: f64, t: f64) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    let m = s.min(t);
    if m == 0.0 {
        return Ok(0.0);
    }
    let failure: Cell<Option<KernelError>> = Cell::new(None);
    let outer = |r: f64| -> f64 {
        let len = s - r;
        if len <= 0.0 {
            return 0.0;
        }
        let shift = t - r;
        match adaptive_quad_endpoints(
            |w: f64| if w > 0.0 { (w + shift).ln() - w.ln() } else { 0.0 },
            0.0,
            len,
            Endpoint::Log,
            Endpoint::Smooth,
            Tol { abs: 1e-14 * len, rel: 1e-13 },
        ) {
            Ok(v) => v.value,
            Err(e) => {
                failure.set(Some(e.into()));
                f64::NAN
            }
        }
    };
    let res = adaptive_quad_endpoints(outer, 0.0, m, Endpoint::Smooth, Endpoint::Log, Tol::rel(1e-11));
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(2.0 * res?.value)
}

fn legendre24() -> &'static QuadRule {
    static RULE: OnceLock<QuadRule> = OnceLock::new();
    RULE.get_or_init(|| specfun::gauss_legendre(24))
}

/// `∫₀^{t−s} ∫₀^u [log(2s+u+u′) − log(u−u′)] du′ du`.
///
/// This double integral is one half of `E(η_t − η_s)²`; see
/// [`eta_incr_var`].
pub fn eta_incr_integral(s: f64, t: f64) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    if s > t {
        return Err(KernelError::Ordering(format!("need s <= t (got s = {s}, t = {t})")));
    }
    if s == t {
        return Ok(0.0);
    }
    let rule = legendre24();
    let integrand = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let c = 2.0 * s + u;
        let smooth: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * (c + u * x).ln())
            .sum::<f64>()
            * u;
        smooth - (u * u.ln() - u)
    };
    let res = adaptive_quad_endpoints(integrand, 0.0, t - s, Endpoint::Log, Endpoint::Smooth, ORACLE_TOL)?;
    Ok(res.value)
}

/// `E(η_t − η_s)² = R(t,t) + R(s,s) − 2R(s,t)`, computed as twice
/// [`eta_incr_integral`] to avoid the cancellation of the covariance form.
pub fn eta_incr_var(s: f64, t: f64) -> Result<f64> {
    Ok(2.0 * eta_incr_integral(s, t)?)
}
