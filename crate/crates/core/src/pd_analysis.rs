//! Parameter validity, Gram matrices, numerical PSD certificates and
//! explicit covariance-inequality violations for invalid weighted-fBm
//! parameters.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::kernels::{self, FamilySpec, KernelError, PARAM_EPS};
use crate::specfun::{self, adaptive_quad_endpoints, Endpoint, Tol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("parameters rejected ({regime:?}): {spec:?}")]
    InvalidSpec {
        spec: FamilySpec,
        regime: Regime,
    },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("no violation found scanning {scanned}")]
    WitnessNotFound { scanned: String },
    #[error("parameters (a = {a}, b = {b}) are valid; there is nothing to witness")]
    NotInvalid { a: f64, b: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

impl From<specfun::SpecfunError> for PdError {
    fn from(e: specfun::SpecfunError) -> Self {
        PdError::Kernel(e.into())
    }
}

pub type Result<T> = std::result::Result<T, PdError>;

/// Strictly increasing, finite, nonnegative time points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        for (i, &p) in points.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(PdError::Grid(format!("point {i} = {p} is not a finite time >= 0")));
            }
            if i > 0 && p <= points[i - 1] {
                return Err(PdError::Grid(format!(
                    "points must be strictly increasing (point {i} = {p} after {})",
                    points[i - 1]
                )));
            }
        }
        Ok(TimeGrid { points })
    }

    /// `count` equally spaced points from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Self> {
        match count {
            0 => TimeGrid::new(Vec::new()),
            1 => TimeGrid::new(vec![start]),
            _ => {
                let step = (stop - start) / (count - 1) as f64;
                let mut pts: Vec<f64> = (0..count).map(|i| start + step * i as f64).collect();
                pts[count - 1] = stop;
                TimeGrid::new(pts)
            }
        }
    }

    /// Sort, drop duplicates and build a grid.
    pub fn from_unsorted(mut points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|p| p.is_nan()) {
            return Err(PdError::Grid("NaN time point".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        TimeGrid::new(points)
    }

    /// This grid with `extra` points merged in.
    pub fn merged(&self, extra: &[f64]) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(extra);
        TimeGrid::from_unsorted(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = PdError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        TimeGrid::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub spec: FamilySpec,
    pub grid: TimeGrid,
    pub entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Valid,
    Invalid,
}

/// Which branch of the validity argument decides the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// valid, `b ≤ 0`
    #[serde(rename = "B_NONPOS")]
    BNonpos,
    /// valid, `b > 0`
    #[serde(rename = "B_POS")]
    BPos,
    /// `1 + a + b < 0`: violation as `t → 0`
    #[serde(rename = "SUM_NEG")]
    SumNeg,
    /// `b > 1 + a`: violation as `t → ∞`
    #[serde(rename = "B_GT_APLUS1")]
    BGtAplus1,
    /// `1 < b ≤ 1 + a`: violation at `t = 1 + ε`
    #[serde(rename = "B_GT1")]
    BGt1,
    /// decided by the admissible range of `h` (or `H`)
    #[serde(rename = "H_RANGE")]
    HRange,
    /// `a ≤ −1` or `b ≤ −1`: the defining integral diverges
    #[serde(rename = "NON_INTEGRABLE")]
    NonIntegrable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degeneracy {
    /// `b = 1`, `a ≥ 0`: admitted by the validity theorem but excluded
    /// from the wfBm definition
    #[serde(rename = "DEGENERATE_B1")]
    B1,
    /// `h = 2`: the kernel vanishes identically
    #[serde(rename = "DEGENERATE_H2")]
    H2,
    /// `h = 4`: rank-one kernel `12 s² t²`
    #[serde(rename = "DEGENERATE_H4")]
    H4,
}

/// A pair `(s, t)` with `Q(s,t)² > Q(s,s) Q(t,t)`.
///
/// For the `t = 1 + ε` branch `ε` is kept separately, since it can be far
/// below the spacing of doubles near 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub s: f64,
    pub t: f64,
    pub eps: Option<f64>,
    /// `Q(s,t)² − Q(s,s) Q(t,t)`
    pub defect: f64,
    /// `Q(s,t)² / (Q(s,s) Q(t,t)) − 1`
    pub normalized_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub status: Status,
    pub regime: Regime,
    pub degenerate: Option<Degeneracy>,
    pub witness: Option<Witness>,
}

impl ValidityVerdict {
    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }

    fn valid(regime: Regime, degenerate: Option<Degeneracy>) -> Self {
        ValidityVerdict {
            status: Status::Valid,
            regime,
            degenerate,
            witness: None,
        }
    }

    fn invalid(regime: Regime) -> Self {
        ValidityVerdict {
            status: Status::Invalid,
            regime,
            degenerate: None,
            witness: None,
        }
    }
}

fn near(x: f64, target: f64) -> bool {
    (x - target).abs() <= PARAM_EPS
}

/// Regime of a raw `(a, b)` pair, without searching for a witness.
pub fn wfbm_regime(a: f64, b: f64) -> (Status, Regime) {
    if !(a.is_finite() && b.is_finite()) || a <= -1.0 || b <= -1.0 {
        return (Status::Invalid, Regime::NonIntegrable);
    }
    if 1.0 + a + b < -PARAM_EPS {
        (Status::Invalid, Regime::SumNeg)
    } else if b > 1.0 + a + PARAM_EPS {
        (Status::Invalid, Regime::BGtAplus1)
    } else if b > 1.0 + PARAM_EPS {
        (Status::Invalid, Regime::BGt1)
    } else if b <= 0.0 {
        (Status::Valid, Regime::BNonpos)
    } else {
        (Status::Valid, Regime::BPos)
    }
}

/// Validity verdict for raw parameters. Invalid weighted-fBm parameters
/// with `a, b > −1` carry a covariance-inequality witness.
pub fn classify(spec: &FamilySpec) -> ValidityVerdict {
    match *spec {
        FamilySpec::Wfbm { a, b } => {
            let (status, regime) = wfbm_regime(a, b);
            match status {
                Status::Valid => {
                    let degenerate = (near(b, 1.0) && a >= 0.0).then_some(Degeneracy::B1);
                    ValidityVerdict::valid(regime, degenerate)
                }
                Status::Invalid => {
                    let mut v = ValidityVerdict::invalid(regime);
                    if regime != Regime::NonIntegrable {
                        v.witness = violation_witness(a, b).ok();
                    }
                    v
                }
            }
        }
        FamilySpec::Sfbm { h } | FamilySpec::Nsfbm { h } => {
            if spec.check().is_ok() {
                let degenerate = if h == 2.0 {
                    Some(Degeneracy::H2)
                } else if h == 4.0 {
                    Some(Degeneracy::H4)
                } else {
                    None
                };
                ValidityVerdict::valid(Regime::HRange, degenerate)
            } else {
                ValidityVerdict::invalid(Regime::HRange)
            }
        }
        FamilySpec::OddBfbm { .. } | FamilySpec::Fbm { .. } | FamilySpec::Eta => {
            if spec.check().is_ok() {
                ValidityVerdict::valid(Regime::HRange, None)
            } else {
                ValidityVerdict::invalid(Regime::HRange)
            }
        }
    }
}

/// Gram matrix of a valid spec on a nonempty grid. Rows are computed in
/// parallel; the result does not depend on the schedule.
pub fn gram(spec: &FamilySpec, grid: &TimeGrid) -> Result<GramMatrix> {
    let verdict = classify_quick(spec);
    if !verdict.is_valid() {
        return Err(PdError::InvalidSpec {
            spec: *spec,
            regime: verdict.regime,
        });
    }
    if grid.is_empty() {
        return Err(PdError::Grid("grid is empty".into()));
    }
    gram_unchecked(spec, grid)
}

/// Validity alone, skipping the witness search.
pub fn is_valid(spec: &FamilySpec) -> bool {
    classify_quick(spec).is_valid()
}

// classify without the witness search
fn classify_quick(spec: &FamilySpec) -> ValidityVerdict {
    match *spec {
        FamilySpec::Wfbm { a, b } => {
            let (status, regime) = wfbm_regime(a, b);
            ValidityVerdict {
                status,
                regime,
                degenerate: None,
                witness: None,
            }
        }
        _ => classify(spec),
    }
}

/// Kernel matrix on the grid whether or not the parameters are valid, as
/// long as the kernel formula itself is defined.
pub fn gram_unchecked(spec: &FamilySpec, grid: &TimeGrid) -> Result<GramMatrix> {
    let pts = grid.points();
    let m = pts.len();
    let rows: Vec<std::result::Result<Vec<f64>, KernelError>> = exec::map_indices(m, |i| {
        (i..m)
            .map(|j| kernels::cov_unchecked(spec, pts[i], pts[j]))
            .collect()
    });
    let mut entries = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (k, v) in row?.into_iter().enumerate() {
            let j = i + k;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        spec: *spec,
        grid: grid.clone(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdCertificate {
    /// Smallest eigenvalue of the matrix itself.
    pub min_eigenvalue: f64,
    /// Smallest eigenvalue after scaling to unit diagonal.
    pub equilibrated_min_eigenvalue: f64,
    pub trace: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Numerical PSD test.
///
/// Passes iff `λ_min ≥ −tol·trace` and the unit-diagonal rescaling has
/// `λ_min ≥ −tol·m`. The second condition catches indefinite 2×2 blocks
/// whose diagonal entries differ by many orders of magnitude, which the
/// trace-relative test alone cannot see.
pub fn psd_certificate(gm: &GramMatrix, tol: f64) -> Result<PsdCertificate> {
    psd_certificate_matrix(&gm.entries, tol)
}

pub fn psd_certificate_matrix(entries: &DMatrix<f64>, tol: f64) -> Result<PsdCertificate> {
    let m = entries.nrows();
    for i in 0..m {
        for j in 0..m {
            if !entries[(i, j)].is_finite() {
                return Err(PdError::NonFinite { row: i, col: j });
            }
        }
    }
    if m == 0 {
        return Ok(PsdCertificate {
            min_eigenvalue: 0.0,
            equilibrated_min_eigenvalue: 0.0,
            trace: 0.0,
            tol,
            pass: true,
        });
    }
    let trace = entries.trace();
    let min_eigenvalue = min_eigen(entries.clone());
    let scale: Vec<f64> = (0..m)
        .map(|i| {
            let d = entries[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let equilibrated = DMatrix::from_fn(m, m, |i, j| entries[(i, j)] * scale[i] * scale[j]);
    let equilibrated_min_eigenvalue = min_eigen(equilibrated);
    let pass = min_eigenvalue >= -tol * trace.abs() && equilibrated_min_eigenvalue >= -tol * m as f64;
    Ok(PsdCertificate {
        min_eigenvalue,
        equilibrated_min_eigenvalue,
        trace,
        tol,
        pass,
    })
}

fn min_eigen(mat: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

const SWEEP_MAX_DOUBLINGS: i32 = 1100;
/// Sweeps stop at the first point whose normalized defect exceeds this.
const CLEAR_DEFECT: f64 = 0.05;

/// `(ρ² − 1, Q(1,t)² − Q(1,1)Q(t,t))` with `ρ² = Q(1,t)²/(Q(1,1)Q(t,t))`,
/// computed without forming the products.
fn pair_defect(a: f64, b: f64, t: f64) -> Option<(f64, f64)> {
    let q11 = kernels::wfbm_kernel(a, b, 1.0, 1.0).ok()?;
    let qtt = kernels::wfbm_kernel(a, b, t, t).ok()?;
    let q1t = kernels::wfbm_kernel(a, b, 1.0, t).ok()?;
    if !(q11.is_finite() && qtt.is_finite() && q1t.is_finite()) || q11 <= 0.0 || qtt <= 0.0 {
        return None;
    }
    let rho2 = (q1t / q11) * (q1t / qtt);
    if !rho2.is_finite() {
        return None;
    }
    Some((rho2 - 1.0, q11 * qtt * (rho2 - 1.0)))
}

fn geometric_sweep(a: f64, b: f64, upward: bool) -> Result<Witness> {
    let mut best: Option<Witness> = None;
    for k in 1..=SWEEP_MAX_DOUBLINGS {
        let t = if upward { 2f64.powi(k) } else { 2f64.powi(-k) };
        if t == 0.0 || !t.is_finite() {
            break;
        }
        let Some((norm, defect)) = pair_defect(a, b, t) else {
            continue;
        };
        if norm > 0.0 && defect > 0.0 && defect.is_finite() && best.is_none_or(|w| norm > w.normalized_defect) {
            best = Some(Witness {
                s: 1.0,
                t,
                eps: None,
                defect,
                normalized_defect: norm,
            });
        }
        if best.is_some_and(|w| w.normalized_defect > CLEAR_DEFECT) {
            break;
        }
    }
    best.ok_or_else(|| PdError::WitnessNotFound {
        scanned: if upward {
            format!("t = 2^1 .. 2^{SWEEP_MAX_DOUBLINGS}")
        } else {
            format!("t = 2^-1 .. 2^-{SWEEP_MAX_DOUBLINGS}")
        },
    })
}

/// `(w+ε)^b − w^b` without cancellation.
fn power_gap(w: f64, eps: f64, b: f64) -> f64 {
    if w == 0.0 {
        eps.powf(b)
    } else {
        w.powf(b) * (b * (eps / w).ln_1p()).exp_m1()
    }
}

/// Normalized and absolute defect of the pair `(1, 1+ε)`.
///
/// With `X = ξ₁`, `D = ξ_{1+ε} − ξ₁` the 2×2 determinant is
/// `Var X · Var D − Cov(X,D)²`, and each factor is integrated directly:
/// `Cov(X,D) = ∫₀¹ (1−w)^a [(w+ε)^b − w^b] dw` and
/// `Var D = 2ε^{b+1} ∫₀¹ (1+εy)^a (1−y)^b dy`.
fn near_diagonal_defect(a: f64, b: f64, eps: f64) -> Result<(f64, f64)> {
    let tol = Tol::rel(1e-12);
    let vx = 2.0 * specfun::beta(a + 1.0, b + 1.0)?;
    let split = (64.0 * eps).min(0.5);
    let f = |w: f64| (1.0 - w).powf(a) * power_gap(w, eps, b);
    let c = adaptive_quad_endpoints(f, 0.0, split, Endpoint::Smooth, Endpoint::Smooth, tol)?.value
        + adaptive_quad_endpoints(f, split, 1.0, Endpoint::Smooth, Endpoint::Power(a), tol)?.value;
    let j = adaptive_quad_endpoints(
        |y: f64| (1.0 + eps * y).powf(a) * (1.0 - y).powf(b),
        0.0,
        1.0,
        Endpoint::Smooth,
        Endpoint::Power(b),
        tol,
    )?
    .value;
    // Var D / ε² = 2 ε^{b−1} J
    let vd_over_eps2 = 2.0 * eps.powf(b - 1.0) * j;
    let c_over_eps = c / eps;
    let norm = (c_over_eps / vx) * (c_over_eps / vd_over_eps2) - 1.0;
    let defect = c * c - vx * vd_over_eps2 * eps * eps;
    Ok((norm, defect))
}

fn epsilon_sweep(a: f64, b: f64) -> Result<Witness> {
    let mut best: Option<Witness> = None;
    let exponents = (1..=60).chain((70..=1000).step_by(10));
    for k in exponents {
        let eps = 2f64.powi(-k);
        let (norm, defect) = near_diagonal_defect(a, b, eps)?;
        if norm > 0.0 && defect > 0.0 && best.is_none_or(|w| norm > w.normalized_defect) {
            best = Some(Witness {
                s: 1.0,
                t: 1.0 + eps,
                eps: Some(eps),
                defect,
                normalized_defect: norm,
            });
        }
        // the normalized defect grows like ε^{1−b}; stop once it is clear
        if best.is_some_and(|w| w.normalized_defect > CLEAR_DEFECT) {
            break;
        }
    }
    best.ok_or_else(|| PdError::WitnessNotFound {
        scanned: "eps = 2^-1 .. 2^-1000".into(),
    })
}

/// Pair `(1, t)` violating `Q(1,t)² ≤ Q(1,1) Q(t,t)` for invalid `(a, b)`.
///
/// The direction of the search follows the regime: `t → 0` when
/// `1 + a + b < 0`, `t → ∞` when `b > 1 + a`, `t = 1 + ε` when
/// `1 < b ≤ 1 + a`. The first scanned point with normalized defect above
/// `0.05` is returned, or the largest one if none gets there.
pub fn violation_witness(a: f64, b: f64) -> Result<Witness> {
    match wfbm_regime(a, b) {
        (Status::Valid, _) => Err(PdError::NotInvalid { a, b }),
        (_, Regime::SumNeg) => geometric_sweep(a, b, false),
        (_, Regime::BGtAplus1) => geometric_sweep(a, b, true),
        (_, Regime::BGt1) => epsilon_sweep(a, b),
        (_, regime) => Err(PdError::InvalidSpec {
            spec: FamilySpec::Wfbm { a, b },
            regime,
        }),
    }
}

/// Time points whose Gram matrix is numerically indefinite for invalid
/// `(a, b)`.
///
/// For the `t → 0` and `t → ∞` regimes this is the witness pair. In the
/// `1 < b ≤ 1 + a` regime the pair `(1, 1+ε)` is only indefinite far below
/// double resolution, so a cluster `{1, 1+δ, 1+2δ}` is used instead: the
/// second difference `ξ_{1+2δ} − 2ξ_{1+δ} + ξ₁` gets a negative variance at
/// moderate `δ`. The `δ` giving the most negative equilibrated eigenvalue
/// over `2^-1 .. 2^-20` is chosen.
pub fn witness_grid(a: f64, b: f64) -> Result<Vec<f64>> {
    match wfbm_regime(a, b) {
        (_, Regime::BGt1) => {
            let spec = FamilySpec::Wfbm { a, b };
            let mut best: Option<(f64, f64)> = None;
            for k in 1..=20 {
                let d = 2f64.powi(-k);
                let grid = TimeGrid::new(vec![1.0, 1.0 + d, 1.0 + 2.0 * d])?;
                let gm = gram_unchecked(&spec, &grid)?;
                let cert = psd_certificate(&gm, 0.0)?;
                if best.is_none_or(|(_, e)| cert.equilibrated_min_eigenvalue < e) {
                    best = Some((d, cert.equilibrated_min_eigenvalue));
                }
            }
            let (d, _) = best.expect("sweep is nonempty");
            Ok(vec![1.0, 1.0 + d, 1.0 + 2.0 * d])
        }
        _ => {
            let w = violation_witness(a, b)?;
            let mut pts = vec![w.s, w.t];
            pts.sort_by(f64::total_cmp);
            Ok(pts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 2.0]).is_ok());
        assert!(TimeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![-1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::INFINITY]).is_err());
        let g = TimeGrid::linspace(0.0, 1.0, 5).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let m = g.merged(&[0.5, 2.0]).unwrap();
        assert_eq!(m.len(), 6);
    }

    #[test]
    fn classify_examples() {
        assert!(classify(&FamilySpec::Wfbm { a: 0.0, b: 0.5 }).is_valid());
        let v = classify(&FamilySpec::Wfbm { a: -0.5, b: 0.8 });
        assert_eq!((v.status, v.regime), (Status::Invalid, Regime::BGtAplus1));
        assert!(v.witness.is_some());
        let v = classify(&FamilySpec::Wfbm { a: 2.0, b: 1.5 });
        assert_eq!((v.status, v.regime), (Status::Invalid, Regime::BGt1));
        let v = classify(&FamilySpec::Nsfbm { h: 4.5 });
        assert_eq!((v.status, v.regime), (Status::Invalid, Regime::HRange));
        let v = classify(&FamilySpec::Wfbm { a: -0.9, b: -0.5 });
        assert_eq!(v.regime, Regime::SumNeg);
        let v = classify(&FamilySpec::Wfbm { a: -1.0, b: 0.0 });
        assert_eq!(v.regime, Regime::NonIntegrable);
    }

    #[test]
    fn degeneracy_tags() {
        assert_eq!(classify(&FamilySpec::Wfbm { a: 0.5, b: 1.0 }).degenerate, Some(Degeneracy::B1));
        assert_eq!(classify(&FamilySpec::Sfbm { h: 2.0 }).degenerate, Some(Degeneracy::H2));
        assert_eq!(classify(&FamilySpec::Nsfbm { h: 2.0 }).degenerate, Some(Degeneracy::H2));
        assert_eq!(classify(&FamilySpec::Nsfbm { h: 4.0 }).degenerate, Some(Degeneracy::H4));
        assert!(!classify(&FamilySpec::Wfbm { a: -0.5, b: 1.0 }).is_valid());
    }

    #[test]
    fn gram_examples() {
        let g = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        let gm = gram(&FamilySpec::Wfbm { a: 0.0, b: 0.0 }, &g).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 4.0]);
        assert!((gm.entries - want).abs().max() < 1e-14);
        let gm = gram(&FamilySpec::Nsfbm { h: 3.0 }, &g).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[2.0, 5.0, 5.0, 16.0]);
        assert!((gm.entries.clone() - want).abs().max() < 1e-13);
        let cert = psd_certificate(&gm, 1e-8).unwrap();
        assert!(cert.pass && cert.min_eigenvalue > 0.0);
        assert!(matches!(
            gram(&FamilySpec::Nsfbm { h: 4.5 }, &g),
            Err(PdError::InvalidSpec { .. })
        ));
        assert!(gram(&FamilySpec::Eta, &TimeGrid::new(vec![]).unwrap()).is_err());
    }

    #[test]
    fn certificate_examples() {
        let c = psd_certificate_matrix(&DMatrix::from_element(1, 1, 2.0), 1e-8).unwrap();
        assert_eq!(c.min_eigenvalue, 2.0);
        assert!(c.pass);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(psd_certificate_matrix(&bad, 1e-8), Err(PdError::NonFinite { .. })));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!psd_certificate_matrix(&indefinite, 1e-8).unwrap().pass);
    }

    #[test]
    fn witnesses_have_positive_defect() {
        for &(a, b) in &[(-0.9, -0.5), (-0.5, 0.8), (2.0, 1.5), (0.561, 1.0122)] {
            let w = violation_witness(a, b).unwrap();
            assert!(w.defect > 0.0 && w.normalized_defect > 0.0, "({a}, {b}): {w:?}");
        }
        let w = violation_witness(-0.9, -0.5).unwrap();
        assert!(w.t < 1.0);
        let w = violation_witness(-0.5, 0.8).unwrap();
        assert!(w.t > 1.0);
        let w = violation_witness(2.0, 1.5).unwrap();
        assert!(w.eps.is_some_and(|e| e <= 0.5));
        assert!(matches!(violation_witness(0.0, 0.5), Err(PdError::NotInvalid { .. })));
    }

    #[test]
    fn witness_grid_breaks_psd() {
        for &(a, b) in &[(-0.9, -0.5), (-0.5, 0.8), (2.0, 1.5), (0.561, 1.0122), (-0.5, 0.55)] {
            let pts = witness_grid(a, b).unwrap();
            let grid = TimeGrid::from_unsorted(pts).unwrap();
            let gm = gram_unchecked(&FamilySpec::Wfbm { a, b }, &grid).unwrap();
            let cert = psd_certificate(&gm, 1e-8).unwrap();
            assert!(!cert.pass, "({a}, {b}): {cert:?}");
        }
    }

    #[test]
    fn valid_edge_passes() {
        for &a in &[-0.5f64, 0.0, 0.7] {
            let b = (1.0 + a).min(1.0);
            let spec = FamilySpec::Wfbm { a, b };
            assert!(classify(&spec).is_valid());
            let grid = TimeGrid::linspace(0.1, 5.0, 15).unwrap();
            assert!(psd_certificate(&gram(&spec, &grid).unwrap(), 1e-8).unwrap().pass);
        }
        assert!(!classify(&FamilySpec::Wfbm { a: -0.5, b: 0.55 }).is_valid());
    }
}
