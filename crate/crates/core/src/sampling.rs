//! Exact Gaussian path sampling on finite grids and the three
//! representation-based samplers used to cross-check the kernels.
//!
//! Every path `i` draws its normals from its own ChaCha8 stream keyed by
//! `(seed, i)`, so an ensemble is bit-identical whatever the thread count
//! or ensemble size.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::kernels::{self, FamilySpec, KernelError};
use crate::pd_analysis::{self, PdError, TimeGrid};
use crate::specfun::norm_inv;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("Cholesky failed at every jitter level (min eigenvalue {min_eigenvalue:e}, largest jitter {max_jitter:e})")]
    Cholesky { min_eigenvalue: f64, max_jitter: f64 },
    #[error(transparent)]
    Pd(#[from] PdError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, SamplingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SamplingMethod {
    DirectCholesky,
    EvenPart,
    OddPartIntegrated,
    TimeChangedBm,
}

/// `n` paths on a grid, stored row-major (one row per path).
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub spec: FamilySpec,
    pub grid: TimeGrid,
    pub n: usize,
    pub paths: Vec<f64>,
    pub seed: u64,
    pub method: SamplingMethod,
    pub substeps: Option<usize>,
    /// Diagonal jitter added before factorization (0 when none was needed).
    pub jitter: f64,
}

impl PathEnsemble {
    pub fn m(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.paths[i * m..(i + 1) * m]
    }

    /// `(1/n) Σ_paths X_i X_j`. The processes are centered, so the known
    /// mean is used instead of the sample mean.
    pub fn second_moments(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut acc = DMatrix::<f64>::zeros(m, m);
        for p in 0..self.n {
            let x = self.path(p);
            for i in 0..m {
                for j in i..m {
                    acc[(i, j)] += x[i] * x[j];
                }
            }
        }
        let n = self.n.max(1) as f64;
        DMatrix::from_fn(m, m, |i, j| {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            acc[(i, j)] / n
        })
    }
}

/// Diagonal jitter ladder, as multiples of `trace / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct JitterPolicy {
    pub levels: Vec<f64>,
    /// Treat pivots that vanish to rounding as exact zeros (rank-deficient
    /// factor) before trying any jitter.
    pub semidefinite: bool,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            levels: vec![0.0, 1e-12, 1e-10, 1e-8],
            semidefinite: false,
        }
    }
}

impl JitterPolicy {
    pub fn semidefinite() -> Self {
        JitterPolicy {
            semidefinite: true,
            ..Self::default()
        }
    }
}

/// `A + jitter·I = L D Lᵀ` with unit lower `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    unit_lower: Vec<f64>,
    diag: Vec<f64>,
    m: usize,
    pub jitter: f64,
    pub rank: usize,
}

impl CholeskyFactor {
    /// Conventional lower factor `L D^{1/2}`.
    pub fn lower(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |i, j| {
            if j > i {
                0.0
            } else {
                self.unit_lower[i * m + j] * self.diag[j].sqrt()
            }
        })
    }

    /// `L D^{1/2} z` written into `out`; `z` is overwritten with `D^{1/2} z`.
    fn apply(&self, z: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        for (zk, dk) in z.iter_mut().zip(&self.diag) {
            *zk *= dk.sqrt();
        }
        for i in 0..m {
            let row = &self.unit_lower[i * m..i * m + i];
            let mut acc = z[i];
            for (l, y) in row.iter().zip(z.iter()) {
                acc += l * y;
            }
            out[i] = acc;
        }
    }
}

// relative pivot thresholds for the semidefinite factorization
const ZERO_PIVOT: f64 = 1e-11;
const NEGATIVE_PIVOT: f64 = 1e-9;

fn ldl(a: &DMatrix<f64>, jitter: f64, semidefinite: bool) -> Option<CholeskyFactor> {
    let m = a.nrows();
    let mut l = vec![0.0; m * m];
    let mut d = vec![0.0; m];
    let mut rank = 0;
    for j in 0..m {
        let ajj = a[(j, j)] + jitter;
        let mut dj = ajj;
        for k in 0..j {
            dj -= l[j * m + k] * l[j * m + k] * d[k];
        }
        l[j * m + j] = 1.0;
        if semidefinite {
            let scale = ajj.abs();
            if dj < -NEGATIVE_PIVOT * scale {
                return None;
            }
            if dj <= ZERO_PIVOT * scale {
                continue;
            }
        } else if dj <= 0.0 || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        rank += 1;
        for i in j + 1..m {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k] * d[k];
            }
            l[i * m + j] = s / dj;
        }
    }
    Some(CholeskyFactor {
        unit_lower: l,
        diag: d,
        m,
        jitter,
        rank,
    })
}

/// Factor a symmetric matrix, escalating diagonal jitter through
/// `policy.levels × trace/m` until the factorization succeeds.
pub fn cholesky_with_jitter(entries: &DMatrix<f64>, policy: &JitterPolicy) -> Result<CholeskyFactor> {
    let m = entries.nrows();
    if m != entries.ncols() {
        return Err(SamplingError::Domain("matrix is not square".into()));
    }
    if m == 0 {
        return Ok(CholeskyFactor {
            unit_lower: Vec::new(),
            diag: Vec::new(),
            m: 0,
            jitter: 0.0,
            rank: 0,
        });
    }
    let unit = entries.trace() / m as f64;
    if policy.semidefinite {
        if let Some(f) = ldl(entries, 0.0, true) {
            return Ok(f);
        }
    }
    for &level in &policy.levels {
        if let Some(f) = ldl(entries, level * unit, false) {
            return Ok(f);
        }
    }
    let min_eigenvalue = SymmetricEigen::new(entries.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Err(SamplingError::Cholesky {
        min_eigenvalue,
        max_jitter: policy.levels.iter().copied().fold(0.0, f64::max) * unit,
    })
}

const TWO_POW_M53: f64 = 1.0 / 9007199254740992.0;

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Standard normal by inverse CDF of a uniform on the open unit interval.
fn next_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_M53;
    norm_inv(u)
}

/// Draws `n` centered Gaussian vectors with covariance `entries`, placing
/// exact zeros at coordinates with zero variance.
fn draw_gaussian(
    entries: &DMatrix<f64>,
    n: usize,
    seed: u64,
    policy: &JitterPolicy,
) -> Result<(Vec<f64>, f64)> {
    let m = entries.nrows();
    let active: Vec<usize> = (0..m).filter(|&i| entries[(i, i)] > 0.0).collect();
    let k = active.len();
    let sub = DMatrix::from_fn(k, k, |i, j| entries[(active[i], active[j])]);
    let factor = cholesky_with_jitter(&sub, policy)?;
    let mut out = vec![0.0; n * m];
    exec::fill_chunks(&mut out, m, |p, row| {
        let mut rng = path_rng(seed, p);
        let mut z: Vec<f64> = (0..k).map(|_| next_normal(&mut rng)).collect();
        let mut x = vec![0.0; k];
        factor.apply(&mut z, &mut x);
        for (idx, v) in active.iter().zip(x) {
            row[*idx] = v;
        }
    });
    Ok((out, factor.jitter))
}

fn empty_ensemble(spec: FamilySpec, grid: &TimeGrid, n: usize, seed: u64, method: SamplingMethod) -> PathEnsemble {
    PathEnsemble {
        spec,
        grid: grid.clone(),
        n,
        paths: Vec::new(),
        seed,
        method,
        substeps: None,
        jitter: 0.0,
    }
}

/// Exact sampler: `n` i.i.d. draws of the process on `grid` via the
/// factorized Gram matrix.
///
/// Rank-deficient Gram matrices (for instance the `h = 4` kernel) are
/// factored as semidefinite first, which keeps degenerate laws exact; the
/// jitter ladder is the fallback.
pub fn sample(spec: &FamilySpec, grid: &TimeGrid, n: usize, seed: u64) -> Result<PathEnsemble> {
    let verdict = pd_analysis::classify(spec);
    if !verdict.is_valid() {
        return Err(PdError::InvalidSpec {
            spec: *spec,
            regime: verdict.regime,
        }
        .into());
    }
    if n == 0 {
        return Err(SamplingError::Domain("need at least one path".into()));
    }
    if grid.is_empty() {
        return Ok(empty_ensemble(*spec, grid, n, seed, SamplingMethod::DirectCholesky));
    }
    let gm = pd_analysis::gram(spec, grid)?;
    let (paths, jitter) = draw_gaussian(&gm.entries, n, seed, &JitterPolicy::semidefinite())?;
    Ok(PathEnsemble {
        spec: *spec,
        grid: grid.clone(),
        n,
        paths,
        seed,
        method: SamplingMethod::DirectCholesky,
        substeps: None,
        jitter,
    })
}

fn fbm_two_sided(hurst: f64, x: f64, y: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (x.abs().powf(p) + y.abs().powf(p) - (x - y).abs().powf(p))
}

/// Samples `(ξ_t, ξ_{−t})` for a two-sided standard fBm at the positive
/// points `pos`; returns paths laid out as `[ξ_{t_1}..ξ_{t_k}, ξ_{−t_1}..]`.
fn two_sided_fbm(hurst: f64, pos: &[f64], n: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let k = pos.len();
    let pts: Vec<f64> = pos.iter().copied().chain(pos.iter().map(|t| -t)).collect();
    let c = DMatrix::from_fn(2 * k, 2 * k, |i, j| fbm_two_sided(hurst, pts[i], pts[j]));
    draw_gaussian(&c, n, seed, &JitterPolicy::semidefinite())
}

/// Sub-fractional Bm through its even-part representation
/// `ζ_t = √(2−h) (ξ_t + ξ_{−t}) / √2`, `ξ` a two-sided fBm with Hurst
/// index `h/2`.
pub fn sample_sfbm_even(h: f64, grid: &TimeGrid, n: usize, seed: u64) -> Result<PathEnsemble> {
    if !(h > 0.0 && h < 2.0) {
        return Err(SamplingError::Domain(format!("even-part sampler needs 0 < h < 2 (got {h})")));
    }
    if n == 0 {
        return Err(SamplingError::Domain("need at least one path".into()));
    }
    let spec = FamilySpec::Sfbm { h };
    let m = grid.len();
    let pos: Vec<f64> = grid.points().iter().copied().filter(|&t| t > 0.0).collect();
    let offset = m - pos.len();
    let k = pos.len();
    let (raw, jitter) = two_sided_fbm(0.5 * h, &pos, n, seed)?;
    let scale = ((2.0 - h) / 2.0).sqrt();
    let mut paths = vec![0.0; n * m];
    for p in 0..n {
        let src = &raw[p * 2 * k..(p + 1) * 2 * k];
        let dst = &mut paths[p * m..(p + 1) * m];
        for i in 0..k {
            dst[offset + i] = scale * (src[i] + src[k + i]);
        }
    }
    Ok(PathEnsemble {
        spec,
        grid: grid.clone(),
        n,
        paths,
        seed,
        method: SamplingMethod::EvenPart,
        substeps: None,
        jitter,
    })
}

/// `0 = r_0 < … ` : each gap between consecutive grid points (starting
/// from 0) split into `substeps` pieces. Returns the refined points and the
/// index of every grid point in it.
fn refine(grid: &TimeGrid, substeps: usize) -> (Vec<f64>, Vec<usize>) {
    let mut pts = vec![0.0];
    let mut idx = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    for &g in grid.points() {
        if g > prev {
            let step = (g - prev) / substeps as f64;
            for s in 1..substeps {
                pts.push(prev + step * s as f64);
            }
            pts.push(g);
            prev = g;
        }
        idx.push(pts.len() - 1);
    }
    (pts, idx)
}

/// Cumulative trapezoid integral of `values` over `pts`, read at `idx`.
fn trapezoid_at(pts: &[f64], values: &[f64], idx: &[usize], scale: f64, out: &mut [f64]) {
    let mut acc = 0.0;
    let mut next = 0;
    for (j, &target) in idx.iter().enumerate() {
        while next < target {
            acc += 0.5 * (values[next] + values[next + 1]) * (pts[next + 1] - pts[next]);
            next += 1;
        }
        out[j] = scale * acc;
    }
}

/// Negative sub-fractional Bm as `√(h(h−1)(h−2)/2) ∫₀ᵗ ϑ_s ds`, where `ϑ`
/// has covariance `(s+t)^{h−2} − |s−t|^{h−2}` and the integral is a
/// trapezoid sum with `substeps` pieces per grid gap.
pub fn sample_nsfbm_odd_integrated(
    h: f64,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
    substeps: usize,
) -> Result<PathEnsemble> {
    if !(h > 2.0 && h < 4.0) {
        return Err(SamplingError::Domain(format!("odd-part sampler needs 2 < h < 4 (got {h})")));
    }
    if substeps == 0 || n == 0 {
        return Err(SamplingError::Domain("need substeps >= 1 and at least one path".into()));
    }
    let spec = FamilySpec::Nsfbm { h };
    let m = grid.len();
    let (pts, idx) = refine(grid, substeps);
    let r = pts.len();
    let k0 = DMatrix::from_fn(r, r, |i, j| kernels::odd_kernel(h, pts[i], pts[j]));
    let (theta, jitter) = draw_gaussian(&k0, n, seed, &JitterPolicy::semidefinite())?;
    let scale = (0.5 * h * (h - 1.0) * (h - 2.0)).sqrt();
    let mut paths = vec![0.0; n * m];
    exec::fill_chunks(&mut paths, m, |p, row| {
        trapezoid_at(&pts, &theta[p * r..(p + 1) * r], &idx, scale, row);
    });
    Ok(PathEnsemble {
        spec,
        grid: grid.clone(),
        n,
        paths,
        seed,
        method: SamplingMethod::OddPartIntegrated,
        substeps: Some(substeps),
        jitter,
    })
}

/// Weighted fBm with `b = 1` as `ξ_t = ∫₀ᵗ w_{r^a} dr`, `w` a standard Bm,
/// by the trapezoid rule with `substeps` pieces per grid gap.
pub fn sample_wfbm_b1(a: f64, grid: &TimeGrid, n: usize, seed: u64, substeps: usize) -> Result<PathEnsemble> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(SamplingError::Domain(format!("b = 1 requires a >= 0 (got a = {a})")));
    }
    if substeps == 0 || n == 0 {
        return Err(SamplingError::Domain("need substeps >= 1 and at least one path".into()));
    }
    let spec = FamilySpec::Wfbm { a, b: 1.0 };
    let m = grid.len();
    let (pts, idx) = refine(grid, substeps);
    // 0^0 = 1: for a = 0 every r maps to time 1
    let clock: Vec<f64> = pts.iter().map(|r| r.powf(a)).collect();
    let mut times = clock.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let slot: Vec<usize> = clock
        .iter()
        .map(|c| times.partition_point(|x| x < c))
        .collect();
    let mut paths = vec![0.0; n * m];
    exec::fill_chunks(&mut paths, m, |p, row| {
        let mut rng = path_rng(seed, p);
        let mut w = Vec::with_capacity(times.len());
        let (mut prev_t, mut prev_w) = (0.0, 0.0);
        for &t in &times {
            let z = next_normal(&mut rng);
            prev_w += (t - prev_t).sqrt() * z;
            prev_t = t;
            w.push(prev_w);
        }
        let values: Vec<f64> = slot.iter().map(|&s| w[s]).collect();
        trapezoid_at(&pts, &values, &idx, 1.0, row);
    });
    Ok(PathEnsemble {
        spec,
        grid: grid.clone(),
        n,
        paths,
        seed,
        method: SamplingMethod::TimeChangedBm,
        substeps: Some(substeps),
        jitter: 0.0,
    })
}
