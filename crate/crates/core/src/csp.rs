//! Common spatial patterns: per-band average covariances and the Rayleigh
//! quotient filter pair.
//!
//! The pair solves `Σ₁ v = λ (Σ₁ + Σ₂ + εI) v`. The composite is factored as
//! `L Lᵀ`, the symmetric problem `L⁻¹ Σ₁ L⁻ᵀ y = λ y` is diagonalized and
//! `v = L⁻ᵀ y` is mapped back.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::BandSpec;
use crate::linalg::{self, LinalgError};
use crate::spectral::{BandpassFilter, SpectralError};
use crate::windowing::{Condition, LabeledWindow};

pub const DEFAULT_EPS_REL: f64 = 1e-9;

/// Windows summed sequentially before the pairwise reduction.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CspConfig {
    /// Ridge on the composite, relative to its mean eigenvalue.
    pub eps_rel: f64,
    /// Subtract each filtered window's channel means before accumulating.
    pub center_windows: bool,
}

impl Default for CspConfig {
    fn default() -> Self {
        CspConfig {
            eps_rel: DEFAULT_EPS_REL,
            center_windows: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CspError {
    #[error("window shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("windows need at least two samples")]
    WindowTooShort,
    #[error("empty window set")]
    EmptyWindowSet,
    #[error("composite covariance is singular (trace {trace})")]
    SingularComposite { trace: f64 },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("covariances belong to different bands ({0} vs {1})")]
    BandMismatch(String, String),
    #[error(transparent)]
    Dsp(#[from] SpectralError),
}

impl From<LinalgError> for CspError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NoConvergence(_) => CspError::NoConvergence,
            LinalgError::NotPositiveDefinite { value, .. } => CspError::SingularComposite { trace: value },
            LinalgError::NotSquare(r, c) => CspError::ShapeMismatch {
                expected: (r, r),
                got: (r, c),
            },
        }
    }
}

/// Average band-passed covariance of one condition's windows.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub sigma: Array2<f64>,
    pub condition: Condition,
    pub band: BandSpec,
    pub n_windows: usize,
}

impl CovarianceMatrix {
    pub fn n_channels(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.sigma.diag().sum()
    }
}

/// Sums matrices by recursive halving, so rounding does not grow with the
/// number of terms and the result depends only on the input order.
fn pairwise_sum(mut items: Vec<Array2<f64>>) -> Option<Array2<f64>> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a += &b;
            }
            next.push(a);
        }
        items = next;
    }
    items.pop()
}

fn outer(y: ArrayView2<'_, f64>, center: bool) -> Array2<f64> {
    if center {
        let mean = y.mean_axis(Axis(1)).expect("non-empty window");
        let yc = &y - &mean.insert_axis(Axis(1));
        yc.dot(&yc.t())
    } else {
        y.dot(&y.t())
    }
}

fn symmetrize(m: &mut Array2<f64>) {
    let t = m.t().to_owned();
    *m += &t;
    *m *= 0.5;
}

/// `1 / (N (L - 1)) Σᵢ Yᵢ Yᵢᵀ` over already filtered windows `Yᵢ`.
pub fn covariance_from_filtered(
    filtered: &[Array2<f64>],
    condition: Condition,
    band: BandSpec,
    center: bool,
) -> Result<CovarianceMatrix, CspError> {
    let first = filtered.first().ok_or(CspError::EmptyWindowSet)?;
    let shape = first.dim();
    if shape.1 < 2 {
        return Err(CspError::WindowTooShort);
    }
    if let Some(bad) = filtered.iter().find(|y| y.dim() != shape) {
        return Err(CspError::ShapeMismatch {
            expected: shape,
            got: bad.dim(),
        });
    }
    let partial: Vec<Array2<f64>> = filtered
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Array2::zeros((shape.0, shape.0));
            for y in chunk {
                acc += &outer(y.view(), center);
            }
            acc
        })
        .collect();
    let mut sigma = pairwise_sum(partial).expect("at least one chunk");
    sigma /= (filtered.len() * (shape.1 - 1)) as f64;
    symmetrize(&mut sigma);
    Ok(CovarianceMatrix {
        sigma,
        condition,
        band,
        n_windows: filtered.len(),
    })
}

/// Band-passes every window and averages their covariances.
pub fn estimate_covariance(
    windows: &[LabeledWindow],
    band: BandSpec,
    sample_rate_hz: f64,
    center: bool,
) -> Result<CovarianceMatrix, CspError> {
    let first = windows.first().ok_or(CspError::EmptyWindowSet)?;
    let shape = first.data.dim();
    if shape.1 < 2 {
        return Err(CspError::WindowTooShort);
    }
    if let Some(bad) = windows.iter().find(|w| w.data.dim() != shape) {
        return Err(CspError::ShapeMismatch {
            expected: shape,
            got: bad.data.dim(),
        });
    }
    let filter = BandpassFilter::new(band, sample_rate_hz)?;
    let partial: Vec<Array2<f64>> = windows
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<Array2<f64>, CspError> {
            let mut acc = Array2::zeros((shape.0, shape.0));
            for w in chunk {
                let y = filter.apply_rows(w.data.view())?;
                acc += &outer(y.view(), center);
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;
    let mut sigma = pairwise_sum(partial).expect("at least one chunk");
    sigma /= (windows.len() * (shape.1 - 1)) as f64;
    symmetrize(&mut sigma);
    Ok(CovarianceMatrix {
        sigma,
        condition: first.condition,
        band,
        n_windows: windows.len(),
    })
}

/// The two spatial filters of one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFilterPair {
    pub band: BandSpec,
    /// Maximizes condition 1 (preictal) energy relative to the total.
    pub w1: Vec<f64>,
    /// Maximizes condition 2 (interictal) energy relative to the total.
    pub w2: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eps_rel: f64,
    /// Training window counts `[N1, N2]`.
    pub n_train: [usize; 2],
}

impl SpatialFilterPair {
    /// Filter `t` (1 or 2).
    pub fn filter(&self, t: usize) -> &[f64] {
        match t {
            1 => &self.w1,
            2 => &self.w2,
            _ => panic!("filter index must be 1 or 2, got {t}"),
        }
    }
}

/// Generalized eigenpairs of `Σ₁ v = λ (Σ₁ + Σ₂ + εI) v`, eigenvalues
/// ascending, unit-norm sign-fixed eigenvectors in the columns.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
    pub eps: f64,
}

/// Ridge-regularized composite `Σ₁ + Σ₂ + εI` and the ε used.
pub fn regularized_composite(
    sigma1: ArrayView2<'_, f64>,
    sigma2: ArrayView2<'_, f64>,
    eps_rel: f64,
) -> Result<(Array2<f64>, f64), CspError> {
    if sigma1.dim() != sigma2.dim() || sigma1.nrows() != sigma1.ncols() {
        return Err(CspError::ShapeMismatch {
            expected: sigma1.dim(),
            got: sigma2.dim(),
        });
    }
    let c = sigma1.nrows();
    if c == 0 {
        return Err(CspError::EmptyWindowSet);
    }
    let mut composite = &sigma1 + &sigma2;
    let trace = composite.diag().sum();
    if !(trace.is_finite() && trace > f64::MIN_POSITIVE * c as f64) {
        return Err(CspError::SingularComposite { trace });
    }
    let eps = eps_rel * trace / c as f64;
    composite.diag_mut().iter_mut().for_each(|d| *d += eps);
    Ok((composite, eps))
}

/// Makes `v` unit length with its largest-magnitude entry positive.
pub fn normalize_sign(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let lead = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let scale = if lead < 0.0 { -1.0 / norm } else { 1.0 / norm };
    v.iter_mut().for_each(|x| *x *= scale);
}

pub fn generalized_eigen(
    sigma1: ArrayView2<'_, f64>,
    sigma2: ArrayView2<'_, f64>,
    eps_rel: f64,
) -> Result<GeneralizedEigen, CspError> {
    let (composite, eps) = regularized_composite(sigma1, sigma2, eps_rel)?;
    let l = linalg::cholesky(composite.view())?;
    // B = L⁻¹ Σ₁ L⁻ᵀ = L⁻¹ (L⁻¹ Σ₁)ᵀ since Σ₁ is symmetric.
    let half = linalg::solve_lower(l.view(), sigma1);
    let mut b = linalg::solve_lower(l.view(), half.t());
    symmetrize(&mut b);
    let eig = linalg::symmetric_eigen(b.view())?;
    let c = sigma1.nrows();
    let mut vectors = Array2::zeros((c, c));
    for k in 0..c {
        let y: Vec<f64> = eig.vectors.column(k).to_vec();
        let mut v = linalg::solve_lower_transposed(l.view(), &y);
        normalize_sign(&mut v);
        vectors.column_mut(k).iter_mut().zip(v).for_each(|(d, x)| *d = x);
    }
    let values = eig.values.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    Ok(GeneralizedEigen { values, vectors, eps })
}

/// `wᵀ A w / wᵀ B w`.
pub fn rayleigh_quotient(w: &[f64], num: ArrayView2<'_, f64>, den: ArrayView2<'_, f64>) -> f64 {
    let w = ndarray::ArrayView1::from(w);
    w.dot(&num.dot(&w)) / w.dot(&den.dot(&w))
}

pub fn solve_csp(
    sigma1: &CovarianceMatrix,
    sigma2: &CovarianceMatrix,
    eps_rel: f64,
) -> Result<SpatialFilterPair, CspError> {
    if sigma1.band != sigma2.band {
        return Err(CspError::BandMismatch(
            sigma1.band.name.to_string(),
            sigma2.band.name.to_string(),
        ));
    }
    let eig = generalized_eigen(sigma1.sigma.view(), sigma2.sigma.view(), eps_rel)?;
    let c = eig.values.len();
    Ok(SpatialFilterPair {
        band: sigma1.band,
        w1: eig.vectors.column(c - 1).to_vec(),
        w2: eig.vectors.column(0).to_vec(),
        lambda1: eig.values[c - 1],
        lambda2: eig.values[0],
        eps_rel,
        n_train: [sigma1.n_windows, sigma2.n_windows],
    })
}

/// Filters and the covariances they were solved from.
#[derive(Debug, Clone)]
pub struct TrainedBand {
    pub filters: SpatialFilterPair,
    pub covariances: [CovarianceMatrix; 2],
}

/// One filter pair per band, bands processed concurrently, output in the
/// order of `bands`.
pub fn train_all_bands(
    train: &[Vec<LabeledWindow>; 2],
    bands: &[BandSpec],
    sample_rate_hz: f64,
    cfg: &CspConfig,
) -> Result<Vec<TrainedBand>, CspError> {
    if train.iter().any(Vec::is_empty) {
        return Err(CspError::EmptyWindowSet);
    }
    bands
        .par_iter()
        .map(|&band| {
            let s1 = estimate_covariance(&train[0], band, sample_rate_hz, cfg.center_windows)?;
            let s2 = estimate_covariance(&train[1], band, sample_rate_hz, cfg.center_windows)?;
            let filters = solve_csp(&s1, &s2, cfg.eps_rel)?;
            Ok(TrainedBand {
                filters,
                covariances: [s1, s2],
            })
        })
        .collect()
}
