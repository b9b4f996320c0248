//! Brute-force checks of the closed forms: Monte-Carlo Fisher information
//! under an explicit joint Gaussian law of (x_i, η_i), Isserlis moments, and
//! the site-sum form of β̂_MPL.
//!
//! Sampling works in `f64`.

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::ModelParams;
use crate::infogeo::{Component, PatchStats, TensorKind};
use crate::lattice::{Configuration, NEIGHBOR_SLOTS, PATCH_CENTER, PATCH_LEN};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

pub const MIN_FISHER_SAMPLES: usize = 10_000;
const EIGEN_FLOOR: f64 = -1e-10;

type Mat9 = SMatrix<f64, PATCH_LEN, PATCH_LEN>;

/// Joint Gaussian law of a 3×3 patch, centre at index 4.
#[derive(Debug, Clone)]
pub struct NeighborhoodModel {
    mean: f64,
    cov9: [[f64; PATCH_LEN]; PATCH_LEN],
    factor: Mat9,
}

impl NeighborhoodModel {
    /// Every coordinate has mean `mean`; `cov9` must be symmetric PSD.
    pub fn new(mean: f64, cov9: [[f64; PATCH_LEN]; PATCH_LEN]) -> Result<Self> {
        let m = Mat9::from_fn(|i, j| cov9[i][j]);
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        if !mean.is_finite() || m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model entries must be finite".into()));
        }
        if (m - m.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::InvalidInput("cov9 is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(m);
        if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
            if min < EIGEN_FLOOR {
                return Err(Error::InvalidInput(format!(
                    "cov9 is not positive semidefinite (smallest eigenvalue {min:e})"
                )));
            }
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = eig.eigenvectors * Mat9::from_diagonal(&roots);
        Ok(Self { mean, cov9, factor })
    }

    /// Independent coordinates with common variance.
    pub fn iid(mean: f64, variance: f64) -> Result<Self> {
        let mut cov = [[0.0; PATCH_LEN]; PATCH_LEN];
        for (k, row) in cov.iter_mut().enumerate() {
            row[k] = variance;
        }
        Self::new(mean, cov)
    }

    /// Covariance `variance · exp(−d / length)` with `d` the Euclidean distance
    /// between patch positions.
    pub fn exponential(mean: f64, variance: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidParameter("correlation length must be positive".into()));
        }
        let pos = |k: usize| ((k / 3) as f64, (k % 3) as f64);
        let mut cov = [[0.0; PATCH_LEN]; PATCH_LEN];
        for (a, row) in cov.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let ((ra, ca), (rb, cb)) = (pos(a), pos(b));
                let d = ((ra - rb).powi(2) + (ca - cb).powi(2)).sqrt();
                *v = variance * (-d / length).exp();
            }
        }
        Self::new(mean, cov)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn cov9(&self) -> &[[f64; PATCH_LEN]; PATCH_LEN] {
        &self.cov9
    }

    /// The population patch statistics of this law.
    pub fn stats(&self) -> PatchStats<f64> {
        PatchStats::from_covariance(self.cov9)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; PATCH_LEN] {
        let z = SMatrix::<f64, PATCH_LEN, 1>::from_fn(|_, _| f64::standard_normal(rng));
        let x = self.factor * z;
        std::array::from_fn(|k| self.mean + x[k])
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// Number of standard errors between the estimate and `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.estimate - value) / self.std_error
    }

    /// `|estimate − value| ≤ k · std_error`, with an absolute floor of
    /// `1e-12 · max(1, |value|)` for estimators with no sampling spread.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        let diff = (self.estimate - value).abs();
        diff <= k * self.std_error || diff <= 1e-12 * value.abs().max(1.0)
    }
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn finish(&self) -> McEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            estimate: self.mean,
            std_error: (var / self.n as f64).sqrt(),
        }
    }
}

/// An entry of the symmetric 3×3 information matrix in (μ, σ², β) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Entry {
    MuMu,
    MuSigma2,
    MuBeta,
    Sigma2Sigma2,
    Sigma2Beta,
    BetaBeta,
}

impl Entry {
    pub const ALL: [Entry; 6] = [
        Entry::MuMu,
        Entry::MuSigma2,
        Entry::MuBeta,
        Entry::Sigma2Sigma2,
        Entry::Sigma2Beta,
        Entry::BetaBeta,
    ];

    /// Row and column in (μ, σ², β) order.
    pub fn position(self) -> (usize, usize) {
        match self {
            Entry::MuMu => (0, 0),
            Entry::MuSigma2 => (0, 1),
            Entry::MuBeta => (0, 2),
            Entry::Sigma2Sigma2 => (1, 1),
            Entry::Sigma2Beta => (1, 2),
            Entry::BetaBeta => (2, 2),
        }
    }
}

impl From<Component> for Entry {
    fn from(c: Component) -> Self {
        match c {
            Component::MuMu => Entry::MuMu,
            Component::Sigma2Sigma2 => Entry::Sigma2Sigma2,
            Component::Sigma2Beta => Entry::Sigma2Beta,
            Component::BetaBeta => Entry::BetaBeta,
        }
    }
}

/// Monte-Carlo estimates of all six entries of the information matrix,
/// indexed like [`Entry::ALL`], from one shared sample.
///
/// Type I averages products of the LCDF scores; type II averages the negated
/// second derivatives of the LCDF log-density.
pub fn mc_fisher_matrix(
    model: &NeighborhoodModel,
    params: &ModelParams<f64>,
    kind: TensorKind,
    n_samples: usize,
    seed: u64,
) -> Result<[McEstimate; 6]> {
    params.validate()?;
    if n_samples < MIN_FISHER_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_FISHER_SAMPLES} samples, got {n_samples}"
        )));
    }
    let ModelParams { mu, sigma2, beta, .. } = *params;
    let lead = 1.0 - beta * params.delta_f();
    let delta = params.delta_f();
    let (s2, s4, s6) = (sigma2, sigma2 * sigma2, sigma2 * sigma2 * sigma2);
    let mut acc = [Accumulator::default(); 6];
    let mut rng = stream_rng(seed, 0);
    for _ in 0..n_samples {
        let x = model.sample(&mut rng);
        let u = x[PATCH_CENTER] - mu;
        let s: f64 = NEIGHBOR_SLOTS.iter().map(|&k| x[k] - mu).sum();
        let e = u - beta * s;
        let values = match kind {
            TensorKind::TypeI => {
                let d_mu = e * lead / s2;
                let d_s2 = -0.5 / s2 + e * e / (2.0 * s4);
                let d_beta = e * s / s2;
                [
                    d_mu * d_mu,
                    d_mu * d_s2,
                    d_mu * d_beta,
                    d_s2 * d_s2,
                    d_s2 * d_beta,
                    d_beta * d_beta,
                ]
            }
            TensorKind::TypeII => [
                lead * lead / s2,
                e * lead / s4,
                (s * lead + e * delta) / s2,
                -0.5 / s4 + e * e / s6,
                e * s / s4,
                s * s / s2,
            ],
        };
        for (a, v) in acc.iter_mut().zip(values) {
            a.push(v);
        }
    }
    Ok(acc.map(|a| a.finish()))
}

pub fn mc_fisher_component(
    model: &NeighborhoodModel,
    params: &ModelParams<f64>,
    which: Entry,
    kind: TensorKind,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let all = mc_fisher_matrix(model, params, kind, n_samples, seed)?;
    let k = Entry::ALL.iter().position(|&e| e == which).expect("entry listed in ALL");
    Ok(all[k])
}

/// Monte-Carlo and Isserlis values of a fourth moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub mc: McEstimate,
    pub closed: f64,
}

fn cholesky_like_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(Error::InvalidInput("covariance must be a non-empty square matrix".into()));
    }
    let scale = cov.abs().max().max(f64::MIN_POSITIVE);
    if (cov - cov.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::InvalidInput("covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| l < EIGEN_FLOOR) {
        return Err(Error::InvalidInput("covariance is not positive semidefinite".into()));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// E[x_a x_b x_c x_d] for a zero-mean Gaussian with covariance `cov`
/// (2 to 4 variables), by sampling and by Isserlis' theorem.
pub fn isserlis_fourth_moment(
    cov: &DMatrix<f64>,
    indices: [usize; 4],
    n_samples: usize,
    seed: u64,
) -> Result<MomentCheck> {
    let n = cov.nrows();
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidInput(format!("expected 1 to 4 variables, got {n}")));
    }
    if indices.iter().any(|&i| i >= n) {
        return Err(Error::InvalidInput("moment index out of range".into()));
    }
    let factor = cholesky_like_factor(cov)?;
    let [a, b, c, d] = indices;
    let closed = cov[(a, b)] * cov[(c, d)] + cov[(a, c)] * cov[(b, d)] + cov[(a, d)] * cov[(b, c)];
    let mut rng = stream_rng(seed, 0);
    let mut acc = Accumulator::default();
    for _ in 0..n_samples {
        let z = DMatrix::<f64>::from_fn(n, 1, |_, _| f64::standard_normal(&mut rng));
        let x = &factor * z;
        acc.push(x[a] * x[b] * x[c] * x[d]);
    }
    Ok(MomentCheck {
        mc: acc.finish(),
        closed,
    })
}

/// Monte-Carlo E[Π_k (x_{i_k} − mean)] under the model.
pub fn central_moment(model: &NeighborhoodModel, indices: &[usize], n_samples: usize, seed: u64) -> Result<McEstimate> {
    if indices.is_empty() || indices.iter().any(|&i| i >= PATCH_LEN) {
        return Err(Error::InvalidInput("moment indices must be patch positions".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut acc = Accumulator::default();
    for _ in 0..n_samples {
        let x = model.sample(&mut rng);
        acc.push(indices.iter().map(|&i| x[i] - model.mean).product());
    }
    Ok(acc.finish())
}

/// β̂ = Σ_i (x_i − μ) Σ_j (x_j − μ) / Σ_i (Σ_j (x_j − μ))², summed site by site.
pub fn mpl_beta_direct<F: Scalar>(config: &Configuration<F>, mu_hat: F) -> Result<F> {
    let delta = F::from_count(crate::lattice::MOORE_SUPPORT);
    let cells = config.cells();
    let (mut num, mut den) = (F::zero(), F::zero());
    for row in 0..config.rows() {
        for col in 0..config.cols() {
            let dev = config.neighbor_sum(row, col) - delta * mu_hat;
            num = num + (cells[row * config.cols() + col] - mu_hat) * dev;
            den = den + dev * dev;
        }
    }
    if den == F::zero() || !den.is_finite() {
        return Err(Error::Degenerate("neighbour deviations vanish; beta is not identifiable".into()));
    }
    Ok(num / den)
}
