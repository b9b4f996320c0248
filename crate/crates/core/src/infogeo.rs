//! Patch-covariance statistics and the closed-form information geometry of
//! the model: both Fisher metric tensors, entropy, the maximum
//! pseudo-likelihood estimate of β and its asymptotic variance.
//!
//! Everything here is a function of the 9×9 covariance Σ_p of the local
//! 3×3 patterns, through two scalars: ‖ρ‖₊, the summed centre-to-neighbour
//! covariances, and ‖Σ_p⁻‖₊, the summed neighbour-to-neighbour covariances.
//! Kronecker entry sums are evaluated with ‖A⊗B‖₊ = ‖A‖₊‖B‖₊.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::ModelParams;
use crate::lattice::{Configuration, Patch, MOORE_SUPPORT, NEIGHBOR_SLOTS, PATCH_CENTER, PATCH_LEN};
use crate::scalar::{entry_sum, Scalar};

/// Below this magnitude ‖Σ_p⁻‖₊ is treated as zero and β is unidentifiable.
pub const DEGENERATE_NEIGHBOR_SUM: f64 = 1e-12;

/// Σ_p and its split into the neighbour block Σ_p⁻ and the centre row ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchStats<F> {
    pub sigma_p: [[F; PATCH_LEN]; PATCH_LEN],
    pub sigma_minus: [[F; MOORE_SUPPORT]; MOORE_SUPPORT],
    pub rho: [F; MOORE_SUPPORT],
    pub center_variance: F,
    /// No variation at all across the patches (or non-finite input).
    pub degenerate: bool,
}

impl<F: Scalar> PatchStats<F> {
    /// Decompose a 9×9 covariance whose index 4 is the centre site.
    pub fn from_covariance(sigma_p: [[F; PATCH_LEN]; PATCH_LEN]) -> Self {
        let mut sigma_minus = [[F::zero(); MOORE_SUPPORT]; MOORE_SUPPORT];
        let mut rho = [F::zero(); MOORE_SUPPORT];
        for (a, &ia) in NEIGHBOR_SLOTS.iter().enumerate() {
            rho[a] = sigma_p[PATCH_CENTER][ia];
            for (b, &ib) in NEIGHBOR_SLOTS.iter().enumerate() {
                sigma_minus[a][b] = sigma_p[ia][ib];
            }
        }
        let finite = sigma_p.as_flattened().iter().all(|v| v.is_finite());
        let trace = (0..PATCH_LEN).fold(F::zero(), |acc, k| acc + sigma_p[k][k]);
        Self {
            sigma_p,
            sigma_minus,
            rho,
            center_variance: sigma_p[PATCH_CENTER][PATCH_CENTER],
            degenerate: !finite || trace == F::zero(),
        }
    }

    /// ‖ρ‖₊
    pub fn rho_sum(&self) -> F {
        entry_sum(&self.rho)
    }

    /// ‖Σ_p⁻‖₊
    pub fn sigma_minus_sum(&self) -> F {
        entry_sum(self.sigma_minus.as_flattened())
    }

    fn sums(&self) -> KronSums<F> {
        let rho = &self.rho[..];
        let minus = self.sigma_minus.as_flattened();
        KronSums {
            r: entry_sum(rho),
            s: entry_sum(minus),
            rr: kron_sum(rho, rho),
            rs: kron_sum(rho, minus),
            ss: kron_sum(minus, minus),
        }
    }
}

struct KronSums<F> {
    r: F,
    s: F,
    rr: F,
    rs: F,
    ss: F,
}

/// Sample covariance of the patch vectors, divisor n, centred on the
/// per-coordinate means.
pub fn patch_covariance<F: Scalar>(patches: &[Patch<F>]) -> Result<PatchStats<F>> {
    if patches.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "patch covariance needs at least 2 patches, got {}",
            patches.len()
        )));
    }
    let n = F::from_count(patches.len());
    let mut mean = [F::zero(); PATCH_LEN];
    for p in patches {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m = *m + v;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut cov = [[F::zero(); PATCH_LEN]; PATCH_LEN];
    let mut centered = [F::zero(); PATCH_LEN];
    for p in patches {
        for k in 0..PATCH_LEN {
            centered[k] = p[k] - mean[k];
        }
        for a in 0..PATCH_LEN {
            let ca = centered[a];
            for b in a..PATCH_LEN {
                cov[a][b] = cov[a][b] + ca * centered[b];
            }
        }
    }
    for a in 0..PATCH_LEN {
        for b in a..PATCH_LEN {
            let v = cov[a][b] / n;
            cov[a][b] = v;
            cov[b][a] = v;
        }
    }
    Ok(PatchStats::from_covariance(cov))
}

/// ‖A ⊗ B‖₊ for entry sequences `a`, `b` (vectors or flattened matrices).
pub fn kron_sum<F: Scalar>(a: &[F], b: &[F]) -> F {
    entry_sum(a) * entry_sum(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TensorKind {
    /// Expected outer product of the score.
    TypeI,
    /// Negative expected Hessian.
    TypeII,
}

/// The four distinct entries of a metric tensor with the block structure
/// `[[x, 0, 0], [0, y, w], [0, w, z]]` in the (μ, σ², β) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherTensor<F> {
    /// I_μμ
    pub x: F,
    /// I_σ²σ²
    pub y: F,
    /// I_ββ
    pub z: F,
    /// I_σ²β
    pub w: F,
    pub kind: TensorKind,
}

/// One of the distinct tensor entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    MuMu,
    Sigma2Sigma2,
    Sigma2Beta,
    BetaBeta,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::MuMu,
        Component::Sigma2Sigma2,
        Component::Sigma2Beta,
        Component::BetaBeta,
    ];

    /// Short name used in file columns and on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            Component::MuMu => "mumu",
            Component::Sigma2Sigma2 => "s2s2",
            Component::Sigma2Beta => "s2b",
            Component::BetaBeta => "bb",
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.short_name() == name)
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_short_name(s).ok_or_else(|| {
            Error::InvalidInput(format!("unknown component {s:?} (expected mumu, s2s2, s2b or bb)"))
        })
    }
}

impl<F: Scalar> FisherTensor<F> {
    pub fn component(&self, c: Component) -> F {
        match c {
            Component::MuMu => self.x,
            Component::Sigma2Sigma2 => self.y,
            Component::Sigma2Beta => self.w,
            Component::BetaBeta => self.z,
        }
    }

    /// Full 3×3 matrix in (μ, σ², β) order. The μ-row and μ-column are zero
    /// off the diagonal by construction.
    pub fn matrix(&self) -> [[F; 3]; 3] {
        let o = F::zero();
        [[self.x, o, o], [o, self.y, self.w], [o, self.w, self.z]]
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.w].iter().all(|v| v.is_finite())
    }
}

/// Type-I metric tensor (expected squared score).
///
/// The quartic β term of I_σ²σ² carries the coefficient 3/4: the score for σ²
/// contains e²/(2σ⁴), so the β⁴ part of E[e⁴] = 3β⁴‖Σ_p⁻‖₊² is divided by 4.
/// The other terms follow the same Isserlis reduction unchanged.
pub fn tensor_g1<F: Scalar>(params: &ModelParams<F>, stats: &PatchStats<F>) -> FisherTensor<F> {
    let KronSums { r, s, rr, rs, ss } = stats.sums();
    let b = params.beta;
    let s2 = params.sigma2;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let s8 = s4 * s4;
    let c = F::of;
    let lead = F::one() - b * params.delta_f();
    let quad = c(2.0) * b * r - b * b * s;

    let x = lead * lead / s2 * (F::one() - quad / s2);
    let y = F::one() / (c(2.0) * s4) - quad / s6
        + (c(3.0) * b * b * rr - c(3.0) * b * b * b * rs + c(0.75) * b * b * b * b * ss) / s8;
    let w = (r - b * s) / s4
        - (c(6.0) * b * rr - c(9.0) * b * b * rs + c(3.0) * b * b * b * ss) / (c(2.0) * s6);
    let z = s / s2 + (c(2.0) * rr - c(6.0) * b * rs + c(3.0) * b * b * ss) / s4;
    FisherTensor {
        x,
        y,
        z,
        w,
        kind: TensorKind::TypeI,
    }
}

/// Type-II metric tensor (negative expected Hessian).
pub fn tensor_g2<F: Scalar>(params: &ModelParams<F>, stats: &PatchStats<F>) -> FisherTensor<F> {
    let r = stats.rho_sum();
    let s = stats.sigma_minus_sum();
    let b = params.beta;
    let s2 = params.sigma2;
    let s4 = s2 * s2;
    let lead = F::one() - b * params.delta_f();
    FisherTensor {
        x: lead * lead / s2,
        y: F::one() / (F::of(2.0) * s4) - (F::of(2.0) * b * r - b * b * s) / (s4 * s2),
        z: s / s2,
        w: (r - b * s) / s4,
        kind: TensorKind::TypeII,
    }
}

/// Entropy of a Gaussian with variance σ²: ½(log 2πσ² + 1).
pub fn gaussian_entropy<F: Scalar>(sigma2: F) -> F {
    F::of(0.5) * ((F::TAU() * sigma2).ln() + F::one())
}

/// H_β = H_G − (1/σ²)(β‖ρ‖₊ − β²‖Σ_p⁻‖₊/2).
pub fn entropy<F: Scalar>(params: &ModelParams<F>, stats: &PatchStats<F>) -> F {
    let b = params.beta;
    gaussian_entropy(params.sigma2)
        - (b * stats.rho_sum() - b * b * F::of(0.5) * stats.sigma_minus_sum()) / params.sigma2
}

/// β̂ = ‖ρ‖₊ / ‖Σ_p⁻‖₊.
pub fn mpl_beta<F: Scalar>(stats: &PatchStats<F>) -> Result<F> {
    let s = stats.sigma_minus_sum();
    if !s.is_finite() || s.abs() < F::of(DEGENERATE_NEIGHBOR_SUM) {
        return Err(Error::Degenerate(format!(
            "neighbour covariance sum is {s}; beta is not identifiable"
        )));
    }
    let beta = stats.rho_sum() / s;
    if !beta.is_finite() {
        return Err(Error::Degenerate("non-finite pseudo-likelihood estimate".into()));
    }
    Ok(beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanVar<F> {
    pub mean: F,
    /// Divisor-n variance.
    pub variance: F,
}

impl<F: Scalar> MeanVar<F> {
    /// Zero or non-finite variance: no valid σ² for the model.
    pub fn is_degenerate(&self) -> bool {
        !(self.variance > F::zero()) || !self.variance.is_finite() || !self.mean.is_finite()
    }
}

pub fn sample_mean_var<F: Scalar>(config: &Configuration<F>) -> Result<MeanVar<F>> {
    let cells = config.cells();
    if cells.len() < 2 {
        return Err(Error::InvalidInput("need at least two cells".into()));
    }
    let n = F::from_count(cells.len());
    let mean = entry_sum(cells) / n;
    let variance = cells
        .iter()
        .fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean))
        / n;
    Ok(MeanVar { mean, variance })
}

/// υ_β = I_ββ⁽¹⁾ / (I_ββ⁽²⁾)².
pub fn asymptotic_variance<F: Scalar>(g1: &FisherTensor<F>, g2: &FisherTensor<F>) -> Result<F> {
    if g1.kind != TensorKind::TypeI || g2.kind != TensorKind::TypeII {
        return Err(Error::InvalidInput(
            "asymptotic variance takes a type-I and a type-II tensor, in that order".into(),
        ));
    }
    if g2.z == F::zero() || !g2.z.is_finite() {
        return Err(Error::Degenerate("type-II beta-beta information is zero".into()));
    }
    Ok(g1.z / (g2.z * g2.z))
}

/// ds² = x dμ² + y dσ²² + z dβ² + 2w dβ dσ².
pub fn ds_squared<F: Scalar>(tensor: &FisherTensor<F>, displacement: [F; 3]) -> F {
    let [dmu, ds2, dbeta] = displacement;
    tensor.x * dmu * dmu
        + tensor.y * ds2 * ds2
        + tensor.z * dbeta * dbeta
        + F::of(2.0) * tensor.w * dbeta * ds2
}

/// Everything estimated from a single snapshot, with β taken as β̂_MPL.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotAnalysis<F> {
    pub mean_var: MeanVar<F>,
    pub stats: PatchStats<F>,
    pub estimate: Option<Estimate<F>>,
}

/// Quantities that exist only when the snapshot is not degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<F> {
    pub params: ModelParams<F>,
    pub entropy: F,
    pub g1: FisherTensor<F>,
    pub g2: FisherTensor<F>,
    pub upsilon_beta: Option<F>,
}

impl<F: Scalar> SnapshotAnalysis<F> {
    pub fn is_degenerate(&self) -> bool {
        self.estimate.is_none()
    }

    pub fn beta_mpl(&self) -> Option<F> {
        self.estimate.map(|e| e.params.beta)
    }
}

/// Estimate (μ̂, σ̂², β̂_MPL) from `config` and evaluate entropy, both
/// tensors and υ_β at that point.
pub fn analyze<F: Scalar>(config: &Configuration<F>, delta: usize) -> Result<SnapshotAnalysis<F>> {
    let mean_var = sample_mean_var(config)?;
    let stats = patch_covariance(&config.extract_patches())?;
    let estimate = if mean_var.is_degenerate() || stats.degenerate {
        None
    } else {
        match mpl_beta(&stats) {
            Ok(beta) => {
                let params = ModelParams::new(mean_var.mean, mean_var.variance, beta, delta)?;
                let g1 = tensor_g1(&params, &stats);
                let g2 = tensor_g2(&params, &stats);
                let entropy = entropy(&params, &stats);
                if g1.is_finite() && g2.is_finite() && entropy.is_finite() {
                    Some(Estimate {
                        params,
                        entropy,
                        g1,
                        g2,
                        upsilon_beta: asymptotic_variance(&g1, &g2).ok(),
                    })
                } else {
                    None
                }
            }
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(SnapshotAnalysis {
        mean_var,
        stats,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(sigma2: f64, beta: f64) -> ModelParams<f64> {
        ModelParams::moore(0.0, sigma2, beta).unwrap()
    }

    /// Stats with prescribed ‖ρ‖₊ and ‖Σ_p⁻‖₊, spread evenly over entries.
    fn stats_with_sums(r: f64, s: f64, center: f64) -> PatchStats<f64> {
        let mut cov = [[s / 64.0; 9]; 9];
        for k in 0..9 {
            cov[4][k] = r / 8.0;
            cov[k][4] = r / 8.0;
        }
        cov[4][4] = center;
        PatchStats::from_covariance(cov)
    }

    fn iid_stats(sigma2: f64) -> PatchStats<f64> {
        let mut cov = [[0.0; 9]; 9];
        for (k, row) in cov.iter_mut().enumerate() {
            row[k] = sigma2;
        }
        PatchStats::from_covariance(cov)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn decomposition_of_sums() {
        let st = stats_with_sums(10.0, 50.0, 5.0);
        assert!(close(st.rho_sum(), 10.0, 1e-14));
        assert!(close(st.sigma_minus_sum(), 50.0, 1e-14));
        assert_eq!(st.center_variance, 5.0);
        assert!(!st.degenerate);
    }

    #[test]
    fn identical_patches_are_degenerate() {
        let patches = vec![[1.5f64; 9]; 10];
        let st = patch_covariance(&patches).unwrap();
        assert!(st.degenerate);
        assert_eq!(st.sigma_p, [[0.0; 9]; 9]);
        assert_eq!(st.rho, [0.0; 8]);
        assert!(matches!(mpl_beta(&st), Err(Error::Degenerate(_))));
    }

    #[test]
    fn too_few_patches() {
        assert!(patch_covariance::<f64>(&[]).is_err());
        assert!(patch_covariance(&[[0.0f64; 9]]).is_err());
    }

    #[test]
    fn two_patch_identity() {
        let a: [f64; 9] = [1.0, -2.0, 0.5, 3.0, 4.0, -1.0, 0.0, 2.5, 7.0];
        let b: [f64; 9] = [0.0, 1.0, 1.5, -3.0, 2.0, 1.0, 5.0, -0.5, 1.0];
        let st = patch_covariance(&[a, b]).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let expected = 0.25 * (a[i] - b[i]) * (a[j] - b[j]);
                assert!((st.sigma_p[i][j] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn iid_patch_covariance_sampling() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let patches: Vec<[f64; 9]> = (0..100_000)
            .map(|_| std::array::from_fn(|_| f64::standard_normal(&mut rng)))
            .collect();
        let st = patch_covariance(&patches).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((st.sigma_p[i][j] - target).abs() < 0.02);
            }
        }
    }

    #[test]
    fn kron_sum_small_cases() {
        assert_eq!(kron_sum(&[1.0, 2.0], &[1.0, 2.0]), 9.0);
        assert_eq!(kron_sum(&[0.0; 4], &[3.0, -1.0, 2.0]), 0.0);
    }

    fn materialized_kron(a: &[f64], ar: usize, b: &[f64], br: usize) -> Vec<f64> {
        let (ac, bc) = (a.len() / ar, b.len() / br);
        let mut out = vec![0.0; a.len() * b.len()];
        let cols = ac * bc;
        for i in 0..ar {
            for j in 0..ac {
                for k in 0..br {
                    for l in 0..bc {
                        out[(i * br + k) * cols + j * bc + l] = a[i * ac + j] * b[k * bc + l];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn kron_sum_matches_materialized_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let full = materialized_kron(&a, 8, &b, 8);
            assert_eq!(full.len(), 64 * 64);
            let direct: f64 = full.iter().sum();
            let fast = kron_sum(&a, &b);
            assert!((direct - fast).abs() <= 1e-9 * direct.abs().max(1e-3));
        }
    }

    #[test]
    fn g1_hand_values() {
        let g = tensor_g1(&p(5.0, 0.1), &stats_with_sums(10.0, 50.0, 5.0));
        assert!(close(g.x, 0.0056, 1e-12));
        assert!(close(g.z, 9.0, 1e-12));
        assert_eq!(g.kind, TensorKind::TypeI);
    }

    #[test]
    fn g2_hand_values() {
        let g = tensor_g2(&p(5.0, 0.1), &stats_with_sums(10.0, 50.0, 5.0));
        assert!(close(g.x, 0.008, 1e-12));
        assert!(close(g.w, 0.2, 1e-12));
        assert!(close(g.z, 10.0, 1e-12));
        let g = tensor_g2(&p(1.0, 0.125), &stats_with_sums(10.0, 50.0, 1.0));
        assert_eq!(g.x, 0.0);
    }

    #[test]
    fn both_tensors_reduce_to_gaussian_metric_at_zero_beta() {
        for sigma2 in [0.5, 1.0, 5.0] {
            let st = iid_stats(sigma2);
            for g in [tensor_g1(&p(sigma2, 0.0), &st), tensor_g2(&p(sigma2, 0.0), &st)] {
                assert!(close(g.x, 1.0 / sigma2, 1e-14));
                assert!(close(g.y, 0.5 / (sigma2 * sigma2), 1e-14));
                assert!(close(g.z, 8.0, 1e-14));
                assert_eq!(g.w, 0.0);
            }
        }
    }

    #[test]
    fn entropy_values() {
        let h0 = entropy(&p(5.0, 0.0), &stats_with_sums(10.0, 50.0, 5.0));
        assert!(close(h0, 0.5 * ((10.0 * std::f64::consts::PI).ln() + 1.0), 1e-15));
        assert!((h0 - 2.2237).abs() < 1e-4);
        let h = entropy(&p(5.0, 0.1), &stats_with_sums(10.0, 50.0, 5.0));
        assert!(close(h, h0 - 0.15, 1e-14));
    }

    #[test]
    fn mpl_beta_values() {
        assert_eq!(mpl_beta(&iid_stats(2.0)).unwrap(), 0.0);
        assert!(close(mpl_beta(&stats_with_sums(10.0, 50.0, 5.0)).unwrap(), 0.2, 1e-14));
    }

    #[test]
    fn sample_mean_var_values() {
        let constant = Configuration::constant(3, 3, 3.0f64).unwrap();
        let mv = sample_mean_var(&constant).unwrap();
        assert_eq!((mv.mean, mv.variance), (3.0, 0.0));
        assert!(mv.is_degenerate());

        // Cells alternate 0 and 2 over a 4x4 lattice.
        let two_level = Configuration::from_fn(4, 4, |r, c| ((r + c) % 2) as f64 * 2.0).unwrap();
        let mv = sample_mean_var(&two_level).unwrap();
        assert_eq!((mv.mean, mv.variance), (1.0, 1.0));
        assert!(!mv.is_degenerate());
    }

    #[test]
    fn sample_variance_of_large_iid_field() {
        let cfg = Configuration::<f64>::iid_gaussian(512, 512, 0.0, 5.0, 3).unwrap();
        let mv = sample_mean_var(&cfg).unwrap();
        assert!((mv.variance - 5.0).abs() < 0.25);
    }

    #[test]
    fn asymptotic_variance_values() {
        let mk = |z: f64, kind| FisherTensor { x: 1.0, y: 1.0, z, w: 0.0, kind };
        let v = asymptotic_variance(&mk(9.0, TensorKind::TypeI), &mk(10.0, TensorKind::TypeII)).unwrap();
        assert!(close(v, 0.09, 1e-15));
        let v = asymptotic_variance(&mk(4.0, TensorKind::TypeI), &mk(4.0, TensorKind::TypeII)).unwrap();
        assert!(close(v, 0.25, 1e-15));
        assert!(asymptotic_variance(&mk(4.0, TensorKind::TypeI), &mk(0.0, TensorKind::TypeII)).is_err());
        assert!(asymptotic_variance(&mk(4.0, TensorKind::TypeII), &mk(4.0, TensorKind::TypeI)).is_err());
    }

    #[test]
    fn ds_squared_values() {
        let g = tensor_g2(&p(5.0, 0.0), &iid_stats(5.0));
        assert_eq!(ds_squared(&g, [0.0, 0.0, 0.0]), 0.0);
        assert!(close(ds_squared(&g, [1.0, 0.0, 0.0]), 0.2, 1e-15));
    }

    #[test]
    fn analyze_constant_field_is_degenerate() {
        let cfg = Configuration::constant(8, 8, 1.0f64).unwrap();
        let a = analyze(&cfg, 8).unwrap();
        assert!(a.is_degenerate());
        assert!(a.beta_mpl().is_none());
    }

    #[test]
    fn single_precision_tensors() {
        let st = PatchStats::<f32>::from_covariance({
            let mut cov = [[0.0f32; 9]; 9];
            for (k, row) in cov.iter_mut().enumerate() {
                row[k] = 2.0;
            }
            cov
        });
        let g = tensor_g1(&ModelParams::moore(0.0f32, 2.0, 0.0).unwrap(), &st);
        assert!((g.z - 8.0).abs() < 1e-6);
        assert!((g.x - 0.5).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn kron_sum_is_product_of_sums(
            a in proptest::collection::vec(-100.0f64..100.0, 1..40),
            b in proptest::collection::vec(-100.0f64..100.0, 1..40),
        ) {
            let direct: f64 = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).sum();
            let fast = kron_sum(&a, &b);
            let scale = a.iter().map(|v| v.abs()).sum::<f64>() * b.iter().map(|v| v.abs()).sum::<f64>();
            prop_assert!((direct - fast).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn truncation_remainders(
            r in -20.0f64..20.0,
            s in 0.1f64..100.0,
            sigma2 in 0.2f64..10.0,
            beta in -0.5f64..0.5,
        ) {
            let st = stats_with_sums(r, s, sigma2);
            let params = p(sigma2, beta);
            let g1 = tensor_g1(&params, &st);
            let g2 = tensor_g2(&params, &st);
            let (s2, s4, s6, s8) = (sigma2, sigma2.powi(2), sigma2.powi(3), sigma2.powi(4));
            let q = 2.0 * beta * r - beta * beta * s;
            let lead = (1.0 - 8.0 * beta).powi(2);
            let dx = -lead * q / s4;
            let dy = 3.0 * q * q / (4.0 * s8);
            let dw = -(6.0 * beta * r * r - 9.0 * beta * beta * r * s + 3.0 * beta.powi(3) * s * s) / (2.0 * s6);
            let dz = (2.0 * r * r - 6.0 * beta * r * s + 3.0 * beta * beta * s * s) / s4;
            let _ = s2;
            for (got, want, scale) in [
                (g1.x - g2.x, dx, g1.x.abs() + g2.x.abs()),
                (g1.y - g2.y, dy, g1.y.abs() + g2.y.abs()),
                (g1.w - g2.w, dw, g1.w.abs() + g2.w.abs()),
                (g1.z - g2.z, dz, g1.z.abs() + g2.z.abs()),
            ] {
                prop_assert!((got - want).abs() <= 1e-10 * scale.max(1.0), "{got} vs {want}");
            }
        }

        #[test]
        fn structural_zeros_and_symmetry(
            r in -20.0f64..20.0,
            s in 0.1f64..100.0,
            sigma2 in 0.2f64..10.0,
            beta in -0.5f64..0.5,
        ) {
            let st = stats_with_sums(r, s, sigma2);
            for g in [tensor_g1(&p(sigma2, beta), &st), tensor_g2(&p(sigma2, beta), &st)] {
                let m = g.matrix();
                prop_assert_eq!(m[0][1], 0.0);
                prop_assert_eq!(m[0][2], 0.0);
                prop_assert_eq!(m[1][0], 0.0);
                prop_assert_eq!(m[2][0], 0.0);
                prop_assert_eq!(m[1][2], m[2][1]);
            }
        }

        #[test]
        fn entropy_tensor_form(
            r in -20.0f64..20.0,
            s in 0.1f64..100.0,
            sigma2 in 0.2f64..10.0,
            beta in -0.5f64..0.5,
        ) {
            let st = stats_with_sums(r, s, sigma2);
            let params = p(sigma2, beta);
            let h = entropy(&params, &st);
            let z2 = tensor_g2(&params, &st).z;
            let via_tensor = gaussian_entropy(sigma2) - (beta / sigma2 * r - beta * beta / 2.0 * z2);
            prop_assert!((h - via_tensor).abs() <= 1e-12 * h.abs().max(1.0));
        }

        #[test]
        fn asymptotic_variance_expanded_form(i1 in 0.01f64..100.0, i2 in 0.01f64..100.0) {
            let mk = |z: f64, kind| FisherTensor { x: 1.0, y: 1.0, z, w: 0.0, kind };
            let v = asymptotic_variance(&mk(i1, TensorKind::TypeI), &mk(i2, TensorKind::TypeII)).unwrap();
            let expanded = 1.0 / i2 + (i1 - i2) / (i2 * i2);
            prop_assert!((v - expanded).abs() <= 1e-12 * v.abs().max(1.0));
        }

        #[test]
        fn ds_squared_is_quadratic_form(
            x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0, w in -5.0f64..5.0,
            d in proptest::array::uniform3(-3.0f64..3.0),
        ) {
            let g = FisherTensor { x, y, z, w, kind: TensorKind::TypeI };
            let m = g.matrix();
            let mut full = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    full += d[i] * m[i][j] * d[j];
                }
            }
            prop_assert!((ds_squared(&g, d) - full).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }
}
