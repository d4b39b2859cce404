//! Sparse VAR processes with prescribed maxlag structure.
//!
//! Coefficients are `B_ij^(ℓ) = s · d_ij · 0.5^(ℓ−1)` for `ℓ ≤ L_ij`, with random
//! signs `d_ij` and a global scale `s` chosen so that the companion matrix has a
//! given spectral radius. Randomness comes from ChaCha8 seeded with the dataset
//! seed: stream 0 draws the signs, stream 1 the Gaussian innovations.

use faer::Mat;
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::gelfand_spectral_radius;
use crate::series::{maxlag_of, CoefficientTensor, MaxlagMatrix, TimeSeriesPanel};
use crate::{Error, Result};

pub const DEFAULT_SIGMA_U: f64 = 0.1;
pub const DEFAULT_SPECTRAL_RADIUS: f64 = 0.8;
pub const DEFAULT_BURN_IN: usize = 500;
pub const DEFAULT_OWN_BOOST: f64 = 3.0;
pub const LAG_DECAY: f64 = 0.5;
const RADIUS_TOL: f64 = 1e-9;
const ACCEPT_TOL: f64 = 1e-6;
const NILPOTENT_TOL: f64 = 1e-6;
/// Companion sizes up to which the eigenvalue answer is double-checked.
const PRECISE_MAX_DIM: usize = 256;
const GELFAND_SQUARINGS: i32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Row blocks with maxlags `1..=5`.
    Componentwise,
    /// Pure own-lag block, then two blocks with own lag 2.
    OwnOther,
    /// `4 × 4` block pattern with anti-diagonal decay.
    Elementwise,
    Custom { maxlag: MaxlagMatrix },
}

impl Scenario {
    pub fn number(&self) -> Option<u8> {
        match self {
            Self::Componentwise => Some(1),
            Self::OwnOther => Some(2),
            Self::Elementwise => Some(3),
            Self::Custom { .. } => None,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::Componentwise),
            2 => Ok(Self::OwnOther),
            3 => Ok(Self::Elementwise),
            _ => Err(Error::Scenario(format!("unknown scenario {n}; expected 1, 2 or 3"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub k: usize,
    pub p: usize,
    /// Number of observations after the `p` presample columns.
    pub t: usize,
    /// Innovation standard deviation; `Σᵤ = sigma_u² I`.
    pub sigma_u: f64,
    pub seed: u64,
    pub target_spectral_radius: f64,
    pub burn_in: usize,
    /// Own-lag sign magnitude in the own-other scenario.
    pub own_boost: f64,
    /// Own maxlag of the first own-other block (1 or 2).
    pub block1_own_lag: usize,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, k: usize, p: usize, t: usize, seed: u64) -> Self {
        Self {
            scenario,
            k,
            p,
            t,
            sigma_u: DEFAULT_SIGMA_U,
            seed,
            target_spectral_radius: DEFAULT_SPECTRAL_RADIUS,
            burn_in: DEFAULT_BURN_IN,
            own_boost: DEFAULT_OWN_BOOST,
            block1_own_lag: 1,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn maxlag(&self) -> Result<MaxlagMatrix> {
        let l = match &self.scenario {
            Scenario::Componentwise => maxlag_scenario1(self.k, self.p)?,
            Scenario::OwnOther => maxlag_scenario2(self.k, self.p, self.block1_own_lag)?,
            Scenario::Elementwise => maxlag_scenario3(self.k, self.p)?,
            Scenario::Custom { maxlag } => {
                if maxlag.k() != self.k || maxlag.p() != self.p {
                    return Err(Error::Scenario(format!(
                        "custom maxlag is {}x{} with p = {}, spec has k = {}, p = {}",
                        maxlag.k(),
                        maxlag.k(),
                        maxlag.p(),
                        self.k,
                        self.p
                    )));
                }
                maxlag.clone()
            }
        };
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Scenario("series length must be positive".into()));
        }
        if !(self.sigma_u >= 0.0) || !self.sigma_u.is_finite() {
            return Err(Error::Scenario(format!("noise scale {} must be finite and >= 0", self.sigma_u)));
        }
        if !(self.target_spectral_radius > 0.0 && self.target_spectral_radius < 1.0) {
            return Err(Error::Scenario(format!(
                "target spectral radius {} must lie in (0, 1)",
                self.target_spectral_radius
            )));
        }
        if !(self.own_boost > 0.0) || !self.own_boost.is_finite() {
            return Err(Error::Scenario("own boost must be positive".into()));
        }
        self.maxlag().map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub panel: TimeSeriesPanel<f64>,
    pub true_b: CoefficientTensor<f64>,
    pub true_l: MaxlagMatrix,
    pub spec: ScenarioSpec,
}

fn check_blocks(k: usize, blocks: usize, p: usize, max_lag: usize) -> Result<usize> {
    if k == 0 || !k.is_multiple_of(blocks) {
        return Err(Error::Scenario(format!("k = {k} must be a positive multiple of {blocks}")));
    }
    if p < max_lag {
        return Err(Error::Scenario(format!("p = {p} is below the scenario's largest maxlag {max_lag}")));
    }
    Ok(k / blocks)
}

/// Five row blocks of height `k/5`; block `b` has maxlag `b` in every column.
pub fn maxlag_scenario1(k: usize, p: usize) -> Result<MaxlagMatrix> {
    let h = check_blocks(k, 5, p, 5)?;
    MaxlagMatrix::new(Array2::from_shape_fn((k, k), |(i, _)| i / h + 1), p)
}

/// Three row blocks of height `k/3`: own lag only (`block1_own_lag`), then own 2 /
/// other 1, then own 2 / other 2.
pub fn maxlag_scenario2(k: usize, p: usize, block1_own_lag: usize) -> Result<MaxlagMatrix> {
    if !(1..=2).contains(&block1_own_lag) {
        return Err(Error::Scenario(format!("block-1 own lag {block1_own_lag} must be 1 or 2")));
    }
    let h = check_blocks(k, 3, p, 2)?;
    MaxlagMatrix::new(
        Array2::from_shape_fn((k, k), |(i, j)| match (i / h, i == j) {
            (0, true) => block1_own_lag,
            (0, false) => 0,
            (1, true) => 2,
            (1, false) => 1,
            _ => 2,
        }),
        p,
    )
}

/// `((4,3,2,1),(3,2,1,0),(2,1,0,0),(1,0,0,0)) ⊗ 1 1ᵀ` with blocks of size `k/4`.
pub fn maxlag_scenario3(k: usize, p: usize) -> Result<MaxlagMatrix> {
    let h = check_blocks(k, 4, p, 4)?;
    MaxlagMatrix::new(
        Array2::from_shape_fn((k, k), |(i, j)| 4usize.saturating_sub(i / h + j / h)),
        p,
    )
}

/// Spectral radius of the `kp × kp` companion matrix from its eigenvalues.
/// Defective spectra (repeated eigenvalues in Jordan blocks) lose accuracy;
/// see [`gelfand_spectral_radius`].
pub fn companion_spectral_radius(tensor: &CoefficientTensor<f64>) -> Result<f64> {
    if tensor.b().iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let c = companion_array(tensor);
    let n = c.nrows();
    Mat::<f64>::from_fn(n, n, |r, col| c[[r, col]])
        .eigenvalues()
        .map(|ev| ev.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max))
        .map_err(|e| Error::InvalidArgument(format!("companion eigenvalues: {e:?}")))
}

/// Unscaled coefficients: `B_ij^(ℓ) = d_ij · 0.5^(ℓ−1)` for `ℓ ≤ L_ij`, with
/// `d_ij` a random sign, or `own_boost` on the diagonal when given.
pub fn coefficient_shape(maxlag: &MaxlagMatrix, seed: u64, own_boost: Option<f64>) -> Array3<f64> {
    let (k, p) = (maxlag.k(), maxlag.p());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut shape = Array3::<f64>::zeros((k, k, p));
    for i in 0..k {
        for j in 0..k {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let d = match own_boost {
                Some(boost) if i == j => boost,
                _ => sign,
            };
            let mut decay = 1.0;
            for l in 0..maxlag.get(i, j) {
                shape[[i, j, l]] = d * decay;
                decay *= LAG_DECAY;
            }
        }
    }
    shape
}

/// [`coefficient_shape`] scaled so the companion spectral radius equals
/// `target_spectral_radius` within `1e-6`. Fails when the drawn signs make the
/// companion matrix nilpotent, since no scale then reaches the target.
pub fn generate_coefficients(
    maxlag: &MaxlagMatrix,
    seed: u64,
    target_spectral_radius: f64,
    own_boost: Option<f64>,
) -> Result<CoefficientTensor<f64>> {
    if !(target_spectral_radius > 0.0 && target_spectral_radius < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target spectral radius {target_spectral_radius} must lie in (0, 1)"
        )));
    }
    let k = maxlag.k();
    let shape = coefficient_shape(maxlag, seed, own_boost);
    let scaled = |s: f64| CoefficientTensor::new(shape.mapv(|v| v * s), Array1::zeros(k));
    if maxlag.l1_norm() == 0 {
        return scaled(0.0);
    }
    let radius = |s: f64| -> Result<f64> { companion_spectral_radius(&scaled(s)?) };
    let scale = bisect_scale(radius, target_spectral_radius, (0.0, 1.0))?;
    if k * maxlag.p() > PRECISE_MAX_DIM {
        return scaled(scale);
    }
    // eigenvalues of a defective companion matrix are only accurate to
    // ε^(1/m); check against the double-double estimate and re-bisect on it
    // near the first answer when they disagree
    let precise = |s: f64| -> Result<f64> {
        Ok(gelfand_spectral_radius(companion_array(&scaled(s)?).view(), GELFAND_SQUARINGS))
    };
    if (precise(scale)? - target_spectral_radius).abs() <= ACCEPT_TOL {
        return scaled(scale);
    }
    let bracket = (scale * (1.0 - 1e-3), scale * (1.0 + 1e-3));
    scaled(bisect_scale(precise, target_spectral_radius, bracket)?)
}

/// Scale `s` with `radius(s) = target`, bisecting from `[lo, hi]`; `hi` is
/// doubled until it brackets the target.
fn bisect_scale(radius: impl Fn(f64) -> Result<f64>, target: f64, (mut lo, mut hi): (f64, f64)) -> Result<f64> {
    // a numerically zero radius at unit scale means the drawn signs cancel
    // into a nilpotent companion matrix, which no scale can fix
    if radius(1.0)? <= NILPOTENT_TOL {
        return Err(Error::Bisection("the coefficient signs give a nilpotent companion matrix".into()));
    }
    let mut doublings = 0;
    while radius(hi)? < target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::Bisection("could not bracket the target spectral radius".into()));
        }
    }
    if radius(lo)? > target {
        lo = 0.0;
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = radius(mid)?;
        let miss = (r - target).abs();
        if miss <= RADIUS_TOL {
            return Ok(mid);
        }
        if miss < best.0 {
            best = (miss, mid);
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    // rounding noise in the radius can collapse the bracket short of RADIUS_TOL
    if best.0 <= ACCEPT_TOL {
        return Ok(best.1);
    }
    Err(Error::Bisection(format!("scale bisection stalled in [{lo}, {hi}] without reaching radius {target}")))
}

fn companion_array(tensor: &CoefficientTensor<f64>) -> Array2<f64> {
    let (k, p) = (tensor.k(), tensor.p());
    let b = tensor.b();
    Array2::from_shape_fn((k * p, k * p), |(r, c)| {
        if r < k {
            b[[r, c % k, c / k]]
        } else if c + k == r {
            1.0
        } else {
            0.0
        }
    })
}

/// Iterates the VAR from a zero state with `N(0, sigma_u² I)` innovations,
/// drops `burn_in` steps and returns `t + p` columns.
pub fn simulate_var(
    tensor: &CoefficientTensor<f64>,
    sigma_u: f64,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeriesPanel<f64>> {
    if !(sigma_u >= 0.0) || !sigma_u.is_finite() {
        return Err(Error::InvalidArgument(format!("noise scale {sigma_u} must be finite and >= 0")));
    }
    let radius = companion_spectral_radius(tensor)?;
    if radius >= 1.0 {
        return Err(Error::NonStationary(radius));
    }
    let (k, p) = (tensor.k(), tensor.p());
    let keep = t + p;
    let total = burn_in + keep;
    let lags: Vec<Array2<f64>> = (1..=p).map(|l| tensor.lag_matrix(l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let mut y = Array2::<f64>::zeros((k, total + p));
    for s in p..total + p {
        let mut next = tensor.nu().clone();
        for (l, b) in lags.iter().enumerate() {
            next += &b.dot(&y.column(s - l - 1));
        }
        for v in next.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sigma_u * e;
        }
        y.column_mut(s).assign(&next);
    }
    let start = total + p - keep;
    TimeSeriesPanel::new(y.slice(ndarray::s![.., start..]).to_owned())
}

/// Coefficients and panel for one scenario replicate.
pub fn simulate(spec: &ScenarioSpec) -> Result<SimulatedDataset> {
    spec.validate()?;
    let true_l = spec.maxlag()?;
    let boost = matches!(spec.scenario, Scenario::OwnOther).then_some(spec.own_boost);
    let true_b = generate_coefficients(&true_l, spec.seed, spec.target_spectral_radius, boost)?;
    debug_assert_eq!(maxlag_of(&true_b, 0.0), true_l);
    let panel = simulate_var(&true_b, spec.sigma_u, spec.t, spec.burn_in, spec.seed)?;
    Ok(SimulatedDataset { panel, true_b, true_l, spec: spec.clone() })
}
