//! The linear-bandit environment: a hidden state driven by a known linear
//! Gaussian dynamical system, with the reward being the chosen action's
//! inner product with the state plus measurement noise.
//!
//! Measurement noise is counter-based: the noise added to action `i` at
//! round `t` depends only on the episode seed and `(t, i)`. Two policies
//! replaying the same episode therefore face the same state path and the
//! same per-action noise table, which pairs their regrets.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    psd_factor, psd_sqrt, sample_gaussian, solve_lyapunov, spectral_radius, symmetrize, Matrix,
    SpdMatrix, Vector,
};
use crate::rng::{counter_stream, derive_seed, stream, tag};

/// Entry distributions used to randomize environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamDist {
    Gaussian,
    Uniform,
    Exponential,
    Cauchy,
    Bernoulli,
}

impl ParamDist {
    pub const ALL: [ParamDist; 5] = [
        ParamDist::Gaussian,
        ParamDist::Uniform,
        ParamDist::Exponential,
        ParamDist::Cauchy,
        ParamDist::Bernoulli,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamDist::Gaussian => "gaussian",
            ParamDist::Uniform => "uniform",
            ParamDist::Exponential => "exponential",
            ParamDist::Cauchy => "cauchy",
            ParamDist::Bernoulli => "bernoulli",
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ParamDist::Gaussian => rng.sample(StandardNormal),
            ParamDist::Uniform => rng.random::<f64>(),
            ParamDist::Exponential => {
                let u: f64 = rng.random();
                -(1.0 - u).ln()
            }
            ParamDist::Cauchy => {
                // ratio of independent standard normals, as specified
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                x / y
            }
            ParamDist::Bernoulli => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for ParamDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ParamDist::ALL
            .iter()
            .copied()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown distribution '{s}'")))
    }
}

/// Provenance of a generated spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecMeta {
    pub dist: ParamDist,
    pub seed: u64,
    pub rho_target: f64,
}

/// The full known environment: state matrix, action set, noise covariances,
/// initial-state covariance.
///
/// `q` and `sigma0` are stored as general matrices. Generated specs always
/// carry symmetric PSD values; the robustness pipeline's similarity
/// transform can produce perceived specs that violate this, which
/// `validate_spec` reports instead of rejecting.
#[derive(Debug, Clone, PartialEq)]
pub struct LgdsSpec {
    pub gamma: Matrix,
    pub actions: Vec<Vector>,
    pub q: Matrix,
    pub sigma: f64,
    pub sigma0: Matrix,
    pub meta: Option<SpecMeta>,
}

impl LgdsSpec {
    pub fn d(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn k(&self) -> usize {
        self.actions.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Stacked observation matrix with one action per row (k x d).
    pub fn c_matrix(&self) -> Matrix {
        Matrix::from_fn(self.k(), self.d(), |i, j| self.actions[i][j])
    }

    pub fn q_spd(&self) -> SpdMatrix {
        SpdMatrix::new_unchecked(symmetrize(&self.q))
    }

    pub fn sigma0_spd(&self) -> SpdMatrix {
        SpdMatrix::new_unchecked(symmetrize(&self.sigma0))
    }

    /// Stationary state covariance `Z` solving `Z = G Z G^T + Q`.
    pub fn stationary_covariance(&self) -> Result<SpdMatrix> {
        solve_lyapunov(&self.gamma, &self.q_spd())
    }
}

/// Validation report per Assumptions 1-2; report-only, callers decide.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub action_norm_deviation: Vec<f64>,
    pub q_psd: bool,
    pub sigma0_psd: bool,
    pub sigma_positive: bool,
    pub spectral_radius: f64,
    pub controllability_rank: usize,
    pub controllable: bool,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.q_psd
            && self.sigma0_psd
            && self.sigma_positive
            && self.controllable
            && self
                .action_norm_deviation
                .iter()
                .all(|dev| dev.abs() <= 1e-10)
    }
}

fn is_psd(m: &Matrix) -> bool {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                return false;
            }
        }
    }
    let eigs = symmetrize(m).symmetric_eigen().eigenvalues;
    let max = eigs.iter().cloned().fold(0.0_f64, f64::max);
    eigs.iter().all(|&e| e >= -1e-10 * max.max(1.0))
}

/// Checks action norms, PSD-ness of Q and Sigma0, and controllability of
/// (Gamma, Q^{1/2}) via the numerical rank of the controllability matrix.
pub fn validate_spec(spec: &LgdsSpec) -> ValidationReport {
    let d = spec.d();
    let action_norm_deviation = spec.actions.iter().map(|a| a.norm() - 1.0).collect();
    let q_psd = is_psd(&spec.q);
    let sigma0_psd = is_psd(&spec.sigma0);
    let rho = spectral_radius(&spec.gamma).unwrap_or(f64::NAN);

    let q_half = psd_sqrt(&spec.q_spd())
        .map(SpdMatrix::into_matrix)
        .unwrap_or_else(|_| Matrix::zeros(d, d));
    let mut ctrb = Matrix::zeros(d, d * d);
    let mut block = q_half;
    for j in 0..d {
        ctrb.view_mut((0, j * d), (d, d)).copy_from(&block);
        block = &spec.gamma * block;
    }
    let svals = ctrb.svd(false, false).singular_values;
    let largest = svals.iter().cloned().fold(0.0_f64, f64::max);
    let rank = svals.iter().filter(|&&s| s > 1e-8 * largest).count();

    ValidationReport {
        action_norm_deviation,
        q_psd,
        sigma0_psd,
        sigma_positive: spec.sigma > 0.0,
        spectral_radius: rho,
        controllability_rank: rank,
        controllable: rank == d,
    }
}

/// Draws a random environment: every entry of `T`, `R`, `r`, and the raw
/// action vectors comes independently from `dist`; `Gamma` is `T` rescaled
/// to the target spectral radius, `Q = R R^T`, `sigma^2 = r^2`, actions are
/// normalized to the unit sphere.
pub fn generate_spec(
    dist: ParamDist,
    d: usize,
    k: usize,
    rho_target: f64,
    seed: u64,
) -> Result<LgdsSpec> {
    if d < 1 || k < 1 {
        return Err(Error::Parameter(format!("need d >= 1 and k >= 1, got d={d}, k={k}")));
    }
    if rho_target <= 0.0 {
        return Err(Error::Parameter(format!("rho_target must be positive, got {rho_target}")));
    }
    let mut rng = stream(derive_seed(seed, &[tag::SPEC_GEN]));

    let mut gamma = None;
    for _ in 0..100 {
        let t = Matrix::from_fn(d, d, |_, _| dist.draw(&mut rng));
        // redraw when the eigenvalue iteration gives up on a degenerate draw
        let Ok(rho) = spectral_radius(&t) else {
            continue;
        };
        if rho > 0.0 && rho.is_finite() {
            gamma = Some(t * (rho_target / rho));
            break;
        }
    }
    let gamma = gamma.ok_or_else(|| {
        Error::Generation("no usable state-matrix draw in 100 attempts".into())
    })?;

    let r = Matrix::from_fn(d, d, |_, _| dist.draw(&mut rng));
    let q = symmetrize(&(&r * r.transpose()));

    let mut sigma = 0.0;
    for _ in 0..100 {
        let draw = dist.draw(&mut rng);
        if draw != 0.0 && draw.is_finite() {
            sigma = draw.abs();
            break;
        }
    }
    if sigma == 0.0 {
        return Err(Error::Generation("measurement-noise draw was zero 100 times".into()));
    }

    let mut actions = Vec::with_capacity(k);
    for _ in 0..k {
        let mut a = Vector::zeros(d);
        for _ in 0..100 {
            a = Vector::from_fn(d, |_, _| dist.draw(&mut rng));
            let n = a.norm();
            if n > 0.0 && n.is_finite() {
                a /= n;
                break;
            }
        }
        if (a.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Generation("action draw was zero 100 times".into()));
        }
        actions.push(a);
    }

    let q_spd = SpdMatrix::new_unchecked(q.clone());
    let rho_gamma = spectral_radius(&gamma)?;
    let sigma0 = if rho_gamma < 1.0 {
        solve_lyapunov(&gamma, &q_spd)?.into_matrix()
    } else {
        q.clone()
    };

    Ok(LgdsSpec {
        gamma,
        actions,
        q,
        sigma,
        sigma0,
        meta: Some(SpecMeta { dist, seed, rho_target }),
    })
}

/// Hidden true state plus round counter; noise comes from counter-based
/// streams keyed by the episode seed.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub z: Vector,
    pub t: u64,
    noise_seed: u64,
    /// Cached PSD factor of Q for process-noise draws.
    q_factor: Matrix,
}

impl EnvState {
    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }
}

/// Draws the initial state from `N(0, Sigma0)` and advances `warmup` rounds
/// of the noise-only dynamics; the round counter starts at 0.
pub fn init_state(spec: &LgdsSpec, seed: u64, warmup: usize) -> Result<EnvState> {
    let d = spec.d();
    let sigma0 = spec.sigma0_spd();
    let mut init_rng = counter_stream(seed, &[tag::ENV_INIT]);
    let mut z = sample_gaussian(&Vector::zeros(d), &sigma0, &mut init_rng)?;

    let q_factor = psd_factor(&spec.q_spd())?;
    if warmup > 0 {
        let mut warm_rng = counter_stream(seed, &[tag::ENV_WARMUP]);
        for _ in 0..warmup {
            let w = Vector::from_fn(d, |_, _| warm_rng.sample(StandardNormal));
            z = &spec.gamma * z + &q_factor * w;
        }
    }

    Ok(EnvState { z, t: 0, noise_seed: seed, q_factor })
}

/// Advances the state one round: `z <- Gamma z + xi`, `xi ~ N(0, Q)`.
pub fn step(state: &mut EnvState, spec: &LgdsSpec) {
    let mut rng = counter_stream(state.noise_seed, &[tag::ENV_PROCESS, state.t]);
    let w = Vector::from_fn(spec.d(), |_, _| rng.sample(StandardNormal));
    state.z = &spec.gamma * &state.z + &state.q_factor * w;
    state.t += 1;
}

fn measurement_noise(state: &EnvState, spec: &LgdsSpec, action_index: usize) -> f64 {
    let mut rng = counter_stream(
        state.noise_seed,
        &[tag::ENV_MEASURE, state.t, action_index as u64],
    );
    let w: f64 = rng.sample(StandardNormal);
    spec.sigma * w
}

/// Reward for one action: `<a, z> + eta`, `eta ~ N(0, sigma^2)`.
pub fn observe(state: &EnvState, spec: &LgdsSpec, action_index: usize) -> Result<f64> {
    if action_index >= spec.k() {
        return Err(Error::Dimension(format!(
            "action index {action_index} out of range (k = {})",
            spec.k()
        )));
    }
    Ok(spec.actions[action_index].dot(&state.z) + measurement_noise(state, spec, action_index))
}

/// Rewards for every action at once, with independent per-action noise.
/// Entry `i` equals `observe(state, spec, i)` for the same round.
pub fn observe_all(state: &EnvState, spec: &LgdsSpec) -> Vector {
    Vector::from_fn(spec.k(), |i, _| {
        spec.actions[i].dot(&state.z) + measurement_noise(state, spec, i)
    })
}

/// Index of the action best aligned with a given state vector; ties go to
/// the lowest index.
pub fn best_action_for(z: &Vector, spec: &LgdsSpec) -> usize {
    let mut best = 0;
    let mut best_val = spec.actions[0].dot(z);
    for (i, a) in spec.actions.iter().enumerate().skip(1) {
        let v = a.dot(z);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// The oracle's action at the current round.
pub fn oracle_action(state: &EnvState, spec: &LgdsSpec) -> usize {
    best_action_for(&state.z, spec)
}

// --- serialization -------------------------------------------------------

/// Flat document form of `LgdsSpec`; matrices row-major. JSON floats use the
/// shortest representation that parses back to the identical bits, so
/// round-trips are lossless.
#[derive(Debug, Serialize, Deserialize)]
struct SpecDoc {
    d: usize,
    k: usize,
    gamma: Vec<f64>,
    actions: Vec<Vec<f64>>,
    q: Vec<f64>,
    sigma: f64,
    sigma0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<SpecMeta>,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(Matrix::from_row_slice(rows, cols, data))
}

impl Serialize for LgdsSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SpecDoc {
            d: self.d(),
            k: self.k(),
            gamma: row_major(&self.gamma),
            actions: self.actions.iter().map(|a| a.iter().cloned().collect()).collect(),
            q: row_major(&self.q),
            sigma: self.sigma,
            sigma0: row_major(&self.sigma0),
            meta: self.meta.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LgdsSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let doc = SpecDoc::deserialize(deserializer)?;
        let gamma = from_row_major(doc.d, doc.d, &doc.gamma).map_err(DeError::custom)?;
        let q = from_row_major(doc.d, doc.d, &doc.q).map_err(DeError::custom)?;
        let sigma0 = from_row_major(doc.d, doc.d, &doc.sigma0).map_err(DeError::custom)?;
        if doc.actions.len() != doc.k {
            return Err(DeError::custom(format!(
                "expected {} actions, got {}",
                doc.k,
                doc.actions.len()
            )));
        }
        let actions = doc
            .actions
            .iter()
            .map(|a| {
                if a.len() != doc.d {
                    Err(DeError::custom(format!(
                        "action has {} entries, expected {}",
                        a.len(),
                        doc.d
                    )))
                } else {
                    Ok(Vector::from_vec(a.clone()))
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LgdsSpec {
            gamma,
            actions,
            q,
            sigma: doc.sigma,
            sigma0,
            meta: doc.meta,
        })
    }
}
