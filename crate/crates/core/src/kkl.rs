//! Latent linear filter with learned coordinate maps.
//!
//! The observer lifts the LED state into a latent space where the error
//! dynamics are linear and stable:
//!
//! ```text
//! z' = A·z + B·y                         (nominal input)
//! z' = A·z + B·y + Ω(z, u)               (input-corrected)
//! ```
//!
//! with `A` Schur-stable and `(A, B)` controllable. The coordinate map `T`
//! (state → latent) and its left inverse are learned networks, but `T` also
//! has an exact series representation under the nominal input:
//!
//! ```text
//! T(x) = Σ_{j≥0} Aʲ·B·ℓ(f⁻⁽ʲ⁺¹⁾(x))
//! ```
//!
//! where `ℓ` is the noise-free output map and `f⁻¹` the exact inverse step.
//! [`series_oracle_t`] evaluates that sum directly and serves as the
//! independent reference the learned encoder is judged against: the partial
//! sum satisfies the defining equation `T(f(x)) = A·T(x) + B·ℓ(x)` up to a
//! computable geometric tail.

use nalgebra::{DMatrix, DVector};

use crate::channel::{inverse_step, measure_pair, step, ChannelParams, LedState};
use crate::error::{CoreError, Result};
use crate::net::NetworkParams;

/// Dimension multipliers of the default diagonal latent matrix:
/// `A = diag(1 − m·te)` over `m ∈ {1, 2, 4, 6, 8, 10}`.
const DEFAULT_A_MULTIPLIERS: [f64; 6] = [1.0, 2.0, 4.0, 6.0, 8.0, 10.0];

/// Latent filter pair `(A, B)`; `A` is `q×q`, `B` is `q×p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfig {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LatentConfig {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(CoreError::InvalidConfig("latent matrix A must be square".into()));
        }
        if b.nrows() != a.nrows() {
            return Err(CoreError::InvalidConfig(format!(
                "B has {} rows but A is {}x{}",
                b.nrows(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { a, b })
    }

    /// Latent dimension q.
    #[must_use]
    pub fn q(&self) -> usize {
        self.a.nrows()
    }

    /// Output dimension p accepted by the filter.
    #[must_use]
    pub fn p(&self) -> usize {
        self.b.ncols()
    }

    /// Copy with `B` rescaled row-wise: `B ← diag(s)·B`.
    ///
    /// Row scaling commutes with a diagonal `A`, so the scaled pair drives a
    /// filter whose state is the row-scaled latent. This is how a trained
    /// normalization scale is applied to the observer.
    #[must_use]
    pub fn with_row_scaled_b(&self, s: &[f64]) -> Self {
        assert_eq!(s.len(), self.q(), "scale length must equal q");
        let mut b = self.b.clone();
        for (i, &si) in s.iter().enumerate() {
            for v in b.row_mut(i).iter_mut() {
                *v *= si;
            }
        }
        Self { a: self.a.clone(), b }
    }

    /// Fixed point of `z' = A·z + B·y` for a held output `y`, i.e.
    /// `(I − A)⁻¹·B·y`. `A` Schur-stable makes `I − A` invertible.
    #[must_use]
    pub fn settled_latent(&self, y: &[f64]) -> DVector<f64> {
        assert_eq!(y.len(), self.p(), "output length must equal p");
        let forcing = &self.b * DVector::from_column_slice(y);
        let i_minus_a = DMatrix::identity(self.q(), self.q()) - &self.a;
        i_minus_a.lu().solve(&forcing).expect("I - A is invertible for a Schur-stable A")
    }
}

/// Default six-dimensional pair for a two-receiver head: `q = p·(n+1) = 6`,
/// `A = diag(1−te, 1−2te, 1−4te, 1−6te, 1−8te, 1−10te)`, `B = ones(6, 2)`.
pub fn default_latent_config(te: f64) -> Result<LatentConfig> {
    if !(te > 0.0 && te < 0.1) {
        return Err(CoreError::InvalidConfig(format!(
            "sample time {te} outside (0, 0.1); the default diagonal would leave (0, 1)"
        )));
    }
    let diag: Vec<f64> = DEFAULT_A_MULTIPLIERS.iter().map(|m| 1.0 - m * te).collect();
    let a = DMatrix::from_diagonal(&DVector::from_vec(diag));
    let b = DMatrix::from_element(6, 2, 1.0);
    LatentConfig::new(a, b)
}

/// Largest eigenvalue magnitude.
#[must_use]
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Rank of the controllability matrix `[B, AB, …, A^{q−1}B]`.
#[must_use]
pub fn controllability_rank(cfg: &LatentConfig) -> usize {
    let q = cfg.q();
    let p = cfg.p();
    let mut ctrl = DMatrix::zeros(q, q * p);
    let mut block = cfg.b.clone();
    for k in 0..q {
        ctrl.view_mut((0, k * p), (q, p)).copy_from(&block);
        block = &cfg.a * block;
    }
    let svd = ctrl.svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let eps = sigma_max * (q.max(q * p)) as f64 * f64::EPSILON;
    svd.singular_values.iter().filter(|&&s| s > eps).count()
}

/// One filter update `z' = A·z + B·y`.
#[must_use]
pub fn latent_step(z: &DVector<f64>, y: &[f64], cfg: &LatentConfig) -> DVector<f64> {
    assert_eq!(z.len(), cfg.q(), "latent dimension mismatch");
    assert_eq!(y.len(), cfg.p(), "output dimension mismatch");
    &cfg.a * z + &cfg.b * DVector::from_column_slice(y)
}

/// State → latent map.
pub trait StateEncoder {
    fn encode(&self, x: &LedState) -> DVector<f64>;
}

/// Latent → state map.
pub trait StateDecoder {
    fn decode(&self, z: &DVector<f64>) -> LedState;
}

impl StateEncoder for NetworkParams {
    fn encode(&self, x: &LedState) -> DVector<f64> {
        assert_eq!(self.input_dim, 2, "encoder network must take the 2-d state");
        DVector::from_vec(self.forward(&x.as_array()))
    }
}

impl StateDecoder for NetworkParams {
    fn decode(&self, z: &DVector<f64>) -> LedState {
        assert_eq!(self.output_dim, 2, "decoder network must produce the 2-d state");
        let out = self.forward(z.as_slice());
        LedState::new(out[0], out[1])
    }
}

/// Adapter so a closure (for instance the series oracle) can stand in for a
/// learned encoder.
pub struct FnEncoder<F: Fn(&LedState) -> DVector<f64>>(pub F);

impl<F: Fn(&LedState) -> DVector<f64>> StateEncoder for FnEncoder<F> {
    fn encode(&self, x: &LedState) -> DVector<f64> {
        (self.0)(x)
    }
}

/// Adapter for closure-backed decoders, mirroring [`FnEncoder`].
pub struct FnDecoder<F: Fn(&DVector<f64>) -> LedState>(pub F);

impl<F: Fn(&DVector<f64>) -> LedState> StateDecoder for FnDecoder<F> {
    fn decode(&self, z: &DVector<f64>) -> LedState {
        (self.0)(z)
    }
}

/// Input correction `Ω(z, u) = T(f(T⁻¹(z), u)) − T(f(T⁻¹(z), ū))`.
///
/// Exactly zero when `u == u_bar`: both branches evaluate identically.
#[must_use]
pub fn omega_correction(
    z: &DVector<f64>,
    u: f64,
    u_bar: f64,
    enc: &impl StateEncoder,
    dec: &impl StateDecoder,
    te: f64,
) -> DVector<f64> {
    let x_hat = dec.decode(z);
    let with_input = enc.encode(&step(&x_hat, te, u, None));
    let nominal = enc.encode(&step(&x_hat, te, u_bar, None));
    with_input - nominal
}

/// Filter update with the input correction: `z' = A·z + B·y + Ω(z, u)`.
#[must_use]
#[allow(clippy::too_many_arguments)]
pub fn latent_step_corrected(
    z: &DVector<f64>,
    y: &[f64],
    u: f64,
    u_bar: f64,
    cfg: &LatentConfig,
    enc: &impl StateEncoder,
    dec: &impl StateDecoder,
    te: f64,
) -> DVector<f64> {
    latent_step(z, y, cfg) + omega_correction(z, u, u_bar, enc, dec, te)
}

/// Outcome of the small-gain contraction test for the corrected observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub spectral_radius: f64,
    pub lambda_u: f64,
    /// `1 − ρ(A) − λᵤ`; positive iff the corrected error map contracts.
    pub margin: f64,
    pub contracting: bool,
}

/// Checks `ρ(A) + λᵤ < 1`, where `λᵤ` bounds the Lipschitz constant of
/// `Ω(·, u)` in `z`.
#[must_use]
pub fn contraction_check(cfg: &LatentConfig, lambda_u: f64) -> ContractionReport {
    assert!(lambda_u >= 0.0, "a Lipschitz bound cannot be negative");
    let rho = spectral_radius(&cfg.a);
    let margin = 1.0 - rho - lambda_u;
    ContractionReport { spectral_radius: rho, lambda_u, margin, contracting: margin > 0.0 }
}

/// Sampled estimate of the Lipschitz constant of `Ω(·, u)` in `z`.
///
/// Encodes the given states, then takes the max difference ratio over all
/// distinct pairs. A diagnostic lower bound on the true constant, not a
/// certificate.
#[must_use]
pub fn estimate_omega_lipschitz(
    enc: &impl StateEncoder,
    dec: &impl StateDecoder,
    te: f64,
    u: f64,
    u_bar: f64,
    states: &[LedState],
) -> f64 {
    let zs: Vec<DVector<f64>> = states.iter().map(|x| enc.encode(x)).collect();
    let omegas: Vec<DVector<f64>> =
        zs.iter().map(|z| omega_correction(z, u, u_bar, enc, dec, te)).collect();
    let mut worst = 0.0f64;
    for i in 0..zs.len() {
        for j in (i + 1)..zs.len() {
            let dz = (&zs[i] - &zs[j]).norm();
            if dz > 1e-9 {
                worst = worst.max((&omegas[i] - &omegas[j]).norm() / dz);
            }
        }
    }
    worst
}

/// Result of evaluating the latent series at one state.
#[derive(Debug, Clone)]
pub struct SeriesOracle {
    pub value: DVector<f64>,
    /// Geometric bound on the dropped tail: `ρ^terms/(1−ρ)·sup‖B·ℓ‖`.
    pub tail_bound: f64,
    /// Number of series terms summed.
    pub terms: usize,
}

/// Hard cap on series length before declaring decay failure.
const SERIES_MAX_TERMS: usize = 2_000_000;
/// Window for the non-decay guard; any transient gain growth along the
/// backward orbit is far shorter than this.
const SERIES_DECAY_WINDOW: usize = 10_000;

fn sup_forcing_norm(cfg: &LatentConfig, ch: &ChannelParams) -> f64 {
    // ‖B·ℓ‖ ≤ ‖B‖_F · √2 · C̄p · (a1+a2)
    cfg.b.norm() * 2.0f64.sqrt() * ch.cp_bar() * ch.gain.max_bound()
}

/// Evaluates `T(x) = Σ_{j≥0} Aʲ·B·ℓ(f⁻⁽ʲ⁺¹⁾(x))` by direct summation.
///
/// Sums at least `min_terms` terms and keeps extending until the incremental
/// term norm drops below `term_tol`. Partial sums use Neumaier compensation
/// so rounding stays far below the reported tail bound. Backward iterates
/// move the angle linearly while `Aʲ` decays geometrically; the running
/// guard aborts if that decay ever fails to materialize.
pub fn series_oracle_t(
    x: &LedState,
    cfg: &LatentConfig,
    ch: &ChannelParams,
    u_bar: f64,
    min_terms: usize,
    term_tol: f64,
) -> Result<SeriesOracle> {
    assert!(min_terms >= 1, "at least one series term is required");
    assert!(term_tol > 0.0, "term tolerance must be positive");
    let rho = spectral_radius(&cfg.a);
    if rho >= 1.0 {
        return Err(CoreError::InvalidConfig(format!(
            "latent matrix has spectral radius {rho} >= 1; the series diverges"
        )));
    }
    let q = cfg.q();
    let te = ch.sample_time;

    let mut sum = vec![0.0f64; q];
    let mut comp = vec![0.0f64; q];
    let mut power = DMatrix::<f64>::identity(q, q);
    let mut back = inverse_step(x, te, u_bar);
    let mut terms = 0usize;
    let mut window_norm = f64::INFINITY;

    loop {
        let y = measure_pair(&back, ch, None);
        let term = &power * (&cfg.b * DVector::from_column_slice(&y));
        // Neumaier update per component
        for i in 0..q {
            let t = sum[i] + term[i];
            if sum[i].abs() >= term[i].abs() {
                comp[i] += (sum[i] - t) + term[i];
            } else {
                comp[i] += (term[i] - t) + sum[i];
            }
            sum[i] = t;
        }
        terms += 1;
        let norm = term.norm();
        if terms >= min_terms && norm < term_tol {
            break;
        }
        if terms % SERIES_DECAY_WINDOW == 0 {
            if norm >= window_norm {
                return Err(CoreError::SummandDecayFailure { term: terms, norm });
            }
            window_norm = norm;
        }
        if terms >= SERIES_MAX_TERMS {
            return Err(CoreError::SummandDecayFailure { term: terms, norm });
        }
        power = &cfg.a * power;
        back = inverse_step(&back, te, u_bar);
    }

    let value = DVector::from_iterator(q, sum.iter().zip(&comp).map(|(s, c)| s + c));
    let tail_bound = rho.powi(terms as i32) / (1.0 - rho) * sup_forcing_norm(cfg, ch);
    Ok(SeriesOracle { value, tail_bound, terms })
}

/// Norms of the first `count` series terms at `x`; diagnostic companion to
/// [`series_oracle_t`].
#[must_use]
pub fn series_term_norms(
    x: &LedState,
    cfg: &LatentConfig,
    ch: &ChannelParams,
    u_bar: f64,
    count: usize,
) -> Vec<f64> {
    let q = cfg.q();
    let te = ch.sample_time;
    let mut power = DMatrix::<f64>::identity(q, q);
    let mut back = inverse_step(x, te, u_bar);
    let mut norms = Vec::with_capacity(count);
    for _ in 0..count {
        let y = measure_pair(&back, ch, None);
        norms.push((&power * (&cfg.b * DVector::from_column_slice(&y))).norm());
        power = &cfg.a * power;
        back = inverse_step(&back, te, u_bar);
    }
    norms
}

/// Residual of the defining equation at `x` using oracle evaluations on both
/// sides: `‖T(f(x, ū)) − A·T(x) − B·ℓ(x)‖`, with the combined tail bound.
pub fn oracle_equation_residual(
    x: &LedState,
    cfg: &LatentConfig,
    ch: &ChannelParams,
    u_bar: f64,
    min_terms: usize,
    term_tol: f64,
) -> Result<(f64, f64)> {
    let te = ch.sample_time;
    let at_x = series_oracle_t(x, cfg, ch, u_bar, min_terms, term_tol)?;
    let next = step(x, te, u_bar, None);
    let at_next = series_oracle_t(&next, cfg, ch, u_bar, min_terms, term_tol)?;
    let forcing = &cfg.b * DVector::from_column_slice(&measure_pair(x, ch, None));
    let residual = (&at_next.value - &cfg.a * &at_x.value - forcing).norm();
    Ok((residual, at_x.tail_bound.max(at_next.tail_bound)))
}
