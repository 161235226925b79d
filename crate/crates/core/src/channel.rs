//! Two-receiver LED optical link model.
//!
//! An LED swings with incidence angle x1 (rad) and angular velocity x2
//! (rad/s). Each receiver sees
//!
//! ```text
//! y = C̄p · g(φ) + w,      C̄p = Cp · Ĩθ · exp(−c·d0) / d0²
//! ```
//!
//! where `g` is a two-lobe Gaussian fit of the LED's angular emission
//! pattern, `c` is the water attenuation coefficient (1/m), `d0` the
//! transmitter-receiver distance (m), and `w` zero-mean Gaussian noise.
//! The second receiver is offset by `delta_phi`, so one state produces the
//! output pair `(g(x1), g(x1 + delta_phi))` up to the common scale `C̄p`.
//!
//! Discrete-time kinematics on a grid of `sample_time` seconds:
//!
//! ```text
//! x1' = x1 + te·x2 + w1
//! x2' = x2 + u     + w2
//! ```
//!
//! The noise-free step is exactly invertible, which is what makes the
//! latent-series diagnostics in [`crate::kkl`] computable.

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Six-constant two-Gaussian angular gain fit.
///
/// `g(φ) = a1·exp(−((φ−b1)/c1)²) + a2·exp(−((φ+b2)/c2)²)`, widths in rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianGainParams {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

impl Default for GaussianGainParams {
    fn default() -> Self {
        Self { a1: 1.0, b1: 0.2, c1: 0.5, a2: 0.5, b2: 0.1, c2: 0.4 }
    }
}

impl GaussianGainParams {
    /// Upper bound on the gain over all angles.
    #[must_use]
    pub fn max_bound(&self) -> f64 {
        self.a1 + self.a2
    }
}

/// Link geometry and medium constants shared by both receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub gain: GaussianGainParams,
    /// Raw transmitted power coefficient Cp (W·m²).
    pub raw_cp: f64,
    /// Relative transmitter intensity Ĩθ (dimensionless).
    pub transmitter_intensity: f64,
    /// Water attenuation coefficient c (1/m).
    pub attenuation_c: f64,
    /// Transmitter-receiver distance d0 (m).
    pub link_distance_d0: f64,
    /// Angular offset of the second receiver (rad).
    pub delta_phi: f64,
    /// Sampling period Te (s).
    pub sample_time: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            gain: GaussianGainParams::default(),
            raw_cp: 1.0,
            transmitter_intensity: 1.0,
            attenuation_c: 0.5,
            link_distance_d0: 0.085,
            delta_phi: 6.0_f64.to_radians(),
            sample_time: 0.01,
        }
    }
}

impl ChannelParams {
    /// Composite transmitter coefficient `C̄p = Cp·Ĩθ·exp(−c·d0)/d0²`.
    ///
    /// Derived on demand so it can never go stale when a field changes.
    #[must_use]
    pub fn cp_bar(&self) -> f64 {
        self.raw_cp * self.transmitter_intensity * (-self.attenuation_c * self.link_distance_d0).exp()
            / (self.link_distance_d0 * self.link_distance_d0)
    }

    /// Copy of `self` at a different link distance.
    #[must_use]
    pub fn with_link_distance(mut self, d0: f64) -> Self {
        self.link_distance_d0 = d0;
        self
    }
}

/// Noise levels for simulation. Standard deviations, not variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Per-step process noise std on (x1, x2).
    pub process_std: [f64; 2],
    /// Measurement noise std on each receiver output (W).
    pub measurement_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { process_std: [1e-3, 1e-4], measurement_std: 0.001_f64.sqrt() }
    }
}

impl NoiseConfig {
    /// All standard deviations zero; draws still consume the same number of
    /// generator values, so noisy and noise-free runs stay stream-aligned.
    #[must_use]
    pub fn zero() -> Self {
        Self { process_std: [0.0, 0.0], measurement_std: 0.0 }
    }

    /// One process-noise draw `(w1, w2)`.
    pub fn sample_process<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let n1 = Normal::new(0.0, self.process_std[0]).expect("std must be finite and non-negative");
        let n2 = Normal::new(0.0, self.process_std[1]).expect("std must be finite and non-negative");
        [n1.sample(rng), n2.sample(rng)]
    }

    /// Independent measurement-noise draws for the two receivers.
    pub fn sample_measurement_pair<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let n = Normal::new(0.0, self.measurement_std).expect("std must be finite and non-negative");
        [n.sample(rng), n.sample(rng)]
    }
}

/// LED orientation state: incidence angle (rad) and angular velocity (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedState {
    pub angle: f64,
    pub angular_velocity: f64,
}

impl LedState {
    #[must_use]
    pub fn new(angle: f64, angular_velocity: f64) -> Self {
        Self { angle, angular_velocity }
    }

    #[must_use]
    pub fn as_array(&self) -> [f64; 2] {
        [self.angle, self.angular_velocity]
    }

    #[must_use]
    pub fn from_array(a: [f64; 2]) -> Self {
        Self { angle: a[0], angular_velocity: a[1] }
    }
}

/// Angular gain `g(φ)` of the two-lobe emission fit.
#[must_use]
pub fn gain(phi: f64, p: &GaussianGainParams) -> f64 {
    debug_assert!(p.c1 > 0.0 && p.c2 > 0.0, "gain widths must be positive");
    let t1 = (phi - p.b1) / p.c1;
    let t2 = (phi + p.b2) / p.c2;
    p.a1 * (-t1 * t1).exp() + p.a2 * (-t2 * t2).exp()
}

/// Analytic derivative `dg/dφ`; paired with [`gain`] in smoothness checks.
#[must_use]
pub fn gain_derivative(phi: f64, p: &GaussianGainParams) -> f64 {
    let t1 = (phi - p.b1) / p.c1;
    let t2 = (phi + p.b2) / p.c2;
    -2.0 * p.a1 * t1 / p.c1 * (-t1 * t1).exp() - 2.0 * p.a2 * t2 / p.c2 * (-t2 * t2).exp()
}

/// Received power at one receiver: `C̄p·g(x1) + w`.
#[must_use]
pub fn received_power(angle: f64, ch: &ChannelParams, noise: Option<f64>) -> f64 {
    ch.cp_bar() * gain(angle, &ch.gain) + noise.unwrap_or(0.0)
}

/// Output pair of the two-receiver head: `C̄p·(g(x1), g(x1+Δφ)) + (w, w')`.
#[must_use]
pub fn measure_pair(x: &LedState, ch: &ChannelParams, noise: Option<[f64; 2]>) -> [f64; 2] {
    let w = noise.unwrap_or([0.0, 0.0]);
    let cp = ch.cp_bar();
    [
        cp * gain(x.angle, &ch.gain) + w[0],
        cp * gain(x.angle + ch.delta_phi, &ch.gain) + w[1],
    ]
}

/// One discrete step: `x1' = x1 + te·x2 + w1`, `x2' = x2 + u + w2`.
#[must_use]
pub fn step(x: &LedState, te: f64, u: f64, noise: Option<[f64; 2]>) -> LedState {
    let w = noise.unwrap_or([0.0, 0.0]);
    LedState {
        angle: x.angle + te * x.angular_velocity + w[0],
        angular_velocity: x.angular_velocity + u + w[1],
    }
}

/// Exact inverse of the noise-free [`step`].
///
/// Velocity first (`x2 − u`), then the angle rewinds with that previous
/// velocity. `inverse_step(step(x, te, u, None), te, u) == x` up to float
/// rounding.
#[must_use]
pub fn inverse_step(x: &LedState, te: f64, u: f64) -> LedState {
    let prev_velocity = x.angular_velocity - u;
    LedState {
        angle: x.angle - te * prev_velocity,
        angular_velocity: prev_velocity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gain_matches_frozen_default_value_at_zero() {
        let g = gain(0.0, &GaussianGainParams::default());
        // exp(-0.16) + 0.5*exp(-0.0625)
        assert!((g - 1.32185).abs() < 1e-5, "gain(0) = {g}");
    }

    #[test]
    fn gain_symmetric_params_collapse_to_single_gaussian() {
        let p = GaussianGainParams { a1: 1.0, b1: 0.0, c1: 1.0, a2: 1.0, b2: 0.0, c2: 1.0 };
        assert_eq!(gain(0.0, &p), 2.0);
        let phi = 0.7;
        assert!((gain(phi, &p) - 2.0 * (-phi * phi).exp()).abs() < 1e-15);
        // even in phi when both lobes are centered
        assert!((gain(0.3, &p) - gain(-0.3, &p)).abs() < 1e-15);
    }

    #[test]
    fn gain_derivative_matches_central_difference() {
        let p = GaussianGainParams::default();
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let phi = rng.random_range(-2.0..2.0);
            let fd = (gain(phi + h, &p) - gain(phi - h, &p)) / (2.0 * h);
            let an = gain_derivative(phi, &p);
            let denom = an.abs().max(1e-6);
            assert!(
                ((fd - an) / denom).abs() < 1e-6,
                "derivative mismatch at phi={phi}: fd={fd}, analytic={an}"
            );
        }
    }

    #[test]
    fn cp_bar_matches_frozen_value() {
        let ch = ChannelParams { link_distance_d0: 0.1, ..ChannelParams::default() };
        // exp(-0.05)/0.01
        assert!((ch.cp_bar() - 95.1229).abs() < 1e-3, "cp_bar = {}", ch.cp_bar());
    }

    #[test]
    fn doubling_distance_rescales_power_by_attenuation_over_four() {
        let near = ChannelParams { link_distance_d0: 0.1, ..ChannelParams::default() };
        let far = near.with_link_distance(0.2);
        let ratio = far.cp_bar() / near.cp_bar();
        let expected = (-0.5 * 0.1_f64).exp() / 4.0;
        assert!(((ratio - expected) / expected).abs() < 1e-6);
    }

    #[test]
    fn received_power_adds_noise_term_linearly() {
        let ch = ChannelParams::default();
        let clean = received_power(0.1, &ch, None);
        let noisy = received_power(0.1, &ch, Some(0.25));
        assert!((noisy - clean - 0.25).abs() < 1e-12);
    }

    #[test]
    fn measure_pair_offsets_second_receiver_by_delta_phi() {
        let ch = ChannelParams::default();
        let x = LedState::new(0.12, -0.3);
        let y = measure_pair(&x, &ch, None);
        assert!((y[0] - ch.cp_bar() * gain(0.12, &ch.gain)).abs() < 1e-12);
        assert!((y[1] - ch.cp_bar() * gain(0.12 + ch.delta_phi, &ch.gain)).abs() < 1e-12);
    }

    #[test]
    fn step_matches_frozen_example() {
        let x = LedState::new(0.1, 0.2);
        let next = step(&x, 0.01, 0.05, None);
        assert!((next.angle - 0.102).abs() < 1e-15);
        assert!((next.angular_velocity - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inverse_step_recovers_frozen_example() {
        let next = LedState::new(0.102, 0.25);
        let prev = inverse_step(&next, 0.01, 0.05);
        assert!((prev.angle - 0.1).abs() < 1e-12);
        assert!((prev.angular_velocity - 0.2).abs() < 1e-12);
    }

    #[test]
    fn measurement_noise_variance_matches_config_within_five_percent() {
        let noise = NoiseConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let [w, wp] = noise.sample_measurement_pair(&mut rng);
            for v in [w, wp] {
                sum += v;
                sum_sq += v * v;
            }
        }
        let m = 2 * n;
        let mean = sum / m as f64;
        let var = sum_sq / m as f64 - mean * mean;
        assert!((var - 0.001).abs() / 0.001 < 0.05, "empirical variance {var}");
        assert!(mean.abs() < 3.0 * (0.001 / m as f64).sqrt(), "empirical mean {mean}");
    }

    #[test]
    fn default_delta_phi_is_six_degrees() {
        let ch = ChannelParams::default();
        assert!((ch.delta_phi - 0.104_720).abs() < 1e-6);
    }
}
