//! Closed-trajectory evaluation of a trained observer.
//!
//! A scenario runs the true plant and the latent observer side by side for a
//! fixed number of steps. The observer sees only the noisy received powers;
//! before entering the filter these are renormalized by the ratio of the
//! training-distance power factor to the evaluation-distance one, so a single
//! checkpoint serves any link distance. Scenario noise streams are derived
//! from the seed and the input kind alone — never from distance or observer
//! mode — so runs that differ only in those knobs see identical disturbances
//! and stay directly comparable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{measure_pair, received_power, step, ChannelParams, LedState, NoiseConfig};
use crate::error::{CoreError, Result};
use crate::kkl::{latent_step, latent_step_corrected, StateDecoder, StateEncoder};
use crate::training::TrainedMaps;

/// Amplitude of the primary forcing harmonic.
const FORCING_COS_AMPLITUDE: f64 = 0.1;
/// Amplitude of the secondary harmonic mixed into [`InputKind::ForcedMix`].
const FORCING_SIN_AMPLITUDE: f64 = 0.2;
/// Angular rate multiplier of both harmonics: `u(k) = …(5·k·te)…`.
const FORCING_RATE: f64 = 5.0;
/// Velocity feedback gain of the closed-loop controller.
pub const FEEDBACK_GAIN: f64 = 1e-3;

/// Default initial state for free and forced runs.
pub const DEFAULT_INITIAL_STATE: LedState = LedState { angle: 0.2, angular_velocity: 0.0 };
/// Closed-loop runs start with a small negative velocity so the regulated
/// trajectory decays through the whole run instead of idling at zero.
pub const CLOSED_LOOP_INITIAL_STATE: LedState = LedState { angle: 0.2, angular_velocity: -0.11 };

/// Control input applied to the plant during a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputKind {
    /// `u = 0`.
    OpenLoop,
    /// `u(k) = 0.1·cos(5·k·te)`.
    ForcedCos,
    /// `u(k) = 0.1·cos(5·k·te) + 0.2·sin(5·k·te)`.
    ForcedMix,
    /// `u(k) = −g·x̂₂(k)`: velocity feedback from the observer's estimate.
    ClosedLoop,
}

/// Every input kind, in summary-report order.
pub const ALL_INPUT_KINDS: [InputKind; 4] =
    [InputKind::OpenLoop, InputKind::ForcedCos, InputKind::ForcedMix, InputKind::ClosedLoop];

impl InputKind {
    #[must_use]
    pub fn label(&self) -> &'static str {
        match self {
            InputKind::OpenLoop => "open_loop",
            InputKind::ForcedCos => "forced_cos",
            InputKind::ForcedMix => "forced_mix",
            InputKind::ClosedLoop => "closed_loop",
        }
    }

    /// Noise-stream index; depends only on the kind so runs at different
    /// distances or observer modes share disturbances.
    fn stream(&self) -> u64 {
        match self {
            InputKind::OpenLoop => 1,
            InputKind::ForcedCos => 2,
            InputKind::ForcedMix => 3,
            InputKind::ClosedLoop => 4,
        }
    }

    #[must_use]
    pub fn default_initial_state(&self) -> LedState {
        match self {
            InputKind::ClosedLoop => CLOSED_LOOP_INITIAL_STATE,
            _ => DEFAULT_INITIAL_STATE,
        }
    }

    /// Input value at step `k`; `x_hat2` is the current velocity estimate
    /// (only the closed loop reads it).
    #[must_use]
    pub fn input(&self, k: usize, te: f64, x_hat2: f64) -> f64 {
        let phase = FORCING_RATE * k as f64 * te;
        match self {
            InputKind::OpenLoop => 0.0,
            InputKind::ForcedCos => FORCING_COS_AMPLITUDE * phase.cos(),
            InputKind::ForcedMix => {
                FORCING_COS_AMPLITUDE * phase.cos() + FORCING_SIN_AMPLITUDE * phase.sin()
            }
            InputKind::ClosedLoop => -FEEDBACK_GAIN * x_hat2,
        }
    }
}

/// Whether the filter applies the learned input correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverMode {
    Plain,
    InputCorrected,
}

impl ObserverMode {
    #[must_use]
    pub fn label(&self) -> &'static str {
        match self {
            ObserverMode::Plain => "plain",
            ObserverMode::InputCorrected => "corrected",
        }
    }
}

/// One evaluation run's definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub input: InputKind,
    pub mode: ObserverMode,
    pub steps: usize,
    pub x0: LedState,
    pub seed: u64,
}

impl Scenario {
    /// The standard run: 1000 steps, input-corrected, kind-specific start.
    #[must_use]
    pub fn standard(input: InputKind, seed: u64) -> Self {
        Scenario {
            input,
            mode: ObserverMode::InputCorrected,
            steps: 1000,
            x0: input.default_initial_state(),
            seed,
        }
    }
}

/// One time step of a completed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub t: f64,
    pub x: [f64; 2],
    pub x_hat: [f64; 2],
    /// Noisy measured powers at the evaluation distance.
    pub y: [f64; 2],
    /// Noise-free powers the estimate implies at the same distance.
    pub y_hat: [f64; 2],
    pub u: f64,
}

/// A completed run plus its headline metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub link_distance: f64,
    pub rows: Vec<TraceRow>,
    pub rmse_x: [f64; 2],
    pub rmse_y: [f64; 2],
    /// Mean noise-free first-receiver power along the true trajectory.
    pub mean_power: f64,
}

/// Root-mean-square difference of two equally long series.
#[must_use]
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "series lengths differ");
    assert!(!a.is_empty(), "rmse of an empty series is undefined");
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (sum / a.len() as f64).sqrt()
}

/// Mean |x₂ − x̂₂| over the last quarter of the run divided by the mean over
/// the first quarter; below one means the velocity estimate is converging.
#[must_use]
pub fn velocity_error_quarter_ratio(rows: &[TraceRow]) -> f64 {
    assert!(rows.len() >= 8, "need at least two samples per quarter");
    let quarter = rows.len() / 4;
    let mean_abs = |window: &[TraceRow]| -> f64 {
        window.iter().map(|r| (r.x[1] - r.x_hat[1]).abs()).sum::<f64>() / window.len() as f64
    };
    mean_abs(&rows[rows.len() - quarter..]) / mean_abs(&rows[..quarter])
}

pub fn run_scenario(
    maps: &TrainedMaps,
    ch: &ChannelParams,
    noise: &NoiseConfig,
    sc: &Scenario,
) -> Result<ScenarioResult> {
    run_scenario_with_tap(&maps, ch, noise, sc, |_, _| {})
}

/// [`run_scenario`] with a hook that may rewrite the noisy measurement at
/// each step before the observer sees it. Exists so tests can prove the
/// estimate at step `k` never depends on measurements after step `k` (the
/// very first reading seeds the latent, so step 0 sees its own measurement).
pub fn run_scenario_with_tap(
    maps: &TrainedMaps,
    ch: &ChannelParams,
    noise: &NoiseConfig,
    sc: &Scenario,
    mut tap: impl FnMut(usize, &mut [f64; 2]),
) -> Result<ScenarioResult> {
    if sc.steps == 0 {
        return Err(CoreError::InvalidConfig("a scenario needs at least one step".into()));
    }
    let te = maps.te;
    let filter = maps.latent.with_row_scaled_b(&maps.scale);
    let renorm = maps.cp_bar_train / ch.cp_bar();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(sc.input.stream());

    let mut x = sc.x0;
    let mut z = nalgebra::DVector::zeros(filter.a.nrows());
    let mut rows = Vec::with_capacity(sc.steps);
    let mut power_sum = 0.0;

    for k in 0..sc.steps {
        let w = noise.sample_process(&mut rng);
        let v = noise.sample_measurement_pair(&mut rng);
        let mut y = measure_pair(&x, ch, Some(v));
        tap(k, &mut y);
        let y_bar = [y[0] * renorm, y[1] * renorm];
        if k == 0 {
            // Seed the latent where the filter would settle if the first
            // reading were held constant; a cold start decays the seed error
            // at the slowest filter pole and the decoder has to extrapolate
            // through unvisited latent space the whole way down.
            z = filter.settled_latent(&y_bar);
        }
        if !z.iter().all(|c| c.is_finite()) {
            return Err(CoreError::NumericalFailure(format!(
                "latent state became non-finite at step {k}"
            )));
        }
        let x_hat = maps.decoder.decode(&z);
        if !(x_hat.angle.is_finite() && x_hat.angular_velocity.is_finite()) {
            return Err(CoreError::NumericalFailure(format!(
                "state estimate became non-finite at step {k}"
            )));
        }
        let u = sc.input.input(k, te, x_hat.angular_velocity);
        let y_hat = measure_pair(&x_hat, ch, None);
        power_sum += received_power(x.angle, ch, None);
        rows.push(TraceRow {
            k,
            t: k as f64 * te,
            x: x.as_array(),
            x_hat: x_hat.as_array(),
            y,
            y_hat,
            u,
        });

        z = match sc.mode {
            ObserverMode::Plain => latent_step(&z, &y_bar, &filter),
            ObserverMode::InputCorrected => latent_step_corrected(
                &z,
                &y_bar,
                u,
                maps.u_bar,
                &filter,
                &maps.encoder,
                &maps.decoder,
                te,
            ),
        };
        x = step(&x, te, u, Some(w));
    }

    let col = |f: &dyn Fn(&TraceRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let rmse_x = [
        rmse(&col(&|r| r.x[0]), &col(&|r| r.x_hat[0])),
        rmse(&col(&|r| r.x[1]), &col(&|r| r.x_hat[1])),
    ];
    let rmse_y = [
        rmse(&col(&|r| r.y[0]), &col(&|r| r.y_hat[0])),
        rmse(&col(&|r| r.y[1]), &col(&|r| r.y_hat[1])),
    ];
    Ok(ScenarioResult {
        scenario: *sc,
        link_distance: ch.link_distance_d0,
        rows,
        rmse_x,
        rmse_y,
        mean_power: power_sum / sc.steps as f64,
    })
}

/// Writes a run as CSV: one row per step, headline metrics as trailing
/// comments.
pub fn write_trace_csv(path: &Path, res: &ScenarioResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,t,x1,x2,x1_hat,x2_hat,y1,y2,y1_hat,y2_hat,u")?;
    for r in &res.rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.k,
            r.t,
            r.x[0],
            r.x[1],
            r.x_hat[0],
            r.x_hat[1],
            r.y[0],
            r.y[1],
            r.y_hat[0],
            r.y_hat[1],
            r.u
        )?;
    }
    writeln!(w, "# rmse_x1 = {:.16e}", res.rmse_x[0])?;
    writeln!(w, "# rmse_x2 = {:.16e}", res.rmse_x[1])?;
    writeln!(w, "# rmse_y1 = {:.16e}", res.rmse_y[0])?;
    writeln!(w, "# rmse_y2 = {:.16e}", res.rmse_y[1])?;
    writeln!(w, "# mean_power = {:.16e}", res.mean_power)?;
    w.flush()?;
    Ok(())
}

/// One line of the distance-sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub controller: &'static str,
    pub distance: f64,
    pub rmse_x: [f64; 2],
    pub rmse_y: [f64; 2],
    pub mean_power: f64,
}

/// Runs the given input kinds at every distance with the input-corrected
/// filter and the kind's standard scenario, grouped by kind. Within one kind
/// the disturbance stream is identical across distances.
pub fn sensitivity_sweep(
    maps: &TrainedMaps,
    base_ch: &ChannelParams,
    noise: &NoiseConfig,
    kinds: &[InputKind],
    distances: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(distances.len() * kinds.len());
    for &kind in kinds {
        for &d in distances {
            let ch = base_ch.clone().with_link_distance(d);
            let mut sc = Scenario::standard(kind, seed);
            sc.steps = steps;
            let res = run_scenario(maps, &ch, noise, &sc)?;
            rows.push(SweepRow {
                controller: kind.label(),
                distance: d,
                rmse_x: res.rmse_x,
                rmse_y: res.rmse_y,
                mean_power: res.mean_power,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "controller,distance,rmse_x1,rmse_x2,rmse_y1,rmse_y2,mean_power")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.controller, r.distance, r.rmse_x[0], r.rmse_x[1], r.rmse_y[0], r.rmse_y[1], r.mean_power
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-versus-corrected comparison row for one input kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparisonRow {
    pub controller: &'static str,
    pub mode: &'static str,
    pub rmse_x: [f64; 2],
    pub rmse_y: [f64; 2],
}

/// Runs each input kind under both observer modes at the training distance.
pub fn compare_observer_modes(
    maps: &TrainedMaps,
    ch: &ChannelParams,
    noise: &NoiseConfig,
    steps: usize,
    seed: u64,
) -> Result<Vec<ModeComparisonRow>> {
    let mut rows = Vec::with_capacity(2 * ALL_INPUT_KINDS.len());
    for kind in ALL_INPUT_KINDS {
        for mode in [ObserverMode::Plain, ObserverMode::InputCorrected] {
            let mut sc = Scenario::standard(kind, seed);
            sc.steps = steps;
            sc.mode = mode;
            let res = run_scenario(&maps, ch, noise, &sc)?;
            rows.push(ModeComparisonRow {
                controller: kind.label(),
                mode: mode.label(),
                rmse_x: res.rmse_x,
                rmse_y: res.rmse_y,
            });
        }
    }
    Ok(rows)
}

pub fn write_mode_comparison_csv(path: &Path, rows: &[ModeComparisonRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "controller,mode,rmse_x1,rmse_x2,rmse_y1,rmse_y2")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.controller, r.mode, r.rmse_x[0], r.rmse_x[1], r.rmse_y[0], r.rmse_y[1]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Decoded latent of the underlying maps at a given state; convenience for
/// diagnostics that need both directions at once.
#[must_use]
pub fn round_trip_state(maps: &TrainedMaps, x: &LedState) -> LedState {
    let z: DVector<f64> = maps.encoder.encode(x);
    maps.decoder.decode(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kkl::default_latent_config;
    use crate::net::NetworkParams;
    use crate::training::TrainedMaps;

    const TE: f64 = 0.01;

    /// Maps with untrained networks but a scale picked so the filter's
    /// steady state is O(1) per dimension. The observer is inaccurate but
    /// well-conditioned: the decoder stays out of tanh saturation and
    /// responds to measurement changes, which is all the mechanics tests
    /// here need. Accuracy itself is covered by the full-pipeline suite.
    fn test_maps() -> TrainedMaps {
        let latent = default_latent_config(TE).unwrap();
        let ch = ChannelParams::default();
        let y0 = measure_pair(&LedState::new(0.0, 0.0), &ch, None);
        let y_sum = y0[0] + y0[1];
        let scale: Vec<f64> = (0..6).map(|i| (1.0 - latent.a[(i, i)]) / y_sum).collect();
        TrainedMaps {
            encoder: NetworkParams::init(2, 16, 6, 100),
            decoder: NetworkParams::init(6, 16, 2, 101),
            scale,
            latent,
            te: TE,
            u_bar: 0.0,
            cp_bar_train: ch.cp_bar(),
            final_loss_dyn: 1.0,
            final_loss_recon: 1.0,
        }
    }

    #[test]
    fn rmse_matches_frozen_example() {
        let got = rmse(&[0.0, 5.0], &[5.0, 5.0]);
        assert!((got - 3.5355339059327378).abs() < 1e-12);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    #[should_panic(expected = "series lengths differ")]
    fn rmse_rejects_mismatched_lengths() {
        let _ = rmse(&[1.0], &[1.0, 2.0]);
    }

    #[test]
    fn input_signals_match_frozen_values() {
        assert_eq!(InputKind::OpenLoop.input(123, TE, 9.9), 0.0);
        assert!((InputKind::ForcedCos.input(0, TE, 0.0) - 0.1).abs() < 1e-15);
        // At k = 1 with te = π/10 the phase is π/2: cosine gone, sine peak.
        let quarter = InputKind::ForcedMix.input(1, std::f64::consts::PI / 10.0, 0.0);
        assert!((quarter - 0.2).abs() < 1e-15);
        assert!((InputKind::ClosedLoop.input(7, TE, 0.5) + 0.0005).abs() < 1e-18);
    }

    #[test]
    fn quarter_ratio_reflects_decay_and_growth() {
        let mk = |errs: &[f64]| -> Vec<TraceRow> {
            errs.iter()
                .enumerate()
                .map(|(k, &e)| TraceRow {
                    k,
                    t: k as f64 * TE,
                    x: [0.0, e],
                    x_hat: [0.0, 0.0],
                    y: [0.0; 2],
                    y_hat: [0.0; 2],
                    u: 0.0,
                })
                .collect()
        };
        let decaying = mk(&[8.0, 8.0, 4.0, 2.0, 1.0, 1.0, 0.5, 0.5]);
        assert!((velocity_error_quarter_ratio(&decaying) - 0.5 / 8.0).abs() < 1e-15);
        let growing = mk(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 3.0]);
        assert!((velocity_error_quarter_ratio(&growing) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let maps = test_maps();
        let ch = ChannelParams::default();
        let noise = NoiseConfig::default();
        let mut sc = Scenario::standard(InputKind::ForcedCos, 42);
        sc.steps = 120;
        let a = run_scenario(&maps, &ch, &noise, &sc).unwrap();
        let b = run_scenario(&maps, &ch, &noise, &sc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn true_states_are_identical_across_link_distances() {
        let maps = test_maps();
        let noise = NoiseConfig::default();
        let mut sc = Scenario::standard(InputKind::OpenLoop, 9);
        sc.steps = 150;
        let near = run_scenario(&maps, &ChannelParams::default(), &noise, &sc).unwrap();
        let far =
            run_scenario(&maps, &ChannelParams::default().with_link_distance(0.2), &noise, &sc)
                .unwrap();
        for (a, b) in near.rows.iter().zip(&far.rows) {
            assert_eq!(a.x, b.x, "true state diverged at step {}", a.k);
            assert_eq!(a.u, b.u);
        }
        assert!(far.mean_power < near.mean_power);
    }

    #[test]
    fn estimates_never_depend_on_future_measurements() {
        let maps = test_maps();
        let ch = ChannelParams::default();
        let noise = NoiseConfig::default();
        let mut sc = Scenario::standard(InputKind::OpenLoop, 3);
        sc.steps = 100;
        let clean = run_scenario(&maps, &ch, &noise, &sc).unwrap();
        let cut = 60;
        // Moderate bump: large enough to move the filter, small enough to
        // keep the decoder out of tanh saturation where it loses injectivity.
        let corrupted = run_scenario_with_tap(&maps, &ch, &noise, &sc, |k, y| {
            if k >= cut {
                y[0] += 1.0;
            }
        })
        .unwrap();
        for k in 0..=cut {
            assert_eq!(clean.rows[k].x_hat, corrupted.rows[k].x_hat, "step {k}");
        }
        assert_ne!(clean.rows[cut + 1].x_hat, corrupted.rows[cut + 1].x_hat);
    }

    #[test]
    fn plain_and_corrected_agree_without_input() {
        let maps = test_maps();
        let ch = ChannelParams::default();
        let noise = NoiseConfig::default();
        let mut sc = Scenario::standard(InputKind::OpenLoop, 77);
        sc.steps = 80;
        sc.mode = ObserverMode::Plain;
        let plain = run_scenario(&maps, &ch, &noise, &sc).unwrap();
        sc.mode = ObserverMode::InputCorrected;
        let corrected = run_scenario(&maps, &ch, &noise, &sc).unwrap();
        assert_eq!(plain.rows, corrected.rows);
    }

    #[test]
    fn mean_power_matches_recomputation_from_trace() {
        let maps = test_maps();
        let ch = ChannelParams::default();
        let mut sc = Scenario::standard(InputKind::OpenLoop, 1);
        sc.steps = 50;
        let res = run_scenario(&maps, &ch, &NoiseConfig::zero(), &sc).unwrap();
        let recomputed: f64 = res
            .rows
            .iter()
            .map(|r| received_power(r.x[0], &ch, None))
            .sum::<f64>()
            / res.rows.len() as f64;
        assert!((res.mean_power - recomputed).abs() < 1e-12 * recomputed.abs());
        assert!(res.mean_power > 0.0);
    }

    #[test]
    fn diverged_filter_reports_numerical_failure() {
        let mut maps = test_maps();
        let huge = vec![f64::MAX; maps.encoder.output_dim];
        maps.encoder.scale_output_rows(&huge);
        maps.encoder.scale_output_rows(&huge);
        let sc = Scenario::standard(InputKind::OpenLoop, 0);
        let err =
            run_scenario(&maps, &ChannelParams::default(), &NoiseConfig::zero(), &sc).unwrap_err();
        assert!(matches!(err, CoreError::NumericalFailure(_)), "{err}");
    }

    #[test]
    fn trace_csv_has_header_rows_and_metric_comments() {
        let maps = test_maps();
        let ch = ChannelParams::default();
        let mut sc = Scenario::standard(InputKind::ForcedCos, 12);
        sc.steps = 25;
        let res = run_scenario(&maps, &ch, &NoiseConfig::default(), &sc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &res).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 25 + 5);
        assert_eq!(lines[0], "k,t,x1,x2,x1_hat,x2_hat,y1,y2,y1_hat,y2_hat,u");
        assert!(lines[1].starts_with("0,0"));
        let rmse_line = lines.iter().find(|l| l.starts_with("# rmse_x1 = ")).unwrap();
        let val: f64 = rmse_line.rsplit(' ').next().unwrap().parse().unwrap();
        assert_eq!(val, res.rmse_x[0]);
    }

    #[test]
    fn sweep_covers_all_kinds_and_orders_power_by_distance() {
        let maps = test_maps();
        let ch = ChannelParams::default();
        let distances = [0.05, 0.085, 0.2];
        let rows = sensitivity_sweep(
            &maps,
            &ch,
            &NoiseConfig::default(),
            &ALL_INPUT_KINDS,
            &distances,
            40,
            2,
        )
        .unwrap();
        assert_eq!(rows.len(), 12);
        for kind in ALL_INPUT_KINDS {
            let powers: Vec<f64> = rows
                .iter()
                .filter(|r| r.controller == kind.label())
                .map(|r| r.mean_power)
                .collect();
            assert_eq!(powers.len(), 3);
            assert!(powers[0] > powers[1] && powers[1] > powers[2], "{kind:?}: {powers:?}");
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("controller,distance,rmse_x1,rmse_x2,rmse_y1,rmse_y2,mean_power"));
    }

    #[test]
    fn mode_comparison_covers_both_modes_per_kind() {
        let maps = test_maps();
        let rows = compare_observer_modes(
            &maps,
            &ChannelParams::default(),
            &NoiseConfig::default(),
            30,
            4,
        )
        .unwrap();
        assert_eq!(rows.len(), 8);
        for kind in ALL_INPUT_KINDS {
            let of_kind: Vec<&ModeComparisonRow> =
                rows.iter().filter(|r| r.controller == kind.label()).collect();
            assert_eq!(of_kind.len(), 2);
            assert_ne!(of_kind[0].mode, of_kind[1].mode);
        }
    }
}
