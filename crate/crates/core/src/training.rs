//! Two-phase fitting of the coordinate maps.
//!
//! Phase 1 trains the encoder `T̃` so that along sampled transitions the
//! latent dynamics hold: `T̃(f(x, ū)) ≈ A·T̃(x) + diag(s)·B·ℓ(x)`. The scale
//! `s` starts at one and absorbs the periodic per-dimension latent
//! normalization: rescaling the encoder output rows is a diagonal change of
//! latent basis, so the same filter runs in the normalized basis with
//! `diag(s)·B` as its input matrix, and the encoder/scale pair stays exactly
//! self-consistent through every rescale. Without this the latent components
//! sit orders of magnitude above the network's natural output range and a
//! mean-squared objective is hopelessly ill-conditioned.
//!
//! Phase 2 freezes the encoder and fits the decoder to invert it on the
//! sampled states.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{measure_pair, ChannelParams, LedState};
use crate::datagen::{Dataset, TransitionPair};
use crate::error::{CoreError, Result};
use crate::kkl::{LatentConfig, StateDecoder, StateEncoder};
use crate::net::{adam_step, AdamHyper, AdamState, load_network, save_network, NetGradients, NetworkParams};

/// Latent standard deviations below this are clamped before inversion so a
/// collapsed dimension cannot blow the scale up.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Per-dimension `1/std` factors over row-major `q`-wide samples, floored at
/// [`SCALE_FLOOR`].
fn unit_std_factors(flat: &[f64], q: usize) -> Vec<f64> {
    assert!(!flat.is_empty() && flat.len() % q == 0, "need whole q-wide rows");
    let n = (flat.len() / q) as f64;
    let mut mean = vec![0.0f64; q];
    let mut sq = vec![0.0f64; q];
    for row in flat.chunks_exact(q) {
        for i in 0..q {
            mean[i] += row[i];
            sq[i] += row[i] * row[i];
        }
    }
    (0..q)
        .map(|i| {
            let m = mean[i] / n;
            let mut std = (sq[i] / n - m * m).max(0.0).sqrt();
            if std < SCALE_FLOOR {
                log::warn!("latent dimension {i} has collapsed (std = {std:.3e}); clamping");
                std = SCALE_FLOOR;
            }
            1.0 / std
        })
        .collect()
}

/// Knobs of the two-phase procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs_dyn: usize,
    pub epochs_recon: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub validation_fraction: f64,
    /// Optimizer steps between latent rescalings within phase 1. Zero (the
    /// default) rescales only once, after the phase, over the whole training
    /// set; a positive value additionally rescales every that many steps
    /// using the current batch. Mid-phase rescaling re-inflates whatever
    /// fluctuation the fit has not yet captured, so the optimizer keeps
    /// shrinking it back down instead of converging; the closing rescale is
    /// what guarantees unit-spread shipped latents either way.
    pub normalization_interval: usize,
    pub adam: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        // Phase 1 deliberately stops short of its floor: the closer the
        // encoder gets to the exact conjugacy, the thinner the latent
        // covariance tail becomes and the harder phase 2's inversion gets
        // (the exact map is first-order blind to velocity where the summed
        // gain curve is flat). Thirty epochs leaves both phases' held-out
        // losses orders of magnitude inside their working range; more
        // dynamics epochs trade reconstruction accuracy for nothing the
        // observer can use.
        Self {
            epochs_dyn: 30,
            epochs_recon: 60,
            batch_size: 256,
            hidden_dim: 500,
            validation_fraction: 0.1,
            normalization_interval: 0,
            adam: AdamHyper::default(),
        }
    }
}

/// One row of the epoch log. Phase 1 rows carry the dynamics loss, phase 2
/// rows the reconstruction loss; the train column is the running mean over
/// the epoch's batches, the validation column a fresh end-of-epoch pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub phase: u8,
    pub loss_train: f64,
    pub loss_val: f64,
}

/// Everything the observer needs at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMaps {
    pub encoder: NetworkParams,
    pub decoder: NetworkParams,
    /// Cumulative latent normalization; the filter forcing is `diag(scale)·B`.
    pub scale: Vec<f64>,
    pub latent: LatentConfig,
    pub te: f64,
    pub u_bar: f64,
    /// Distance-dependent power factor the encoder was trained at; used to
    /// renormalize measurements taken at other link distances.
    pub cp_bar_train: f64,
    pub final_loss_dyn: f64,
    pub final_loss_recon: f64,
}

/// Mean over pairs of `‖T̃(x⁺) − A·T̃(x) − diag(s)·B·ℓ(x)‖²` with noise-free
/// measurements.
#[must_use]
pub fn loss_dyn(
    enc: &impl StateEncoder,
    pairs: &[TransitionPair],
    cfg: &LatentConfig,
    ch: &ChannelParams,
    scale: &[f64],
) -> f64 {
    assert!(!pairs.is_empty(), "loss over an empty set is undefined");
    assert_eq!(scale.len(), cfg.q(), "scale length must equal q");
    let mut total = 0.0;
    for p in pairs {
        let z = enc.encode(&p.state);
        let z_next = enc.encode(&p.next);
        let y = measure_pair(&p.state, ch, None);
        let forcing = &cfg.b * DVector::from_column_slice(&y);
        let mut residual = z_next - &cfg.a * z;
        for i in 0..cfg.q() {
            residual[i] -= scale[i] * forcing[i];
        }
        total += residual.norm_squared();
    }
    total / pairs.len() as f64
}

/// Mean over samples of `‖decode(z) − x‖²` for precomputed latents.
#[must_use]
pub fn loss_recon(dec: &impl StateDecoder, zs: &[DVector<f64>], targets: &[LedState]) -> f64 {
    assert_eq!(zs.len(), targets.len(), "latents and targets must align");
    assert!(!zs.is_empty(), "loss over an empty set is undefined");
    let mut total = 0.0;
    for (z, x) in zs.iter().zip(targets) {
        let out = dec.decode(z);
        let dx = [out.angle - x.angle, out.angular_velocity - x.angular_velocity];
        total += dx[0] * dx[0] + dx[1] * dx[1];
    }
    total / zs.len() as f64
}

/// Rescales the encoder's output rows so each latent dimension has unit
/// standard deviation over the given states, and folds the factors into the
/// cumulative `scale`. Returns the factors applied this call.
pub fn normalize_latent(
    enc: &mut NetworkParams,
    scale: &mut [f64],
    states: &[LedState],
) -> Vec<f64> {
    assert!(!states.is_empty(), "normalization needs at least one state");
    let q = enc.output_dim;
    assert_eq!(scale.len(), q, "scale length must equal the encoder output");
    let mut flat = vec![0.0f64; states.len() * q];
    let mut hidden = vec![0.0f64; enc.hidden_dim];
    for (x, out) in states.iter().zip(flat.chunks_exact_mut(q)) {
        enc.forward_into(&x.as_array(), &mut hidden, out);
    }
    let factors = unit_std_factors(&flat, q);
    enc.scale_output_rows(&factors);
    for (s, f) in scale.iter_mut().zip(&factors) {
        *s *= f;
    }
    factors
}

fn check_finite(loss: f64, what: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(CoreError::TrainingDiverged(format!("{what} became {loss}")))
    }
}

/// How many leading training samples feed the initial scale estimate.
const SCALE_INIT_SUBSAMPLE: usize = 4096;

/// Damping applied to the encoder's random output weights at initialization,
/// leaving the output layer near zero next to its seeded bias.
const OUTPUT_INIT_DAMPING: f64 = 0.01;

/// Data-derived starting point for the scale and the encoder output biases.
struct ScaleInit {
    /// A-priori estimate of the normalization fixed point.
    scale: Vec<f64>,
    /// Per-dimension seed for the encoder's output bias.
    output_bias: Vec<f64>,
}

/// Estimate where the running normalization will settle, from data alone.
///
/// The dynamics equation forces each unit-spread latent dimension to absorb
/// `diag(s)·B·ℓ` against a leak of `(1 − a_ii)` per step; along the slow
/// backward orbits the forcing accumulates coherently, so the latent spread
/// is roughly `std((B·ℓ)_i)/(1 − a_ii)` and its reciprocal is where the
/// scale settles. Starting there keeps the loss O(1)-conditioned from the
/// first step — the std feedback in training corrects the estimate's
/// small error but cannot traverse orders of magnitude on its own.
///
/// The same accumulation argument gives the latent's post-normalization mean
/// as `mean((B·ℓ)_i)/std((B·ℓ)_i)` (the leak factors cancel in the ratio), so
/// that is seeded into the output bias instead of letting the optimizer crawl
/// several units at learning-rate speed.
fn initial_latent_scale(
    latent: &LatentConfig,
    ch: &ChannelParams,
    pairs: &[TransitionPair],
) -> ScaleInit {
    let q = latent.q();
    let n = pairs.len().min(SCALE_INIT_SUBSAMPLE);
    let mut forcing = vec![0.0f64; n * q];
    let mut mean = vec![0.0f64; q];
    for (p, row) in pairs[..n].iter().zip(forcing.chunks_exact_mut(q)) {
        let y = measure_pair(&p.state, ch, None);
        for i in 0..q {
            for (k, &yk) in y.iter().enumerate() {
                row[i] += latent.b[(i, k)] * yk;
            }
            mean[i] += row[i] / n as f64;
        }
    }
    let inv_std = unit_std_factors(&forcing, q);
    let scale = (0..q)
        .map(|i| (1.0 - latent.a[(i, i)]).clamp(SCALE_FLOOR, 1.0) * inv_std[i])
        .collect();
    let output_bias = (0..q).map(|i| mean[i] * inv_std[i]).collect();
    ScaleInit { scale, output_bias }
}

/// Accumulates one batch's dynamics-loss gradient from stored activations
/// and returns the batch's summed squared residual (unweighted).
///
/// `weights` rescales each dimension's residual inside the gradient only:
/// the slow dimensions' residuals enter the gradient damped by their small
/// leak `(1 − a_ii)`, so without reweighting the optimizer all but ignores
/// them. The loss that is logged and validated stays the plain mean.
#[allow(clippy::too_many_arguments)]
fn dyn_gradient_pass(
    enc: &NetworkParams,
    latent: &LatentConfig,
    ch: &ChannelParams,
    scale: &[f64],
    weights: &[f64],
    train_pairs: &[TransitionPair],
    batch: &[usize],
    bufs: &mut BatchBuffers,
    grads: &mut NetGradients,
) -> f64 {
    let q = latent.q();
    let hidden_dim = enc.hidden_dim;
    grads.reset();
    let coef = 2.0 / batch.len() as f64;
    let mut sq_sum = 0.0f64;
    for (slot, &idx) in batch.iter().enumerate() {
        let p = &train_pairs[idx];
        let zx = &bufs.z_x[slot * q..(slot + 1) * q];
        let zn = &bufs.z_n[slot * q..(slot + 1) * q];
        let y = measure_pair(&p.state, ch, None);
        for i in 0..q {
            let mut az = 0.0;
            for j in 0..q {
                az += latent.a[(i, j)] * zx[j];
            }
            let mut by = 0.0;
            for (k, &yk) in y.iter().enumerate() {
                by += latent.b[(i, k)] * yk;
            }
            bufs.e[i] = zn[i] - az - scale[i] * by;
        }
        sq_sum += bufs.e.iter().map(|v| v * v).sum::<f64>();
        for i in 0..q {
            bufs.up_n[i] = coef * weights[i] * bufs.e[i];
            let mut ate = 0.0;
            for j in 0..q {
                ate += latent.a[(j, i)] * weights[j] * bufs.e[j];
            }
            bufs.up_x[i] = -coef * ate;
        }
        let hx = &bufs.hid_x[slot * hidden_dim..(slot + 1) * hidden_dim];
        let hn = &bufs.hid_n[slot * hidden_dim..(slot + 1) * hidden_dim];
        enc.backward_from_hidden(&p.next.as_array(), hn, &bufs.up_n, grads, None);
        enc.backward_from_hidden(&p.state.as_array(), hx, &bufs.up_x, grads, None);
    }
    sq_sum
}

/// Per-batch activation storage for phase 1. The forward pass runs once,
/// then the rescale (when due) and the backward pass reuse it.
struct BatchBuffers {
    hid_x: Vec<f64>,
    hid_n: Vec<f64>,
    z_x: Vec<f64>,
    z_n: Vec<f64>,
    e: Vec<f64>,
    up_x: Vec<f64>,
    up_n: Vec<f64>,
}

impl BatchBuffers {
    fn new(cap: usize, hidden_dim: usize, q: usize) -> Self {
        Self {
            hid_x: vec![0.0; cap * hidden_dim],
            hid_n: vec![0.0; cap * hidden_dim],
            z_x: vec![0.0; cap * q],
            z_n: vec![0.0; cap * q],
            e: vec![0.0; q],
            up_x: vec![0.0; q],
            up_n: vec![0.0; q],
        }
    }

    fn forward(&mut self, enc: &NetworkParams, train_pairs: &[TransitionPair], batch: &[usize]) {
        let (h, q) = (enc.hidden_dim, enc.output_dim);
        for (slot, &idx) in batch.iter().enumerate() {
            let p = &train_pairs[idx];
            enc.forward_into(
                &p.state.as_array(),
                &mut self.hid_x[slot * h..(slot + 1) * h],
                &mut self.z_x[slot * q..(slot + 1) * q],
            );
            enc.forward_into(
                &p.next.as_array(),
                &mut self.hid_n[slot * h..(slot + 1) * h],
                &mut self.z_n[slot * q..(slot + 1) * q],
            );
        }
    }

    /// Applies output-row factors to the stored latents of the first `blen`
    /// slots, so a mid-epoch rescale does not force a second forward pass.
    fn rescale_latents(&mut self, blen: usize, q: usize, factors: &[f64]) {
        for chunk in self.z_x[..blen * q]
            .chunks_exact_mut(q)
            .chain(self.z_n[..blen * q].chunks_exact_mut(q))
        {
            for (v, f) in chunk.iter_mut().zip(factors) {
                *v *= f;
            }
        }
    }
}

/// Cosine-annealed learning rate for epoch `epoch` of `total`.
///
/// The full rate early does the coarse fitting; the vanishing rate late
/// anneals away the constant-step noise floor Adam otherwise plateaus at.
fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total.max(1) as f64).cos())
}

/// Eigenvalue floor (relative to the largest) in the decoder-input
/// whitening; bounds the amplification of near-degenerate directions. The
/// latents are noise-free functions of the state, so faint directions are
/// signal, not noise — the floor only guards against amplifying f64
/// rounding residue, which sits another five orders below it.
const DECODER_WHITEN_EIG_FLOOR: f64 = 1e-12;

/// Affine change of decoder input coordinates, `ẑ = Σ^{−1/2}·(z − μ)`,
/// fitted to the training latents.
///
/// A converged encoder's latent dimensions are strongly correlated — each is
/// a leak-weighted sum of the same measurement history — so the decoder
/// faces a regression whose input covariance is dominated by one common mode
/// while the informative differences hide orders of magnitude below. Initial
/// weights alone cannot repair that: first-layer gradients are outer
/// products with the inputs, so the optimizer keeps stepping in the
/// ill-conditioned raw geometry wherever it starts. The decoder therefore
/// trains on whitened inputs and the transform is folded into its first
/// layer afterwards — an exact affine composition, leaving a plain dense
/// network that reads raw latents.
struct LatentWhitener {
    mean: DVector<f64>,
    transform: DMatrix<f64>,
}

impl LatentWhitener {
    fn fit(zs: &[DVector<f64>], q: usize) -> Self {
        assert!(!zs.is_empty(), "cannot whiten an empty sample");
        let n = zs.len() as f64;
        let mut mean = DVector::<f64>::zeros(q);
        for z in zs {
            mean += z;
        }
        mean /= n;
        let mut cov = DMatrix::<f64>::zeros(q, q);
        let mut d = vec![0.0f64; q];
        for z in zs {
            for i in 0..q {
                d[i] = z[i] - mean[i];
            }
            for i in 0..q {
                for j in 0..q {
                    cov[(i, j)] += d[i] * d[j];
                }
            }
        }
        cov /= n;
        let eig = cov.symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        log::info!(
            "latent covariance spectrum: {:?}",
            eig.eigenvalues.iter().copied().collect::<Vec<_>>()
        );
        let transform = if lmax > 0.0 {
            let inv_sqrt =
                eig.eigenvalues.map(|l| 1.0 / l.max(lmax * DECODER_WHITEN_EIG_FLOOR).sqrt());
            &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose()
        } else {
            DMatrix::identity(q, q)
        };
        Self { mean, transform }
    }

    fn apply(&self, zs: &mut [DVector<f64>]) {
        for z in zs.iter_mut() {
            let w = &self.transform * (&*z - &self.mean);
            z.copy_from(&w);
        }
    }

    /// Rewrites the first layer so the net applied to raw `z` equals the
    /// trained net applied to `ẑ`: `w1 ← w1·M`, `b1 ← b1 − w1·M·μ`.
    fn fold_into(&self, net: &mut NetworkParams) {
        let q = net.input_dim;
        assert_eq!(q, self.mean.len(), "whitener dimension mismatch");
        let mut row = vec![0.0f64; q];
        for h in 0..net.hidden_dim {
            row.copy_from_slice(&net.w1[h * q..(h + 1) * q]);
            let mut dot = 0.0;
            for j in 0..q {
                let mut acc = 0.0;
                for k in 0..q {
                    acc += row[k] * self.transform[(k, j)];
                }
                net.w1[h * q + j] = acc;
                dot += acc * self.mean[j];
            }
            net.b1[h] -= dot;
        }
    }
}

/// Gradient-conditioning weights: `1/(1 − a_ii)²` per dimension, normalized
/// to mean one so the effective learning rate is comparable to the
/// unweighted loss.
fn conditioning_weights(latent: &LatentConfig) -> Vec<f64> {
    let q = latent.q();
    let mut w: Vec<f64> = (0..q)
        .map(|i| {
            let leak = (1.0 - latent.a[(i, i)]).clamp(SCALE_FLOOR, 2.0);
            1.0 / (leak * leak)
        })
        .collect();
    let mean = w.iter().sum::<f64>() / q as f64;
    w.iter_mut().for_each(|v| *v /= mean);
    w
}

/// Runs both phases on the dataset and returns the maps plus the epoch log.
///
/// Fully deterministic in `(dataset, seed)`: initialization, batch order,
/// and normalization all draw from seeded generators.
pub fn train(
    dataset: &Dataset,
    ch: &ChannelParams,
    latent: &LatentConfig,
    tc: &TrainConfig,
    seed: u64,
) -> Result<(TrainedMaps, Vec<TrainLogRow>)> {
    if dataset.is_empty() {
        return Err(CoreError::InvalidConfig("cannot train on an empty dataset".into()));
    }
    if tc.batch_size == 0 {
        return Err(CoreError::InvalidConfig("batch size must be positive".into()));
    }
    if !(0.0..1.0).contains(&tc.validation_fraction) {
        return Err(CoreError::InvalidConfig(format!(
            "validation fraction {} outside [0, 1)",
            tc.validation_fraction
        )));
    }
    let (train_pairs, val_pairs) = dataset.split(tc.validation_fraction);
    if train_pairs.is_empty() {
        return Err(CoreError::InvalidConfig("validation split leaves no training data".into()));
    }
    // The validation pass reuses the training slice when no holdout exists so
    // the log always has both columns.
    let val_view = if val_pairs.is_empty() { train_pairs } else { val_pairs };
    let q = latent.q();
    let te = ch.sample_time;
    let u_bar = dataset.u_bar;
    let mut log_rows = Vec::with_capacity(tc.epochs_dyn + tc.epochs_recon);

    // ---- Phase 1: encoder against the latent dynamics ----
    let mut enc = NetworkParams::init(2, tc.hidden_dim, q, seed);
    let init = initial_latent_scale(latent, ch, train_pairs);
    let mut scale = init.scale;
    // Near-zero output start: the latent begins at its data-seeded mean with
    // negligible fluctuation, so phase 1 spends its budget growing the right
    // shape instead of first unlearning a random one — random unit-spread
    // output is cheaper to shrink than to fix, and shrinking is exactly what
    // the closing rescale would undo.
    for w in &mut enc.w2 {
        *w *= OUTPUT_INIT_DAMPING;
    }
    enc.b2.copy_from_slice(&init.output_bias);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5155_4646)); // batch order
    let mut adam = AdamState::new(&enc);
    let mut grads = NetGradients::zeros_like(&enc);
    let mut indices: Vec<usize> = (0..train_pairs.len()).collect();
    let weights = conditioning_weights(latent);

    let cap = tc.batch_size.min(train_pairs.len());
    let mut bufs = BatchBuffers::new(cap, tc.hidden_dim, q);
    let mut step_count = 0usize;

    for epoch in 0..tc.epochs_dyn {
        let hyper = AdamHyper {
            learning_rate: cosine_lr(tc.adam.learning_rate, epoch, tc.epochs_dyn),
            ..tc.adam
        };
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_sq_sum = 0.0f64;
        for batch in indices.chunks(tc.batch_size) {
            let blen = batch.len();
            bufs.forward(&enc, train_pairs, batch);
            if tc.normalization_interval > 0 && step_count % tc.normalization_interval == 0 {
                // This batch's encoder outputs are the normalization batch.
                // Rescaling the output rows only multiplies the stored
                // latents, so they are fixed up in place instead of re-run.
                let factors = unit_std_factors(&bufs.z_x[..blen * q], q);
                enc.scale_output_rows(&factors);
                adam.scale_output_rows(&factors);
                for (s, f) in scale.iter_mut().zip(&factors) {
                    *s *= f;
                }
                bufs.rescale_latents(blen, q, &factors);
            }
            step_count += 1;

            epoch_sq_sum += dyn_gradient_pass(
                &enc,
                latent,
                ch,
                &scale,
                &weights,
                train_pairs,
                batch,
                &mut bufs,
                &mut grads,
            );
            adam_step(&mut enc, &grads, &mut adam, &hyper);
        }
        let loss_train = epoch_sq_sum / train_pairs.len() as f64;
        let loss_val = loss_dyn(&enc, val_view, latent, ch, &scale);
        check_finite(loss_train, "phase-1 training loss")?;
        check_finite(loss_val, "phase-1 validation loss")?;
        log::info!("phase 1 epoch {epoch}: train {loss_train:.6e}, val {loss_val:.6e}");
        log_rows.push(TrainLogRow { epoch, phase: 1, loss_train, loss_val });
    }

    // Closing rescale over the full training set: shipped latents are
    // unit-spread per dimension. Rescaling multiplies the residuals row by
    // row along with the outputs, so this trues the recorded loss up rather
    // than hiding anything — a dimension whose fluctuation never grew gets
    // its small spread inflated right back here.
    {
        let mut hid = vec![0.0f64; tc.hidden_dim];
        let mut zs = vec![0.0f64; train_pairs.len() * q];
        for (p, chunk) in train_pairs.iter().zip(zs.chunks_exact_mut(q)) {
            enc.forward_into(&p.state.as_array(), &mut hid, chunk);
        }
        let factors = unit_std_factors(&zs, q);
        enc.scale_output_rows(&factors);
        for (s, f) in scale.iter_mut().zip(&factors) {
            *s *= f;
        }
    }
    let final_loss_dyn = loss_dyn(&enc, val_view, latent, ch, &scale);

    // ---- Phase 2: decoder on frozen-encoder latents ----
    let mut dec = NetworkParams::init(q, tc.hidden_dim, 2, seed.wrapping_add(1));
    let encode_all = |pairs: &[TransitionPair]| -> Vec<DVector<f64>> {
        let mut hidden = vec![0.0f64; tc.hidden_dim];
        let mut out = vec![0.0f64; q];
        pairs
            .iter()
            .map(|p| {
                enc.forward_into(&p.state.as_array(), &mut hidden, &mut out);
                DVector::from_column_slice(&out)
            })
            .collect()
    };
    let mut train_zs = encode_all(train_pairs);
    let mut val_zs = encode_all(val_view);
    let val_targets: Vec<LedState> = val_view.iter().map(|p| p.state).collect();
    let val_zs_raw = val_zs.clone();
    let whitener = LatentWhitener::fit(&train_zs, q);
    whitener.apply(&mut train_zs);
    whitener.apply(&mut val_zs);
    let mut adam = AdamState::new(&dec);
    let mut grads = NetGradients::zeros_like(&dec);

    let mut hid = vec![0.0f64; tc.hidden_dim];
    let mut out = vec![0.0f64; 2];
    let mut up = vec![0.0f64; 2];
    for epoch in 0..tc.epochs_recon {
        let hyper = AdamHyper {
            learning_rate: cosine_lr(tc.adam.learning_rate, epoch, tc.epochs_recon),
            ..tc.adam
        };
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_sq_sum = 0.0f64;
        for batch in indices.chunks(tc.batch_size) {
            grads.reset();
            let coef = 2.0 / batch.len() as f64;
            for &idx in batch {
                let z = &train_zs[idx];
                let target = train_pairs[idx].state.as_array();
                dec.forward_into(z.as_slice(), &mut hid, &mut out);
                let mut sq = 0.0;
                for i in 0..2 {
                    let d = out[i] - target[i];
                    up[i] = coef * d;
                    sq += d * d;
                }
                epoch_sq_sum += sq;
                dec.backward_from_hidden(z.as_slice(), &hid, &up, &mut grads, None);
            }
            adam_step(&mut dec, &grads, &mut adam, &hyper);
        }
        let loss_train = epoch_sq_sum / train_pairs.len() as f64;
        let loss_val = loss_recon(&dec, &val_zs, &val_targets);
        check_finite(loss_train, "phase-2 training loss")?;
        check_finite(loss_val, "phase-2 validation loss")?;
        log::info!("phase 2 epoch {epoch}: train {loss_train:.6e}, val {loss_val:.6e}");
        log_rows.push(TrainLogRow { epoch, phase: 2, loss_train, loss_val });
    }
    // The shipped decoder reads raw latents; the recorded loss is the folded
    // net's, so any folding error would surface here.
    whitener.fold_into(&mut dec);
    let final_loss_recon = loss_recon(&dec, &val_zs_raw, &val_targets);

    let maps = TrainedMaps {
        encoder: enc,
        decoder: dec,
        scale,
        latent: latent.clone(),
        te,
        u_bar,
        cp_bar_train: ch.cp_bar(),
        final_loss_dyn,
        final_loss_recon,
    };
    Ok((maps, log_rows))
}

/// Writes the epoch log as `epoch,phase,loss_train,loss_val`.
pub fn write_training_log(path: &Path, rows: &[TrainLogRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,phase,loss_train,loss_val")?;
    for r in rows {
        writeln!(w, "{},{},{:.16e},{:.16e}", r.epoch, r.phase, r.loss_train, r.loss_val)?;
    }
    w.flush()?;
    Ok(())
}

const ENCODER_FILE: &str = "encoder.net";
const DECODER_FILE: &str = "decoder.net";

fn join_floats(vals: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in vals.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

fn parse_floats(s: &str, what: &str, dir: &Path) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|e| CoreError::MalformedArtifact {
                path: dir.display().to_string(),
                reason: format!("bad float in {what}: {e}"),
            })
        })
        .collect()
}

impl TrainedMaps {
    /// Saves both networks under `dir`; run parameters ride along as
    /// checkpoint metadata so a load needs nothing else.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let q = self.latent.q();
        let enc_meta = vec![
            ("te".into(), format!("{:.16e}", self.te)),
            ("u_bar".into(), format!("{:.16e}", self.u_bar)),
            ("cp_bar_train".into(), format!("{:.16e}", self.cp_bar_train)),
            ("scale".into(), join_floats(self.scale.iter().copied())),
            ("latent_q".into(), q.to_string()),
            ("latent_p".into(), self.latent.p().to_string()),
            ("latent_a".into(), join_floats(self.latent.a.transpose().iter().copied())),
            ("latent_b".into(), join_floats(self.latent.b.transpose().iter().copied())),
            ("final_loss_dyn".into(), format!("{:.16e}", self.final_loss_dyn)),
        ];
        let dec_meta =
            vec![("final_loss_recon".into(), format!("{:.16e}", self.final_loss_recon))];
        save_network(&dir.join(ENCODER_FILE), &self.encoder, &enc_meta)?;
        save_network(&dir.join(DECODER_FILE), &self.decoder, &dec_meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (encoder, enc_meta) = load_network(&dir.join(ENCODER_FILE))?;
        let (decoder, dec_meta) = load_network(&dir.join(DECODER_FILE))?;
        let missing = |key: &str| CoreError::MalformedArtifact {
            path: dir.display().to_string(),
            reason: format!("encoder checkpoint lacks '{key}' metadata"),
        };
        let lookup = |meta: &[(String, String)], key: &str| -> Option<String> {
            meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone())
        };
        let scalar = |key: &str| -> Result<f64> {
            let raw = lookup(&enc_meta, key).ok_or_else(|| missing(key))?;
            raw.parse::<f64>().map_err(|e| CoreError::MalformedArtifact {
                path: dir.display().to_string(),
                reason: format!("bad {key}: {e}"),
            })
        };
        let te = scalar("te")?;
        let u_bar = scalar("u_bar")?;
        let cp_bar_train = scalar("cp_bar_train")?;
        let final_loss_dyn = scalar("final_loss_dyn")?;
        let scale = parse_floats(&lookup(&enc_meta, "scale").ok_or_else(|| missing("scale"))?, "scale", dir)?;
        let q = scalar("latent_q")? as usize;
        let p = scalar("latent_p")? as usize;
        let a_flat = parse_floats(&lookup(&enc_meta, "latent_a").ok_or_else(|| missing("latent_a"))?, "latent_a", dir)?;
        let b_flat = parse_floats(&lookup(&enc_meta, "latent_b").ok_or_else(|| missing("latent_b"))?, "latent_b", dir)?;
        if a_flat.len() != q * q || b_flat.len() != q * p || scale.len() != q {
            return Err(CoreError::MalformedArtifact {
                path: dir.display().to_string(),
                reason: format!(
                    "latent metadata sizes inconsistent with q={q}, p={p}: a={}, b={}, scale={}",
                    a_flat.len(),
                    b_flat.len(),
                    scale.len()
                ),
            });
        }
        let latent = LatentConfig::new(
            DMatrix::from_row_slice(q, q, &a_flat),
            DMatrix::from_row_slice(q, p, &b_flat),
        )?;
        if encoder.output_dim != q || decoder.input_dim != q || encoder.input_dim != 2 {
            return Err(CoreError::MalformedArtifact {
                path: dir.display().to_string(),
                reason: format!(
                    "network dimensions ({}→{} / {}→{}) inconsistent with q={q}",
                    encoder.input_dim, encoder.output_dim, decoder.input_dim, decoder.output_dim
                ),
            });
        }
        let final_loss_recon = lookup(&dec_meta, "final_loss_recon")
            .ok_or_else(|| CoreError::MalformedArtifact {
                path: dir.display().to_string(),
                reason: "decoder checkpoint lacks 'final_loss_recon' metadata".into(),
            })?
            .parse::<f64>()
            .map_err(|e| CoreError::MalformedArtifact {
                path: dir.display().to_string(),
                reason: format!("bad final_loss_recon: {e}"),
            })?;
        Ok(TrainedMaps {
            encoder,
            decoder,
            scale,
            latent,
            te,
            u_bar,
            cp_bar_train,
            final_loss_dyn,
            final_loss_recon,
        })
    }
}
