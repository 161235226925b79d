//! Scratch probe: decoder robustness versus reconstruction accuracy.
//!
//! Loads a trained encoder and computes, for every training state, the
//! latent the running filter would park at near that state: the encoder's
//! own latent minus the one-step residual integrated by (I−A)⁻¹. Trains a
//! fresh decoder on the clean cloud, the steady-state cloud, or both, and
//! reports the clean held-out reconstruction loss alongside the observer
//! tracking error with the new decoder in the loop.

use ledkkl::channel::{measure_pair, step, ChannelParams, LedState, NoiseConfig};
use ledkkl::datagen::Dataset;
use ledkkl::eval::{run_scenario, InputKind, Scenario};
use ledkkl::kkl::{latent_step, StateEncoder};
use ledkkl::net::{adam_step, AdamHyper, AdamState, NetGradients, NetworkParams};
use ledkkl::training::TrainedMaps;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ckpt = args.get(1).map(String::as_str).unwrap_or("out/checkpoints");
    let data = args.get(2).map(String::as_str).unwrap_or("out/dataset.csv");
    let mode: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2); // 0 clean, 1 steady, 2 both
    let epochs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(60);
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let maps = TrainedMaps::load(Path::new(ckpt)).unwrap();
    let ds = Dataset::read_csv(Path::new(data)).unwrap();
    let ch = ChannelParams::default();
    let q = maps.latent.a.nrows();
    let filter = maps.latent.with_row_scaled_b(&maps.scale);

    // Clean latent and local steady-state latent per training sample.
    let (train, val) = ds.split(0.1);
    let mut offset_rms = vec![0.0f64; q];
    let mut zs: Vec<DVector<f64>> = Vec::with_capacity(2 * train.len());
    let mut targets: Vec<[f64; 2]> = Vec::with_capacity(2 * train.len());
    for p in train {
        let z = maps.encoder.encode(&p.state);
        let zn = maps.encoder.encode(&p.next);
        let y = measure_pair(&p.state, &ch, None);
        let t = [p.state.angle, p.state.angular_velocity];
        let mut zt = z.clone();
        for i in 0..q {
            let pred = filter.a[(i, i)] * z[i] + filter.b[(i, 0)] * y[0] + filter.b[(i, 1)] * y[1];
            let e = zn[i] - pred;
            let zeta = e / (1.0 - maps.latent.a[(i, i)]);
            zt[i] -= zeta;
            offset_rms[i] += zeta * zeta;
        }
        if mode == 0 || mode == 2 {
            zs.push(z);
            targets.push(t);
        }
        if mode == 1 || mode == 2 {
            zs.push(zt);
            targets.push(t);
        }
    }
    let n = train.len() as f64;
    println!("per-dim steady-state offset rms (mode {mode}):");
    for (i, s) in offset_rms.iter().enumerate() {
        println!("  dim {i}: {:.3e}", (s / n).sqrt());
    }

    // Whitening from the clean latent cloud.
    let nf = zs.len() as f64;
    let mut mean = DVector::<f64>::zeros(q);
    for z in &zs {
        mean += z;
    }
    mean /= nf;
    let mut cov = DMatrix::<f64>::zeros(q, q);
    for z in &zs {
        let d = z - &mean;
        cov += &d * d.transpose();
    }
    cov /= nf;
    let eig = cov.symmetric_eigen();
    println!("spectrum: {:?}", eig.eigenvalues.iter().copied().collect::<Vec<_>>());
    let lmax = eig.eigenvalues.max();
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(lmax * 1e-12).sqrt());
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();

    let whiten = |z: &DVector<f64>| -> DVector<f64> { &m * (z - &mean) };
    let zs_w: Vec<DVector<f64>> = zs.iter().map(whiten).collect();
    let val_w: Vec<DVector<f64>> = val.iter().map(|p| whiten(&maps.encoder.encode(&p.state))).collect();
    let val_targets: Vec<[f64; 2]> =
        val.iter().map(|p| [p.state.angle, p.state.angular_velocity]).collect();

    let hidden = maps.decoder.hidden_dim;
    let mut dec = NetworkParams::init(q, hidden, 2, 2);
    let mut adam = AdamState::new(&dec);
    let mut grads = NetGradients::zeros_like(&dec);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut indices: Vec<usize> = (0..zs_w.len()).collect();
    let batch_size = 256;
    let mut hid = vec![0.0f64; hidden];
    let mut out = vec![0.0f64; 2];
    let mut up = vec![0.0f64; 2];

    let clean_val = |dec: &NetworkParams| -> f64 {
        let mut hid = vec![0.0f64; hidden];
        let mut out = vec![0.0f64; 2];
        let mut total = 0.0;
        for (z, t) in val_w.iter().zip(&val_targets) {
            dec.forward_into(z.as_slice(), &mut hid, &mut out);
            total += (out[0] - t[0]).powi(2) + (out[1] - t[1]).powi(2);
        }
        total / val_w.len() as f64
    };

    for epoch in 0..epochs {
        let cos_lr = lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos());
        let hyper = AdamHyper { learning_rate: cos_lr, ..AdamHyper::default() };
        indices.shuffle(&mut rng);
        for batch in indices.chunks(batch_size) {
            grads.reset();
            let coef = 2.0 / batch.len() as f64;
            for &idx in batch {
                dec.forward_into(zs_w[idx].as_slice(), &mut hid, &mut out);
                for i in 0..2 {
                    up[i] = coef * (out[i] - targets[idx][i]);
                }
                dec.backward_from_hidden(zs_w[idx].as_slice(), &hid, &up, &mut grads, None);
            }
            adam_step(&mut dec, &grads, &mut adam, &hyper);
        }
        if epoch % 10 == 0 || epoch == epochs - 1 {
            println!("epoch {epoch}: clean val {:.6e}", clean_val(&dec));
        }
    }

    // Fold the whitener so the decoder reads raw latents, then run scenarios.
    let mut folded = dec.clone();
    for h in 0..hidden {
        let row: Vec<f64> = (0..q)
            .map(|j| (0..q).map(|k| dec.w1[h * q + k] * m[(k, j)]).sum())
            .collect();
        let shift: f64 = (0..q).map(|j| row[j] * mean[j]).sum();
        folded.w1[h * q..(h + 1) * q].copy_from_slice(&row);
        folded.b1[h] -= shift;
    }
    // Three-way check at a held fixed point: whitened-path and folded-path
    // decodes of the settled latent must agree (fold correctness), and the
    // z-tilde formula must reproduce the settled latent (cloud correctness).
    let x_chk = LedState::new(0.2, 0.0);
    let y_chk = measure_pair(&x_chk, &ch, None);
    let z_settle = filter.settled_latent(&y_chk);
    let z_clean = maps.encoder.encode(&x_chk);
    let xn_chk = step(&x_chk, maps.te, maps.u_bar, None);
    let zn_chk = maps.encoder.encode(&xn_chk);
    let mut zt_chk = z_clean.clone();
    for i in 0..q {
        let pred = filter.a[(i, i)] * z_clean[i]
            + filter.b[(i, 0)] * y_chk[0]
            + filter.b[(i, 1)] * y_chk[1];
        let e = zn_chk[i] - pred;
        zt_chk[i] -= e / (1.0 - maps.latent.a[(i, i)]);
    }
    println!("|zt_formula - settled| at (0.2, 0): {:.3e}", (&zt_chk - &z_settle).norm());
    let mut hid_chk = vec![0.0f64; hidden];
    let mut out_chk = vec![0.0f64; 2];
    let wset = whiten(&z_settle);
    dec.forward_into(wset.as_slice(), &mut hid_chk, &mut out_chk);
    println!("settled z, whitened path: ({:+.4}, {:+.4})", out_chk[0], out_chk[1]);
    folded.forward_into(z_settle.as_slice(), &mut hid_chk, &mut out_chk);
    println!("settled z, folded path  : ({:+.4}, {:+.4})", out_chk[0], out_chk[1]);
    folded.forward_into(z_clean.as_slice(), &mut hid_chk, &mut out_chk);
    println!("clean z,   folded path  : ({:+.4}, {:+.4})", out_chk[0], out_chk[1]);

    let eval_maps = TrainedMaps { decoder: folded, ..maps };
    let noise = NoiseConfig::default();
    for kind in [InputKind::OpenLoop, InputKind::ClosedLoop] {
        let sc = Scenario::standard(kind, 1);
        let res = run_scenario(&eval_maps, &ch, &noise, &sc).unwrap();
        let quarter = res.rows.len() / 4;
        let mean_abs = |rows: &[ledkkl::eval::TraceRow]| -> f64 {
            rows.iter().map(|r| r.x[1].abs()).sum::<f64>() / rows.len() as f64
        };
        println!(
            "{}: rmse_x1 {:.3e} rmse_x2 {:.3e} | true-|x2| quarters first {:.3e} last {:.3e}",
            kind.label(),
            res.rmse_x[0],
            res.rmse_x[1],
            mean_abs(&res.rows[..quarter]),
            mean_abs(&res.rows[res.rows.len() - quarter..]),
        );
        for k in [0usize, 20, 50, 100, 200, 400, 700, 999] {
            let r = &res.rows[k];
            println!(
                "  k {k:4}: x ({:+.4}, {:+.4})  x_hat ({:+.4}, {:+.4})",
                r.x[0], r.x[1], r.x_hat[0], r.x_hat[1]
            );
        }
    }
}
