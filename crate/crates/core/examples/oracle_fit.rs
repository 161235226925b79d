//! Scratch probe: how well can a fresh decoder regress states from the
//! *series-oracle* latents? Separates the invertibility floor of the latent
//! map itself from any encoder approximation effects.

use ledkkl::channel::ChannelParams;
use ledkkl::datagen::sample_states;
use ledkkl::kkl::{default_latent_config, series_oracle_t};
use ledkkl::net::{adam_step, AdamHyper, AdamState, NetGradients, NetworkParams};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let size: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let floor: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-12);

    let te = 0.01;
    let ch = ChannelParams::default();
    let cfg = default_latent_config(te).unwrap();
    let states = sample_states(size, 1);

    let t0 = std::time::Instant::now();
    let mut zs: Vec<DVector<f64>> = Vec::with_capacity(size);
    for x in &states {
        zs.push(series_oracle_t(x, &cfg, &ch, 0.0, 2000, 1e-12).unwrap().value);
    }
    println!("oracle latents for {size} states in {:.1} s", t0.elapsed().as_secs_f64());

    // Per-dimension unit std (the carried-scale convention), then whitening.
    let q = 6usize;
    let n = zs.len() as f64;
    for i in 0..q {
        let mean = zs.iter().map(|z| z[i]).sum::<f64>() / n;
        let var = zs.iter().map(|z| (z[i] - mean) * (z[i] - mean)).sum::<f64>() / n;
        let f = 1.0 / var.sqrt();
        for z in &mut zs {
            z[i] *= f;
        }
    }
    let mut mean = DVector::<f64>::zeros(q);
    for z in &zs {
        mean += z;
    }
    mean /= n;
    let mut cov = DMatrix::<f64>::zeros(q, q);
    for z in &zs {
        let d = z - &mean;
        cov += &d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    println!("oracle latent spectrum: {:?}", eig.eigenvalues.iter().copied().collect::<Vec<_>>());
    let lmax = eig.eigenvalues.max();
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(lmax * floor).sqrt());
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
    for z in &mut zs {
        let w = &m * (&*z - &mean);
        z.copy_from(&w);
    }

    // Same split convention as the trainer: tail 10% held out.
    let n_val = size / 10;
    let n_train = size - n_val;

    let mut dec = NetworkParams::init(q, hidden, 2, 2);
    let mut adam = AdamState::new(&dec);
    let mut grads = NetGradients::zeros_like(&dec);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut indices: Vec<usize> = (0..n_train).collect();
    let batch_size = 256;

    let mut hid = vec![0.0f64; hidden];
    let mut out = vec![0.0f64; 2];
    let mut up = vec![0.0f64; 2];
    let val_loss = |dec: &NetworkParams| -> f64 {
        let mut hid = vec![0.0f64; hidden];
        let mut out = vec![0.0f64; 2];
        let mut total = 0.0;
        for i in n_train..size {
            dec.forward_into(zs[i].as_slice(), &mut hid, &mut out);
            let t = [states[i].angle, states[i].angular_velocity];
            total += (out[0] - t[0]).powi(2) + (out[1] - t[1]).powi(2);
        }
        total / n_val as f64
    };

    for epoch in 0..epochs {
        let cos_lr = lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos());
        let hyper = AdamHyper { learning_rate: cos_lr, ..AdamHyper::default() };
        indices.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for batch in indices.chunks(batch_size) {
            grads.reset();
            let coef = 2.0 / batch.len() as f64;
            for &idx in batch {
                let t = [states[idx].angle, states[idx].angular_velocity];
                dec.forward_into(zs[idx].as_slice(), &mut hid, &mut out);
                let mut sq = 0.0;
                for i in 0..2 {
                    let d = out[i] - t[i];
                    up[i] = coef * d;
                    sq += d * d;
                }
                sq_sum += sq;
                dec.backward_from_hidden(zs[idx].as_slice(), &hid, &up, &mut grads, None);
            }
            adam_step(&mut dec, &grads, &mut adam, &hyper);
        }
        if epoch % 5 == 0 || epoch == epochs - 1 {
            println!(
                "epoch {epoch}: train {:.6e} val {:.6e}",
                sq_sum / n_train as f64,
                val_loss(&dec)
            );
        }
    }
    println!("final val: {:.6e} ({:.1} s total)", val_loss(&dec), t0.elapsed().as_secs_f64());
}
