//! Scratch probe: how far does the running filter drift from the encoder's
//! own latent along a noise-free trajectory? Separates accumulated one-step
//! residual (which the filter integrates with gain 1/(1−aᵢ)) from transient
//! decay of the initial latent error.

use ledkkl::channel::{measure_pair, step, ChannelParams, LedState};
use ledkkl::kkl::{latent_step, StateDecoder, StateEncoder};
use ledkkl::training::TrainedMaps;
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = args.get(1).map(String::as_str).unwrap_or("out/checkpoints");
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let maps = TrainedMaps::load(Path::new(dir)).unwrap();
    let ch = ChannelParams::default();
    let filter = maps.latent.with_row_scaled_b(&maps.scale);
    let q = filter.a.nrows();
    let te = maps.te;

    // Noise-free open-loop trajectory from the standard start.
    let mut x = LedState::new(0.2, 0.0);
    let mut z = maps.encoder.encode(&LedState::new(0.0, 0.0));

    // Per-dim one-step residual e(x) = enc(f(x)) − A enc(x) − B̃ ℓ(x) along
    // the trajectory (the systematic forcing the filter integrates).
    let mut e_sum = vec![0.0f64; q];
    let mut e_sq = vec![0.0f64; q];

    let checkpoints = [0usize, 50, 100, 200, 400, 700, steps - 1];
    println!("k | x1 x2 | x1_hat x2_hat | zeta per dim (z_filter - enc(x))");
    for k in 0..steps {
        let x_hat = maps.decoder.decode(&z);
        let zx = maps.encoder.encode(&x);
        if checkpoints.contains(&k) {
            let zeta: Vec<String> = (0..q).map(|i| format!("{:+.3e}", z[i] - zx[i])).collect();
            println!(
                "{k:4} | {:+.4} {:+.4} | {:+.4} {:+.4} | {}",
                x.angle,
                x.angular_velocity,
                x_hat.angle,
                x_hat.angular_velocity,
                zeta.join(" ")
            );
        }
        let y = measure_pair(&x, &ch, None);
        let x_next = step(&x, te, 0.0, None);
        let zx_next = maps.encoder.encode(&x_next);
        let pred = latent_step(&zx, &y, &filter);
        for i in 0..q {
            let e = zx_next[i] - pred[i];
            e_sum[i] += e;
            e_sq[i] += e * e;
        }
        z = latent_step(&z, &y, &filter);
        x = x_next;
    }
    let n = steps as f64;
    println!("\nper-dim one-step residual along the trajectory:");
    for i in 0..q {
        let mean = e_sum[i] / n;
        let std = (e_sq[i] / n - mean * mean).max(0.0).sqrt();
        let a = maps.latent.a[(i, i)];
        println!(
            "  dim {i}: mean {mean:+.3e}  std {std:.3e}  mean/(1-a) {:+.3e}",
            mean / (1.0 - a)
        );
    }

    // Steady-state decode error with the encoder's own latent (no filter):
    // isolates decoder quality from filter drift.
    let final_err_enc = {
        let zx = maps.encoder.encode(&x);
        let xr = maps.decoder.decode(&zx);
        (xr.angle - x.angle, xr.angular_velocity - x.angular_velocity)
    };
    println!("\nround-trip error at final state: {:+.3e} {:+.3e}", final_err_enc.0, final_err_enc.1);
}
