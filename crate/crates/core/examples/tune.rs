//! Scratch driver for watching training convergence at various sizes.
//! Not part of the shipped pipeline; run with --release.

use ledkkl::channel::ChannelParams;
use ledkkl::datagen::Dataset;
use ledkkl::kkl::default_latent_config;
use ledkkl::kkl::{StateDecoder, StateEncoder};
use ledkkl::training::{train, TrainConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let size: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let epochs_dyn: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);
    let epochs_recon: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(epochs_dyn);
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let te = 0.01;
    let ds = Dataset::generate(size, te, 0.0, 1);
    let ch = ChannelParams::default();
    let cfg = default_latent_config(te).unwrap();
    let mut tc = TrainConfig {
        epochs_dyn,
        epochs_recon,
        hidden_dim: hidden,
        ..TrainConfig::default()
    };
    tc.adam.learning_rate = lr;
    let t0 = std::time::Instant::now();
    let (maps, log) = train(&ds, &ch, &cfg, &tc, 1).unwrap();
    println!("elapsed: {:.1} s", t0.elapsed().as_secs_f64());
    println!("scale: {:?}", maps.scale);
    println!("final_loss_dyn: {:.6e}", maps.final_loss_dyn);
    println!("final_loss_recon: {:.6e}", maps.final_loss_recon);

    // Where does the reconstruction residual live?
    let (_, val) = ds.split(tc.validation_fraction);
    let mut sq: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(val.len()); // x1, x2, e1², e2²
    for p in val {
        let xh = maps.decoder.decode(&maps.encoder.encode(&p.state));
        let e1 = xh.angle - p.state.angle;
        let e2 = xh.angular_velocity - p.state.angular_velocity;
        sq.push((p.state.angle, p.state.angular_velocity, e1 * e1, e2 * e2));
    }
    let n = sq.len() as f64;
    let mse1: f64 = sq.iter().map(|s| s.2).sum::<f64>() / n;
    let mse2: f64 = sq.iter().map(|s| s.3).sum::<f64>() / n;
    println!("per-component val MSE: x1 {mse1:.3e}, x2 {mse2:.3e}");
    let mut totals: Vec<f64> = sq.iter().map(|s| s.2 + s.3).collect();
    totals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for q in [0.5, 0.9, 0.99, 0.999, 1.0] {
        let idx = (((totals.len() - 1) as f64) * q) as usize;
        println!("  sq-error quantile {q}: {:.3e}", totals[idx]);
    }
    for (label, pick) in [("x1", 0usize), ("x2", 1usize)] {
        print!("  binned by {label}: ");
        for b in 0..10 {
            let lo = -0.5 + b as f64 * 0.1;
            let hi = lo + 0.1;
            let bin: Vec<&(f64, f64, f64, f64)> = sq
                .iter()
                .filter(|s| {
                    let v = if pick == 0 { s.0 } else { s.1 };
                    v >= lo && v < hi
                })
                .collect();
            let m = bin.iter().map(|s| s.2 + s.3).sum::<f64>() / bin.len().max(1) as f64;
            print!("{m:.1e} ");
        }
        println!();
    }

    for r in &log {
        println!("epoch {} phase {} train {:.6e} val {:.6e}", r.epoch, r.phase, r.loss_train, r.loss_val);
    }
}
