//! Single-hidden-layer dense networks with exact gradients.
//!
//! `forward(x) = w2·tanh(w1·x + b1) + b2` with a linear output layer. This
//! is the only function class used for the learned latent maps, so the
//! module stays deliberately small: explicit row-major weight vectors,
//! hand-derived backprop, and bias-corrected Adam. No autograd framework,
//! which keeps every gradient testable against finite differences.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

/// Weights of one `input → hidden(tanh) → output(linear)` network.
///
/// `w1` is `hidden×input` row-major, `w2` is `output×hidden` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Parameter-shaped accumulator for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl NetGradients {
    #[must_use]
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    pub fn reset(&mut self) {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            v.fill(0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            for g in v.iter_mut() {
                *g *= s;
            }
        }
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub t: u64,
    pub m: NetGradients,
    pub v: NetGradients,
}

impl AdamState {
    #[must_use]
    pub fn new(net: &NetworkParams) -> Self {
        Self { t: 0, m: NetGradients::zeros_like(net), v: NetGradients::zeros_like(net) }
    }

    /// Companion to [`NetworkParams::scale_output_rows`]: rescaling row `o`
    /// by `s` multiplies its gradients by `s` too, so the first moments
    /// scale linearly and the second moments quadratically. Without this the
    /// stale moments mis-size every step after a rescale.
    pub fn scale_output_rows(&mut self, s: &[f64]) {
        assert_eq!(self.m.b2.len(), s.len(), "scale length mismatch");
        let hidden = self.m.w2.len() / s.len();
        for (o, &si) in s.iter().enumerate() {
            for w in &mut self.m.w2[o * hidden..(o + 1) * hidden] {
                *w *= si;
            }
            self.m.b2[o] *= si;
            for w in &mut self.v.w2[o * hidden..(o + 1) * hidden] {
                *w *= si * si;
            }
            self.v.b2[o] *= si * si;
        }
    }
}

impl NetworkParams {
    /// Glorot-uniform initialization: weights uniform on
    /// `±sqrt(6/(fan_in+fan_out))` per layer, biases zero.
    #[must_use]
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Self {
        assert!(input_dim > 0 && hidden_dim > 0 && output_dim > 0, "dims must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let lim2 = (6.0 / (hidden_dim + output_dim) as f64).sqrt();
        let w1 = (0..hidden_dim * input_dim).map(|_| rng.random_range(-lim1..lim1)).collect();
        let w2 = (0..output_dim * hidden_dim).map(|_| rng.random_range(-lim2..lim2)).collect();
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; output_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Hidden activations and output, written into caller-owned buffers.
    ///
    /// Buffer reuse keeps the training loop allocation-free; `hidden` is
    /// needed again by [`NetworkParams::backward_from_hidden`].
    pub fn forward_into(&self, x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.input_dim, "input length mismatch");
        assert_eq!(hidden.len(), self.hidden_dim, "hidden buffer length mismatch");
        assert_eq!(out.len(), self.output_dim, "output buffer length mismatch");
        for h in 0..self.hidden_dim {
            let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
            let mut acc = self.b1[h];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            hidden[h] = acc.tanh();
        }
        for o in 0..self.output_dim {
            let row = &self.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
            let mut acc = self.b2[o];
            for (wi, hi) in row.iter().zip(hidden.iter()) {
                acc += wi * hi;
            }
            out[o] = acc;
        }
    }

    /// Convenience forward pass.
    #[must_use]
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        self.forward_into(x, &mut hidden, &mut out);
        out
    }

    /// Accumulates `d⟨upstream, forward(x)⟩/dθ` into `grads` and, when
    /// requested, writes the input gradient `d⟨upstream, forward(x)⟩/dx`.
    ///
    /// `hidden` must come from a [`NetworkParams::forward_into`] call on the
    /// same `x` with the current weights; the tanh derivative is recovered
    /// as `1 − h²` without re-evaluating tanh.
    pub fn backward_from_hidden(
        &self,
        x: &[f64],
        hidden: &[f64],
        upstream: &[f64],
        grads: &mut NetGradients,
        mut input_grad: Option<&mut [f64]>,
    ) {
        assert_eq!(x.len(), self.input_dim, "input length mismatch");
        assert_eq!(hidden.len(), self.hidden_dim, "hidden length mismatch");
        assert_eq!(upstream.len(), self.output_dim, "upstream length mismatch");
        if let Some(ig) = input_grad.as_deref_mut() {
            assert_eq!(ig.len(), self.input_dim, "input gradient length mismatch");
            ig.fill(0.0);
        }
        for (o, &up) in upstream.iter().enumerate() {
            grads.b2[o] += up;
            let row = &mut grads.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
            for (g, hi) in row.iter_mut().zip(hidden.iter()) {
                *g += up * hi;
            }
        }
        for h in 0..self.hidden_dim {
            let mut dh = 0.0;
            for (o, &up) in upstream.iter().enumerate() {
                dh += up * self.w2[o * self.hidden_dim + h];
            }
            let dpre = dh * (1.0 - hidden[h] * hidden[h]);
            grads.b1[h] += dpre;
            let row = &mut grads.w1[h * self.input_dim..(h + 1) * self.input_dim];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += dpre * xi;
            }
            if let Some(ig) = input_grad.as_deref_mut() {
                let wrow = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
                for (gi, wi) in ig.iter_mut().zip(wrow) {
                    *gi += dpre * wi;
                }
            }
        }
    }

    /// One-shot backward pass returning fresh gradient buffers.
    #[must_use]
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> (NetGradients, Vec<f64>) {
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        self.forward_into(x, &mut hidden, &mut out);
        let mut grads = NetGradients::zeros_like(self);
        let mut input_grad = vec![0.0; self.input_dim];
        self.backward_from_hidden(x, &hidden, upstream, &mut grads, Some(&mut input_grad));
        (grads, input_grad)
    }

    /// Rescales output row `i` (weights and bias) by `s[i]`.
    ///
    /// Used by the latent normalization: scaling the linear output layer is
    /// exactly scaling the network output per dimension.
    pub fn scale_output_rows(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.output_dim, "scale length mismatch");
        for (o, &si) in s.iter().enumerate() {
            for w in &mut self.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim] {
                *w *= si;
            }
            self.b2[o] *= si;
        }
    }
}

/// Standard bias-corrected Adam update, in place.
pub fn adam_step(net: &mut NetworkParams, grads: &NetGradients, state: &mut AdamState, hy: &AdamHyper) {
    state.t += 1;
    let bc1 = 1.0 - hy.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hy.beta2.powi(state.t as i32);
    let groups: [(&mut Vec<f64>, &Vec<f64>, &mut Vec<f64>, &mut Vec<f64>); 4] = [
        (&mut net.w1, &grads.w1, &mut state.m.w1, &mut state.v.w1),
        (&mut net.b1, &grads.b1, &mut state.m.b1, &mut state.v.b1),
        (&mut net.w2, &grads.w2, &mut state.m.w2, &mut state.v.w2),
        (&mut net.b2, &grads.b2, &mut state.m.b2, &mut state.v.b2),
    ];
    for (params, g, m, v) in groups {
        assert_eq!(params.len(), g.len(), "gradient shape mismatch");
        for i in 0..params.len() {
            m[i] = hy.beta1 * m[i] + (1.0 - hy.beta1) * g[i];
            v[i] = hy.beta2 * v[i] + (1.0 - hy.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= hy.learning_rate * m_hat / (v_hat.sqrt() + hy.epsilon);
        }
    }
}

// ====================== checkpoint serialization ======================
//
// Text container, one logical field per line, floats printed with 17
// significant digits ({:.16e}) so every f64 round-trips exactly:
//
//   ledkkl-net v1
//   meta <key> <value...>      zero or more, order preserved
//   dims <input> <hidden> <output>
//   w1                          then `hidden` lines of `input` floats
//   b1                          then one line of `hidden` floats
//   w2                          then `output` lines of `hidden` floats
//   b2                          then one line of `output` floats
//   end

const CHECKPOINT_HEADER: &str = "ledkkl-net v1";

fn write_floats(out: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// Saves a network plus free-form metadata lines.
pub fn save_network(path: &Path, net: &NetworkParams, meta: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    text.push_str(CHECKPOINT_HEADER);
    text.push('\n');
    for (k, v) in meta {
        assert!(!k.contains(char::is_whitespace), "meta key must be a single token");
        let _ = writeln!(text, "meta {k} {v}");
    }
    let _ = writeln!(text, "dims {} {} {}", net.input_dim, net.hidden_dim, net.output_dim);
    text.push_str("w1\n");
    for h in 0..net.hidden_dim {
        write_floats(&mut text, &net.w1[h * net.input_dim..(h + 1) * net.input_dim]);
    }
    text.push_str("b1\n");
    write_floats(&mut text, &net.b1);
    text.push_str("w2\n");
    for o in 0..net.output_dim {
        write_floats(&mut text, &net.w2[o * net.hidden_dim..(o + 1) * net.hidden_dim]);
    }
    text.push_str("b2\n");
    write_floats(&mut text, &net.b2);
    text.push_str("end\n");
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn malformed(path: &Path, reason: impl Into<String>) -> CoreError {
    CoreError::MalformedArtifact { path: path.display().to_string(), reason: reason.into() }
}

fn parse_float_line(line: &str, n: usize, path: &Path) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| malformed(path, format!("bad float: {e}")))?;
    if vals.len() != n {
        return Err(malformed(path, format!("expected {n} floats, found {}", vals.len())));
    }
    Ok(vals)
}

struct LineReader<'a> {
    lines: std::io::Lines<BufReader<std::fs::File>>,
    path: &'a Path,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &str) -> Result<String> {
        self.lines
            .next()
            .transpose()?
            .ok_or_else(|| malformed(self.path, format!("truncated before {what}")))
    }

    fn expect(&mut self, marker: &str) -> Result<()> {
        if self.next(marker)? != marker {
            return Err(malformed(self.path, format!("expected section {marker}")));
        }
        Ok(())
    }
}

/// Loads a network saved by [`save_network`], returning its metadata too.
pub fn load_network(path: &Path) -> Result<(NetworkParams, Vec<(String, String)>)> {
    if !path.exists() {
        return Err(CoreError::MissingArtifact(path.display().to_string()));
    }
    let file = std::fs::File::open(path)?;
    let mut r = LineReader { lines: BufReader::new(file).lines(), path };

    if r.next("header")? != CHECKPOINT_HEADER {
        return Err(malformed(path, "unrecognized header"));
    }
    let mut meta = Vec::new();
    let dims_line = loop {
        let line = r.next("dims")?;
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest
                .split_once(' ')
                .ok_or_else(|| malformed(path, "meta line needs key and value"))?;
            meta.push((k.to_string(), v.to_string()));
        } else {
            break line;
        }
    };
    let dims: Vec<usize> = dims_line
        .strip_prefix("dims ")
        .ok_or_else(|| malformed(path, "expected dims line"))?
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| malformed(path, format!("bad dims: {e}")))?;
    if dims.len() != 3 || dims.iter().any(|&d| d == 0) {
        return Err(malformed(path, "dims must be three positive integers"));
    }
    let (input_dim, hidden_dim, output_dim) = (dims[0], dims[1], dims[2]);

    r.expect("w1")?;
    let mut w1 = Vec::with_capacity(hidden_dim * input_dim);
    for _ in 0..hidden_dim {
        w1.extend(parse_float_line(&r.next("w1 row")?, input_dim, path)?);
    }
    r.expect("b1")?;
    let b1 = parse_float_line(&r.next("b1")?, hidden_dim, path)?;
    r.expect("w2")?;
    let mut w2 = Vec::with_capacity(output_dim * hidden_dim);
    for _ in 0..output_dim {
        w2.extend(parse_float_line(&r.next("w2 row")?, hidden_dim, path)?);
    }
    r.expect("b2")?;
    let b2 = parse_float_line(&r.next("b2")?, output_dim, path)?;
    r.expect("end")?;

    Ok((NetworkParams { input_dim, hidden_dim, output_dim, w1, b1, w2, b2 }, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_net(rng: &mut ChaCha8Rng) -> NetworkParams {
        let input_dim = rng.random_range(1..5usize);
        let hidden_dim = rng.random_range(1..9usize);
        let output_dim = rng.random_range(1..4usize);
        let mut net = NetworkParams::init(input_dim, hidden_dim, output_dim, rng.random());
        // non-zero biases so their gradients are exercised from a generic point
        for b in net.b1.iter_mut().chain(net.b2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        net
    }

    #[test]
    fn forward_matches_frozen_tanh_value() {
        let net = NetworkParams {
            input_dim: 1,
            hidden_dim: 1,
            output_dim: 1,
            w1: vec![1.0],
            b1: vec![0.0],
            w2: vec![1.0],
            b2: vec![0.0],
        };
        let y = net.forward(&[0.5]);
        assert!((y[0] - 0.46212).abs() < 1e-5, "tanh(0.5) path gave {}", y[0]);
    }

    #[test]
    fn zero_weight_network_returns_output_bias() {
        let net = NetworkParams {
            input_dim: 2,
            hidden_dim: 4,
            output_dim: 3,
            w1: vec![0.0; 8],
            b1: vec![0.0; 4],
            w2: vec![0.0; 12],
            b2: vec![0.1, -0.2, 0.3],
        };
        assert_eq!(net.forward(&[5.0, -7.0]), vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn output_is_linear_in_output_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = random_net(&mut rng);
        net.b2.fill(0.0);
        let x: Vec<f64> = (0..net.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y1 = net.forward(&x);
        let mut doubled = net.clone();
        for w in &mut doubled.w2 {
            *w *= 2.0;
        }
        let y2 = doubled.forward(&x);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_output_rows_scales_outputs_per_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut net = random_net(&mut rng);
        let x: Vec<f64> = (0..net.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let before = net.forward(&x);
        let s: Vec<f64> = (0..net.output_dim).map(|_| rng.random_range(0.1..3.0)).collect();
        net.scale_output_rows(&s);
        let after = net.forward(&x);
        for i in 0..net.output_dim {
            assert!((after[i] - s[i] * before[i]).abs() < 1e-12 * before[i].abs().max(1.0));
        }
    }

    /// Central-difference oracle for the full parameter and input gradient.
    ///
    /// FD step 1e-5, relative tolerance 1e-4 with a small-denominator guard.
    fn check_gradients_once(rng: &mut ChaCha8Rng) {
        const FD_STEP: f64 = 1e-5;
        const REL_TOL: f64 = 1e-4;
        let net = random_net(rng);
        let x: Vec<f64> = (0..net.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> =
            (0..net.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |n: &NetworkParams| -> f64 {
            n.forward(&x).iter().zip(&upstream).map(|(o, u)| o * u).sum()
        };
        let (grads, input_grad) = net.backward(&x, &upstream);

        let fields: [(fn(&NetworkParams) -> &Vec<f64>, fn(&mut NetworkParams) -> &mut Vec<f64>, &Vec<f64>, &str); 4] = [
            (|n| &n.w1, |n| &mut n.w1, &grads.w1, "w1"),
            (|n| &n.b1, |n| &mut n.b1, &grads.b1, "b1"),
            (|n| &n.w2, |n| &mut n.w2, &grads.w2, "w2"),
            (|n| &n.b2, |n| &mut n.b2, &grads.b2, "b2"),
        ];
        for (get, get_mut, analytic, name) in fields {
            for i in 0..get(&net).len() {
                let mut plus = net.clone();
                get_mut(&mut plus)[i] += FD_STEP;
                let mut minus = net.clone();
                get_mut(&mut minus)[i] -= FD_STEP;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * FD_STEP);
                let an = analytic[i];
                let denom = an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((fd - an) / denom).abs() < REL_TOL,
                    "{name}[{i}]: fd={fd:.9e} analytic={an:.9e}"
                );
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += FD_STEP;
            let mut xm = x.clone();
            xm[i] -= FD_STEP;
            let f = |xv: &[f64]| -> f64 {
                net.forward(xv).iter().zip(&upstream).map(|(o, u)| o * u).sum()
            };
            let fd = (f(&xp) - f(&xm)) / (2.0 * FD_STEP);
            let an = input_grad[i];
            let denom = an.abs().max(fd.abs()).max(1e-6);
            assert!(((fd - an) / denom).abs() < REL_TOL, "x[{i}]: fd={fd} analytic={an}");
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_100_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            check_gradients_once(&mut rng);
        }
    }

    #[test]
    fn adam_first_step_magnitude_is_learning_rate() {
        let mut net = NetworkParams {
            input_dim: 1,
            hidden_dim: 1,
            output_dim: 1,
            w1: vec![0.3],
            b1: vec![0.0],
            w2: vec![0.7],
            b2: vec![0.0],
        };
        let before = net.w1[0];
        let mut grads = NetGradients::zeros_like(&net);
        grads.w1[0] = 5.0;
        let mut state = AdamState::new(&net);
        let hy = AdamHyper::default();
        adam_step(&mut net, &grads, &mut state, &hy);
        let update = before - net.w1[0];
        // m̂ = g, v̂ = g² on step one, so the update is lr·g/(|g|+ε) ≈ lr·sign(g)
        assert!((update - hy.learning_rate).abs() < 1e-9, "update = {update}");
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_descends_on_a_quadratic() {
        let mut net = NetworkParams {
            input_dim: 1,
            hidden_dim: 1,
            output_dim: 1,
            w1: vec![0.0],
            b1: vec![0.0],
            w2: vec![0.0],
            b2: vec![2.0],
        };
        let mut state = AdamState::new(&net);
        let hy = AdamHyper { learning_rate: 0.05, ..AdamHyper::default() };
        // minimize (b2)² by gradient 2·b2
        for _ in 0..500 {
            let mut g = NetGradients::zeros_like(&net);
            g.b2[0] = 2.0 * net.b2[0];
            adam_step(&mut net, &g, &mut state, &hy);
        }
        assert!(net.b2[0].abs() < 1e-2, "b2 = {}", net.b2[0]);
    }

    #[test]
    fn init_respects_glorot_bounds_and_zero_biases() {
        let net = NetworkParams::init(3, 50, 4, 99);
        let lim1 = (6.0 / 53.0f64).sqrt();
        let lim2 = (6.0 / 54.0f64).sqrt();
        assert!(net.w1.iter().all(|w| w.abs() < lim1));
        assert!(net.w2.iter().all(|w| w.abs() < lim2));
        assert!(net.b1.iter().chain(&net.b2).all(|&b| b == 0.0));
    }

    #[test]
    fn init_is_seed_deterministic_and_weight_mean_vanishes() {
        let a = NetworkParams::init(4, 64, 4, 7);
        let b = NetworkParams::init(4, 64, 4, 7);
        assert_eq!(a, b);
        let c = NetworkParams::init(4, 64, 4, 8);
        assert_ne!(a.w1, c.w1);

        let big = NetworkParams::init(10, 1000, 10, 123);
        let n = big.w1.len() as f64;
        let mean = big.w1.iter().sum::<f64>() / n;
        assert!(mean.abs() < 1e-2, "weight mean {mean}");
    }

    #[test]
    fn checkpoint_round_trips_bitwise_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = random_net(&mut rng);
        let meta = vec![
            ("seed".to_string(), "42".to_string()),
            ("role".to_string(), "encoder".to_string()),
        ];
        save_network(&path, &net, &meta).unwrap();
        let (loaded, loaded_meta) = load_network(&path).unwrap();
        assert_eq!(net, loaded);
        assert_eq!(meta, loaded_meta);
        let x: Vec<f64> = (0..net.input_dim).map(|i| 0.1 * i as f64 - 0.2).collect();
        assert_eq!(net.forward(&x), loaded.forward(&x));
    }

    #[test]
    fn loading_missing_checkpoint_reports_missing_artifact() {
        let err = load_network(Path::new("/nonexistent/net.txt")).unwrap_err();
        assert!(matches!(err, CoreError::MissingArtifact(_)));
    }

    #[test]
    fn loading_truncated_checkpoint_reports_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "ledkkl-net v1\ndims 1 2 1\nw1\n1.0 \n").unwrap();
        let err = load_network(&path).unwrap_err();
        assert!(matches!(err, CoreError::MalformedArtifact { .. }));
    }

    #[test]
    #[should_panic(expected = "input length mismatch")]
    fn forward_panics_on_dimension_mismatch() {
        let net = NetworkParams::init(2, 3, 1, 0);
        let _ = net.forward(&[1.0]);
    }
}
