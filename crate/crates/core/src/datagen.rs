//! Training datasets: sampled state transitions under the nominal input.
//!
//! Each record is a pair `(x, f(x, ū))` with `x` drawn uniformly from the
//! operating box and the successor computed noise-free. Measurements are not
//! stored; training recomputes them from the states so the same dataset
//! serves any channel configuration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{step, LedState};
use crate::error::{CoreError, Result};

/// Operating box the observer is trained on: both state components are
/// sampled uniformly from `[-HALF_WIDTH, HALF_WIDTH]`.
pub const DOMAIN_HALF_WIDTH: f64 = 0.5;

/// One sampled transition under the nominal input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionPair {
    pub state: LedState,
    pub next: LedState,
}

/// `n` states drawn uniformly from the operating box; the sampling behind
/// spot checks and sampled estimates.
#[must_use]
pub fn sample_states(n: usize, seed: u64) -> Vec<LedState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            LedState::new(
                rng.random_range(-DOMAIN_HALF_WIDTH..DOMAIN_HALF_WIDTH),
                rng.random_range(-DOMAIN_HALF_WIDTH..DOMAIN_HALF_WIDTH),
            )
        })
        .collect()
}

/// A reproducible set of transitions plus the knobs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<TransitionPair>,
    pub u_bar: f64,
    pub seed: u64,
}

impl Dataset {
    /// Samples `size` states uniformly from the operating box and pairs each
    /// with its noise-free successor under input `u_bar`.
    #[must_use]
    pub fn generate(size: usize, te: f64, u_bar: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(size);
        for _ in 0..size {
            let state = LedState::new(
                rng.random_range(-DOMAIN_HALF_WIDTH..DOMAIN_HALF_WIDTH),
                rng.random_range(-DOMAIN_HALF_WIDTH..DOMAIN_HALF_WIDTH),
            );
            pairs.push(TransitionPair { state, next: step(&state, te, u_bar, None) });
        }
        Dataset { pairs, u_bar, seed }
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Splits into training and validation slices; the validation block is
    /// the tail, which is an unbiased holdout because samples are i.i.d.
    #[must_use]
    pub fn split(&self, validation_fraction: f64) -> (&[TransitionPair], &[TransitionPair]) {
        assert!(
            (0.0..1.0).contains(&validation_fraction),
            "validation fraction must lie in [0, 1)"
        );
        let n_val = (self.len() as f64 * validation_fraction).round() as usize;
        let n_train = self.len() - n_val;
        (&self.pairs[..n_train], &self.pairs[n_train..])
    }

    /// Rechecks every stored successor against a fresh step. The generator,
    /// the on-disk format, and the step are all exact, so any drift is a
    /// corrupted or mismatched file.
    pub fn verify(&self, te: f64) -> Result<()> {
        for (i, pair) in self.pairs.iter().enumerate() {
            let fresh = step(&pair.state, te, self.u_bar, None);
            if fresh != pair.next {
                return Err(CoreError::MalformedArtifact {
                    path: "<in-memory dataset>".into(),
                    reason: format!(
                        "record {i}: stored successor {:?} but step gives {fresh:?}",
                        pair.next
                    ),
                });
            }
        }
        Ok(())
    }

    /// Writes `# key = value` metadata, a header row, then one
    /// full-precision CSV row per transition.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# u_bar = {:.16e}", self.u_bar)?;
        writeln!(w, "# seed = {}", self.seed)?;
        writeln!(w, "# size = {}", self.len())?;
        writeln!(w, "x1,x2,x1_next,x2_next")?;
        for p in &self.pairs {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p.state.angle, p.state.angular_velocity, p.next.angle, p.next.angular_velocity
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CoreError::MissingArtifact(path.display().to_string())
            } else {
                CoreError::Io(e)
            }
        })?;
        let malformed = |reason: String| CoreError::MalformedArtifact {
            path: path.display().to_string(),
            reason,
        };

        let mut u_bar = None;
        let mut seed = None;
        let mut size = None;
        let mut pairs = Vec::new();
        let mut saw_header = false;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let mut kv = meta.splitn(2, '=');
                let key = kv.next().unwrap_or("").trim();
                let value = kv.next().map(str::trim);
                match (key, value) {
                    ("u_bar", Some(v)) => {
                        u_bar = Some(v.parse::<f64>().map_err(|e| {
                            malformed(format!("line {}: bad u_bar: {e}", lineno + 1))
                        })?);
                    }
                    ("seed", Some(v)) => {
                        seed = Some(v.parse::<u64>().map_err(|e| {
                            malformed(format!("line {}: bad seed: {e}", lineno + 1))
                        })?);
                    }
                    ("size", Some(v)) => {
                        size = Some(v.parse::<usize>().map_err(|e| {
                            malformed(format!("line {}: bad size: {e}", lineno + 1))
                        })?);
                    }
                    _ => {} // unknown comments are tolerated
                }
                continue;
            }
            if !saw_header {
                if line != "x1,x2,x1_next,x2_next" {
                    return Err(malformed(format!(
                        "line {}: expected header 'x1,x2,x1_next,x2_next', got '{line}'",
                        lineno + 1
                    )));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(malformed(format!(
                    "line {}: expected 4 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let mut v = [0.0f64; 4];
            for (slot, field) in v.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|e| {
                    malformed(format!("line {}: bad float '{field}': {e}", lineno + 1))
                })?;
            }
            pairs.push(TransitionPair {
                state: LedState::new(v[0], v[1]),
                next: LedState::new(v[2], v[3]),
            });
        }

        if !saw_header {
            return Err(malformed("no header row found".into()));
        }
        let u_bar = u_bar.ok_or_else(|| malformed("missing '# u_bar' metadata".into()))?;
        let seed = seed.ok_or_else(|| malformed("missing '# seed' metadata".into()))?;
        if let Some(declared) = size {
            if declared != pairs.len() {
                return Err(malformed(format!(
                    "metadata declares {declared} records but file holds {}",
                    pairs.len()
                )));
            }
        }
        Ok(Dataset { pairs, u_bar, seed })
    }
}
