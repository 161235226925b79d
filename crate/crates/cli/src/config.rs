//! Flat `section.key = value` run configuration.
//!
//! One file describes a whole experiment: channel physics, noise levels,
//! latent filter, training knobs, evaluation scenarios, artifact paths, and
//! the global seed. Parsing is strict — an unknown key is an error, not a
//! warning — so a typo cannot silently fall back to a default. Every key can
//! also be overridden on the command line with `--set KEY=VALUE`.

use std::fmt;
use std::path::{Path, PathBuf};

use ledkkl::channel::{ChannelParams, NoiseConfig};
use ledkkl::eval::InputKind;
use ledkkl::kkl::{default_latent_config, LatentConfig};
use ledkkl::training::TrainConfig;

/// A configuration problem: bad file syntax, unknown key, or malformed value.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Where a key/value assignment came from. Degree-suffixed angles are a
/// command-line convenience only; files always hold radians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    File,
    Flag,
}

/// Fully-resolved run configuration with defaults for every field.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub noise: NoiseConfig,
    /// Diagonal of the latent state matrix; `None` derives it from the
    /// sample time.
    pub a_diag: Option<Vec<f64>>,
    /// Fill value for the latent input matrix (q×2, constant entries).
    pub b_fill: f64,
    pub data_size: usize,
    pub u_bar: f64,
    pub train: TrainConfig,
    pub eval_steps: usize,
    pub scenarios: Vec<InputKind>,
    /// Sample count for the correction-term Lipschitz estimate.
    pub lipschitz_samples: usize,
    /// Input level probed by the Lipschitz estimate.
    pub lipschitz_input: f64,
    pub sweep_controllers: Vec<InputKind>,
    pub sweep_distances: Vec<f64>,
    pub sweep_steps: usize,
    pub oracle_samples: usize,
    pub oracle_tolerance: f64,
    /// Terms always summed before the tolerance may stop the series; covers
    /// any transient growth while the backward orbit crosses a gain bump.
    pub oracle_min_terms: usize,
    pub dataset_path: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams::default(),
            noise: NoiseConfig::default(),
            a_diag: None,
            b_fill: 1.0,
            data_size: 200_000,
            u_bar: 0.0,
            train: TrainConfig::default(),
            eval_steps: 1000,
            scenarios: vec![
                InputKind::OpenLoop,
                InputKind::ForcedCos,
                InputKind::ForcedMix,
                InputKind::ClosedLoop,
            ],
            lipschitz_samples: 200,
            lipschitz_input: 0.1,
            sweep_controllers: vec![
                InputKind::ForcedCos,
                InputKind::ForcedMix,
                InputKind::ClosedLoop,
            ],
            sweep_distances: vec![0.085, 0.1, 0.2],
            sweep_steps: 1000,
            oracle_samples: 100,
            oracle_tolerance: 1e-12,
            oracle_min_terms: 2000,
            dataset_path: PathBuf::from("out/dataset.csv"),
            checkpoint_dir: PathBuf::from("out/checkpoints"),
            out_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

/// Key table: name, default, one-line description. The single source for
/// parsing, `--help` listings, and the strict-unknown-key check.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("channel.a1", "1.0", "first angular-gain bump amplitude"),
    ("channel.b1", "0.2", "first bump center (rad)"),
    ("channel.c1", "0.5", "first bump width (rad)"),
    ("channel.a2", "0.5", "second angular-gain bump amplitude"),
    ("channel.b2", "0.1", "second bump center (rad)"),
    ("channel.c2", "0.4", "second bump width (rad)"),
    ("channel.cp", "1.0", "raw transmitted power coefficient (W·m²)"),
    ("channel.intensity", "1.0", "relative transmitter intensity"),
    ("channel.attenuation", "0.5", "water attenuation coefficient (1/m)"),
    ("channel.distance", "0.085", "transmitter-receiver distance (m)"),
    ("channel.receiver_offset", "0.10471975511965978", "second receiver's angular offset (rad; `deg` suffix allowed on the command line only)"),
    ("channel.sample_time", "0.01", "sampling period (s)"),
    ("noise.process_std_1", "1e-3", "per-step process noise std on the angle"),
    ("noise.process_std_2", "1e-4", "per-step process noise std on the angular velocity"),
    ("noise.measurement_std", "0.03162277660168379", "measurement noise std per receiver (W)"),
    ("latent.a_diag", "derived from channel.sample_time", "comma-separated diagonal of the latent state matrix"),
    ("latent.b_fill", "1.0", "constant fill for the q×2 latent input matrix"),
    ("data.size", "200000", "number of transition pairs to generate"),
    ("data.u_bar", "0.0", "constant input the dataset (and encoder) is built around"),
    ("train.epochs_dyn", "30", "epochs for the dynamics (encoder) phase"),
    ("train.epochs_recon", "60", "epochs for the reconstruction (decoder) phase"),
    ("train.batch_size", "256", "minibatch size"),
    ("train.hidden_dim", "500", "hidden-layer width of both networks"),
    ("train.validation_fraction", "0.1", "tail fraction of the dataset held out"),
    ("train.normalization_interval", "0", "steps between latent rescalings (0 = closing rescale only)"),
    ("train.learning_rate", "1e-3", "Adam base learning rate (cosine-annealed per phase)"),
    ("train.beta1", "0.9", "Adam first-moment decay"),
    ("train.beta2", "0.999", "Adam second-moment decay"),
    ("train.epsilon", "1e-8", "Adam denominator floor"),
    ("eval.steps", "1000", "steps per evaluation scenario"),
    ("eval.scenarios", "open_loop,forced_cos,forced_mix,closed_loop", "comma-separated scenario list"),
    ("eval.lipschitz_samples", "200", "states sampled for the correction-term Lipschitz estimate"),
    ("eval.lipschitz_input", "0.1", "input level probed by the Lipschitz estimate"),
    ("sweep.controllers", "forced_cos,forced_mix,closed_loop", "comma-separated scenario list for the distance sweep"),
    ("sweep.distances", "0.085,0.1,0.2", "comma-separated link distances (m)"),
    ("sweep.steps", "1000", "steps per sweep scenario"),
    ("oracle.samples", "100", "states sampled by the oracle consistency check"),
    ("oracle.tolerance", "1e-12", "summand-norm cutoff extending the series"),
    ("oracle.min_terms", "2000", "terms always summed before the cutoff applies"),
    ("paths.dataset", "out/dataset.csv", "transition-pair CSV location"),
    ("paths.checkpoints", "out/checkpoints", "trained-map checkpoint directory"),
    ("paths.out", "out", "directory for logs, traces, and reports"),
    ("run.seed", "1", "global seed; every stream derives from it"),
];

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse::<f64>()
        .map_err(|e| ConfigError(format!("key `{key}`: bad float `{value}` ({e})")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .map_err(|e| ConfigError(format!("key `{key}`: bad integer `{value}` ({e})")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value
        .parse::<u64>()
        .map_err(|e| ConfigError(format!("key `{key}`: bad integer `{value}` ({e})")))
}

/// Angle values: plain numbers are radians; a `deg` suffix converts, but
/// only from the command line — config files must stay in radians so a file
/// re-read is never unit-ambiguous.
fn parse_angle(key: &str, value: &str, source: Source) -> Result<f64, ConfigError> {
    if let Some(num) = value.strip_suffix("deg") {
        if source == Source::File {
            return Err(ConfigError(format!(
                "key `{key}`: degree suffix is only accepted on the command line; files use radians"
            )));
        }
        return Ok(parse_f64(key, num.trim())?.to_radians());
    }
    parse_f64(key, value)
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let items: Result<Vec<f64>, _> =
        value.split(',').map(|t| parse_f64(key, t.trim())).collect();
    let items = items?;
    if items.is_empty() {
        return Err(ConfigError(format!("key `{key}`: empty list")));
    }
    Ok(items)
}

fn parse_kind(key: &str, token: &str) -> Result<InputKind, ConfigError> {
    match token {
        "open_loop" => Ok(InputKind::OpenLoop),
        "forced_cos" => Ok(InputKind::ForcedCos),
        "forced_mix" => Ok(InputKind::ForcedMix),
        "closed_loop" => Ok(InputKind::ClosedLoop),
        other => Err(ConfigError(format!(
            "key `{key}`: unknown scenario `{other}` (expected open_loop, forced_cos, forced_mix, or closed_loop)"
        ))),
    }
}

fn parse_kind_list(key: &str, value: &str) -> Result<Vec<InputKind>, ConfigError> {
    let kinds: Result<Vec<InputKind>, _> =
        value.split(',').map(|t| parse_kind(key, t.trim())).collect();
    let kinds = kinds?;
    if kinds.is_empty() {
        return Err(ConfigError(format!("key `{key}`: empty list")));
    }
    Ok(kinds)
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str, source: Source) -> Result<(), ConfigError> {
        match key {
            "channel.a1" => self.channel.gain.a1 = parse_f64(key, value)?,
            "channel.b1" => self.channel.gain.b1 = parse_angle(key, value, source)?,
            "channel.c1" => self.channel.gain.c1 = parse_f64(key, value)?,
            "channel.a2" => self.channel.gain.a2 = parse_f64(key, value)?,
            "channel.b2" => self.channel.gain.b2 = parse_angle(key, value, source)?,
            "channel.c2" => self.channel.gain.c2 = parse_f64(key, value)?,
            "channel.cp" => self.channel.raw_cp = parse_f64(key, value)?,
            "channel.intensity" => self.channel.transmitter_intensity = parse_f64(key, value)?,
            "channel.attenuation" => self.channel.attenuation_c = parse_f64(key, value)?,
            "channel.distance" => self.channel.link_distance_d0 = parse_f64(key, value)?,
            "channel.receiver_offset" => self.channel.delta_phi = parse_angle(key, value, source)?,
            "channel.sample_time" => self.channel.sample_time = parse_f64(key, value)?,
            "noise.process_std_1" => self.noise.process_std[0] = parse_f64(key, value)?,
            "noise.process_std_2" => self.noise.process_std[1] = parse_f64(key, value)?,
            "noise.measurement_std" => self.noise.measurement_std = parse_f64(key, value)?,
            "latent.a_diag" => self.a_diag = Some(parse_f64_list(key, value)?),
            "latent.b_fill" => self.b_fill = parse_f64(key, value)?,
            "data.size" => self.data_size = parse_usize(key, value)?,
            "data.u_bar" => self.u_bar = parse_f64(key, value)?,
            "train.epochs_dyn" => self.train.epochs_dyn = parse_usize(key, value)?,
            "train.epochs_recon" => self.train.epochs_recon = parse_usize(key, value)?,
            "train.batch_size" => self.train.batch_size = parse_usize(key, value)?,
            "train.hidden_dim" => self.train.hidden_dim = parse_usize(key, value)?,
            "train.validation_fraction" => {
                self.train.validation_fraction = parse_f64(key, value)?;
            }
            "train.normalization_interval" => {
                self.train.normalization_interval = parse_usize(key, value)?;
            }
            "train.learning_rate" => self.train.adam.learning_rate = parse_f64(key, value)?,
            "train.beta1" => self.train.adam.beta1 = parse_f64(key, value)?,
            "train.beta2" => self.train.adam.beta2 = parse_f64(key, value)?,
            "train.epsilon" => self.train.adam.epsilon = parse_f64(key, value)?,
            "eval.steps" => self.eval_steps = parse_usize(key, value)?,
            "eval.scenarios" => self.scenarios = parse_kind_list(key, value)?,
            "eval.lipschitz_samples" => self.lipschitz_samples = parse_usize(key, value)?,
            "eval.lipschitz_input" => self.lipschitz_input = parse_f64(key, value)?,
            "sweep.controllers" => self.sweep_controllers = parse_kind_list(key, value)?,
            "sweep.distances" => self.sweep_distances = parse_f64_list(key, value)?,
            "sweep.steps" => self.sweep_steps = parse_usize(key, value)?,
            "oracle.samples" => self.oracle_samples = parse_usize(key, value)?,
            "oracle.tolerance" => self.oracle_tolerance = parse_f64(key, value)?,
            "oracle.min_terms" => self.oracle_min_terms = parse_usize(key, value)?,
            "paths.dataset" => self.dataset_path = PathBuf::from(value),
            "paths.checkpoints" => self.checkpoint_dir = PathBuf::from(value),
            "paths.out" => self.out_dir = PathBuf::from(value),
            "run.seed" => self.seed = parse_u64(key, value)?,
            other => {
                return Err(ConfigError(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    /// Parses a whole config file's text. `#` starts a comment; blank lines
    /// are skipped; everything else must be `section.key = value`.
    pub fn apply_file_text(&mut self, text: &str, origin: &Path) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    origin.display(),
                    lineno + 1
                ))
            })?;
            self.apply(key.trim(), value.trim(), Source::File).map_err(|e| {
                ConfigError(format!("{}:{}: {}", origin.display(), lineno + 1, e.0))
            })?;
        }
        Ok(())
    }

    /// Applies one `--set KEY=VALUE` argument.
    pub fn apply_flag(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            ConfigError(format!("--set expects KEY=VALUE, got `{assignment}`"))
        })?;
        self.apply(key.trim(), value.trim(), Source::Flag)
    }

    /// The latent filter described by this config.
    pub fn latent_config(&self) -> Result<LatentConfig, ledkkl::CoreError> {
        match &self.a_diag {
            None => default_latent_config(self.channel.sample_time),
            Some(diag) => {
                let q = diag.len();
                let a = nalgebra::DMatrix::from_fn(q, q, |i, j| if i == j { diag[i] } else { 0.0 });
                let b = nalgebra::DMatrix::from_element(q, 2, self.b_fill);
                LatentConfig::new(a, b)
            }
        }
    }
}

/// `--help` trailer for one command: the config keys it reads.
pub fn keys_help(prefixes: &[&str]) -> String {
    let mut s = String::from("Config keys read by this command (defaults in brackets):\n");
    for (key, default, desc) in KEYS {
        if prefixes.iter().any(|p| key.starts_with(p)) {
            s.push_str(&format!("  {key:<28} {desc} [{default}]\n"));
        }
    }
    s.push_str("Override any of them with --set KEY=VALUE.");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_key_table() {
        // Every key in the table must be accepted by `apply`.
        let mut cfg = RunConfig::default();
        for (key, default, _) in KEYS {
            if *default == "derived from channel.sample_time" {
                continue;
            }
            cfg.apply(key, default, Source::File)
                .unwrap_or_else(|e| panic!("{key}: {e}"));
        }
        // Defaults written back produce the default config.
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let mut cfg = RunConfig::default();
        let err = cfg
            .apply_file_text("train.epochs_dyn = 3\nchannel.bogus = 1\n", Path::new("x.cfg"))
            .unwrap_err();
        assert!(err.0.contains("x.cfg:2"), "{err}");
        assert!(err.0.contains("channel.bogus"), "{err}");
        // The earlier valid line still applied.
        assert_eq!(cfg.train.epochs_dyn, 3);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let mut cfg = RunConfig::default();
        cfg.apply_file_text(
            "# full-line comment\n\nrun.seed = 9 # trailing comment\n",
            Path::new("x.cfg"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn degree_suffix_is_cli_only() {
        let mut cfg = RunConfig::default();
        let err = cfg
            .apply("channel.receiver_offset", "6deg", Source::File)
            .unwrap_err();
        assert!(err.0.contains("command line"), "{err}");
        cfg.apply("channel.receiver_offset", "6deg", Source::Flag).unwrap();
        assert!((cfg.channel.delta_phi - 6.0f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn scenario_lists_parse_and_reject_typos() {
        let mut cfg = RunConfig::default();
        cfg.apply("eval.scenarios", "open_loop, closed_loop", Source::File).unwrap();
        assert_eq!(cfg.scenarios, vec![InputKind::OpenLoop, InputKind::ClosedLoop]);
        let err = cfg.apply("eval.scenarios", "open_lop", Source::File).unwrap_err();
        assert!(err.0.contains("open_lop"), "{err}");
    }

    #[test]
    fn custom_latent_diagonal_builds_a_matching_filter() {
        let mut cfg = RunConfig::default();
        cfg.apply("latent.a_diag", "0.9, 0.8, 0.7", Source::File).unwrap();
        cfg.apply("latent.b_fill", "2.0", Source::File).unwrap();
        let latent = cfg.latent_config().unwrap();
        assert_eq!(latent.q(), 3);
        assert_eq!(latent.a[(1, 1)], 0.8);
        assert_eq!(latent.a[(0, 1)], 0.0);
        assert_eq!(latent.b[(2, 1)], 2.0);
    }

    #[test]
    fn set_flag_requires_an_equals_sign() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_flag("run.seed").is_err());
        cfg.apply_flag("run.seed=4").unwrap();
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn keys_help_filters_by_prefix() {
        let help = keys_help(&["sweep.", "run."]);
        assert!(help.contains("sweep.distances"));
        assert!(help.contains("run.seed"));
        assert!(!help.contains("train.epochs_dyn"));
    }
}
