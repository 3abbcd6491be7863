//! `key = value` run configuration with `[section]` headers.
//!
//! Keys are addressed as `section.key` both in files and in `--set`
//! overrides. Unknown keys, duplicate keys and unparsable values are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use graphmamba::hsi::SyntheticSpec;
use graphmamba::{ModelConfig, TrainConfig};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub cube: Option<PathBuf>,
    pub normalize: bool,
    pub stride: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
}

/// Model settings that do not come from the cube. `bands` and `classes`
/// are only needed when no cube is given (e.g. `estimate`).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub patch_size: usize,
    pub bands: Option<usize>,
    pub classes: Option<usize>,
    pub features: usize,
    pub d_model: usize,
    pub spectral_tokens: Option<usize>,
    pub prioritized: Option<usize>,
}

impl ModelSection {
    pub fn resolve(&self, bands: usize, classes: usize) -> Result<ModelConfig, ConfigError> {
        if let Some(b) = self.bands.filter(|&b| b != bands) {
            return err(format!("model.bands = {b} but the cube has {bands} bands"));
        }
        if let Some(c) = self.classes.filter(|&c| c != classes) {
            return err(format!("model.classes = {c} but the cube declares {classes} classes"));
        }
        let s = self.patch_size;
        let nspc = self.spectral_tokens.unwrap_or(s);
        let n = self
            .prioritized
            .unwrap_or_else(|| ModelConfig::default_prioritized(s, nspc));
        let cfg = ModelConfig::new(s, bands, classes)
            .with_dims(self.features, self.d_model)
            .with_tokens(nspc, n);
        cfg.validate().map_err(|e| ConfigError(format!("invalid [model] section: {e}")))?;
        Ok(cfg)
    }

    /// Model from the section alone; needs `bands` and `classes`.
    pub fn standalone(&self) -> Result<ModelConfig, ConfigError> {
        match (self.bands, self.classes) {
            (Some(b), Some(c)) => self.resolve(b, c),
            _ => err("model.bands and model.classes are required when data.cube is not set"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub synth: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig {
                cube: None,
                normalize: true,
                stride: 1,
                train_fraction: 0.1,
                split_seed: 0,
            },
            model: ModelSection {
                patch_size: 7,
                bands: None,
                classes: None,
                features: 64,
                d_model: 128,
                spectral_tokens: None,
                prioritized: None,
            },
            train: TrainConfig::default(),
            synth: SyntheticSpec {
                height: 24,
                width: 24,
                bands: 8,
                classes: 4,
                noise: 0.05,
                seed: 0,
            },
        }
    }
}

/// Raw `section.key → value` pairs, remembering where each came from.
#[derive(Debug, Default)]
struct Entries(BTreeMap<String, (String, String)>);

impl Entries {
    fn insert(&mut self, key: String, value: String, origin: String, allow_replace: bool) -> Result<(), ConfigError> {
        if !allow_replace {
            if let Some((_, first)) = self.0.get(&key) {
                return err(format!("{origin}: duplicate key `{key}` (first set at {first})"));
            }
        }
        self.0.insert(key, (value, origin));
        Ok(())
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.0.remove(key) {
            None => Ok(None),
            Some((raw, origin)) => raw
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("{origin}: bad value `{raw}` for `{key}`: {e}"))),
        }
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn set_opt<T: FromStr>(&mut self, key: &str, slot: &mut Option<T>) -> Result<(), ConfigError>
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = Some(v);
        }
        Ok(())
    }
}

fn parse_text(text: &str, source: &str, entries: &mut Entries) -> Result<(), ConfigError> {
    let mut section = String::new();
    for (n, line) in text.lines().enumerate() {
        let origin = format!("{source}:{}", n + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return err(format!("{origin}: unterminated section header"));
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("{origin}: expected `key = value`"));
        };
        let key = key.trim();
        if section.is_empty() {
            return err(format!("{origin}: key `{key}` appears before any [section]"));
        }
        entries.insert(format!("{section}.{key}"), value.trim().to_string(), origin, false)?;
    }
    Ok(())
}

impl RunConfig {
    /// Defaults, then the optional file, then `--set` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut entries = Entries::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            parse_text(&text, &path.display().to_string(), &mut entries)?;
        }
        for o in overrides {
            let Some((key, value)) = o.split_once('=') else {
                return err(format!("--set expects section.key=value, got `{o}`"));
            };
            let key = key.trim();
            if !key.contains('.') {
                return err(format!("--set key `{key}` must be written as section.key"));
            }
            entries.insert(key.to_string(), value.trim().to_string(), format!("--set {o}"), true)?;
        }
        Self::from_entries(entries)
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Entries::default();
        parse_text(text, "<config>", &mut entries)?;
        Self::from_entries(entries)
    }

    fn from_entries(mut e: Entries) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        let mut cube: Option<String> = None;
        e.set_opt("data.cube", &mut cube)?;
        c.data.cube = cube.filter(|s| !s.is_empty()).map(PathBuf::from);
        e.set("data.normalize", &mut c.data.normalize)?;
        e.set("data.stride", &mut c.data.stride)?;
        e.set("data.train_fraction", &mut c.data.train_fraction)?;
        e.set("data.split_seed", &mut c.data.split_seed)?;

        e.set("model.patch_size", &mut c.model.patch_size)?;
        e.set_opt("model.bands", &mut c.model.bands)?;
        e.set_opt("model.classes", &mut c.model.classes)?;
        e.set("model.features", &mut c.model.features)?;
        e.set("model.d_model", &mut c.model.d_model)?;
        e.set_opt("model.spectral_tokens", &mut c.model.spectral_tokens)?;
        e.set_opt("model.prioritized", &mut c.model.prioritized)?;

        e.set("train.epochs", &mut c.train.epochs)?;
        e.set("train.batch_size", &mut c.train.batch_size)?;
        e.set("train.learning_rate", &mut c.train.learning_rate)?;
        e.set("train.lambda", &mut c.train.lambda)?;
        e.set("train.seed", &mut c.train.seed)?;
        e.set("train.eval_each_epoch", &mut c.train.eval_each_epoch)?;

        e.set("synth.height", &mut c.synth.height)?;
        e.set("synth.width", &mut c.synth.width)?;
        e.set("synth.bands", &mut c.synth.bands)?;
        e.set("synth.classes", &mut c.synth.classes)?;
        e.set("synth.noise", &mut c.synth.noise)?;
        e.set("synth.seed", &mut c.synth.seed)?;

        if let Some((key, (_, origin))) = e.0.into_iter().next() {
            return err(format!("{origin}: unknown key `{key}`"));
        }
        c.validate()?;
        Ok(c)
    }

    /// Range checks that need no input files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction <= 1.0) {
            return err(format!("data.train_fraction must be in (0, 1], got {}", d.train_fraction));
        }
        if d.stride == 0 || d.stride > self.model.patch_size {
            return err(format!(
                "data.stride must be in 1..={}, got {}",
                self.model.patch_size, d.stride
            ));
        }
        let m = &self.model;
        if m.patch_size == 0 || m.patch_size.is_multiple_of(2) {
            return err(format!("model.patch_size must be odd, got {}", m.patch_size));
        }
        if m.features == 0 || m.d_model == 0 {
            return err("model.features and model.d_model must be >= 1");
        }
        self.train
            .validate()
            .map_err(|e| ConfigError(format!("invalid [train] section: {e}")))?;
        let s = &self.synth;
        if !(s.noise >= 0.0 && s.noise.is_finite()) {
            return err(format!("synth.noise must be a finite value >= 0, got {}", s.noise));
        }
        if s.height == 0 || s.width == 0 || s.bands == 0 {
            return err("synth.height, synth.width and synth.bands must be >= 1");
        }
        if s.classes < 2 || s.bands < s.classes as usize {
            return err(format!(
                "synth needs 2 <= classes <= bands, got classes = {}, bands = {}",
                s.classes, s.bands
            ));
        }
        Ok(())
    }

    /// `--seed` replaces every seed in the run.
    pub fn reseed(&mut self, seed: u64) {
        self.data.split_seed = seed;
        self.train.seed = seed;
        self.synth.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_overrides() {
        let text = "[model]\npatch_size = 5 # small\n[train]\nepochs = 3\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.model.patch_size, 5);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, 56);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(RunConfig::parse("[train]\nepoch = 3\n").unwrap_err().0.contains("unknown key `train.epoch`"));
        assert!(RunConfig::parse("[train]\nepochs = 3\nepochs = 4\n").unwrap_err().0.contains("duplicate"));
        assert!(RunConfig::parse("epochs = 3\n").is_err());
        assert!(RunConfig::parse("[train]\nepochs = three\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let c = RunConfig::load(None, &["train.epochs=7".into(), "synth.noise = 0".into()]).unwrap();
        assert_eq!((c.train.epochs, c.synth.noise), (7, 0.0));
        assert!(RunConfig::load(None, &["epochs=7".into()]).is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::parse("[synth]\nnoise = -0.1\n").is_err());
        assert!(RunConfig::parse("[model]\npatch_size = 4\n").is_err());
        assert!(RunConfig::parse("[data]\ntrain_fraction = 0\n").is_err());
    }

    #[test]
    fn model_resolution() {
        let c = RunConfig::parse("[model]\npatch_size = 5\nbands = 8\nclasses = 4\n").unwrap();
        let m = c.model.standalone().unwrap();
        assert_eq!((m.spectral_tokens, m.prioritized), (5, 15));
        assert!(c.model.resolve(9, 4).is_err());
        assert!(RunConfig::default().model.standalone().is_err());
    }
}
