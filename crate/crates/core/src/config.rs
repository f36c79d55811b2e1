//! Run configuration and its `key = value` text form.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::DEFAULT_K;
use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::forest::DEFAULT_TREES;
use crate::pseudolabel::check_p;
use crate::sagenet::DEFAULT_HIDDEN;
use crate::unigraph::DEFAULT_MAX_MULTIMAP;

/// Default percentile for inputs with sequencing errors.
pub const DEFAULT_P: f64 = 35.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Train on pseudo-labels, then fine-tune.
    SelfSupervised,
    /// Train on a size-matched sample of true labels; no fine-tuning.
    SemiSupervised,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SelfSupervised => "self_supervised",
            Mode::SemiSupervised => "semi_supervised",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self_supervised" | "self" => Ok(Mode::SelfSupervised),
            "semi_supervised" | "semi" => Ok(Mode::SemiSupervised),
            _ => Err(Error::invalid(format!("unknown mode `{s}`"))),
        }
    }
}

/// Settings of the seeded learning stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub p: f64,
    pub epochs: usize,
    pub lr: f64,
    pub hidden: [usize; 2],
    pub n_trees: usize,
    /// Train the forest on the graph features only.
    pub exclude_gnn: bool,
    /// Resampling attempts when a semi-supervised sample has a single class.
    pub semi_retries: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            p: DEFAULT_P,
            epochs: 2000,
            lr: 0.01,
            hidden: DEFAULT_HIDDEN,
            n_trees: DEFAULT_TREES,
            exclude_gnn: false,
            semi_retries: 10,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden sizes must be positive"));
        }
        if self.n_trees == 0 {
            return Err(Error::invalid("the forest needs at least one tree"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub learn: LearnConfig,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub max_multimap: usize,
    /// Betweenness source samples; 0 computes it exactly.
    pub approx_betweenness: usize,
    pub baselines: BaselineConfig,
    pub reads1: Option<PathBuf>,
    pub reads2: Option<PathBuf>,
    /// Pre-built unitigs (FASTA); skips assembly.
    pub unitigs: Option<PathBuf>,
    pub sam: Option<PathBuf>,
    pub refs: Option<PathBuf>,
    pub alignment_counts: Option<PathBuf>,
    pub out: PathBuf,
    /// Reuse deterministic artifacts already present in `out`.
    pub resume: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: DEFAULT_K,
            learn: LearnConfig::default(),
            seeds: vec![0],
            mode: Mode::SelfSupervised,
            max_multimap: DEFAULT_MAX_MULTIMAP,
            approx_betweenness: 0,
            baselines: BaselineConfig::default(),
            reads1: None,
            reads2: None,
            unitigs: None,
            sam: None,
            refs: None,
            alignment_counts: None,
            out: PathBuf::from("run"),
            resume: false,
        }
    }
}

/// Every accepted key, in the order used by [`RunConfig::to_kv_text`].
pub const KEYS: [&str; 26] = [
    "k",
    "p",
    "epochs",
    "lr",
    "hidden",
    "trees",
    "exclude_gnn",
    "semi_retries",
    "seeds",
    "mode",
    "max_multimap",
    "approx_betweenness",
    "opera_factor",
    "sopra_factor",
    "mip_factor",
    "mip_degree",
    "bambus_c",
    "metacarvel_flag_threshold",
    "skew_ratio",
    "reads1",
    "reads2",
    "unitigs",
    "sam",
    "refs",
    "alignment_counts",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

/// Comma-separated list, e.g. `1,2,3`.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "k" => self.k = parse(key, v)?,
            "p" => self.learn.p = parse(key, v)?,
            "epochs" => self.learn.epochs = parse(key, v)?,
            "lr" => self.learn.lr = parse(key, v)?,
            "hidden" => {
                let h: Vec<usize> = parse_list(key, v)?;
                self.learn.hidden = <[usize; 2]>::try_from(h)
                    .map_err(|_| Error::invalid("`hidden` takes exactly two sizes"))?;
            }
            "trees" => self.learn.n_trees = parse(key, v)?,
            "exclude_gnn" => self.learn.exclude_gnn = parse_bool(key, v)?,
            "semi_retries" => self.learn.semi_retries = parse(key, v)?,
            "seeds" => self.seeds = parse_list(key, v)?,
            "mode" => self.mode = v.parse()?,
            "max_multimap" => self.max_multimap = parse(key, v)?,
            "approx_betweenness" => self.approx_betweenness = parse(key, v)?,
            "opera_factor" => self.baselines.opera_factor = parse(key, v)?,
            "sopra_factor" => self.baselines.sopra_factor = parse(key, v)?,
            "mip_factor" => self.baselines.mip_factor = parse(key, v)?,
            "mip_degree" => self.baselines.mip_degree = parse(key, v)?,
            "bambus_c" => self.baselines.bambus_c = parse(key, v)?,
            "metacarvel_flag_threshold" => self.baselines.metacarvel_flag_threshold = parse(key, v)?,
            "skew_ratio" => self.baselines.skew_ratio = parse(key, v)?,
            "reads1" => self.reads1 = opt_path(v),
            "reads2" => self.reads2 = opt_path(v),
            "unitigs" => self.unitigs = opt_path(v),
            "sam" => self.sam = opt_path(v),
            "refs" => self.refs = opt_path(v),
            "alignment_counts" => self.alignment_counts = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            _ => return Err(Error::invalid(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected `key = value`"))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(i + 1, format!("duplicate key `{key}`")));
            }
            self.set(key, value).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let b = &self.baselines;
        Some(match key {
            "k" => self.k.to_string(),
            "p" => self.learn.p.to_string(),
            "epochs" => self.learn.epochs.to_string(),
            "lr" => self.learn.lr.to_string(),
            "hidden" => join(&self.learn.hidden),
            "trees" => self.learn.n_trees.to_string(),
            "exclude_gnn" => self.learn.exclude_gnn.to_string(),
            "semi_retries" => self.learn.semi_retries.to_string(),
            "seeds" => join(&self.seeds),
            "mode" => self.mode.as_str().to_string(),
            "max_multimap" => self.max_multimap.to_string(),
            "approx_betweenness" => self.approx_betweenness.to_string(),
            "opera_factor" => b.opera_factor.to_string(),
            "sopra_factor" => b.sopra_factor.to_string(),
            "mip_factor" => b.mip_factor.to_string(),
            "mip_degree" => b.mip_degree.to_string(),
            "bambus_c" => b.bambus_c.to_string(),
            "metacarvel_flag_threshold" => b.metacarvel_flag_threshold.to_string(),
            "skew_ratio" => b.skew_ratio.to_string(),
            "reads1" => show_path(&self.reads1),
            "reads2" => show_path(&self.reads2),
            "unitigs" => show_path(&self.unitigs),
            "sam" => show_path(&self.sam),
            "refs" => show_path(&self.refs),
            "alignment_counts" => show_path(&self.alignment_counts),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    /// Canonical text form: every key, in [`KEYS`] order.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("known key"));
        }
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=crate::dna::MAX_K).contains(&self.k) {
            return Err(Error::invalid(format!("k must lie in 2..=64, got {}", self.k)));
        }
        self.learn.validate()?;
        self.baselines.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.mode == Mode::SemiSupervised && self.refs.is_none() && self.alignment_counts.is_none() {
            return Err(Error::invalid(
                "semi-supervised mode needs references or alignment counts for the true labels",
            ));
        }
        Ok(())
    }
}
