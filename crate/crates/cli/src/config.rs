//! Run configuration files: flat `key = value` lines, `#` comments,
//! repeated keys for lists. The grammar is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use spatialcv::experiment::CvSetup;
use spatialcv::learners::LearnerKind;
use spatialcv::synth::FieldSpec;

/// Where the experiment's data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// CSV file plus schema sidecar.
    Dataset { data: PathBuf, schema: PathBuf },
    Synth(FieldSpec),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: DataSource,
    pub k_outer: usize,
    pub k_inner: usize,
    pub repetitions: usize,
    pub budgets: Vec<usize>,
    pub learners: Vec<LearnerKind>,
    pub setups: Vec<CvSetup>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Default)]
struct RawConfig {
    entries: Vec<(usize, String, String)>,
}

impl RawConfig {
    fn single(&self, key: &str) -> Result<Option<&str>> {
        let mut hits = self.entries.iter().filter(|(_, k, _)| k == key);
        let first = hits.next();
        if let Some((line, ..)) = hits.next() {
            bail!("line {line}: key `{key}` given more than once");
        }
        Ok(first.map(|(_, _, v)| v.as_str()))
    }

    fn repeated<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.entries
            .iter()
            .filter(move |(_, k, _)| k == key)
            .map(|(line, _, v)| (*line, v.as_str()))
    }
}

fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {lineno}: expected `key = value`"))?;
        raw.entries
            .push((lineno, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(raw)
}

fn parse_value<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match raw.single(key)? {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}")),
    }
}

const KNOWN_KEYS: [&str; 19] = [
    "dataset",
    "schema",
    "synth.n",
    "synth.extent_w",
    "synth.extent_h",
    "synth.range",
    "synth.sill",
    "synth.nugget",
    "synth.informative",
    "synth.noise",
    "synth.intercept",
    "synth.seed",
    "k_outer",
    "k_inner",
    "repetitions",
    "budget",
    "learner",
    "setup",
    "master_seed",
];

pub fn parse_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_run_config_str(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_run_config_str(text: &str) -> Result<RunConfig> {
    let raw = parse_raw(text)?;
    for (line, key, _) in &raw.entries {
        if !KNOWN_KEYS.contains(&key.as_str()) && key != "out" {
            bail!("line {line}: unknown key `{key}`");
        }
    }

    let dataset: Option<PathBuf> = parse_value(&raw, "dataset")?;
    let has_synth = raw.entries.iter().any(|(_, k, _)| k.starts_with("synth."));
    let source = match (dataset, has_synth) {
        (Some(_), true) => bail!("config declares both `dataset` and `synth.*` keys"),
        (None, false) => bail!("config needs either `dataset` (+ `schema`) or `synth.*` keys"),
        (Some(data), false) => {
            let schema: PathBuf = parse_value(&raw, "schema")?
                .ok_or_else(|| anyhow!("`dataset` requires a `schema` path"))?;
            DataSource::Dataset { data, schema }
        }
        (None, true) => {
            let need = |key: &str| -> Result<f64> {
                parse_value(&raw, key)?.ok_or_else(|| anyhow!("missing `{key}`"))
            };
            DataSource::Synth(FieldSpec {
                n: parse_value(&raw, "synth.n")?.ok_or_else(|| anyhow!("missing `synth.n`"))?,
                extent: (need("synth.extent_w")?, need("synth.extent_h")?),
                range: need("synth.range")?,
                sill: need("synth.sill")?,
                nugget: need("synth.nugget")?,
                n_informative: parse_value(&raw, "synth.informative")?
                    .ok_or_else(|| anyhow!("missing `synth.informative`"))?,
                n_noise: parse_value(&raw, "synth.noise")?
                    .ok_or_else(|| anyhow!("missing `synth.noise`"))?,
                intercept: need("synth.intercept")?,
                seed: parse_value(&raw, "synth.seed")?
                    .ok_or_else(|| anyhow!("missing `synth.seed`"))?,
            })
        }
    };

    let mut budgets: Vec<usize> = Vec::new();
    for (line, v) in raw.repeated("budget") {
        let budget: usize = v
            .parse()
            .map_err(|_| anyhow!("line {line}: budget `{v}` is not a count"))?;
        if !budgets.contains(&budget) {
            budgets.push(budget);
        }
    }
    if budgets.is_empty() {
        budgets.push(0);
    }
    budgets.sort_unstable();

    let mut learners = Vec::new();
    for (line, v) in raw.repeated("learner") {
        let kind: LearnerKind = v.parse().map_err(|e| anyhow!("line {line}: {e}"))?;
        if !learners.contains(&kind) {
            learners.push(kind);
        }
    }
    if learners.is_empty() {
        bail!("config lists no `learner` entries");
    }

    let mut setups = Vec::new();
    for (line, v) in raw.repeated("setup") {
        let setup: CvSetup = v.parse().map_err(|e| anyhow!("line {line}: {e}"))?;
        if !setups.contains(&setup) {
            setups.push(setup);
        }
    }
    if setups.is_empty() {
        bail!("config lists no `setup` entries");
    }

    Ok(RunConfig {
        source,
        k_outer: parse_value(&raw, "k_outer")?.unwrap_or(5),
        k_inner: parse_value(&raw, "k_inner")?.unwrap_or(5),
        repetitions: parse_value(&raw, "repetitions")?.unwrap_or(100),
        budgets,
        learners,
        setups,
        master_seed: parse_value(&raw, "master_seed")?.unwrap_or(0),
        out_dir: parse_value(&raw, "out")?.unwrap_or_else(|| PathBuf::from("results")),
    })
}
