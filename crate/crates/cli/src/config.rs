//! Flat `key = value` pipeline configuration.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};
use nonsym::corpus::WhitespaceMode;
use nonsym::eval::{DenoiseConfig, TypingHyper};
use nonsym::segmenter::SegmentationConfig;
use nonsym::trainer::TrainConfig;
use nonsym::DEFAULT_MARKER;
use serde::Serialize;

/// Every tunable of the pipeline in one namespace. Defaults are the
/// reference settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    pub marker: char,
    pub whitespace_mode: String,

    pub m: usize,
    pub kmin: usize,
    pub kmax: usize,

    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f32,
    pub min_count: u64,
    pub subsample: f64,

    pub n_o: usize,
    pub min_support: usize,
    pub max_iterations: usize,

    pub context_len: usize,
    pub n_contexts: usize,
    pub noise_lo: usize,
    pub noise_hi: usize,
    pub p_space: f64,
    pub n_queries: usize,

    pub lambda: f64,
    pub typing_epochs: usize,
    pub eta0: f64,
    pub normalize_features: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seg = SegmentationConfig::default();
        let train = TrainConfig::default();
        let denoise = DenoiseConfig::default();
        let typing = TypingHyper::default();
        PipelineConfig {
            seed: 0,
            workers: 1,
            marker: DEFAULT_MARKER,
            whitespace_mode: "original".into(),
            m: seg.m,
            kmin: seg.kmin,
            kmax: seg.kmax,
            dim: train.dim,
            window: train.window,
            negatives: train.negatives,
            epochs: train.epochs,
            lr: train.initial_lr,
            min_count: train.min_count,
            subsample: train.subsample_threshold,
            n_o: 200,
            min_support: nonsym::transducer::DEFAULT_MIN_SUPPORT,
            max_iterations: nonsym::transducer::DEFAULT_MAX_ITERATIONS,
            context_len: denoise.context_len,
            n_contexts: denoise.n_contexts,
            noise_lo: denoise.noise_lo,
            noise_hi: denoise.noise_hi,
            p_space: denoise.p_space,
            n_queries: denoise.n_queries,
            lambda: typing.lambda,
            typing_epochs: typing.epochs,
            eta0: typing.eta0,
            normalize_features: typing.normalize,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("bad value {value:?} for {key}: {e}"))
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        let v = value;
        match key.replace('-', "_").as_str() {
            "seed" => self.seed = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "marker" => self.marker = parse(key, v)?,
            "whitespace_mode" => {
                WhitespaceMode::from_str(v)?;
                self.whitespace_mode = v.to_ascii_lowercase();
            }
            "m" => self.m = parse(key, v)?,
            "kmin" => self.kmin = parse(key, v)?,
            "kmax" => self.kmax = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "window" => self.window = parse(key, v)?,
            "negatives" => self.negatives = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "min_count" => self.min_count = parse(key, v)?,
            "subsample" => self.subsample = parse(key, v)?,
            "n_o" => self.n_o = parse(key, v)?,
            "min_support" => self.min_support = parse(key, v)?,
            "max_iterations" => self.max_iterations = parse(key, v)?,
            "context_len" => self.context_len = parse(key, v)?,
            "n_contexts" => self.n_contexts = parse(key, v)?,
            "noise_lo" => self.noise_lo = parse(key, v)?,
            "noise_hi" => self.noise_hi = parse(key, v)?,
            "p_space" => self.p_space = parse(key, v)?,
            "n_queries" => self.n_queries = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "typing_epochs" => self.typing_epochs = parse(key, v)?,
            "eta0" => self.eta0 = parse(key, v)?,
            "normalize_features" => self.normalize_features = parse(key, v)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Apply a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> anyhow::Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn segmentation(&self) -> SegmentationConfig {
        SegmentationConfig {
            m: self.m,
            kmin: self.kmin,
            kmax: self.kmax,
            seed: self.seed,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            initial_lr: self.lr,
            min_count: self.min_count,
            subsample_threshold: self.subsample,
            workers: self.workers,
            seed: self.seed,
        }
    }

    pub fn denoise(&self) -> DenoiseConfig {
        DenoiseConfig {
            context_len: self.context_len,
            n_contexts: self.n_contexts,
            noise_lo: self.noise_lo,
            noise_hi: self.noise_hi,
            p_space: self.p_space,
            n_queries: self.n_queries,
            seed: self.seed,
            kmin: self.kmin,
            kmax: self.kmax,
            marker: self.marker,
        }
    }

    pub fn typing(&self) -> TypingHyper {
        TypingHyper {
            kmin: self.kmin,
            kmax: self.kmax,
            lambda: self.lambda,
            epochs: self.typing_epochs,
            eta0: self.eta0,
            seed: self.seed,
            normalize: self.normalize_features,
            marker: self.marker,
        }
    }

    pub fn whitespace(&self) -> WhitespaceMode {
        self.whitespace_mode.parse().expect("validated in set")
    }
}
