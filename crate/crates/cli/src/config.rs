//! Flag parsing and config precedence: flags, then the config file, then
//! defaults.

use std::path::PathBuf;

use clap::Args;
use surgseg::synth::{GenerateSpec, NoiseConfig};
use surgseg::{KChoice, PipelineConfig, Result};

#[derive(Args, Clone, Debug, Default)]
pub struct PipelineFlags {
    /// Pipeline config file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Peak threshold as a fraction of each channel's largest peak.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Savitzky-Golay window in samples (odd).
    #[arg(long)]
    pub window: Option<usize>,
    /// Degree of the per-segment polynomial fit.
    #[arg(long)]
    pub poly_degree: Option<usize>,
    /// Minimum spacing between changepoints, seconds.
    #[arg(long)]
    pub min_gap: Option<f64>,
    /// Low-pass cutoff, Hz.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Neighbours to retrieve: a number or `auto`.
    #[arg(long, value_parser = parse_k)]
    pub k: Option<KChoice>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_k(s: &str) -> std::result::Result<KChoice, String> {
    match s {
        "auto" => Ok(KChoice::Auto),
        _ => match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(format!("k must be a positive integer or `auto`, got `{s}`")),
        },
    }
}

impl PipelineFlags {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => surgseg::io::read_json(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.alpha {
            cfg.segmenter.alpha = v;
        }
        if let Some(v) = self.window {
            cfg.segmenter.sg_window = v;
        }
        if let Some(v) = self.poly_degree {
            cfg.features.poly_degree = v;
        }
        if let Some(v) = self.min_gap {
            cfg.segmenter.min_gap = v;
        }
        if let Some(v) = self.cutoff {
            cfg.segmenter.lowpass_cutoff = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct GenFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample rate, Hz.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Noise spectral scale; adds noise to every trace (ignored by the
    /// `test_b` sweep, which sets its own).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Noise spectral exponent.
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl GenFlags {
    pub fn apply(&self, spec: &mut GenerateSpec) {
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.rate {
            spec.sample_rate = v;
        }
        if self.beta.is_some() || self.lambda.is_some() {
            let mut noise = spec.noise.clone().unwrap_or_default();
            if let Some(v) = self.beta {
                noise.beta = v;
            }
            if let Some(v) = self.lambda {
                noise.lambda = v;
            }
            spec.noise = Some(noise);
        }
    }
}

/// Noise settings echoed for provenance.
pub fn noise_of(spec: &GenerateSpec) -> Option<NoiseConfig> {
    spec.noise.clone()
}
