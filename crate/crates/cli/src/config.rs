use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sspt::corpus::CorpusFormat;
use sspt::generator::GeneratorConfig;
use sspt::index::Bm25Params;
use sspt::model::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    pub format: CorpusFormat,
    /// Replacement stop list, one term per line.
    pub stop_list: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { path: None, format: CorpusFormat::Jsonl, stop_list: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Share of the dataset held out for evaluation and the swap experiment.
    pub eval_fraction: f64,
    /// Cap on training instances taken from the training split.
    pub max_instances: Option<usize>,
    /// Cap on held-out instances.
    pub max_eval_instances: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { eval_fraction: 0.2, max_instances: None, max_eval_instances: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for every artifact not given an explicit path.
    pub dir: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Whole-run configuration, one section per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives sampling in generation, the train/eval split, initialization,
    /// batch order and the swap experiment.
    pub seed: Option<u64>,
    /// Worker threads for gradient computation. Results do not depend on it.
    pub threads: Option<usize>,
    pub corpus: CorpusSection,
    pub generator: GeneratorConfig,
    pub bm25: Bm25Params,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub min_score: Option<f64>,
    pub impossible_target: Option<f64>,
}

impl PipelineConfig {
    /// Parses a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.corpus.path,
            &mut cfg.corpus.stop_list,
            &mut cfg.output.dir,
            &mut cfg.output.index,
            &mut cfg.output.checkpoint,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.apply(&Overrides::default());
        Ok(cfg)
    }

    /// Layers `o` over the current values. The top-level seed also seeds
    /// generation.
    pub fn apply(&mut self, o: &Overrides) {
        self.seed = o.seed.or(self.seed);
        self.threads = o.threads.or(self.threads);
        if let Some(p) = &o.out {
            self.output.dir = Some(p.clone());
        }
        if let Some(p) = &o.corpus {
            self.corpus.path = Some(p.clone());
        }
        if let Some(p) = &o.index {
            self.output.index = Some(p.clone());
        }
        if let Some(p) = &o.checkpoint {
            self.output.checkpoint = Some(p.clone());
        }
        if let Some(v) = o.min_score {
            self.generator.min_score = v;
        }
        if let Some(v) = o.impossible_target {
            self.generator.impossible_target = v;
        }
        if let Some(seed) = self.seed {
            self.generator.rng_seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.bm25.validate()?;
        self.model.validate()?;
        if !(0.0..1.0).contains(&self.train.eval_fraction) {
            bail!("train.eval_fraction must be in [0, 1), got {}", self.train.eval_fraction);
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        let mut paths = vec![self.dataset_path(), self.index_path(), self.checkpoint_path(), self.loss_path(), self.report_path()];
        if let Some(c) = &self.corpus.path {
            paths.push(c.clone());
        }
        for (i, a) in paths.iter().enumerate() {
            if paths[i + 1..].contains(a) {
                bail!("path {} is used for two different artifacts", a.display());
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.context("a seed is required: set `seed` in the config or pass --seed")
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.corpus.path.as_deref().context("no corpus given: set corpus.path in the config or pass --corpus")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.out_dir().join("dataset.jsonl")
    }

    pub fn generation_report_path(&self) -> PathBuf {
        self.out_dir().join("generation.json")
    }

    pub fn index_path(&self) -> PathBuf {
        self.output.index.clone().unwrap_or_else(|| self.out_dir().join("index.bin"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output.checkpoint.clone().unwrap_or_else(|| self.out_dir().join("checkpoint.bin"))
    }

    pub fn loss_path(&self) -> PathBuf {
        self.out_dir().join("loss.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir().join("report.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_override() {
        let text = r#"
            seed = 3
            [corpus]
            path = "docs.jsonl"
            [generator]
            min_score = 9.5
            [model]
            hidden_dim = 16
            heads = 4
            optimizer = "adam"
            [train]
            max_instances = 100
        "#;
        let mut cfg: PipelineConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.generator.min_score, 9.5);
        assert_eq!(cfg.model.heads, 4);
        assert_eq!(cfg.train.max_instances, Some(100));
        cfg.apply(&Overrides { seed: Some(11), min_score: Some(1.0), ..Default::default() });
        assert_eq!((cfg.seed, cfg.generator.rng_seed, cfg.generator.min_score), (Some(11), 11, 1.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = toml::from_str::<PipelineConfig>("[generator]\nmin_scor = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("min_scor"));
    }

    #[test]
    fn colliding_paths_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.output.index = Some(cfg.checkpoint_path());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_is_required() {
        assert!(PipelineConfig::default().seed().is_err());
    }
}
