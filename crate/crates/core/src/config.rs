//! The TOML file read by the command-line tool.
//!
//! ```toml
//! [train]
//! epochs = 10
//! head = "som"
//! [train.provider]
//! kind = "fixed"
//!
//! [data]
//! embeddings = "vectors.emb"
//! labels = "labels.txt"
//!
//! [preprocess]
//! lowercase = true
//! ```
//!
//! Unknown keys are rejected. Relative data paths resolve against the
//! directory holding the config file.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PreprocessRules};
use crate::embed::load_embeddings;
use crate::error::{Error, Result};
use crate::synthetic::{gaussian_blobs, BlobSpec};
use crate::trainer::{TrainConfig, TrainInput};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Corpus in JSON lines, as written by `preprocess`.
    pub corpus: Option<PathBuf>,
    /// `EMB1` vectors for the fixed provider.
    pub embeddings: Option<PathBuf>,
    /// One integer label per line, aligned with `embeddings`.
    pub labels: Option<PathBuf>,
    /// Generate Gaussian blobs instead of reading files.
    pub blobs: Option<BlobSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub train: TrainConfig,
    pub preprocess: PreprocessRules,
    pub data: DataConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Reads whatever `[data]` names, checked against the provider.
    pub fn load_input(&self) -> Result<TrainInput> {
        let d = &self.data;
        let sources = [d.corpus.is_some() && d.embeddings.is_none(), d.embeddings.is_some(), d.blobs.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config(
                "[data] needs exactly one of corpus, embeddings (optionally with corpus for labels) or blobs".into(),
            ));
        }
        let text = self.train.provider.needs_text();
        if let Some(spec) = &d.blobs {
            if text {
                return Err(Error::invalid("provider", "blobs are vectors; use the fixed provider"));
            }
            let (set, labels) = gaussian_blobs(spec)?;
            return Ok(TrainInput::Embeddings {
                set,
                labels: Some(labels),
            });
        }
        if let Some(e) = &d.embeddings {
            if text {
                return Err(Error::invalid("provider", "embeddings need the fixed provider"));
            }
            let set = load_embeddings(&self.resolve(e))?;
            let labels = match (&d.labels, &d.corpus) {
                (Some(l), _) => Some(read_labels(&self.resolve(l))?),
                (None, Some(c)) => Some(labels_by_id(&Corpus::read_jsonl(&self.resolve(c))?, set.ids())?),
                (None, None) => None,
            };
            return Ok(TrainInput::Embeddings { set, labels });
        }
        if !text {
            return Err(Error::invalid("provider", "a corpus needs a text provider (hashed-bow or encoder)"));
        }
        if d.labels.is_some() {
            return Err(Error::Config("[data] labels only apply to embeddings; a corpus carries its own".into()));
        }
        let path = d.corpus.as_ref().expect("checked above");
        Ok(TrainInput::Corpus(Corpus::read_jsonl(&self.resolve(path))?))
    }
}

/// Labels of the corpus documents with the given ids.
pub fn labels_by_id(corpus: &Corpus, ids: &[u64]) -> Result<Vec<usize>> {
    let by_id: HashMap<u64, Option<usize>> = corpus.documents.iter().map(|d| (d.id, d.label)).collect();
    ids.iter()
        .map(|id| match by_id.get(id) {
            Some(Some(l)) => Ok(*l),
            Some(None) => Err(Error::invalid("corpus", format!("document {id} has no label"))),
            None => Err(Error::invalid("corpus", format!("no document with id {id}"))),
        })
        .collect()
}

/// One nonnegative integer per line; blank lines are skipped.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected a nonnegative integer, got {:?}: {e}", l.trim()),
            })
        })
        .collect()
}

pub fn write_labels(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::embed::{save_embeddings, EmbeddingSet};
    use crate::trainer::{HeadKind, ProviderConfig};

    #[test]
    fn parses_documented_keys() {
        let cfg = CliConfig::from_toml(
            r#"
            [train]
            epochs = 3
            head = "somr"
            tau = 0.9
            optimizer = "adam"
            [train.som]
            rows = 2
            cols = 2
            [train.augment]
            word_delete_prob = 0.2
            [train.provider]
            kind = "encoder"
            d_model = 8
            heads = 2
            [data]
            corpus = "c.jsonl"
            [preprocess]
            lowercase = true
            relevance_keywords = ["python"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.head, HeadKind::SomR);
        assert_eq!(cfg.train.augment.word_delete_prob, 0.2);
        assert!(matches!(cfg.train.provider, ProviderConfig::Encoder(ref e) if e.d_model == 8));
        assert_eq!(cfg.preprocess.relevance_keywords, vec!["python".to_string()]);
        assert_eq!(CliConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in [
            "colour = 1",
            "[train]\nepoch = 3",
            "[train.som]\nrow = 2",
            "[data]\nfile = \"x\"",
            "[preprocess]\nlower = true",
            "[train.provider]\nkind = \"fixed\"\ndim = 3",
            "[train.provider]\nkind = \"bert\"",
        ] {
            assert!(CliConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_fail_at_load() {
        assert!(CliConfig::from_toml("[train]\ntau = 0").is_err());
        assert!(CliConfig::from_toml("[train]\nhead = \"som\"\nclusters = 5").is_err());
    }

    #[test]
    fn embeddings_with_corpus_labels_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Corpus::new("t", Some(2));
        c.documents.push(Document::new(10, "a b").with_label(1));
        c.documents.push(Document::new(20, "c d").with_label(0));
        c.write_jsonl(&dir.path().join("c.jsonl")).unwrap();
        let set = EmbeddingSet::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![20, 10]).unwrap();
        save_embeddings(&set, &dir.path().join("e.emb")).unwrap();
        let cfg_path = dir.path().join("c.toml");
        fs::write(&cfg_path, "[data]\nembeddings = \"e.emb\"\ncorpus = \"c.jsonl\"\n").unwrap();
        let cfg = CliConfig::load(&cfg_path).unwrap();
        let TrainInput::Embeddings { labels, .. } = cfg.load_input().unwrap() else {
            panic!("expected embeddings");
        };
        assert_eq!(labels, Some(vec![0, 1]));
    }

    #[test]
    fn data_source_must_be_unique_and_match_provider() {
        let blobs = CliConfig::from_toml("[data.blobs]\nn = 8").unwrap();
        assert!(blobs.load_input().is_ok());
        let both = CliConfig::from_toml("[data]\nembeddings = \"e.emb\"\n[data.blobs]\nn = 8").unwrap();
        assert!(both.load_input().is_err());
        let none = CliConfig::default();
        assert!(none.load_input().is_err());
        let text_on_blobs =
            CliConfig::from_toml("[train.provider]\nkind = \"hashed-bow\"\ndim = 8\nseed = 0\n[data.blobs]\nn = 8").unwrap();
        assert!(text_on_blobs.load_input().is_err());
    }

    #[test]
    fn label_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.txt");
        fs::write(&p, "0\n2\n\n1\n").unwrap();
        assert_eq!(read_labels(&p).unwrap(), vec![0, 2, 1]);
        fs::write(&p, "0\n-1\n").unwrap();
        let err = read_labels(&p).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let missing = dir.path().join("nope.txt");
        assert!(read_labels(&missing).unwrap_err().to_string().contains("nope.txt"));
    }
}
