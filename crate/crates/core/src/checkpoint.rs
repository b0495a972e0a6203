//! Single-document JSON checkpoints for both model kinds, and title
//! prediction from a loaded checkpoint.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, Vocabulary};
use crate::error::{Error, Result};
use crate::files::write_output;
use crate::maskedlm::{generate_autoregressive, MaskedLmModel, TransformerConfig};
use crate::numcore::{NamedTensor, ParamStore};
use crate::seq2seq::{Seq2SeqConfig, Seq2SeqModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    BilstmSeq2seq,
    MaskedLm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::BilstmSeq2seq => "bilstm_seq2seq",
            ModelKind::MaskedLm => "masked_lm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Accepts the checkpoint names and the short CLI names.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilstm" | "bilstm_seq2seq" | "seq2seq" => Ok(ModelKind::BilstmSeq2seq),
            "maskedlm" | "masked_lm" | "bert" => Ok(ModelKind::MaskedLm),
            other => Err(Error::invalid(format!(
                "unknown model kind {other:?} (expected bilstm or maskedlm)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum AnyModel {
    Seq2Seq(Seq2SeqModel),
    MaskedLm(MaskedLmModel),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Seq2Seq(_) => ModelKind::BilstmSeq2seq,
            AnyModel::MaskedLm(_) => ModelKind::MaskedLm,
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            AnyModel::Seq2Seq(m) => m.params(),
            AnyModel::MaskedLm(m) => m.params(),
        }
    }

    fn vocab_size(&self) -> usize {
        match self {
            AnyModel::Seq2Seq(m) => m.config().vocab_size,
            AnyModel::MaskedLm(m) => m.config().vocab_size,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    model_kind: ModelKind,
    config: serde_json::Value,
    vocab: Vocabulary,
    params: BTreeMap<String, NamedTensor>,
}

/// A trained model together with the vocabulary it was trained on.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: AnyModel,
    pub vocab: Vocabulary,
}

impl Checkpoint {
    pub fn new(model: AnyModel, vocab: Vocabulary) -> Result<Self> {
        if model.vocab_size() != vocab.len() {
            return Err(Error::invalid(format!(
                "model vocabulary size {} differs from vocabulary length {}",
                model.vocab_size(),
                vocab.len()
            )));
        }
        Ok(Checkpoint { model, vocab })
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn to_json(&self) -> Result<String> {
        let config = match &self.model {
            AnyModel::Seq2Seq(m) => serde_json::to_value(m.config())?,
            AnyModel::MaskedLm(m) => serde_json::to_value(m.config())?,
        };
        let env = Envelope {
            format_version: FORMAT_VERSION,
            model_kind: self.kind(),
            config,
            vocab: self.vocab.clone(),
            params: self.model.params().to_named(),
        };
        Ok(serde_json::to_string(&env)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(text)?;
        if env.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
                env.format_version
            )));
        }
        let model = match env.model_kind {
            ModelKind::BilstmSeq2seq => {
                let cfg: Seq2SeqConfig = serde_json::from_value(env.config)?;
                let mut m = Seq2SeqModel::new(cfg, 0)?;
                m.params_mut().load_named(&env.params)?;
                AnyModel::Seq2Seq(m)
            }
            ModelKind::MaskedLm => {
                let cfg: TransformerConfig = serde_json::from_value(env.config)?;
                let mut m = MaskedLmModel::new(cfg, 0)?;
                m.params_mut().load_named(&env.params)?;
                AnyModel::MaskedLm(m)
            }
        };
        Checkpoint::new(model, env.vocab)
    }

    pub fn save(&self, path: &Path, force: bool) -> Result<()> {
        write_output(path, self.to_json()?.as_bytes(), force)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => {
                Error::data(format!("{}: not a valid checkpoint: {j}", path.display()))
            }
            other => other,
        })
    }

    /// Greedy title ids for an already-cleaned review.
    pub fn predict_ids(&self, cleaned_text: &str) -> Result<Vec<usize>> {
        match &self.model {
            AnyModel::Seq2Seq(m) => {
                let cfg = m.config();
                let source = self.vocab.encode(cleaned_text, cfg.max_source_len, false);
                if source.is_empty() {
                    return Ok(Vec::new());
                }
                m.greedy_decode(&source, cfg.max_target_len - 2)
            }
            AnyModel::MaskedLm(m) => {
                let review = self.vocab.encode(cleaned_text, m.config().max_len, false);
                Ok(generate_autoregressive(m, &review, m.config().max_len)?.output)
            }
        }
    }

    /// Clean a raw review and return the predicted title as text.
    pub fn predict_title(&self, raw_text: &str) -> Result<String> {
        let ids = self.predict_ids(&clean_text(raw_text))?;
        Ok(self.vocab.decode(&ids))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(
            ["produto", "muito", "bom", "ruim", "chegou", "!"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn kind_names() {
        assert_eq!(
            "bilstm".parse::<ModelKind>().unwrap(),
            ModelKind::BilstmSeq2seq
        );
        assert_eq!(
            "maskedlm".parse::<ModelKind>().unwrap(),
            ModelKind::MaskedLm
        );
        assert!("gru".parse::<ModelKind>().is_err());
        assert_eq!(
            serde_json::to_string(&ModelKind::MaskedLm).unwrap(),
            "\"masked_lm\""
        );
    }

    #[test]
    fn round_trip_is_byte_identical_for_both_kinds() {
        let v = vocab();
        let mut s2s = Seq2SeqModel::new(Seq2SeqConfig::tiny(v.len()), 3).unwrap();
        s2s.jitter(0.37, 1);
        let mut mlm = MaskedLmModel::new(TransformerConfig::tiny(v.len()), 3).unwrap();
        mlm.jitter(0.37, 1);
        for model in [AnyModel::Seq2Seq(s2s), AnyModel::MaskedLm(mlm)] {
            let ck = Checkpoint::new(model, v.clone()).unwrap();
            let json = ck.to_json().unwrap();
            let back = Checkpoint::from_json(&json).unwrap();
            assert_eq!(back.to_json().unwrap(), json);
            assert_eq!(back.model.params().to_named(), ck.model.params().to_named());
            let text = "Produto muito bom, chegou!";
            assert_eq!(
                back.predict_title(text).unwrap(),
                ck.predict_title(text).unwrap()
            );
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let v = vocab();
        let m = Seq2SeqModel::new(Seq2SeqConfig::tiny(v.len() + 1), 3).unwrap();
        assert!(Checkpoint::new(AnyModel::Seq2Seq(m), v.clone()).is_err());
        let m = Seq2SeqModel::new(Seq2SeqConfig::tiny(v.len()), 3).unwrap();
        let json = Checkpoint::new(AnyModel::Seq2Seq(m), v)
            .unwrap()
            .to_json()
            .unwrap();
        let bumped = json.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(Checkpoint::from_json(&bumped).is_err());
        let wrong_kind = json.replacen("bilstm_seq2seq", "masked_lm", 1);
        assert!(Checkpoint::from_json(&wrong_kind).is_err());
    }

    #[test]
    fn empty_review_predicts_empty_title() {
        let v = vocab();
        let m = Seq2SeqModel::new(Seq2SeqConfig::tiny(v.len()), 3).unwrap();
        let ck = Checkpoint::new(AnyModel::Seq2Seq(m), v).unwrap();
        assert_eq!(ck.predict_title("1234 ###").unwrap(), "");
    }
}
