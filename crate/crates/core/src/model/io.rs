//! Binary model files.
//!
//! Layout, all integers little-endian: magic, `u32` format version, system name, then the
//! settings as `key=value` text, the vocabulary tables, and the named tensors (name,
//! trainable flag, dims, row-major `f64` values). Strings are `u32` length plus UTF-8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::transition::System;

use super::{Hyperparams, Model, ModelError, Pretrained, Vocabulary};
use crate::nn::Tensor;

pub const MAGIC: &[u8; 8] = b"INORDMDL";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn strs(&mut self, items: &[String]) {
        self.u32(items.len() as u32);
        items.iter().for_each(|s| self.str(s));
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

fn format_err(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| format_err(format!("truncated at byte {}", self.pos)))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, ModelError> {
        usize::try_from(self.u64()?).map_err(|_| format_err("length overflows"))
    }

    fn str(&mut self) -> Result<String, ModelError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format_err("invalid UTF-8 string"))
    }

    fn strs(&mut self) -> Result<Vec<String>, ModelError> {
        let n = self.u32()?;
        (0..n).map(|_| self.str()).collect()
    }
}

pub fn save_model(model: &Model) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.str(model.system().name());
    w.str(&model.hyper().to_string());

    let v = model.vocab();
    w.strs(v.words.items());
    w.u32(v.word_counts.len() as u32);
    v.word_counts.iter().for_each(|&c| w.u64(c as u64));
    w.strs(v.pos.items());
    w.strs(&v.labels);
    w.strs(v.pretrained.items());

    let store = model.store();
    w.u32(store.len() as u32);
    for (_, p) in store.iter() {
        w.str(&p.name);
        w.0.push(u8::from(p.trainable));
        w.u32(p.value.shape().len() as u32);
        p.value.shape().iter().for_each(|&d| w.u64(d as u64));
        for x in p.value.data() {
            w.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.0
}

/// Reads a model file, checking every tensor against the shapes its settings and
/// vocabulary imply.
pub fn load_model(data: &[u8]) -> Result<Model, ModelError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(format_err("not a model file"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported format version {version}")));
    }
    let system: System = r.str()?.parse().map_err(format_err)?;
    let hyper = Hyperparams::default()
        .parse_config(&r.str()?)
        .map_err(|e| format_err(format!("settings block: {e}")))?;

    let words = r.strs()?;
    let n = r.u32()?;
    let counts = (0..n).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
    let pos = r.strs()?;
    let labels = r.strs()?;
    let pretrained_words = r.strs()?;
    let vocab =
        Vocabulary::from_parts(words, counts, pos, labels, system, pretrained_words.clone())?;
    let placeholder = Pretrained {
        vectors: vec![0.0; pretrained_words.len() * hyper.pretrained_dim],
        words: pretrained_words,
        dim: hyper.pretrained_dim,
    };
    let pretrained = (!placeholder.words.is_empty()).then_some(&placeholder);
    let mut model = Model::new(
        system,
        hyper,
        vocab,
        pretrained,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;

    let count = r.u32()? as usize;
    if count != model.store().len() {
        return Err(format_err(format!(
            "expected {} tensors, found {count}",
            model.store().len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name = r.str()?;
        let trainable = r.take(1)?[0] != 0;
        let ndims = r.u32()?;
        let dims = (0..ndims).map(|_| r.len()).collect::<Result<Vec<_>, _>>()?;
        let len = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| format_err("tensor too large"))?;
        let bytes = r.take(
            len.checked_mul(8)
                .ok_or_else(|| format_err("tensor too large"))?,
        )?;
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let id = model
            .store()
            .id(&name)
            .ok_or_else(|| format_err(format!("unexpected tensor {name}")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(format_err(format!("duplicate tensor {name}")));
        }
        if model.store().get(id).trainable != trainable {
            return Err(format_err(format!(
                "tensor {name} has the wrong trainable flag"
            )));
        }
        let tensor = Tensor::from_vec(&dims, values)?;
        if !tensor.is_finite() {
            return Err(format_err(format!("tensor {name} holds non-finite values")));
        }
        model.store_mut().set(id, tensor)?;
    }
    if r.pos != data.len() {
        return Err(format_err("trailing bytes after the last tensor"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::read_trees;

    fn model() -> Model {
        let corpus = read_trees("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))").unwrap();
        let pre = Pretrained::parse("dog 0.5 -0.5\n", 2).unwrap();
        let vocab = Vocabulary::build(&corpus, System::BottomUp, pre.words.clone()).unwrap();
        let hyper = Hyperparams {
            word_dim: 3,
            pretrained_dim: 2,
            pos_dim: 2,
            action_dim: 2,
            lstm_input_dim: 4,
            lstm_hidden_dim: 3,
            seed: 17,
            ..Hyperparams::default()
        };
        Model::new(
            System::BottomUp,
            hyper,
            vocab,
            Some(&pre),
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = save_model(&m);
        let back = load_model(&bytes).unwrap();
        assert_eq!(back.system(), m.system());
        assert_eq!(back.hyper(), m.hyper());
        assert_eq!(back.vocab(), m.vocab());
        assert_eq!(back.store(), m.store());
        assert_eq!(save_model(&back), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = save_model(&model());
        assert!(load_model(b"nonsense").is_err());
        assert!(load_model(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(load_model(&extra).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        assert!(load_model(&version).is_err());

        // A settings block whose dimensions disagree with the stored tensors.
        let m = model();
        let mut h = m.hyper().clone();
        h.word_dim = 5;
        let other = Model::new(
            m.system(),
            h,
            m.vocab().clone(),
            Some(&Pretrained {
                words: vec!["dog".into()],
                vectors: vec![0.5, -0.5],
                dim: 2,
            }),
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let good = save_model(&other);
        let mut mixed = good[..good.len()].to_vec();
        let old_block = m.hyper().to_string();
        let new_block = other.hyper().to_string();
        assert_eq!(old_block.len(), new_block.len());
        let at = mixed
            .windows(new_block.len())
            .position(|w| w == new_block.as_bytes())
            .unwrap();
        mixed[at..at + old_block.len()].copy_from_slice(old_block.as_bytes());
        assert!(matches!(
            load_model(&mixed),
            Err(ModelError::Nn(_)) | Err(ModelError::Format(_))
        ));
    }
}
