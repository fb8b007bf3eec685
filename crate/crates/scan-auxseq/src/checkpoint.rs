//! Checkpoint container: a JSON manifest plus one raw little-endian array
//! file.
//!
//! The manifest records the model config, the full vocabularies with their
//! hashes, and per-tensor (name, shape, element offset); `params.bin` holds
//! every tensor's values concatenated in canonical slot order. Loading
//! rebuilds the parameter containers from the config and validates each
//! tensor's name and shape against the manifest.

use crate::model::params::{SlotMut, SlotRef};
use crate::model::{Model, ModelConfig, Parameters};
use crate::scalar::Scalar;
use crate::vocab::VocabSet;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into params.bin, in elements (not bytes).
    pub offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub dtype: String,
    pub config: ModelConfig,
    pub vocab: VocabSet,
    pub vocab_hashes: [u64; 4],
    pub tensors: Vec<TensorEntry>,
}

fn slot_shape<T: Scalar>(slot: &SlotRef<'_, T>) -> Vec<usize> {
    match slot {
        SlotRef::Mat(m) => vec![m.nrows(), m.ncols()],
        SlotRef::Vec1(v) => vec![v.len()],
    }
}

/// Write `manifest.json` and `params.bin` into `dir` (created if needed).
pub fn save<T: Scalar>(model: &Model<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let slots = model.params.slots();
    let mut tensors = Vec::with_capacity(slots.len());
    let mut data: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    for (name, slot) in &slots {
        tensors.push(TensorEntry {
            name: name.clone(),
            shape: slot_shape(slot),
            offset,
        });
        match slot {
            SlotRef::Mat(m) => {
                for &x in m.iter() {
                    x.write_le(&mut data);
                }
                offset += m.len();
            }
            SlotRef::Vec1(v) => {
                for &x in v.iter() {
                    x.write_le(&mut data);
                }
                offset += v.len();
            }
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dtype: T::DTYPE.to_string(),
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        vocab_hashes: model.vocab.hashes(),
        tensors,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    fs::write(dir.join(PARAMS_FILE), data)?;
    Ok(())
}

/// Load a checkpoint directory into a fresh model.
pub fn load<T: Scalar>(dir: &Path) -> Result<Model<T>> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::BadCheckpoint(format!(
            "format version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    if manifest.dtype != T::DTYPE {
        return Err(Error::BadCheckpoint(format!(
            "dtype {} (expected {})",
            manifest.dtype,
            T::DTYPE
        )));
    }
    if manifest.vocab_hashes != manifest.vocab.hashes() {
        return Err(Error::BadCheckpoint("vocab hash mismatch".into()));
    }
    manifest.config.validate()?;
    let data = fs::read(dir.join(PARAMS_FILE))?;
    let mut params: Parameters<T> = Parameters::init(&manifest.config, &manifest.vocab, 0);
    let slots = params.slots_mut();
    if slots.len() != manifest.tensors.len() {
        return Err(Error::BadCheckpoint(format!(
            "{} tensors in manifest, model has {}",
            manifest.tensors.len(),
            slots.len()
        )));
    }
    for ((name, slot), entry) in slots.into_iter().zip(&manifest.tensors) {
        if name != entry.name {
            return Err(Error::BadCheckpoint(format!(
                "tensor order mismatch: `{}` vs `{}`",
                name, entry.name
            )));
        }
        let (want_shape, len): (Vec<usize>, usize) = match &slot {
            SlotMut::Mat(m) => (vec![m.nrows(), m.ncols()], m.len()),
            SlotMut::Vec1(v) => (vec![v.len()], v.len()),
        };
        if want_shape != entry.shape {
            return Err(Error::BadCheckpoint(format!(
                "tensor `{name}` shape {:?} (expected {want_shape:?})",
                entry.shape
            )));
        }
        let start = entry.offset * T::WIDTH;
        let end = start + len * T::WIDTH;
        if end > data.len() {
            return Err(Error::BadCheckpoint(format!(
                "tensor `{name}` overruns params.bin"
            )));
        }
        let bytes = &data[start..end];
        let mut it = bytes.chunks_exact(T::WIDTH).map(T::read_le);
        match slot {
            SlotMut::Mat(m) => {
                for x in m.iter_mut() {
                    *x = it.next().unwrap();
                }
            }
            SlotMut::Vec1(v) => {
                for x in v.iter_mut() {
                    *x = it.next().unwrap();
                }
            }
        }
    }
    if let Some(bad) = params.all_finite() {
        return Err(Error::BadCheckpoint(format!("non-finite values in `{bad}`")));
    }
    Ok(Model::from_parts(manifest.config, manifest.vocab, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Batch, Mode, ModelConfig};
    use crate::vocab::VocabSet;

    #[test]
    fn save_load_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let model: Model<f32> = Model::new(ModelConfig::tiny(), VocabSet::standard(), 5).unwrap();
        save(&model, dir.path()).unwrap();
        let loaded: Model<f32> = load(dir.path()).unwrap();

        let ex = crate::data::LabeledExample::from_ast(
            &crate::grammar::parse(&crate::grammar::tokenize("jump around left twice").unwrap())
                .unwrap(),
        );
        let batch = Batch::build(&[&ex], &model.vocab, 64).unwrap();
        let (a, _) = model.forward(&batch, &mut Mode::Eval);
        let (b, _) = loaded.forward(&batch, &mut Mode::Eval);
        assert_eq!(a.act_logits, b.act_logits);
        assert_eq!(a.aux1_logits, b.aux1_logits);
        assert_eq!(a.aux2_logits, b.aux2_logits);
    }

    #[test]
    fn wrong_dtype_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model: Model<f32> = Model::new(ModelConfig::tiny(), VocabSet::standard(), 5).unwrap();
        save(&model, dir.path()).unwrap();
        match load::<f64>(dir.path()) {
            Err(Error::BadCheckpoint(msg)) => assert!(msg.contains("dtype")),
            other => panic!("expected BadCheckpoint, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn corrupted_manifest_shape_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model: Model<f32> = Model::new(ModelConfig::tiny(), VocabSet::standard(), 5).unwrap();
        save(&model, dir.path()).unwrap();
        let mut manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap())
                .unwrap();
        manifest.tensors[0].shape = vec![1, 1];
        fs::write(
            dir.path().join(MANIFEST_FILE),
            serde_json::to_string(&manifest).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            load::<f32>(dir.path()),
            Err(Error::BadCheckpoint(_))
        ));
    }
}
