//! Flat `key=value` config files mirroring the model and training fields.
//!
//! Lines are `name = value`; `#` starts a comment. Unknown keys are errors
//! so typos fail loudly.

use crate::error::Error;
use crate::model::{AuxKey, AuxQuery, AuxValue, ModelConfig};
use crate::train::TrainConfig;
use crate::Result;
use std::path::Path;

/// Apply a config file on top of the given defaults.
pub fn apply_config_file(
    path: &Path,
    model: &mut ModelConfig,
    train: &mut TrainConfig,
) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    apply_config_text(&text, model, train)
}

pub fn apply_config_text(
    text: &str,
    model: &mut ModelConfig,
    train: &mut TrainConfig,
) -> Result<()> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::BadConfig(format!("line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        set_key(model, train, key, value)
            .map_err(|e| Error::BadConfig(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(())
}

fn set_key(
    model: &mut ModelConfig,
    train: &mut TrainConfig,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    let usize_v = || value.parse::<usize>().map_err(|e| format!("{key}: {e}"));
    let f64_v = || value.parse::<f64>().map_err(|e| format!("{key}: {e}"));
    let u64_v = || value.parse::<u64>().map_err(|e| format!("{key}: {e}"));
    match key {
        "layers" => model.layers = usize_v()?,
        "heads" => model.heads = usize_v()?,
        "head_dim" => model.head_dim = usize_v()?,
        "ffn_dim" => model.ffn_dim = usize_v()?,
        "max_len" => model.max_len = usize_v()?,
        "aux_query_source" => {
            model.aux_query_source = AuxQuery::from_str(value)
                .ok_or_else(|| format!("{key}: unknown query source `{value}`"))?
        }
        "aux_key_source" => {
            model.aux_key_source = AuxKey::from_str(value)
                .ok_or_else(|| format!("{key}: unknown key source `{value}`"))?
        }
        "aux_value_source" => {
            model.aux_value_source = AuxValue::from_str(value)
                .ok_or_else(|| format!("{key}: unknown value source `{value}`"))?
        }
        "embed_noise_sigma" => model.embed_noise_sigma = f64_v()?,
        "dropout_rate" => model.dropout_rate = f64_v()?,
        "lr" => train.lr = f64_v()?,
        "beta1" => train.beta1 = f64_v()?,
        "beta2" => train.beta2 = f64_v()?,
        "adam_eps" => train.adam_eps = f64_v()?,
        "batch_size" => train.batch_size = usize_v()?,
        "max_steps" => train.max_steps = usize_v()?,
        "eval_every" => train.eval_every = usize_v()?,
        "seed" => train.seed = u64_v()?,
        "fraction_train" => train.fraction_train = f64_v()?,
        "fraction_aux" => train.fraction_aux = f64_v()?,
        "grad_clip" => train.grad_clip = f64_v()?,
        "dev_eval_max" => train.dev_eval_max = usize_v()?,
        "stop_when_train_exact" => {
            train.stop_when_train_exact = value
                .parse::<bool>()
                .map_err(|e| format!("{key}: {e}"))?
        }
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_comments() {
        let mut model = ModelConfig::default();
        let mut train = TrainConfig::default();
        let text = "\
# architecture
head_dim = 8
aux_query_source = L2-Out   # routing
lr = 0.001
seed = 42
";
        apply_config_text(text, &mut model, &mut train).unwrap();
        assert_eq!(model.head_dim, 8);
        assert_eq!(model.aux_query_source, AuxQuery::L2Out);
        assert_eq!(train.lr, 0.001);
        assert_eq!(train.seed, 42);
        // Untouched fields keep defaults.
        assert_eq!(model.layers, 2);
        assert_eq!(train.batch_size, 512);
    }

    #[test]
    fn unknown_keys_fail() {
        let mut model = ModelConfig::default();
        let mut train = TrainConfig::default();
        let err = apply_config_text("nope = 1", &mut model, &mut train).unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }
}
