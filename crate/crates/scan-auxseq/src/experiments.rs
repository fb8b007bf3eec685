//! Experiment suites: few-shot curves over training/supervision fractions
//! and the auxiliary-attention routing grid.
//!
//! Every suite writes a self-describing run directory: the resolved configs,
//! per-run training artifacts, a flat CSV, a JSONL record stream, and an SVG
//! curve, so multi-seed reporting can collate runs without re-parsing logs.

use crate::checkpoint;
use crate::data::Split;
use crate::eval::{evaluate, RunMetrics};
use crate::model::{AuxKey, AuxQuery, AuxValue, ModelConfig, AUX_KV_GRID};
use crate::train::{fresh_model, train, TrainConfig};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

/// The fraction ladder reported by the few-shot studies.
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.02, 0.05, 0.10, 0.25, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FewshotMode {
    /// Subsample whole training examples; aux supervision stays complete.
    #[serde(rename = "examples")]
    Examples,
    /// Keep every command-action pair; supervise aux on a fraction only.
    #[serde(rename = "aux")]
    Aux,
}

impl FewshotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FewshotMode::Examples => "examples",
            FewshotMode::Aux => "aux",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "examples" => Some(FewshotMode::Examples),
            "aux" => Some(FewshotMode::Aux),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub train_examples: usize,
    pub supervised_examples: usize,
    pub dev: RunMetrics,
}

/// Train one model per fraction and score the best checkpoint on the full
/// dev set.
pub fn run_fewshot_suite(
    split: &Split,
    mode: FewshotMode,
    fractions: &[f64],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<Vec<CurvePoint>> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("suite.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "split": split.name.as_str(),
            "mode": mode.as_str(),
            "fractions": fractions,
            "model": model_cfg,
            "train": train_cfg,
        }))?,
    )?;
    let mut points = Vec::new();
    let mut jsonl = fs::File::create(out_dir.join("curve.jsonl"))?;
    for &fraction in fractions {
        let mut cfg = train_cfg.clone();
        match mode {
            FewshotMode::Examples => cfg.fraction_train = fraction,
            FewshotMode::Aux => cfg.fraction_aux = fraction,
        }
        let run_dir = out_dir.join(format!("frac_{fraction}"));
        let mut model = fresh_model(model_cfg, cfg.seed)?;
        let report = train(&mut model, &split.train, &split.dev, &cfg, &run_dir)?;
        let best = checkpoint::load::<f32>(&run_dir.join("checkpoint_best"))?;
        let dev = evaluate(&best, &split.dev, cfg.seed);
        let supervised = match mode {
            FewshotMode::Examples => report.train_examples,
            FewshotMode::Aux => (report.train_examples as f64 * fraction).floor() as usize,
        };
        let point = CurvePoint {
            fraction,
            train_examples: report.train_examples,
            supervised_examples: supervised,
            dev,
        };
        writeln!(jsonl, "{}", serde_json::to_string(&point)?)?;
        println!(
            "fewshot {} {} fraction={:.2}: dev action {:.2}% (aux1 {:.2}%, aux2 {:.2}%)",
            split.name,
            mode.as_str(),
            fraction,
            100.0 * point.dev.action_acc,
            100.0 * point.dev.aux1_acc,
            100.0 * point.dev.aux2_acc,
        );
        points.push(point);
    }
    write_curve_csv(&out_dir.join("curve.csv"), &points)?;
    write_svg_curve(
        &out_dir.join("curve.svg"),
        &points
            .iter()
            .map(|p| (p.fraction, p.dev.action_acc))
            .collect::<Vec<_>>(),
        &format!("{} / {}: dev action accuracy", split.name, mode.as_str()),
    )?;
    Ok(points)
}

fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut out = String::from(
        "fraction,train_examples,supervised_examples,action_acc,aux1_acc,aux2_acc\n",
    );
    for p in points {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            p.fraction,
            p.train_examples,
            p.supervised_examples,
            p.dev.action_acc,
            p.dev.aux1_acc,
            p.dev.aux2_acc
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridCell {
    pub query: AuxQuery,
    pub key: AuxKey,
    pub value: AuxValue,
    pub dev: Option<RunMetrics>,
    pub error: Option<String>,
}

/// Train one model per (query) x (key, value) cell with a fixed seed and
/// score each on the dev set. A failing cell is recorded, not fatal.
pub fn run_ablation_grid(
    split: &Split,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<Vec<GridCell>> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("suite.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "split": split.name.as_str(),
            "model": model_cfg,
            "train": train_cfg,
        }))?,
    )?;
    let mut cells = Vec::new();
    let mut jsonl = fs::File::create(out_dir.join("grid.jsonl"))?;
    for (key, value) in AUX_KV_GRID {
        for query in AuxQuery::ALL {
            let mut cfg = model_cfg.clone();
            cfg.aux_query_source = query;
            cfg.aux_key_source = key;
            cfg.aux_value_source = value;
            let run_dir = out_dir.join(format!(
                "cell_{}_{}{}",
                query.as_str(),
                key.as_str(),
                value.as_str()
            ));
            let outcome = (|| -> Result<RunMetrics> {
                let mut model = fresh_model(&cfg, train_cfg.seed)?;
                train(&mut model, &split.train, &split.dev, train_cfg, &run_dir)?;
                let best = checkpoint::load::<f32>(&run_dir.join("checkpoint_best"))?;
                Ok(evaluate(&best, &split.dev, train_cfg.seed))
            })();
            let cell = match outcome {
                Ok(dev) => GridCell {
                    query,
                    key,
                    value,
                    dev: Some(dev),
                    error: None,
                },
                Err(e) => GridCell {
                    query,
                    key,
                    value,
                    dev: None,
                    error: Some(e.to_string()),
                },
            };
            if let Some(dev) = &cell.dev {
                println!(
                    "ablate ({}, {} & {}): dev action {:.2}% / aux1 {:.2}%",
                    query.as_str(),
                    key.as_str(),
                    value.as_str(),
                    100.0 * dev.action_acc,
                    100.0 * dev.aux1_acc,
                );
            } else {
                println!(
                    "ablate ({}, {} & {}): FAILED: {}",
                    query.as_str(),
                    key.as_str(),
                    value.as_str(),
                    cell.error.as_deref().unwrap_or("?")
                );
            }
            writeln!(jsonl, "{}", serde_json::to_string(&cell)?)?;
            cells.push(cell);
        }
    }
    fs::write(out_dir.join("grid.txt"), format_grid(&cells))?;
    write_grid_csv(&out_dir.join("grid.csv"), &cells)?;
    Ok(cells)
}

/// Render the 4x3 table: one row per key/value pair, one column per query,
/// action/aux1 accuracy per cell.
pub fn format_grid(cells: &[GridCell]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<10} {:>15} {:>15} {:>15}", "K&V \\ Q", "L1-Int", "L1-Out", "L2-Out").unwrap();
    for (key, value) in AUX_KV_GRID {
        let mut row = format!("{:<10}", format!("{} & {}", key.as_str(), value.as_str()));
        for query in AuxQuery::ALL {
            let cell = cells
                .iter()
                .find(|c| c.query == query && c.key == key && c.value == value);
            let text = match cell {
                Some(GridCell { dev: Some(m), .. }) => {
                    format!("{:.2}/{:.2}", 100.0 * m.action_acc, 100.0 * m.aux1_acc)
                }
                Some(GridCell { error: Some(_), .. }) => "failed".to_string(),
                _ => "-".to_string(),
            };
            write!(row, " {text:>15}").unwrap();
        }
        writeln!(out, "{row}").unwrap();
    }
    out
}

fn write_grid_csv(path: &Path, cells: &[GridCell]) -> Result<()> {
    let mut out = String::from("query,key,value,action_acc,aux1_acc,aux2_acc,error\n");
    for c in cells {
        let (a, x1, x2) = c
            .dev
            .as_ref()
            .map(|m| (m.action_acc, m.aux1_acc, m.aux2_acc))
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            c.query.as_str(),
            c.key.as_str(),
            c.value.as_str(),
            a,
            x1,
            x2,
            c.error.as_deref().unwrap_or("")
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Minimal dependency-free line chart.
pub fn write_svg_curve(path: &Path, points: &[(f64, f64)], title: &str) -> Result<()> {
    let (w, h, ml, mb) = (640.0, 400.0, 60.0, 40.0);
    let xmax = points.iter().map(|p| p.0).fold(1e-9, f64::max);
    let px = |x: f64| ml + (w - ml - 20.0) * (x / xmax);
    let py = |y: f64| (h - mb) - (h - mb - 20.0) * y.clamp(0.0, 1.0);
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"16\" font-family=\"monospace\" font-size=\"13\">{}</text>",
        ml,
        title.replace('&', "&amp;").replace('<', "&lt;")
    )
    .unwrap();
    // Axes.
    writeln!(
        s,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - 20.0,
        h - mb
    )
    .unwrap();
    writeln!(
        s,
        "<line x1=\"{ml}\" y1=\"20\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb
    )
    .unwrap();
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(
            s,
            "<text x=\"8\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\">{:.0}%</text>",
            py(tick) + 4.0,
            tick * 100.0
        )
        .unwrap();
        writeln!(
            s,
            "<line x1=\"{ml}\" y1=\"{0:.1}\" x2=\"{1}\" y2=\"{0:.1}\" stroke=\"#ddd\"/>",
            py(tick),
            w - 20.0
        )
        .unwrap();
    }
    let poly: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
        .collect();
    writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1a6faf\" stroke-width=\"2\"/>",
        poly.join(" ")
    )
    .unwrap();
    for &(x, y) in points {
        writeln!(
            s,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"#1a6faf\"/>",
            px(x),
            py(y)
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            px(x),
            h - mb + 16.0,
            x
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_splits, load_split, SplitName, SplitSpec};
    use crate::model::AuxValue;

    /// Smoke-scale suite run: miniature model, few steps, tiny data slices.
    /// Verifies orchestration, artifacts, and error isolation, not accuracy.
    #[test]
    fn fewshot_suite_writes_artifacts() {
        let data = tempfile::tempdir().unwrap();
        generate_splits(data.path()).unwrap();
        let mut split = load_split(&SplitSpec::in_dir(SplitName::Mcd1, data.path())).unwrap();
        split.train.truncate(64);
        split.dev.truncate(16);
        let model_cfg = ModelConfig {
            dropout_rate: 0.0,
            embed_noise_sigma: 0.0,
            ..ModelConfig::tiny()
        };
        let train_cfg = TrainConfig {
            batch_size: 16,
            max_steps: 3,
            eval_every: 2,
            dev_eval_max: 8,
            ..TrainConfig::default()
        };
        let out = tempfile::tempdir().unwrap();
        let points = run_fewshot_suite(
            &split,
            FewshotMode::Examples,
            &[0.5, 1.0],
            &model_cfg,
            &train_cfg,
            out.path(),
        )
        .unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].train_examples, 32);
        for f in ["suite.json", "curve.csv", "curve.jsonl", "curve.svg"] {
            assert!(out.path().join(f).exists(), "{f} missing");
        }
        let csv = std::fs::read_to_string(out.path().join("curve.csv")).unwrap();
        assert!(csv.starts_with("fraction,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn grid_formatting_handles_failures() {
        let cells = vec![
            GridCell {
                query: AuxQuery::L1Int,
                key: AuxKey::Functional,
                value: AuxValue::Contextual,
                dev: Some(RunMetrics {
                    action_acc: 1.0,
                    aux1_acc: 1.0,
                    aux2_acc: 1.0,
                    buckets: Default::default(),
                    n_examples: 10,
                    seed: 1,
                }),
                error: None,
            },
            GridCell {
                query: AuxQuery::L2Out,
                key: AuxKey::Functional,
                value: AuxValue::Contextual,
                dev: None,
                error: Some("boom".into()),
            },
        ];
        let table = format_grid(&cells);
        assert!(table.contains("100.00/100.00"));
        assert!(table.contains("failed"));
        assert!(table.contains("f & c"));
    }
}
