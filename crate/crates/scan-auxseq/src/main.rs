use clap::{Parser, Subcommand, ValueEnum};
use scan_auxseq::config::apply_config_file;
use scan_auxseq::data::{
    export_augmented, generate_splits, load_split, verify_file, LabeledExample, SplitName,
    SplitSpec,
};
use scan_auxseq::eval::evaluate;
use scan_auxseq::experiments::{
    format_grid, run_ablation_grid, run_fewshot_suite, FewshotMode, DEFAULT_FRACTIONS,
};
use scan_auxseq::model::{gradcheck, Batch, Model, ModelConfig};
use scan_auxseq::train::{fresh_model, train, TrainConfig};
use scan_auxseq::vocab::VocabSet;
use scan_auxseq::{auxgen, checkpoint, data, grammar, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "scan-auxseq",
    about = "SCAN command-to-action training with auxiliary countdown sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsetArg {
    Dev,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Examples,
    Aux,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportSubset {
    Train,
    Dev,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Write the five split file sets (addjump, length, mcd1-3) into a directory.
    MakeData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-derive every line of a split through the grammar and report mismatches.
    VerifyData {
        #[arg(long)]
        split: String,
        #[arg(long)]
        data_dir: PathBuf,
    },
    /// Export a split with auxiliary sequences attached (tab-separated).
    ExportAugmented {
        #[arg(long)]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        subset: ExportSubset,
    },
    /// Train a model on a split.
    Train {
        #[arg(long)]
        split: String,
        #[arg(long)]
        fraction_train: Option<f64>,
        #[arg(long)]
        fraction_aux: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        eval_every: Option<usize>,
    },
    /// Score a checkpoint on a split subset; prints RunMetrics JSON.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        split: String,
        #[arg(long, value_enum)]
        subset: SubsetArg,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the full query x key/value routing grid for the auxiliary head.
    Ablate {
        #[arg(long)]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Accuracy curves under reduced example or supervision fractions.
    Fewshot {
        #[arg(long)]
        split: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated fractions; defaults to 0.02,0.05,0.1,0.25,1.0.
        #[arg(long)]
        fractions: Option<String>,
    },
    /// Grammar oracle, aux fixtures, gradient check, and overfit smoke test.
    Selftest,
}

fn parse_split(name: &str) -> Result<SplitName, Error> {
    SplitName::from_str(name).ok_or_else(|| {
        Error::BadConfig(format!(
            "unknown split `{name}` (addjump|length|mcd1|mcd2|mcd3)"
        ))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::MakeData { out } => {
            let counts = generate_splits(&out)?;
            for (name, train, dev, test) in counts {
                println!("{name}: train {train}, dev {dev}, test {test}");
            }
            Ok(true)
        }
        Command::VerifyData { split, data_dir } => {
            let name = parse_split(&split)?;
            let spec = SplitSpec::in_dir(name, &data_dir);
            let mut clean = true;
            for (part, path) in [
                ("train", &spec.train),
                ("dev", &spec.dev),
                ("test", &spec.test),
            ] {
                let report = verify_file(path)?;
                println!(
                    "{name} {part}: {} lines, {} format errors, {} oracle mismatches, {} aux violations",
                    report.lines,
                    report.format_errors,
                    report.oracle_mismatches,
                    report.aux_violations
                );
                clean &= report.format_errors == 0
                    && report.oracle_mismatches == 0
                    && report.aux_violations == 0;
            }
            println!("{name}: {}", if clean { "OK" } else { "MISMATCHES FOUND" });
            Ok(clean)
        }
        Command::ExportAugmented {
            split,
            out,
            data_dir,
            subset,
        } => {
            let name = parse_split(&split)?;
            let loaded = load_split(&SplitSpec::in_dir(name, &data_dir))?;
            let mut file = std::fs::File::create(&out)?;
            let parts: Vec<&[LabeledExample]> = match subset {
                ExportSubset::Train => vec![&loaded.train],
                ExportSubset::Dev => vec![&loaded.dev],
                ExportSubset::Test => vec![&loaded.test],
                ExportSubset::All => vec![&loaded.train, &loaded.dev, &loaded.test],
            };
            let mut n = 0;
            for part in parts {
                export_augmented(part, &mut file)?;
                n += part.len();
            }
            println!("wrote {n} augmented records to {}", out.display());
            Ok(true)
        }
        Command::Train {
            split,
            fraction_train,
            fraction_aux,
            seed,
            config,
            out,
            data_dir,
            max_steps,
            batch_size,
            eval_every,
        } => {
            let name = parse_split(&split)?;
            let loaded = load_split(&SplitSpec::in_dir(name, &data_dir))?;
            let mut model_cfg = ModelConfig::default();
            let mut train_cfg = TrainConfig::default();
            if let Some(path) = config {
                apply_config_file(&path, &mut model_cfg, &mut train_cfg)?;
            }
            if let Some(f) = fraction_train {
                train_cfg.fraction_train = f;
            }
            if let Some(f) = fraction_aux {
                train_cfg.fraction_aux = f;
            }
            if let Some(s) = seed {
                train_cfg.seed = s;
            }
            if let Some(v) = max_steps {
                train_cfg.max_steps = v;
            }
            if let Some(v) = batch_size {
                train_cfg.batch_size = v;
            }
            if let Some(v) = eval_every {
                train_cfg.eval_every = v;
            }
            model_cfg.validate()?;
            let mut model = fresh_model(&model_cfg, train_cfg.seed)?;
            let report = train(&mut model, &loaded.train, &loaded.dev, &train_cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Evaluate {
            checkpoint: ckpt,
            split,
            subset,
            data_dir,
            seed,
        } => {
            let name = parse_split(&split)?;
            let loaded = load_split(&SplitSpec::in_dir(name, &data_dir))?;
            let model: Model<f32> = checkpoint::load(&ckpt)?;
            let examples = match subset {
                SubsetArg::Dev => &loaded.dev,
                SubsetArg::Test => &loaded.test,
            };
            let metrics = evaluate(&model, examples, seed.unwrap_or(0));
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(true)
        }
        Command::Ablate {
            split,
            out,
            data_dir,
            config,
        } => {
            let name = parse_split(&split)?;
            let loaded = load_split(&SplitSpec::in_dir(name, &data_dir))?;
            let mut model_cfg = ModelConfig::default();
            let mut train_cfg = TrainConfig::default();
            if let Some(path) = config {
                apply_config_file(&path, &mut model_cfg, &mut train_cfg)?;
            }
            let cells = run_ablation_grid(&loaded, &model_cfg, &train_cfg, &out)?;
            println!("{}", format_grid(&cells));
            Ok(cells.iter().all(|c| c.error.is_none()))
        }
        Command::Fewshot {
            split,
            mode,
            out,
            data_dir,
            config,
            fractions,
        } => {
            let name = parse_split(&split)?;
            let loaded = load_split(&SplitSpec::in_dir(name, &data_dir))?;
            let mut model_cfg = ModelConfig::default();
            let mut train_cfg = TrainConfig::default();
            if let Some(path) = config {
                apply_config_file(&path, &mut model_cfg, &mut train_cfg)?;
            }
            let fractions: Vec<f64> = match fractions {
                None => DEFAULT_FRACTIONS.to_vec(),
                Some(s) => s
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::BadConfig(format!("fractions: {e}")))
                    })
                    .collect::<Result<_, _>>()?,
            };
            let mode = match mode {
                ModeArg::Examples => FewshotMode::Examples,
                ModeArg::Aux => FewshotMode::Aux,
            };
            run_fewshot_suite(&loaded, mode, &fractions, &model_cfg, &train_cfg, &out)?;
            Ok(true)
        }
        Command::Selftest => selftest(),
    }
}

/// The fast end-to-end health checks: grammar oracle, fixture reproduction,
/// analytic-vs-numeric gradients, and a small overfit run.
fn selftest() -> Result<bool, Error> {
    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("[{}] {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let all = grammar::enumerate_all();
    check("grammar: 20910 enumerated commands", all.len() == 20_910);
    let round_trip = all.iter().all(|(ast, actions)| {
        grammar::parse(&ast.tokens())
            .map(|re| grammar::interpret(&re) == *actions)
            .unwrap_or(false)
    });
    check("grammar: parse/interpret round trip", round_trip);
    let max_len = all.iter().map(|(_, a)| a.len()).max().unwrap_or(0);
    check("grammar: max action length 48", max_len == 48);

    let fixture = |cmd: &str, want1: &[u8], want2: &[u8]| -> bool {
        let ast = grammar::parse(&grammar::tokenize(cmd).unwrap()).unwrap();
        auxgen::gen_aux1(&ast) == want1 && auxgen::gen_aux2(&ast) == want2
    };
    check(
        "auxgen: single-clause fixtures",
        fixture(
            "jump opposite left twice",
            &[1, 1, 1, 0, 0, 0],
            &[2, 1, 0, 2, 1, 0],
        ) && fixture("walk left thrice", &[2, 2, 1, 1, 0, 0], &[1, 0, 1, 0, 1, 0]),
    );
    check(
        "auxgen: conjunction offset fixtures",
        fixture(
            "jump opposite left twice and walk right thrice",
            &[1, 1, 1, 0, 0, 0, 5, 5, 4, 4, 3, 3],
            &[2, 1, 0, 2, 1, 0, 9, 8, 9, 8, 9, 8],
        ) && fixture(
            "walk right twice after jump opposite left thrice",
            &[5, 5, 5, 4, 4, 4, 3, 3, 3, 1, 1, 0, 0],
            &[10, 9, 8, 10, 9, 8, 10, 9, 8, 1, 0, 1, 0],
        ),
    );

    let vocab = VocabSet::standard();
    let mut model: Model<f64> = Model::new(ModelConfig::tiny(), vocab.clone(), 53)?;
    let exs = [
        example("jump opposite left twice"),
        example("walk right twice after look around left"),
    ];
    let refs: Vec<&LabeledExample> = exs.iter().collect();
    let batch = Batch::build(&refs, &vocab, 64)?;
    let report = gradcheck::gradient_check(&mut model, &batch, 1e-5, 3);
    println!("  max relative gradient error: {:.3e}", report.max_rel_err);
    check("model: gradient check < 1e-4", report.max_rel_err < 1e-4);

    println!("  overfit smoke test (64 examples, <=2000 steps)...");
    let pool: Vec<LabeledExample> = all
        .iter()
        .map(|(ast, _)| LabeledExample::from_ast(ast))
        .collect();
    let examples = data::subsample(&pool, 64.0 / pool.len() as f64, 7)?;
    let mut net = fresh_model(&ModelConfig::default(), 7)?;
    let cfg = TrainConfig {
        batch_size: 64,
        max_steps: 2_000,
        eval_every: 100,
        dev_eval_max: 0,
        stop_when_train_exact: true,
        ..TrainConfig::default()
    };
    let tmp = std::env::temp_dir().join(format!("scan-auxseq-selftest-{}", std::process::id()));
    let report = train(&mut net, &examples, &[], &cfg, &tmp)?;
    std::fs::remove_dir_all(&tmp).ok();
    if report.stopped_early {
        println!(
            "  overfit reached 100/100/100 train exact match at step {}",
            report.steps
        );
    } else {
        println!(
            "  overfit stopped at step {} with {:?}",
            report.steps, report.train_greedy
        );
    }
    check("train: overfit smoke test", report.stopped_early);

    println!("{}", if ok { "selftest: PASS" } else { "selftest: FAIL" });
    Ok(ok)
}

fn example(cmd: &str) -> LabeledExample {
    LabeledExample::from_ast(&grammar::parse(&grammar::tokenize(cmd).unwrap()).unwrap())
}
