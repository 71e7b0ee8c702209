use std::path::PathBuf;
use std::process::ExitCode;

use attrv2l::harness::{
    self, cell_path, guess_cell, load_checkpoint, load_seed, mkdir, predict_cell, read_json, run_experiment,
    save_checkpoint, save_predictor, score_cell, seed_dir, train_attribute_predictor, train_cell, write_json,
    CellReport, Expect, ExperimentConfig, ExperimentReport, GUESS_ROW,
};
use attrv2l::microworld::io::{read_jsonl, write_corpus, write_jsonl};
use attrv2l::microworld::shipped_taxonomy;
use attrv2l::tasks::{InputMode, Prediction, TaskKind};
use attrv2l::vocab::write_lines;
use attrv2l::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "attrv2l",
    version,
    about = "Attribute-mediated captioning and QA on a synthetic micro-world"
)]
struct Cli {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for single-seed commands; the first configured seed by default.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Caption,
    QaSingle,
    QaSeq,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Caption => TaskKind::Caption,
            Task::QaSingle => TaskKind::QaSingle,
            Task::QaSeq => TaskKind::QaSeq,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the corpus and its splits.
    GenCorpus,
    /// Mine the attribute vocabulary and the word dictionary.
    MineVocab,
    /// Train the region attribute predictor.
    TrainAttr,
    /// Train one task head.
    Train {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        mode: String,
    },
    /// Caption the test split with a trained captioner.
    Decode {
        #[arg(long)]
        mode: String,
    },
    /// Answer the test questions with a trained QA head, or the GUESS baseline.
    Answer {
        #[arg(long, value_enum, default_value = "qa-single")]
        task: Task,
        /// An input mode, or GUESS.
        #[arg(long)]
        mode: String,
    },
    /// Write the knowledge-expanded vocabulary and its similarity matrix.
    Expand,
    /// Score a cell's predictions against the test split.
    Score {
        #[arg(long, value_enum)]
        task: Task,
        /// An input mode, or GUESS.
        #[arg(long)]
        mode: String,
    },
    /// Aggregate every scored cell under the output directory.
    Report,
    /// Run the full pipeline for every configured mode and seed.
    Run,
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        if cli.command_is_run() {
            cfg.seeds = vec![s];
        }
    }
    Ok(cfg)
}

impl Cli {
    fn command_is_run(&self) -> bool {
        matches!(self.command, Command::Run)
    }
}

fn mode_of(s: &str) -> Result<InputMode> {
    InputMode::parse(s)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    let seed = cli.seed.unwrap_or(cfg.seeds[0]);
    let dir = seed_dir(&cfg, seed);
    let tree = || shipped_taxonomy(&cfg.corpus.generator.lexicon);
    match &cli.command {
        Command::GenCorpus => {
            mkdir(&dir)?;
            let (corpus, splits) = harness::build_corpus(&cfg, seed)?;
            write_corpus(&dir.join("corpus"), &corpus)?;
            write_json(&dir.join("splits.json"), &splits)?;
        }
        Command::MineVocab => {
            let data = load_seed_partial(&cfg, seed)?;
            let (att, dict) = harness::build_vocabularies(&cfg, &data.0, &data.1)?;
            att.save(&dir.join("attributes.txt"), &dir.join("merge_map.tsv"))?;
            dict.save(&dir.join("words.txt"))?;
        }
        Command::TrainAttr => {
            let data = load_seed(&cfg, seed, &[])?;
            let p = train_attribute_predictor(&cfg, &data.corpus, &data.splits, &data.attributes, seed)?;
            save_predictor(
                &p.params,
                data.attributes.words(),
                &p.losses,
                &dir.join("predictor.ckpt"),
            )?;
        }
        Command::Train { task, mode } => {
            let mode = mode_of(mode)?;
            let task = TaskKind::from(*task);
            let data = load_seed(&cfg, seed, &[mode])?;
            let model = train_cell(&cfg, &data, mode, task)?;
            mkdir(&dir.join(mode.as_str()))?;
            save_checkpoint(&model, &cell_path(&cfg, seed, mode.as_str(), task, "ckpt"))?;
        }
        Command::Decode { mode } => predict(&cfg, seed, TaskKind::Caption, mode)?,
        Command::Answer { task, mode } => {
            if mode.eq_ignore_ascii_case(GUESS_ROW) {
                let data = load_seed(&cfg, seed, &[])?;
                guess_cell(&cfg, &data, &tree()?)?;
            } else {
                predict(&cfg, seed, TaskKind::from(*task), mode)?;
            }
        }
        Command::Expand => {
            let data = load_seed(&cfg, seed, &[])?;
            let s = harness::expansion_matrix(&cfg, &data.corpus, &data.splits, &data.attributes)?;
            write_lines(&dir.join("kb_vocab.txt"), s.cols())?;
            let (m, n) = s.shape();
            let mut rows = vec![format!("\t{}", s.cols().join("\t"))];
            for i in 0..m {
                let vals: Vec<String> = (0..n).map(|j| format!("{}", s.get(i, j))).collect();
                rows.push(format!("{}\t{}", s.rows()[i], vals.join("\t")));
            }
            write_lines(&dir.join("similarity.tsv"), &rows)?;
        }
        Command::Score { task, mode } => {
            let task = TaskKind::from(*task);
            let guess = mode.eq_ignore_ascii_case(GUESS_ROW);
            let modes = if guess { vec![] } else { vec![mode_of(mode)?] };
            let row = modes.first().map_or(GUESS_ROW, |m| m.as_str()).to_string();
            let data = load_seed(&cfg, seed, &modes)?;
            let pred_path = cell_path(&cfg, seed, &row, task, "predictions.jsonl");
            let preds: Vec<Prediction> = read_jsonl(&pred_path)?;
            let ckpt = cell_path(&cfg, seed, &row, task, "ckpt");
            let model = if guess {
                None
            } else {
                let expect = Expect {
                    mode: Some(mode_of(mode)?),
                    task: Some(task),
                    word_dict_hash: Some(&data.dict.hash()),
                };
                Some(load_checkpoint(&ckpt, &expect)?)
            };
            let metrics = score_cell(&data, task, &preds, model.as_ref(), &tree()?)?;
            let rel = |p: PathBuf| p.strip_prefix(&cfg.out_dir).unwrap_or(&p).display().to_string();
            let report = CellReport {
                seed,
                row: row.clone(),
                task,
                metrics,
                checkpoint: (!guess).then(|| rel(ckpt.clone())),
                predictions: rel(pred_path),
            };
            write_json(&cell_path(&cfg, seed, &row, task, "report.json"), &report)?;
            println!("{}", summary_line(&report));
        }
        Command::Report => {
            let mut cells = Vec::new();
            for &s in &cfg.seeds {
                let sd = seed_dir(&cfg, s);
                let mut rows: Vec<String> = InputMode::ALL.iter().map(|m| m.as_str().to_string()).collect();
                rows.push(GUESS_ROW.into());
                for row in rows {
                    for task in [TaskKind::Caption, TaskKind::QaSingle, TaskKind::QaSeq] {
                        let p = sd.join(&row).join(format!("{}.report.json", task.as_str()));
                        if p.exists() {
                            cells.push(read_json::<CellReport>(&p)?);
                        }
                    }
                }
            }
            if cells.is_empty() {
                return Err(Error::Config(format!(
                    "no cell reports under {}",
                    cfg.out_dir.display()
                )));
            }
            let report = ExperimentReport {
                name: cfg.name.clone(),
                aggregate: harness::aggregate(&cfg, &cells),
                cells,
            };
            harness::write_report(&cfg, &report)?;
            print!("{}", harness::render_table(&report));
        }
        Command::Run => {
            let report = run_experiment(&cfg)?;
            print!("{}", harness::render_table(&report));
        }
    }
    Ok(())
}

fn summary_line(r: &CellReport) -> String {
    let scores: Vec<String> = r.metrics.scores.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
    format!("seed {} {} {}: {}", r.seed, r.row, r.task.as_str(), scores.join(" "))
}

fn load_seed_partial(cfg: &ExperimentConfig, seed: u64) -> Result<(attrv2l::microworld::Corpus, harness::Splits)> {
    let dir = seed_dir(cfg, seed);
    let corpus = attrv2l::microworld::io::read_corpus(&dir.join("corpus"))?;
    let splits = read_json(&dir.join("splits.json"))?;
    Ok((corpus, splits))
}

fn predict(cfg: &ExperimentConfig, seed: u64, task: TaskKind, mode: &str) -> Result<()> {
    let mode = mode_of(mode)?;
    let data = load_seed(cfg, seed, &[mode])?;
    let expect = Expect {
        mode: Some(mode),
        task: Some(task),
        word_dict_hash: Some(&data.dict.hash()),
    };
    let model = load_checkpoint(&cell_path(cfg, seed, mode.as_str(), task, "ckpt"), &expect)?;
    let preds = predict_cell(cfg, &data, &model)?;
    write_jsonl(&cell_path(cfg, seed, mode.as_str(), task, "predictions.jsonl"), &preds)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
