//! Command-line entry point: one binary exposing every pipeline stage
//! (transliteration, similarity, subword, noise, synthetic worlds,
//! training, translation, scoring) plus `reproduce`, which runs the
//! bundled end-to-end experiment manifest. Every subcommand is
//! deterministic given its flags and seeds.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use munmt::corpus::{detokenize, tokenize, LangId};
use munmt::error::Result;
use munmt::experiments::{
    bundled_manifest, evaluate_files, execute_manifest, generate_world, train_to_dir, translate_file,
    Budget, ExperimentManifest,
};
use munmt::metrics;
use munmt::noise::{corrupt, NoiseConfig};
use munmt::schedules::ScheduleFile;
use munmt::seeding;
use munmt::similarity::{overlap, profile};
use munmt::subword::{apply_bpe, learn_bpe, BpeModel};
use munmt::synthlang::WorldPlan;
use munmt::translit::{romanize, restore, TranslitScheme};

#[derive(Parser)]
#[command(
    name = "munmt",
    about = "Desk-scale unsupervised machine translation laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Map native script to its Latin form.
    ToLatin,
    /// Map the Latin form back to native script.
    FromLatin,
}

#[derive(Subcommand)]
enum Command {
    /// Transliterate stdin to stdout through a scheme table.
    Translit {
        /// Scheme file: TSV lines `native-sequence<TAB>latin-sequence`.
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, value_enum)]
        direction: Direction,
    },
    /// Print a character n-gram similarity matrix (percent, one decimal)
    /// for two or more corpus files.
    Similarity {
        /// n-gram order.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Directory of scheme tables; every file is applied to every
        /// corpus so different scripts are compared in one space.
        #[arg(long)]
        romanize: Option<PathBuf>,
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
    },
    /// Learn or apply a subword merge model.
    Bpe {
        #[command(subcommand)]
        action: BpeAction,
    },
    /// Apply word-drop and local-shuffle noise to stdin.
    Corrupt {
        #[arg(long)]
        p_drop: f64,
        #[arg(long)]
        shuffle_k: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Generate a synthetic language family from a world-plan JSON.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a training schedule; corpus paths inside the schedule file
    /// resolve relative to the schedule file's directory.
    Train {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate stdin (or --input) line by line with a trained model.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src_lang: String,
        #[arg(long)]
        tgt_lang: String,
        /// Second model directory for two-stage pivot translation.
        #[arg(long, requires = "via")]
        cascade: Option<PathBuf>,
        /// Pivot language between the cascade's first and second stage.
        #[arg(long, requires = "cascade")]
        via: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a hypothesis file against a reference file.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Also print per-order n-gram precisions.
        #[arg(long)]
        verbose: bool,
    },
    /// Execute the bundled experiment manifest and print the acceptance
    /// table; exits 0 only if every criterion passes.
    Reproduce {
        #[arg(long, default_value = "reproduction")]
        out: PathBuf,
        #[arg(long, default_value = "full")]
        budget: Budget,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Run this manifest instead of the bundled one.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Print the manifest JSON and exit without running it.
        #[arg(long)]
        emit_manifest: bool,
    },
}

#[derive(Subcommand)]
enum BpeAction {
    /// Learn merges from corpus files and print the model to stdout.
    Learn {
        #[arg(long)]
        merges: usize,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Segment stdin with a learned model.
    Apply {
        #[arg(long)]
        model: PathBuf,
    },
}

fn read_stdin_lines() -> Result<Vec<String>> {
    let mut text = String::new();
    io::stdin()
        .lock()
        .read_to_string(&mut text)
        .map_err(|e| munmt::error::Error::io("<stdin>", e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn load_corpus_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| munmt::error::Error::io(path, e))?;
    Ok(text.lines().map(tokenize).collect())
}

fn load_schemes_in_dir(dir: &Path) -> Result<Vec<TranslitScheme>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| munmt::error::Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths.into_iter().map(TranslitScheme::load).collect()
}

fn run(cli: Cli) -> Result<bool> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Translit { scheme, direction } => {
            let scheme = TranslitScheme::load(&scheme)?;
            for line in read_stdin_lines()? {
                let mapped = match direction {
                    Direction::ToLatin => romanize(&line, &scheme)?,
                    Direction::FromLatin => restore(&line, &scheme)?,
                };
                writeln!(out, "{mapped}").ok();
            }
        }
        Command::Similarity { n, romanize: scheme_dir, files } => {
            let schemes = match &scheme_dir {
                Some(dir) => load_schemes_in_dir(dir)?,
                None => Vec::new(),
            };
            let mut profiles = Vec::new();
            let mut labels = Vec::new();
            for path in &files {
                let mut sentences = load_corpus_lines(path)?;
                for scheme in &schemes {
                    for sent in &mut sentences {
                        for word in sent.iter_mut() {
                            *word = romanize(word, scheme)?;
                        }
                    }
                }
                profiles.push(profile(&sentences, n));
                labels.push(
                    path.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| path.display().to_string()),
                );
            }
            write!(out, "corpus").ok();
            for label in &labels {
                write!(out, "\t{label}").ok();
            }
            writeln!(out).ok();
            for (i, label) in labels.iter().enumerate() {
                write!(out, "{label}").ok();
                for p in &profiles {
                    write!(out, "\t{:.1}", 100.0 * overlap(&profiles[i], p)).ok();
                }
                writeln!(out).ok();
            }
        }
        Command::Bpe { action } => match action {
            BpeAction::Learn { merges, files } => {
                let corpora: Vec<Vec<Vec<String>>> = files
                    .iter()
                    .map(|p| load_corpus_lines(p))
                    .collect::<Result<_>>()?;
                let borrowed: Vec<&[Vec<String>]> =
                    corpora.iter().map(|c| c.as_slice()).collect();
                let model = learn_bpe(&borrowed, merges)?;
                write!(out, "{}", model.to_text()).ok();
            }
            BpeAction::Apply { model } => {
                let model = BpeModel::load(&model)?;
                for line in read_stdin_lines()? {
                    let pieces = apply_bpe(&tokenize(&line), &model);
                    writeln!(out, "{}", pieces.join(" ")).ok();
                }
            }
        },
        Command::Corrupt { p_drop, shuffle_k, seed } => {
            let cfg = NoiseConfig { p_drop, shuffle_k };
            let mut rng = seeding::stream(seed, "corrupt");
            for line in read_stdin_lines()? {
                let noisy = corrupt(&tokenize(&line), &cfg, &mut rng);
                writeln!(out, "{}", detokenize(&noisy)).ok();
            }
        }
        Command::Synth { spec, out: dir } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| munmt::error::Error::io(&spec, e))?;
            let plan = WorldPlan::from_json(&text)?;
            let world = generate_world(&plan, &dir)?;
            eprintln!(
                "wrote {} languages, {} parallel corpora, {} test sets to {}",
                world.mono.len(),
                world.parallel.len(),
                world.tests.len(),
                dir.display()
            );
        }
        Command::Train { schedule, out: dir } => {
            let text = std::fs::read_to_string(&schedule)
                .map_err(|e| munmt::error::Error::io(&schedule, e))?;
            let file = ScheduleFile::from_json(&text)?;
            let base = schedule
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or_else(|| Path::new("."))
                .to_path_buf();
            train_to_dir(&file.schedule, &file.corpora, &base, &dir)?;
            eprintln!("model written to {}", dir.join("model").display());
        }
        Command::Translate {
            model,
            src_lang,
            tgt_lang,
            cascade,
            via,
            limit,
            input,
            output,
        } => {
            let src = LangId::new(src_lang);
            let tgt = LangId::new(tgt_lang);
            let via = via.map(LangId::new);
            let cascade_ref = cascade
                .as_deref()
                .zip(via.as_ref())
                .map(|(p, l)| (p, l));
            match (&input, &output) {
                (Some(input), Some(output)) => {
                    translate_file(&model, &src, &tgt, input, output, limit, cascade_ref)?;
                }
                _ => {
                    let translator = munmt::schedules::Translator::load(&model)?;
                    let second = cascade
                        .as_ref()
                        .map(|p| munmt::schedules::Translator::load(p))
                        .transpose()?;
                    let lines = match &input {
                        Some(path) => {
                            let text = std::fs::read_to_string(path)
                                .map_err(|e| munmt::error::Error::io(path, e))?;
                            text.lines().map(str::to_string).collect()
                        }
                        None => read_stdin_lines()?,
                    };
                    let take = limit.unwrap_or(lines.len()).min(lines.len());
                    for line in &lines[..take] {
                        let words = tokenize(line);
                        let hyp = match (&second, &via) {
                            (Some(second), Some(via)) => {
                                munmt::schedules::cascade_translate(
                                    &translator, second, &words, &src, via, &tgt,
                                )?
                                .0
                            }
                            _ => translator.translate(&words, &src, &tgt)?,
                        };
                        writeln!(out, "{}", detokenize(&hyp)).ok();
                    }
                }
            }
        }
        Command::Evaluate { hyp, reference, verbose } => {
            if verbose {
                let hyps = load_corpus_lines(&hyp)?;
                let refs = load_corpus_lines(&reference)?;
                let report = metrics::evaluate(&hyps, &refs)?;
                writeln!(out, "{:.4}\t{:.4}", report.bleu, report.character_ter).ok();
                for (i, p) in report.precisions.iter().enumerate() {
                    writeln!(out, "precision_{}\t{:.4}", i + 1, 100.0 * p).ok();
                }
            } else {
                let (bleu, ter) = evaluate_files(&hyp, &reference, None, None)?;
                writeln!(out, "{bleu:.4}\t{ter:.4}").ok();
            }
        }
        Command::Reproduce {
            out: dir,
            budget,
            seed,
            manifest,
            emit_manifest,
        } => {
            let manifest = match manifest {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| munmt::error::Error::io(&path, e))?;
                    ExperimentManifest::from_json(&text)?
                }
                None => bundled_manifest(seed, budget),
            };
            if emit_manifest {
                writeln!(out, "{}", manifest.to_json()?).ok();
                return Ok(true);
            }
            let report = execute_manifest(&manifest, &dir)?;
            write!(out, "{}", report.table).ok();
            return Ok(report.all_pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
