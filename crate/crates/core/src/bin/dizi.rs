use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dizi_core::classify::{cross_validate, CvConfig, FeatureScheme, PipelineConfig, StyleClassifier};
use dizi_core::corpus::Corpus;
use dizi_core::musicxml::export_musicxml;
use dizi_core::notation::{parse_score, serialize_score, School, Score, TechniqueRegistry};
use dizi_core::represent::{segment, segment_with, TokenSequence, TokenizeOptions, DEFAULT_WINDOW};
use dizi_core::synth::{synth_corpus, SynthConfig};
use dizi_core::tagger::{
    cross_validate_tagger, tagged_pieces, train_crf, CrfConfig, CrfModel, RuleSet, TaggedSequence,
};
use dizi_core::transfer::{run_style_transfer, StyleTransferConfig};
use dizi_core::Error;

#[derive(Parser)]
#[command(name = "dizi", version, about = "Dizi jianpu toolkit: parse, export, classify, tag and transfer")]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArg {
    /// Directory of `.jp` files.
    #[arg(long, env = "DIZI_CORPUS")]
    corpus: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Song, note and technique counts per school.
    Stats(CorpusArg),
    /// Print the token sequence of a score, optionally cut into windows.
    Tokenize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Measures per window; 0 tokenizes the whole score.
        #[arg(long, default_value_t = 0)]
        window: usize,
        #[arg(long)]
        no_rests: bool,
    },
    /// Convert a `.jp` score to MusicXML.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic two-style corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        pieces: usize,
        #[arg(long, default_value_t = 4)]
        measures: usize,
    },
    /// Train a style classifier on a corpus.
    Train {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value = "tfidf")]
        features: FeatureScheme,
        /// Model file; defaults to `$DIZI_MODELS/classifier.model`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Stratified k-fold evaluation of a feature scheme.
    Eval {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long, default_value = "tfidf")]
        features: FeatureScheme,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Train folds in parallel; results are identical.
        #[arg(long)]
        parallel: bool,
    },
    /// Train a technique tagger on one school's songs.
    TagTrain {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        school: School,
        /// Model file; defaults to `$DIZI_MODELS/tagger-<school>.model`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 0.1)]
        l2: f64,
    },
    /// k-fold accuracy and OOV accuracy of CRF and CRF-RULES on one school.
    TagEval {
        #[command(flatten)]
        corpus: CorpusArg,
        #[arg(long)]
        school: School,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Rule file; the built-in rules otherwise.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        #[arg(long, default_value_t = 0.1)]
        l2: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Melody then technique transfer of one score toward a target school.
    Transfer {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: School,
        /// Defaults to `$DIZI_MODELS/classifier.model`.
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Defaults to `$DIZI_MODELS/tagger-<target>.model`.
        #[arg(long)]
        tagger: Option<PathBuf>,
        /// Decode with these rules (CRF-RULES); plain CRF otherwise.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        iterations: usize,
        /// Comma-separated checkpoint iterations.
        #[arg(long, value_delimiter = ',', default_value = "0,20,60")]
        checkpoints: Vec<usize>,
        /// Directory for checkpoint scores, MusicXML and the trace.
        #[arg(long)]
        out_dir: PathBuf,
        /// Continue when the classifier disagrees with the score's label.
        #[arg(long)]
        force: bool,
    },
}

fn model_path(given: Option<PathBuf>, file: &str) -> Result<PathBuf, Error> {
    if let Some(p) = given {
        return Ok(p);
    }
    match std::env::var_os("DIZI_MODELS") {
        Some(dir) => Ok(Path::new(&dir).join(file)),
        None => Err(Error::Config(format!("no model path given and DIZI_MODELS is unset (wanted {file})"))),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_score(path: &Path) -> Result<Score, Error> {
    parse_score(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn classifier_pieces(corpus: &Corpus, window: usize) -> Vec<TokenSequence> {
    corpus
        .scores()
        .filter(|s| s.school != School::Other)
        .flat_map(|s| segment(s, window))
        .collect()
}

fn tagger_pieces(corpus: &Corpus, school: School, window: usize) -> Vec<TaggedSequence> {
    corpus
        .scores()
        .filter(|s| s.school == school)
        .flat_map(|s| tagged_pieces(s, window))
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    let seed = cli.seed;
    match cli.command {
        Command::Stats(c) => {
            let corpus = Corpus::load(&c.corpus)?;
            let st = corpus.stats();
            for f in &st.failures {
                eprintln!("warning: {f}");
            }
            print!("{}", if cli.json { st.to_json() + "\n" } else { st.to_table() });
        }
        Command::Tokenize { input, window, no_rests } => {
            let score = load_score(&input)?;
            let opts = TokenizeOptions { include_rests: !no_rests };
            let pieces = if window == 0 {
                vec![dizi_core::represent::tokenize_with(&score, opts)]
            } else {
                segment_with(&score, window, opts)
            };
            if cli.json {
                let v: Vec<_> = pieces
                    .iter()
                    .map(|p| {
                        serde_json::json!({
                            "measures": [p.source.measures.start, p.source.measures.end],
                            "label": p.label.as_str(),
                            "tokens": p.tokens,
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            } else {
                for p in pieces {
                    println!("{}", p.tokens.join(" "));
                }
            }
        }
        Command::Export { input, out } => {
            let score = load_score(&input)?;
            write(&out, &export_musicxml(&score)?)?;
            if !cli.json {
                println!("wrote {}", out.display());
            }
        }
        Command::Synth { out, pieces, measures } => {
            let corpus = synth_corpus(&SynthConfig { pieces, measures, seed });
            fs::create_dir_all(&out)?;
            for s in &corpus {
                write(&out.join(format!("{}.jp", s.title)), &serialize_score(s))?;
            }
            let north = corpus.iter().filter(|s| s.school == School::North).count();
            if cli.json {
                println!("{}", serde_json::json!({ "pieces": corpus.len(), "north": north, "south": corpus.len() - north }));
            } else {
                println!("wrote {} pieces ({} north, {} south) to {}", corpus.len(), north, corpus.len() - north, out.display());
            }
        }
        Command::Train { corpus, features, out, window } => {
            let out = model_path(out, "classifier.model")?;
            let corpus = Corpus::load_strict(&corpus.corpus)?;
            let pieces = classifier_pieces(&corpus, window);
            let model = StyleClassifier::train(&pieces, &PipelineConfig::new(features, seed))?;
            write(&out, &model.to_text())?;
            if cli.json {
                println!("{}", serde_json::json!({ "model": out, "pieces": pieces.len(), "features": features.as_str() }));
            } else {
                println!("trained {features} classifier on {} pieces -> {}", pieces.len(), out.display());
            }
        }
        Command::Eval { corpus, features, folds, window, report, parallel } => {
            let corpus = Corpus::load_strict(&corpus.corpus)?;
            let pieces = classifier_pieces(&corpus, window);
            let mut cfg = CvConfig::new(PipelineConfig::new(features, seed), folds, seed);
            cfg.parallel = parallel;
            let r = cross_validate(&pieces, &cfg)?;
            if let Some(p) = report {
                write(&p, &(r.to_json() + "\n"))?;
            }
            print!("{}", if cli.json { r.to_json() + "\n" } else { r.to_table() });
        }
        Command::TagTrain { corpus, school, out, window, iterations, l2 } => {
            let out = model_path(out, &format!("tagger-{}.model", school.as_str()))?;
            let corpus = Corpus::load_strict(&corpus.corpus)?;
            let data = tagger_pieces(&corpus, school, window);
            let cfg = CrfConfig { l2, max_iterations: iterations, seed, ..Default::default() };
            let model = train_crf(&data, &cfg)?;
            write(&out, &model.to_text())?;
            if cli.json {
                println!("{}", serde_json::json!({ "model": out, "sequences": data.len(), "features": model.features().len() }));
            } else {
                println!("trained {school} tagger on {} sequences ({} features) -> {}", data.len(), model.features().len(), out.display());
            }
        }
        Command::TagEval { corpus, school, folds, window, rules, iterations, l2, report } => {
            let registry = TechniqueRegistry::default();
            let rules = match rules {
                Some(p) => RuleSet::parse(&read(&p)?, &registry)?,
                None => RuleSet::default_rules(&registry),
            };
            let corpus = Corpus::load_strict(&corpus.corpus)?;
            let data = tagger_pieces(&corpus, school, window);
            let cfg = CrfConfig { l2, max_iterations: iterations, seed, ..Default::default() };
            let r = cross_validate_tagger(&data, folds, &cfg, &rules, seed)?;
            if let Some(p) = report {
                write(&p, &(r.to_json() + "\n"))?;
            }
            print!("{}", if cli.json { r.to_json() + "\n" } else { r.to_table() });
        }
        Command::Transfer { input, target, classifier, tagger, rules, iterations, checkpoints, out_dir, force } => {
            let registry = TechniqueRegistry::default();
            let score = load_score(&input)?;
            let classifier = StyleClassifier::from_text(&read(&model_path(classifier, "classifier.model")?)?)?;
            let tagger_path = model_path(tagger, &format!("tagger-{}.model", target.as_str()))?;
            let tagger = CrfModel::from_text(&read(&tagger_path)?, &registry)?;
            let mut cfg = StyleTransferConfig::new(target, seed);
            cfg.transfer.iterations = iterations;
            cfg.transfer.checkpoints = checkpoints;
            cfg.transfer.force = force;
            cfg.rules = rules.map(|p| read(&p).and_then(|t| RuleSet::parse(&t, &registry))).transpose()?;
            let result = run_style_transfer(&score, &classifier, &tagger, &cfg)?;

            fs::create_dir_all(&out_dir)?;
            for c in &result.checkpoints {
                write(&out_dir.join(format!("checkpoint-{:03}.jp", c.iteration)), &c.jianpu)?;
                write(&out_dir.join(format!("checkpoint-{:03}.musicxml", c.iteration)), &c.musicxml)?;
            }
            write(&out_dir.join("result.jp"), &serialize_score(&result.score))?;
            write(&out_dir.join("trace.tsv"), &result.trace_tsv())?;
            let accepted: usize = result.windows.iter().map(|w| w.accepted().count()).sum();
            let summary = serde_json::json!({
                "target": target.as_str(),
                "windows": result.windows.len(),
                "accepted": accepted,
                "source_technique_counts": result.source_technique_counts,
                "checkpoints": result.checkpoints.iter().map(|c| serde_json::json!({
                    "iteration": c.iteration,
                    "probability": c.probability,
                    "technique_counts": c.technique_counts,
                })).collect::<Vec<_>>(),
            });
            let summary = serde_json::to_string_pretty(&summary).expect("json") + "\n";
            write(&out_dir.join("summary.json"), &summary)?;
            if cli.json {
                print!("{summary}");
            } else {
                println!("{} window(s), {accepted} accepted mutation(s)", result.windows.len());
                println!("{:>9}  {:>11}  techniques", "iteration", "p(initial)");
                for c in &result.checkpoints {
                    let counts: Vec<String> = c.technique_counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    println!("{:>9}  {:>11.6}  {}", c.iteration, c.probability, counts.join(" "));
                }
                println!("outputs in {}", out_dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
