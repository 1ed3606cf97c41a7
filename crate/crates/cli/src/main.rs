use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slicevec::analysis::{
    analogy_angle_matrix, chord_distance_matrix, key_similarity_matrix, ChordSpec, FunctionalRole, Key, Mode,
};
use slicevec::config::{ConfigError, PipelineConfig};
use slicevec::generator::{diagnostics_csv, emit_midi, piece_slices, rewrite_piece};
use slicevec::pipeline::{
    ingest, load_caches, load_embeddings, load_midi_dir, read_midi, read_text, train_from_caches, write_file,
    write_synth_corpus, CorpusStats, PipelineError,
};
use slicevec::synth::SynthConfig;

#[derive(Parser, Debug)]
#[command(name = "slicevec", version, about = "Skip-gram embeddings of music slices")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, env = "SLICEVEC_CONFIG")]
    config: Option<PathBuf>,

    /// Log progress at info level.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Per-run overrides; each mirrors a config key.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    corpus_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus_cache: Option<PathBuf>,
    #[arg(long, global = true)]
    vocab_cache: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    loss_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    vocab_size: Option<usize>,
    #[arg(long, global = true)]
    dims: Option<usize>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    num_skips: Option<usize>,
    #[arg(long, global = true)]
    negative_samples: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<u64>,
    #[arg(long, global = true)]
    checkpoint_every: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    top_n: Option<usize>,
    #[arg(long, global = true)]
    exclude_identity: Option<bool>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        fn put_path(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<PathBuf>) {
            if let Some(v) = v {
                out.push((key, v.display().to_string()));
            }
        }
        let mut out = Vec::new();
        put_path(&mut out, "corpus-dir", &self.corpus_dir);
        put_path(&mut out, "corpus-cache", &self.corpus_cache);
        put_path(&mut out, "vocab-cache", &self.vocab_cache);
        put_path(&mut out, "embeddings", &self.embeddings);
        put_path(&mut out, "loss-csv", &self.loss_csv);
        put(&mut out, "vocab-size", &self.vocab_size);
        put(&mut out, "dims", &self.dims);
        put(&mut out, "window", &self.window);
        put(&mut out, "num-skips", &self.num_skips);
        put(&mut out, "negative-samples", &self.negative_samples);
        put(&mut out, "learning-rate", &self.learning_rate);
        put(&mut out, "batch-size", &self.batch_size);
        put(&mut out, "steps", &self.steps);
        put(&mut out, "checkpoint-every", &self.checkpoint_every);
        put(&mut out, "seed", &self.seed);
        put(&mut out, "top-n", &self.top_n);
        put(&mut out, "exclude-identity", &self.exclude_identity);
        put(&mut out, "threads", &self.threads);
        out
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Slice every MIDI file under corpus-dir and write the caches.
    Ingest,
    /// Write a synthetic corpus of diatonic progressions.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// `all`, or a comma-separated list such as `C,G,Am`.
        #[arg(long, default_value = "all")]
        keys: String,
        #[arg(long, default_value_t = 4)]
        pieces_per_key: usize,
        #[arg(long, default_value_t = 104)]
        beats: u64,
    },
    /// Train on the caches; writes the embedding file and loss trace.
    Train,
    /// Export an experiment matrix as CSV.
    Analyze {
        #[arg(value_enum)]
        which: Analysis,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "major")]
        mode: String,
        /// Tonic chords for `chords`, e.g. `C,G,F`; defaults to all twelve.
        #[arg(long)]
        tonics: Option<String>,
        /// Role pair for `analogy`, e.g. `I,V`.
        #[arg(long, default_value = "I,V")]
        pair: String,
        /// Key-labelled MIDI files for `keys`; defaults to corpus-dir.
        #[arg(long)]
        pieces: Option<PathBuf>,
    },
    /// Rewrite a piece by slice substitution.
    Generate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-beat report CSV.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Print corpus statistics from the caches.
    Stats,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Analysis {
    Chords,
    Keys,
    Analogy,
}

fn usage(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(ConfigError::Invalid(msg.into()))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let text = match &cli.config {
        Some(path) => Some(read_text(path).map_err(|e| usage(e.to_string()))?),
        None => None,
    };
    Ok(PipelineConfig::layered(text.as_deref(), cli.overrides.pairs())?)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, PipelineError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("bad {what} `{s}`"))))
        .collect()
}

fn roles_for(mode: Mode) -> Vec<FunctionalRole> {
    use FunctionalRole::*;
    match mode {
        Mode::Major => vec![I, V, IV, Vi, IIIb, IIb, MinorV],
        Mode::Minor => vec![MinorI, MinorV],
    }
}

fn analyze(
    cfg: &PipelineConfig,
    which: Analysis,
    out: &Path,
    mode: &str,
    tonics: Option<&str>,
    pair: &str,
    pieces: Option<&Path>,
) -> Result<(), PipelineError> {
    let mode: Mode = mode.parse().map_err(|_| usage(format!("bad mode `{mode}`")))?;
    let space = load_embeddings(&cfg.embeddings)?;
    let matrix = match which {
        Analysis::Chords => {
            let tonics: Vec<ChordSpec> = match tonics {
                Some(t) => parse_list(t, "chord")?,
                None => Key::circle(mode)
                    .iter()
                    .map(|k| FunctionalRole::realize(roles_for(mode)[0], *k))
                    .collect::<Result<_, _>>()?,
            };
            chord_distance_matrix(&space, &tonics, &roles_for(mode))?
        }
        Analysis::Keys => {
            let dir = pieces.unwrap_or(&cfg.corpus_dir);
            let report = load_midi_dir(dir)?;
            let labelled: Vec<_> = report
                .pieces
                .iter()
                .filter_map(|p| p.key().map(|k| (p.slices.clone(), k)))
                .collect();
            log::info!("{} of {} pieces carry a key label", labelled.len(), report.pieces.len());
            let ks = key_similarity_matrix(&space, &labelled, mode)?;
            println!("pieces used: {}, excluded: {}", ks.pieces_used, ks.excluded.len());
            ks.matrix
        }
        Analysis::Analogy => {
            let roles: Vec<FunctionalRole> = parse_list(pair, "role")?;
            let [from, to] = roles[..] else {
                return Err(usage("--pair takes exactly two roles"));
            };
            analogy_angle_matrix(&space, (from, to), mode)?
        }
    };
    write_file(out, matrix.to_csv())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    eprint!("# effective configuration\n{}", cfg.dump());
    match &cli.command {
        Command::Ingest => {
            let (report, stats) = ingest(&cfg)?;
            println!("{stats}");
            println!("files skipped: {}", report.skipped.len());
        }
        Command::Synth {
            out,
            keys,
            pieces_per_key,
            beats,
        } => {
            let keys = match keys.trim() {
                "all" => None,
                list => Some(parse_list::<Key>(list, "key")?),
            };
            let synth = SynthConfig {
                keys,
                pieces_per_key: *pieces_per_key,
                beats_per_piece: *beats,
                seed: cfg.training.seed,
                ..SynthConfig::default()
            };
            let written = write_synth_corpus(out, &synth)?;
            println!("wrote {} pieces to {}", written.len(), out.display());
        }
        Command::Train => {
            let (space, trace) = train_from_caches(&cfg)?;
            if let Some((step, loss)) = trace.checkpoints.last() {
                println!("step {step}: average loss {loss:.6}");
            }
            println!(
                "wrote {} ({} tokens x {} dims) and {}",
                cfg.embeddings.display(),
                space.len(),
                space.dims(),
                cfg.loss_csv.display()
            );
        }
        Command::Analyze {
            which,
            out,
            mode,
            tonics,
            pair,
            pieces,
        } => analyze(&cfg, *which, out, mode, tonics.as_deref(), pair, pieces.as_deref())?,
        Command::Generate {
            input,
            output,
            diagnostics,
        } => {
            let space = load_embeddings(&cfg.embeddings)?;
            let piece = read_midi(input)?;
            let (subs, diags) = rewrite_piece(&piece_slices(&piece), &space, &cfg.generator)?;
            write_file(output, emit_midi(&piece, &subs)?)?;
            let changed = diags.iter().filter(|d| d.original != d.substitute).count();
            println!("{changed} of {} beats substituted; wrote {}", diags.len(), output.display());
            if let Some(path) = diagnostics {
                write_file(path, diagnostics_csv(&diags, cfg.generator.top_n))?;
            }
        }
        Command::Stats => {
            let (pieces, vocab) = load_caches(&cfg)?;
            println!("{}", CorpusStats::compute(&pieces, &vocab));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
