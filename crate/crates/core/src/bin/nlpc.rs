use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlpc::bitstream::{read_bitstream, write_bitstream};
use nlpc::codec::{adpcm_decode, adpcm_encode, CodecConfig, DEFAULT_ORDER};
use nlpc::corpus::{desk_corpus, load_manifest, write_desk_corpus};
use nlpc::dsp::{segsnr, DEFAULT_FRAME_LEN};
use nlpc::experiment::{
    run_eval, run_sweep, sweep_csv, EvalSpec, PredictorSetup, SweepAxis, SweepRange, SweepSpec,
};
use nlpc::predictor::{fit_codec_predictor, CodecPredictor, PredictorConfig, PredictorKind};
use nlpc::signal::{load_wav, save_wav, Signal};
use nlpc::{Error, Result, DEFAULT_SEED};

const SEED_ENV: &str = "NLPC_SEED";

#[derive(Parser)]
#[command(name = "nlpc", version, about = "Nonlinear-predictive ADPCM speech codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a predictor to a WAV file and encode it.
    Encode(EncodeArgs),
    /// Decode a bitstream back to WAV.
    Decode { input: PathBuf, output: PathBuf },
    /// Fit a predictor to a WAV file and store it for later encoding.
    Train(TrainArgs),
    /// SEGSNR table over a corpus for a grid of predictors, deltas and bit depths.
    Eval(EvalArgs),
    /// SEGSNR over a corpus while varying one predictor parameter.
    Sweep(SweepArgs),
    /// Write the synthetic desk corpus (WAV files and manifest) to a directory.
    GenCorpus { dir: PathBuf },
}

#[derive(Args)]
struct PredictorArgs {
    /// Predictor spec: `lpc`, `rbf1`, `rbf2`, optionally with `:key=value,...` options.
    #[arg(long, default_value = "lpc")]
    predictor: String,
    /// Committee of `+`-joined predictor specs; overrides --predictor.
    #[arg(long)]
    committee: Option<String>,
    /// Prediction order L.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long)]
    neurons: Option<usize>,
    /// RBF-1 spread.
    #[arg(long)]
    spread: Option<f64>,
    /// RBF-2 EM epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Append first differences to the predictor input.
    #[arg(long)]
    delta: bool,
    /// Relative power of the white noise added to training inputs (0 trains on the clean signal).
    #[arg(long)]
    input_noise: Option<f64>,
    /// Random seed (the NLPC_SEED environment variable takes precedence).
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct EncodeArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    predictor: PredictorArgs,
    /// Bits per sample (2..5).
    #[arg(long, default_value_t = 4)]
    bits: u8,
    /// Use a predictor saved by `train` instead of fitting one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Print `segsnr_mean_db,segsnr_std_db,rate_bps`.
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct TrainArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    predictor: PredictorArgs,
}

#[derive(Args)]
struct CorpusArgs {
    /// Manifest listing WAV files; the built-in desk corpus is used when absent.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FRAME_LEN)]
    frame_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// RBF-1 (spread 0.22, 0.4) and RBF-2.
    Single,
    /// RBF-1 + RBF-2 committees.
    Committee,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaMode {
    Off,
    On,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, conflicts_with = "predictor")]
    preset: Option<Preset>,
    /// Predictor spec, repeatable; see `encode --help`.
    #[arg(long)]
    predictor: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [2u8, 3, 4, 5])]
    bits: Vec<u8>,
    #[arg(long, value_enum, default_value = "both")]
    delta: DeltaMode,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Spread,
    Neurons,
    Order,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum)]
    axis: Axis,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    range: Option<String>,
    /// Base predictor spec; defaults to rbf1 with 50 neurons (spread), rbf1 at spread 0.22
    /// (neurons) or lpc (order).
    #[arg(long)]
    predictor: Option<String>,
    #[arg(long, default_value_t = 4)]
    bits: u8,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long)]
    delta: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

impl PredictorArgs {
    fn configs(&self) -> Result<Vec<PredictorConfig>> {
        let spec = self.committee.as_deref().unwrap_or(&self.predictor);
        let setup = PredictorSetup::parse(spec, self.order)?;
        Ok(setup
            .members
            .into_iter()
            .map(|mut m| {
                match &mut m.kind {
                    PredictorKind::Lpc => {}
                    PredictorKind::Rbf1 { neurons, spread, .. } => {
                        *neurons = self.neurons.unwrap_or(*neurons);
                        *spread = self.spread.unwrap_or(*spread);
                    }
                    PredictorKind::Rbf2(c) => {
                        c.neurons = self.neurons.unwrap_or(c.neurons);
                        c.em_epochs = self.epochs.unwrap_or(c.em_epochs);
                    }
                }
                if self.delta {
                    m = m.with_delta(true);
                }
                if let Some(noise) = self.input_noise {
                    m = m.with_input_noise(noise);
                }
                m
            })
            .collect())
    }

    fn fit(&self, signal: &Signal) -> Result<CodecPredictor> {
        fit_codec_predictor(&self.configs()?, signal, resolve_seed(self.seed)?)
    }
}

fn load_corpus(manifest: Option<&Path>) -> Result<Vec<(String, Signal)>> {
    match manifest {
        Some(p) => load_manifest(p),
        None => desk_corpus(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let signal = load_wav(&args.input)?;
    let predictor = match &args.model {
        Some(path) => CodecPredictor::from_payload(&fs::read(path)?)?,
        None => args.predictor.fit(&signal)?,
    };
    let config = CodecConfig::new(args.bits);
    let encoded = adpcm_encode(&signal, &predictor, &config)?;
    write_bitstream(&args.output, &encoded.bitstream)?;
    if args.report {
        let r = segsnr(&signal, &encoded.reconstructed, DEFAULT_FRAME_LEN)?;
        println!("segsnr_mean_db,segsnr_std_db,rate_bps");
        println!("{:.6},{:.6},{}", r.mean_db, r.std_db, config.rate_bps(signal.sample_rate_hz()));
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let mut spec = match args.preset {
        Some(Preset::Single) => EvalSpec::single_predictor_table(args.order),
        Some(Preset::Committee) => EvalSpec::committee_table(args.order),
        None if args.predictor.is_empty() => {
            return Err(Error::InvalidArgument("give --preset or at least one --predictor".into()))
        }
        None => EvalSpec::new(
            args.predictor.iter().map(|p| PredictorSetup::parse(p, args.order)).collect::<Result<_>>()?,
        ),
    };
    spec.deltas = match args.delta {
        DeltaMode::Off => vec![false],
        DeltaMode::On => vec![true],
        DeltaMode::Both => vec![false, true],
    };
    spec.nq_bits = args.bits.clone();
    spec.frame_len = args.corpus.frame_len;
    spec.seed = resolve_seed(args.seed)?;
    let corpus = load_corpus(args.corpus.manifest.as_deref())?;
    emit(args.corpus.out.as_deref(), &run_eval(&corpus, &spec)?.to_csv())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let axis = match args.axis {
        Axis::Spread => SweepAxis::Spread,
        Axis::Neurons => SweepAxis::Neurons,
        Axis::Order => SweepAxis::Order,
    };
    let default_predictor = match axis {
        SweepAxis::Spread => "rbf1:neurons=50",
        SweepAxis::Neurons => "rbf1:spread=0.22",
        SweepAxis::Order => "lpc",
    };
    let setup = PredictorSetup::parse(args.predictor.as_deref().unwrap_or(default_predictor), args.order)?;
    let [base] = setup.members[..] else {
        return Err(Error::InvalidArgument("sweeps take a single predictor, not a committee".into()));
    };
    let range = match &args.range {
        Some(r) => r.parse::<SweepRange>()?,
        None => axis.default_range(),
    };
    let spec = SweepSpec {
        axis,
        range,
        base: base.with_delta(args.delta || base.augmented),
        nq_bits: args.bits,
        frame_len: args.corpus.frame_len,
        seed: resolve_seed(args.seed)?,
    };
    let corpus = load_corpus(args.corpus.manifest.as_deref())?;
    emit(args.corpus.out.as_deref(), &sweep_csv(&run_sweep(&corpus, &spec)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode(args) => encode(&args),
        Command::Decode { input, output } => save_wav(output, &adpcm_decode(&read_bitstream(input)?)?),
        Command::Train(args) => {
            let signal = load_wav(&args.input)?;
            let predictor = args.predictor.fit(&signal)?;
            fs::write(&args.output, predictor.to_payload()?)?;
            Ok(())
        }
        Command::Eval(args) => eval(&args),
        Command::Sweep(args) => sweep(&args),
        Command::GenCorpus { dir } => {
            fs::create_dir_all(&dir)?;
            let manifest = write_desk_corpus(&dir)?;
            println!("{}", manifest.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
