use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use specklepuf::{NoiseParams, TokenKind};

#[derive(Debug, Parser)]
#[command(name = "specklepuf", version, about = "Simulated optical PUF toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create or inspect token descriptors.
    #[command(subcommand)]
    Token(TokenCommand),
    /// Create challenge files.
    #[command(subcommand)]
    Challenge(ChallengeCommand),
    /// Render one response as a PGM image.
    Capture(CaptureArgs),
    /// Enroll a token under a challenge and write the record.
    Enroll(EnrollArgs),
    /// Authenticate a fresh capture against a record. Exit 1 on reject.
    Auth(AuthArgs),
    /// Evaluation campaigns.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Random bit extraction and statistical tests.
    #[command(subcommand)]
    Rng(RngCommand),
    /// Run the TCP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Diffuser,
    Pof,
}

impl From<KindArg> for TokenKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Diffuser => TokenKind::Diffuser,
            KindArg::Pof => TokenKind::Pof,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum HashArg {
    Rbm,
    Svd,
}

#[derive(Debug, Subcommand)]
pub enum TokenCommand {
    New {
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "diffuser")]
        kind: KindArg,
        /// Side of the square SLM pixel grid.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Side of the square camera image.
        #[arg(long, default_value_t = 128)]
        size: usize,
        /// Spectral decorrelation length in pm; kind default when absent.
        #[arg(long)]
        decorrelation_pm: Option<f64>,
        /// Output path; `<token_id>.puft` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Show {
        #[arg(long)]
        token: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChallengeCommand {
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Side of the square pixel grid.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Fraction of pixels switched on.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Wavelength challenge in nm instead of a pixel pattern.
        #[arg(long, conflicts_with_all = ["density"])]
        wavelength: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Intensity noise, as a fraction of full scale.
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,
    /// Phase drift in radians.
    #[arg(long, default_value_t = 0.05)]
    pub phase: f64,
    /// Temperature offset in degrees C.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_t: f64,
    #[arg(long, default_value_t = 1)]
    pub noise_seed: u64,
}

impl NoiseArgs {
    pub fn params(&self) -> NoiseParams {
        NoiseParams {
            intensity_sigma: self.noise,
            phase_drift_sigma: self.phase,
            ..NoiseParams::none()
        }
        .with_delta_t(self.delta_t)
        .with_seed(self.noise_seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct HashArgs {
    #[arg(long, value_enum, default_value = "rbm")]
    pub hash: HashArg,
    /// Hash helper seed.
    #[arg(long, default_value_t = 0)]
    pub hash_seed: u64,
}

#[derive(Debug, Args)]
pub struct CaptureArgs {
    #[arg(long)]
    pub token: PathBuf,
    #[arg(long)]
    pub challenge: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    #[arg(long)]
    pub token: PathBuf,
    #[arg(long)]
    pub challenge: PathBuf,
    /// Output path; `<record_id>.pufr` next to the token when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hash: HashArgs,
    #[arg(long, default_value_t = 8)]
    pub bch_m: u32,
    #[arg(long, default_value_t = 31)]
    pub bch_t: usize,
    /// Seed for the committed secret; operating-system entropy when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct AuthArgs {
    #[arg(long)]
    pub record: PathBuf,
    /// Token file; `<token_id>.puft` next to the record when absent.
    #[arg(long)]
    pub token: Option<PathBuf>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Repeated captures of one token and challenge.
    Robustness {
        #[arg(long)]
        token: PathBuf,
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long, default_value_t = 60)]
        repeats: usize,
        #[command(flatten)]
        common: EvalArgs,
    },
    /// One token under many random challenges.
    Unpredictability {
        #[arg(long)]
        token: PathBuf,
        #[arg(long, default_value_t = 60)]
        challenges: usize,
        #[arg(long, default_value_t = 0)]
        challenge_seed: u64,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[command(flatten)]
        common: EvalArgs,
    },
    /// Many tokens under one challenge.
    Unclonability {
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long, default_value_t = 60)]
        tokens: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long, value_enum, default_value = "diffuser")]
        kind: KindArg,
        #[command(flatten)]
        common: EvalArgs,
    },
    /// Key agreement probability against the correctable error count.
    SuccessCurve {
        #[arg(long)]
        token: PathBuf,
        #[arg(long)]
        challenge: PathBuf,
        #[arg(long, default_value_t = 20)]
        enroll: usize,
        #[arg(long, default_value_t = 60)]
        auth: usize,
        #[arg(long, default_value_t = 60)]
        t_max: usize,
        /// Count agreement through real BCH commitments, not distances.
        #[arg(long)]
        protocol: bool,
        #[command(flatten)]
        common: EvalArgs,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hash: HashArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Subcommand)]
pub enum RngCommand {
    /// Extract bits from random-challenge captures into a text file of 0/1.
    Extract {
        #[arg(long)]
        token: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        images: usize,
        /// Bits per image; the largest the image allows when absent.
        #[arg(long)]
        bits_per_image: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        noise: NoiseArgs,
    },
    /// Run the statistical test suite over fixed-length streams of a file.
    Test {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        stream_len: usize,
        /// Also write the result table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "SPECKLEPUF_LISTEN", default_value = "127.0.0.1:7878")]
    pub listen: String,
    /// Token files to host; the first also serves RANDOM requests.
    #[arg(long, required = true, num_args = 1..)]
    pub token: Vec<PathBuf>,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub bch_m: u32,
    #[arg(long, default_value_t = 31)]
    pub bch_t: usize,
}
