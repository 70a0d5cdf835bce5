mod args;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use specklepuf::metrics::{
    protocol_success_curve, run_campaign, success_curve, Campaign, CampaignKind, CampaignReports,
    DistanceReport,
};
use specklepuf::protocol::{self, EnrollContext, EnrollmentRecord};
use specklepuf::rng::{self, TestParams};
use specklepuf::seed::{derive_rng, mix_seed};
use specklepuf::service::{Server, Service, ServiceConfig};
use specklepuf::{
    AuthOutcome, Bch, BitKey, BitStream, Challenge, Dims, HashConfig, PixelMask, SpeckleImage,
    SvdParams, TestId, TokenKind, TokenModel,
};

use args::*;

type Failure = Box<dyn std::error::Error>;

const EXIT_REJECT: u8 = 1;
const EXIT_ERROR: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key}={value}");
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Token(c) => token(c),
        Command::Challenge(c) => challenge(c),
        Command::Capture(a) => capture(a),
        Command::Enroll(a) => enroll(a),
        Command::Auth(a) => auth(a),
        Command::Eval(c) => eval(c),
        Command::Rng(c) => rng_command(c),
        Command::Serve(a) => serve(a),
    }
}

fn load_challenge(path: &Path) -> Result<Challenge, Failure> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Challenge::from_bytes(&bytes).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn load_token(path: &Path) -> Result<TokenModel, Failure> {
    Ok(TokenModel::load(path).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn hash_config(args: &HashArgs, m: usize) -> HashConfig {
    match args.hash {
        HashArg::Rbm => HashConfig::rbm(m, args.hash_seed),
        HashArg::Svd => HashConfig::svd(
            SvdParams {
                m,
                ..SvdParams::default()
            },
            args.hash_seed,
        ),
    }
}

fn token(command: TokenCommand) -> Result<ExitCode, Failure> {
    match command {
        TokenCommand::New {
            seed,
            kind,
            grid,
            size,
            decorrelation_pm,
            out,
        } => {
            let kind = TokenKind::from(kind);
            let token = TokenModel::new(
                seed,
                kind,
                Dims::new(grid, grid)?,
                Dims::new(size, size)?,
                decorrelation_pm.unwrap_or(kind.default_decorrelation_pm()),
            )?;
            let id = hex::encode(token.token_id());
            let path = out.unwrap_or_else(|| PathBuf::from(format!("{id}.puft")));
            token.save(&path)?;
            kv("token_id", id);
            kv("path", path.display());
        }
        TokenCommand::Show { token } => {
            let t = load_token(&token)?;
            kv("token_id", hex::encode(t.token_id()));
            kv("kind", t.kind().name());
            kv("seed", t.seed());
            kv("grid", t.grid_dims());
            kv("image", t.out_dims());
            kv("decorrelation_pm", t.decorrelation_pm());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn challenge(command: ChallengeCommand) -> Result<ExitCode, Failure> {
    let ChallengeCommand::Gen {
        out,
        seed,
        grid,
        density,
        wavelength,
    } = command;
    let challenge = match wavelength {
        Some(nm) => Challenge::wavelength(nm)?,
        None => {
            if !(0.0..=1.0).contains(&density) {
                return Err("density must lie in [0, 1]".into());
            }
            let mut rng = derive_rng("cli-challenge", &[seed]);
            Challenge::PixelPattern(PixelMask::random(Dims::new(grid, grid)?, density, &mut rng))
        }
    };
    fs::write(&out, challenge.to_bytes())?;
    match &challenge {
        Challenge::PixelPattern(mask) => {
            kv("kind", "pattern");
            kv("grid", mask.dims());
            kv("pixels_on", mask.count_on());
        }
        Challenge::Wavelength(nm) => {
            kv("kind", "wavelength");
            kv("wavelength_nm", nm);
        }
    }
    kv("path", out.display());
    Ok(ExitCode::SUCCESS)
}

fn capture(a: CaptureArgs) -> Result<ExitCode, Failure> {
    let token = load_token(&a.token)?;
    let challenge = load_challenge(&a.challenge)?;
    let image = token.respond(&challenge, &a.noise.params())?;
    fs::write(&a.out, image.to_pgm())?;
    kv("image", image.dims());
    kv("mean", mean(&image.to_f64()));
    kv("path", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn enroll(a: EnrollArgs) -> Result<ExitCode, Failure> {
    let token = load_token(&a.token)?;
    let challenge = load_challenge(&a.challenge)?;
    let code = Bch::new(a.bch_m, a.bch_t)?;
    let hash = hash_config(&a.hash, code.n());
    let image = token.respond(&challenge, &a.noise.params())?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let context = EnrollContext {
        token_id: token.token_id(),
        challenge,
    };
    let (_, record) = protocol::enroll(&image, &hash, &code, seed, context)?;
    let path = a.out.unwrap_or_else(|| {
        a.token
            .with_file_name(format!("{}.pufr", record.record_id_hex()))
    });
    record.save(&path)?;
    kv("record_id", record.record_id_hex());
    kv("token_id", hex::encode(record.token_id));
    kv(
        "code",
        format!("bch({},{},{})", code.n(), code.ell(), code.t()),
    );
    kv("hash", record.helper.algorithm());
    kv("key_digest", hex::encode(record.key_digest));
    kv("path", path.display());
    Ok(ExitCode::SUCCESS)
}

fn auth(a: AuthArgs) -> Result<ExitCode, Failure> {
    let record =
        EnrollmentRecord::load(&a.record).map_err(|e| format!("{}: {e}", a.record.display()))?;
    let token_path = a.token.unwrap_or_else(|| {
        a.record
            .with_file_name(format!("{}.puft", hex::encode(record.token_id)))
    });
    let token = load_token(&token_path)?;
    if token.token_id() != record.token_id {
        return Err(format!("{} is not the enrolled token", token_path.display()).into());
    }
    let image = token.respond(&record.challenge, &a.noise.params())?;
    let (accepted, corrected) = match protocol::authenticate(&image, &record)? {
        AuthOutcome::Reproduced { key, corrected } => (protocol::verify(&key, &record), corrected),
        AuthOutcome::Rejected => (false, 0),
    };
    kv("record_id", record.record_id_hex());
    kv("accepted", accepted);
    kv("corrected", corrected);
    Ok(if accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REJECT)
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn write_report(dir: &Path, name: &str, report: &DistanceReport) -> Result<(), Failure> {
    fs::write(
        dir.join(format!("{name}_values.csv")),
        report.values_table(),
    )?;
    fs::write(
        dir.join(format!("{name}_histogram.csv")),
        report.histogram_table(),
    )?;
    kv(&format!("{name}_mean"), format!("{:.6}", report.mean));
    kv(&format!("{name}_std"), format!("{:.6}", report.std));
    Ok(())
}

fn campaign_output(dir: &Path, reports: &CampaignReports) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    kv("campaign", reports.kind.name());
    kv("pairs", reports.pairs);
    write_report(dir, "euclidean", &reports.euclidean)?;
    write_report(dir, "correlation", &reports.correlation)?;
    if let Some(h) = &reports.hamming {
        write_report(dir, "hamming", h)?;
    }
    kv("report", dir.display());
    Ok(())
}

fn campaign_for(
    kind: CampaignKind,
    token: &TokenModel,
    seeds: Vec<u64>,
    challenges: Vec<Challenge>,
    e: &EvalArgs,
    repeats: usize,
) -> Campaign {
    let mut c = Campaign::new(
        kind,
        token.kind(),
        seeds,
        challenges,
        e.noise.params(),
        repeats,
    )
    .with_dims(token.grid_dims(), token.out_dims());
    c.decorrelation_pm = Some(token.decorrelation_pm());
    c
}

fn eval(command: EvalCommand) -> Result<ExitCode, Failure> {
    match command {
        EvalCommand::Robustness {
            token,
            challenge,
            repeats,
            common,
        } => {
            let t = load_token(&token)?;
            let c = load_challenge(&challenge)?;
            let campaign = campaign_for(
                CampaignKind::Robustness,
                &t,
                vec![t.seed()],
                vec![c],
                &common,
                repeats,
            );
            let reports = run_campaign(&campaign, Some(&hash_config(&common.hash, 255)))?;
            campaign_output(&common.out, &reports)?;
        }
        EvalCommand::Unpredictability {
            token,
            challenges,
            challenge_seed,
            density,
            common,
        } => {
            let t = load_token(&token)?;
            let list = (0..challenges as u64)
                .map(|i| {
                    let mut rng = derive_rng("cli-eval-challenge", &[challenge_seed, i]);
                    Challenge::PixelPattern(PixelMask::random(t.grid_dims(), density, &mut rng))
                })
                .collect();
            let campaign = campaign_for(
                CampaignKind::Unpredictability,
                &t,
                vec![t.seed()],
                list,
                &common,
                1,
            );
            let reports = run_campaign(&campaign, Some(&hash_config(&common.hash, 255)))?;
            campaign_output(&common.out, &reports)?;
        }
        EvalCommand::Unclonability {
            challenge,
            tokens,
            seed_base,
            kind,
            common,
        } => {
            let c = load_challenge(&challenge)?;
            let grid = match &c {
                Challenge::PixelPattern(mask) => mask.dims(),
                Challenge::Wavelength(_) => Dims::new(16, 16)?,
            };
            let kind = TokenKind::from(kind);
            let reference = TokenModel::new(
                seed_base,
                kind,
                grid,
                Dims::new(128, 128)?,
                kind.default_decorrelation_pm(),
            )?;
            let seeds = (0..tokens as u64).map(|i| seed_base + i).collect();
            let campaign = campaign_for(
                CampaignKind::Unclonability,
                &reference,
                seeds,
                vec![c],
                &common,
                1,
            );
            let reports = run_campaign(&campaign, Some(&hash_config(&common.hash, 255)))?;
            campaign_output(&common.out, &reports)?;
        }
        EvalCommand::SuccessCurve {
            token,
            challenge,
            enroll,
            auth,
            t_max,
            protocol,
            common,
        } => {
            success(token, challenge, enroll, auth, t_max, protocol, common)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn success(
    token: PathBuf,
    challenge: PathBuf,
    enroll: usize,
    auth: usize,
    t_max: usize,
    through_protocol: bool,
    common: EvalArgs,
) -> Result<(), Failure> {
    if enroll == 0 || auth == 0 {
        return Err("need at least one enrollment and one authentication capture".into());
    }
    let t = load_token(&token)?;
    let c = load_challenge(&challenge)?;
    let base = common.noise.params();
    let images = (0..(enroll + auth) as u64)
        .map(|i| {
            let mut noise = base;
            noise.noise_seed = mix_seed(base.noise_seed, i);
            t.respond(&c, &noise)
        })
        .collect::<Result<Vec<SpeckleImage>, _>>()?;
    let (_, helper) = hash_config(&common.hash, 255).enroll(&images[0])?;
    let keys = images
        .iter()
        .map(|im| helper.hash(im))
        .collect::<Result<Vec<BitKey>, _>>()?;
    let (e, a) = keys.split_at(enroll);
    let ts: Vec<usize> = (0..=t_max).collect();
    let curve = if through_protocol {
        protocol_success_curve(e, a, 8, &ts, common.hash.hash_seed)?
    } else {
        success_curve(e, a, &ts)?
    };
    fs::create_dir_all(&common.out)?;
    fs::write(common.out.join("success_curve.csv"), curve.table())?;
    let distances: Vec<f64> = e
        .iter()
        .flat_map(|x| {
            a.iter()
                .map(move |y| x.hamming(y).map(|d| d as f64 / 255.0))
        })
        .collect::<Result<_, _>>()?;
    let hd = mean(&distances);
    let sd =
        (distances.iter().map(|d| (d - hd).powi(2)).sum::<f64>() / distances.len() as f64).sqrt();
    kv("pairs", curve.pairs);
    kv("hamming_mean", format!("{hd:.6}"));
    kv("hamming_std", format!("{sd:.6}"));
    match curve.threshold(0.999) {
        Some(t) => kv("t_999", t),
        None => kv("t_999", "none"),
    }
    if let Some(p) = curve.probability(31) {
        kv("p_at_31", format!("{p:.6}"));
    }
    kv("report", common.out.display());
    Ok(())
}

fn rng_command(command: RngCommand) -> Result<ExitCode, Failure> {
    match command {
        RngCommand::Extract {
            token,
            out,
            images,
            bits_per_image,
            seed,
            noise,
        } => {
            let t = load_token(&token)?;
            let base = noise.params();
            let captures = (0..images as u64)
                .map(|i| {
                    let mut rng = derive_rng("cli-rng-challenge", &[seed, i]);
                    let c =
                        Challenge::PixelPattern(PixelMask::random(t.grid_dims(), 0.5, &mut rng));
                    let mut n = base;
                    n.noise_seed = mix_seed(base.noise_seed, i);
                    t.respond(&c, &n)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let per = bits_per_image.unwrap_or(rng::max_bits_per_image(t.out_dims()));
            let stream = rng::extract_bits(&captures, seed, per)?;
            fs::write(&out, stream.to_ascii())?;
            let ones = stream.bits().iter().filter(|&&b| b == 1).count();
            kv("bits", stream.len());
            kv(
                "ones_fraction",
                format!("{:.6}", ones as f64 / stream.len() as f64),
            );
            kv("path", out.display());
            Ok(ExitCode::SUCCESS)
        }
        RngCommand::Test {
            input,
            stream_len,
            out,
        } => {
            let text = fs::read_to_string(&input)?;
            let stream = BitStream::from_ascii(&text)?;
            let streams = stream.chunks(stream_len)?;
            let report = rng::suite_report(&streams, &TestId::IMPLEMENTED, &TestParams::default())?;
            if let Some(path) = out {
                fs::write(path, report.table())?;
            }
            kv("streams", report.streams);
            let mut stdout = std::io::stdout().lock();
            for row in &report.rows {
                writeln!(
                    stdout,
                    "test={} passed={} total={} proportion={:.4} uniformity_p={:.6} ok={}",
                    row.name,
                    row.passed,
                    row.total,
                    row.proportion,
                    row.uniformity_p,
                    row.ok()
                )?;
            }
            drop(stdout);
            kv("all_ok", report.all_ok());
            Ok(if report.all_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_REJECT)
            })
        }
    }
}

fn serve(a: ServeArgs) -> Result<ExitCode, Failure> {
    let mut config = ServiceConfig::new(&a.store);
    config.bch_m = a.bch_m;
    config.bch_t = a.bch_t;
    let service = Service::new(config)?;
    for path in &a.token {
        let id = service.add_token(load_token(path)?);
        kv("token_id", hex::encode(id));
    }
    let server = Server::bind(a.listen.as_str(), service)?;
    kv("listen", server.local_addr()?);
    std::io::stdout().flush()?;
    server.run()?;
    Ok(ExitCode::SUCCESS)
}
