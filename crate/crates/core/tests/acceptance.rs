//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the single test fails if any criterion fails. Criteria run one after
//! another so the timing checks are not disturbed by parallel work.

use std::time::{Duration, Instant};

use rand::Rng;
use specklepuf::bch::DecodeOutcome;
use specklepuf::metrics::{
    cross_correlation, hamming, overlap, protocol_success_curve, run_campaign, success_curve,
    Binning, Campaign, CampaignKind, DistanceReport,
};
use specklepuf::protocol::{
    self, authenticate_key, commit, frame_long_key, long_key_code, AuthOutcome, EnrollContext,
};
use specklepuf::rng::{extract_bits, suite_report, TestId, TestParams};
use specklepuf::seed::derive_rng;
use specklepuf::service::{Client, Server, Service, ServiceConfig};
use specklepuf::{
    Bch, BitKey, Challenge, HashConfig, NoiseParams, PixelMask, SpeckleImage, SvdParams, TokenKind,
    TokenModel,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_challenge(tag: &str, seed: u64) -> Challenge {
    let grid = TokenModel::with_defaults(0, TokenKind::Diffuser).grid_dims();
    let mut rng = derive_rng(tag, &[seed]);
    Challenge::PixelPattern(PixelMask::random(grid, 0.5, &mut rng))
}

/// Every error pattern of weight at most `t` on `n` bits, as position lists.
fn error_patterns(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..t {
        let mut next = Vec::new();
        for p in &frontier {
            let start = p.last().map_or(0, |&l: &usize| l + 1);
            for i in start..n {
                let mut q: Vec<usize> = p.clone();
                q.push(i);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn message_bits(value: u64, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((value >> i) & 1) as u8).collect()
}

fn decodes_to(code: &Bch, word: &[u8], message: &[u8]) -> bool {
    matches!(code.decode(word), Ok(DecodeOutcome::Corrected { message: m, .. }) if m == message)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut failures = 0usize;
    let mut checked = 0usize;
    // Length 15: every codeword against every pattern.
    for t in 1..=3 {
        let code = Bch::new(4, t).unwrap();
        let patterns = error_patterns(code.n(), t);
        for v in 0..1u64 << code.ell() {
            let msg = message_bits(v, code.ell());
            let cw = code.encode(&msg).unwrap();
            for p in &patterns {
                let mut w = cw.clone();
                p.iter().for_each(|&i| w[i] ^= 1);
                failures += usize::from(!decodes_to(&code, &w, &msg));
                checked += 1;
            }
        }
    }
    // Length 31: the decoder sees the received word only through its
    // syndromes, and syndromes are linear with every codeword in the kernel.
    // So decode(c + e) = c for all c, e exactly when every codeword has zero
    // syndromes and every pattern e decodes to the zero word. Both are
    // checked in full; codewords through the generator basis plus full
    // enumeration where it is small, with a random end-to-end sample on top.
    let mut rng = derive_rng("acceptance-bch", &[31]);
    for t in 1..=3 {
        let code = Bch::new(5, t).unwrap();
        let zero = vec![0u8; code.ell()];
        for p in error_patterns(code.n(), t) {
            let mut w = vec![0u8; code.n()];
            p.iter().for_each(|&i| w[i] ^= 1);
            failures += usize::from(!decodes_to(&code, &w, &zero));
            checked += 1;
        }
        for i in 0..code.ell() {
            let mut msg = zero.clone();
            msg[i] = 1;
            let cw = code.encode(&msg).unwrap();
            failures += usize::from(!code.is_codeword(&cw).unwrap());
        }
        if code.ell() <= 16 {
            for v in 0..1u64 << code.ell() {
                let cw = code.encode(&message_bits(v, code.ell())).unwrap();
                failures += usize::from(!code.is_codeword(&cw).unwrap());
            }
        }
        for _ in 0..20_000 {
            let msg: Vec<u8> = (0..code.ell()).map(|_| rng.random_range(0..2)).collect();
            let mut w = code.encode(&msg).unwrap();
            let weight = rng.random_range(0..=t);
            for i in rand::seq::index::sample(&mut rng, code.n(), weight) {
                w[i] ^= 1;
            }
            failures += usize::from(!decodes_to(&code, &w, &msg));
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 60.0,
        format!("decodes={checked} failures={failures} seconds={secs:.2}"),
    )
}

fn criterion_2() -> Outcome {
    let code = Bch::new(4, 3).unwrap();
    assert_eq!((code.n(), code.ell()), (15, 5));
    let patterns = error_patterns(15, 3);
    let mut checked = 0usize;
    let mut failures = 0usize;
    // Every 15-bit enrollment key, each committed with its own secret.
    for v in 0..1u64 << 15 {
        let key = BitKey::new(message_bits(v, 15)).unwrap();
        let offset = commit(&key, &code, v).unwrap();
        let record = protocol_record(&key, &offset, &code);
        for p in &patterns {
            let mut noisy = key.clone();
            p.iter().for_each(|&i| noisy.flip(i));
            let ok = matches!(
                authenticate_key(&noisy, &record).unwrap(),
                AuthOutcome::Reproduced { key: k, .. } if k == key
            );
            failures += usize::from(!ok);
            checked += 1;
        }
    }
    outcome(
        failures == 0,
        format!("keys=32768 perturbations={checked} failures={failures}"),
    )
}

/// A record holding only what `authenticate_key` reads.
fn protocol_record(key: &BitKey, offset: &BitKey, code: &Bch) -> protocol::EnrollmentRecord {
    let dims = specklepuf::Dims::new(1, 32).unwrap();
    protocol::EnrollmentRecord {
        record_id: [0; 16],
        token_id: [0; 16],
        challenge: Challenge::PixelPattern(PixelMask::full(specklepuf::Dims::new(1, 1).unwrap())),
        helper: HashConfig::rbm(15, 0).helper(dims).unwrap(),
        code: code.clone(),
        code_offset: offset.clone(),
        digest_algorithm: protocol::DIGEST_SHA256,
        key_digest: protocol::key_digest(key),
    }
}

/// Noise tuned so RBM hash distances at M = 255 sit near 5.4% +- 1.5%.
fn calibrated_noise() -> NoiseParams {
    NoiseParams {
        intensity_sigma: 0.005,
        phase_drift_sigma: 0.082,
        ..NoiseParams::none()
    }
    .with_vibration(0.02, 0.3)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (groups, auths) = (20u64, 60u64);
    let ts: Vec<usize> = (0..=60).collect();
    let noise = calibrated_noise();
    let mut fractions = Vec::new();
    let mut pooled = vec![0.0; ts.len()];
    let mut protocol_ok = 0.0;
    let mut distance_ok = 0.0;
    for g in 0..groups {
        let token = TokenModel::with_defaults(1000 + g, TokenKind::Diffuser);
        let challenge = random_challenge("acceptance-c3", g);
        let enroll_image = token
            .respond(&challenge, &noise.with_seed(g * 10_000))
            .unwrap();
        let (key, helper) = HashConfig::rbm(255, g).enroll(&enroll_image).unwrap();
        let auth: Vec<BitKey> = (1..=auths)
            .map(|a| {
                let im = token
                    .respond(&challenge, &noise.with_seed(g * 10_000 + a))
                    .unwrap();
                helper.hash(&im).unwrap()
            })
            .collect();
        fractions.extend(
            auth.iter()
                .map(|k| hamming(&key, k).unwrap() as f64 / 255.0),
        );
        let curve = success_curve(std::slice::from_ref(&key), &auth, &ts).unwrap();
        for (acc, (_, p)) in pooled.iter_mut().zip(&curve.points) {
            *acc += p / groups as f64;
        }
        let proto = protocol_success_curve(std::slice::from_ref(&key), &auth, 8, &[31], g).unwrap();
        protocol_ok += proto.points[0].1 / groups as f64;
        distance_ok += curve.probability(31).unwrap() / groups as f64;
    }
    let report = DistanceReport::new(fractions, &Binning::Hamming(255)).unwrap();
    let t_star = ts
        .iter()
        .zip(&pooled)
        .find(|(_, &p)| p >= 0.999)
        .map(|(&t, _)| t);
    let secs = start.elapsed().as_secs_f64();
    let pass = (report.mean - 0.054).abs() <= 0.01
        && (report.std - 0.015).abs() <= 0.005
        && t_star.is_some_and(|t| (27..=35).contains(&t))
        && (protocol_ok - distance_ok).abs() < 1e-12
        && secs < 600.0;
    outcome(
        pass,
        format!(
            "pairs={} mean_hd={:.4} std_hd={:.4} t_999={:?} p_at_31={:.4} protocol_p_at_31={:.4} seconds={secs:.1}",
            groups * auths,
            report.mean,
            report.std,
            t_star,
            distance_ok,
            protocol_ok
        ),
    )
}

/// One typical capture per token, all under the same challenge.
fn independent_captures(tokens: u64) -> Vec<SpeckleImage> {
    let challenge = random_challenge("acceptance-c45", 0);
    let noise = NoiseParams::typical();
    (0..tokens)
        .map(|s| {
            let t = TokenModel::with_defaults(5000 + s, TokenKind::Diffuser);
            t.respond(&challenge, &noise.with_seed(s)).unwrap()
        })
        .collect()
}

fn criterion_4(images: &[SpeckleImage]) -> Outcome {
    let code = Bch::new(8, 43).unwrap();
    let mut trials = 0usize;
    let mut collisions = 0usize;
    for (i, enrolled) in images.iter().enumerate() {
        let hash = HashConfig::rbm(255, 70_000 + i as u64);
        let (key, helper) = hash.enroll(enrolled).unwrap();
        let offset = commit(&key, &code, i as u64).unwrap();
        let record = protocol_record(&key, &offset, &code);
        for (j, other) in images.iter().enumerate() {
            if i == j {
                continue;
            }
            let noisy = helper.hash(other).unwrap();
            if let AuthOutcome::Reproduced { key: k, .. } =
                authenticate_key(&noisy, &record).unwrap()
            {
                collisions += usize::from(k == key);
            }
            trials += 1;
        }
    }
    let rate = collisions as f64 / trials as f64;
    outcome(
        trials >= 10_000 && rate < 1e-3,
        format!("trials={trials} collisions={collisions} rate={rate:.2e}"),
    )
}

fn criterion_5(images: &[SpeckleImage]) -> Outcome {
    let helper = HashConfig::rbm(255, 4242).helper(images[0].dims()).unwrap();
    let hashed: Vec<BitKey> = images
        .iter()
        .take(40)
        .map(|im| helper.hash(im).unwrap())
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..hashed.len() {
        for j in i + 1..hashed.len() {
            total += hamming(&hashed[i], &hashed[j]).unwrap() as f64 / 255.0;
            pairs += 1;
        }
    }
    let mean_hd = total / pairs as f64;
    let ones: usize = hashed.iter().map(BitKey::weight).sum();
    let marginal = ones as f64 / (hashed.len() * 255) as f64;
    outcome(
        pairs >= 500 && (0.45..=0.55).contains(&mean_hd) && (marginal - 0.5).abs() <= 0.05,
        format!("pairs={pairs} mean_hd={mean_hd:.4} bit_marginal={marginal:.4}"),
    )
}

fn separation(noise: NoiseParams, hash: &HashConfig) -> (f64, f64, f64) {
    let n = 60u64;
    let challenges: Vec<Challenge> = (0..n)
        .map(|s| random_challenge("acceptance-c6", s))
        .collect();
    let run = |kind, seeds: Vec<u64>, chs: Vec<Challenge>, repeats| {
        let c = Campaign::new(kind, TokenKind::Diffuser, seeds, chs, noise, repeats);
        run_campaign(&c, Some(hash)).unwrap().hamming.unwrap()
    };
    let rob = run(
        CampaignKind::Robustness,
        vec![11],
        vec![challenges[0].clone()],
        n as usize,
    );
    let unp = run(
        CampaignKind::Unpredictability,
        vec![11],
        challenges.clone(),
        1,
    );
    let unc = run(
        CampaignKind::Unclonability,
        (100..100 + n).collect(),
        vec![challenges[0].clone()],
        1,
    );
    (
        rob.max(),
        overlap(&rob, &unp).unwrap(),
        overlap(&rob, &unc).unwrap(),
    )
}

fn criterion_6() -> Outcome {
    let base = NoiseParams::typical().with_seed(5);
    let shaken = base.with_vibration(0.5, 1.1);
    let rbm = HashConfig::rbm(255, 3);
    let svd = HashConfig::svd(SvdParams::default(), 3);
    let (_, rbm_up, rbm_uc) = separation(base, &rbm);
    let (_, svd_up, svd_uc) = separation(base, &svd);
    let (_, vr_up, vr_uc) = separation(shaken, &rbm);
    let (_, vs_up, vs_uc) = separation(shaken, &svd);
    let defaults_ok = [rbm_up, rbm_uc, svd_up, svd_uc].iter().all(|&o| o == 0.0);
    let vibration_ok = vr_up > 0.0 && vr_uc > 0.0 && vs_up == 0.0 && vs_uc == 0.0;
    outcome(
        defaults_ok && vibration_ok,
        format!(
            "default rbm={rbm_up:.4}/{rbm_uc:.4} svd={svd_up:.4}/{svd_uc:.4} \
             vibration rbm={vr_up:.4}/{vr_uc:.4} svd={vs_up:.4}/{vs_uc:.4}"
        ),
    )
}

fn mean_wavelength_cc(kind: TokenKind, deltas_pm: &[f64], tokens: u64) -> Vec<f64> {
    let base_nm = 1550.0;
    let noise = NoiseParams::typical();
    let mut sums = vec![0.0; deltas_pm.len()];
    for s in 0..tokens {
        let token = TokenModel::with_defaults(9000 + s, kind);
        let reference = token
            .wavelength_response(base_nm, &noise.with_seed(s))
            .unwrap();
        for (k, d) in deltas_pm.iter().enumerate() {
            let im = token
                .wavelength_response(
                    base_nm + d / 1000.0,
                    &noise.with_seed(s * 100 + k as u64 + 1),
                )
                .unwrap();
            sums[k] += cross_correlation(&reference, &im).unwrap() / tokens as f64;
        }
    }
    sums
}

fn criterion_7() -> Outcome {
    let deltas = [0.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0];
    let pof = mean_wavelength_cc(TokenKind::Pof, &deltas, 50);
    let diffuser = mean_wavelength_cc(TokenKind::Diffuser, &deltas, 50);
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|c| format!("{c:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    outcome(
        pof[3] <= 0.5 && diffuser[3] >= 0.8 && monotone(&pof) && monotone(&diffuser),
        format!(
            "pof_cc=[{}] diffuser_cc=[{}] at_pm={deltas:?}",
            fmt(&pof),
            fmt(&diffuser)
        ),
    )
}

fn criterion_8() -> Outcome {
    let token = TokenModel::with_defaults(77, TokenKind::Diffuser);
    let challenge = random_challenge("acceptance-c8", 0);
    let noise = NoiseParams::typical();
    let reference = token.respond(&challenge, &noise.with_seed(1)).unwrap();
    let code = long_key_code().unwrap();
    let context = EnrollContext {
        token_id: token.token_id(),
        challenge: challenge.clone(),
    };
    let (key, record) =
        protocol::enroll(&reference, &HashConfig::rbm(511, 8), &code, 8, context).unwrap();
    let framed = frame_long_key(&key).unwrap();
    let sweep: Vec<f64> = (-5..=5).map(f64::from).collect();
    let mut off_at_3 = Vec::new();
    let mut min_on = f64::INFINITY;
    let mut max_corrected = 0usize;
    let mut key_failures = 0usize;
    for (i, &dt) in sweep.iter().enumerate() {
        let seed = 100 + i as u64;
        let off = token
            .respond(&challenge, &noise.with_seed(seed).with_delta_t(dt))
            .unwrap();
        if dt.abs() == 3.0 {
            off_at_3.push(cross_correlation(&reference, &off).unwrap());
        }
        // Compensation holds the token at the enrollment temperature.
        let on = token
            .respond(&challenge, &noise.with_seed(seed).with_delta_t(0.0))
            .unwrap();
        min_on = min_on.min(cross_correlation(&reference, &on).unwrap());
        match protocol::authenticate(&on, &record).unwrap() {
            AuthOutcome::Reproduced { key: k, corrected }
                if protocol::verify(&k, &record) && frame_long_key(&k).unwrap() == framed =>
            {
                max_corrected = max_corrected.max(corrected);
            }
            _ => key_failures += 1,
        }
    }
    let off_ok = off_at_3.iter().all(|&c| c < 0.8);
    outcome(
        off_ok && min_on > 0.95 && key_failures == 0 && framed.len() == 512,
        format!(
            "cc_uncompensated_at_3C={off_at_3:.3?} min_cc_compensated={min_on:.4} \
             key_failures={key_failures} max_corrected={max_corrected} code=BCH({},{},t={})",
            code.n(),
            code.ell(),
            code.t()
        ),
    )
}

fn criterion_9() -> Outcome {
    let token = TokenModel::with_defaults(31337, TokenKind::Diffuser);
    let noise = NoiseParams::typical();
    let mut streams = Vec::new();
    // Two captures per stream: one image has fewer than 20000 independent
    // spectral components.
    for i in 0..100u64 {
        let images: Vec<_> = (0..2)
            .map(|k| {
                let c = random_challenge("acceptance-rng", 2 * i + k);
                token
                    .respond(&c, &noise.with_seed(50_000 + 2 * i + k))
                    .unwrap()
            })
            .collect();
        streams.push(extract_bits(&images, 2_000 + i, 10_000).unwrap());
    }
    let report = suite_report(&streams, &TestId::IMPLEMENTED, &TestParams::default()).unwrap();
    print!("{}", report.table());
    let failing: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| !r.ok())
        .map(|r| r.name.as_str())
        .collect();
    outcome(
        report.all_ok(),
        format!("streams=100 bits=20000 failing_rows={failing:?}"),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let service = Service::new(ServiceConfig::new(dir.path())).unwrap();
    let token_id = service.add_token(TokenModel::with_defaults(4, TokenKind::Diffuser));
    let server = Server::bind("127.0.0.1:0", service)
        .unwrap()
        .spawn()
        .unwrap();
    let mut client = Client::connect(server.addr()).unwrap();
    let limit = Duration::from_millis(100);
    let mut worst = [Duration::ZERO; 3];
    let mut accepted = 0;
    let rounds = 5usize;
    for r in 0..rounds {
        let challenge = random_challenge("acceptance-c10", r as u64);
        let t = Instant::now();
        let (record_id, _) = client.enroll(token_id, &challenge).unwrap();
        worst[0] = worst[0].max(t.elapsed());
        let t = Instant::now();
        accepted += usize::from(client.authenticate(record_id).unwrap().0);
        worst[1] = worst[1].max(t.elapsed());
        let t = Instant::now();
        client.random(4096).unwrap();
        worst[2] = worst[2].max(t.elapsed());
    }
    // Fault injection: garbage, truncation, bogus lengths, abrupt closes.
    let mut rng = derive_rng("acceptance-c10-faults", &[0]);
    for i in 0..50 {
        use std::io::Write;
        let mut c = std::net::TcpStream::connect(server.addr()).unwrap();
        let len: usize = rng.random_range(0..64);
        let mut bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        if i % 3 == 0 {
            bytes = specklepuf::service::wire::frame(&bytes);
        }
        let _ = c.write_all(&bytes);
    }
    let alive = Client::connect(server.addr())
        .map(|mut c| c.random(64).is_ok())
        .unwrap_or(false);
    let fast = worst.iter().all(|&d| d < limit);
    outcome(
        fast && accepted == rounds && alive,
        format!(
            "enroll_ms={:.1} auth_ms={:.1} random_ms={:.1} accepted={accepted}/{rounds} alive_after_faults={alive}",
            worst[0].as_secs_f64() * 1e3,
            worst[1].as_secs_f64() * 1e3,
            worst[2].as_secs_f64() * 1e3
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> std::process::ExitCode {
    let captures = independent_captures(101);
    let criteria: Vec<Criterion> = vec![
        ("1 bch exhaustive correctness", Box::new(criterion_1)),
        ("2 fuzzy commitment radius", Box::new(criterion_2)),
        ("3 success curve threshold", Box::new(criterion_3)),
        ("4 collision floor", Box::new(|| criterion_4(&captures))),
        ("5 rbm statistics", Box::new(|| criterion_5(&captures))),
        ("6 histogram separation", Box::new(criterion_6)),
        ("7 wavelength decorrelation", Box::new(criterion_7)),
        ("8 thermal robustness", Box::new(criterion_8)),
        ("9 randomness suite", Box::new(criterion_9)),
        ("10 service round trip", Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    for (name, run) in &criteria {
        let start = Instant::now();
        let o = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| outcome(false, "panicked".to_string()));
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {verdict} ({}) [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(*name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
