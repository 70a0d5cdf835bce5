use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specklepuf::hashing::standardize;
use specklepuf::metrics::{
    cross_correlation, euclidean, hamming, success_curve, Binning, DistanceReport,
};
use specklepuf::protocol::{self, EnrollContext};
use specklepuf::service::wire::{frame, read_frame, FrameRead};
use specklepuf::service::{ErrorCode, ResultBody, WireMessage};
use specklepuf::{
    Bch, BitKey, Challenge, DecodeOutcome, Dims, HashConfig, HashHelper, NoiseParams, PixelMask,
    SpeckleImage, TokenKind, TokenModel,
};

fn bits(len: impl Into<proptest::collection::SizeRange>) -> impl Strategy<Value = Vec<u8>> {
    vec(0u8..=1, len)
}

fn image(dims: Dims) -> impl Strategy<Value = SpeckleImage> {
    vec(0u16..256, dims.len()).prop_map(move |px| SpeckleImage::new(dims, 8, px).unwrap())
}

fn small_token(seed: u64) -> TokenModel {
    TokenModel::new(
        seed,
        TokenKind::Diffuser,
        Dims::new(4, 4).unwrap(),
        Dims::new(12, 12).unwrap(),
        100.0,
    )
    .unwrap()
}

fn wire_message() -> impl Strategy<Value = WireMessage> {
    let id = any::<[u8; 16]>();
    let code = prop_oneof![
        Just(ErrorCode::BadFrame),
        Just(ErrorCode::NotFound),
        Just(ErrorCode::Internal),
        Just(ErrorCode::UnknownOpcode),
        Just(ErrorCode::InvalidArgument),
    ];
    prop_oneof![
        (id, vec(any::<u8>(), 0..64)).prop_map(|(token_id, challenge)| WireMessage::Enroll {
            token_id,
            challenge
        }),
        id.prop_map(|record_id| WireMessage::Auth { record_id }),
        any::<u32>().prop_map(|n_bits| WireMessage::Random { n_bits }),
        (id, any::<u8>(), vec(any::<u8>(), 0..40)).prop_map(|(record_id, a, digest)| {
            WireMessage::Result(ResultBody::Enrolled {
                record_id,
                digest_algorithm: a,
                digest,
            })
        }),
        (any::<bool>(), any::<u32>()).prop_map(|(accepted, corrected)| {
            WireMessage::Result(ResultBody::Verdict {
                accepted,
                corrected,
            })
        }),
        (0u32..300).prop_flat_map(|n| {
            vec(any::<u8>(), (n as usize).div_ceil(8))
                .prop_map(move |bytes| WireMessage::Result(ResultBody::Random { n_bits: n, bytes }))
        }),
        (code, ".{0,40}").prop_map(|(code, message)| WireMessage::Error { code, message }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wire_messages_round_trip(msg in wire_message()) {
        let payload = msg.encode();
        let decoded = WireMessage::decode(&payload).unwrap();
        prop_assert_eq!(&decoded, &msg);
        prop_assert_eq!(decoded.encode(), payload);
        let framed = msg.to_frame();
        match read_frame(&mut &framed[..]).unwrap() {
            FrameRead::Frame(p) => prop_assert_eq!(WireMessage::decode(&p).unwrap(), msg),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(payload in vec(any::<u8>(), 0..80)) {
        if let Ok(msg) = WireMessage::decode(&payload) {
            prop_assert_eq!(msg.encode(), payload.clone());
        }
        let framed = frame(&payload);
        let _ = read_frame(&mut &framed[..]).unwrap();
        let _ = read_frame(&mut &payload[..]).unwrap();
    }

    #[test]
    fn bch_corrects_up_to_t(m in 6u32..=8, t_seed in any::<u64>(), msg_seed in any::<u64>()) {
        use rand::seq::index;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(t_seed);
        let max_t = (1usize << (m - 1)) / 4;
        let t = rng.random_range(1..=max_t);
        let Ok(code) = Bch::new(m, t) else { return Ok(()) };
        let mut mrng = ChaCha8Rng::seed_from_u64(msg_seed);
        let message: Vec<u8> = (0..code.ell()).map(|_| mrng.random_range(0..2)).collect();
        let mut word = code.encode(&message).unwrap();
        prop_assert!(code.is_codeword(&word).unwrap());
        let e = rng.random_range(0..=code.t());
        for i in index::sample(&mut rng, code.n(), e) {
            word[i] ^= 1;
        }
        match code.decode(&word).unwrap() {
            DecodeOutcome::Corrected { message: got, errors } => {
                prop_assert_eq!(got, message);
                prop_assert_eq!(errors, e);
            }
            DecodeOutcome::Failure => prop_assert!(false, "failed with {} errors", e),
        }
    }

    #[test]
    fn fields_superpose_over_disjoint_masks(seed in 0u64..50, on in vec(0u8..3, 16)) {
        let token = small_token(seed);
        let dims = token.grid_dims();
        let a = PixelMask::new(dims, on.iter().map(|&v| v == 1).collect()).unwrap();
        let b = PixelMask::new(dims, on.iter().map(|&v| v == 2).collect()).unwrap();
        prop_assert!(a.is_disjoint(&b));
        let fa = token.field(&a).unwrap();
        let fb = token.field(&b).unwrap();
        let fu = token.field(&a.union(&b).unwrap()).unwrap();
        for ((x, y), z) in fa.iter().zip(&fb).zip(&fu) {
            prop_assert!((x + y - z).norm() < 1e-9);
        }
    }

    #[test]
    fn distances_are_symmetric_and_bounded(
        a in image(Dims::new(6, 6).unwrap()),
        b in image(Dims::new(6, 6).unwrap()),
        c in image(Dims::new(6, 6).unwrap()),
    ) {
        let ab = euclidean(&a, &b).unwrap();
        prop_assert_eq!(ab, euclidean(&b, &a).unwrap());
        prop_assert!(ab <= euclidean(&a, &c).unwrap() + euclidean(&c, &b).unwrap() + 1e-9);
        if let (Ok(x), Ok(y)) = (cross_correlation(&a, &b), cross_correlation(&b, &a)) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x));
        }
    }

    #[test]
    fn hamming_is_a_metric(x in bits(40), y in bits(40), z in bits(40)) {
        let (x, y, z) = (BitKey::new(x).unwrap(), BitKey::new(y).unwrap(), BitKey::new(z).unwrap());
        let xy = hamming(&x, &y).unwrap();
        prop_assert_eq!(xy, hamming(&y, &x).unwrap());
        prop_assert_eq!(hamming(&x, &x).unwrap(), 0);
        prop_assert!(xy <= hamming(&x, &z).unwrap() + hamming(&z, &y).unwrap());
        prop_assert_eq!(xy, x.xor(&y).unwrap().weight());
    }

    #[test]
    fn pack_and_xor_round_trip(x in bits(1..200), seed in any::<u64>()) {
        use rand::Rng;
        let key = BitKey::new(x).unwrap();
        prop_assert_eq!(BitKey::unpack(&key.pack(), key.len()).unwrap(), key.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pad = BitKey::new((0..key.len()).map(|_| rng.random_range(0..2)).collect()).unwrap();
        prop_assert_eq!(key.xor(&pad).unwrap().xor(&pad).unwrap(), key);
    }

    #[test]
    fn challenges_round_trip(on in vec(any::<bool>(), 64), nm in 1540.0f64..=1570.0) {
        let mask = Challenge::PixelPattern(PixelMask::new(Dims::new(8, 8).unwrap(), on).unwrap());
        prop_assert_eq!(Challenge::from_bytes(&mask.to_bytes()).unwrap(), mask);
        let w = Challenge::wavelength(nm).unwrap();
        prop_assert_eq!(Challenge::from_bytes(&w.to_bytes()).unwrap(), w);
    }

    #[test]
    fn descriptors_round_trip(seed in any::<u64>(), pof in any::<bool>(), l in 1.0f64..1000.0) {
        let kind = if pof { TokenKind::Pof } else { TokenKind::Diffuser };
        let token = TokenModel::new(seed, kind, Dims::new(2, 3).unwrap(), Dims::new(4, 5).unwrap(), l)
            .unwrap();
        let back = TokenModel::from_bytes(&token.to_bytes()).unwrap();
        prop_assert_eq!(back.seed(), seed);
        prop_assert_eq!(back.kind(), kind);
        prop_assert_eq!(back.decorrelation_pm(), l);
        prop_assert_eq!(back.token_id(), token.token_id());
        prop_assert_eq!(back.to_bytes(), token.to_bytes());
    }

    #[test]
    fn records_and_helpers_round_trip(seed in 0u64..1000, svd in any::<bool>()) {
        let token = TokenModel::new(
            seed,
            TokenKind::Diffuser,
            Dims::new(4, 4).unwrap(),
            Dims::new(40, 40).unwrap(),
            100.0,
        )
        .unwrap();
        let challenge = Challenge::PixelPattern(PixelMask::full(token.grid_dims()));
        let image = token.respond(&challenge, &NoiseParams::none()).unwrap();
        let hash = if svd {
            HashConfig::svd(Default::default(), seed)
        } else {
            HashConfig::rbm(31, seed)
        };
        let (_, helper) = hash.enroll(&image).unwrap();
        prop_assert_eq!(HashHelper::from_bytes(&helper.to_bytes()).unwrap(), helper);
        let code = Bch::new(5, 2).unwrap();
        if let Ok((key, record)) = protocol::enroll(
            &image,
            &hash,
            &code,
            seed,
            EnrollContext { token_id: token.token_id(), challenge },
        ) {
            let back = protocol::EnrollmentRecord::from_bytes(&record.to_bytes()).unwrap();
            prop_assert_eq!(&back, &record);
            let accepted = matches!(
                protocol::authenticate_key(&key, &back).unwrap(),
                specklepuf::AuthOutcome::Reproduced { corrected: 0, .. }
            );
            prop_assert!(accepted);
        }
    }

    #[test]
    fn histogram_masses_sum_to_one(values in vec(-1e3f64..1e3, 1..300), bins in 1usize..40) {
        for binning in [Binning::FreedmanDiaconis, Binning::Uniform(bins)] {
            let report = DistanceReport::new(values.clone(), &binning).unwrap();
            prop_assert_eq!(report.histogram.total(), values.len() as u64);
            let sum: f64 = report.histogram.masses().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn success_curve_is_monotone(
        enroll in vec(bits(24), 1..5),
        auth in vec(bits(24), 1..5),
    ) {
        let enroll: Vec<BitKey> = enroll.into_iter().map(|b| BitKey::new(b).unwrap()).collect();
        let auth: Vec<BitKey> = auth.into_iter().map(|b| BitKey::new(b).unwrap()).collect();
        let ts: Vec<usize> = (0..=24).collect();
        let curve = success_curve(&enroll, &auth, &ts).unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[0].1 <= w[1].1);
        }
        prop_assert_eq!(curve.points.last().unwrap().1, 1.0);
    }

    #[test]
    fn standardized_images_have_unit_moments(img in image(Dims::new(7, 9).unwrap())) {
        if let Ok(y) = standardize(&img) {
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }
}
