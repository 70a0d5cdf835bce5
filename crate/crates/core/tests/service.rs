use std::io::Write;
use std::thread;
use std::time::{Duration, Instant};

use specklepuf::service::wire::{self, OP_AUTH};
use specklepuf::service::{
    Client, ClientError, ErrorCode, ResultBody, Server, ServerHandle, Service, ServiceConfig,
    WireMessage,
};
use specklepuf::{Challenge, PixelMask, TokenKind, TokenModel};

fn start(dir: &std::path::Path, timeout_ms: u64) -> (ServerHandle, [u8; 16]) {
    let mut config = ServiceConfig::new(dir);
    config.read_timeout = Duration::from_millis(timeout_ms);
    let service = Service::new(config).unwrap();
    let token_id = service.add_token(TokenModel::with_defaults(7, TokenKind::Diffuser));
    let handle = Server::bind("127.0.0.1:0", service)
        .unwrap()
        .spawn()
        .unwrap();
    (handle, token_id)
}

fn challenge(seed: u64) -> Challenge {
    let dims = TokenModel::with_defaults(0, TokenKind::Diffuser).grid_dims();
    let mut rng = specklepuf::seed::derive_rng("test-challenge", &[seed]);
    Challenge::PixelPattern(PixelMask::random(dims, 0.5, &mut rng))
}

#[test]
fn enroll_then_authenticate_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let (server, token_id) = start(dir.path(), 300);
    let mut c = Client::connect(server.addr()).unwrap();
    let (record_id, digest) = c.enroll(token_id, &challenge(1)).unwrap();
    assert_eq!(digest.len(), 32);
    assert!(dir
        .path()
        .join(format!("{}.pufr", hex::encode(record_id)))
        .exists());
    let (accepted, corrected) = c.authenticate(record_id).unwrap();
    assert!(accepted, "corrected {corrected}");
    assert!(corrected <= 31);
}

#[test]
fn unknown_ids_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let (server, token_id) = start(dir.path(), 300);
    let mut c = Client::connect(server.addr()).unwrap();
    match c.authenticate([0xab; 16]) {
        Err(ClientError::Remote { code, .. }) => assert_eq!(code, ErrorCode::NotFound),
        other => panic!("{other:?}"),
    }
    let mut other = token_id;
    other[0] ^= 1;
    match c.enroll(other, &challenge(2)) {
        Err(ClientError::Remote { code, .. }) => assert_eq!(code, ErrorCode::NotFound),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_challenge_blob_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (server, token_id) = start(dir.path(), 300);
    let mut c = Client::connect(server.addr()).unwrap();
    let reply = c
        .request(&WireMessage::Enroll {
            token_id,
            challenge: vec![9, 9],
        })
        .unwrap();
    assert!(matches!(
        reply,
        WireMessage::Error {
            code: ErrorCode::InvalidArgument,
            ..
        }
    ));
    // An all-dark challenge gives a degenerate image.
    let dark = Challenge::PixelPattern(PixelMask::empty(
        TokenModel::with_defaults(0, TokenKind::Diffuser).grid_dims(),
    ));
    let reply = c
        .request(&WireMessage::Enroll {
            token_id,
            challenge: dark.to_bytes(),
        })
        .unwrap();
    assert!(
        matches!(
            reply,
            WireMessage::Error {
                code: ErrorCode::Internal,
                ..
            }
        ),
        "{reply:?}"
    );
}

#[test]
fn truncated_frame_gets_bad_frame_and_session_continues() {
    let dir = tempfile::tempdir().unwrap();
    let (server, _) = start(dir.path(), 200);
    let mut c = Client::connect(server.addr()).unwrap();
    let mut partial = 100u32.to_be_bytes().to_vec();
    partial.extend_from_slice(&[OP_AUTH; 10]);
    c.stream().write_all(&partial).unwrap();
    thread::sleep(Duration::from_millis(400));
    match c.read_reply().unwrap() {
        WireMessage::Error { code, .. } => assert_eq!(code, ErrorCode::BadFrame),
        other => panic!("{other:?}"),
    }
    let bits = c.random(64).unwrap();
    assert_eq!(bits.len(), 64);
}

#[test]
fn malformed_payloads_keep_connection_alive() {
    let dir = tempfile::tempdir().unwrap();
    let (server, _) = start(dir.path(), 300);
    let mut c = Client::connect(server.addr()).unwrap();
    let cases: [(&[u8], ErrorCode); 4] = [
        (&[0x7f], ErrorCode::UnknownOpcode),
        (&[], ErrorCode::BadFrame),
        (&[OP_AUTH, 1, 2, 3], ErrorCode::BadFrame),
        (&[0x05, 0, 0, 0, 0], ErrorCode::InvalidArgument),
    ];
    for (payload, expected) in cases {
        c.stream().write_all(&wire::frame(payload)).unwrap();
        match c.read_reply().unwrap() {
            WireMessage::Error { code, .. } => assert_eq!(code, expected, "{payload:?}"),
            other => panic!("{other:?}"),
        }
    }
    let reply = c.request(&WireMessage::Result(ResultBody::Verdict {
        accepted: true,
        corrected: 0,
    }));
    assert!(matches!(
        reply,
        Ok(WireMessage::Error {
            code: ErrorCode::InvalidArgument,
            ..
        })
    ));
    assert_eq!(c.random(10).unwrap().len(), 10);
}

#[test]
fn oversize_length_is_answered_then_closed() {
    let dir = tempfile::tempdir().unwrap();
    let (server, _) = start(dir.path(), 300);
    let mut c = Client::connect(server.addr()).unwrap();
    c.stream().write_all(&u32::MAX.to_be_bytes()).unwrap();
    assert!(matches!(
        c.read_reply().unwrap(),
        WireMessage::Error {
            code: ErrorCode::BadFrame,
            ..
        }
    ));
    // The server survives for new connections.
    let mut c2 = Client::connect(server.addr()).unwrap();
    assert_eq!(c2.random(8).unwrap().len(), 8);
}

#[test]
fn concurrent_authentications_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (server, token_id) = start(dir.path(), 300);
    let addr = server.addr();
    let (record_id, _) = Client::connect(addr)
        .unwrap()
        .enroll(token_id, &challenge(3))
        .unwrap();
    let workers: Vec<_> = (0..4)
        .map(|_| {
            thread::spawn(move || {
                let mut c = Client::connect(addr).unwrap();
                (0..3)
                    .map(|_| c.authenticate(record_id).unwrap().0)
                    .collect::<Vec<_>>()
            })
        })
        .collect();
    for w in workers {
        assert!(w.join().unwrap().iter().all(|&a| a));
    }
}

#[test]
fn random_bits_are_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let (server, _) = start(dir.path(), 300);
    let mut c = Client::connect(server.addr()).unwrap();
    let t = Instant::now();
    let bits = c.random(30_000).unwrap();
    assert!(t.elapsed() < Duration::from_secs(10));
    let ones = bits.bits().iter().filter(|&&b| b == 1).count() as f64 / 30_000.0;
    assert!((ones - 0.5).abs() < 0.02, "{ones}");
    assert!(matches!(
        c.random(specklepuf::service::MAX_RANDOM_BITS + 1),
        Err(ClientError::Remote {
            code: ErrorCode::InvalidArgument,
            ..
        })
    ));
}
