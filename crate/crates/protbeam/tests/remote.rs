mod common;

use std::time::Duration;

use common::TestServer;
use protbeam::objectives::RemoteScorer;
use protbeam::remote::{RemoteConfig, RemoteProvider};
use protbeam::wire::{InfoResponse, ScoreRequest, ScoreResponse};
use protbeam_core::guidance::SequenceScorer;
use protbeam_core::pll::build_profile;
use protbeam_core::provider::{CoupledParams, CoupledProvider, LogitRequest};
use protbeam_core::samplers::{beam_search, BeamConfig};
use protbeam_core::{Error, MaskedLogitProvider, PositionMask, ProteinSequence};

fn seq(s: &str) -> ProteinSequence {
    s.parse().unwrap()
}

fn config(max_batch: usize) -> RemoteConfig {
    RemoteConfig {
        timeout: Duration::from_secs(10),
        max_batch,
        pool_size: 4,
    }
}

#[test]
fn rows_match_server_side_rows() {
    let local = CoupledProvider::random(8, 5, CoupledParams::default());
    let server = TestServer::model(CoupledProvider::random(8, 5, CoupledParams::default()));
    let remote = RemoteProvider::connect(&server.url, &config(3)).unwrap();
    assert_eq!(remote.info().max_length, Some(8));
    let s = seq("MKTAYIAK");
    for masked in [vec![0], vec![2, 5], vec![]] {
        let report: Vec<usize> = if masked.is_empty() { (0..8).collect() } else { masked.clone() };
        let a = remote.query_report(&s, &masked, &report).unwrap();
        let b = local.query_report(&s, &masked, &report).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.values().iter().zip(y.values()) {
                assert!((u - v).abs() <= 1e-6);
            }
        }
    }
    assert_eq!(remote.forward_pass_count(), 3);
}

#[test]
fn batches_are_chunked_and_counted() {
    let server = TestServer::model(CoupledProvider::random(7, 2, CoupledParams::default()));
    let local = CoupledProvider::random(7, 2, CoupledParams::default());
    let remote = RemoteProvider::connect(&server.url, &config(3)).unwrap();
    let s = seq("ACDEFGH");
    let a = build_profile(&remote, &s, 1.5).unwrap();
    let b = build_profile(&local, &s, 1.5).unwrap();
    assert_eq!(a.rows(), b.rows());
    assert_eq!(remote.forward_pass_count(), 7);
    let bad = [LogitRequest::masked(s.clone(), vec![9])];
    assert!(matches!(remote.query_batch(&bad), Err(Error::PositionOutOfRange { .. })));
    assert_eq!(remote.forward_pass_count(), 7);
}

#[test]
fn remote_beam_equals_in_process_beam() {
    let server = TestServer::model(CoupledProvider::random(10, 11, CoupledParams::default()));
    let local = CoupledProvider::random(10, 11, CoupledParams::default());
    let remote = RemoteProvider::connect(&server.url, &config(16)).unwrap();
    let s = seq("MKTAYIAKQR");
    let cfg = BeamConfig::new(2, PositionMask::full(10));
    let a = beam_search(&remote, "s", &s, &cfg, None).unwrap();
    let b = beam_search(&local, "s", &s, &cfg, None).unwrap();
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.forward_passes, b.forward_passes);
}

#[test]
fn handshake_rejects_foreign_alphabet() {
    let server = TestServer::new(Box::new(|_, _, _| {
        let info = InfoResponse {
            name: "x".into(),
            alphabet: "ARNDCQEGHILKMFPSTWYV".into(),
            max_length: None,
        };
        (200, serde_json::to_string(&info).unwrap())
    }));
    let err = RemoteProvider::connect(&server.url, &config(4)).unwrap_err();
    assert!(matches!(err, Error::AlphabetMismatch { .. }), "{err:?}");
}

#[test]
fn unreachable_and_rejecting_servers() {
    let err = RemoteProvider::connect("http://127.0.0.1:9", &config(4)).unwrap_err();
    assert!(matches!(err, Error::ProviderUnavailable(_)));

    let server = TestServer::model(CoupledProvider::random(4, 1, CoupledParams::default()));
    let remote = RemoteProvider::connect(&server.url, &config(4)).unwrap();
    // the client validates length before sending, so bypass it
    let err = remote.forward(&seq("ACDEF"), &[0], &[0]).unwrap_err();
    assert!(matches!(err, Error::InvalidResponse(_)), "{err:?}");
    assert!(remote.query(&seq("ACDEF"), &[0]).is_err());
}

#[test]
fn remote_scorer_round_trip() {
    let server = TestServer::new(Box::new(|method, path, body| {
        assert_eq!((method, path), ("POST", "/score"));
        let req: ScoreRequest = serde_json::from_slice(body).unwrap();
        let scores = req.sequences.iter().map(|s| s.matches('K').count() as f64).collect();
        (200, serde_json::to_string(&ScoreResponse { scores }).unwrap())
    }));
    let scorer = RemoteScorer::new(&server.url);
    assert_eq!(scorer.score_batch(&[seq("KKA"), seq("AAA")]).unwrap(), vec![2.0, 0.0]);
}
