use std::path::PathBuf;

use cmg::config::{
    EnvConfig, InitialState, KlSign, OracleConfig, OracleKind, RunConfig, ShrParams, StartKeyword,
    SCHEMA_VERSION,
};
use proptest::prelude::*;

fn initial_state() -> impl Strategy<Value = InitialState> {
    prop_oneof![
        Just(InitialState::Keyword(StartKeyword::Random)),
        (0usize..600).prop_map(InitialState::State),
        (1usize..=25, 1usize..=25).prop_map(|(a, b)| InitialState::Cells(vec![a, b])),
    ]
}

fn oracle() -> impl Strategy<Value = OracleConfig> {
    (
        prop_oneof![Just(OracleKind::Rvi), Just(OracleKind::OptimisticPi), Just(OracleKind::BruteForce)],
        1e-12f64..1e-3,
        1usize..1_000_000,
        0usize..50,
        0.01f64..1.0,
        any::<bool>(),
    )
        .prop_map(|(kind, tol, max_iter, sweeps, td_step, track)| OracleConfig {
            kind,
            tol,
            max_iter,
            sweeps,
            td_step,
            track_best_response: track,
        })
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        1usize..500,
        1usize..500,
        1e-4f64..10.0,
        0.0f64..20.0,
        prop::collection::vec(any::<u64>(), 1..6),
        initial_state(),
        prop::collection::vec(0.01f64..1.99, 1..4),
        prop_oneof![Just(KlSign::Penalty), Just(KlSign::Bonus)],
        0.0f64..5.0,
        oracle(),
    )
        .prop_map(|(epochs, t0, eta, l0, seeds, start, thresholds, sign, kl, oracle)| RunConfig {
            schema_version: SCHEMA_VERSION,
            epochs,
            epoch_length: t0,
            eta,
            lambda0: vec![l0],
            seeds,
            initial_state: start,
            output_dir: PathBuf::from("runs/x"),
            feasibility_tol: 0.05,
            env: EnvConfig::Shr(ShrParams {
                thresholds,
                kl_sign: sign,
                kl_weight: kl,
                ..ShrParams::default()
            }),
            oracle,
        })
}

proptest! {
    #[test]
    fn parse_serialize_parse_is_identity(cfg in config()) {
        let text = cfg.to_toml();
        let parsed = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(RunConfig::parse(&parsed.to_toml()).unwrap(), parsed);
    }
}

#[test]
fn synthetic_and_file_envs_round_trip() {
    let mut cfg = RunConfig::shr_default();
    cfg.env = EnvConfig::Synthetic {
        num_states: 3,
        action_counts: vec![2, 3],
        num_constraints: 1,
        identical_interest: false,
        seed: 12,
    };
    cfg.initial_state = InitialState::State(2);
    assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    cfg.env = EnvConfig::File { path: PathBuf::from("games/g.json") };
    assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn shipped_configs_load() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let sweep = RunConfig::load(&dir.join("shr.toml")).unwrap();
    let mut expected = RunConfig::shr_default();
    expected.output_dir = PathBuf::from("runs/shr");
    assert_eq!(sweep, expected);

    let fixed = RunConfig::load(&dir.join("shr_fixed_start.toml")).unwrap();
    assert_eq!(fixed.initial_state, InitialState::Cells(vec![12, 14]));
    assert_eq!(fixed.seeds, vec![0]);
}
