use anchorbank::anchorbank_core::{DisconnectedPolicy, ReferencePolicy, RoundingRule};
use anchorbank::config::{parse_rounding, rounding_name, RunConfig};
use anchorbank::ConfigError;

#[test]
fn defaults_match_documented_values() {
    let c = RunConfig::default();
    let b = c.build_config().unwrap();
    assert_eq!((b.k, b.tau, b.top_n, b.sample_n), (5, 10, 2000, 100));
    assert_eq!(c.params.search_tolerance, "1/10");
    assert!((c.params.target_ratio - 1.0 / std::f64::consts::E).abs() < 1e-15);
    assert_eq!(b.reference, ReferencePolicy::MostPopular);
    assert_eq!(b.on_disconnected, DisconnectedPolicy::Fail);
    assert!(!c.is_live());
    c.validate().unwrap();
}

#[test]
fn partial_file_overrides_defaults() {
    let c: RunConfig = toml::from_str(
        r#"
        region = "CH"
        [params]
        k = 4
        reference = "median"
        drop_unreachable = true
        head_queries = ["alpha", "beta"]
        "#,
    )
    .unwrap();
    let b = c.build_config().unwrap();
    assert_eq!(b.region, "CH");
    assert_eq!(b.k, 4);
    assert_eq!(b.tau, 10);
    assert_eq!(b.reference, ReferencePolicy::CloseToMedian);
    assert_eq!(b.on_disconnected, DisconnectedPolicy::Drop);
    assert_eq!(b.head_queries.len(), 2);
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(toml::from_str::<RunConfig>("[params]\nkk = 4\n").is_err());
    assert!(toml::from_str::<RunConfig>("colour = 1\n").is_err());
}

#[test]
fn round_trips_through_toml() {
    let mut c = RunConfig::default();
    c.params.reference = "some query".into();
    c.provider.rounding = "floor".into();
    let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn invalid_values_are_reported() {
    let mut c = RunConfig::default();
    c.end = "2020-01-01".into();
    assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    let mut c = RunConfig::default();
    c.params.search_tolerance = "ten percent".into();
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.provider.kind = "carrier-pigeon".into();
    assert!(c.validate().is_err());
    let mut c = RunConfig::default();
    c.params.target_ratio = 1.5;
    assert!(c.validate().is_err());
}

#[test]
fn provenance_captures_parameters() {
    let c = RunConfig::default();
    let p = c.provenance();
    assert_eq!(p.provider, "simulator");
    assert_eq!(p.parameters["k"], "5");
    assert_eq!(p.parameters["tau"], "10");
    assert_eq!(p.parameters["search_tolerance"], "1/10");
    assert_eq!(p.universe.unwrap().n_queries, 2000);
    assert!(p.fetched.is_none());
}

#[test]
fn rounding_names_round_trip() {
    for r in [RoundingRule::NearestHalfAway, RoundingRule::Floor, RoundingRule::Disabled] {
        assert_eq!(parse_rounding(rounding_name(r)).unwrap(), r);
    }
    assert!(parse_rounding("ceil").is_err());
}

#[test]
fn documented_example_is_the_default() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/example-config.toml");
    let c = RunConfig::load(&path).unwrap();
    assert_eq!(c, RunConfig::default());
}
