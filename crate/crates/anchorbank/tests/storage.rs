mod common;

use anchorbank::codec::{parse_rational, rational_from_pair, rational_to_pair, seal, unseal};
use anchorbank::storage::{load_bank, save_bank, BankFile, BANK_KIND};
use anchorbank::StoreError;
use anchorbank::anchorbank_core::model::rat;
use anchorbank::anchorbank_core::Rational;
use common::small_build;
use num_bigint::BigInt;
use proptest::prelude::*;

#[test]
fn round_trip_is_exact() {
    let (_, _, file) = small_build(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    save_bank(&file, &path).unwrap();
    let back = load_bank(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.to_text(), file.to_text());
}

#[test]
fn same_input_same_bytes() {
    let (_, _, a) = small_build(5);
    let (_, _, b) = small_build(5);
    assert_eq!(a.to_text().as_bytes(), b.to_text().as_bytes());
    let (_, _, c) = small_build(6);
    assert_ne!(a.to_text(), c.to_text());
}

#[test]
fn truncated_file_is_rejected() {
    let (_, _, file) = small_build(3);
    let text = file.to_text();
    for cut in [text.len() - 1, text.len() / 2, 40] {
        let err = BankFile::from_text(&text[..cut]).unwrap_err();
        assert!(matches!(err, StoreError::Checksum), "cut {cut}: {err}");
    }
}

#[test]
fn edited_body_is_rejected() {
    let (_, _, file) = small_build(3);
    let text = file.to_text().replacen("\"tau\": 10", "\"tau\": 11", 1);
    assert!(matches!(BankFile::from_text(&text), Err(StoreError::Checksum)));
}

#[test]
fn newer_version_is_reported() {
    let (_, _, file) = small_build(3);
    let text = file.to_text();
    let body = text.split_once('\n').unwrap().1;
    let future = seal(BANK_KIND, 2, body);
    match BankFile::from_text(&future) {
        Err(StoreError::UnsupportedVersion { found, supported, .. }) => {
            assert_eq!((found, supported), (2, 1));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_kind_is_a_header_error() {
    let sealed = seal("something-else", 1, "{}");
    assert!(matches!(BankFile::from_text(&sealed), Err(StoreError::Header(_))));
    assert!(matches!(unseal(BANK_KIND, "no newline"), Err(StoreError::Checksum)));
}

#[test]
fn invalid_bank_content_is_rejected() {
    let (_, _, file) = small_build(3);
    let text = file.to_text();
    let body = text.split_once('\n').unwrap().1;
    let mut doc: serde_json::Value = serde_json::from_str(body).unwrap();
    // Swap two entries: the bank is no longer increasing.
    let entries = doc["entries"].as_array_mut().unwrap();
    entries.swap(0, 1);
    let edited = seal(BANK_KIND, 1, &serde_json::to_string_pretty(&doc).unwrap());
    assert!(matches!(BankFile::from_text(&edited), Err(StoreError::Model(_))));
}

#[test]
fn entries_use_documented_field_names() {
    let (_, _, file) = small_build(3);
    let text = file.to_text();
    let doc: serde_json::Value = serde_json::from_str(text.split_once('\n').unwrap().1).unwrap();
    for key in ["schema_version", "reference", "search_start", "region", "timespan", "params", "entries", "provenance", "round_one"] {
        assert!(doc.get(key).is_some(), "{key}");
    }
    let e = &doc["entries"][0];
    for key in ["query", "R", "lo", "hi", "eta"] {
        assert!(e.get(key).is_some(), "{key}");
    }
    let reference = doc["reference"].as_str().unwrap();
    let r = doc["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["query"] == reference)
        .unwrap();
    assert_eq!(r["R"], serde_json::json!(["1", "1"]));
}

#[test]
fn rational_text_forms() {
    assert_eq!(parse_rational("1/10").unwrap(), rat(1, 10));
    assert_eq!(parse_rational("0.1").unwrap(), rat(1, 10));
    assert_eq!(parse_rational(" 7 ").unwrap(), rat(7, 1));
    assert_eq!(parse_rational("-2.5").unwrap(), rat(-5, 2));
    assert_eq!(parse_rational(".25").unwrap(), rat(1, 4));
    for bad in ["", "1/0", "abc", "1.2.3", "."] {
        assert!(parse_rational(bad).is_err(), "{bad:?}");
    }
    assert!(rational_from_pair(&["1".into(), "0".into()]).is_err());
}

proptest! {
    #[test]
    fn rational_pairs_round_trip(n in any::<i64>(), d in 1i64..i64::MAX, scale in 0u32..40) {
        let big = BigInt::from(10u8).pow(scale);
        let r = Rational::new(BigInt::from(n) * &big, BigInt::from(d));
        prop_assert_eq!(rational_from_pair(&rational_to_pair(&r)).unwrap(), r);
    }

    #[test]
    fn decimal_parsing_matches_integer_division(int in 0u64..1_000_000, frac in 0u64..1_000_000) {
        let s = format!("{int}.{frac:06}");
        let expected = Rational::new(BigInt::from(int * 1_000_000 + frac), BigInt::from(1_000_000u64));
        prop_assert_eq!(parse_rational(&s).unwrap(), expected);
    }
}
