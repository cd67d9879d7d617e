mod common;

use common::demos::{all_records_clear, record_scripted, round_trip_is_exact};
use gsl::demo_store::{DemoFilter, DemoInventory, DemoSampler};
use gsl::error::GslError;

const TAU: f64 = -25.0;

#[test]
fn kept_records_clear_the_threshold() {
    let rec = record_scripted(TAU, 3000, "demo-filter").unwrap();
    assert!(rec.inventory.num_steps() >= 3000);
    assert!(
        rec.attempts > rec.inventory.len(),
        "the filter should reject some noisy episodes"
    );
    assert!(all_records_clear(&rec.inventory, TAU));
    rec.inventory.verify().unwrap();
    assert_eq!(rec.inventory.counts().len(), 5);
}

#[test]
fn round_trip_is_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = record_scripted(TAU, 1500, "demo-roundtrip").unwrap();
    assert!(round_trip_is_exact(&rec.inventory, &tmp.path().join("d.gsldemo")).unwrap());
}

#[test]
fn unreachable_threshold_is_an_error() {
    // every step costs the remaining distance, so no return is positive
    let err = record_scripted(1.0, 300, "demo-high").unwrap_err();
    assert!(matches!(err, GslError::InsufficientDemos { .. }), "{err}");
}

#[test]
fn corruption_is_detected() {
    let rec = record_scripted(TAU, 1000, "demo-corrupt").unwrap();
    let mut bytes = rec.inventory.to_bytes();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    assert!(DemoInventory::from_bytes(&bytes, "test").is_err());
    assert!(DemoInventory::from_bytes(&bytes[..bytes.len() - 3], "test").is_err());
}

#[test]
fn tampered_return_fails_verification() {
    let mut inv = record_scripted(TAU, 1000, "demo-tamper").unwrap().inventory;
    inv.records[0].total_return += 1.0;
    assert!(inv.verify().is_err());
}

#[test]
fn merge_refuses_other_filters() {
    let a = record_scripted(TAU, 1000, "demo-a").unwrap().inventory;
    let mut b = record_scripted(TAU, 1000, "demo-b").unwrap().inventory;
    let n = a.len() + b.len();
    assert_eq!(a.clone().merge(b.clone()).unwrap().len(), n);
    b.filter = DemoFilter::Success;
    assert!(matches!(a.merge(b), Err(GslError::Config(_))));
}

#[test]
fn sampler_visits_everything_once_per_pass() {
    let inv = record_scripted(TAU, 500, "demo-sampler").unwrap().inventory;
    let n = inv.num_steps();
    let mut s = DemoSampler::new(&inv, common::rng("sampler"));
    let mut seen = s.next_indices(n);
    seen.sort_unstable();
    assert_eq!(seen, (0..n).collect::<Vec<_>>());
}
