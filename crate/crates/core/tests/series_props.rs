mod common;

use chrono::Duration;
use common::date;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use respicast::series::{
    diff_rounds, estimate_dow_effects, ingest_unit_records, weekday_index, CountSeries, DataRound, DateRange,
    OutOfRange, Pathogen, SeriesKey, Stream,
};
use std::collections::HashMap;

fn series(counts: Vec<u64>, start_offset: i64) -> CountSeries {
    CountSeries::new(Pathogen::SarsCov2, Stream::Cases, date("2024-01-01") + Duration::days(start_offset), counts).unwrap()
}

#[test]
fn ten_thousand_records_match_a_hash_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let start = date("2024-03-01");
    let range = DateRange::new(start, start + Duration::days(89)).unwrap();
    let rows: Vec<String> = (0..10_000)
        .map(|_| (start + Duration::days(rng.random_range(-10..100))).format("%Y-%m-%d").to_string())
        .collect();
    let mut tally: HashMap<String, u64> = HashMap::new();
    for r in &rows {
        *tally.entry(r.clone()).or_default() += 1;
    }
    let s = ingest_unit_records(&rows, range, Pathogen::Influenza, Stream::Admissions, OutOfRange::DropWithWarning).unwrap();
    assert_eq!(s.len(), 90);
    for (d, c) in s.iter() {
        assert_eq!(c, tally.get(&d.format("%Y-%m-%d").to_string()).copied().unwrap_or(0), "{d}");
    }
    let inside = rows.iter().filter(|r| range.contains(date(r))).count() as u64;
    assert_eq!(s.total(), inside);
    assert!(ingest_unit_records(&rows, range, Pathogen::Influenza, Stream::Admissions, OutOfRange::Reject).is_err());
}

#[test]
fn malformed_record_reports_its_row() {
    let rows = ["2024-01-01", "2024-01-02", "01/03/2024"];
    let range = DateRange::new(date("2024-01-01"), date("2024-01-05")).unwrap();
    let err = ingest_unit_records(&rows, range, Pathogen::Rsv, Stream::Admissions, OutOfRange::Reject).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains('2') && msg.contains("01/03/2024"), "{msg}");
}

#[test]
fn randomized_diff_matches_elementwise_comparison() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n_old = rng.random_range(7..60);
        let old: Vec<u64> = (0..n_old).map(|_| rng.random_range(0..50)).collect();
        let shift = rng.random_range(0..10i64);
        let n_new = rng.random_range(1..60);
        let new: Vec<u64> = (0..n_new).map(|i| {
            let src = i as i64 + shift;
            if src < n_old as i64 && rng.random_bool(0.8) { old[src as usize] } else { rng.random_range(0..50) }
        }).collect();
        let a = series(old.clone(), 0);
        let b = series(new.clone(), shift);
        let ra = DataRound::new(1, date("2025-01-01"), vec![a.clone()]).unwrap();
        let rb = DataRound::new(2, date("2025-01-01"), vec![b.clone()]).unwrap();
        let got = diff_rounds(&ra, &rb);
        let mut expected = Vec::new();
        for (i, &o) in old.iter().enumerate() {
            let j = i as i64 - shift;
            if j >= 0 && (j as usize) < new.len() && new[j as usize] != o {
                expected.push((a.date_of(i), o, new[j as usize]));
            }
        }
        let got: Vec<_> = got.iter().map(|r| (r.date, r.old, r.new)).collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn disjoint_rounds_have_no_revisions() {
    let a = series(vec![1, 2, 3], 0);
    let b = CountSeries::new(Pathogen::Rsv, Stream::Admissions, date("2024-01-01"), vec![9, 9, 9]).unwrap();
    let ra = DataRound::new(1, date("2025-01-01"), vec![a]).unwrap();
    let rb = DataRound::new(2, date("2025-01-01"), vec![b]).unwrap();
    assert!(diff_rounds(&ra, &rb).is_empty());
    assert!(ra.get(&SeriesKey::new(Pathogen::Rsv, Stream::Admissions)).is_none());
}

proptest! {
    #[test]
    fn ingestion_conserves_mass(offsets in prop::collection::vec(0i64..60, 0..400)) {
        let start = date("2024-06-01");
        let rows: Vec<String> = offsets.iter().map(|o| (start + Duration::days(*o)).to_string()).collect();
        let range = DateRange::new(start, start + Duration::days(59)).unwrap();
        let s = ingest_unit_records(&rows, range, Pathogen::SarsCov2, Stream::Cases, OutOfRange::Reject).unwrap();
        prop_assert_eq!(s.total(), rows.len() as u64);
    }

    #[test]
    fn dow_effects_sum_to_seven_or_degenerate(counts in prop::collection::vec(0u64..20, 7..140), weeks in 1usize..=16) {
        let s = series(counts, 3);
        let e = estimate_dow_effects(&s, weeks).unwrap();
        if e.degenerate {
            prop_assert_eq!(e.omega, [1.0; 7]);
        } else {
            prop_assert!((e.omega.iter().sum::<f64>() - 7.0).abs() < 1e-9);
        }
        prop_assert!(e.window_weeks <= weeks && e.window_weeks * 7 <= s.len());
    }

    #[test]
    fn dow_effects_are_scale_invariant(counts in prop::collection::vec(0u64..20, 14..100), c in 2u64..50) {
        let a = estimate_dow_effects(&series(counts.clone(), 0), 16).unwrap();
        let b = estimate_dow_effects(&series(counts.iter().map(|x| x * c).collect(), 0), 16).unwrap();
        for w in 0..7 {
            prop_assert!((a.omega[w] - b.omega[w]).abs() < 1e-12);
        }
    }

    #[test]
    fn diff_with_itself_is_empty(counts in prop::collection::vec(0u64..1000, 1..100)) {
        let r1 = DataRound::new(1, date("2025-01-01"), vec![series(counts.clone(), 0)]).unwrap();
        let r2 = DataRound::new(2, date("2025-01-01"), vec![series(counts, 0)]).unwrap();
        prop_assert!(diff_rounds(&r1, &r2).is_empty());
    }

    #[test]
    fn weekday_index_cycles(offset in 0i64..5000) {
        let d = date("2024-01-01") + Duration::days(offset);
        prop_assert_eq!(weekday_index(d), (offset % 7) as usize);
    }
}

#[test]
fn dow_recovers_a_planted_pattern() {
    let pattern = [1.4, 1.2, 1.0, 1.0, 0.9, 0.8, 0.7];
    let counts: Vec<u64> = (0..112).map(|i| (pattern[i % 7] * 1000.0) as u64).collect();
    let e = estimate_dow_effects(&series(counts, 0), 16).unwrap();
    for w in 0..7 {
        assert!((e.omega[w] - pattern[w]).abs() < 1e-9, "{w}: {}", e.omega[w]);
    }
}
