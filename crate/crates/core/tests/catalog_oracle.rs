//! Catalog queries against a brute-force scan, and ranking structure.

use awcbir::catalog::{rank, Catalog, CatalogRecord, Query, SimilarityWeights};
use chrono::NaiveDate;
use proptest::prelude::*;

fn record() -> impl Strategy<Value = CatalogRecord> {
    (0usize..4, 0i64..60, proptest::option::weighted(0.9, 0u32..200), proptest::option::weighted(0.9, 0u32..200))
        .prop_map(|(t, day, w, b)| CatalogRecord {
            tile_id: ["NH44N", "NH44B", "NE43I", "NF45O"][t].to_string(),
            capture_date: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap() + chrono::Duration::days(day * 7),
            water_percent: w.map(|v| f64::from(v) / 20.0),
            burnt_percent: b.map(|v| f64::from(v) / 20.0),
            water_sfv_ref: None,
            burnt_sfv_ref: None,
            mask_refs: vec![],
            total_pixels: 5_126_596,
        })
}

#[derive(Debug, Clone)]
struct Filters {
    tile: Option<&'static str>,
    dates: Option<(i64, i64)>,
    water: Option<(f64, f64)>,
    burnt: Option<(f64, f64)>,
}

fn interval() -> impl Strategy<Value = (f64, f64)> {
    (0u32..200, 0u32..200).prop_map(|(a, b)| (f64::from(a.min(b)) / 20.0, f64::from(a.max(b)) / 20.0))
}

fn filters() -> impl Strategy<Value = Filters> {
    (
        proptest::option::of(prop_oneof![Just("NH44N"), Just("NE43I"), Just("ZZ1")]),
        proptest::option::of((0i64..420, 0i64..420).prop_map(|(a, b)| (a.min(b), a.max(b)))),
        proptest::option::of(interval()),
        proptest::option::of(interval()),
    )
        .prop_map(|(tile, dates, water, burnt)| Filters { tile, dates, water, burnt })
}

fn day(n: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 1, 1).unwrap() + chrono::Duration::days(n)
}

fn to_query(f: &Filters) -> Query {
    let mut q = Query::all();
    if let Some(t) = f.tile {
        q = q.with_tile(t);
    }
    if let Some((a, b)) = f.dates {
        q = q.with_dates(day(a), day(b)).unwrap();
    }
    if let Some((lo, hi)) = f.water {
        q = q.with_water(lo, hi).unwrap();
    }
    if let Some((lo, hi)) = f.burnt {
        q = q.with_burnt(lo, hi).unwrap();
    }
    q
}

fn scan(records: &[CatalogRecord], f: &Filters) -> Vec<CatalogRecord> {
    let within = |v: Option<f64>, iv: Option<(f64, f64)>| match iv {
        None => true,
        Some((lo, hi)) => matches!(v, Some(x) if lo <= x && x <= hi),
    };
    let mut out: Vec<CatalogRecord> = records
        .iter()
        .filter(|r| f.tile.map_or(true, |t| r.tile_id == t))
        .filter(|r| f.dates.map_or(true, |(a, b)| day(a) <= r.capture_date && r.capture_date <= day(b)))
        .filter(|r| within(r.water_percent, f.water) && within(r.burnt_percent, f.burnt))
        .cloned()
        .collect();
    out.sort_by(|a, b| (&a.tile_id, a.capture_date).cmp(&(&b.tile_id, b.capture_date)));
    out
}

/// Keeps the last record per key, mirroring upsert semantics.
fn dedup_last(records: Vec<CatalogRecord>) -> Vec<CatalogRecord> {
    let mut map = std::collections::BTreeMap::new();
    for r in records {
        map.insert(r.key(), r);
    }
    map.into_values().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn query_equals_linear_scan(records in proptest::collection::vec(record(), 0..80), fs in proptest::collection::vec(filters(), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Catalog::open(dir.path()).unwrap();
        for r in &records {
            c.upsert_record(r.clone()).unwrap();
        }
        let unique = dedup_last(records);
        let reopened = Catalog::open(dir.path()).unwrap();
        for f in &fs {
            let expected = scan(&unique, f);
            prop_assert_eq!(&c.query(&to_query(f)), &expected);
            prop_assert_eq!(&reopened.query(&to_query(f)), &expected);
        }
    }

    #[test]
    fn rank_is_a_sorted_permutation_of_the_query(records in proptest::collection::vec(record(), 1..60), f in filters(), pick in any::<prop::sample::Index>()) {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Catalog::open(dir.path()).unwrap();
        for r in &records {
            c.upsert_record(r.clone()).unwrap();
        }
        let unique = dedup_last(records);
        let reference = pick.get(&unique).clone();
        let q = to_query(&f);
        let ranked = rank(&reference, &q, &SimilarityWeights::default(), &c).unwrap();

        let mut got: Vec<_> = ranked.iter().map(|(r, _)| r.key()).collect();
        got.sort();
        let expected: Vec<_> = c.query(&q).iter().map(|r| r.key()).filter(|k| *k != reference.key()).collect();
        prop_assert_eq!(got, expected);
        for w in ranked.windows(2) {
            let ((a, sa), (b, sb)) = (&w[0], &w[1]);
            prop_assert!(sa > sb || (sa == sb && a.key() < b.key()));
        }
    }
}
