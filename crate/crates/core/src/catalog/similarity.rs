use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::{Catalog, CatalogError, CatalogRecord, Query, Result};
use crate::features::SparseFeatureVector;

/// Weights of the water, burnt and mask-overlap terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityWeights {
    w_water: f64,
    w_burnt: f64,
    w_overlap: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self { w_water: 1.0, w_burnt: 1.0, w_overlap: 1.0 }
    }
}

impl SimilarityWeights {
    pub fn new(w_water: f64, w_burnt: f64, w_overlap: f64) -> Result<Self> {
        let ws = [w_water, w_burnt, w_overlap];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CatalogError::InvalidWeights(format!("{ws:?} must be finite and non-negative")));
        }
        if ws.iter().all(|&w| w == 0.0) {
            return Err(CatalogError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(Self { w_water, w_burnt, w_overlap })
    }

    pub fn water(&self) -> f64 {
        self.w_water
    }

    pub fn burnt(&self) -> f64 {
        self.w_burnt
    }

    pub fn overlap(&self) -> f64 {
        self.w_overlap
    }
}

impl FromStr for SimilarityWeights {
    type Err = CatalogError;

    /// `w_water,w_burnt,w_overlap`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || CatalogError::InvalidWeights(format!("expected three comma-separated numbers, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut w = [0.0; 3];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        Self::new(w[0], w[1], w[2])
    }
}

/// `|A ∩ B| / |A ∪ B|` over two strictly ascending coordinate lists; two
/// empty sets count as identical.
pub fn intersection_over_union(a: &[(u32, u32)], b: &[(u32, u32)]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

fn water_coordinates(r: &CatalogRecord, store_root: &Path) -> Result<Option<Vec<(u32, u32)>>> {
    let Some(rel) = &r.water_sfv_ref else { return Ok(None) };
    let path = store_root.join(rel);
    let unreadable = |reason: String| CatalogError::SfvUnreadable { path: path.clone(), reason };
    let file = File::open(&path).map_err(|e| unreadable(e.to_string()))?;
    let sfv = SparseFeatureVector::read_from(BufReader::new(file), r.tile_id.clone(), r.capture_date)
        .map_err(|e| unreadable(e.to_string()))?;
    Ok(Some(sfv.coordinates().collect()))
}

fn score(
    a: &CatalogRecord,
    b: &CatalogRecord,
    w: &SimilarityWeights,
    coords: Option<(&[(u32, u32)], &[(u32, u32)])>,
) -> f64 {
    let term = |weight: f64, x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => weight * (x - y).abs(),
        _ => 0.0,
    };
    let overlap = coords.map_or(0.0, |(ca, cb)| w.w_overlap * (1.0 - intersection_over_union(ca, cb)));
    1.0 / (1.0 + term(w.w_water, a.water_percent, b.water_percent) + term(w.w_burnt, a.burnt_percent, b.burnt_percent) + overlap)
}

fn needs_overlap(a: &CatalogRecord, b: &CatalogRecord, w: &SimilarityWeights) -> bool {
    w.w_overlap > 0.0 && a.tile_id == b.tile_id && a.water_sfv_ref.is_some() && b.water_sfv_ref.is_some()
}

/// Score in `(0, 1]`:
/// `1 / (1 + w_water·|Δwater| + w_burnt·|Δburnt| + w_overlap·(1 − IoU))`.
///
/// IoU compares water-SFV pixel sets and only applies to records of the
/// same tile that both carry a water SFV. A percentage term is dropped when
/// either side lacks that percentage.
pub fn similarity(
    reference: &CatalogRecord,
    candidate: &CatalogRecord,
    w: &SimilarityWeights,
    store_root: &Path,
) -> Result<f64> {
    if !needs_overlap(reference, candidate, w) {
        return Ok(score(reference, candidate, w, None));
    }
    let a = water_coordinates(reference, store_root)?.unwrap_or_default();
    let b = water_coordinates(candidate, store_root)?.unwrap_or_default();
    Ok(score(reference, candidate, w, Some((&a, &b))))
}

/// Query results scored against `reference`, best first; ties go to the
/// smaller `(tile_id, capture_date)`. The reference's own key is excluded.
pub fn rank(
    reference: &CatalogRecord,
    q: &Query,
    w: &SimilarityWeights,
    catalog: &Catalog,
) -> Result<Vec<(CatalogRecord, f64)>> {
    let root = catalog.root();
    let key = reference.key();
    let candidates: Vec<CatalogRecord> = catalog.query(q).into_iter().filter(|r| r.key() != key).collect();
    let reference_coords = if candidates.iter().any(|c| needs_overlap(reference, c, w)) {
        water_coordinates(reference, root)?
    } else {
        None
    };
    let mut scored = candidates
        .into_par_iter()
        .map(|c| {
            let s = if needs_overlap(reference, &c, w) {
                let theirs = water_coordinates(&c, root)?.unwrap_or_default();
                let ours = reference_coords.as_deref().unwrap_or_default();
                score(reference, &c, w, Some((ours, &theirs)))
            } else {
                score(reference, &c, w, None)
            };
            Ok((c, s))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|(ra, sa), (rb, sb)| {
        sb.total_cmp(sa)
            .then_with(|| ra.tile_id.cmp(&rb.tile_id))
            .then_with(|| ra.capture_date.cmp(&rb.capture_date))
    });
    Ok(scored)
}
