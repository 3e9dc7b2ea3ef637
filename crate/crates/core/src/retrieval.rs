//! Feature store and brute-force nearest-neighbour retrieval over
//! consensus feature vectors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clip::{Clip, PreprocessConfig};
use crate::error::{Error, Result};
use crate::model::{extract_feature, ModelConfig, ModelParams};
use crate::synth::MotionType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    L2,
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub label: Option<MotionType>,
    pub feature: Vec<f32>,
}

/// A flat collection of fixed-length feature vectors keyed by clip id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    feature_dim: usize,
    records: Vec<FeatureRecord>,
}

impl FeatureStore {
    pub fn new(feature_dim: usize) -> Self {
        FeatureStore { feature_dim, records: Vec::new() }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn push(&mut self, record: FeatureRecord) -> Result<()> {
        if record.feature.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "record {:?} has {} dims, store expects {}",
                record.id,
                record.feature.len(),
                self.feature_dim
            )));
        }
        self.records.push(record);
        Ok(())
    }
}

/// One retrieval hit; smaller distance means closer.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    pub label: Option<MotionType>,
    pub distance: f32,
}

fn l2_distance(a: &[f32], b: &[f32]) -> f32 {
    let mut s = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = (x - y) as f64;
        s += d * d;
    }
    libm::sqrt(s) as f32
}

/// Cosine distance 1 - cos(a, b); a zero vector is treated as maximally
/// distant from everything.
fn cosine_distance(a: &[f32], b: &[f32]) -> f32 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 2.0;
    }
    (1.0 - dot / (libm::sqrt(na) * libm::sqrt(nb))) as f32
}

/// Brute-force k nearest neighbours of `query`, closest first. Ties on
/// distance break by ascending id. `exclude_id` drops one record, which
/// makes leave-one-out evaluation possible against the full store.
pub fn knn(
    store: &FeatureStore,
    query: &[f32],
    k: usize,
    metric: Metric,
    exclude_id: Option<&str>,
) -> Result<Vec<Neighbor>> {
    if query.len() != store.feature_dim {
        return Err(Error::Shape(format!(
            "query has {} dims, store expects {}",
            query.len(),
            store.feature_dim
        )));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut hits: Vec<Neighbor> = store
        .records
        .iter()
        .filter(|r| exclude_id != Some(r.id.as_str()))
        .map(|r| {
            let distance = match metric {
                Metric::L2 => l2_distance(query, &r.feature),
                Metric::Cosine => cosine_distance(query, &r.feature),
            };
            Neighbor { id: r.id.clone(), label: r.label, distance }
        })
        .collect();
    if hits.is_empty() {
        return Err(Error::EmptyStore);
    }
    hits.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Run every clip through the trained backbone and collect consensus
/// features. Clips that fail preprocessing (too few frames for the
/// segment count) are skipped rather than aborting the batch.
pub fn extract_features(
    clips: &[(Clip, Option<MotionType>)],
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    pre_cfg: &PreprocessConfig,
) -> Result<FeatureStore> {
    let mut store = FeatureStore::new(cfg.feature_dim());
    for (clip, label) in clips {
        let feature = match extract_feature(clip, params, cfg, pre_cfg) {
            Ok(f) => f,
            Err(_) => continue,
        };
        store.push(FeatureRecord {
            id: clip.id.clone(),
            label: *label,
            feature: feature.into_data(),
        })?;
    }
    Ok(store)
}

/// Leave-one-out retrieval accuracy: for each labelled record, query
/// with its own feature (itself excluded) and score a hit when any of
/// the top k neighbours carries the same label.
pub fn retrieval_accuracy(store: &FeatureStore, k: usize, metric: Metric) -> Result<f64> {
    let labelled: Vec<&FeatureRecord> =
        store.records.iter().filter(|r| r.label.is_some()).collect();
    if labelled.is_empty() {
        return Err(Error::EmptyStore);
    }
    let mut hits = 0usize;
    for r in &labelled {
        let neighbors = knn(store, &r.feature, k, metric, Some(&r.id))?;
        if neighbors.iter().any(|n| n.label == r.label) {
            hits += 1;
        }
    }
    Ok(hits as f64 / labelled.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn store_2d(points: &[(&str, [f32; 2], Option<MotionType>)]) -> FeatureStore {
        let mut s = FeatureStore::new(2);
        for (id, p, label) in points {
            s.push(FeatureRecord {
                id: id.to_string(),
                label: *label,
                feature: p.to_vec(),
            })
            .unwrap();
        }
        s
    }

    #[test]
    fn knn_hand_example() {
        let s = store_2d(&[
            ("A", [0.0, 0.0], None),
            ("B", [1.0, 0.0], None),
            ("C", [0.0, 2.0], None),
            ("D", [3.0, 3.0], None),
        ]);
        let hits = knn(&s, &[0.0, 0.1], 3, Metric::L2, None).unwrap();
        let ids: Vec<&str> = hits.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["A", "B", "C"]);
        assert!((hits[0].distance - 0.1).abs() < 1e-6);
    }

    #[test]
    fn ties_break_by_id() {
        let s = store_2d(&[
            ("b", [1.0, 0.0], None),
            ("a", [-1.0, 0.0], None),
            ("c", [0.0, 1.0], None),
        ]);
        let hits = knn(&s, &[0.0, 0.0], 3, Metric::L2, None).unwrap();
        let ids: Vec<&str> = hits.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn exclusion_and_empty_store() {
        let s = store_2d(&[("only", [0.0, 0.0], None)]);
        assert_eq!(
            knn(&s, &[0.0, 0.0], 1, Metric::L2, Some("only")),
            Err(Error::EmptyStore)
        );
        let hits = knn(&s, &[0.0, 0.0], 1, Metric::L2, Some("other")).unwrap();
        assert_eq!(hits[0].id, "only");
    }

    #[test]
    fn cosine_ignores_magnitude() {
        let s = store_2d(&[
            ("aligned", [10.0, 0.0], None),
            ("near", [0.1, 0.05], None),
        ]);
        let hits = knn(&s, &[1.0, 0.0], 2, Metric::Cosine, None).unwrap();
        assert_eq!(hits[0].id, "aligned");
        assert!(hits[0].distance.abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let s = store_2d(&[("a", [0.0, 0.0], None)]);
        assert!(matches!(
            knn(&s, &[0.0, 0.0, 0.0], 1, Metric::L2, None),
            Err(Error::Shape(_))
        ));
        let mut s2 = FeatureStore::new(2);
        assert!(s2
            .push(FeatureRecord { id: "x".into(), label: None, feature: vec![1.0] })
            .is_err());
    }

    #[test]
    fn k_larger_than_store_returns_all() {
        let s = store_2d(&[("a", [0.0, 0.0], None), ("b", [1.0, 1.0], None)]);
        assert_eq!(knn(&s, &[0.0, 0.0], 10, Metric::L2, None).unwrap().len(), 2);
    }

    #[test]
    fn leave_one_out_accuracy_on_clusters() {
        // two tight clusters, one per label: every query's neighbours
        // stay inside its own cluster
        let l = Some(MotionType::Linear);
        let p = Some(MotionType::Projectile);
        let s = store_2d(&[
            ("l1", [0.0, 0.0], l),
            ("l2", [0.1, 0.0], l),
            ("l3", [0.0, 0.1], l),
            ("p1", [5.0, 5.0], p),
            ("p2", [5.1, 5.0], p),
            ("p3", [5.0, 5.1], p),
        ]);
        assert_eq!(retrieval_accuracy(&s, 2, Metric::L2).unwrap(), 1.0);
        // an isolated mislabeled point drags accuracy below 1
        let mut s2 = s.clone();
        s2.push(FeatureRecord {
            id: "odd".into(),
            label: Some(MotionType::Random),
            feature: vec![-9.0, -9.0],
        })
        .unwrap();
        let acc = retrieval_accuracy(&s2, 2, Metric::L2).unwrap();
        assert!((acc - 6.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn unlabeled_records_are_candidates_but_not_queries() {
        let l = Some(MotionType::Linear);
        let s = store_2d(&[
            ("l1", [0.0, 0.0], l),
            ("l2", [0.2, 0.0], l),
            ("bg", [0.1, 0.0], None),
        ]);
        // k=1 finds the unlabeled point first: miss for both queries
        assert_eq!(retrieval_accuracy(&s, 1, Metric::L2).unwrap(), 0.0);
        assert_eq!(retrieval_accuracy(&s, 2, Metric::L2).unwrap(), 1.0);
    }
}
