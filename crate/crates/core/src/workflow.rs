//! Per-feature aggregation, similarity and diversity reports, and
//! similarity-guided selection of augmentation candidates.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceKind;
use crate::diversity::{feature_diversity, DiversityMeasure};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureBundle, FeatureKind};
use crate::model::Dataset;
use crate::similarity::{feature_difference, SimilarityMeasure};

pub const SCHEMA_VERSION: u32 = 1;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AggregationRule {
    Min,
    Max,
    WeightedAverage { weights: BTreeMap<FeatureKind, f64> },
}

impl AggregationRule {
    /// Equal weights over `features`.
    pub fn average(features: &[FeatureKind]) -> Self {
        let w = 1.0 / features.len().max(1) as f64;
        AggregationRule::WeightedAverage {
            weights: features.iter().map(|f| (*f, w)).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AggregationRule::Min => "min",
            AggregationRule::Max => "max",
            AggregationRule::WeightedAverage { .. } => "average",
        }
    }
}

/// How raw per-feature values become the `normalized` map of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Raw values are used unchanged.
    None,
    /// Min-max over the features of the report.
    MinMax,
}

/// Min-max normalization to `[0, 1]`; a constant collection maps to all zeros.
pub fn normalize_scores(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot normalize an empty collection"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "cannot normalize non-finite value {v}"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|v| {
            if span > 0.0 {
                ((v - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

fn normalize_map(values: &BTreeMap<FeatureKind, f64>) -> Result<BTreeMap<FeatureKind, f64>> {
    let raw: Vec<f64> = values.values().copied().collect();
    let norm = normalize_scores(&raw)?;
    Ok(values.keys().copied().zip(norm).collect())
}

pub fn aggregate(normalized: &BTreeMap<FeatureKind, f64>, rule: &AggregationRule) -> Result<f64> {
    if normalized.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let values = normalized.values().copied();
    match rule {
        AggregationRule::Min => Ok(values.fold(f64::INFINITY, f64::min)),
        AggregationRule::Max => Ok(values.fold(f64::NEG_INFINITY, f64::max)),
        AggregationRule::WeightedAverage { weights } => {
            if !weights.keys().eq(normalized.keys()) {
                return Err(Error::invalid(format!(
                    "weights cover {:?} but values cover {:?}",
                    weights.keys().collect::<Vec<_>>(),
                    normalized.keys().collect::<Vec<_>>()
                )));
            }
            if let Some((f, w)) = weights.iter().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
                return Err(Error::invalid(format!(
                    "weight for '{f}' is {w}, must lie in [0, 1]"
                )));
            }
            let total: f64 = weights.values().sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(Error::invalid(format!(
                    "weights sum to {total}, expected 1"
                )));
            }
            let mean: f64 = normalized.iter().map(|(f, v)| weights[f] * v).sum();
            // keep the result inside [min, max] despite rounding
            let lo = normalized.values().copied().fold(f64::INFINITY, f64::min);
            let hi = normalized
                .values()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(mean.clamp(lo, hi))
        }
    }
}

fn check_features(features: &[FeatureKind]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::invalid("at least one feature is required"));
    }
    let mut seen = features.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != features.len() {
        return Err(Error::invalid("features must not repeat"));
    }
    Ok(())
}

fn prepare(dataset: &Dataset, normalize_max: bool) -> Result<Vec<FeatureBundle>> {
    if normalize_max {
        extract_features(&dataset.normalized_by_max()?)
    } else {
        extract_features(dataset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub features: Vec<FeatureKind>,
    pub distance: DistanceKind,
    pub measure: SimilarityMeasure,
    pub rule: AggregationRule,
    pub normalization: Normalization,
    /// Scale every sample of both datasets to unit peak magnitude first.
    pub normalize_max: bool,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            features: FeatureKind::DEFAULT.to_vec(),
            distance: DistanceKind::Ecs,
            measure: SimilarityMeasure::Wasserstein { p: 2.0 },
            rule: AggregationRule::average(&FeatureKind::DEFAULT),
            normalization: Normalization::MinMax,
            normalize_max: false,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        check_features(&self.features)?;
        self.measure.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityConfig {
    pub features: Vec<FeatureKind>,
    pub measures: BTreeMap<FeatureKind, DiversityMeasure>,
    pub rule: AggregationRule,
    pub normalization: Normalization,
    pub normalize_max: bool,
}

impl DiversityConfig {
    /// Entropy for sparsities, ECS distance-based for spectra, equal-weight average.
    pub fn for_features(features: &[FeatureKind]) -> Self {
        DiversityConfig {
            features: features.to_vec(),
            measures: features
                .iter()
                .map(|f| (*f, DiversityMeasure::default_for(*f)))
                .collect(),
            rule: AggregationRule::average(features),
            normalization: Normalization::None,
            normalize_max: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_features(&self.features)?;
        for f in &self.features {
            self.measures
                .get(f)
                .ok_or_else(|| Error::invalid(format!("no diversity measure given for '{f}'")))?
                .validate()?;
        }
        Ok(())
    }
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig::for_features(&FeatureKind::DEFAULT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum MethodConfig {
    Similarity(SimilarityConfig),
    Diversity(DiversityConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema_version: u32,
    pub per_feature: BTreeMap<FeatureKind, f64>,
    pub normalized: BTreeMap<FeatureKind, f64>,
    pub aggregate: f64,
    pub method_config: MethodConfig,
}

impl QualityReport {
    fn assemble(
        per_feature: BTreeMap<FeatureKind, f64>,
        normalization: Normalization,
        rule: &AggregationRule,
        method_config: MethodConfig,
    ) -> Result<Self> {
        let normalized = match normalization {
            Normalization::None => per_feature.clone(),
            Normalization::MinMax => normalize_map(&per_feature)?,
        };
        let aggregate = aggregate(&normalized, rule)?;
        Ok(QualityReport {
            schema_version: SCHEMA_VERSION,
            per_feature,
            normalized,
            aggregate,
            method_config,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: QualityReport = serde_json::from_str(text)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported report schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Recompute the report from its own configuration. Similarity reports take
    /// both datasets, diversity reports only the first.
    pub fn replay(&self, x: &Dataset, y: Option<&Dataset>) -> Result<QualityReport> {
        match (&self.method_config, y) {
            (MethodConfig::Similarity(cfg), Some(y)) => similarity_report(x, y, cfg),
            (MethodConfig::Diversity(cfg), None) => diversity_report(x, cfg),
            (MethodConfig::Similarity(_), None) => {
                Err(Error::invalid("similarity replay needs two datasets"))
            }
            (MethodConfig::Diversity(_), Some(_)) => {
                Err(Error::invalid("diversity replay takes one dataset"))
            }
        }
    }
}

pub fn similarity_report(
    x: &Dataset,
    y: &Dataset,
    cfg: &SimilarityConfig,
) -> Result<QualityReport> {
    cfg.validate()?;
    if x.shape() != y.shape() {
        return Err(Error::shape(format!(
            "datasets have different sample shapes: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let bx = prepare(x, cfg.normalize_max)?;
    let by = prepare(y, cfg.normalize_max)?;
    similarity_report_bundles(&bx, &by, cfg)
}

pub fn similarity_report_bundles(
    bx: &[FeatureBundle],
    by: &[FeatureBundle],
    cfg: &SimilarityConfig,
) -> Result<QualityReport> {
    cfg.validate()?;
    let per_feature = cfg
        .features
        .iter()
        .map(|&f| Ok((f, feature_difference(bx, by, f, cfg.distance, cfg.measure)?)))
        .collect::<Result<_>>()?;
    QualityReport::assemble(
        per_feature,
        cfg.normalization,
        &cfg.rule,
        MethodConfig::Similarity(cfg.clone()),
    )
}

pub fn diversity_report(dataset: &Dataset, cfg: &DiversityConfig) -> Result<QualityReport> {
    cfg.validate()?;
    let bundles = prepare(dataset, cfg.normalize_max)?;
    diversity_report_bundles(&bundles, cfg)
}

pub fn diversity_report_bundles(
    bundles: &[FeatureBundle],
    cfg: &DiversityConfig,
) -> Result<QualityReport> {
    cfg.validate()?;
    let per_feature = cfg
        .features
        .iter()
        .map(|&f| Ok((f, feature_diversity(bundles, f, &cfg.measures[&f])?)))
        .collect::<Result<_>>()?;
    QualityReport::assemble(
        per_feature,
        cfg.normalization,
        &cfg.rule,
        MethodConfig::Diversity(cfg.clone()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// The `k` most similar candidates.
    TopK(usize),
    /// Every candidate whose aggregate difference is at most the cutoff.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub features: Vec<FeatureKind>,
    pub distance: DistanceKind,
    pub measure: SimilarityMeasure,
    pub rule: AggregationRule,
    pub selector: Selector,
    pub normalize_max: bool,
}

impl SelectionConfig {
    pub fn top_k(k: usize) -> Self {
        SelectionConfig {
            features: FeatureKind::DEFAULT.to_vec(),
            distance: DistanceKind::Ecs,
            measure: SimilarityMeasure::Wasserstein { p: 2.0 },
            rule: AggregationRule::average(&FeatureKind::DEFAULT),
            selector: Selector::TopK(k),
            normalize_max: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDifference {
    pub index: usize,
    pub raw: BTreeMap<FeatureKind, f64>,
    pub normalized: BTreeMap<FeatureKind, f64>,
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub schema_version: u32,
    /// Candidate indices, most similar first.
    pub ranking: Vec<usize>,
    /// One entry per candidate, in ranking order.
    pub differences: Vec<CandidateDifference>,
    /// Ranking by each feature's raw difference alone.
    pub feature_rankings: BTreeMap<FeatureKind, Vec<usize>>,
    pub selected: Vec<usize>,
    pub method_config: SelectionConfig,
}

/// Ascending by value, ties by index.
fn argsort(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

pub fn augment_select(
    reference: &Dataset,
    candidates: &[Dataset],
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate list is empty"));
    }
    if let Some((i, c)) = candidates
        .iter()
        .enumerate()
        .find(|(_, c)| c.shape() != reference.shape())
    {
        return Err(Error::shape(format!(
            "candidate {i} has shape {:?}, reference has {:?}",
            c.shape(),
            reference.shape()
        )));
    }
    let reference = prepare(reference, cfg.normalize_max)?;
    let candidates = candidates
        .par_iter()
        .map(|c| prepare(c, cfg.normalize_max))
        .collect::<Result<Vec<_>>>()?;
    augment_select_bundles(&reference, &candidates, cfg)
}

pub fn augment_select_bundles(
    reference: &[FeatureBundle],
    candidates: &[Vec<FeatureBundle>],
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    check_features(&cfg.features)?;
    cfg.measure.validate()?;
    let n = candidates.len();
    if n == 0 {
        return Err(Error::invalid("candidate list is empty"));
    }
    match cfg.selector {
        Selector::TopK(k) if k == 0 || k > n => {
            return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
        }
        Selector::Threshold(t) if !t.is_finite() => {
            return Err(Error::invalid("selection threshold must be finite"));
        }
        _ => {}
    }

    // raw[c][f]: candidate c, feature f in cfg.features order
    let raw: Vec<Vec<f64>> = candidates
        .par_iter()
        .map(|bundles| {
            cfg.features
                .iter()
                .map(|&f| feature_difference(bundles, reference, f, cfg.distance, cfg.measure))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut normalized = vec![vec![0.0; cfg.features.len()]; n];
    let mut feature_rankings = BTreeMap::new();
    for (j, &f) in cfg.features.iter().enumerate() {
        let column: Vec<f64> = raw.iter().map(|r| r[j]).collect();
        for (c, v) in normalize_scores(&column)?.into_iter().enumerate() {
            normalized[c][j] = v;
        }
        feature_rankings.insert(f, argsort(&column));
    }

    let mut rows = Vec::with_capacity(n);
    for c in 0..n {
        let raw_map: BTreeMap<_, _> = cfg
            .features
            .iter()
            .copied()
            .zip(raw[c].iter().copied())
            .collect();
        let norm_map: BTreeMap<_, _> = cfg
            .features
            .iter()
            .copied()
            .zip(normalized[c].iter().copied())
            .collect();
        let aggregate = aggregate(&norm_map, &cfg.rule)?;
        rows.push(CandidateDifference {
            index: c,
            raw: raw_map,
            normalized: norm_map,
            aggregate,
        });
    }

    let aggregates: Vec<f64> = rows.iter().map(|r| r.aggregate).collect();
    let ranking = argsort(&aggregates);
    let selected = match cfg.selector {
        Selector::TopK(k) => ranking[..k].to_vec(),
        Selector::Threshold(t) => ranking
            .iter()
            .copied()
            .filter(|&c| aggregates[c] <= t)
            .collect(),
    };
    let differences = ranking.iter().map(|&c| rows[c].clone()).collect();
    Ok(SelectionResult {
        schema_version: SCHEMA_VERSION,
        ranking,
        differences,
        feature_rankings,
        selected,
        method_config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(FeatureKind, f64)]) -> BTreeMap<FeatureKind, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_scores(&[1.0, 3.0, 5.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(normalize_scores(&[7.0]).unwrap(), vec![0.0]);
        assert_eq!(normalize_scores(&[2.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(normalize_scores(&[1.0, f64::NAN]).is_err());
        assert!(normalize_scores(&[]).is_err());
    }

    #[test]
    fn aggregate_rules() {
        use FeatureKind::*;
        let v = map(&[(Pdp, 0.2), (Aps, 0.8)]);
        assert_eq!(aggregate(&v, &AggregationRule::Min).unwrap(), 0.2);
        assert_eq!(aggregate(&v, &AggregationRule::Max).unwrap(), 0.8);
        let avg = aggregate(&v, &AggregationRule::average(&[Pdp, Aps])).unwrap();
        assert!((avg - 0.5).abs() < 1e-15);

        let four = map(&[
            (Pdp, 0.1),
            (Aps, 0.2),
            (PdpSparsity, 0.3),
            (ApsSparsity, 0.6),
        ]);
        let mean = aggregate(&four, &AggregationRule::average(&FeatureKind::DEFAULT)).unwrap();
        assert!((mean - 0.3).abs() < 1e-15);

        let single = map(&[(Aps, 0.37)]);
        for rule in [
            AggregationRule::Min,
            AggregationRule::Max,
            AggregationRule::average(&[Aps]),
        ] {
            assert_eq!(aggregate(&single, &rule).unwrap(), 0.37);
        }
    }

    #[test]
    fn aggregate_weight_errors() {
        use FeatureKind::*;
        let v = map(&[(Pdp, 0.2), (Aps, 0.8)]);
        let partial = AggregationRule::WeightedAverage {
            weights: map(&[(Pdp, 1.0)]),
        };
        assert!(aggregate(&v, &partial).is_err());
        let unnormalized = AggregationRule::WeightedAverage {
            weights: map(&[(Pdp, 0.5), (Aps, 0.6)]),
        };
        assert!(aggregate(&v, &unnormalized).is_err());
        let negative = AggregationRule::WeightedAverage {
            weights: map(&[(Pdp, -0.5), (Aps, 1.5)]),
        };
        assert!(aggregate(&v, &negative).is_err());
        assert!(aggregate(&BTreeMap::new(), &AggregationRule::Min).is_err());
    }

    #[test]
    fn argsort_breaks_ties_by_index() {
        assert_eq!(argsort(&[0.5, 0.1, 0.5, 0.1]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn report_json_field_names() {
        let cfg = SimilarityConfig::default();
        let report = QualityReport::assemble(
            map(&[(FeatureKind::Pdp, 1.0), (FeatureKind::Aps, 3.0)]),
            Normalization::MinMax,
            &AggregationRule::Max,
            MethodConfig::Similarity(cfg),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["per_feature"]["pdp"], 1.0);
        assert_eq!(v["normalized"]["aps"], 1.0);
        assert_eq!(v["method_config"]["report"], "similarity");
        assert_eq!(v["method_config"]["measure"]["measure"], "wasserstein");
        let back = QualityReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
