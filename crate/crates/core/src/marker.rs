//! Synthetic glucose: a composite marker weighting each VOC by its estimated
//! effect on glucose, plus Mann–Whitney comparisons between subject groups.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::causal::{CausalReport, Direction};
use crate::data::{median, Dataset, Scaling};
use crate::error::{Error, Result};
use crate::stats::{mann_whitney_u, Alternative, UTestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    /// VOC name to weight in outcome units per VOC unit.
    pub coefficients: BTreeMap<String, f64>,
    #[serde(default)]
    pub intercept: f64,
    pub source: String,
    /// Weights are per standard deviation; VOCs are z-scored before weighting.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub standardized: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MarkerSpec {
    pub fn new(coefficients: BTreeMap<String, f64>, source: impl Into<String>) -> MarkerSpec {
        let mut spec = MarkerSpec {
            coefficients,
            intercept: 0.0,
            source: source.into(),
            standardized: false,
            warnings: Vec::new(),
        };
        if spec.coefficients.values().all(|&c| c == 0.0) {
            spec.warnings.push("every marker coefficient is zero; scores are constant".into());
        }
        spec
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<MarkerSpec> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MarkerSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        MarkerSpec::from_json(&text)
    }
}

/// Every treatment named by a forward record, in first-appearance order.
pub fn report_treatments(report: &CausalReport) -> Vec<String> {
    let mut seen = HashSet::new();
    report
        .records
        .iter()
        .filter(|r| r.direction == Direction::Forward)
        .flat_map(|r| r.treatments.iter())
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

/// Marker whose weight for each of `vocs` is that VOC's forward
/// single-treatment effect in `report`.
pub fn marker_from_report(report: &CausalReport, vocs: &[String], source: &str) -> Result<MarkerSpec> {
    if vocs.is_empty() {
        return Err(Error::InvalidArgument("marker needs at least one VOC".into()));
    }
    let mut coefficients = BTreeMap::new();
    for voc in vocs {
        let ate = report
            .forward_effect(voc)
            .ok_or_else(|| Error::Schema(format!("causal report has no forward estimate for {voc}")))?;
        coefficients.insert(voc.clone(), ate);
    }
    let mut spec = MarkerSpec::new(coefficients, source);
    spec.standardized = report.standardized;
    Ok(spec)
}

/// `intercept + Σ w_j · VOC_ij` on raw VOC values (z-scored first for a
/// standardized spec).
pub fn evaluate_marker(spec: &MarkerSpec, ds: &Dataset) -> Result<Vec<f64>> {
    let mut scores = vec![spec.intercept; ds.n_rows()];
    for (name, &w) in &spec.coefficients {
        let values = ds.continuous(name)?;
        let scaling = spec.standardized.then(|| Scaling::of(values));
        for (s, &v) in scores.iter_mut().zip(values) {
            let v = match &scaling {
                Some(sc) => sc.apply(v),
                None => v,
            };
            *s += w * v;
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub variable: String,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
    pub median_a: f64,
    pub median_b: f64,
    pub test: UTestResult,
}

/// Mann–Whitney comparison of `scores` (aligned with `ids`) between two
/// disjoint id sets; `alternative` refers to group A relative to group B.
pub fn compare_groups(
    variable: &str,
    ids: &[String],
    scores: &[f64],
    group_a: &[String],
    group_b: &[String],
    alternative: Alternative,
) -> Result<GroupComparison> {
    if ids.len() != scores.len() {
        return Err(Error::Dimension(format!("{} ids, {} scores", ids.len(), scores.len())));
    }
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::InvalidArgument("comparison groups must be non-empty".into()));
    }
    let a_set: HashSet<&str> = group_a.iter().map(String::as_str).collect();
    if let Some(dup) = group_b.iter().find(|id| a_set.contains(id.as_str())) {
        return Err(Error::InvalidArgument(format!("id {dup} is in both groups")));
    }
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let lookup = |group: &[String]| -> Result<Vec<f64>> {
        group
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| scores[i])
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown subject id {id}")))
            })
            .collect()
    };
    let values_a = lookup(group_a)?;
    let values_b = lookup(group_b)?;
    let test = mann_whitney_u(&values_a, &values_b, alternative)?;
    Ok(GroupComparison {
        variable: variable.to_string(),
        group_a: group_a.to_vec(),
        group_b: group_b.to_vec(),
        median_a: median(&values_a),
        median_b: median(&values_b),
        values_a,
        values_b,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::{CausalEstimate, CausalQuery, CausalRecord, Estimator};
    use crate::data::Column;

    const VOCS: [&str; 4] = ["acetone", "isopropanol", "isoprene", "ethanol"];
    const TABLE: [f64; 4] = [5.400, -2.8, 23.086, 67.109];

    fn report(pairs: &[(&str, f64)]) -> CausalReport {
        let records = pairs
            .iter()
            .map(|&(voc, ate)| {
                let q = CausalQuery::forward(&[voc], "glucose", &[]);
                let est = CausalEstimate {
                    ate,
                    components: vec![ate],
                    standard_errors: vec![],
                    estimator: Estimator::BackdoorRegression,
                    direction: Direction::Forward,
                    confounders: vec![],
                    dichotomized_at: None,
                };
                CausalRecord::from_estimate(&q, &est)
            })
            .collect();
        CausalReport::new(records, false)
    }

    fn names() -> Vec<String> {
        VOCS.iter().map(|s| s.to_string()).collect()
    }

    fn dataset(rows: &[[f64; 4]]) -> Dataset {
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let cols = (0..4).map(|j| Column::Continuous(rows.iter().map(|r| r[j]).collect())).collect();
        Dataset::new("id", ids, names(), cols).unwrap()
    }

    fn table_spec() -> MarkerSpec {
        let pairs: Vec<(&str, f64)> = VOCS.iter().copied().zip(TABLE).collect();
        marker_from_report(&report(&pairs), &names(), "report.json").unwrap()
    }

    #[test]
    fn coefficients_from_report() {
        let spec = table_spec();
        for (voc, ate) in VOCS.iter().zip(TABLE) {
            assert_eq!(spec.coefficients[*voc], ate);
        }
        assert_eq!(spec.intercept, 0.0);
        assert_eq!(spec.source, "report.json");
        assert!(spec.warnings.is_empty());
    }

    #[test]
    fn missing_voc_named() {
        let r = report(&[("acetone", 1.0), ("isopropanol", 1.0), ("ethanol", 1.0)]);
        let err = marker_from_report(&r, &names(), "r").unwrap_err();
        assert!(err.to_string().contains("isoprene"), "{err}");
    }

    #[test]
    fn all_zero_warns() {
        let pairs: Vec<(&str, f64)> = VOCS.iter().map(|&v| (v, 0.0)).collect();
        let spec = marker_from_report(&report(&pairs), &names(), "r").unwrap();
        assert_eq!(spec.warnings.len(), 1);
        let scores = evaluate_marker(&spec, &dataset(&[[1.0, 2.0, 3.0, 4.0]])).unwrap();
        assert_eq!(scores, vec![0.0]);
    }

    #[test]
    fn evaluation_examples() {
        let spec = table_spec();
        let ds = dataset(&[[1.0; 4], [0.0; 4], [2.0; 4], [0.3, 1.7, 0.2, 0.05]]);
        let s = evaluate_marker(&spec, &ds).unwrap();
        assert!((s[0] - 92.795).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!((s[2] - 2.0 * s[0]).abs() < 1e-12);
        let direct = 5.4 * 0.3 - 2.8 * 1.7 + 23.086 * 0.2 + 67.109 * 0.05;
        assert!((s[3] - direct).abs() < 1e-12);
    }

    #[test]
    fn missing_column_errors() {
        let mut spec = table_spec();
        spec.coefficients.insert("toluene".into(), 1.0);
        assert!(evaluate_marker(&spec, &dataset(&[[1.0; 4]])).is_err());
    }

    #[test]
    fn json_shape() {
        let spec = table_spec();
        let v: serde_json::Value = serde_json::from_str(&spec.to_json().unwrap()).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, vec!["coefficients", "intercept", "source"]);
        assert_eq!(MarkerSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
    }

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn separated_groups_exact_p() {
        let all: Vec<String> = ids("g", 3).into_iter().chain(ids("o", 3)).collect();
        let scores = [10.0, 11.0, 12.0, 1.0, 2.0, 3.0];
        let c = compare_groups("m", &all, &scores, &ids("g", 3), &ids("o", 3), Alternative::Greater).unwrap();
        assert!((c.test.p_value - 0.05).abs() < 1e-12);
        assert_eq!((c.median_a, c.median_b), (11.0, 2.0));
    }

    #[test]
    fn tied_groups_p_one() {
        let all: Vec<String> = ids("g", 3).into_iter().chain(ids("o", 3)).collect();
        let c = compare_groups("m", &all, &[4.0; 6], &ids("g", 3), &ids("o", 3), Alternative::TwoSided).unwrap();
        assert_eq!(c.test.p_value, 1.0);
    }

    #[test]
    fn group_errors() {
        let all = ids("g", 4);
        let s = [1.0, 2.0, 3.0, 4.0];
        let a = vec!["g0".to_string(), "g1".into()];
        assert!(compare_groups("m", &all, &s, &a, &["g1".into(), "g2".into()], Alternative::Greater).is_err());
        assert!(compare_groups("m", &all, &s, &a, &["x9".into()], Alternative::Greater).is_err());
        assert!(compare_groups("m", &all, &s, &a, &[], Alternative::Greater).is_err());
    }

    #[test]
    fn p_invariant_under_positive_scaling() {
        let spec = table_spec();
        let mut scaled = spec.clone();
        scaled.coefficients.values_mut().for_each(|c| *c *= 3.7);
        let rows: Vec<[f64; 4]> = (0..12)
            .map(|i| {
                let x = i as f64;
                [x.sin() + 2.0, (x * 0.7).cos() + 2.0, 0.1 * x, 0.05 * (x % 5.0)]
            })
            .collect();
        let ds = dataset(&rows);
        let a: Vec<String> = ds.row_ids()[..5].to_vec();
        let b: Vec<String> = ds.row_ids()[5..].to_vec();
        let s1 = evaluate_marker(&spec, &ds).unwrap();
        let s2 = evaluate_marker(&scaled, &ds).unwrap();
        for (x, y) in s1.iter().zip(&s2) {
            assert!((3.7 * x - y).abs() < 1e-9);
        }
        let p1 = compare_groups("m", ds.row_ids(), &s1, &a, &b, Alternative::TwoSided).unwrap();
        let p2 = compare_groups("m", ds.row_ids(), &s2, &a, &b, Alternative::TwoSided).unwrap();
        assert_eq!(p1.test.p_value, p2.test.p_value);
    }
}
