//! Sampled Shapley attribution for a glucose regression forest (optionally
//! fed the synthetic marker) or a diabetes risk forest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vocscreen::attribution::{background_subsample, shapley_sample, summarize, Attribution, FeatureImportance};
use vocscreen::data::{AnalysisView, Column};
use vocscreen::forest::{fit_forest, FeaturesPerSplit, ForestParams};
use vocscreen::rng::{child_seed, permutation, stream};

use super::marker::{marker_scores, SCORE_COLUMN};
use crate::io::{self, num};
use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

pub const SUMMARY: &str = "shap_summary.csv";
pub const VALUES: &str = "shap_values.csv";
pub const REPORT: &str = "attribution.json";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub roles: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// glucose (regression on the outcome) or risk (label probability).
    #[arg(long, default_value = "glucose")]
    pub target: String,
    /// Causal report; adds the synthetic glucose marker as a feature.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Subjects explained, drawn without replacement.
    #[arg(long, default_value_t = 200)]
    pub subjects: usize,
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    /// Background rows used to marginalize absent features.
    #[arg(long, default_value_t = vocscreen::attribution::DEFAULT_BACKGROUND_CAP)]
    pub background: usize,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
}

#[derive(Debug, Serialize)]
struct AttributionReport {
    target: String,
    model: ForestParams,
    features: Vec<String>,
    subjects: usize,
    permutations: usize,
    background: usize,
    base_value: f64,
    max_abs_efficiency_gap: f64,
    ranking: Vec<FeatureImportance>,
}

pub fn run(args: &Args, seed: u64, base: &Path) -> Result<RunManifest, Failure> {
    if args.subjects == 0 || args.permutations == 0 || args.background == 0 {
        return Err(Failure::Usage("--subjects, --permutations and --background must be positive".into()));
    }
    let mut roles = io::load_roles(&args.roles)?;
    let mut ds = io::load_data(&args.data, &roles.id)?;
    if let Some(report) = &args.report {
        let (_, scores, _) = marker_scores(report, &ds)?;
        ds = ds.with_column(SCORE_COLUMN, Column::Continuous(scores))?;
        roles.confounders.push(SCORE_COLUMN.to_string());
    }
    let features = roles.features();
    roles.check_leakage(&features)?;
    let view = AnalysisView::new(&ds, &roles, false)?;
    let (rows, names) = view.rows(&features)?;
    let y: Vec<f64> = match args.target.as_str() {
        "glucose" => view.outcome().to_vec(),
        "risk" => view
            .labels()
            .ok_or_else(|| Failure::Usage("risk target needs a label column".into()))?
            .iter()
            .map(|&l| f64::from(l))
            .collect(),
        other => return Err(Failure::Usage(format!("unknown target {other:?}"))),
    };
    let params = ForestParams {
        trees: args.trees,
        max_depth: args.max_depth,
        min_leaf: args.min_leaf,
        features_per_split: FeaturesPerSplit::All,
        seed,
    };
    let forest = fit_forest(&rows, &y, &params)?;

    let background = background_subsample(&rows, args.background, child_seed(seed, 1));
    let mut chosen = permutation(&mut stream(seed, 2), rows.len());
    chosen.truncate(args.subjects.min(rows.len()));
    chosen.sort_unstable();
    let ids = view.ids();
    let attrs: Vec<Attribution> = chosen
        .par_iter()
        .map(|&i| shapley_sample(&forest, &ids[i], &names, &rows[i], &background, args.permutations, child_seed(seed, 3 + i as u64)))
        .collect::<Result<_, _>>()?;
    let summary = summarize(&attrs)?;

    io::ensure_dir(&args.out)?;
    let summary_path = args.out.join(SUMMARY);
    let values_path = args.out.join(VALUES);
    let report_path = args.out.join(REPORT);
    io::write_rows(
        &summary_path,
        &["rank", "feature", "mean_abs_phi"],
        summary
            .ranking
            .iter()
            .enumerate()
            .map(|(r, f)| vec![(r + 1).to_string(), f.feature.clone(), num(f.mean_abs_phi)]),
    )?;
    io::write_rows(
        &values_path,
        &["subject", "feature", "value", "phi"],
        summary
            .points
            .iter()
            .map(|p| vec![p.subject.clone(), p.feature.clone(), num(p.value), num(p.phi)]),
    )?;
    let report = AttributionReport {
        target: args.target.clone(),
        model: params,
        features: names,
        subjects: attrs.len(),
        permutations: args.permutations,
        background: background.len(),
        base_value: attrs[0].base_value,
        max_abs_efficiency_gap: attrs.iter().map(|a| a.efficiency_gap().abs()).fold(0.0, f64::max),
        ranking: summary.ranking.clone(),
    };
    io::write_json(&report_path, &report)?;

    let mut m = ManifestBuilder::new("attribute", seed, base);
    m.config(&args.roles)?;
    m.input(&args.data)?;
    if let Some(r) = &args.report {
        m.input(r)?;
    }
    m.detail("top_feature", &summary.ranking[0].feature)?;
    super::finish(m, &args.out, &[&summary_path, &values_path, &report_path])
}
