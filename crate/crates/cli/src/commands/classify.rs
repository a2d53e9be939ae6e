//! Cross-validated diabetes classification, risk ranking and gray-zone
//! extraction.

use std::path::{Path, PathBuf};

use serde::Serialize;
use vocscreen::classify::{
    cross_validate, gray_zone, risk_rank, CvMetrics, Metrics, ModelSpec, ProbabilitySource, RiskRanking,
};
use vocscreen::data::{AnalysisView, ColumnKind, Dataset, RoleConfig};
use vocscreen::forest::{FeaturesPerSplit, ForestParams};

use crate::io::{self, num};
use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

pub const METRICS: &str = "metrics.json";
pub const RANKING: &str = "ranking.csv";
pub const GRAY_ZONE: &str = "gray_zone.csv";
pub const GROUPS: &str = "groups.csv";
pub const RISK_PLOT: &str = "risk_plot.csv";

pub const GROUP_GRAY: &str = "gray_zone";
pub const GROUP_OTHER: &str = "other";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub roles: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// logistic or forest.
    #[arg(long, default_value = "logistic")]
    pub model: String,
    /// Ridge penalty of the logistic model.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Write the ranking, gray-zone, group and plot files.
    #[arg(long)]
    pub rank: bool,
    #[arg(long, default_value_t = vocscreen::classify::DEFAULT_GRAY_THRESHOLD)]
    pub gray_threshold: f64,
    /// Non-diabetics flagged when none reach the threshold; 0 disables.
    #[arg(long, default_value_t = vocscreen::classify::DEFAULT_FALLBACK_TOP_K)]
    pub fallback_top_k: usize,
    /// Also report metrics after removing IQR outliers in the features.
    #[arg(long)]
    pub drop_outliers: bool,
    #[arg(long, default_value_t = 1.5)]
    pub outlier_fence: f64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_leaf: usize,
}

impl Args {
    fn spec(&self, seed: u64) -> Result<ModelSpec, Failure> {
        let spec = match self.model.as_str() {
            "logistic" => ModelSpec::Logistic { lambda: self.lambda },
            "forest" => ModelSpec::Forest(ForestParams {
                trees: self.trees,
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
                features_per_split: FeaturesPerSplit::Sqrt,
                seed,
            }),
            other => return Err(Failure::Usage(format!("unknown model {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Serialize)]
struct CvSummary {
    n: usize,
    per_fold: Vec<Metrics>,
    mean: Metrics,
    pooled: Metrics,
}

impl CvSummary {
    fn of(cv: &CvMetrics) -> CvSummary {
        CvSummary {
            n: cv.oof_probability.len(),
            per_fold: cv.per_fold.clone(),
            mean: cv.mean,
            pooled: cv.pooled,
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    model: ModelSpec,
    folds: usize,
    seed: u64,
    features: Vec<String>,
    all_subjects: CvSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    without_outliers: Option<CvSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    removed_ids: Option<Vec<String>>,
}

fn evaluate(ds: &Dataset, roles: &RoleConfig, spec: &ModelSpec, folds: usize, seed: u64) -> Result<(AnalysisView, CvMetrics), Failure> {
    let view = AnalysisView::new(ds, roles, true)?;
    let cv = cross_validate(&view, &roles.features(), spec, folds, seed)?;
    Ok((view, cv))
}

pub fn run(args: &Args, seed: u64, base: &Path) -> Result<RunManifest, Failure> {
    let spec = args.spec(seed)?;
    let roles = io::load_roles(&args.roles)?;
    if roles.label.is_none() {
        return Err(Failure::Usage("classification needs a label column in the roles file".into()));
    }
    let ds = io::load_data(&args.data, &roles.id)?;
    let features = roles.features();
    roles.check_leakage(&features)?;
    let (view, cv) = evaluate(&ds, &roles, &spec, args.folds, seed)?;

    let mut report = MetricsReport {
        model: spec.clone(),
        folds: args.folds,
        seed,
        features: features.clone(),
        all_subjects: CvSummary::of(&cv),
        without_outliers: None,
        removed_ids: None,
    };
    if args.drop_outliers {
        let continuous: Vec<String> = features
            .iter()
            .filter(|f| ds.column(f).map(|c| c.kind() == ColumnKind::Continuous).unwrap_or(false))
            .cloned()
            .collect();
        let (kept, removed) = ds.filter_outliers(&continuous, args.outlier_fence)?;
        let (_, cv_kept) = evaluate(&kept, &roles, &spec, args.folds, seed)?;
        report.without_outliers = Some(CvSummary::of(&cv_kept));
        report.removed_ids = Some(removed);
    }

    io::ensure_dir(&args.out)?;
    let metrics_path = args.out.join(METRICS);
    io::write_json(&metrics_path, &report)?;
    let mut outputs = vec![metrics_path];

    let mut m = ManifestBuilder::new("classify", seed, base);
    m.config(&args.roles)?;
    m.input(&args.data)?;
    m.detail("pooled_f1", cv.pooled.f1)?;
    m.detail("pooled_auc", cv.pooled.auc)?;
    if let Some(removed) = &report.removed_ids {
        m.detail("removed_ids", removed)?;
        m.detail("f1_without_outliers", report.without_outliers.as_ref().map(|s| s.pooled.f1))?;
    }

    if args.rank {
        let labels = view.labels().expect("label checked above");
        let ranking = risk_rank(view.ids(), &cv.oof_probability, labels, ProbabilitySource::OutOfFold)?;
        let fallback = (args.fallback_top_k > 0).then_some(args.fallback_top_k);
        let gz = gray_zone(&ranking, args.gray_threshold, fallback)?;
        outputs.extend(write_ranking(&args.out, &ds, &roles, &ranking, &gz.ids)?);
        m.detail("gray_zone", &gz.ids)?;
        m.detail("gray_zone_fallback", gz.used_fallback)?;
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    super::finish(m, &args.out, &refs)
}

fn write_ranking(
    dir: &Path,
    ds: &Dataset,
    roles: &RoleConfig,
    ranking: &RiskRanking,
    gray: &[String],
) -> Result<Vec<PathBuf>, Failure> {
    let paths: Vec<PathBuf> = [RANKING, GRAY_ZONE, GROUPS, RISK_PLOT].iter().map(|f| dir.join(f)).collect();
    let entries = &ranking.entries;
    io::write_rows(
        &paths[0],
        &["rank", "id", "probability", "label"],
        entries
            .iter()
            .enumerate()
            .map(|(i, e)| vec![(i + 1).to_string(), e.id.clone(), num(e.probability), e.label.to_string()]),
    )?;
    io::write_rows(
        &paths[1],
        &["id", "probability"],
        entries
            .iter()
            .filter(|e| gray.contains(&e.id))
            .map(|e| vec![e.id.clone(), num(e.probability)]),
    )?;
    io::write_rows(
        &paths[2],
        &["id", "group"],
        entries.iter().filter(|e| e.label == 0).map(|e| {
            let g = if gray.contains(&e.id) { GROUP_GRAY } else { GROUP_OTHER };
            vec![e.id.clone(), g.to_string()]
        }),
    )?;
    let outcome = ds.continuous(&roles.outcome)?;
    let index = ds.row_index();
    io::write_rows(
        &paths[3],
        &["rank", "id", "probability", "label", roles.outcome.as_str()],
        entries.iter().enumerate().map(|(i, e)| {
            vec![
                (i + 1).to_string(),
                e.id.clone(),
                num(e.probability),
                e.label.to_string(),
                num(outcome[index[e.id.as_str()]]),
            ]
        }),
    )?;
    Ok(paths)
}
