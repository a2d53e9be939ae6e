//! Forward single and joint effects, optional reverse queries, placebo
//! refutation and confounder-subset sensitivity.

use std::path::{Path, PathBuf};

use vocscreen::causal::{
    drop_one_subsets, estimate_ate, refute_placebo, sensitivity, CausalQuery, CausalRecord, CausalReport, Estimator,
};
use vocscreen::data::AnalysisView;
use vocscreen::rng::child_seed;

use super::parse_choice;
use crate::io;
use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

pub const REPORT: &str = "causal_report.json";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub roles: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Placebo permutations per query.
    #[arg(long)]
    pub refute: Option<usize>,
    /// Also estimate the outcome → treatment direction.
    #[arg(long)]
    pub reverse: bool,
    /// `drop-one`, or a JSON file holding a list of confounder subsets.
    #[arg(long)]
    pub sensitivity: Option<String>,
    /// backdoor-regression or ipw (joint queries always use regression).
    #[arg(long, default_value = "backdoor-regression")]
    pub estimator: String,
    /// Z-score treatments and confounders before estimation.
    #[arg(long)]
    pub standardize: bool,
}

fn subsets(spec: &str, confounders: &[String]) -> Result<Vec<Vec<String>>, Failure> {
    if spec == "drop-one" {
        return Ok(drop_one_subsets(confounders));
    }
    let text = io::read_text(Path::new(spec))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{spec}: {e}")))
}

/// The forward queries: one per treatment, then the joint query.
pub fn queries(roles: &vocscreen::data::RoleConfig, estimator: Estimator, reverse: bool) -> Vec<CausalQuery> {
    let mut qs: Vec<CausalQuery> = roles
        .treatments
        .iter()
        .map(|t| CausalQuery::from_roles(roles, std::slice::from_ref(t)).with_estimator(estimator))
        .collect();
    if roles.treatments.len() > 1 {
        qs.push(CausalQuery::from_roles(roles, &roles.treatments));
    }
    if reverse {
        let rev: Vec<CausalQuery> = qs.iter().map(|q| q.clone().reversed()).collect();
        qs.extend(rev);
    }
    qs
}

pub fn run(args: &Args, seed: u64, base: &Path) -> Result<RunManifest, Failure> {
    let estimator: Estimator = parse_choice(&args.estimator)?;
    let roles = io::load_roles(&args.roles)?;
    let ds = io::load_data(&args.data, &roles.id)?;
    let view = AnalysisView::new(&ds, &roles, args.standardize)?;
    let subsets = match &args.sensitivity {
        Some(s) => Some(subsets(s, &roles.confounders)?),
        None => None,
    };
    for subset in subsets.iter().flatten() {
        view.expand(subset)?;
    }

    let mut records = Vec::new();
    for (i, q) in queries(&roles, estimator, args.reverse).iter().enumerate() {
        let record = estimate_ate(&view, q).and_then(|est| {
            let mut rec = CausalRecord::from_estimate(q, &est);
            if let Some(k) = args.refute {
                rec = rec.with_refutation(&refute_placebo(&view, q, k, child_seed(seed, i as u64))?);
            }
            let single_forward = q.treatments.len() == 1 && q.direction == vocscreen::causal::Direction::Forward;
            if let (Some(s), true) = (&subsets, single_forward) {
                rec.sensitivity = Some(sensitivity(&view, q, s)?);
            }
            Ok(rec)
        });
        records.push(record.unwrap_or_else(|e| CausalRecord::failed(q, &e)));
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let report = CausalReport::new(records, args.standardize);

    io::ensure_dir(&args.out)?;
    let report_path = args.out.join(REPORT);
    io::write_json(&report_path, &report)?;

    let mut m = ManifestBuilder::new("causal", seed, base);
    m.config(&args.roles)?;
    m.input(&args.data)?;
    m.detail("estimator", estimator)?;
    m.detail("records", report.records.len())?;
    m.detail("failed_records", failed)?;
    m.detail("refute", args.refute)?;
    let manifest = super::finish(m, &args.out, &[&report_path])?;
    if failed > 0 {
        return Err(Failure::Estimation(format!("{failed} causal queries failed; see {}", report_path.display())));
    }
    Ok(manifest)
}
