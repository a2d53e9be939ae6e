//! The full pipeline on the bundled scenario: simulate, causal, classify,
//! marker, cluster and attribute, each in its own subdirectory.

use std::path::{Path, PathBuf};

use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

use super::{attribute, causal, classify, cluster, marker, simulate, MANIFEST};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Cohort size; the scenario's own size when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// Placebo permutations per causal query.
    #[arg(long, default_value_t = 999)]
    pub refute: usize,
}

pub fn run(args: &Args, seed: u64) -> Result<RunManifest, Failure> {
    let root = args.out.as_path();
    let dir = |name: &str| root.join(name);
    crate::io::ensure_dir(root)?;

    let data = dir("simulate").join("cohort.csv");
    let roles = simulate::roles_path(&data);
    let sim = simulate::run(
        &simulate::Args {
            config: None,
            out: data.clone(),
            n: args.n,
        },
        Some(seed),
        Some(root),
    )?;

    let causal_out = dir("causal");
    causal::run(
        &causal::Args {
            data: data.clone(),
            roles: roles.clone(),
            out: causal_out.clone(),
            refute: Some(args.refute),
            reverse: true,
            sensitivity: Some("drop-one".into()),
            estimator: "backdoor-regression".into(),
            standardize: false,
        },
        seed,
        root,
    )?;
    let report = causal_out.join(causal::REPORT);

    let classify_out = dir("classify");
    let cls = classify::run(
        &classify::Args {
            data: data.clone(),
            roles: roles.clone(),
            out: classify_out.clone(),
            folds: 5,
            model: "logistic".into(),
            lambda: 1.0,
            rank: true,
            gray_threshold: vocscreen::classify::DEFAULT_GRAY_THRESHOLD,
            fallback_top_k: vocscreen::classify::DEFAULT_FALLBACK_TOP_K,
            drop_outliers: true,
            outlier_fence: 1.5,
            trees: 100,
            max_depth: 6,
            min_leaf: 2,
        },
        seed,
        root,
    )?;

    let mk = marker::run(
        &marker::Args {
            data: data.clone(),
            report: report.clone(),
            groups: classify_out.join(classify::GROUPS),
            out: dir("marker"),
            id: "id".into(),
            alternative: "greater".into(),
            group_a: classify::GROUP_GRAY.into(),
            group_b: classify::GROUP_OTHER.into(),
        },
        seed,
        root,
    )?;

    let cl = cluster::run(
        &cluster::Args {
            data: data.clone(),
            roles: roles.clone(),
            out: dir("cluster"),
            k_range: "1..4".into(),
            criterion: "bic".into(),
            pca_dims: 2,
            restarts: 3,
            max_iter: 500,
        },
        seed,
        root,
    )?;

    let at = attribute::run(
        &attribute::Args {
            data,
            roles,
            out: dir("attribute"),
            target: "glucose".into(),
            report: Some(report),
            subjects: 200,
            permutations: 200,
            background: vocscreen::attribution::DEFAULT_BACKGROUND_CAP,
            trees: 100,
            max_depth: 6,
            min_leaf: 5,
        },
        seed,
        root,
    )?;

    let mut m = ManifestBuilder::new("demo", seed, root);
    for p in &artifact_paths(root) {
        m.output(p)?;
    }
    for (key, sub) in [("simulate", &sim), ("classify", &cls), ("marker", &mk), ("cluster", &cl), ("attribute", &at)] {
        for (k, v) in &sub.details {
            m.detail(&format!("{key}.{k}"), v)?;
        }
    }
    m.finish(&root.join(MANIFEST))
}

/// Every file under `root` except the top-level manifest, sorted.
pub fn artifact_paths(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        if let Ok(entries) = std::fs::read_dir(&d) {
            for e in entries.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p != root.join(MANIFEST) {
                    out.push(p);
                }
            }
        }
    }
    out.sort();
    out
}
