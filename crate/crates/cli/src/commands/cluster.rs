//! Gaussian-mixture stratification over standardized features.

use std::path::{Path, PathBuf};

use serde::Serialize;
use vocscreen::cluster::{pca_project, select_k, validity, ClusterValidity, GmmOptions, SelectionCriterion};
use vocscreen::data::AnalysisView;

use super::parse_choice;
use crate::io::{self, num};
use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

pub const SELECTION: &str = "selection.csv";
pub const VALIDITY: &str = "validity.json";
pub const PCA: &str = "pca.csv";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub roles: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Inclusive range `a..b`, or a comma list.
    #[arg(long, default_value = "1..4")]
    pub k_range: String,
    /// bic or aic.
    #[arg(long, default_value = "bic")]
    pub criterion: String,
    #[arg(long, default_value_t = 2)]
    pub pca_dims: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

/// Parses `a..b` (inclusive) or `a,b,c`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("invalid k range {s:?}"));
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

#[derive(Debug, Serialize)]
struct ValidityReport {
    chosen_k: usize,
    criterion: SelectionCriterion,
    seed: u64,
    restart: usize,
    iterations: usize,
    converged: bool,
    log_likelihood: f64,
    cluster_sizes: Vec<usize>,
    explained_ratio: Vec<f64>,
    validity: ClusterValidity,
}

pub fn run(args: &Args, seed: u64, base: &Path) -> Result<RunManifest, Failure> {
    if args.pca_dims == 0 {
        return Err(Failure::Usage("--pca-dims must be at least 1".into()));
    }
    let ks = parse_k_range(&args.k_range)?;
    let criterion: SelectionCriterion = parse_choice(&args.criterion)?;
    if args.restarts == 0 {
        return Err(Failure::Usage("--restarts must be at least 1".into()));
    }
    let roles = io::load_roles(&args.roles)?;
    let ds = io::load_data(&args.data, &roles.id)?;
    let features = roles.features();
    roles.check_leakage(&features)?;
    let view = AnalysisView::new(&ds, &roles, true)?;
    let (x, _) = view.rows(&features)?;
    let opts = GmmOptions {
        seed,
        restarts: args.restarts,
        max_iter: args.max_iter,
        ..GmmOptions::default()
    };
    let pca = pca_project(&x, args.pca_dims)?;
    let selection = select_k(&x, &ks, criterion, &opts)?;
    let fit = &selection.fit;
    let clusters = fit.hard_labels();
    let truth = view.labels();
    let scores = validity(&x, &clusters, truth)?;
    let mut sizes = vec![0; fit.k];
    for &c in &clusters {
        sizes[c] += 1;
    }

    io::ensure_dir(&args.out)?;
    let selection_path = args.out.join(SELECTION);
    let validity_path = args.out.join(VALIDITY);
    let pca_path = args.out.join(PCA);
    let chosen = selection.table.chosen_k;
    io::write_rows(
        &selection_path,
        &["k", "bic", "aic", "log_likelihood", "parameters", "chosen"],
        selection.table.rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                num(r.bic),
                num(r.aic),
                num(r.log_likelihood),
                r.parameters.to_string(),
                u8::from(r.k == chosen).to_string(),
            ]
        }),
    )?;
    io::write_json(
        &validity_path,
        &ValidityReport {
            chosen_k: chosen,
            criterion,
            seed,
            restart: fit.restart,
            iterations: fit.iterations,
            converged: fit.converged,
            log_likelihood: fit.log_likelihood,
            cluster_sizes: sizes,
            explained_ratio: pca.explained_ratio.clone(),
            validity: scores,
        },
    )?;
    let mut header: Vec<String> = vec![roles.id.clone()];
    header.extend((1..=args.pca_dims).map(|i| format!("pc{i}")));
    header.extend(["cluster".to_string(), "label".to_string()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_rows(
        &pca_path,
        &header_refs,
        view.ids().iter().enumerate().map(|(i, id)| {
            let mut row = vec![id.clone()];
            row.extend(pca.projection[i].iter().map(|&v| num(v)));
            row.push(clusters[i].to_string());
            row.push(truth.map(|t| t[i].to_string()).unwrap_or_default());
            row
        }),
    )?;

    let mut m = ManifestBuilder::new("cluster", seed, base);
    m.config(&args.roles)?;
    m.input(&args.data)?;
    m.detail("chosen_k", chosen)?;
    m.detail("k_range", &ks)?;
    super::finish(m, &args.out, &[&selection_path, &validity_path, &pca_path])
}
