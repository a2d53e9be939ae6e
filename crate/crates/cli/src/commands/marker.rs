//! Synthetic glucose marker from causal effects, compared between the gray
//! zone and the remaining non-diabetics, alongside measured glucose.

use std::path::{Path, PathBuf};

use serde::Serialize;
use vocscreen::causal::CausalReport;
use vocscreen::marker::{compare_groups, evaluate_marker, marker_from_report, report_treatments, GroupComparison};
use vocscreen::stats::Alternative;

use super::classify::{GROUP_GRAY, GROUP_OTHER};
use super::parse_choice;
use crate::io::{self, num};
use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

pub const MARKER: &str = "marker.json";
pub const COMPARISON: &str = "comparison.json";
pub const SCORES: &str = "synthetic_glucose.csv";
pub const SCORE_COLUMN: &str = "synthetic_glucose";

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub data: PathBuf,
    /// Causal report supplying the marker weights.
    #[arg(long)]
    pub report: PathBuf,
    /// CSV with `id,group` columns.
    #[arg(long)]
    pub groups: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Id column of the data file.
    #[arg(long, default_value = "id")]
    pub id: String,
    /// two-sided, greater or less, for group A relative to group B.
    #[arg(long, default_value = "greater")]
    pub alternative: String,
    #[arg(long, default_value = GROUP_GRAY)]
    pub group_a: String,
    #[arg(long, default_value = GROUP_OTHER)]
    pub group_b: String,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub marker: GroupComparison,
    /// Same test on measured glucose, when the data has that column.
    pub glucose: Option<GroupComparison>,
}

#[derive(Debug, serde::Deserialize)]
struct GroupRow {
    id: String,
    group: String,
}

fn read_groups(path: &Path, a: &str, b: &str) -> Result<(Vec<String>, Vec<String>), Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let (mut ga, mut gb) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<GroupRow>() {
        let row = row.map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        if row.group == a {
            ga.push(row.id);
        } else if row.group == b {
            gb.push(row.id);
        }
    }
    Ok((ga, gb))
}

/// Loads a causal report and returns the marker scores for `ds`.
pub fn marker_scores(
    report_path: &Path,
    ds: &vocscreen::data::Dataset,
) -> Result<(vocscreen::marker::MarkerSpec, Vec<f64>, CausalReport), Failure> {
    let report = CausalReport::from_json(&io::read_text(report_path)?)?;
    let source = report_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let spec = marker_from_report(&report, &report_treatments(&report), &source)?;
    let scores = evaluate_marker(&spec, ds)?;
    Ok((spec, scores, report))
}

pub fn run(args: &Args, seed: u64, base: &Path) -> Result<RunManifest, Failure> {
    let alternative: Alternative = parse_choice(&args.alternative)?;
    let ds = io::load_data(&args.data, &args.id)?;
    let (spec, scores, report) = marker_scores(&args.report, &ds)?;
    let (ga, gb) = read_groups(&args.groups, &args.group_a, &args.group_b)?;
    let ids = ds.row_ids();

    let marker = compare_groups(SCORE_COLUMN, ids, &scores, &ga, &gb, alternative)?;
    let glucose_col = report.records.first().map(|r| r.outcome.clone());
    let glucose = match glucose_col.filter(|c| ds.has_column(c)) {
        Some(c) => Some(compare_groups(&c, ids, ds.continuous(&c)?, &ga, &gb, alternative)?),
        None => None,
    };
    let comparison = Comparison { marker, glucose };

    io::ensure_dir(&args.out)?;
    let marker_path = args.out.join(MARKER);
    let comparison_path = args.out.join(COMPARISON);
    let scores_path = args.out.join(SCORES);
    io::write_json(&marker_path, &spec)?;
    io::write_json(&comparison_path, &comparison)?;
    io::write_rows(
        &scores_path,
        &[args.id.as_str(), SCORE_COLUMN],
        ids.iter().zip(&scores).map(|(id, &s)| vec![id.clone(), num(s)]),
    )?;

    let mut m = ManifestBuilder::new("marker", seed, base);
    m.input(&args.data)?;
    m.input(&args.report)?;
    m.input(&args.groups)?;
    m.detail("marker_p_value", comparison.marker.test.p_value)?;
    m.detail("glucose_p_value", comparison.glucose.as_ref().map(|g| g.test.p_value))?;
    super::finish(m, &args.out, &[&marker_path, &comparison_path, &scores_path])
}
