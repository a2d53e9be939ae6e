use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vocscreen::data::RoleConfig;
use vocscreen::scm::{self, ScmConfig};

use crate::io;
use crate::manifest::ManifestBuilder;
use crate::{Failure, RunManifest};

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Model config JSON; the bundled demo scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's sample size.
    #[arg(long)]
    pub n: Option<usize>,
}

/// Roles file written next to a simulated cohort.
pub fn roles_path(csv: &Path) -> PathBuf {
    csv.with_extension("roles.json")
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

pub fn run(args: &Args, seed: Option<u64>, base: Option<&Path>) -> Result<RunManifest, Failure> {
    let mut cfg = match &args.config {
        Some(p) => ScmConfig::load(p)?,
        None => scm::demo_config(),
    };
    if let Some(n) = args.n {
        cfg = cfg.with_n(n);
    }
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let sim = cfg.simulate_detailed()?;

    let dir = args.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    io::ensure_dir(dir)?;
    sim.dataset.write_csv(&args.out)?;
    let roles = RoleConfig {
        treatments: cfg.treatment_names(),
        outcome: cfg.outcome.name.clone(),
        confounders: cfg.confounder_names(),
        label: cfg.label.as_ref().map(|l| l.name.clone()),
        id: sim.dataset.id_name().to_string(),
    };
    let roles_file = roles_path(&args.out);
    io::write_json(&roles_file, &roles)?;

    let mut m = ManifestBuilder::new("simulate", cfg.seed, base.unwrap_or(dir));
    if let Some(p) = &args.config {
        m.config(p)?;
    }
    let true_ate: BTreeMap<String, f64> = cfg
        .treatment_names()
        .into_iter()
        .map(|t| {
            let b = cfg.true_ate(&t)?;
            Ok((t, b))
        })
        .collect::<Result<_, vocscreen::Error>>()?;
    m.detail("n", cfg.n)?;
    m.detail("true_ate", true_ate)?;
    m.detail("planted_gray_zone", &sim.gray_zone)?;
    m.output(&args.out)?;
    m.output(&roles_file)?;
    m.finish(&manifest_path(&args.out))
}
