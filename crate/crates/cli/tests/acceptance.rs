//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use vocscreen::attribution::{column_means, shapley_linear, shapley_sample, LinearScore};
use vocscreen::causal::{estimate_ate, refute_placebo, sensitivity, CausalQuery};
use vocscreen::classify::{auc, cross_validate, ModelSpec};
use vocscreen::cluster::{ari, fit_gmm, nmi, select_k, silhouette, GmmFit, GmmOptions, SelectionCriterion};
use vocscreen::data::{AnalysisView, Column, Dataset, RoleConfig};
use vocscreen::rng::stream;
use vocscreen::scm::{self, ConfounderSpec, OutcomeSpec, ScmConfig, TreatmentSpec};
use vocscreen::stats::{exact_u_counts, mann_whitney_u, Alternative, UMethod};
use vocscreen_cli::commands::demo::artifact_paths;

type Outcome = Result<String, String>;

fn demo_roles(cfg: &ScmConfig) -> RoleConfig {
    RoleConfig {
        treatments: cfg.treatment_names(),
        outcome: cfg.outcome.name.clone(),
        confounders: cfg.confounder_names(),
        label: cfg.label.as_ref().map(|l| l.name.clone()),
        id: "id".into(),
    }
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn recovery() -> Outcome {
    let t0 = Instant::now();
    let cfg = scm::demo_config().with_n(5000);
    let ds = cfg.simulate().map_err(err)?;
    let roles = demo_roles(&cfg);
    let view = AnalysisView::new(&ds, &roles, false).map_err(err)?;
    let mut notes = Vec::new();
    let mut ok = true;
    for t in cfg.treatment_names() {
        let beta = cfg.true_ate(&t).map_err(err)?;
        let ate = estimate_ate(&view, &CausalQuery::from_roles(&roles, &[t.clone()])).map_err(err)?.ate;
        let pass = if beta.abs() < 5.0 {
            (ate - beta).abs() <= 0.5
        } else {
            (ate - beta).abs() <= 0.05 * beta.abs()
        };
        ok &= pass;
        notes.push(format!("{t} {ate:.3} vs {beta}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(ok && secs < 10.0, format!("{}; {secs:.2}s", notes.join(", ")))
}

fn confounding() -> Outcome {
    let cfg = scm::demo_config().with_n(5000);
    let ds = cfg.simulate().map_err(err)?;
    let roles = demo_roles(&cfg);
    let view = AnalysisView::new(&ds, &roles, false).map_err(err)?;
    let mut biased = 0;
    let mut all_match = true;
    let mut notes = Vec::new();
    for t in cfg.treatment_names() {
        let beta = cfg.true_ate(&t).map_err(err)?;
        let q = CausalQuery::from_roles(&roles, &[t.clone()]).with_confounders(vec![]);
        let naive = estimate_ate(&view, &q).map_err(err)?.ate;
        let predicted = cfg.population_regression(&cfg.outcome.name, &[t.clone()]).map_err(err)?[0];
        if (naive - beta).abs() > 0.10 * beta.abs() {
            biased += 1;
        }
        let dev = (naive - predicted).abs() / predicted.abs();
        all_match &= dev <= 0.15;
        notes.push(format!("{t} naive {naive:.2} predicted {predicted:.2}"));
    }
    ensure(biased >= 1 && all_match, format!("{biased} biased; {}", notes.join(", ")))
}

fn refutation() -> Outcome {
    let t0 = Instant::now();
    let cfg = scm::demo_config();
    let ds = cfg.simulate().map_err(err)?;
    let roles = demo_roles(&cfg);
    let view = AnalysisView::new(&ds, &roles, false).map_err(err)?;
    let mut queries: Vec<CausalQuery> =
        cfg.treatment_names().iter().map(|t| CausalQuery::from_roles(&roles, std::slice::from_ref(t))).collect();
    queries.push(CausalQuery::from_roles(&roles, &cfg.treatment_names()));
    let mut signal_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for (i, q) in queries.iter().enumerate() {
        let r = refute_placebo(&view, q, 999, i as u64).map_err(err)?;
        let ratio = (r.mean_placebo_effect / r.original_ate).abs();
        worst_ratio = worst_ratio.max(ratio);
        signal_ok &= r.p_value == 1.0 / 1000.0 && ratio < 0.02;
    }

    let mut null_cfg = scm::demo_config().with_n(500);
    null_cfg.outcome.beta.iter_mut().for_each(|b| *b = 0.0);
    null_cfg.label = None;
    null_cfg.gray_zone = None;
    let mut above = 0;
    for s in 0..20u64 {
        let cfg = null_cfg.clone().with_seed(1000 + s);
        let ds = cfg.simulate().map_err(err)?;
        let roles = demo_roles(&cfg);
        let view = AnalysisView::new(&ds, &roles, false).map_err(err)?;
        let q = CausalQuery::from_roles(&roles, &["acetone".to_string()]);
        if refute_placebo(&view, &q, 999, s).map_err(err)?.p_value > 0.05 {
            above += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(
        signal_ok && above >= 17 && secs < 60.0,
        format!("signal p = 0.001, max |placebo/ATE| {worst_ratio:.4}; null p > 0.05 in {above}/20; {secs:.1}s"),
    )
}

fn reverse_oracle() -> Outcome {
    let cfg = ScmConfig {
        confounders: vec![ConfounderSpec { name: "c".into(), mean: 0.0, sd: 1.0 }],
        treatments: vec![TreatmentSpec { name: "t".into(), intercept: 0.0, alpha: vec![0.0], noise_sd: 1.0 }],
        outcome: OutcomeSpec { name: "y".into(), intercept: 0.0, beta: vec![1.0], gamma: vec![0.0], noise_sd: 1.0 },
        label: None,
        gray_zone: None,
        n: 20000,
        seed: 99,
    };
    let ds = cfg.simulate().map_err(err)?;
    let roles = RoleConfig {
        treatments: vec!["t".into()],
        outcome: "y".into(),
        confounders: vec!["c".into()],
        label: None,
        id: "id".into(),
    };
    let view = AnalysisView::new(&ds, &roles, false).map_err(err)?;
    let q = CausalQuery::from_roles(&roles, &["t".to_string()]).reversed();
    let coef = estimate_ate(&view, &q).map_err(err)?.ate;
    ensure((coef - 0.5).abs() <= 0.02, format!("reverse coefficient {coef:.4}"))
}

fn sensitivity_check() -> Outcome {
    let cfg = scm::demo_config().with_n(5000);
    let ds = cfg.simulate().map_err(err)?;
    let roles = demo_roles(&cfg);
    let view = AnalysisView::new(&ds, &roles, false).map_err(err)?;
    let conf = cfg.confounder_names();
    let without = |c: &str| conf.iter().filter(|x| *x != c).cloned().collect::<Vec<_>>();
    let q = CausalQuery::from_roles(&roles, &["acetone".to_string()]);
    let rep = sensitivity(&view, &q, &[without("height"), without("age")]).map_err(err)?;
    let neutral = rep.entries[0].percent_change.unwrap_or(f64::NAN);
    let confounder = rep.entries[1].percent_change.unwrap_or(f64::NAN);
    ensure(
        neutral < 1.0 && confounder > 10.0,
        format!("acetone: height changes {neutral:.2}%, age changes {confounder:.1}%"),
    )
}

/// Tail counts of U by enumerating every assignment of ranks to sample A.
fn enumerate_u(m: usize, n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; m * n + 1];
    for mask in 0u32..(1 << (m + n)) {
        if mask.count_ones() as usize != m {
            continue;
        }
        counts[u_of_mask(mask, m + n)] += 1;
    }
    counts
}

/// U of sample A when A holds the ranks set in `mask` (rank r = bit r).
fn u_of_mask(mask: u32, total: usize) -> usize {
    let mut u = 0;
    let mut below_b = 0;
    for r in 0..total {
        if mask & (1 << r) != 0 {
            u += below_b;
        } else {
            below_b += 1;
        }
    }
    u
}

fn mann_whitney_exact() -> Outcome {
    let mut checked = 0;
    for m in 1..=8 {
        for n in 1..=8 {
            let counts = enumerate_u(m, n);
            if counts != exact_u_counts(m, n) {
                return Err(format!("count table differs at {m}+{n}"));
            }
            let total: u64 = counts.iter().sum();
            let mut seen = vec![false; m * n + 1];
            for mask in 0u32..(1 << (m + n)) {
                if mask.count_ones() as usize != m {
                    continue;
                }
                let u = u_of_mask(mask, m + n);
                if std::mem::replace(&mut seen[u], true) {
                    continue;
                }
                let a: Vec<f64> = (0..m + n).filter(|r| mask & (1 << r) != 0).map(|r| r as f64).collect();
                let b: Vec<f64> = (0..m + n).filter(|r| mask & (1 << r) == 0).map(|r| r as f64).collect();
                let ge = counts[u..].iter().sum::<u64>() as f64 / total as f64;
                let le = counts[..=u].iter().sum::<u64>() as f64 / total as f64;
                for (alt, want) in [
                    (Alternative::Greater, ge),
                    (Alternative::Less, le),
                    (Alternative::TwoSided, (2.0 * ge.min(le)).min(1.0)),
                ] {
                    let r = mann_whitney_u(&a, &b, alt).map_err(err)?;
                    if r.method != UMethod::Exact || r.u_statistic != u as f64 || r.p_value.to_bits() != want.to_bits() {
                        return Err(format!("{m}+{n}, U={u}, {alt:?}: got {} want {want}", r.p_value));
                    }
                    checked += 1;
                }
            }
        }
    }
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).map_err(err)?;
    ensure(
        r.u_statistic == 0.0 && (r.p_value - 0.1).abs() < 1e-15,
        format!("{checked} exact p-values identical to enumeration; (1,2,3) vs (4,5,6): U={}, p={}", r.u_statistic, r.p_value),
    )
}

fn auc_identity() -> Outcome {
    let mut rng = stream(7, 0);
    for set in 0..1000 {
        let n = rng.random_range(2..60);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse grid so ties occur
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..20) as f64 / 4.0).collect();
        let (mut wins, mut pos, mut neg) = (0.0, 0.0, 0.0);
        for i in 0..n {
            if labels[i] == 1 {
                pos += 1.0;
            } else {
                neg += 1.0;
            }
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let pairwise = wins / (pos * neg);
        let ranked = auc(&labels, &scores).map_err(err)?;
        if ranked != pairwise {
            return Err(format!("set {set}: rank AUC {ranked} vs pairwise {pairwise}"));
        }
    }
    Ok("1000 sets, rank AUC == pairwise AUC exactly".into())
}

fn cohort(seed: u64, n: usize, shift: f64) -> (Dataset, RoleConfig) {
    let mut rng = stream(seed, 0);
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let feature = |rng: &mut vocscreen::rng::StreamRng, l: f64| {
        let z: f64 = rng.sample(StandardNormal);
        z + shift * (2.0 * l - 1.0)
    };
    let x1: Vec<f64> = labels.iter().map(|&l| feature(&mut rng, l)).collect();
    let x2: Vec<f64> = labels.iter().map(|&l| feature(&mut rng, l)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let ids = (0..n).map(|i| format!("R{i:03}")).collect();
    let ds = Dataset::new(
        "id",
        ids,
        vec!["x1".into(), "x2".into(), "c".into(), "y".into(), "label".into()],
        vec![
            Column::Continuous(x1),
            Column::Continuous(x2),
            Column::Continuous(c),
            Column::Continuous(y),
            Column::Continuous(labels),
        ],
    )
    .expect("valid cohort");
    let roles = RoleConfig {
        treatments: vec!["x1".into(), "x2".into()],
        outcome: "y".into(),
        confounders: vec!["c".into()],
        label: Some("label".into()),
        id: "id".into(),
    };
    (ds, roles)
}

fn classifier_sanity() -> Outcome {
    let spec = ModelSpec::Logistic { lambda: 1.0 };
    let (ds, roles) = cohort(1, 200, 3.0);
    let view = AnalysisView::new(&ds, &roles, true).map_err(err)?;
    let f1 = cross_validate(&view, &roles.features(), &spec, 5, 1).map_err(err)?.pooled.f1;
    let mut total = 0.0;
    for seed in 0..20 {
        let (ds, roles) = cohort(100 + seed, 200, 0.0);
        let view = AnalysisView::new(&ds, &roles, true).map_err(err)?;
        total += cross_validate(&view, &roles.features(), &spec, 5, seed).map_err(err)?.pooled.auc;
    }
    let mean_auc = total / 20.0;
    ensure(
        f1 >= 0.95 && (0.4..=0.6).contains(&mean_auc),
        format!("separable F1 {f1:.3}; noise mean AUC {mean_auc:.3}"),
    )
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(err)
}

fn gray_zone_pipeline(demo: &Path) -> Outcome {
    let c = read_json(&demo.join("marker/comparison.json"))?;
    let marker = c["marker"]["test"]["p_value"].as_f64().ok_or("missing marker p")?;
    let glucose = c["glucose"]["test"]["p_value"].as_f64().ok_or("missing glucose p")?;
    ensure(
        marker <= 0.05 && glucose >= 0.3,
        format!("marker p {marker:.2e}, glucose p {glucose:.3}"),
    )
}

fn monotone(fit: &GmmFit) -> bool {
    fit.trace.windows(2).all(|w| w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()))
}

fn gmm() -> Outcome {
    let mut all_monotone = true;

    let mut rng = stream(3, 0);
    let two: Vec<Vec<f64>> = (0..400)
        .map(|i| {
            let c = if i < 200 { 0.0 } else { 10.0 };
            vec![c + rng.sample::<f64, _>(StandardNormal), c + rng.sample::<f64, _>(StandardNormal)]
        })
        .collect();
    let fit = fit_gmm(&two, 2, &GmmOptions::default()).map_err(err)?;
    all_monotone &= monotone(&fit);
    let dist = |m: &[f64], c: f64| ((m[0] - c).powi(2) + (m[1] - c).powi(2)).sqrt();
    let (m0, m1) = (&fit.means[0], &fit.means[1]);
    let err_means = (dist(m0, 0.0).max(dist(m1, 10.0))).min(dist(m0, 10.0).max(dist(m1, 0.0)));
    let recovered = err_means <= 0.3;

    let cfg = scm::demo_config();
    let ds = cfg.simulate().map_err(err)?;
    let roles = demo_roles(&cfg);
    let view = AnalysisView::new(&ds, &roles, true).map_err(err)?;
    let (x, _) = view.rows(&roles.features()).map_err(err)?;
    let mut picks_two = 0;
    for seed in 0..20 {
        let opts = GmmOptions { seed, restarts: 1, ..GmmOptions::default() };
        let sel = select_k(&x, &[1, 2, 3, 4], SelectionCriterion::Bic, &opts).map_err(err)?;
        all_monotone &= monotone(&sel.fit);
        if sel.table.chosen_k == 2 {
            picks_two += 1;
        }
    }

    let same = ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).map_err(err)?;
    let crossed = ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).map_err(err)?;
    let nmi_same = nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).map_err(err)?;
    let nmi_crossed = nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).map_err(err)?;
    let pts: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
    let sil = silhouette(&pts, &[0, 0, 1, 1]).map_err(err)?;
    let sil_hand = 1.0 - (1.0 / 10.5 + 1.0 / 9.5) / 2.0;
    let hand = (same - 1.0).abs() < 1e-9
        && (crossed + 0.5).abs() < 1e-9
        && (nmi_same - 1.0).abs() < 1e-9
        && nmi_crossed.abs() < 1e-9
        && (sil - sil_hand).abs() < 1e-9;

    ensure(
        all_monotone && recovered && picks_two >= 18 && hand,
        format!(
            "monotone {all_monotone}; two-Gaussian mean error {err_means:.3}; BIC k=2 in {picks_two}/20; hand examples {}",
            if hand { "match" } else { "differ" }
        ),
    )
}

fn shapley(demo: &Path) -> Outcome {
    let mut rng = stream(11, 0);
    let d = 5;
    let model = LinearScore {
        intercept: 0.7,
        coefficients: (0..d).map(|j| j as f64 - 2.0 + 0.5).collect(),
    };
    let features: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    let background: Vec<Vec<f64>> =
        (0..200).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect()).collect();
    let x: Vec<f64> = (0..d).map(|j| j as f64 - 1.0).collect();
    let exact = shapley_linear(&model, "s", &features, &x, &column_means(&background)).map_err(err)?;
    let exact_gap = exact.efficiency_gap().abs();
    let sampled = shapley_sample(&model, "s", &features, &x, &background, 2000, 5).map_err(err)?;
    let se = sampled.standard_errors.clone().ok_or("no standard errors")?;
    let eff_se = sampled.efficiency_se.ok_or("no efficiency se")?;
    let sampled_gap = sampled.efficiency_gap().abs();
    let within = (0..d).all(|j| (sampled.phi[j] - exact.phi[j]).abs() <= 3.0 * se[j].max(1e-12));
    let efficient = sampled_gap <= 3.0 * eff_se.max(1e-12);

    let report = read_json(&demo.join("attribute/attribution.json"))?;
    let top = report["ranking"][0]["feature"].as_str().unwrap_or("").to_string();
    ensure(
        exact_gap <= 1e-8 && efficient && within && top == "synthetic_glucose",
        format!(
            "exact gap {exact_gap:.1e}; sampled gap {sampled_gap:.2e} (se {eff_se:.2e}); sampled within 3 SE of exact: {within}; demo top feature {top}"
        ),
    )
}

fn run_demo(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_vocscreen"))
        .args(["demo", "--out"])
        .arg(out)
        .env_remove("VOCSCREEN_SEED")
        .status()
        .map_err(err)?;
    ensure(status.success(), format!("demo exited with {status}")).map(|_| ())
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let rel = |root: &Path| -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> =
            artifact_paths(root).iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect();
        v.push(PathBuf::from("manifest.json"));
        v
    };
    let (fa, fb) = (rel(a), rel(b));
    if fa != fb {
        return Err(format!("file sets differ: {fa:?} vs {fb:?}"));
    }
    for f in &fa {
        let (x, y) = (std::fs::read(a.join(f)).map_err(err)?, std::fs::read(b.join(f)).map_err(err)?);
        if x != y {
            return Err(format!("{} differs between runs", f.display()));
        }
    }
    Ok(format!("{} files byte-identical across two demo runs", fa.len()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let (demo_a, demo_b) = (tmp.path().join("a"), tmp.path().join("b"));
    let demo_ok = run_demo(&demo_a).and_then(|_| run_demo(&demo_b));

    let demo_dep = |f: &dyn Fn() -> Outcome| -> Outcome {
        match &demo_ok {
            Ok(()) => f(),
            Err(e) => Err(format!("demo failed: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("SCM recovery", recovery()),
        ("confounding matters", confounding()),
        ("refutation calibration", refutation()),
        ("reverse-direction oracle", reverse_oracle()),
        ("sensitivity", sensitivity_check()),
        ("Mann-Whitney exactness", mann_whitney_exact()),
        ("AUC-U identity", auc_identity()),
        ("classifier sanity", classifier_sanity()),
        ("gray-zone pipeline", demo_dep(&|| gray_zone_pipeline(&demo_a))),
        ("GMM/EM", gmm()),
        ("Shapley axioms", demo_dep(&|| shapley(&demo_a))),
        ("determinism", demo_dep(&|| determinism(&demo_a, &demo_b))),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(msg) => println!("PASS criterion {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
