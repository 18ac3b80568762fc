//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p pcood --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pcood::pipeline::{gaussian_histogram, gaussian_samples};
use pcood_core::evaluation::{
    optimal_threshold, roc_curve, trapezoid_area, BinnedScoreHistogram, ConfusionMatrix, Population,
};
use pcood_core::synth::{analytic_auroc, synth_tensor, GaussianPairSpec, TensorSpec};
use pcood_core::{aggregate, entropy, exact_auroc, msp_complement, PredictiveTensor, TensorKind};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn brute_force_auroc(id: &[f64], ood: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &o in ood {
        for &i in id {
            twice += if o > i { 2 } else if o == i { 1 } else { 0 };
        }
    }
    twice as f64 / (2.0 * id.len() as f64 * ood.len() as f64)
}

fn exact_vs_brute_force() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let trials = 1000;
    for t in 0..trials {
        let n = rng.random_range(1..=1000);
        let m = rng.random_range(1..=1000);
        // every third instance draws from a tiny alphabet to force ties
        let draw = |rng: &mut StdRng| -> f64 {
            if t % 3 == 0 {
                rng.random_range(0..8) as f64 * 0.25
            } else {
                rng.random::<f64>() * 4.0 - 2.0
            }
        };
        let id: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let ood: Vec<f64> = (0..m).map(|_| draw(&mut rng)).collect();
        let got = exact_auroc(&id, &ood).map_err(|e| e.to_string())?;
        worst = worst.max((got - brute_force_auroc(&id, &ood)).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-12 && elapsed < Duration::from_secs(60),
        format!("{trials} instances, max |diff| = {worst:e}, {elapsed:.2?} (limit 60 s)"),
    )
}

fn gaussian_oracle() -> Outcome {
    let start = Instant::now();
    let phi = Normal::new(0.0, 1.0).unwrap().cdf(1.0 / 2f64.sqrt());
    let mut detail = Vec::new();
    let mut ok = (phi - 0.76025).abs() < 5e-6;
    for (delta, target) in [(1.0, 0.76025), (0.0, 0.5)] {
        let spec = GaussianPairSpec::unit(delta, 1_000_000, 7);
        let id = gaussian_samples(&spec, Population::Id, workers()).map_err(|e| e.to_string())?;
        let ood = gaussian_samples(&spec, Population::Ood, workers()).map_err(|e| e.to_string())?;
        let auroc = exact_auroc(&id, &ood).map_err(|e| e.to_string())?;
        ok &= (auroc - target).abs() <= 0.002;
        ok &= (analytic_auroc(&spec) - if delta == 0.0 { 0.5 } else { phi }).abs() < 1e-12;
        detail.push(format!("dmu={delta}: {auroc:.5} (target {target} +- 0.002)"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    check(ok, format!("{}, Phi(1/sqrt2) = {phi:.6}, {elapsed:.2?} (limit 30 s)", detail.join(", ")))
}

fn streaming_fidelity() -> Outcome {
    let spec = GaussianPairSpec::unit(1.0, 1_000_000, 11);
    let id = gaussian_samples(&spec, Population::Id, workers()).map_err(|e| e.to_string())?;
    let ood = gaussian_samples(&spec, Population::Ood, workers()).map_err(|e| e.to_string())?;
    let exact = exact_auroc(&id, &ood).map_err(|e| e.to_string())?;

    let lo = id.iter().chain(&ood).copied().fold(f64::INFINITY, f64::min);
    let hi = id.iter().chain(&ood).copied().fold(f64::NEG_INFINITY, f64::max);
    let mut single = BinnedScoreHistogram::with_domain(lo, hi, 4096).map_err(|e| e.to_string())?;
    single.accumulate_raw(&id, Population::Id).map_err(|e| e.to_string())?;
    single.accumulate_raw(&ood, Population::Ood).map_err(|e| e.to_string())?;
    let hist = single.auroc().map_err(|e| e.to_string())?;

    let mut merged = single.empty_like();
    for shard in 0..16 {
        let mut h = single.empty_like();
        for (pop, v) in [(Population::Id, &id), (Population::Ood, &ood)] {
            let step = v.len().div_ceil(16);
            let part = &v[(shard * step).min(v.len())..((shard + 1) * step).min(v.len())];
            h.accumulate_raw(part, pop).map_err(|e| e.to_string())?;
        }
        merged.merge(&h).map_err(|e| e.to_string())?;
    }
    let identical = merged == single && merged.auroc().unwrap().to_bits() == hist.to_bits();
    check(
        (hist - exact).abs() <= 5e-3 && identical,
        format!(
            "exact {exact:.6}, hist {hist:.6}, |diff| = {:.2e} (limit 5e-3); 16-shard merge identical: {identical}",
            (hist - exact).abs()
        ),
    )
}

/// Exhaustive search over every bin lower edge, with J compared as exact
/// integers and ties going to the smaller edge.
fn grid_search(h: &BinnedScoreHistogram) -> (f64, f64) {
    let (n_id, n_ood) = (h.n_id() as i128, h.n_ood() as i128);
    let mut best = (i128::MIN, 0usize);
    for b in 0..h.bins() {
        let id_above: u64 = h.counts_id()[b..].iter().sum();
        let ood_above: u64 = h.counts_ood()[b..].iter().sum();
        let j = ood_above as i128 * n_id - id_above as i128 * n_ood;
        if j > best.0 {
            best = (j, b);
        }
    }
    let b = best.1;
    let tpr = h.counts_ood()[b..].iter().sum::<u64>() as f64 / n_ood as f64;
    let fpr = h.counts_id()[b..].iter().sum::<u64>() as f64 / n_id as f64;
    (h.lower_edge(b), tpr - fpr)
}

fn roc_fixtures() -> Result<Vec<(String, BinnedScoreHistogram)>, String> {
    let mut out = Vec::new();
    for (name, delta) in [("gauss dmu=1", 1.0), ("gauss dmu=0", 0.0), ("gauss dmu=3", 3.0)] {
        let spec = GaussianPairSpec::unit(delta, 200_000, 3);
        let h = gaussian_histogram(&spec, -6.0, 9.0, 4096, workers()).map_err(|e| e.to_string())?;
        out.push((name.to_string(), h));
    }
    for kind in [pcood_core::ScoreKind::MspComplement, pcood_core::ScoreKind::Entropy] {
        let mut h = BinnedScoreHistogram::new(kind, 8, 4096).map_err(|e| e.to_string())?;
        for (pop, seed_pop) in [(Population::Id, Population::Id), (Population::Ood, Population::Ood)] {
            let spec = TensorSpec { n_points: 20_000, n_classes: 8, n_members: 5, separability: 1.0, seed: 5 };
            let t = spec.tensor(seed_pop).map_err(|e| e.to_string())?;
            let d = aggregate(&t, 5).map_err(|e| e.to_string())?;
            let s = pcood_core::score_distribution(&d, kind).map_err(|e| e.to_string())?;
            h.accumulate(&s, pop).map_err(|e| e.to_string())?;
        }
        out.push((format!("tensor {kind}"), h));
    }
    let mut rng = StdRng::seed_from_u64(9);
    for bins in [2, 3, 17, 256] {
        let mut h = BinnedScoreHistogram::with_domain(0.0, 1.0, bins).map_err(|e| e.to_string())?;
        for _ in 0..rng.random_range(1..500) {
            h.push(rng.random::<f64>(), Population::Id).unwrap();
        }
        for _ in 0..rng.random_range(1..500) {
            h.push(rng.random::<f64>().sqrt(), Population::Ood).unwrap();
        }
        out.push((format!("random B={bins}"), h));
    }
    Ok(out)
}

fn roc_consistency() -> Outcome {
    let fixtures = roc_fixtures()?;
    let mut worst = 0.0f64;
    let mut all_match = true;
    for (name, h) in &fixtures {
        let curve = roc_curve(h).map_err(|e| e.to_string())?;
        let hist = h.auroc().map_err(|e| e.to_string())?;
        worst = worst.max((curve.auroc() - hist).abs());
        worst = worst.max((trapezoid_area(curve.fpr(), curve.tpr()) - hist).abs());
        let t = optimal_threshold(&curve);
        let (edge, j) = grid_search(h);
        if t.threshold != edge || (t.youden_j - j).abs() > 1e-15 {
            all_match = false;
            eprintln!("  {name}: youden {t:?} vs grid ({edge}, {j})");
        }
    }
    check(
        worst <= 1e-12 && all_match,
        format!(
            "{} fixtures, max |trapezoid - hist_auroc| = {worst:e} (limit 1e-12); Youden = grid search: {all_match}",
            fixtures.len()
        ),
    )
}

fn score_table() -> Outcome {
    let ln = f64::ln;
    let mut one_hot = vec![0.0; 8];
    one_hot[3] = 1.0;
    let uniform = vec![1.0 / 8.0; 8];
    let cases: [(&str, f64, f64); 5] = [
        ("one-hot msp", msp_complement(&one_hot).unwrap(), 0.0),
        ("one-hot entropy", entropy(&one_hot).unwrap(), 0.0),
        ("uniform C=8 msp", msp_complement(&uniform).unwrap(), 0.875),
        ("uniform C=8 entropy", entropy(&uniform).unwrap(), ln(8.0)),
        ("[0.5,0.5] entropy", entropy(&[0.5, 0.5]).unwrap(), ln(2.0)),
    ];
    let worst = cases.iter().map(|(_, got, want)| (got - want).abs()).fold(0.0, f64::max);
    let bad: Vec<&str> = cases.iter().filter(|(_, g, w)| (g - w).abs() > 1e-12).map(|c| c.0).collect();
    check(bad.is_empty(), format!("{} entries, max |diff| = {worst:e} (limit 1e-12) {bad:?}", cases.len()))
}

fn aggregation() -> Outcome {
    let fixture = PredictiveTensor::<f64>::new(TensorKind::Probabilities, 1, 2, 2, vec![0.6, 0.4, 0.2, 0.8])
        .map_err(|e| e.to_string())?;
    let avg = aggregate(&fixture, 2).map_err(|e| e.to_string())?;
    let fixture_err = (avg.row(0)[0] - 0.4).abs().max((avg.row(0)[1] - 0.6).abs());

    let (n, c, k_max) = (100_000, 8, 20);
    let (t, _) = synth_tensor(n, c, k_max, 1.5, 21).map_err(|e| e.to_string())?;
    let mut prefix_err = 0.0f64;
    let mut sum_err = 0.0f64;
    for k in [1, 5, 10, 15, 20] {
        let d = aggregate(&t, k).map_err(|e| e.to_string())?;
        sum_err = sum_err.max(d.max_row_sum_error());
        let truncated = PredictiveTensor::new(TensorKind::Probabilities, n, c, k, t.values()[..k * n * c].to_vec())
            .map_err(|e| e.to_string())?;
        let d_prefix = aggregate(&truncated, k).map_err(|e| e.to_string())?;
        if d_prefix.probs() != d.probs() {
            prefix_err = f64::INFINITY;
        }
        for p in (0..n).step_by(997) {
            for j in 0..c {
                let mean = (0..k).map(|m| t.row(m, p)[j] as f64).sum::<f64>() / k as f64;
                prefix_err = prefix_err.max((mean - d.row(p)[j]).abs());
            }
        }
    }
    check(
        fixture_err <= 1e-12 && prefix_err <= 1e-12 && sum_err <= 1e-6,
        format!(
            "fixture |diff| = {fixture_err:e}, k-prefix |diff| = {prefix_err:e} (limit 1e-12); \
             max |row sum - 1| = {sum_err:e} (limit 1e-6) at N={n} C={c} K={k_max}"
        ),
    )
}

fn segmentation() -> Outcome {
    let mut m = ConfusionMatrix::new(2).map_err(|e| e.to_string())?;
    m.accumulate(&[1, 2, 2, 2], &[1, 1, 2, 2]).map_err(|e| e.to_string())?;
    let s = m.seg_metrics().map_err(|e| e.to_string())?;
    let fixture_ok = s.mean_iou == 7.0 / 12.0 && s.accuracy == 0.75;

    let mut rng = StdRng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut structure_ok = true;
    for _ in 0..100 {
        let c = rng.random_range(2..=8usize);
        let len = 10_000;
        let truth: Vec<u16> = (0..len).map(|_| rng.random_range(0..=c as u16)).collect();
        let pred: Vec<u16> = (0..len).map(|_| rng.random_range(1..=c as u16)).collect();
        let mut m = ConfusionMatrix::new(c).unwrap();
        m.accumulate(&pred, &truth).unwrap();
        let got = m.seg_metrics().unwrap();

        let labeled: Vec<usize> = (0..len).filter(|&i| truth[i] != 0).collect();
        let mut ious = Vec::new();
        for class in 1..=c as u16 {
            let t: std::collections::BTreeSet<usize> = labeled.iter().copied().filter(|&i| truth[i] == class).collect();
            let p: std::collections::BTreeSet<usize> = labeled.iter().copied().filter(|&i| pred[i] == class).collect();
            let union = t.union(&p).count();
            let iou = (union > 0).then(|| t.intersection(&p).count() as f64 / union as f64);
            structure_ok &= iou == got.per_class_iou[class as usize - 1];
            ious.extend(iou);
        }
        let mean = ious.iter().sum::<f64>() / ious.len() as f64;
        let acc = labeled.iter().filter(|&&i| truth[i] == pred[i]).count() as f64 / labeled.len() as f64;
        worst = worst.max((mean - got.mean_iou).abs()).max((acc - got.accuracy).abs());
    }
    check(
        fixture_ok && structure_ok && worst <= 1e-12,
        format!(
            "fixture meanIoU {} accuracy {} (want 7/12, 3/4 exactly); 100 trials of 1e4 labels, max |diff| = {worst:e}, per-class equal: {structure_ok}",
            s.mean_iou, s.accuracy
        ),
    )
}

fn pcood(cwd: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pcood"))
        .current_dir(cwd)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("pcood {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn cli_fixtures(dir: &Path) -> Result<(), String> {
    let spec = TensorSpec { n_points: 150_000, n_classes: 8, n_members: 4, separability: 1.0, seed: 13 };
    pcood(dir, &[
        "synth", "tensor", "--points", "150000", "--classes", "8", "--members", "4", "--separability", "1",
        "--seed", "13", "--workers", "1", "--out", "fx",
    ])?;
    let labels: String = (0..spec.n_points)
        .map(|i| if i % 50 == 0 { "0\n".to_string() } else { format!("{}\n", spec.true_class(i) + 1) })
        .collect();
    fs::write(dir.join("labels.txt"), labels).map_err(|e| e.to_string())?;
    let cloud: String = (0..spec.n_points)
        .map(|i| format!("{} {} {} {} {} {} {}\n", i as f64 * 0.01, (i % 97) as f64, -0.5, i % 2000, i % 256, 7, 200))
        .collect();
    fs::write(dir.join("cloud.txt"), cloud).map_err(|e| e.to_string())?;
    pcood(dir, &["synth", "scores", "--n-id", "120000", "--n-ood", "90000", "--seed", "2", "--workers", "1", "--out", "g"])?;
    Ok(())
}

/// Every subcommand, as (name, args, outputs) with `{o}` standing for the
/// per-run output directory.
fn cli_cases() -> Vec<(&'static str, Vec<&'static str>, Vec<&'static str>)> {
    vec![
        ("aggregate", vec!["aggregate", "--pred", "fx/id.pcod", "--k", "3", "--out", "{o}/agg.pcod"], vec!["agg.pcod"]),
        ("score", vec!["score", "--pred", "fx/ood.pcod", "--kind", "entropy", "--out", "{o}/s.csv"], vec!["s.csv"]),
        (
            "auroc",
            vec!["auroc", "--id", "fx/id.pcod", "--ood", "fx/ood.pcod", "--kind", "msp", "--k", "4", "--out", "{o}/a.txt"],
            vec!["a.txt"],
        ),
        (
            "auroc sweep",
            vec!["auroc", "--id", "fx/id.pcod", "--ood", "fx/ood.pcod", "--k-list", "1,2,4", "--mode", "hist", "--out", "{o}/sw.txt"],
            vec!["sw.txt"],
        ),
        ("auroc csv", vec!["auroc", "--id", "g/id.csv", "--ood", "g/ood.csv", "--out", "{o}/ac.txt"], vec!["ac.txt"]),
        ("roc", vec!["roc", "--id", "fx/id.pcod", "--ood", "fx/ood.pcod", "--out", "{o}/roc.csv"], vec!["roc.csv"]),
        ("iou", vec!["iou", "--pred", "fx/id.pcod", "--labels", "labels.txt", "--out", "{o}/iou.txt"], vec!["iou.txt"]),
        (
            "map",
            vec!["map", "--cloud", "cloud.txt", "--pred", "fx/ood.pcod", "--roc", "{o}/roc.csv", "--out", "{o}/map.txt"],
            vec!["map.txt"],
        ),
        ("strip-color", vec!["strip-color", "--cloud", "cloud.txt", "--out", "{o}/plain.txt"], vec!["plain.txt"]),
        (
            "synth scores",
            vec!["synth", "scores", "--n-id", "100000", "--n-ood", "70000", "--seed", "5", "--out", "{o}/gs"],
            vec!["gs/id.csv", "gs/ood.csv"],
        ),
        (
            "synth tensor",
            vec!["synth", "tensor", "--points", "70000", "--members", "3", "--seed", "5", "--out", "{o}/ts"],
            vec!["ts/id.pcod", "ts/ood.pcod"],
        ),
    ]
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    cli_fixtures(dir)?;
    let runs = [("w1a", "1"), ("w8a", "8"), ("w1b", "1"), ("w8b", "8")];
    let mut checked = 0;
    let mut differing = Vec::new();
    for (run, _) in runs {
        fs::create_dir_all(dir.join(run)).map_err(|e| e.to_string())?;
    }
    for (name, args, outputs) in cli_cases() {
        let mut seen: Vec<Vec<u8>> = Vec::new();
        for (run, w) in runs {
            let mut full: Vec<String> = args.iter().map(|a| a.replace("{o}", run)).collect();
            if name != "strip-color" {
                full.extend(["--workers".to_string(), w.to_string()]);
            }
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            let stdout = pcood(dir, &refs)?;
            let mut bytes = stdout.into_bytes();
            for f in &outputs {
                bytes.extend(fs::read(dir.join(run).join(f)).map_err(|e| format!("{name}: {e}"))?);
            }
            seen.push(bytes);
        }
        checked += 1;
        if seen.iter().any(|b| *b != seen[0]) {
            differing.push(name);
        }
    }
    check(
        differing.is_empty(),
        format!("{checked} invocations x 4 runs (workers 1, 8, 1, 8); differing: {differing:?}"),
    )
}

fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn throughput() -> Outcome {
    let start = Instant::now();
    let spec = GaussianPairSpec::unit(1.0, 50_000_000, 17);
    let h = gaussian_histogram(&spec, -7.0, 8.0, 4096, workers()).map_err(|e| e.to_string())?;
    let auroc = h.auroc().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let total = h.n_id() + h.n_ood();
    let rss = peak_rss_kib();
    let rss_ok = rss.is_some_and(|k| k < 1024 * 1024);
    check(
        total == 100_000_000 && elapsed < Duration::from_secs(60) && rss_ok && (auroc - 0.76025).abs() < 0.002,
        format!(
            "{total} scores on {} worker(s) in {elapsed:.2?} (limit 60 s), peak RSS {} MiB (limit 1024), auroc {auroc:.5}",
            workers(),
            rss.map_or("unknown".into(), |k| (k / 1024).to_string())
        ),
    )
}

fn synth_examples() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (s, target, tol) in [(0.0, 0.5, 0.01), (12.0, 1.0, 0.005)] {
        let (id, ood) = synth_tensor(100_000, 8, 1, s, 3).map_err(|e| e.to_string())?;
        let score = |t: &PredictiveTensor| {
            let d = aggregate(t, 1).unwrap();
            pcood_core::score_distribution(&d, pcood_core::ScoreKind::MspComplement).unwrap().into_scores()
        };
        let a = exact_auroc(&score(&id), &score(&ood)).map_err(|e| e.to_string())?;
        ok &= (a - target).abs() <= tol;
        parts.push(format!("separability {s}: {a:.5} (target {target} +- {tol})"));
    }
    check(ok, parts.join(", "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("exact AUROC equals brute force", exact_vs_brute_force),
        ("Gaussian analytic oracle", gaussian_oracle),
        ("streaming histogram fidelity", streaming_fidelity),
        ("ROC consistency", roc_consistency),
        ("score-function table", score_table),
        ("aggregation", aggregation),
        ("segmentation metrics", segmentation),
        ("CLI determinism across worker counts", cli_determinism),
        ("histogram throughput at 1e8 scores", throughput),
        ("synthetic tensor separability", synth_examples),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
