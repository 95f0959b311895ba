//! End-to-end acceptance checks at desk scale. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use cpiseq::cpi::{holm_adjust, paired_t_test_one_sided};
use cpiseq::evalmetrics::{aggregate, auc_rank, find_metric, AggregateOptions, ReplicateOutcome};
use cpiseq::experiment::{generate_replicate, run_methods, run_replicate, AnalysisConfig, Method, Scenario};
use cpiseq::knockoffs::{gaussian_knockoffs, knockoff_diagnostics, sample_sequential_knockoffs, SequentialConfig};
use cpiseq::learners::{evaluate, fit, LearnerSpec};
use cpiseq::par::map_range;
use cpiseq::seed::rng_from_seed;
use cpiseq::simgen::{level_effects, oracle_performance, DagScenarioConfig, GridScenarioConfig, Oracle, TargetType};
use cpiseq::tabular::{read_csv, read_schema_json, split, Column, ColumnSchema, Frame};
use rand::Rng;
use rand_distr::StandardNormal;

const ALPHA: f64 = 0.05;
const SEED: u64 = 1;

type Outcome = Result<(bool, String), String>;

fn band(reps: usize) -> f64 {
    ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / reps as f64).sqrt()
}

fn rate(outcomes: &[&ReplicateOutcome], j: usize) -> f64 {
    outcomes.iter().filter(|o| o.p_values.as_ref().unwrap()[j] <= ALPHA).count() as f64 / outcomes.len() as f64
}

fn of_method(all: &[Vec<ReplicateOutcome>], method: Method) -> Vec<&ReplicateOutcome> {
    all.iter().flatten().filter(|o| o.method == method.name()).collect()
}

fn replicates(scenario: &Scenario, methods: impl Fn(u64) -> Vec<Method> + Sync + Send, cfg: &AnalysisConfig, reps: usize) -> Result<Vec<Vec<ReplicateOutcome>>, String> {
    map_range(reps, |r| run_replicate(scenario, &methods(r as u64), cfg, SEED, r as u64))
        .into_iter()
        .collect::<cpiseq::Result<Vec<_>>>()
        .map_err(|e| e.to_string())
}

/// Shared replicates of the high-cardinality mixed DAG: 200 with CPIseq, the
/// first 100 also with CPIgauss.
fn mixed_dag() -> Result<Vec<Vec<ReplicateOutcome>>, String> {
    let sc = Scenario::Dag(DagScenarioConfig::mixed(2000, 0.5, 10));
    let cfg = AnalysisConfig::default();
    replicates(&sc, |r| if r < 100 { vec![Method::CpiSeq, Method::CpiGauss] } else { vec![Method::CpiSeq] }, &cfg, 200)
}

fn criterion_1(all: &[Vec<ReplicateOutcome>]) -> Outcome {
    let seq = of_method(all, Method::CpiSeq);
    let bound = band(seq.len());
    let (r1, r2) = (rate(&seq, 0), rate(&seq, 1));
    Ok((r1 <= bound && r2 <= bound, format!("CPIseq rejection X1 {r1:.3}, X2 {r2:.3} over {} replicates (bound {bound:.3})", seq.len())))
}

fn criterion_2(all: &[Vec<ReplicateOutcome>]) -> Outcome {
    let seq: Vec<_> = of_method(all, Method::CpiSeq).into_iter().filter(|o| o.replicate < 100).collect();
    let (r3, r4) = (rate(&seq, 2), rate(&seq, 3));
    Ok((r3 >= 0.8 && r4 >= 0.8, format!("CPIseq power X3 {r3:.3}, X4 {r4:.3} over {} replicates (need 0.80)", seq.len())))
}

fn criterion_3(all: &[Vec<ReplicateOutcome>]) -> Outcome {
    let seq: Vec<_> = of_method(all, Method::CpiSeq).into_iter().filter(|o| o.replicate < 100).collect();
    let gauss = of_method(all, Method::CpiGauss);
    let (s, g) = (rate(&seq, 2), rate(&gauss, 2));
    Ok((s - g >= 0.15, format!("X3 power CPIseq {s:.3} vs CPIgauss {g:.3}, gap {:.3} (need 0.15)", s - g)))
}

fn criterion_4() -> Outcome {
    let sc = Scenario::Dag(DagScenarioConfig::gaussian(1000, 0.9));
    let cfg = AnalysisConfig {
        learner: LearnerSpec::linear(),
        ..Default::default()
    };
    let all = replicates(&sc, |_| vec![Method::CpiSeq, Method::CpiGauss], &cfg, 100)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [Method::CpiSeq, Method::CpiGauss] {
        let outs = of_method(&all, m);
        let r: Vec<f64> = (0..4).map(|j| rate(&outs, j)).collect();
        ok &= r[0] <= 0.096 && r[1] <= 0.096 && r[2] >= 0.9 && r[3] >= 0.9;
        parts.push(format!("{m} X1..X4 {:.2}/{:.2}/{:.2}/{:.2}", r[0], r[1], r[2], r[3]));
    }
    Ok((ok, format!("{} (type-I <= 0.096, power >= 0.90)", parts.join("; "))))
}

fn criterion_5() -> Outcome {
    let sc = Scenario::Grid(GridScenarioConfig::new(2000, 0.8, 5, TargetType::Regression));
    let cfg = AnalysisConfig::default();
    let all = replicates(&sc, |_| vec![Method::CpiSeq, Method::Pfi], &cfg, 100)?;
    let flat: Vec<ReplicateOutcome> = all.into_iter().flatten().collect();
    let recs = aggregate(&flat, &AggregateOptions { alpha: ALPHA, k: Some(6) }).map_err(|e| e.to_string())?;
    let get = |m: Method, f: &str, metric: &str| find_metric(&recs, m.name(), f, metric).map(|r| r.value).ok_or(format!("missing {metric}"));
    let auc_seq = get(Method::CpiSeq, "*", "auc_mean")?;
    let auc_pfi = get(Method::Pfi, "*", "auc_mean")?;
    let fp_seq = get(Method::CpiSeq, "X3", "top_k_rate")?;
    let fp_pfi = get(Method::Pfi, "X3", "top_k_rate")?;
    let ok = auc_seq >= 0.9 && auc_seq - auc_pfi >= 0.05 && fp_pfi - fp_seq >= 0.2;
    Ok((
        ok,
        format!("mean AUC CPIseq {auc_seq:.3}, PFI {auc_pfi:.3}; X3 in top 6: PFI {fp_pfi:.2}, CPIseq {fp_seq:.2}"),
    ))
}

fn criterion_6() -> Outcome {
    let sc = Scenario::Grid(GridScenarioConfig::new(4000, 0.8, 5, TargetType::Regression));
    let data = generate_replicate(&sc, SEED, 0).map_err(|e| e.to_string())?;
    let (train, test) = split(&data.dataset, 2.0 / 3.0, &mut rng_from_seed(SEED)).map_err(|e| e.to_string())?;
    let model = fit(&LearnerSpec::random_forest(500), &train, &mut rng_from_seed(SEED)).map_err(|e| e.to_string())?;
    let r2 = evaluate(&model, &test).map_err(|e| e.to_string())?.value();
    let oracle = oracle_performance(&data, 2.0).map_err(|e| e.to_string())?;
    let exact = oracle == Oracle::R2Star(2.0 / 3.0);
    let ok = exact && (0.52..=2.0 / 3.0 + 0.05).contains(&r2);
    Ok((ok, format!("RF test R2 {r2:.3} in [0.52, 0.717]; oracle {oracle:?}")))
}

/// 50k rows of three independent pairs with correlation 0.8.
fn mvn_blocks(n: usize, seed: u64) -> Frame {
    let mut rng = rng_from_seed(seed);
    let tail = (1.0f64 - 0.64).sqrt();
    let mut schema = Vec::new();
    let mut cols = Vec::new();
    for b in 0..3 {
        let z1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let z2: Vec<f64> = z1.iter().map(|a| 0.8 * a + tail * rng.sample::<f64, _>(StandardNormal)).collect();
        for (k, z) in [z1, z2].into_iter().enumerate() {
            schema.push(ColumnSchema::continuous(format!("Z{}", 2 * b + k + 1)));
            cols.push(Column::Continuous(z));
        }
    }
    Frame::new(schema, cols).expect("valid frame")
}

fn criterion_7() -> Outcome {
    let x = mvn_blocks(50_000, SEED);
    let seq = sample_sequential_knockoffs(&x, &SequentialConfig::default(), &mut rng_from_seed(SEED)).map_err(|e| e.to_string())?;
    let gauss = gaussian_knockoffs(&x, &mut rng_from_seed(SEED)).map_err(|e| e.to_string())?;
    let ds = knockoff_diagnostics(&x, &seq.frame, 0.02).map_err(|e| e.to_string())?;
    let dg = knockoff_diagnostics(&x, &gauss.frame, 0.02).map_err(|e| e.to_string())?;
    let ok = ds.max_cov_diff < 0.02 && dg.max_cov_diff < 0.02 && dg.max_cross_cov_diff < 0.02;
    Ok((
        ok,
        format!(
            "max cov diff sequential {:.4}, gaussian {:.4}; gaussian cross-cov diff {:.4} (sequential {:.4})",
            ds.max_cov_diff, dg.max_cov_diff, dg.max_cross_cov_diff, ds.max_cross_cov_diff
        ),
    ))
}

fn criterion_8() -> Outcome {
    let t = paired_t_test_one_sided(&[1.0, 2.0, 3.0], ALPHA).map_err(|e| e.to_string())?;
    let holm = holm_adjust(&[0.01, 0.04, 0.03]).map_err(|e| e.to_string())?;
    let auc = auc_rank(&[3.0, 1.0, 2.0, 0.0], &[true, true, false, false]).map_err(|e| e.to_string())?;
    let eff = level_effects(1.0, 4);
    let eff_ok = eff.iter().zip([-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-12)
        && eff.iter().sum::<f64>().abs() < 1e-12;
    let ok = (t.p - 0.0371).abs() <= 5e-4 && holm == [0.03, 0.06, 0.06] && auc == 0.75 && eff_ok;
    Ok((ok, format!("t-test p {:.4}, Holm {holm:?}, AUC {auc}, level effects {eff:?}", t.p)))
}

fn criterion_9() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let schema = read_schema_json(dir.join("diamonds_round.schema.json")).map_err(|e| e.to_string())?;
    let data = read_csv(dir.join("diamonds_round.csv"), &schema, Some("price")).map_err(|e| e.to_string())?;
    let out = run_methods(&data, &[Method::CpiSeq, Method::Pfi], &AnalysisConfig::default(), SEED).map_err(|e| e.to_string())?;
    let cpi = out[0].cpi.as_ref().unwrap();
    let adj = |g: &str| cpi.iter().find(|r| r.group == g).map(|r| r.p_adjusted).unwrap_or(f64::NAN);
    let signif = ["carat", "color", "clarity"].iter().all(|g| adj(g) <= ALPHA);
    let dims_null = ["x_length", "y_width", "z_depth"].iter().filter(|g| adj(g) > ALPHA).count();
    let pfi = &out[1];
    let mut order: Vec<usize> = (0..pfi.scores.len()).collect();
    order.sort_by(|&a, &b| pfi.scores[b].total_cmp(&pfi.scores[a]));
    let mut top4: Vec<&str> = order[..4].iter().map(|&j| pfi.features[j].as_str()).collect();
    top4.sort();
    let top_ok = top4 == ["carat", "x_length", "y_width", "z_depth"];
    let r2 = out[0].performance.value();
    let ok = signif && dims_null >= 2 && top_ok && r2 >= 0.9;
    Ok((
        ok,
        format!(
            "N {}; adjusted p carat {:.3}, color {:.2e}, clarity {:.2e}; {dims_null}/3 dimensions null; PFI top 4 {top4:?}; R2 {r2:.3}",
            data.n_rows(),
            adj("carat"),
            adj("color"),
            adj("clarity")
        ),
    ))
}

fn report(id: usize, name: &str, started: Instant, outcome: Outcome) -> bool {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("{} [{id}] {name}: {detail} ({:.0}s)", if ok { "PASS" } else { "FAIL" }, started.elapsed().as_secs_f64());
    ok
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(8, "statistical plumbing", t, criterion_8());

    let t = Instant::now();
    match mixed_dag() {
        Ok(all) => {
            ok &= report(1, "type-I error control", t, criterion_1(&all));
            ok &= report(2, "power on the mixed DAG", t, criterion_2(&all));
            ok &= report(3, "sequential beats Gaussian knockoffs on categoricals", t, criterion_3(&all));
        }
        Err(e) => {
            for (id, name) in [(1, "type-I error control"), (2, "power on the mixed DAG"), (3, "sequential beats Gaussian knockoffs on categoricals")] {
                ok &= report(id, name, t, Err(e.clone()));
            }
        }
    }
    let t = Instant::now();
    ok &= report(4, "all-Gaussian DAG", t, criterion_4());
    let t = Instant::now();
    ok &= report(5, "ranking separation on the grid", t, criterion_5());
    let t = Instant::now();
    ok &= report(6, "oracle validation", t, criterion_6());
    let t = Instant::now();
    ok &= report(7, "knockoff second-order validity", t, criterion_7());
    let t = Instant::now();
    ok &= report(9, "diamonds case study", t, criterion_9());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
