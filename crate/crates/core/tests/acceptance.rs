//! Acceptance checks, one per criterion. Runs as a plain binary so every
//! verdict line is printed; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{brute_entropies, load, mean, random_dataset, signal_and_noise, Shape, DATASETS};
use hybridfs::dataset::{impute_missing, to_arff, Dataset, ImputePolicy, Provenance, Value};
use hybridfs::metrics::SuiteScore;
use hybridfs::refine::run_phase1;
use hybridfs::runner::{compare, run_loaded, Grouping, Method, RunConfig, RunReport, DEFAULT_SEED};
use hybridfs::scoring::{conditional_entropy, entropy, information_gain, symmetrical_uncertainty};
use hybridfs::search::{ga_search, GaParams, SearchSpace, WrapperFitness};
use hybridfs::smote::{default_plan, smote, Heom, RatePolicy, SmotePlan, DEFAULT_K_NEIGHBORS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCORING_TOL: f64 = 1e-9;
const SCORING_CASES: usize = 200;
const SCORING_BUDGET: Duration = Duration::from_secs(5);

const GA_DATASETS: usize = 24;
const GA_SEEDS: u64 = 5;
const GA_MAX_CANDIDATES: usize = 10;
const GA_BUDGET: Duration = Duration::from_secs(120);

const SMOTE_BUDGET: Duration = Duration::from_secs(10);
const SMOTE_BOX_TOL: f64 = 1e-12;
const PHASE1_BUDGET: Duration = Duration::from_secs(60);

/// (dataset, target after the filter step, tolerance, target after the search, tolerance)
const ATTRIBUTE_TARGETS: [(&str, usize, usize, usize, usize); 3] =
    [("wine", 12, 2, 10, 3), ("wdbc", 19, 2, 11, 3), ("lung-cancer", 28, 6, 12, 5)];
/// (dataset, phase-1 sample target)
const SAMPLE_TARGETS: [(&str, usize); 3] = [("wine", 415), ("wdbc", 1371), ("hepatitis", 451)];
const SAMPLE_TOL: f64 = 0.20;
const TRAJECTORY_BUDGET: Duration = Duration::from_secs(15 * 60);

const AMS_MIN_WINS: usize = 4;
const OATP_MIN: f64 = 0.90;
const ATP_MIN: f64 = 0.90;
const ARAE_MAX: f64 = 20.0;
const CLAIM_DATASETS: [&str; 3] = ["wine", "wdbc", "dermatology-6"];
const METRIC_TOL: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= budget, format!("{:.2}s of {}s", t.as_secs_f64(), budget.as_secs()))
}

// 1 -------------------------------------------------------------------------

fn scoring_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut asymmetric = 0;
    for _ in 0..SCORING_CASES {
        let n = rng.gen_range(1..40);
        let ax = rng.gen_range(1..5);
        let ay = rng.gen_range(1..4);
        let x: Vec<usize> = (0..n).map(|_| rng.gen_range(0..ax)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..ay)).collect();
        let (hx, hy, hyx) = brute_entropies(&x, &y);
        let ig = hy - hyx;
        let su = if hx + hy > 0.0 { 2.0 * ig / (hx + hy) } else { 0.0 };
        let mut yc = vec![0; ay];
        y.iter().for_each(|&v| yc[v] += 1);
        let got = [
            (entropy(&yc).unwrap(), hy),
            (conditional_entropy(&x, &y).unwrap(), hyx),
            (information_gain(&x, &y).unwrap(), ig.max(0.0)),
            (symmetrical_uncertainty(&x, &y).unwrap(), su.clamp(0.0, 1.0)),
        ];
        for (a, b) in got {
            worst = worst.max((a - b).abs());
        }
        if (information_gain(&x, &y).unwrap() - information_gain(&y, &x).unwrap()).abs() > SCORING_TOL {
            asymmetric += 1;
        }
    }
    let (fast, time) = within_budget(start, SCORING_BUDGET);
    verdict(
        worst <= SCORING_TOL && asymmetric == 0 && fast,
        format!("{SCORING_CASES} columns, max deviation {worst:.2e}, {asymmetric} asymmetric IG cases, {time}"),
    )
}

// 2 -------------------------------------------------------------------------

fn exhaustive_best(d: &Dataset, space: &SearchSpace, params: &GaParams) -> f64 {
    let fitness = WrapperFitness::new(d, params.fitness_folds, params.seed).unwrap();
    let n = space.len();
    (1u32..(1 << n))
        .map(|bits| {
            let genes: Vec<bool> = (0..n).map(|g| bits >> g & 1 == 1).collect();
            fitness.evaluate(&space.to_subset(&genes)).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn ga_oracle() -> Verdict {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut runs = 0;
    for i in 0..GA_DATASETS {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let width = rng.gen_range(3..=GA_MAX_CANDIDATES);
        let informative = rng.gen_range(1..width);
        let rows = rng.gen_range(40..90);
        let d = signal_and_noise(1000 + i as u64, rows, informative, width - informative);
        let space = SearchSpace::unranked(width).unwrap();
        for seed in 1..=GA_SEEDS {
            let params = GaParams { seed, ..Default::default() };
            let (_, trace) = ga_search(&d, &space, &params).unwrap();
            let best = exhaustive_best(&d, &space, &params);
            runs += 1;
            if trace.best_fitness != best {
                misses.push(format!("dataset {i} ({width} candidates) seed {seed}: {:.4} < {best:.4}", trace.best_fitness));
            }
        }
    }
    let (fast, time) = within_budget(start, GA_BUDGET);
    let mut detail = format!("{} of {runs} searches reached the exhaustive optimum, {time}", runs - misses.len());
    if !misses.is_empty() {
        detail += &format!("; misses: {}", misses.join(", "));
    }
    verdict(misses.is_empty() && fast, detail)
}

// 3 -------------------------------------------------------------------------

fn smote_violations(d: &Dataset, plan: &SmotePlan) -> (usize, usize) {
    let out = smote(d, plan).unwrap();
    let synth = &out.instances()[d.len()..];
    let counts = d.class_counts();
    let bad_counts = (0..d.n_classes())
        .filter(|&c| synth.iter().filter(|x| x.class_label == c).count() != plan.rate(c) as usize / 100 * counts[c])
        .count();
    let metric = Heom::fit(d);
    let mut escaped = 0;
    let mut next = synth.iter();
    for (i, x) in d.instances().iter().enumerate() {
        let reps = plan.rate(x.class_label) as usize / 100;
        if reps == 0 {
            continue;
        }
        let mut pool: Vec<(f64, usize)> = d
            .instances()
            .iter()
            .enumerate()
            .filter(|&(j, y)| j != i && y.class_label == x.class_label)
            .map(|(j, y)| (metric.distance(x, y), j))
            .collect();
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for _ in 0..reps {
            let s = next.next().unwrap();
            let inside = pool.iter().take(plan.k_neighbors).any(|&(_, j)| {
                let nb = &d.instances()[j];
                x.values.iter().zip(&nb.values).zip(&s.values).all(|((a, b), v)| match (a, b, v) {
                    (Value::Numeric(a), Value::Numeric(b), Value::Numeric(v)) => {
                        a.min(*b) - SMOTE_BOX_TOL <= *v && *v <= a.max(*b) + SMOTE_BOX_TOL
                    }
                    _ => v == a || v == b,
                })
            });
            if !inside {
                escaped += 1;
            }
        }
    }
    (bad_counts, escaped)
}

fn smote_properties(real: &BTreeMap<&str, Dataset>) -> Verdict {
    let start = Instant::now();
    let mut cases: Vec<(String, Dataset, SmotePlan)> = Vec::new();
    for (name, d) in real {
        let plan = default_plan(d, RatePolicy::default(), &BTreeMap::new(), DEFAULT_K_NEIGHBORS, 1);
        cases.push((name.to_string(), d.clone(), plan));
    }
    for s in 0..10u64 {
        let shape = Shape {
            rows: 30,
            numeric: 3,
            nominal: 2,
            classes: 3,
            missing: 0.0,
        };
        let d = random_dataset(s, shape);
        let plan = SmotePlan {
            per_class_rate: BTreeMap::from([(0, 100), (1, 200), (2, 300)]),
            k_neighbors: 1 + s as usize % 5,
            seed: s,
        };
        cases.push((format!("random-{s}"), d, plan));
    }
    let mut problems = Vec::new();
    for (name, d, plan) in &cases {
        let (bad_counts, escaped) = smote_violations(d, plan);
        if bad_counts + escaped > 0 {
            problems.push(format!("{name}: {bad_counts} wrong class counts, {escaped} rows outside box"));
        }
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| to_arff(&smote(d, plan).unwrap()));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let concurrent: Vec<String> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..4)
                .map(|_| scope.spawn(|| pool.install(|| to_arff(&smote(d, plan).unwrap()))))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        if concurrent.iter().any(|c| *c != serial) {
            problems.push(format!("{name}: output differs under 4-way concurrency"));
        }
    }
    let (fast, time) = within_budget(start, SMOTE_BUDGET);
    let detail = if problems.is_empty() {
        format!("{} datasets: counts exact, all synthetic rows in box, 4-way runs identical, {time}", cases.len())
    } else {
        format!("{}, {time}", problems.join("; "))
    };
    verdict(problems.is_empty() && fast, detail)
}

// 4 -------------------------------------------------------------------------

fn phase1_contract(real: &BTreeMap<&str, Dataset>) -> Verdict {
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut sizes = Vec::new();
    for (name, d) in real {
        let plan = default_plan(d, RatePolicy::default(), &BTreeMap::new(), DEFAULT_K_NEIGHBORS, DEFAULT_SEED);
        let (merged, report) = run_phase1(d, &plan).unwrap();
        let originals = merged.instances().iter().filter(|x| x.provenance == Provenance::Original).count();
        if &merged.instances()[..d.len()] != d.instances() || originals != d.len() {
            problems.push(format!("{name}: originals not preserved exactly once"));
        }
        if merged.n_features() != d.n_features() {
            problems.push(format!("{name}: attribute count changed"));
        }
        sizes.push(format!("{name} {}->{}", report.before_smote, report.after_merge));
    }
    let (fast, time) = within_budget(start, PHASE1_BUDGET);
    let detail = if problems.is_empty() {
        format!("{}, {time}", sizes.join(", "))
    } else {
        problems.join("; ")
    };
    verdict(problems.is_empty() && fast, detail)
}

// 5 -------------------------------------------------------------------------

fn trajectory(proposed: &BTreeMap<&str, RunReport>, elapsed: Duration) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, filt, filt_tol, fin, fin_tol) in ATTRIBUTE_TARGETS {
        let r = &proposed[name];
        let a1 = r.stage("2nd Phase(1)").unwrap().attributes;
        let a2 = r.stage("2nd Phase(2)").unwrap().attributes;
        let good = a1.abs_diff(filt) <= filt_tol && a2.abs_diff(fin) <= fin_tol;
        ok &= good;
        parts.push(format!(
            "{name} {}->{a1}->{a2} (target {filt}±{filt_tol}, {fin}±{fin_tol}){}",
            r.stage("Initial State").unwrap().attributes,
            if good { "" } else { " MISS" }
        ));
    }
    for (name, target) in SAMPLE_TARGETS {
        let n = proposed[name].stage("1st Phase").unwrap().instances;
        let good = (n as f64 - target as f64).abs() <= SAMPLE_TOL * target as f64;
        ok &= good;
        parts.push(format!("{name} samples {n} (target {target}±20%){}", if good { "" } else { " MISS" }));
    }
    let fast = elapsed <= TRAJECTORY_BUDGET;
    parts.push(format!("{:.1}s", elapsed.as_secs_f64()));
    verdict(ok && fast, parts.join("; "))
}

// 6-8 -----------------------------------------------------------------------

fn ams_claim(proposed: &BTreeMap<&str, RunReport>, baseline: &BTreeMap<&str, RunReport>) -> Verdict {
    let mut wins = 0;
    let mut parts = Vec::new();
    for name in DATASETS {
        let (p, b) = (&proposed[name], &baseline[name]);
        let win = p.summary.ams <= b.summary.ams;
        wins += usize::from(win);
        let mut part = format!("{name} {:.2} vs {:.2}", p.summary.ams, b.summary.ams);
        if !win {
            let evaluated = p.scores[0].total;
            let selected = p.selected_names.join(",");
            part += &format!(
                " [exception: evaluated on {evaluated} rows vs {}; kept {selected}]",
                b.scores[0].total
            );
        }
        parts.push(part);
    }
    verdict(
        wins >= AMS_MIN_WINS,
        format!("proposed AMS <= all-features on {wins}/5: {}", parts.join("; ")),
    )
}

fn tp_claim(proposed: &BTreeMap<&str, RunReport>) -> Verdict {
    let per: Vec<_> = DATASETS.iter().map(|n| proposed[n].summary).collect();
    let suite = SuiteScore::from_dataset_scores(&per).unwrap();
    let mut ok = suite.oatp_rate >= OATP_MIN;
    let mut parts = vec![format!("OATPRate {:.4}", suite.oatp_rate)];
    for name in CLAIM_DATASETS {
        let v = proposed[name].summary.atp_rate;
        ok &= v >= ATP_MIN;
        parts.push(format!("{name} {v:.4}"));
    }
    verdict(ok, parts.join(", "))
}

fn rae_claim(proposed: &BTreeMap<&str, RunReport>, baseline: &BTreeMap<&str, RunReport>) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in CLAIM_DATASETS {
        let (p, b) = (proposed[name].summary.arae, baseline[name].summary.arae);
        ok &= p < ARAE_MAX && p < b;
        parts.push(format!("{name} {p:.2}% vs all-features {b:.2}%"));
    }
    verdict(ok, parts.join(", "))
}

// 9 -------------------------------------------------------------------------

fn metrics_arithmetic(reports: &[&RunReport]) -> Verdict {
    let mut worst = 0.0f64;
    let mut check = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for r in reports {
        let mut ms = Vec::new();
        let mut tp = Vec::new();
        let mut rae = Vec::new();
        for s in &r.scores {
            let counts = s.confusion.counts();
            let total: u64 = counts.iter().flatten().sum();
            let diag: u64 = (0..counts.len()).map(|i| counts[i][i]).sum();
            check(s.ms as f64, (total - diag) as f64);
            check(s.tp_rate, diag as f64 / total as f64);
            ms.push((total - diag) as f64);
            tp.push(diag as f64 / total as f64);
            rae.push(s.rae);
        }
        check(r.summary.ams, mean(&ms));
        check(r.summary.atp_rate, mean(&tp));
        check(r.summary.arae, mean(&rae));
    }
    let owned: Vec<RunReport> = reports.iter().map(|r| (*r).clone()).collect();
    let table = compare(&owned, &[], Grouping::Overall).unwrap();
    for o in &table.overall {
        let rows: Vec<&RunReport> = reports.iter().copied().filter(|r| r.method.to_string() == o.method).collect();
        check(o.oams, mean(&rows.iter().map(|r| r.summary.ams).collect::<Vec<_>>()));
        check(o.oarae, mean(&rows.iter().map(|r| r.summary.arae).collect::<Vec<_>>()));
        check(o.oatp_rate, mean(&rows.iter().map(|r| r.summary.atp_rate).collect::<Vec<_>>()));
    }
    verdict(
        worst <= METRIC_TOL,
        format!("{} reports, {} overall rows, max deviation {worst:.2e}", reports.len(), table.overall.len()),
    )
}

// 10 ------------------------------------------------------------------------

fn cli_run(threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_hybridfs"))
        .args(["run", "--method", "proposed", "--seed", "1", "--omit-timings", "--dataset"])
        .arg(common::data_path("wine"))
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("running the CLI");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn reproducibility() -> Verdict {
    let runs: Vec<(&str, Vec<u8>)> = ["1", "4", "4", "8"].into_iter().map(|t| (t, cli_run(t))).collect();
    let same = runs.iter().all(|(_, o)| *o == runs[0].1);
    verdict(
        same,
        format!(
            "{} CLI runs (threads {}), {} bytes each, identical: {same}",
            runs.len(),
            runs.iter().map(|r| r.0).collect::<Vec<_>>().join("/"),
            runs[0].1.len()
        ),
    )
}

fn main() {
    let real: BTreeMap<&str, Dataset> = DATASETS
        .iter()
        .map(|&n| (n, impute_missing(&load(n), ImputePolicy::MeanMode).unwrap()))
        .collect();

    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    results.push((1, "scoring oracle suite", scoring_oracle()));
    results.push((2, "GA oracle equivalence", ga_oracle()));
    results.push((3, "SMOTE properties", smote_properties(&real)));
    results.push((4, "phase-1 contract", phase1_contract(&real)));

    let run = |name: &str, method: Method| {
        let cfg = RunConfig {
            seed: DEFAULT_SEED,
            ..RunConfig::for_dataset(common::data_path(name), method)
        };
        run_loaded(&cfg, &load(name)).unwrap().without_timings()
    };
    let start = Instant::now();
    let proposed: BTreeMap<&str, RunReport> = DATASETS.iter().map(|&n| (n, run(n, Method::Proposed))).collect();
    let elapsed = start.elapsed();
    let baseline: BTreeMap<&str, RunReport> = DATASETS.iter().map(|&n| (n, run(n, Method::AllFeatures))).collect();

    results.push((5, "table trajectory", trajectory(&proposed, elapsed)));
    results.push((6, "AMS directional claim", ams_claim(&proposed, &baseline)));
    results.push((7, "TP-rate claim", tp_claim(&proposed)));
    results.push((8, "RAE claim", rae_claim(&proposed, &baseline)));
    let all: Vec<&RunReport> = proposed.values().chain(baseline.values()).collect();
    results.push((9, "metrics arithmetic", metrics_arithmetic(&all)));
    results.push((10, "reproducibility", reproducibility()));

    let mut failed = 0;
    for (id, name, v) in &results {
        println!("criterion {id:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
