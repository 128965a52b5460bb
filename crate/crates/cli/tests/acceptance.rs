//! Acceptance checks. Prints one PASS/FAIL line per criterion; exits nonzero
//! when a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use bifurc_core::bench::{random_instance, run_study, Cell, StudySpec};
use bifurc_core::encoding::{decode_spins, encode_weights, max_weight};
use bifurc_core::fixtures::{reference_problem, REFERENCE_ONE_BIT_UTILITY};
use bifurc_core::sb::{initial_positions, solve_from, SignWindow};
use bifurc_core::{
    energy, markowitz_to_ising, solve, utility, IsingModel, Markowitz64, SolverConfig, SpinVector,
    WeightVector,
};

/// Criteria that fail with the solver dynamics as specified; see README.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    3,
    "the -2A(t)h field kick weighs h twice against J once the oscillators track A(t); \
     on the reference portfolio this moves the solver off the optimum for every seed",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bifurc(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_bifurc"))
        .args(args)
        .env_remove("BIFURC_ORACLE_CEILING")
        .output()
        .expect("bifurc runs");
    let code = out.status.code().unwrap_or(-1);
    let value = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    if code != 0 {
        eprintln!("bifurc {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    (code, value)
}

fn random_problem(rng: &mut ChaCha8Rng) -> Markowitz64 {
    let n = rng.random_range(1..=4);
    let alpha = rng.random_range(1..=3);
    let a: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let sigma = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>() * 0.01)
                .collect()
        })
        .collect();
    let mu = (0..n).map(|_| rng.random_range(-0.2..0.2)).collect();
    let gamma = rng.random_range(0.1..5.0);
    Markowitz64::new(mu, sigma, gamma, alpha).unwrap()
}

fn reduction_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..200 {
        let p = random_problem(&mut rng);
        let r = markowitz_to_ising(&p).unwrap();
        for mask in 0..1u64 << p.spins() {
            let s = SpinVector::from_mask(mask, p.spins());
            let u = utility(&p, &decode_spins(&s, p.assets(), p.alpha()).unwrap()).unwrap();
            let e = energy(&r.model, &s).unwrap();
            let err = (u + e / 2.0 + r.offset).abs() / (1.0 + u.abs());
            worst = worst.max(err);
            checked += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("200 problems, {checked} spin vectors, worst scaled residual {worst:.2e}"),
    )
}

fn encoding_round_trip() -> Outcome {
    let mut failures = 0usize;
    let mut checked = 0usize;
    for alpha in 1..=12u32 {
        for n in 1..=(12 / alpha as usize) {
            let base = max_weight(alpha) + 1;
            let total = base.pow(n as u32);
            for code in 0..total {
                let w: Vec<u64> = (0..n).map(|i| code / base.pow(i as u32) % base).collect();
                let w = WeightVector(w);
                let s = encode_weights(&w, alpha).unwrap();
                if decode_spins(&s, n, alpha).unwrap() != w {
                    failures += 1;
                }
                checked += 1;
            }
        }
    }
    outcome(
        failures == 0 && checked > 0,
        format!("{checked} weight vectors over every N*alpha <= 12, {failures} failures"),
    )
}

fn reference_oracle_and_solver(dir: &Path) -> Outcome {
    let fixture = dir.join("reference.json");
    std::fs::write(&fixture, bifurc_core::fixtures::REFERENCE_PORTFOLIO_JSON).unwrap();
    let path = fixture.to_str().unwrap();
    let (oc, oracle) = bifurc(&["oracle", path]);
    let (sc, solved) = bifurc(&["solve", path]);
    if oc != 0 || sc != 0 {
        return outcome(false, format!("oracle exit {oc}, solve exit {sc}"));
    }
    let best = oracle["utility"].as_f64().unwrap();
    let found = solved["utility"].as_f64().unwrap();
    let oracle_ok = (best - REFERENCE_ONE_BIT_UTILITY).abs() <= 0.01;
    let solve_ok = (found - best).abs() <= 1e-6;
    outcome(
        oracle_ok && solve_ok,
        format!(
            "gamma = {}, oracle max {best:.6} (target {REFERENCE_ONE_BIT_UTILITY} +- 0.01: {}), \
             solve {found:.6} with w = {} (within 1e-6 of oracle: {})",
            oracle["manifest"]["config"]["gamma"],
            if oracle_ok { "ok" } else { "no" },
            solved["weights"],
            if solve_ok { "ok" } else { "no" },
        ),
    )
}

/// Reference exact-match rates (percent) for the desk cells.
const REFERENCE_EXACT_MATCH: [((usize, u32), f64); 6] = [
    ((2, 1), 100.0),
    ((5, 1), 98.0),
    ((10, 1), 99.0),
    ((5, 2), 100.0),
    ((7, 2), 93.0),
    ((3, 3), 89.0),
];

fn desk_study() -> bifurc_core::bench::StudyReport {
    let spec = StudySpec::preset("desk").unwrap();
    run_study::<f64>(&spec).unwrap()
}

fn desk_accuracy(report: &bifurc_core::bench::StudyReport) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ((n, alpha), reference) in REFERENCE_EXACT_MATCH {
        let c = report.cell(n, alpha).unwrap();
        let ok = c.trials == 50 && c.exact_match_pct >= reference - 10.0;
        pass &= ok;
        parts.push(format!(
            "({n},{alpha}) {:.0}% >= {:.0}",
            c.exact_match_pct,
            reference - 10.0
        ));
    }
    outcome(pass, parts.join(", "))
}

fn desk_gaps(report: &bifurc_core::bench::StudyReport) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in report.cells.iter().filter(|c| c.alpha <= 2) {
        let ok = c.mean_rel_gap_ising <= 5e-3;
        pass &= ok;
        parts.push(format!(
            "({},{}) {:.2e}",
            c.assets, c.alpha, c.mean_rel_gap_ising
        ));
    }
    outcome(
        pass,
        format!("mean Ising gap <= 5e-3: {}", parts.join(", ")),
    )
}

fn one_bit_behaviour() -> Outcome {
    let base = reference_problem();
    let weights = |p: &Markowitz64| {
        let r = markowitz_to_ising(p).unwrap();
        let res = solve(&r.model, &SolverConfig::default()).unwrap();
        decode_spins(&res.spins, p.assets(), p.alpha()).unwrap().0
    };
    let before = weights(&base);
    let mut mu = base.mu().to_vec();
    mu[6] = 0.01;
    let with_cash = weights(&base.with_mu(mu).unwrap());
    let negated = weights(
        &base
            .with_mu(base.mu().iter().map(|m| -m).collect())
            .unwrap(),
    );
    let flat = weights(&base.with_mu(vec![0.01; 7]).unwrap());

    let cash_ok = before[6] == 0 && with_cash[6] == 1;
    let neg_ok = negated.iter().all(|&w| w == 0);
    let flat_ok = flat == [0, 0, 0, 1, 1, 1, 1];
    outcome(
        cash_ok && neg_ok && flat_ok,
        format!("cash {before:?} -> {with_cash:?}; -mu -> {negated:?}; flat mu -> {flat:?}"),
    )
}

fn one_bit_curve() -> Outcome {
    let spec = StudySpec {
        grid: [6, 10, 14, 18].iter().map(|&n| Cell::new(n, 1)).collect(),
        ..StudySpec::preset("onebit-curve").unwrap()
    };
    let report = run_study::<f64>(&spec).unwrap();
    let pass = report
        .cells
        .iter()
        .all(|c| c.trials == 150 && c.mean_hamming_accuracy >= 0.97);
    let parts: Vec<String> = report
        .cells
        .iter()
        .map(|c| format!("N={} {:.4}", c.assets, c.mean_hamming_accuracy))
        .collect();
    outcome(
        pass,
        format!("mean Hamming accuracy >= 0.97: {}", parts.join(", ")),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn complexity_scaling() -> Outcome {
    let steps = 4000;
    let config = SolverConfig {
        max_steps: steps,
        // never sample, so every run integrates exactly `steps` macro-steps
        sample_period: steps + 1,
        ..SolverConfig::default()
    };
    let spec = StudySpec::default();
    let mut points = Vec::new();
    for size in [32usize, 64, 128, 256] {
        let p = random_instance::<f64>(&spec, Cell::new(size / 2, 2), 0).unwrap();
        let model = markowitz_to_ising(&p).unwrap().model;
        let times = (0..5)
            .map(|run| {
                let t = Instant::now();
                let r = solve(&model, &config.with_seed(run)).unwrap();
                assert_eq!(r.steps_run, steps);
                t.elapsed().as_secs_f64()
            })
            .collect();
        points.push((size as f64, median(times)));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let parts: Vec<String> = points
        .iter()
        .map(|(n, t)| format!("{n}: {:.1} ms", t * 1e3))
        .collect();
    outcome(
        slope <= 3.0,
        format!("log-log slope {slope:.2} <= 3 ({})", parts.join(", ")),
    )
}

#[allow(clippy::needless_range_loop)]
fn random_ising(rng: &mut ChaCha8Rng, n: usize, field: bool) -> IsingModel<f64> {
    let mut j = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let v = rng.random_range(-1.0..1.0);
            j[a][b] = v;
            j[b][a] = v;
        }
    }
    let h = (0..n)
        .map(|_| {
            if field {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        })
        .collect();
    IsingModel::new(j, h).unwrap()
}

fn random_signs(rng: &mut ChaCha8Rng, n: usize, allow_zero: bool) -> Vec<i8> {
    (0..n)
        .map(|_| {
            let lo = if allow_zero { -1 } else { 0 };
            match rng.random_range(lo..2) {
                -1 => 0,
                0 => -1,
                _ => 1,
            }
        })
        .collect()
}

fn invariant_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut cases = 0usize;
    let mut failures = Vec::new();
    let config = SolverConfig::default();

    // determinism and energy recomputation
    for case in 0..150 {
        let n = rng.random_range(1..=8);
        let model = random_ising(&mut rng, n, true);
        let c = config.with_seed(rng.random());
        let a = solve(&model, &c).unwrap();
        let b = solve(&model, &c).unwrap();
        if a != b {
            failures.push(format!("determinism case {case}"));
        }
        if a.energy != energy(&model, &a.spins).unwrap() {
            failures.push(format!("energy case {case}"));
        }
        cases += 2;
    }
    // global flip symmetry without a field
    for case in 0..150 {
        let n = rng.random_range(1..=8);
        let model = random_ising(&mut rng, n, false);
        let x0: Vec<f64> = initial_positions(rng.random(), n);
        let neg = x0.iter().map(|v| -v).collect();
        let a = solve_from(&model, &config, x0).unwrap();
        let b = solve_from(&model, &config, neg).unwrap();
        if a.spins.negated() != b.spins || a.energy != b.energy {
            failures.push(format!("flip symmetry case {case}"));
        }
        cases += 1;
    }
    // shift rule: after pushing, column k holds what column k+1 held
    for case in 0..400 {
        let rows = rng.random_range(1..6);
        let size = rng.random_range(1..6);
        let cols: Vec<Vec<i8>> = (0..size)
            .map(|_| random_signs(&mut rng, rows, true))
            .collect();
        let mut w = SignWindow::from_columns(cols.clone());
        let sample = random_signs(&mut rng, rows, true);
        w.push(sample.clone());
        let mut expected = cols[1..].to_vec();
        expected.push(sample);
        if w.columns() != expected.as_slice() {
            failures.push(format!("shift case {case}"));
        }
        cases += 1;
    }
    // stop criterion: settled iff every row is constant and nonzero; a zero
    // column always vetoes
    for case in 0..400 {
        let rows = rng.random_range(1..6);
        let size = rng.random_range(1..6);
        let base = random_signs(&mut rng, rows, false);
        let mut cols = vec![base.clone(); size];
        let mode = rng.random_range(0..3);
        if mode == 1 {
            let c = rng.random_range(0..size);
            cols[c] = vec![0; rows];
        } else if mode == 2 {
            let c = rng.random_range(0..size);
            let r = rng.random_range(0..rows);
            cols[c][r] = -cols[c][r];
        }
        let w = SignWindow::from_columns(cols.clone());
        let expected =
            (0..rows).all(|r| cols[0][r] != 0 && cols.iter().all(|c| c[r] == cols[0][r]));
        if w.is_settled() != expected || (mode == 1 && w.is_settled()) {
            failures.push(format!("stop criterion case {case}"));
        }
        if mode == 0 && !w.is_settled() {
            failures.push(format!("constant window case {case}"));
        }
        cases += 1;
    }
    outcome(
        failures.is_empty() && cases >= 1000,
        if failures.is_empty() {
            format!("{cases} randomized cases")
        } else {
            format!("{cases} cases, failures: {}", failures.join(", "))
        },
    )
}

fn synthetic_panel(path: &Path, assets: usize, days: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut prices: Vec<f64> = (0..assets).map(|_| rng.random_range(10.0..200.0)).collect();
    let drift: Vec<f64> = (0..assets).map(|_| rng.random_range(-5e-4..1e-3)).collect();
    let loading: Vec<f64> = (0..assets).map(|_| rng.random_range(0.2..1.5)).collect();
    let mut text = String::from("date");
    for i in 0..assets {
        text.push_str(&format!(",T{i:03}"));
    }
    text.push('\n');
    let start = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    for d in 0..days {
        let market: f64 = rng.sample::<f64, _>(StandardNormal) * 0.01;
        text.push_str(&(start + chrono::Days::new(d as u64)).to_string());
        for i in 0..assets {
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.015;
            prices[i] *= 1.0 + drift[i] + loading[i] * market + noise;
            text.push_str(&format!(",{:.4}", prices[i]));
        }
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn large_panel_smoke(dir: &Path) -> Outcome {
    let csv = dir.join("panel.csv");
    let problem = dir.join("panel.json");
    synthetic_panel(&csv, 300, 400);
    let (ic, _) = bifurc(&[
        "ingest",
        csv.to_str().unwrap(),
        "-o",
        problem.to_str().unwrap(),
    ]);
    let (sc, solved) = bifurc(&["solve", problem.to_str().unwrap()]);
    let converged = solved["converged"] == true;
    outcome(
        ic == 0 && sc == 0 && converged,
        format!(
            "300 assets: ingest exit {ic}, solve exit {sc}, converged {converged}, {} steps, {} assets selected",
            solved["steps"],
            solved["selected"].as_array().map_or(0, Vec::len)
        ),
    )
}

fn main() {
    let dir = tempfile::TempDir::new().unwrap();
    let desk = std::cell::OnceCell::new();
    type Check<'a> = Box<dyn FnMut() -> Outcome + 'a>;
    let checks: Vec<(u32, &str, Duration, Check)> = vec![
        (
            1,
            "reduction identity",
            Duration::from_secs(30),
            Box::new(reduction_identity),
        ),
        (
            2,
            "encoding round trip",
            Duration::from_secs(5),
            Box::new(encoding_round_trip),
        ),
        (
            3,
            "reference portfolio oracle and solver",
            Duration::from_secs(1),
            Box::new(|| reference_oracle_and_solver(dir.path())),
        ),
        (
            4,
            "desk-scale exact-match accuracy",
            Duration::from_secs(600),
            Box::new(|| desk_accuracy(desk.get_or_init(desk_study))),
        ),
        (
            5,
            "relative Ising gap",
            Duration::from_secs(600),
            Box::new(|| desk_gaps(desk.get_or_init(desk_study))),
        ),
        (
            6,
            "one-bit behaviour",
            Duration::from_secs(5),
            Box::new(one_bit_behaviour),
        ),
        (
            7,
            "one-bit accuracy curve",
            Duration::from_secs(900),
            Box::new(one_bit_curve),
        ),
        (
            8,
            "complexity scaling",
            Duration::from_secs(600),
            Box::new(complexity_scaling),
        ),
        (
            9,
            "solver invariants",
            Duration::from_secs(120),
            Box::new(invariant_suite),
        ),
        (
            10,
            "300-asset ingest and solve",
            Duration::from_secs(60),
            Box::new(|| large_panel_smoke(dir.path())),
        ),
    ];

    let mut unexpected = Vec::new();
    let mut failed = 0;
    for (id, name, budget, mut check) in checks {
        let started = Instant::now();
        let mut o = check();
        let elapsed = started.elapsed();
        if elapsed > budget {
            o.pass = false;
            o.detail
                .push_str(&format!("; over the {}s budget", budget.as_secs()));
        }
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} {name} [{:.2}s]: {}",
            elapsed.as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed += 1;
            match known {
                Some((_, why)) => println!("             known failure: {why}"),
                None => unexpected.push(id),
            }
        } else if known.is_some() {
            println!("             listed as a known failure but passed");
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({} unexpected)",
        10 - failed,
        unexpected.len()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
