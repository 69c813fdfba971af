//! Acceptance criteria for the bundled scenarios. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ricci_core::transport::{w1_radial, RadialMeasure};
use ricci_harness::report::{Assertion, CheckReport, Report, Verdict};
use ricci_harness::{run_scenario, scenarios, ScenarioConfig};

const EUCLIDEAN: &str = "euclidean-calibration";
const SPHERE: &str = "sphere-shrinker";
const TORUS: &str = "torus-bumpy";

struct Run {
    report: Report,
    wall: Duration,
    flow: Duration,
    timings: Vec<(String, Duration)>,
}

fn config(name: &str) -> ScenarioConfig {
    scenarios::bundled(name).expect("bundled scenario").expect("valid scenario")
}

fn run(cfg: &ScenarioConfig) -> Run {
    let t = Instant::now();
    let out = run_scenario(cfg, None).unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
    Run {
        report: out.report,
        wall: t.elapsed(),
        flow: out.flow_time,
        timings: out.timings,
    }
}

/// Collects failure reasons for one criterion.
#[derive(Default)]
struct Criterion {
    failures: Vec<String>,
    facts: Vec<String>,
}

impl Criterion {
    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn fact(&mut self, what: impl Into<String>) {
        self.facts.push(what.into());
    }

    /// Every assertion in `check` whose label starts with `prefix` must
    /// have margin at least `-tol`; returns how many matched.
    fn margins(&mut self, scenario: &str, check: &CheckReport, prefix: &str, tol: f64) -> usize {
        let matched: Vec<&Assertion> = check.assertions.iter().filter(|a| a.label.starts_with(prefix)).collect();
        for a in &matched {
            self.require(
                a.margin >= -tol,
                format!("{scenario}/{}: `{}` margin {:.3e} < -{tol:e}", check.name, a.label, a.margin),
            );
        }
        matched.len()
    }

    fn ran<'a>(&mut self, scenario: &str, report: &'a Report, name: &str) -> Option<&'a CheckReport> {
        match report.check(name) {
            Some(c) if c.verdict != Verdict::Skipped && c.reason.is_none() => Some(c),
            Some(c) => {
                self.failures.push(format!("{scenario}/{name}: {:?} {}", c.verdict, c.reason.clone().unwrap_or_default()));
                None
            }
            None => {
                self.failures.push(format!("{scenario}/{name} did not run"));
                None
            }
        }
    }

    fn print(&self, index: usize, title: &str) -> bool {
        let pass = self.failures.is_empty();
        let detail = if pass { self.facts.join("; ") } else { self.failures.join("; ") };
        println!("criterion {index:>2} {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        pass
    }
}

fn calibration(eu: &Run) -> Criterion {
    let mut c = Criterion::default();
    if let Some(check) = c.ran(EUCLIDEAN, &eu.report, "entropy_calibration") {
        let mut scales = 0;
        for a in &check.assertions {
            if a.label.starts_with("|N(") || a.label.starts_with("|W(") {
                scales += 1;
                c.require(a.lhs <= 1e-3, format!("`{}` = {:.3e}", a.label, a.lhs));
            } else if a.label.starts_with("|mu(") {
                c.require(a.lhs <= 5e-3, format!("`{}` = {:.3e}", a.label, a.lhs));
            }
        }
        c.require(scales == 10, format!("{scales} entropy values, expected 10"));
    }
    let spent = eu.flow + eu.timings.iter().find(|(n, _)| n == "entropy_calibration").map_or(Duration::ZERO, |t| t.1);
    c.require(spent < Duration::from_secs(120), format!("calibration took {spent:?}"));
    c.fact(format!("calibration in {:.1}s", spent.as_secs_f64()));
    c
}

fn main_theorem(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    for (name, r) in runs {
        if let Some(check) = c.ran(name, &r.report, "main_theorem") {
            let random = c.margins(name, check, "random W >= bound", 1e-4);
            let nu = c.margins(name, check, "nu >= bound", 1e-3);
            c.require(random > 0 && nu > 0, format!("{name}: no assertions"));
        }
        c.require(r.wall < Duration::from_secs(600), format!("{name} took {:?}", r.wall));
        c.fact(format!("{name} {:.0}s", r.wall.as_secs_f64()));
    }
    c
}

fn monotonicity(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    for (name, r) in runs {
        if let Some(check) = c.ran(name, &r.report, "entropy_monotonicity") {
            let k = c.margins(name, check, "N, W nonincreasing", 1e-4)
                + c.margins(name, check, "0 >= N >= W", 1e-4)
                + c.margins(name, check, "W along", 1e-4);
            c.require(k == check.assertions.len(), format!("{name}: unrecognized assertions"));
        }
    }
    c
}

fn identity(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    for (name, r) in runs {
        if let Some(check) = c.ran(name, &r.report, "nash_identity") {
            for a in &check.assertions {
                if a.label.starts_with("max relative residual") {
                    c.require(a.lhs < 1e-2, format!("{name}: residual {:.3e}", a.lhs));
                    c.fact(format!("{name} residual {:.2e}", a.lhs));
                } else if a.label.starts_with("residual reduction") {
                    c.require(a.lhs >= 2.0, format!("{name}: reduction {:.2}", a.lhs));
                    c.fact(format!("ratio {:.2}", a.lhs));
                }
            }
        }
    }
    c
}

/// Kantorovich LP with cost `|ρᵢ − ρⱼ|`.
fn lp_w1(rho: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = rho.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let plan: Vec<_> = (0..n * n)
        .map(|k| lp.add_var((rho[k / n] - rho[k % n]).abs(), (0.0, f64::INFINITY)))
        .collect();
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (plan[i * n + j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, a[i]);
    }
    for j in 1..n {
        let col: Vec<_> = (0..n).map(|i| (plan[i * n + j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, b[j]);
    }
    lp.solve().expect("feasible transport problem").objective()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn transport(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut rho: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..10.0)).collect();
        rho.sort_by(f64::total_cmp);
        let a = random_weights(&mut rng, 64);
        let b = random_weights(&mut rng, 64);
        let ma = RadialMeasure::new(0.0, rho.iter().copied().zip(a.iter().copied()).collect()).unwrap();
        let mb = RadialMeasure::new(0.0, rho.iter().copied().zip(b.iter().copied()).collect()).unwrap();
        worst = worst.max((w1_radial(&ma, &mb).unwrap() - lp_w1(&rho, &a, &b)).abs());
    }
    c.require(worst <= 1e-4, format!("radial W1 differs from the LP by {worst:.3e}"));
    c.fact(format!("LP gap {worst:.1e}"));
    for (name, r) in runs {
        if let Some(check) = c.ran(name, &r.report, "transport") {
            let k = c.margins(name, check, "Var(z, nu) <= Hn gap", 0.0);
            c.require(k > 0, format!("{name}: no variance bounds"));
            if *name == EUCLIDEAN {
                let v = c.margins(name, check, "|Var/(2n gap) - 1|", 1e-2);
                c.require(v > 0, "no Euclidean variance comparison");
                for a in check.assertions.iter().filter(|a| a.label.starts_with("|Var/(2n gap) - 1|")) {
                    c.require(a.lhs <= 1e-2, format!("`{}` = {:.3e}", a.label, a.lhs));
                }
                for radius in [38, 50] {
                    let k = c.margins(name, check, &format!("nu outside B(z, {radius} sqrt gap)"), 0.0);
                    c.require(k > 0, format!("no concentration bound at A = {radius}"));
                }
            }
        }
    }
    c
}

/// Degenerate configurations compare a basepoint with itself.
fn is_degenerate(label: &str) -> bool {
    let head = label.split(", s =").next().unwrap_or(label);
    match head.split_once(" vs ") {
        Some((a, b)) => a == b,
        None => false,
    }
}

fn harnack(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    for (name, r) in runs {
        if let Some(check) = c.ran(name, &r.report, "harnack") {
            let k = c.margins(name, check, "(", 1e-3);
            c.require(k >= 10, format!("{name}: {k} configurations"));
            let degenerate: Vec<&Assertion> = check.assertions.iter().filter(|a| is_degenerate(&a.label)).collect();
            c.require(!degenerate.is_empty(), format!("{name}: no equal-basepoint configuration"));
            for a in degenerate {
                c.require(a.lhs == 0.0, format!("{name}: degenerate LHS {:e}", a.lhs));
            }
            c.fact(format!("{name} {k}"));
        }
    }
    c
}

fn plateau(sphere: &Run) -> Criterion {
    let mut c = Criterion::default();
    if let Some(check) = c.ran(SPHERE, &sphere.report, "ancient_sobolev") {
        let mut times = 0;
        for a in &check.assertions {
            if a.label.starts_with("|nu(g_") {
                times += 1;
                c.require(a.lhs <= 5e-2, format!("`{}` = {:.3e}", a.label, a.lhs));
            } else if a.label.starts_with("|N(tau_K)") {
                c.require(a.lhs < 1e-2, format!("flatness {:.3e}", a.lhs));
            }
        }
        c.require(times >= 3, format!("{times} sample times"));
        c.fact(format!("{times} sample times"));
    }
    c
}

fn max_principle(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    for (name, r) in runs {
        if let Some(check) = c.ran(name, &r.report, "max_principle") {
            let k = c.margins(name, check, "min R", 1e-6);
            c.require(k > 0, format!("{name}: no slices checked"));
        }
    }
    c
}

fn fault_injection() -> Criterion {
    let mut c = Criterion::default();
    let mut cfg = config(EUCLIDEAN);
    cfg.checks = vec!["main_theorem".into()];
    let clean = run(&cfg);
    cfg.fault_inject = vec!["main_theorem".into()];
    let faulty = run(&cfg);
    let verdict = |r: &Run| r.report.check("main_theorem").map(|c| c.verdict);
    c.require(verdict(&clean) == Some(Verdict::Pass), format!("clean run {:?}", verdict(&clean)));
    c.require(verdict(&faulty) == Some(Verdict::Fail), format!("faulted run {:?}", verdict(&faulty)));
    c.fact("N + 1 turns main_theorem to FAIL");
    c
}

fn determinism(runs: &[(&str, &Run)]) -> Criterion {
    let mut c = Criterion::default();
    for (name, first) in runs {
        let second = run(&config(name));
        c.require(first.report.to_json() == second.report.to_json(), format!("{name}: reports differ"));
    }
    c.fact(format!("{} scenarios rerun", runs.len()));
    c
}

fn main() -> ExitCode {
    let eu = run(&config(EUCLIDEAN));
    let sphere = run(&config(SPHERE));
    let torus = run(&config(TORUS));
    let all = [(EUCLIDEAN, &eu), (SPHERE, &sphere), (TORUS, &torus)];
    let flat_and_torus = [(EUCLIDEAN, &eu), (TORUS, &torus)];
    let results = [
        (calibration(&eu), "Euclidean calibration"),
        (main_theorem(&all), "local nu lower bound"),
        (monotonicity(&all), "entropy monotonicity"),
        (identity(&flat_and_torus), "Nash entropy identity"),
        (transport(&all), "transport"),
        (harnack(&all), "Harnack inequality"),
        (plateau(&sphere), "ancient plateau"),
        (max_principle(&all), "scalar curvature lower bound"),
        (fault_injection(), "fault injection"),
        (determinism(&all), "determinism"),
    ];
    let mut pass = true;
    for (i, (c, title)) in results.iter().enumerate() {
        pass &= c.print(i + 1, title);
    }
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

