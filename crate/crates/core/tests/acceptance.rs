//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use tlb_core::analysis::{audit, fslln_diag, AuditReport};
use tlb_core::arrival::Segment;
use tlb_core::experiments::{
    coupled_sweep, median, medians_by_n, settling_runs, strictly_decreasing, two_regime_lambda, two_regime_scenario,
    two_regime_steps, two_regime_steps_scenario, SeedOutcome,
};
use tlb_core::fluid::{certify, sigma, sigma_bd, FluidSolution};
use tlb_core::{
    run_coupled, run_oracle, AlphaRule, ArrivalRateFn, DrivingPrimitives, EngineMode, InitialCondition, Scenario,
};

struct Outcome {
    pass: bool,
    detail: String,
}

struct Suite {
    results: Vec<(usize, &'static str, bool)>,
    audits: AuditReport,
}

impl Suite {
    fn record(&mut self, id: usize, name: &'static str, outcome: Outcome) {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id} ({name}): {}", outcome.detail);
        self.results.push((id, name, outcome.pass));
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn equivalence_scenario(n: u32, delta: u32, seed: u64) -> Scenario {
    Scenario {
        n,
        mu: 1.0,
        delta,
        alpha: AlphaRule::Value(0.6),
        lambda: ArrivalRateFn::new(vec![
            Segment::linear(0.0, 4.0, 0.5, 4.0),
            Segment::constant(4.0, 7.0, 4.0),
            Segment::constant(7.0, 10.0, 1.2),
        ])
        .unwrap(),
        horizon: 10.0,
        init: InitialCondition::default(),
        seed,
        mode: EngineMode::Coupled,
        grid: 0.1,
        v_levels: vec![],
        intervals: vec![],
    }
}

fn path_equivalence(suite: &mut Suite) {
    let start = Instant::now();
    let cases: Vec<(u32, u32, u64)> = [1u32, 2, 4, 8]
        .iter()
        .flat_map(|&n| [1u32, 2].into_iter().flat_map(move |d| (0..50u64).map(move |s| (n, d, s))))
        .collect();
    let results: Vec<(bool, AuditReport, u64)> = cases
        .par_iter()
        .map(|&(n, delta, seed)| {
            let s = equivalence_scenario(n, delta, seed);
            let coupled = run_coupled(&s, &mut DrivingPrimitives::new(seed)).expect("coupled run");
            let oracle = run_oracle(&s, &mut DrivingPrimitives::new(seed)).expect("oracle run");
            let same_events = coupled.events == oracle.events;
            let same_thresholds = coupled.samples.iter().map(|x| x.ell).eq(oracle.samples.iter().map(|x| x.ell))
                && coupled.final_ell == oracle.final_ell;
            let mut report = audit(&coupled);
            report.merge(&audit(&oracle));
            (same_events && same_thresholds, report, coupled.events.len() as u64)
        })
        .collect();
    let elapsed = start.elapsed();
    let mismatches = results.iter().filter(|r| !r.0).count();
    let events: u64 = results.iter().map(|r| r.2).sum();
    for r in &results {
        suite.audits.merge(&r.1);
    }
    suite.record(
        1,
        "oracle path equivalence",
        Outcome {
            pass: mismatches == 0 && within(elapsed, 30),
            detail: format!(
                "{} runs, {events} events per engine, {mismatches} mismatches, {:.2}s (limit 30s)",
                results.len(),
                elapsed.as_secs_f64()
            ),
        },
    );
}

fn settled_fraction(outcomes: &[SeedOutcome], interval: usize, value: u32) -> usize {
    outcomes
        .iter()
        .filter(|o| o.intervals[interval].report.as_ref().is_some_and(|r| r.settled && r.settled_value == Some(value)))
        .count()
}

fn collect_audits(suite: &mut Suite, outcomes: &[SeedOutcome]) {
    for o in outcomes {
        suite.audits.merge(&o.audit);
    }
}

fn settling_and_balance(suite: &mut Suite) {
    let seeds: Vec<u64> = (0..20).collect();
    let slack = 0.2;

    let start = Instant::now();
    let delta3 = settling_runs(&two_regime_scenario(300, 3, 0), &seeds, slack).expect("delta 3 runs");
    let delta1 = settling_runs(&two_regime_scenario(300, 1, 0), &seeds, slack).expect("delta 1 runs");
    let elapsed = start.elapsed();
    collect_audits(suite, &delta3);
    collect_audits(suite, &delta1);

    let high = &delta3[0].intervals[0].certificate;
    let low3 = &delta3[0].intervals[1].certificate;
    let low1 = &delta1[0].intervals[1].certificate;
    let certified = high.is_certified() && high.m == Some(1) && low3.m == Some(0) && low1.m == Some(1);
    let high_and_low = delta3
        .iter()
        .filter(|o| {
            let ok = |k: usize, v: u32| {
                o.intervals[k].report.as_ref().is_some_and(|r| r.settled && r.settled_value == Some(v))
            };
            ok(0, 3) && ok(1, 0)
        })
        .count();
    let low_unit = settled_fraction(&delta1, 1, 1);
    let high_unit_certified = delta1[0].intervals[0].certificate.is_certified();
    suite.record(
        2,
        "two-regime settling",
        Outcome {
            pass: certified && !high_unit_certified && high_and_low >= 18 && low_unit >= 18 && within(elapsed, 120),
            detail: format!(
                "delta=3: ell=3 on [3+{:.4}, 12] and ell=0 on [14+{:.4}, 23] in {high_and_low}/20; \
                 delta=1: ell=1 on [14+{:.4}, 23] in {low_unit}/20; {:.1}s (limit 120s)",
                high.sigma.unwrap_or(f64::NAN) + slack,
                low3.sigma.unwrap_or(f64::NAN) + slack,
                low1.sigma.unwrap_or(f64::NAN) + slack,
                elapsed.as_secs_f64()
            ),
        },
    );

    let balance = |outcomes: &[SeedOutcome]| {
        median(
            &outcomes
                .iter()
                .map(|o| o.intervals[1].report.as_ref().map_or(f64::INFINITY, |r| r.worst_balance()))
                .collect::<Vec<_>>(),
        )
    };
    let delta1_large = settling_runs(&two_regime_scenario(1000, 1, 0), &seeds, slack).expect("n=1000 runs");
    collect_audits(suite, &delta1_large);
    let (b300, b1000) = (balance(&delta1), balance(&delta1_large));
    suite.record(
        3,
        "balance in the settled window",
        Outcome {
            pass: b300 <= 0.05 && b1000 <= 0.02,
            detail: format!("median sup(1 - q(1)): n=300 {b300:.5} (limit 0.05), n=1000 {b1000:.5} (limit 0.02)"),
        },
    );

    let delta3_large = settling_runs(&two_regime_scenario(1000, 3, 0), &seeds, slack).expect("n=1000 runs");
    collect_audits(suite, &delta3_large);
    let tails: Vec<f64> =
        delta3_large.iter().filter_map(|o| o.intervals[0].report.as_ref().map(|r| r.tail_mass_sup)).collect();
    let envelope = delta3_large[0].intervals[0].report.as_ref().map_or(f64::NAN, |r| r.envelope_constant);
    let tail = if tails.len() == seeds.len() { median(&tails) } else { f64::INFINITY };
    suite.record(
        4,
        "tail envelope",
        Outcome {
            pass: tail <= envelope + 0.1,
            detail: format!(
                "median sup v(t,7) e^(t-(a+sigma)) = {tail:.5}, bound u(a+sigma) + 0.1 = {:.5}",
                envelope + 0.1
            ),
        },
    );
}

fn sweeps(suite: &mut Suite) {
    let n_list = [100u32, 300, 1000];
    let seeds: Vec<u64> = (0..20).collect();
    let base = two_regime_steps_scenario(100, 3, 0);
    let rows = coupled_sweep(&base, &n_list, &seeds, 2).expect("sweep");
    for r in &rows {
        suite.audits.merge(&r.audit);
    }
    let mass = medians_by_n(&rows, &n_list, |r| r.mass_error);
    suite.record(
        5,
        "total-mass law of large numbers",
        Outcome {
            pass: strictly_decreasing(&mass) && mass[2] <= 0.15,
            detail: format!(
                "median sup|u_n - u| for n=100,300,1000: {:.4}, {:.4}, {:.4} (limit 0.15 at n=1000)",
                mass[0], mass[1], mass[2]
            ),
        },
    );
    let delta = medians_by_n(&rows, &n_list, |r| r.delta_error);
    suite.record(
        6,
        "error process vanishes",
        Outcome {
            pass: strictly_decreasing(&delta),
            detail: format!(
                "median sup|delta_n(., 2)| for n=100,300,1000: {:.4}, {:.4}, {:.4}",
                delta[0], delta[1], delta[2]
            ),
        },
    );
}

fn refined_fslln(suite: &mut Suite) {
    let start = Instant::now();
    let n_list = [100u64, 1_000, 10_000];
    let mut parts = Vec::new();
    let mut pass = true;
    for gamma in [0.0, 0.25] {
        let decreasing = (0..50u64)
            .into_par_iter()
            .filter(|&seed| {
                let stats: Vec<f64> =
                    fslln_diag(seed, &n_list, gamma, 1.0).unwrap().into_iter().map(|(_, s)| s).collect();
                strictly_decreasing(&stats)
            })
            .count();
        pass &= decreasing * 10 >= 50 * 9;
        parts.push(format!("gamma={gamma}: {decreasing}/50 decreasing"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 30);
    suite.record(
        7,
        "refined functional law of large numbers",
        Outcome {
            pass,
            detail: format!("{} (need 45/50); {:.2}s (limit 30s)", parts.join(", "), elapsed.as_secs_f64()),
        },
    );
}

fn fluid_formulas(suite: &mut Suite) {
    // independent hand values: ln(1.5 / 0.5) and ln((3 - 1.5) / (2 - 1.5))
    let ln3 = (1.5f64 / 0.5).ln();
    let second = ((3.0f64 - 1.5) / (2.0 - 1.5)).ln();
    let constant = ArrivalRateFn::constant(1.5, 10.0).unwrap();
    let from_one = FluidSolution::new(constant.clone(), 1.0, 1.0);
    let from_three = FluidSolution::new(constant.clone(), 1.0, 3.0);
    let c1 = certify(&from_one, 0.0, 10.0, 1);
    let c3 = certify(&from_three, 0.0, 10.0, 1);
    let errors = [
        (sigma(1.0, 1.0, 1.5, 1.5, 1, 1) - ln3).abs(),
        (c1.sigma.unwrap_or(f64::NAN) - ln3).abs(),
        (sigma(1.0, 3.0, 1.5, 1.5, 1, 1) - (ln3 + second)).abs(),
        (c3.sigma.unwrap_or(f64::NAN) - (ln3 + second)).abs(),
        (sigma_bd(1.0, 3.0, 1.5, 1, 1) - second).abs(),
        (c3.sigma_bd.unwrap_or(f64::NAN) - second).abs(),
    ];
    let sigma_err = errors.iter().copied().fold(0.0, f64::max);

    let rule = common::gauss_legendre(24);
    let random3 = ArrivalRateFn::new(vec![
        Segment::linear(0.0, 1.7, 0.3, 2.9),
        Segment::sinusoid(1.7, 4.2, 2.0, 0.6, 3.3, 0.4),
        Segment::constant(4.2, 6.0, 0.8),
    ])
    .unwrap();
    let fixtures = [
        (constant.clone(), 1.0, 1.0),
        (constant, 1.0, 3.0),
        (ArrivalRateFn::constant(2.0, 5.0).unwrap(), 1.0, 0.0),
        (random3, 1.3, 0.7),
        (two_regime_lambda(), 1.0, 0.0),
        (two_regime_steps(), 1.0, 0.0),
    ];
    let mut residual = 0.0f64;
    for (lambda, mu, u0) in fixtures {
        let fluid = FluidSolution::new(lambda.clone(), mu, u0);
        let end = lambda.end();
        for k in 0..=1000 {
            let t = end * k as f64 / 1000.0;
            residual = residual.max((fluid.eval(t) - common::fluid_by_quadrature(&lambda, mu, u0, t, &rule)).abs());
        }
    }
    let charge = FluidSolution::new(ArrivalRateFn::constant(2.0, 5.0).unwrap(), 1.0, 0.0);
    let fixed_point = (charge.eval(2f64.ln()) - 1.0).abs();
    suite.record(
        8,
        "fluid formulas",
        Outcome {
            pass: sigma_err <= 1e-12 && residual < 1e-9 && fixed_point < 1e-12,
            detail: format!(
                "max sigma/sigma_bd error {sigma_err:.2e} (limit 1e-12), max u residual {residual:.2e} (limit 1e-9)"
            ),
        },
    );
}

fn main() {
    let mut suite = Suite { results: Vec::new(), audits: AuditReport::default() };
    path_equivalence(&mut suite);
    settling_and_balance(&mut suite);
    sweeps(&mut suite);
    refined_fslln(&mut suite);
    fluid_formulas(&mut suite);
    let audits = suite.audits.clone();
    suite.record(
        9,
        "invariant suite",
        Outcome {
            pass: audits.violations == 0 && audits.events > 0,
            detail: format!(
                "{} events audited, {} violations{}",
                audits.events,
                audits.violations,
                audits.first.map(|f| format!(" (first: {f})")).unwrap_or_default()
            ),
        },
    );
    suite.results.sort_by_key(|r| r.0);
    let failed: Vec<String> = suite.results.iter().filter(|r| !r.2).map(|r| format!("{} ({})", r.0, r.1)).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", suite.results.len());
    } else {
        println!("acceptance: failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
