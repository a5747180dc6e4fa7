//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freqmpc::dynamics::algebraic_frequencies;
use freqmpc::harness::{self, ControllerKind, RunLog, Scenario, Signal};
use freqmpc::mpc::{build_qcvx, classify_branches, qualification_point, phi_cvx_contains, phi_disc_contains, Branch};
use freqmpc::qp::active_set::{ActiveSetSettings, DualActiveSet};
use freqmpc::qp::{kkt_check, solve, CscMatrix, QpProblem, QpStatus, Settings};
use freqmpc::refgen::generate_reference;
use freqmpc::steady_state::{phi_contains, r_bar};
use freqmpc::{Equilibrium, NetworkCase, RegionPartition};

const SOUNDNESS_PAIRS: usize = 10_000;
const SOUNDNESS_LIMIT: Duration = Duration::from_secs(30);
const QUALIFY_STATES: usize = 100;
const QUALIFY_TOL: f64 = 1e-9;
const QUALIFY_LIMIT: Duration = Duration::from_secs(60);
const QP_COUNT: usize = 200;
const QP_GAP: f64 = 1e-6;
const QP_KKT: f64 = 1e-5;
const QP_LIMIT: Duration = Duration::from_secs(60);
const RUN_LIMIT: Duration = Duration::from_secs(600);
const FINAL_RESIDUAL: f64 = 1e-3;
const ENERGY_SLACK: f64 = 1e-6;
const EQUIVALENCE_TOL: f64 = 1e-7;

fn cases_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn load_case(name: &str) -> NetworkCase {
    NetworkCase::load(cases_dir().join(name)).unwrap()
}

fn load_scenario(name: &str) -> Scenario {
    Scenario::load(cases_dir().join(format!("{name}.toml"))).unwrap()
}

fn with_horizon(case: &NetworkCase, steps: Option<usize>, period: Option<f64>) -> NetworkCase {
    let mut cfg = case.config().clone();
    if let Some(s) = steps {
        cfg.horizon.steps = s;
    }
    if let Some(p) = period {
        cfg.horizon.period = p;
    }
    case.with_config(cfg).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Random state near the equilibrium of the base injections. Inertial
/// frequencies are uniform in `omega_range`; load-bus frequencies are algebraic.
fn random_state(case: &NetworkCase, eq: &Equilibrium, rng: &mut ChaCha8Rng, angle: f64, omega_range: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let theta: Vec<f64> = (0..case.n()).map(|_| rng.gen_range(-angle..=angle)).collect();
    let mut lambda = vec![0.0; case.m()];
    case.edge_differences(&theta, &mut lambda);
    for (l, l0) in lambda.iter_mut().zip(eq.angle_diffs.iter()) {
        *l += l0;
    }
    let mut omega = vec![0.0; case.n()];
    for &i in case.inertial_buses() {
        omega[i] = rng.gen_range(omega_range.0..=omega_range.1);
    }
    let p = case.base_injections();
    let zero = vec![0.0; case.n()];
    for (i, w) in algebraic_frequencies(case, &lambda, &zero, p.as_slice()) {
        omega[i] = w;
    }
    (lambda, omega)
}

fn constant_forecast(case: &NetworkCase) -> DMatrix<f64> {
    let p = case.base_injections();
    DMatrix::from_fn(case.n(), case.horizon().steps, |i, _| p[i])
}

fn convexification_soundness() -> Outcome {
    let start = Instant::now();
    let cases = [with_horizon(&load_case("two_gen.case"), Some(10), None), with_horizon(&load_case("ieee9.case"), Some(10), None)];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut pairs, mut members, mut counterexamples, mut reference_outside) = (0, 0, 0, 0);
    'outer: loop {
        for case in &cases {
            if members >= SOUNDNESS_PAIRS {
                break 'outer;
            }
            let cfg = case.config();
            let steps = case.horizon().steps;
            let eq = Equilibrium::compute(case, &case.base_injections()).unwrap();
            let (lambda, omega) = random_state(case, &eq, &mut rng, 0.05, (-0.19, 0.19));
            let Ok(reference) = generate_reference(case, &lambda, &omega, &constant_forecast(case)) else { continue };
            if !reference.feasible {
                continue;
            }
            let plan = classify_branches(case, &reference.omega);
            if !phi_cvx_contains(case, &plan, &reference.omega, &reference.input, 1e-9) {
                reference_outside += 1;
            }
            for c in 0..5 {
                let mut om = DMatrix::from_fn(case.n(), steps + 1, |_, _| rng.gen_range(-0.3..0.3));
                let mut inp = DMatrix::from_fn(case.n(), steps, |_, _| rng.gen_range(-1.0..1.0));
                // four candidates drawn inside the convexified set, one unconstrained
                if c < 4 {
                    for (s, (&i, p)) in cfg.controlled.iter().zip(&cfg.params).enumerate() {
                        for k in 0..steps {
                            let edge = rng.gen_bool(0.2);
                            let (w, u) = match plan.get(s, k) {
                                Branch::Upper => (p.threshold_upper + if edge { 0.0 } else { rng.gen_range(0.0..0.2) }, -rng.gen_range(0.0..1.0)),
                                Branch::Lower => (p.threshold_lower - if edge { 0.0 } else { rng.gen_range(0.0..0.2) }, rng.gen_range(0.0..1.0)),
                                Branch::Inactive => (rng.gen_range(-0.3..0.3), 0.0),
                            };
                            om[(i, k)] = w;
                            inp[(i, k)] = u;
                        }
                    }
                }
                pairs += 1;
                if phi_cvx_contains(case, &plan, &om, &inp, 0.0) {
                    members += 1;
                    if !phi_disc_contains(case, &om, &inp, 0.0) {
                        counterexamples += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        members >= SOUNDNESS_PAIRS && counterexamples == 0 && reference_outside == 0 && elapsed <= SOUNDNESS_LIMIT,
        format!(
            "{members} members of the convexified set among {pairs} pairs, {counterexamples} counterexamples, {reference_outside} references outside, {:.1} s (limit {} s)",
            elapsed.as_secs_f64(),
            SOUNDNESS_LIMIT.as_secs()
        ),
    )
}

fn reference_qualification() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["two_gen.case", "ieee9.case"] {
        let case = with_horizon(&load_case(name), None, Some(1e-3));
        let cfg = case.config();
        let eq = Equilibrium::compute(&case, &case.base_injections()).unwrap();
        let r = 0.5 * r_bar(&case, &eq.angle_diffs);
        let fc = constant_forecast(&case);
        let mut accepted = 0;
        while accepted < QUALIFY_STATES {
            let (lambda, omega) = random_state(&case, &eq, &mut rng, 0.1, (-0.19, 0.19));
            let safe = cfg.freq_constrained.iter().zip(&cfg.bounds).all(|(&i, b)| b.contains(omega[i]));
            if !safe || !phi_contains(&case, &eq, r, &lambda, &omega) {
                continue;
            }
            accepted += 1;
            let reference = match generate_reference(&case, &lambda, &omega, &fc) {
                Ok(rf) if rf.feasible => rf,
                Ok(rf) => {
                    failures.push(format!("{name}: {}", rf.violation.unwrap_or_default()));
                    continue;
                }
                Err(e) => {
                    failures.push(format!("{name}: {e}"));
                    continue;
                }
            };
            let problem = build_qcvx(&case, &lambda, &omega, &fc, &reference).unwrap();
            let point = qualification_point(&case, &problem.layout, &reference);
            let res = problem.residual(&point);
            worst = worst.max(res);
            if res > QUALIFY_TOL {
                failures.push(format!("{name}: residual {res:e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed <= QUALIFY_LIMIT,
        format!(
            "{} states per case, {} failures{}, worst residual {worst:.1e} (tol {QUALIFY_TOL:e}), {:.1} s",
            QUALIFY_STATES,
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(" (first: {f})")),
            elapsed.as_secs_f64()
        ),
    )
}

/// Accelerated projected gradient on the dual of a diagonal-cost QP, with
/// the multipliers split into nonnegative upper and lower parts. The rows
/// with positive multipliers are then solved as equalities; the polished
/// point replaces the iterate when it is feasible.
fn projected_gradient_oracle(p: &QpProblem) -> Vec<f64> {
    let (n, m) = (p.n(), p.m());
    let a = p.a.to_dense();
    let hinv = DVector::from_iterator(n, p.p_diag.iter().map(|d| 1.0 / d));
    let q = DVector::from_column_slice(&p.q);
    let g = &a * DMatrix::from_diagonal(&hinv) * a.transpose();
    let lmax = SymmetricEigen::new(g).eigenvalues.max().max(1e-12);
    let step = 1.0 / (2.0 * lmax);
    let primal = |up: &DVector<f64>, lo: &DVector<f64>| -> DVector<f64> {
        let v = &q + a.transpose() * (up - lo);
        -v.component_mul(&hinv)
    };
    let (mut up, mut lo) = (DVector::zeros(m), DVector::zeros(m));
    let (mut yu, mut yl) = (up.clone(), lo.clone());
    let mut t: f64 = 1.0;
    for _ in 0..1_000_000 {
        let x = primal(&yu, &yl);
        let ax = &a * &x;
        let mut nu = DVector::zeros(m);
        let mut nl = DVector::zeros(m);
        for i in 0..m {
            if p.u[i].is_finite() {
                nu[i] = (yu[i] + step * (ax[i] - p.u[i])).max(0.0);
            }
            if p.l[i].is_finite() {
                nl[i] = (yl[i] + step * (p.l[i] - ax[i])).max(0.0);
            }
        }
        let change = (&nu - &up).amax().max((&nl - &lo).amax());
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        // restart the momentum when it points against the last step
        let restart = (&nu - &up).dot(&(&yu - &nu)) + (&nl - &lo).dot(&(&yl - &nl)) > 0.0;
        yu = &nu + beta * (&nu - &up);
        yl = &nl + beta * (&nl - &lo);
        up = nu;
        lo = nl;
        t = if restart { 1.0 } else { t_next };
        if restart {
            yu = up.clone();
            yl = lo.clone();
        }
        if change < 1e-14 {
            break;
        }
    }
    let x = primal(&up, &lo);
    let rows: Vec<(usize, f64)> = (0..m)
        .filter_map(|i| {
            if up[i] > 1e-10 {
                Some((i, p.u[i]))
            } else if lo[i] > 1e-10 {
                Some((i, p.l[i]))
            } else {
                None
            }
        })
        .collect();
    if rows.is_empty() {
        return x.as_slice().to_vec();
    }
    // min ½xᵀPx + qᵀx s.t. A_W x = b: x = −P⁻¹(q + A_Wᵀy), (A_W P⁻¹ A_Wᵀ) y = −A_W P⁻¹ q − b
    let aw = DMatrix::from_fn(rows.len(), n, |r, j| a[(rows[r].0, j)]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let gw = &aw * DMatrix::from_diagonal(&hinv) * aw.transpose();
    let rhs = -(&aw * q.component_mul(&hinv)) - b;
    let Ok(y) = gw.svd(true, true).solve(&rhs, 1e-12) else { return x.as_slice().to_vec() };
    let polished = -(&q + aw.transpose() * y).component_mul(&hinv);
    let better = p.max_violation(polished.as_slice()) <= 1e-9 && p.objective(polished.as_slice()) <= p.objective(x.as_slice()) + 1e-9;
    if better { polished } else { x }.as_slice().to_vec()
}

fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.gen_range(2..=30);
    let m = rng.gen_range(1..=30);
    let p_diag = (0..n).map(|_| rng.gen_range(0.2..5.0)).collect();
    let q = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut trip = Vec::new();
    for r in 0..m {
        for j in 0..n {
            if rng.gen_bool(0.3) {
                trip.push((r, j, rng.gen_range(-1.0..1.0)));
            }
        }
        trip.push((r, rng.gen_range(0..n), rng.gen_range(0.5..1.5)));
    }
    let a = CscMatrix::from_triplets(m, n, &trip);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ax = {
        let mut v = vec![0.0; m];
        a.mul_vec(&x0, &mut v);
        v
    };
    let mut l = Vec::with_capacity(m);
    let mut u = Vec::with_capacity(m);
    for v in ax {
        match rng.gen_range(0..4) {
            0 => (l.push(v - rng.gen_range(0.0..0.5)), u.push(f64::INFINITY)),
            1 => (l.push(f64::NEG_INFINITY), u.push(v + rng.gen_range(0.0..0.5))),
            2 => (l.push(v), u.push(v)),
            _ => (l.push(v - rng.gen_range(0.0..0.5)), u.push(v + rng.gen_range(0.0..0.5))),
        };
    }
    QpProblem { p_diag, q, a, l, u }
}

fn qp_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let tight = Settings { eps_abs: 1e-10, eps_rel: 1e-10, max_iter: 200_000, ..Settings::default() };
    let (mut worst_gap, mut worst_kkt): (f64, f64) = (0.0, 0.0);
    let mut bad = 0;
    for _ in 0..QP_COUNT {
        let p = random_qp(&mut rng);
        let oracle = projected_gradient_oracle(&p);
        let reference = p.objective(&oracle);
        let scale = reference.abs().max(1.0);
        let admm = solve(&p, None, &tight).unwrap();
        let (active, _) = DualActiveSet::new(&p, ActiveSetSettings::default()).unwrap().solve(&[]).unwrap();
        for sol in [&admm, &active] {
            let gap = (sol.objective - reference).abs() / scale;
            let kkt = kkt_check(&p, sol).max();
            worst_gap = worst_gap.max(gap);
            worst_kkt = worst_kkt.max(kkt);
            if sol.status != QpStatus::Optimal || gap > QP_GAP || kkt > QP_KKT {
                bad += 1;
            }
        }
    }
    // contradictory constraints: a·x ≥ 1 and a·x ≤ −1 on top of a random problem
    let mut missed = 0;
    for _ in 0..20 {
        let p = random_qp(&mut rng);
        let mut trip: Vec<_> = p.a.triplets().collect();
        let (m, n) = (p.m(), p.n());
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        trip.extend(row.iter().map(|&(j, v)| (m, j, v)));
        trip.extend(row.iter().map(|&(j, v)| (m + 1, j, v)));
        let mut l = p.l.clone();
        let mut u = p.u.clone();
        l.extend([1.0, f64::NEG_INFINITY]);
        u.extend([f64::INFINITY, -1.0]);
        let bad_p = QpProblem { p_diag: p.p_diag.clone(), q: p.q.clone(), a: CscMatrix::from_triplets(m + 2, n, &trip), l, u };
        let admm = solve(&bad_p, None, &Settings::default()).unwrap();
        let (active, _) = DualActiveSet::new(&bad_p, ActiveSetSettings::default()).unwrap().solve(&[]).unwrap();
        missed += usize::from(admm.status != QpStatus::PrimalInfeasible) + usize::from(active.status != QpStatus::PrimalInfeasible);
    }
    let elapsed = start.elapsed();
    outcome(
        bad == 0 && missed == 0 && elapsed <= QP_LIMIT,
        format!(
            "{QP_COUNT} problems x 2 solvers: worst objective gap {worst_gap:.1e} (tol {QP_GAP:e}), worst KKT {worst_kkt:.1e} (tol {QP_KKT:e}), {bad} failures; {missed}/40 infeasible problems missed; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

struct TimedRun {
    log: RunLog,
    elapsed: Duration,
}

fn timed(s: &Scenario) -> TimedRun {
    let start = Instant::now();
    let log = harness::run(s).unwrap_or_else(|e| panic!("{}: {e}", s.label));
    TimedRun { log, elapsed: start.elapsed() }
}

fn band_and_sign(runs: &[&RunLog]) -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for log in runs {
        let s = log.summary();
        pass &= s.band_violations == 0 && s.sign_violations == 0;
        if s.band_violations + s.sign_violations > 0 {
            detail.push(format!("{}: band {} sign {}", s.label, s.band_violations, s.sign_violations));
        }
    }
    outcome(pass, format!("{} runs, {}", runs.len(), if detail.is_empty() { "no band or sign violations".into() } else { detail.join(", ") }))
}

fn invariance(runs: &[&TimedRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let s = r.log.summary();
        let v: usize = s.violations.iter().sum();
        let ok = v == 0 && r.elapsed <= RUN_LIMIT && r.log.rows.last().is_some_and(|x| x.t >= 40.0 - 1e-9);
        pass &= ok;
        parts.push(format!("{}: {v} bound violations, {:.0} s", s.label, r.elapsed.as_secs_f64()));
    }
    outcome(pass, format!("{} (limit {} s)", parts.join("; "), RUN_LIMIT.as_secs()))
}

fn stability(runs: &[&RunLog], disturbance_end: f64) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for log in runs {
        let s = log.summary();
        let nonzero_late = log.rows.iter().filter(|r| r.t >= 30.0 - 1e-9 && r.u.iter().any(|&x| x != 0.0)).count();
        let after: Vec<_> = log.rows.iter().filter(|r| r.t >= disturbance_end - 1e-9).collect();
        let rise = after.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
        let ok = s.final_residual <= FINAL_RESIDUAL && nonzero_late == 0 && rise <= ENERGY_SLACK;
        pass &= ok;
        parts.push(format!("{}: residual {:.1e}, {nonzero_late} nonzero inputs on [30, 40], max V rise {rise:.1e}", s.label, s.final_residual));
    }
    outcome(pass, format!("{} (tol {FINAL_RESIDUAL:e}, {ENERGY_SLACK:e}/step)", parts.join("; ")))
}

fn attraction(log: &RunLog) -> Outcome {
    let meta = &log.meta;
    let s = log.summary();
    let at_enable = log.rows.iter().find(|r| r.t >= meta.enable_time - 1e-9).unwrap();
    let below = meta.freq_constrained.iter().zip(&meta.bounds).all(|(&i, &(lo, _))| at_enable.omega[i] < lo);
    let entered = s.first_entry.iter().all(Option::is_some);
    let exits: usize = s.exits_after_entry.iter().sum();
    let entries: Vec<String> = s.first_entry.iter().map(|e| e.map_or("never".into(), |t| format!("{t:.3}"))).collect();
    outcome(
        below && entered && exits == 0,
        format!("all constrained buses below bound at {} s: {below}; first entry [{}] s; {exits} exits after entry", meta.enable_time, entries.join(", ")),
    )
}

fn tightness(runs: &[&RunLog]) -> Outcome {
    let totals: Vec<f64> = runs.iter().map(|l| l.summary().input_total_integral).collect();
    let increasing = totals.windows(2).all(|w| w[0] < w[1]);
    let bounds: Vec<String> = runs.iter().map(|l| format!("{}", l.meta.bounds[0].1)).collect();
    outcome(
        increasing,
        format!("int u_total = {} for bounds {}", totals.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" < "), bounds.join("/")),
    )
}

fn cost_ranking() -> (Outcome, Vec<RunLog>) {
    let logs: Vec<RunLog> = ["ieee9_centralized", "ieee9_distributed", "ieee9_reference_baseline"].iter().map(|n| timed(&load_scenario(n)).log).collect();
    let costs: Vec<f64> = logs.iter().map(|l| l.summary().control_cost).collect();
    (
        outcome(costs[0] <= costs[1] && costs[1] <= costs[2], format!("centralized {:.6} <= distributed {:.6} <= baseline {:.6}", costs[0], costs[1], costs[2])),
        logs,
    )
}

fn single_region_equivalence() -> (Outcome, Vec<RunLog>) {
    let mut central = load_scenario("ieee9_centralized");
    central.duration = 5.0;
    let mut single = central.clone();
    single.controller = ControllerKind::Distributed;
    single.partition = Some(RegionPartition::single_region(&single.case));
    let a = timed(&central).log;
    let b = timed(&single).log;
    let worst = a
        .rows
        .iter()
        .zip(&b.rows)
        .flat_map(|(x, y)| x.u.iter().zip(&y.u).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    let active = a.rows.iter().filter(|r| r.u.iter().any(|&x| x != 0.0)).count();
    (
        outcome(a.rows.len() == b.rows.len() && worst <= EQUIVALENCE_TOL, format!("{} steps ({active} with nonzero input), max |u difference| {worst:.1e} (tol {EQUIVALENCE_TOL:e})", a.rows.len())),
        vec![a, b],
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "convexification soundness", convexification_soundness()));
    results.push((2, "reference qualification", reference_qualification()));
    results.push((3, "QP correctness", qp_correctness()));

    let scenario = load_scenario("ieee39_centralized");
    let Signal::Sinusoidal { cutoff: disturbance_end, .. } = scenario.disturbance.signal else { panic!("39-bus scenario should use a sinusoidal disturbance") };
    let central = timed(&scenario);
    let distributed = timed(&load_scenario("ieee39_distributed"));
    let delayed = timed(&load_scenario("ieee39_delayed"));
    let tight: Vec<TimedRun> = ["ieee39_bound_0.1", "ieee39_bound_0.05"].iter().map(|n| timed(&load_scenario(n))).collect();
    let (ranking, nine_bus) = cost_ranking();
    let (equivalence, single) = single_region_equivalence();

    let mut all: Vec<&RunLog> = vec![&central.log, &distributed.log, &delayed.log];
    all.extend(tight.iter().map(|r| &r.log));
    all.extend(nine_bus.iter());
    all.extend(single.iter());
    results.push((4, "band and sign conditions", band_and_sign(&all)));
    results.push((5, "frequency invariance", invariance(&[&central, &distributed])));
    results.push((6, "stability and vanishing input", stability(&[&central.log, &distributed.log], disturbance_end)));
    results.push((7, "attraction from outside", attraction(&delayed.log)));
    results.push((8, "bound tightness trend", tightness(&[&distributed.log, &tight[0].log, &tight[1].log])));
    results.push((9, "cost ranking on 9-bus", ranking));
    results.push((10, "single-region equivalence", equivalence));

    // written to the raw handle so the lines show without --nocapture
    let mut err = std::io::stderr().lock();
    for (k, name, o) in &results {
        writeln!(err, "criterion {k:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail).unwrap();
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
