//! Problem generators shared by the benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freqmpc::qp::{CscMatrix, QpProblem};
use freqmpc::{Equilibrium, NetworkCase};

/// Feasible random QP with diagonal cost and about `density` nonzeros per row entry.
pub fn random_qp(n: usize, m: usize, density: f64, seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_diag = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let q = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut trip = Vec::new();
    for r in 0..m {
        trip.push((r, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
        for j in 0..n {
            if rng.gen_bool(density) {
                trip.push((r, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let a = CscMatrix::from_triplets(m, n, &trip);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut ax = vec![0.0; m];
    a.mul_vec(&x0, &mut ax);
    let l = ax.iter().map(|v| v - rng.gen_range(0.0..0.2)).collect();
    let u = ax.iter().map(|v| v + rng.gen_range(0.0..0.2)).collect();
    QpProblem { p_diag, q, a, l, u }
}

/// Equilibrium angles with every constrained generator pushed below its
/// lower threshold, and a forecast with the injections cut by `drop`.
pub fn stressed_state(case: &NetworkCase, drop: f64) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
    let p = case.base_injections();
    let eq = Equilibrium::compute(case, &p).expect("equilibrium");
    let mut omega = vec![eq.sync_freq; case.n()];
    let cfg = case.config();
    for (&i, b) in cfg.freq_constrained.iter().zip(&cfg.bounds) {
        omega[i] = 0.75 * b.lower;
    }
    let cut: DVector<f64> = p.map(|v| if v < 0.0 { v * (1.0 + drop) } else { v });
    let forecast = DMatrix::from_fn(case.n(), cfg.horizon.steps, |i, _| cut[i]);
    (eq.angle_diffs.as_slice().to_vec(), omega, forecast)
}
