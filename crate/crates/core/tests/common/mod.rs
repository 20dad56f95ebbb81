//! Finite-difference oracle shared by the gradient tests and the
//! acceptance suite.
#![allow(dead_code)]

use hydrosense::ealstm::{forward, EaLstmParams};
use hydrosense::numcore::SeededRng;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-6;
pub const ABS_FLOOR: f64 = 1e-10;

/// Central difference of `f` at `x[k]`.
pub fn central(x: &mut [f64], k: usize, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[k];
    x[k] = orig + FD_STEP;
    let up = f(x);
    x[k] = orig - FD_STEP;
    let down = f(x);
    x[k] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// True when `analytic` agrees with `fd` to the relative tolerance, or
/// both are within the absolute floor.
pub fn agrees(analytic: f64, fd: f64) -> bool {
    let diff = (analytic - fd).abs();
    diff <= ABS_FLOOR || diff <= REL_TOL * analytic.abs().max(fd.abs())
}

/// Largest disagreement found, as (what, analytic, fd).
#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    pub failures: Vec<(String, f64, f64)>,
}

impl FdReport {
    pub fn check(&mut self, what: impl FnOnce() -> String, analytic: f64, fd: f64) {
        self.checked += 1;
        if !agrees(analytic, fd) {
            self.failures.push((what(), analytic, fd));
        }
    }
}

fn yhat(p: &EaLstmParams, x_s: &[f64], x_d: &[f64]) -> f64 {
    forward(p, x_s, x_d).unwrap().0
}

/// Compares `backward` against central differences for every parameter,
/// static input and dynamic input.
pub fn fd_check_sequence(p: &EaLstmParams, x_s: &[f64], x_d: &[f64], report: &mut FdReport) {
    let (_, cache) = forward(p, x_s, x_d).unwrap();
    let g = hydrosense::ealstm::backward(&cache, p, 1.0).unwrap();

    let mut flat = p.to_flat();
    let analytic = g.d_params.to_flat();
    let mut rebuild = p.clone();
    let mut f = |v: &[f64]| {
        let mut off = 0;
        for t in rebuild.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&v[off..off + n]);
            off += n;
        }
        yhat(&rebuild, x_s, x_d)
    };
    for k in 0..flat.len() {
        let fd = central(&mut flat, k, &mut f);
        report.check(|| format!("param {k}"), analytic[k], fd);
    }

    let mut xs = x_s.to_vec();
    for k in 0..xs.len() {
        let fd = central(&mut xs, k, &mut |v| yhat(p, v, x_d));
        report.check(|| format!("x_s {k}"), g.d_xs[k], fd);
    }

    let mut xd = x_d.to_vec();
    for k in 0..xd.len() {
        let fd = central(&mut xd, k, &mut |v| yhat(p, x_s, v));
        report.check(|| format!("x_d {k}"), g.d_xd.as_slice()[k], fd);
    }
}

/// Random parameters and inputs for one gradient-check draw.
pub fn random_problem(
    seed: u64,
    h: usize,
    n_s: usize,
    n_d: usize,
    t: usize,
) -> (EaLstmParams, Vec<f64>, Vec<f64>) {
    let mut p = EaLstmParams::init(h, n_s, n_d, seed);
    let mut rng = SeededRng::derived(seed, 1);
    // Move the biases off their initial values so every gate is exercised.
    for tensor in p.tensors_mut() {
        for v in tensor.iter_mut() {
            *v += 0.3 * rng.normal();
        }
    }
    let x_s = (0..n_s).map(|_| rng.normal()).collect();
    let x_d = (0..t * n_d).map(|_| rng.normal()).collect();
    (p, x_s, x_d)
}
