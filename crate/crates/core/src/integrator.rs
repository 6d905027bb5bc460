//! Embedded explicit Runge–Kutta 2(3) pair of Bogacki and Shampine, with PI
//! step-size control and cubic Hermite dense output.
//!
//! The pair is FSAL: the last stage of an accepted step is the first stage of
//! the next one. The local error estimate is the difference between the
//! third-order solution and the embedded second-order one.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A first-order system `y' = F(t, y)` plus the hooks the particle dynamics
/// needs: an admissibility test (stages outside the domain are rejected), an
/// algebraic constraint applied after each step, and a problem-specific
/// error norm.
pub trait OdeSystem {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Weighted RMS norm of `v` with weights taken from the pair of states
    /// `(a, b)`; the step is accepted when the norm of the error is `<= 1`.
    fn norm(&self, a: &[f64], b: &[f64], v: &[f64], tol: &Tolerances) -> f64;

    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }

    fn constrain(&self, _y: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-6, atol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Subset of `rejected` caused by an inadmissible stage or result.
    pub inadmissible: usize,
    pub evaluations: usize,
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const ALPHA: f64 = 0.7 / 3.0;
const BETA: f64 = 0.4 / 3.0;
const MAX_STEPS: usize = 50_000_000;

/// Integrates from `(t0, y0)` to `t_end`. `outputs` must be sorted and lie in
/// `[t0, t_end]`; the returned vector holds one state per output time.
/// `on_step` sees every accepted state.
pub fn solve<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: &Tolerances,
    outputs: &[f64],
    mut on_step: impl FnMut(f64, &[f64]),
) -> Result<(Vec<Vec<f64>>, StepStats)> {
    if !(t_end > t0) {
        return Err(Error::Domain { what: "t_end", value: t_end });
    }
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(Error::Domain { what: "tolerance", value: tol.rtol.min(tol.atol) });
    }
    let dim = y0.len();
    let h_min = 1e-14 * (t_end - t0);
    let mut stats = StepStats::default();
    let mut out = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        out.push(y0.to_vec());
        next_out += 1;
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    sys.eval(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = initial_step(sys, t, &y, &k1, t_end - t0, tol, &mut stats);
    let mut err_prev: f64 = 1.0;
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= MAX_STEPS {
            return Err(Error::StepUnderflow { t, h });
        }
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let mut last = false;
        if t + 1.0001 * h >= t_end {
            h = t_end - t;
            last = true;
        }

        // stage 2
        for i in 0..dim {
            stage[i] = y[i] + 0.5 * h * k1[i];
        }
        if !sys.admissible(&stage) {
            reject_inadmissible(&mut h, &mut stats, &mut last_rejected);
            continue;
        }
        sys.eval(t + 0.5 * h, &stage, &mut k2);
        // stage 3
        for i in 0..dim {
            stage[i] = y[i] + 0.75 * h * k2[i];
        }
        if !sys.admissible(&stage) {
            stats.evaluations += 1;
            reject_inadmissible(&mut h, &mut stats, &mut last_rejected);
            continue;
        }
        sys.eval(t + 0.75 * h, &stage, &mut k3);
        for i in 0..dim {
            y_new[i] = y[i] + h * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
        }
        sys.constrain(&mut y_new);
        stats.evaluations += 2;
        if !sys.admissible(&y_new) {
            reject_inadmissible(&mut h, &mut stats, &mut last_rejected);
            continue;
        }
        let t_new = if last { t_end } else { t + h };
        sys.eval(t_new, &y_new, &mut k4);
        stats.evaluations += 1;
        for i in 0..dim {
            err[i] = h * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 0.125 * k4[i]);
        }
        let e = sys.norm(&y, &y_new, &err, tol);
        if !e.is_finite() {
            reject_inadmissible(&mut h, &mut stats, &mut last_rejected);
            continue;
        }

        if e <= 1.0 {
            // dense output for every requested time inside (t, t_new]
            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let s = outputs[next_out];
                let mut ys = if s == t_new {
                    y_new.clone()
                } else {
                    hermite(t, &y, &k1, t_new, &y_new, &k4, s)
                };
                sys.constrain(&mut ys);
                if !sys.admissible(&ys) {
                    ys = single_step(sys, t, &y, &k1, s - t, &mut stats);
                }
                out.push(ys);
                next_out += 1;
            }
            t = t_new;
            core::mem::swap(&mut y, &mut y_new);
            core::mem::swap(&mut k1, &mut k4);
            stats.accepted += 1;
            on_step(t, &y);

            let e_c = e.max(1e-10);
            let mut fac = SAFETY * libm::pow(e_c, -ALPHA) * libm::pow(err_prev, BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            err_prev = e_c;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * libm::pow(e, -1.0 / 3.0)).max(FAC_MIN);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok((out, stats))
}

fn reject_inadmissible(h: &mut f64, stats: &mut StepStats, last_rejected: &mut bool) {
    *h *= 0.5;
    stats.rejected += 1;
    stats.inadmissible += 1;
    *last_rejected = true;
}

/// Cubic Hermite interpolant through `(t0, y0, f0)` and `(t1, y1, f1)`.
fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], s: f64) -> Vec<f64> {
    let h = t1 - t0;
    let th = (s - t0) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

// Fallback for an inadmissible interpolant: one plain third-order step of
// length `h`, no error control. `h` is shorter than an accepted step.
fn single_step<S: OdeSystem>(
    sys: &S,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    stats: &mut StepStats,
) -> Vec<f64> {
    let dim = y.len();
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut stage: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k1[i]).collect();
    sys.eval(t + 0.5 * h, &stage, &mut k2);
    for i in 0..dim {
        stage[i] = y[i] + 0.75 * h * k2[i];
    }
    sys.eval(t + 0.75 * h, &stage, &mut k3);
    stats.evaluations += 2;
    let mut out: Vec<f64> =
        (0..dim).map(|i| y[i] + h * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i])).collect();
    sys.constrain(&mut out);
    out
}

// Hairer–Nørsett–Wanner starting step for a method of order 2.
fn initial_step<S: OdeSystem>(
    sys: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    span: f64,
    tol: &Tolerances,
    stats: &mut StepStats,
) -> f64 {
    let d0 = sys.norm(y, y, y, tol);
    let d1 = sys.norm(y, y, f0, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if !sys.admissible(&y1) {
        return h0 * 0.1;
    }
    sys.eval(t + h0, &y1, &mut f1);
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = sys.norm(y, y, &diff, tol) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { libm::pow(0.01 / dmax, 1.0 / 3.0) };
    (100.0 * h0).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeSystem for Decay {
        fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
            dy[1] = y[0] - 2.0 * y[1];
        }
        fn norm(&self, a: &[f64], b: &[f64], v: &[f64], tol: &Tolerances) -> f64 {
            let s: f64 = (0..v.len())
                .map(|i| {
                    let sc = tol.atol + tol.rtol * a[i].abs().max(b[i].abs());
                    (v[i] / sc) * (v[i] / sc)
                })
                .sum();
            libm::sqrt(s / v.len() as f64)
        }
    }

    fn exact(t: f64) -> [f64; 2] {
        // y0 = e^{-t}, y1 = e^{-t} - e^{-2t} with y(0) = (1, 0)
        let a = libm::exp(-t);
        [a, a - libm::exp(-2.0 * t)]
    }

    #[test]
    fn converges_with_tolerance() {
        let mut errs = alloc::vec::Vec::new();
        for rtol in [1e-4, 1e-6, 1e-8] {
            let tol = Tolerances { rtol, atol: rtol * 1e-3 };
            let (out, stats) = solve(&Decay, 0.0, &[1.0, 0.0], 2.0, &tol, &[0.5, 1.0, 2.0], |_, _| {}).unwrap();
            assert_eq!(out.len(), 3);
            let mut worst: f64 = 0.0;
            for (y, t) in out.iter().zip([0.5, 1.0, 2.0]) {
                let e = exact(t);
                worst = worst.max((y[0] - e[0]).abs()).max((y[1] - e[1]).abs());
            }
            assert!(stats.accepted > 0);
            errs.push(worst);
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[1] < 1e-5);
        assert!(errs[2] < 1e-7);
        assert!(errs[2] < errs[0]);
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let tol = Tolerances { rtol: 1e-9, atol: 1e-12 };
        let times: alloc::vec::Vec<f64> = (0..=100).map(|k| k as f64 * 0.03).collect();
        let (out, _) = solve(&Decay, 0.0, &[1.0, 0.0], 3.0, &tol, &times, |_, _| {}).unwrap();
        for (y, &t) in out.iter().zip(&times) {
            let e = exact(t);
            assert!((y[0] - e[0]).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let tol = Tolerances::default();
        assert!(solve(&Decay, 1.0, &[1.0, 0.0], 1.0, &tol, &[], |_, _| {}).is_err());
        let bad = Tolerances { rtol: 0.0, atol: 1e-9 };
        assert!(solve(&Decay, 0.0, &[1.0, 0.0], 1.0, &bad, &[], |_, _| {}).is_err());
    }

    struct Blowup;
    impl OdeSystem for Blowup {
        fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
        fn norm(&self, _a: &[f64], _b: &[f64], v: &[f64], tol: &Tolerances) -> f64 {
            v[0].abs() / tol.atol
        }
        fn admissible(&self, y: &[f64]) -> bool {
            y[0].is_finite() && y[0] < 1e12
        }
    }

    #[test]
    fn step_underflow_is_reported() {
        // y' = y^2, y(0) = 1 blows up at t = 1.
        let r = solve(&Blowup, 0.0, &[1.0], 2.0, &Tolerances::default(), &[], |_, _| {});
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
