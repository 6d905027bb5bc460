//! Follow-the-leader dynamics.
//!
//! Followers move with `x_i' = v(ell / (x_{i+1} - x_i))`; the leader moves
//! with `v_max`. See the crate docs for how the two modes index particles.

use alloc::vec;
use alloc::vec::Vec;

use crate::integrator::{self, OdeSystem, StepStats, Tolerances};
use crate::model::Velocity;
use crate::quantile::{check_ordering, Mode, ParticleState};
use crate::{Error, Result};

/// Velocities of all `N + 1` particles.
///
/// In `Phantom` mode the two algebraic particles get the time derivative of
/// their reflection rule (`2 v_1 - v_2`, `2 v_{N-1} - v_{N-2}`); the
/// integrator never integrates them directly.
pub fn rhs<V: Velocity + ?Sized>(state: &ParticleState, model: &V) -> Result<Vec<f64>> {
    check_ordering(state.positions())?;
    let mut out = vec![0.0; state.positions().len()];
    velocities(state.positions(), state.ell(), state.mode(), model, &mut out);
    Ok(out)
}

fn velocities<V: Velocity + ?Sized>(x: &[f64], ell: f64, mode: Mode, model: &V, out: &mut [f64]) {
    let n = x.len() - 1;
    let v_max = model.v_max();
    match mode {
        Mode::Anchored => {
            for i in 0..n {
                out[i] = model.v(ell / (x[i + 1] - x[i]));
            }
            out[n] = v_max;
        }
        Mode::Phantom => {
            for i in 1..n - 1 {
                out[i] = model.v(ell / (x[i + 1] - x[i]));
            }
            out[n - 1] = v_max;
            out[0] = 2.0 * out[1] - out[2];
            out[n] = 2.0 * out[n - 1] - out[n - 2];
        }
    }
}

fn reflect_phantoms(x: &mut [f64]) {
    let n = x.len() - 1;
    x[0] = 2.0 * x[1] - x[2];
    x[n] = 2.0 * x[n - 1] - x[n - 2];
}

/// `R_i = ell / (x_{i+1} - x_i)` for every gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDensities {
    pub r: Vec<f64>,
    pub ell: f64,
    pub mode: Mode,
}

impl GapDensities {
    pub fn from_state(state: &ParticleState) -> Self {
        GapDensities {
            r: state.gaps().map(|g| state.ell() / g).collect(),
            ell: state.ell(),
            mode: state.mode(),
        }
    }

    pub fn max(&self) -> f64 {
        self.r.iter().copied().fold(0.0, f64::max)
    }
}

/// Time derivative of the gap densities:
/// `R_i' = -(R_i^2 / ell) (v(R_{i+1}) - v(R_i))` for followers and
/// `-(R_i^2 / ell) (v_max - v(R_i))` for the gap behind the leader.
/// Independent of positions; used as an oracle for [`integrate`].
pub fn density_rhs<V: Velocity + ?Sized>(r: &GapDensities, model: &V) -> Vec<f64> {
    let mut out = vec![0.0; r.r.len()];
    density_rhs_into(&r.r, r.ell, r.mode, model, &mut out);
    out
}

fn density_rhs_into<V: Velocity + ?Sized>(r: &[f64], ell: f64, mode: Mode, model: &V, out: &mut [f64]) {
    let n = r.len();
    let v_max = model.v_max();
    let (first, leader) = match mode {
        Mode::Anchored => (0, n - 1),
        Mode::Phantom => (1, n - 2),
    };
    for i in first..leader {
        out[i] = -(r[i] * r[i] / ell) * (model.v(r[i + 1]) - model.v(r[i]));
    }
    out[leader] = -(r[leader] * r[leader] / ell) * (v_max - model.v(r[leader]));
    if mode == Mode::Phantom {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Rejections caused by a stage that broke the particle ordering.
    pub ordering_rejections: usize,
    /// Smallest gap over every accepted step (compare with `ell / R`).
    pub min_gap_seen: f64,
}

/// Time-ordered snapshots of one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<ParticleState>,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(|s| s.t())
    }

    pub fn last(&self) -> &ParticleState {
        &self.snapshots[self.snapshots.len() - 1]
    }

    /// Largest spacing between consecutive snapshot times.
    pub fn max_spacing(&self) -> f64 {
        self.snapshots.windows(2).map(|w| w[1].t() - w[0].t()).fold(0.0, f64::max)
    }
}

struct ParticleSystem<'a, V: ?Sized> {
    model: &'a V,
    ell: f64,
    mode: Mode,
}

impl<V: Velocity + ?Sized> OdeSystem for ParticleSystem<'_, V> {
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        velocities(y, self.ell, self.mode, self.model, dy);
    }

    // Error measured on gaps, relative to the gap size; this keeps the step
    // sequence invariant under translations and uniform speed offsets.
    fn norm(&self, a: &[f64], b: &[f64], v: &[f64], tol: &Tolerances) -> f64 {
        let mut acc = 0.0;
        let n = v.len() - 1;
        for i in 0..n {
            let ga = (a[i + 1] - a[i]).abs();
            let gb = (b[i + 1] - b[i]).abs();
            let sc = tol.atol + tol.rtol * ga.max(gb);
            let e = (v[i + 1] - v[i]) / sc;
            acc += e * e;
        }
        libm::sqrt(acc / n as f64)
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y.windows(2).all(|w| w[1] > w[0]) && y.iter().all(|x| x.is_finite())
    }

    fn constrain(&self, y: &mut [f64]) {
        if self.mode == Mode::Phantom {
            reflect_phantoms(y);
        }
    }
}

/// Requested output times are clipped to `(t0, t_end]`; the returned
/// trajectory always starts with the initial state and ends at `t_end`.
pub fn integrate<V: Velocity + ?Sized>(
    state: &ParticleState,
    model: &V,
    t_end: f64,
    tol: &Tolerances,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    check_ordering(state.positions())?;
    let t0 = state.t();
    if !(t_end > t0) {
        return Err(Error::Domain { what: "t_end", value: t_end });
    }
    let mut times: Vec<f64> = snapshot_times.iter().copied().filter(|&s| s > t0 && s < t_end).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.push(t_end);

    let sys = ParticleSystem { model, ell: state.ell(), mode: state.mode() };
    let mut y0 = state.positions().to_vec();
    sys.constrain(&mut y0);
    let mut min_gap = state.min_gap();
    let (out, stats) = integrator::solve(&sys, t0, &y0, t_end, tol, &times, |_, y| {
        for w in y.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
    })?;
    let stats = trajectory_stats(stats, min_gap);

    let mut snapshots = Vec::with_capacity(out.len() + 1);
    snapshots.push(ParticleState::from_parts_unchecked(t0, y0, state.ell(), state.mode()));
    for (t, x) in times.into_iter().zip(out) {
        check_ordering(&x)?;
        snapshots.push(ParticleState::from_parts_unchecked(t, x, state.ell(), state.mode()));
    }
    Ok(Trajectory { snapshots, stats })
}

fn trajectory_stats(s: StepStats, min_gap_seen: f64) -> TrajectoryStats {
    TrajectoryStats {
        accepted_steps: s.accepted,
        rejected_steps: s.rejected,
        ordering_rejections: s.inadmissible,
        min_gap_seen,
    }
}

struct GapSystem<'a, V: ?Sized> {
    model: &'a V,
    ell: f64,
    mode: Mode,
}

impl<V: Velocity + ?Sized> OdeSystem for GapSystem<'_, V> {
    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        density_rhs_into(y, self.ell, self.mode, self.model, dy);
    }

    fn norm(&self, a: &[f64], b: &[f64], v: &[f64], tol: &Tolerances) -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            let sc = tol.atol + tol.rtol * a[i].abs().max(b[i].abs());
            let e = v[i] / sc;
            acc += e * e;
        }
        libm::sqrt(acc / v.len() as f64)
    }

    fn admissible(&self, y: &[f64]) -> bool {
        y.iter().all(|r| r.is_finite() && *r > 0.0)
    }
}

/// Integrates the gap-density ODE directly, returning `R(t)` at each
/// requested time (sorted, inside `(t0, t_end]`).
pub fn integrate_densities<V: Velocity + ?Sized>(
    r0: &GapDensities,
    model: &V,
    t0: f64,
    times: &[f64],
    tol: &Tolerances,
) -> Result<Vec<Vec<f64>>> {
    let t_end = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sys = GapSystem { model, ell: r0.ell, mode: r0.mode };
    let (out, _) = integrator::solve(&sys, t0, &r0.r, t_end, tol, times, |_, _| {})?;
    Ok(out)
}
