//! Diagnostics on piecewise-constant densities and particle states.

use alloc::format;
use alloc::vec::Vec;

use crate::density::{PiecewiseConstantDensity, PseudoInverse, StepFunction};
use crate::dynamics::{rhs, Trajectory};
use crate::model::Velocity;
use crate::quantile::ParticleState;
use crate::{Error, Result};

/// Sum of all jumps of `d`. With `include_boundary` the jumps from and to
/// the vacuum at the two ends count as well.
pub fn total_variation(d: &PiecewiseConstantDensity, include_boundary: bool) -> f64 {
    let v = d.values();
    let interior: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    if include_boundary {
        interior + v[0].abs() + v[v.len() - 1].abs()
    } else {
        interior
    }
}

/// Variation of `d` on `[a, b]`: jumps strictly inside `(a, b)`.
pub fn local_tv(d: &PiecewiseConstantDensity, a: f64, b: f64) -> f64 {
    local_tv_step(&d.as_step_function(), a, b)
}

/// [`local_tv`] of `v(rho)`, with `v(0) = v_max` on the vacuum.
pub fn local_tv_velocity<V: Velocity + ?Sized>(
    d: &PiecewiseConstantDensity,
    model: &V,
    a: f64,
    b: f64,
) -> f64 {
    local_tv_step(&d.map_values(|r| model.v(r)), a, b)
}

pub fn local_tv_step(s: &StepFunction, a: f64, b: f64) -> f64 {
    let m = s.values.len();
    let mut tv = 0.0;
    for (j, &x) in s.breaks.iter().enumerate() {
        if x <= a || x >= b {
            continue;
        }
        let left = if j == 0 { s.background } else { s.values[j - 1] };
        let right = if j == m { s.background } else { s.values[j] };
        tv += (right - left).abs();
    }
    tv
}

/// `int_0^dz |alpha + (beta - alpha) s / dz| ds` for a linear function with
/// end values `alpha`, `beta`.
fn abs_linear_integral(alpha: f64, beta: f64, dz: f64) -> f64 {
    if alpha * beta >= 0.0 {
        0.5 * (alpha.abs() + beta.abs()) * dz
    } else {
        0.5 * (alpha * alpha + beta * beta) / (alpha.abs() + beta.abs()) * dz
    }
}

fn mass_tolerance(m1: f64, m2: f64) -> f64 {
    1e-10 * m1.abs().max(m2.abs()).max(1.0)
}

/// `int_0^M |X_1 - X_2| dz`, exact for piecewise-linear pseudo-inverses.
pub fn w1_quantile(p: &PseudoInverse, q: &PseudoInverse) -> Result<f64> {
    let (mp, mq) = (p.mass(), q.mass());
    if (mp - mq).abs() > mass_tolerance(mp, mq) {
        return Err(Error::MassMismatch { left: mp, right: mq });
    }
    let m = mp.min(mq);
    let mut z: Vec<f64> = p.z_knots().iter().chain(q.z_knots()).copied().filter(|&z| z < m).collect();
    z.push(m);
    z.sort_by(f64::total_cmp);
    z.dedup();
    let mut acc = 0.0;
    for w in z.windows(2) {
        let (z0, z1) = (w[0], w[1]);
        let a = p.eval(z0) - q.eval(z0);
        let b = p.eval_left(z1) - q.eval_left(z1);
        acc += abs_linear_integral(a, b, z1 - z0);
    }
    Ok(acc)
}

/// `int |F_1 - F_2| dx`, exact for piecewise-linear CDFs.
pub fn w1_cdf(d1: &PiecewiseConstantDensity, d2: &PiecewiseConstantDensity) -> Result<f64> {
    let (m1, m2) = (d1.mass(), d2.mass());
    if (m1 - m2).abs() > mass_tolerance(m1, m2) {
        return Err(Error::MassMismatch { left: m1, right: m2 });
    }
    let mut xs: Vec<f64> = d1.breaks().iter().chain(d2.breaks()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let f1 = cdf_at_sorted(d1, &xs);
    let f2 = cdf_at_sorted(d2, &xs);
    let mut acc = 0.0;
    for k in 0..xs.len() - 1 {
        acc += abs_linear_integral(f1[k] - f2[k], f1[k + 1] - f2[k + 1], xs[k + 1] - xs[k]);
    }
    Ok(acc)
}

// CDF at sorted points, one sweep.
fn cdf_at_sorted(d: &PiecewiseConstantDensity, xs: &[f64]) -> Vec<f64> {
    let b = d.breaks();
    let v = d.values();
    let mut out = Vec::with_capacity(xs.len());
    let mut j = 0;
    let mut below = 0.0;
    for &x in xs {
        while j < v.len() && b[j + 1] <= x {
            below += v[j] * (b[j + 1] - b[j]);
            j += 1;
        }
        let partial = if j < v.len() && x > b[j] { v[j] * (x - b[j]) } else { 0.0 };
        out.push(below + partial);
    }
    out
}

/// Both formulations of W1 between two densities of equal mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W1Forms {
    pub quantile: f64,
    pub cdf: f64,
}

pub fn w1_forms(d1: &PiecewiseConstantDensity, d2: &PiecewiseConstantDensity) -> Result<W1Forms> {
    let cdf = w1_cdf(d1, d2)?;
    let quantile = w1_quantile(&d1.pseudo_inverse()?, &d2.pseudo_inverse()?)?;
    Ok(W1Forms { quantile, cdf })
}

/// W1 through the pseudo-inverses, cross-checked against the CDF form to
/// `1e-10` (relative to `max(1, W1)`).
pub fn wasserstein1(d1: &PiecewiseConstantDensity, d2: &PiecewiseConstantDensity) -> Result<f64> {
    let f = w1_forms(d1, d2)?;
    if (f.quantile - f.cdf).abs() > 1e-10 * f.quantile.max(1.0) {
        return Err(Error::DualMismatch { quantile: f.quantile, cdf: f.cdf });
    }
    Ok(f.quantile)
}

/// W1 between the empirical densities of two particle states.
pub fn wasserstein1_states(a: &ParticleState, b: &ParticleState) -> Result<f64> {
    w1_quantile(&PseudoInverse::from_state(a), &PseudoInverse::from_state(b))
}

/// Exact `int_a^b |d - r| dx`.
pub fn l1_error(d: &PiecewiseConstantDensity, r: &PiecewiseConstantDensity, a: f64, b: f64) -> f64 {
    let mut xs: Vec<f64> = d
        .breaks()
        .iter()
        .chain(r.breaks())
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    xs.push(a);
    xs.push(b);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (d.value_at(mid) - r.value_at(mid)).abs() * (w[1] - w[0])
        })
        .sum()
}

/// `z_i = t R_i (x'_{i+1} - x'_i)` for every gap.
#[derive(Debug, Clone, PartialEq)]
pub struct OleinikDiagnostic {
    pub t: f64,
    pub z: Vec<f64>,
    pub max_z: f64,
    pub ell: f64,
}

impl OleinikDiagnostic {
    /// `max_z <= ell (1 + rel)`.
    pub fn holds(&self, rel: f64) -> bool {
        self.max_z <= self.ell * (1.0 + rel)
    }
}

pub fn oleinik<V: Velocity + ?Sized>(state: &ParticleState, model: &V) -> Result<OleinikDiagnostic> {
    let t = state.t();
    if t < 0.0 {
        return Err(Error::Domain { what: "time", value: t });
    }
    let ell = state.ell();
    let v = rhs(state, model)?;
    let z: Vec<f64> = if t == 0.0 {
        alloc::vec![0.0; state.num_gaps()]
    } else {
        state
            .gaps()
            .enumerate()
            .map(|(i, g)| t * (ell / g) * (v[i + 1] - v[i]))
            .collect()
    };
    let max_z = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(OleinikDiagnostic { t, z, max_z, ell })
}

/// Upper bound for the local variation of `v(rho)` on `[a, b]` at times `t >= delta`.
pub fn local_bv_bound<V: Velocity + ?Sized>(model: &V, r_sup: f64, a: f64, b: f64, delta: f64) -> f64 {
    2.0 * (model.v_max() - model.v(r_sup) + (b - a) / delta)
}

/// Lipschitz constant of `t -> rho(t)` in W1 for data bounded by `r_sup`
/// with total mass `mass`.
pub fn w1_lipschitz_constant<V: Velocity + ?Sized>(model: &V, r_sup: f64, mass: f64) -> f64 {
    let vmax = model.v_max();
    let vr = model.v(r_sup);
    (vmax.max(vr.abs()) + 2.0 * (vmax - vr)) * mass
}

// (1 - s^2)^3 on [-1, 1]
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - s * s;
    u * u * u
}

fn bump_deriv(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let u = 1.0 - s * s;
    -6.0 * s * u * u
}

// Antiderivative of `bump`, zero at s = -1.
fn bump_integral(s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let s5 = s3 * s2;
    let s7 = s5 * s2;
    s - s3 + 0.6 * s5 - s7 / 7.0 + 16.0 / 35.0
}

/// `sup |B'|` for `B(s) = (1 - s^2)^3`, attained at `s = 1/sqrt(5)`.
const BUMP_D1_SUP: f64 = 1.7173002067198384;
/// `sup |B''|`, attained at `s = 0`.
const BUMP_D2_SUP: f64 = 6.0;

/// Product test function
/// `phi(t, x) = B((t - t_center) / t_width) B((x - x_center) / x_width)`
/// with `B(s) = (1 - s^2)^3` on `[-1, 1]`; it is `C^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub t_center: f64,
    pub t_width: f64,
    pub x_center: f64,
    pub x_width: f64,
}

impl Bump {
    pub fn new(t_center: f64, t_width: f64, x_center: f64, x_width: f64) -> Result<Self> {
        if !(t_width > 0.0 && t_width.is_finite()) {
            return Err(Error::Domain { what: "bump time width", value: t_width });
        }
        if !(x_width > 0.0 && x_width.is_finite()) {
            return Err(Error::Domain { what: "bump space width", value: x_width });
        }
        if !(t_center - t_width >= 0.0) {
            return Err(Error::Support(format!(
                "time support [{}, {}] reaches negative times",
                t_center - t_width,
                t_center + t_width
            )));
        }
        if !x_center.is_finite() {
            return Err(Error::Domain { what: "bump center", value: x_center });
        }
        Ok(Bump { t_center, t_width, x_center, x_width })
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        bump((t - self.t_center) / self.t_width) * bump((x - self.x_center) / self.x_width)
    }

    pub fn time_support(&self) -> (f64, f64) {
        (self.t_center - self.t_width, self.t_center + self.t_width)
    }

    pub fn space_support(&self) -> (f64, f64) {
        (self.x_center - self.x_width, self.x_center + self.x_width)
    }

    /// Max of the sup norms of `phi` and its derivatives up to order two.
    pub fn c2_norm(&self) -> f64 {
        let (wt, wx) = (self.t_width, self.x_width);
        [
            1.0,
            BUMP_D1_SUP / wt,
            BUMP_D1_SUP / wx,
            BUMP_D2_SUP / (wt * wt),
            BUMP_D2_SUP / (wx * wx),
            BUMP_D1_SUP * BUMP_D1_SUP / (wt * wx),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Constant in the entropy-residual tolerance
/// `tol = C (dt^2 + ell) ||phi||_{C^2}`, where `dt` is the largest snapshot
/// spacing inside the time support of `phi`.
pub const ENTROPY_TOL_CONSTANT: f64 = 0.01;

/// Snapshot spacing allowed inside the time support, as a fraction of its width.
const MAX_SPACING_FRACTION: f64 = 1.0 / 20.0;

/// Value of the Kruzhkov functional
/// `int int |rho - k| phi_t + sign(rho - k) (f(rho) - f(k)) phi_x dx dt`
/// together with the tolerance it should be compared with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyResidualReport {
    pub k: f64,
    pub testfn: Bump,
    pub value: f64,
    pub tol: f64,
}

impl EntropyResidualReport {
    pub fn passes(&self) -> bool {
        self.value >= -self.tol
    }
}

/// Evaluates the Kruzhkov functional on the densities of a trajectory:
/// exact integration in `x` on each constant cell, trapezoid rule in `t`
/// over the snapshots.
pub fn entropy_residual<V: Velocity + ?Sized>(
    traj: &Trajectory,
    model: &V,
    k: f64,
    phi: &Bump,
) -> Result<EntropyResidualReport> {
    let times: Vec<f64> = traj.times().collect();
    let ell = traj.snapshots[0].ell();
    let (t0, t1) = phi.time_support();
    let densities: Vec<Option<PiecewiseConstantDensity>> = traj
        .snapshots
        .iter()
        .map(|s| (s.t() > t0 && s.t() < t1).then(|| PiecewiseConstantDensity::from_state(s)))
        .collect();
    entropy_functional(&times, |j| densities[j].as_ref(), model, k, phi, ell)
}

/// Same functional for an arbitrary sequence of densities sampled at `times`
/// (e.g. a reference solution); `ell` only enters the tolerance.
pub fn entropy_residual_profiles<V: Velocity + ?Sized>(
    times: &[f64],
    profiles: &[PiecewiseConstantDensity],
    model: &V,
    k: f64,
    phi: &Bump,
    ell: f64,
) -> Result<EntropyResidualReport> {
    if times.len() != profiles.len() {
        return Err(Error::InvalidInput(format!(
            "{} times for {} profiles",
            times.len(),
            profiles.len()
        )));
    }
    entropy_functional(times, |j| Some(&profiles[j]), model, k, phi, ell)
}

fn entropy_functional<'a, V: Velocity + ?Sized>(
    times: &[f64],
    density: impl Fn(usize) -> Option<&'a PiecewiseConstantDensity>,
    model: &V,
    k: f64,
    phi: &Bump,
    ell: f64,
) -> Result<EntropyResidualReport> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Domain { what: "entropy constant", value: k });
    }
    let (t0, t1) = phi.time_support();
    let (first, last) = (times[0], times[times.len() - 1]);
    if t0 < first || t1 > last {
        return Err(Error::Support(format!(
            "time support [{t0}, {t1}] not covered by snapshots on [{first}, {last}]"
        )));
    }
    let max_dt = MAX_SPACING_FRACTION * (t1 - t0);
    let mut dt: f64 = 0.0;
    for w in times.windows(2) {
        if w[1] > t0 && w[0] < t1 {
            dt = dt.max(w[1] - w[0]);
        }
    }
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Support(format!(
            "snapshot spacing {dt} exceeds {max_dt} inside the time support"
        )));
    }

    let fk = model.flux(k);
    let g = |j: usize| -> f64 {
        let t = times[j];
        if t <= t0 || t >= t1 {
            return 0.0;
        }
        match density(j) {
            Some(d) => space_integral(d, model, k, fk, phi, t),
            None => 0.0,
        }
    };
    let mut value = 0.0;
    let mut g_prev = g(0);
    for j in 1..times.len() {
        let g_cur = g(j);
        value += 0.5 * (g_prev + g_cur) * (times[j] - times[j - 1]);
        g_prev = g_cur;
    }
    let tol = ENTROPY_TOL_CONSTANT * (dt * dt + ell) * phi.c2_norm();
    Ok(EntropyResidualReport { k, testfn: *phi, value, tol })
}

fn space_integral<V: Velocity + ?Sized>(
    d: &PiecewiseConstantDensity,
    model: &V,
    k: f64,
    fk: f64,
    phi: &Bump,
    t: f64,
) -> f64 {
    let st = (t - phi.t_center) / phi.t_width;
    let bt = bump(st);
    let dbt = bump_deriv(st) / phi.t_width;
    let (xl, xr) = phi.space_support();
    let wx = phi.x_width;
    let s = |x: f64| (x - phi.x_center) / wx;

    let mut xs: Vec<f64> = Vec::with_capacity(d.breaks().len() + 2);
    xs.push(xl);
    xs.extend(d.breaks().iter().copied().filter(|&x| x > xl && x < xr));
    xs.push(xr);
    let mut acc = 0.0;
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rho = d.value_at(0.5 * (a + b));
        let diff = rho - k;
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let int_phi_t = dbt * wx * (bump_integral(s(b)) - bump_integral(s(a)));
        let int_phi_x = bt * (bump(s(b)) - bump(s(a)));
        acc += diff.abs() * int_phi_t + sign * (model.flux(rho) - fk) * int_phi_x;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::integrator::Tolerances;
    use crate::model::VelocityModel;
    use crate::quantile::{partition, InitialDatum, Mode};
    use alloc::vec;

    fn pcd(b: &[f64], v: &[f64]) -> PiecewiseConstantDensity {
        PiecewiseConstantDensity::new(b.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&pcd(&[0.0, 1.0], &[0.7]), true), 1.4);
        let d = pcd(&[-1.0, 0.0, 1.0], &[0.4, 0.8]);
        assert!((total_variation(&d, true) - 1.6).abs() < 1e-15);
        assert!((total_variation(&d, false) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn local_tv_examples() {
        let d = pcd(&[-1.0, 0.0, 1.0], &[0.4, 0.8]);
        assert_eq!(local_tv(&d, -0.9, -0.1), 0.0);
        assert!((local_tv(&d, -0.5, 0.5) - 0.4).abs() < 1e-15);
        assert_eq!(local_tv(&d, -1.0, 1.0), total_variation(&d, false));
        assert!((local_tv(&d, -2.0, 2.0) - 1.6).abs() < 1e-15);
        // v = 1 - rho: 1 -> 0.6 -> 0.2 -> 1
        let lv = local_tv_velocity(&d, &VelocityModel::Lwr, -2.0, 2.0);
        assert!((lv - 1.6).abs() < 1e-15);
    }

    #[test]
    fn w1_examples() {
        let u = pcd(&[0.0, 1.0], &[1.0]);
        assert_eq!(wasserstein1(&u, &u).unwrap(), 0.0);
        let shifted = pcd(&[0.3, 1.3], &[1.0]);
        assert!((wasserstein1(&u, &shifted).unwrap() - 0.3).abs() < 1e-15);
        let wide = pcd(&[0.0, 2.0], &[0.5]);
        assert!((wasserstein1(&u, &wide).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w1_rejects_unequal_mass() {
        let u = pcd(&[0.0, 1.0], &[1.0]);
        let v = pcd(&[0.0, 1.0], &[0.9]);
        assert!(matches!(wasserstein1(&u, &v), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn w1_with_vacuum_gap() {
        // Mass 1/2 moved from [0, 1] to [2, 3]: distance 2 for half the mass.
        let a = pcd(&[0.0, 1.0], &[1.0]);
        let b = PiecewiseConstantDensity::from_pieces(&[(0.0, 1.0, 0.5), (2.0, 3.0, 0.5)]).unwrap();
        let f = w1_forms(&a, &b).unwrap();
        assert!((f.quantile - 1.0).abs() < 1e-14, "{f:?}");
        assert!((f.cdf - 1.0).abs() < 1e-14, "{f:?}");
    }

    #[test]
    fn state_w1_matches_density_w1() {
        let a = ParticleState::new(0.0, vec![0.0, 0.3, 0.5, 1.2], 0.2, Mode::Anchored).unwrap();
        let b = ParticleState::new(0.0, vec![0.1, 0.2, 0.9, 1.0], 0.2, Mode::Anchored).unwrap();
        let ws = wasserstein1_states(&a, &b).unwrap();
        let wd = wasserstein1(&PiecewiseConstantDensity::from_state(&a), &PiecewiseConstantDensity::from_state(&b))
            .unwrap();
        assert!((ws - wd).abs() < 1e-14);
    }

    #[test]
    fn l1_examples() {
        let a = pcd(&[0.0, 1.0], &[1.0]);
        let b = pcd(&[0.0, 1.0], &[0.5]);
        assert_eq!(l1_error(&a, &a, -1.0, 2.0), 0.0);
        assert_eq!(l1_error(&a, &b, 0.0, 1.0), 0.5);
        assert_eq!(l1_error(&a, &b, 0.5, 3.0), 0.25);
    }

    #[test]
    fn oleinik_examples() {
        let s0 = partition(&InitialDatum::riemann_pair(), 12, Mode::Anchored).unwrap();
        let d0 = oleinik(&s0, &VelocityModel::Lwr).unwrap();
        assert!(d0.z.iter().all(|&z| z == 0.0));

        // leader gap with R = 1: z = t R (v_max - v(R)) = 0.01
        let s = ParticleState::new(0.01, vec![0.0, 0.1, 0.2], 0.1, Mode::Anchored).unwrap();
        let d = oleinik(&s, &VelocityModel::Lwr).unwrap();
        assert_eq!(d.z[0], 0.0);
        assert!((d.z[1] - 0.01).abs() < 1e-15);
        assert!(d.holds(1e-6));
    }

    #[test]
    fn bump_antiderivative() {
        assert_eq!(bump_integral(-1.0), 0.0);
        assert!((bump_integral(1.0) - 32.0 / 35.0).abs() < 1e-15);
        let h = 1e-6;
        for s in [-0.9, -0.3, 0.0, 0.4, 0.8] {
            let fd = (bump_integral(s + h) - bump_integral(s - h)) / (2.0 * h);
            assert!((fd - bump(s)).abs() < 1e-9);
            let fd = (bump(s + h) - bump(s - h)) / (2.0 * h);
            assert!((fd - bump_deriv(s)).abs() < 1e-9);
        }
        let s = 1.0 / libm::sqrt(5.0);
        assert!((bump_deriv(s).abs() - BUMP_D1_SUP).abs() < 1e-14);
    }

    #[test]
    fn bump_validation() {
        assert!(Bump::new(0.1, 0.2, 0.0, 1.0).is_err());
        assert!(Bump::new(0.3, 0.0, 0.0, 1.0).is_err());
        assert!(Bump::new(0.3, 0.2, 0.0, -1.0).is_err());
        let b = Bump::new(0.3, 0.2, 0.0, 0.25).unwrap();
        assert!((b.c2_norm() - 150.0).abs() < 1e-12);
    }

    fn two_step_run(n: usize, snaps: usize) -> Trajectory {
        let s = partition(&InitialDatum::riemann_pair(), n, Mode::Anchored).unwrap();
        let times: Vec<f64> = (1..snaps).map(|j| 0.5 * j as f64 / snaps as f64).collect();
        integrate(&s, &VelocityModel::Lwr, 0.5, &Tolerances::default(), &times).unwrap()
    }

    #[test]
    fn entropy_support_errors() {
        let tr = two_step_run(20, 10);
        let phi = Bump::new(0.4, 0.2, 0.0, 0.5).unwrap();
        assert!(matches!(entropy_residual(&tr, &VelocityModel::Lwr, 0.0, &phi), Err(Error::Support(_))));
        let phi = Bump::new(0.25, 0.2, 0.0, 0.5).unwrap();
        // spacing 0.05 > 0.4 / 20
        assert!(matches!(entropy_residual(&tr, &VelocityModel::Lwr, 0.0, &phi), Err(Error::Support(_))));
    }

    #[test]
    fn entropy_weak_form_is_small_and_shock_dissipates() {
        let tr = two_step_run(200, 100);
        let m = VelocityModel::Lwr;
        let phi = Bump::new(0.25, 0.2, 0.5, 0.6).unwrap();
        for k in [0.0, 1.0] {
            let r = entropy_residual(&tr, &m, k, &phi).unwrap();
            assert!(r.value.abs() <= r.tol, "{r:?}");
        }
        let at_shock = Bump::new(0.25, 0.2, -0.05, 0.25).unwrap();
        let r = entropy_residual(&tr, &m, 0.6, &at_shock).unwrap();
        assert!(r.value > r.tol, "{r:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_density() -> impl Strategy<Value = PiecewiseConstantDensity> {
            (proptest::collection::vec((0.01f64..1.0, 0.0f64..2.0), 1..12), -3.0f64..3.0).prop_map(
                |(cells, start)| {
                    let mut b = vec![start];
                    let mut v = Vec::new();
                    for (w, c) in cells {
                        b.push(b[b.len() - 1] + w);
                        v.push(c);
                    }
                    if v.iter().all(|&c| c == 0.0) {
                        v[0] = 1.0;
                    }
                    pcd(&b, &v)
                },
            )
        }

        fn rescale(d: &PiecewiseConstantDensity, mass: f64) -> PiecewiseConstantDensity {
            let f = mass / d.mass();
            pcd(d.breaks(), &d.values().iter().map(|v| v * f).collect::<Vec<_>>())
        }

        proptest! {
            #[test]
            fn dual_identity(a in arb_density(), b in arb_density()) {
                let b = rescale(&b, a.mass());
                let f = w1_forms(&a, &b).unwrap();
                prop_assert!((f.quantile - f.cdf).abs() <= 1e-10 * f.quantile.max(1.0), "{:?}", f);
            }

            #[test]
            fn w1_symmetric_and_translation(a in arb_density(), d in -2.0f64..2.0) {
                let shifted = pcd(&a.breaks().iter().map(|x| x + d).collect::<Vec<_>>(), a.values());
                let w = wasserstein1(&a, &shifted).unwrap();
                prop_assert!((w - d.abs() * a.mass()).abs() <= 1e-12 * (1.0 + w));
                prop_assert_eq!(w, wasserstein1(&shifted, &a).unwrap());
            }

            #[test]
            fn interior_tv_below_inclusive(a in arb_density()) {
                prop_assert!(total_variation(&a, false) <= total_variation(&a, true));
                let (lo, hi) = (a.breaks()[0] - 1.0, a.breaks()[a.num_cells()] + 1.0);
                prop_assert!((local_tv(&a, lo, hi) - total_variation(&a, true)).abs() < 1e-12);
            }

            #[test]
            fn l1_triangle(a in arb_density(), b in arb_density(), c in arb_density()) {
                let (lo, hi) = (-4.0, 10.0);
                let ab = l1_error(&a, &b, lo, hi);
                let bc = l1_error(&b, &c, lo, hi);
                let ac = l1_error(&a, &c, lo, hi);
                prop_assert!(ac <= ab + bc + 1e-12);
            }
        }
    }
}
