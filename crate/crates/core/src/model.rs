//! Velocity laws and the flux `f(rho) = rho v(rho)`.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A velocity map `v: R+ -> R`.
///
/// Everything downstream (dynamics, diagnostics, the reference solver) is
/// generic over this trait so tests can plug in ad-hoc laws.
pub trait Velocity {
    fn v(&self, rho: f64) -> f64;

    fn dv(&self, rho: f64) -> f64;

    fn v_max(&self) -> f64 {
        self.v(0.0)
    }

    fn flux(&self, rho: f64) -> f64 {
        rho * self.v(rho)
    }

    fn dflux(&self, rho: f64) -> f64 {
        self.v(rho) + rho * self.dv(rho)
    }

    /// Solves `f'(rho) = speed` for `rho` in `[lo, hi]`, assuming `f'` is
    /// strictly decreasing there. Falls back to the nearer end when `speed`
    /// is out of range.
    fn dflux_inverse(&self, speed: f64, lo: f64, hi: f64) -> f64 {
        bisect_dflux_inverse(self, speed, lo, hi)
    }
}

impl<V: Velocity + ?Sized> Velocity for &V {
    fn v(&self, rho: f64) -> f64 {
        (**self).v(rho)
    }
    fn dv(&self, rho: f64) -> f64 {
        (**self).dv(rho)
    }
    fn v_max(&self) -> f64 {
        (**self).v_max()
    }
    fn flux(&self, rho: f64) -> f64 {
        (**self).flux(rho)
    }
    fn dflux(&self, rho: f64) -> f64 {
        (**self).dflux(rho)
    }
    fn dflux_inverse(&self, speed: f64, lo: f64, hi: f64) -> f64 {
        (**self).dflux_inverse(speed, lo, hi)
    }
}

/// The built-in velocity laws.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityModel {
    /// `v(rho) = 1 - rho`.
    Lwr,
    /// `v(rho) = v_max (1 - rho^gamma)`, `gamma >= 1`.
    GeneralizedLwr { v_max: f64, gamma: f64 },
    /// `v(rho) = v_max exp(-rho)`. Satisfies (V1) but not (V2) beyond `rho = 1`.
    Underwood { v_max: f64 },
    /// Monotone cubic interpolation of a `(rho, v)` table.
    Tabulated(MonotoneTable),
}

impl VelocityModel {
    pub fn generalized_lwr(v_max: f64, gamma: f64) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::Domain { what: "v_max", value: v_max });
        }
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(Error::Domain { what: "gamma", value: gamma });
        }
        Ok(VelocityModel::GeneralizedLwr { v_max, gamma })
    }

    pub fn underwood(v_max: f64) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::Domain { what: "v_max", value: v_max });
        }
        Ok(VelocityModel::Underwood { v_max })
    }

    pub fn tabulated(rho: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        MonotoneTable::new(rho, v).map(VelocityModel::Tabulated)
    }
}

impl Velocity for VelocityModel {
    fn v(&self, rho: f64) -> f64 {
        match self {
            VelocityModel::Lwr => 1.0 - rho,
            VelocityModel::GeneralizedLwr { v_max, gamma } => v_max * (1.0 - libm::pow(rho, *gamma)),
            VelocityModel::Underwood { v_max } => v_max * libm::exp(-rho),
            VelocityModel::Tabulated(table) => table.eval(rho).0,
        }
    }

    fn dv(&self, rho: f64) -> f64 {
        match self {
            VelocityModel::Lwr => -1.0,
            VelocityModel::GeneralizedLwr { v_max, gamma } => {
                -v_max * gamma * libm::pow(rho, gamma - 1.0)
            }
            VelocityModel::Underwood { v_max } => -v_max * libm::exp(-rho),
            VelocityModel::Tabulated(table) => table.eval(rho).1,
        }
    }

    fn v_max(&self) -> f64 {
        match self {
            VelocityModel::Lwr => 1.0,
            VelocityModel::GeneralizedLwr { v_max, .. } | VelocityModel::Underwood { v_max } => {
                *v_max
            }
            VelocityModel::Tabulated(table) => table.v[0],
        }
    }

    fn dflux(&self, rho: f64) -> f64 {
        match self {
            VelocityModel::Lwr => 1.0 - 2.0 * rho,
            _ => self.v(rho) + rho * self.dv(rho),
        }
    }

    fn dflux_inverse(&self, speed: f64, lo: f64, hi: f64) -> f64 {
        let rho = match self {
            VelocityModel::Lwr => 0.5 * (1.0 - speed),
            VelocityModel::GeneralizedLwr { v_max, gamma } => {
                let base = (1.0 - speed / v_max) / (gamma + 1.0);
                if base <= 0.0 {
                    0.0
                } else {
                    libm::pow(base, 1.0 / gamma)
                }
            }
            _ => {
                return bisect_dflux_inverse(self, speed, lo, hi);
            }
        };
        rho.clamp(lo, hi)
    }
}

fn bisect_dflux_inverse<V: Velocity + ?Sized>(model: &V, speed: f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    if model.dflux(a) <= speed {
        return a;
    }
    if model.dflux(b) >= speed {
        return b;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if model.dflux(mid) > speed {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Monotone piecewise-cubic (Fritsch–Carlson / PCHIP) interpolant of a
/// velocity table. The derivative is the analytic derivative of the
/// interpolant. Beyond the last node the interpolant continues linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    rho: Vec<f64>,
    v: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneTable {
    /// `rho` must start at 0 and be strictly increasing; at least two nodes.
    pub fn new(rho: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if rho.len() != v.len() {
            return Err(Error::InvalidInput(format!(
                "table columns differ in length ({} vs {})",
                rho.len(),
                v.len()
            )));
        }
        if rho.len() < 2 {
            return Err(Error::InvalidInput("velocity table needs at least two rows".into()));
        }
        if rho.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("velocity table has non-finite entries".into()));
        }
        if rho[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "velocity table must start at rho = 0 (got {})",
                rho[0]
            )));
        }
        if let Some(k) = rho.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "rho column not strictly increasing at row {}",
                k + 1
            )));
        }
        if v[0] <= 0.0 {
            return Err(Error::Domain { what: "v_max", value: v[0] });
        }
        let slope = pchip_slopes(&rho, &v);
        Ok(MonotoneTable { rho, v, slope })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rho.iter().copied().zip(self.v.iter().copied())
    }

    /// Value and derivative of the interpolant at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.rho.len();
        if x <= self.rho[0] {
            let d = self.slope[0];
            return (self.v[0] + d * (x - self.rho[0]), d);
        }
        if x >= self.rho[n - 1] {
            let d = self.slope[n - 1];
            return (self.v[n - 1] + d * (x - self.rho[n - 1]), d);
        }
        let k = self.rho.partition_point(|&r| r <= x) - 1;
        let h = self.rho[k + 1] - self.rho[k];
        let s = (x - self.rho[k]) / h;
        let (y0, y1) = (self.v[k], self.v[k + 1]);
        let (d0, d1) = (self.slope[k], self.slope[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        let deriv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        (value, deriv)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return alloc::vec![delta[0], delta[0]];
    }
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

// Shape-preserving three-point end condition.
fn pchip_end(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Flux and its derivative at one density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxEval {
    pub rho: f64,
    pub f: f64,
    pub df: f64,
}

pub fn flux<V: Velocity + ?Sized>(model: &V, rho: f64) -> Result<FluxEval> {
    if !rho.is_finite() || rho < 0.0 {
        return Err(Error::Domain { what: "density", value: rho });
    }
    Ok(FluxEval { rho, f: rho * model.v(rho), df: model.dflux(rho) })
}

/// Outcome of sampling (V1) and (V2) on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub v1_ok: bool,
    pub v2_ok: bool,
    /// Largest observed violation over both checks (0 when both hold).
    pub worst_violation: f64,
}

const V2_SLACK: f64 = 1e-12;

/// Samples `v'` and `rho v'(rho)` on `grid_size` uniform points of
/// `[0, rho_max]`. (V1) is checked at every sample with `rho > 0`; (V2) on
/// consecutive samples with slack `1e-12`.
pub fn validate_assumptions<V: Velocity + ?Sized>(
    model: &V,
    rho_max: f64,
    grid_size: usize,
) -> AssumptionReport {
    let grid_size = grid_size.max(2);
    let step = rho_max / (grid_size - 1) as f64;
    let mut worst: f64 = 0.0;
    let mut v1_ok = true;
    let mut v2_ok = true;
    let mut prev = 0.0 * model.dv(0.0);
    for k in 1..grid_size {
        let rho = step * k as f64;
        let dv = model.dv(rho);
        if !(dv < 0.0) {
            v1_ok = false;
            worst = worst.max(if dv.is_nan() { f64::INFINITY } else { dv });
        }
        let g = rho * dv;
        if g > prev + V2_SLACK || g.is_nan() {
            v2_ok = false;
            worst = worst.max(if g.is_nan() { f64::INFINITY } else { g - prev });
        }
        prev = g;
    }
    AssumptionReport { v1_ok, v2_ok, worst_violation: worst }
}

/// Whether `f'` is strictly decreasing on a uniform grid over `[0, rho_max]`.
/// Returns the first offending density on failure.
pub fn check_concave<V: Velocity + ?Sized>(model: &V, rho_max: f64, grid_size: usize) -> Result<()> {
    if rho_max <= 0.0 {
        return Ok(());
    }
    let grid_size = grid_size.max(2);
    let step = rho_max / (grid_size - 1) as f64;
    let mut prev = model.dflux(0.0);
    for k in 1..grid_size {
        let rho = step * k as f64;
        let cur = model.dflux(rho);
        if !(cur < prev) {
            return Err(Error::NonConcaveFlux { rho });
        }
        prev = cur;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lwr_flux_values() {
        let m = VelocityModel::Lwr;
        let f0 = flux(&m, 0.0).unwrap();
        assert_eq!((f0.f, f0.df), (0.0, 1.0));
        assert!((flux(&m, 0.4).unwrap().f - 0.24).abs() < 1e-15);
        let f8 = flux(&m, 0.8).unwrap();
        assert!((f8.f - 0.16).abs() < 1e-15);
        assert!((f8.df + 0.6).abs() < 1e-15);
    }

    #[test]
    fn flux_rejects_bad_density() {
        let m = VelocityModel::Lwr;
        assert!(flux(&m, -0.1).is_err());
        assert!(flux(&m, f64::NAN).is_err());
        assert!(flux(&m, f64::INFINITY).is_err());
    }

    #[test]
    fn lwr_satisfies_both_assumptions() {
        let r = validate_assumptions(&VelocityModel::Lwr, 1.0, 101);
        assert!(r.v1_ok && r.v2_ok);
        assert_eq!(r.worst_violation, 0.0);
    }

    #[test]
    fn increasing_table_fails_v1() {
        let m = VelocityModel::tabulated(vec![0.0, 0.5, 1.0], vec![0.5, 0.7, 1.0]).unwrap();
        let r = validate_assumptions(&m, 1.0, 50);
        assert!(!r.v1_ok);
        assert!(r.worst_violation > 0.0);
    }

    #[test]
    fn underwood_fails_v2_past_one() {
        // rho e^{-rho} peaks at rho = 1, so -rho e^{-rho} turns upward there.
        let m = VelocityModel::underwood(1.0).unwrap();
        let r = validate_assumptions(&m, 3.0, 301);
        assert!(r.v1_ok);
        assert!(!r.v2_ok);
        let below = validate_assumptions(&m, 0.9, 91);
        assert!(below.v2_ok);
    }

    #[test]
    fn generalized_lwr_checks() {
        let m = VelocityModel::generalized_lwr(1.0, 2.0).unwrap();
        let r = validate_assumptions(&m, 1.0, 200);
        assert!(r.v1_ok && r.v2_ok);
        assert!(VelocityModel::generalized_lwr(1.0, 0.5).is_err());
        assert!(VelocityModel::generalized_lwr(0.0, 2.0).is_err());
        assert!(check_concave(&m, 1.0, 64).is_ok());
    }

    #[test]
    fn concavity_check_flags_underwood_beyond_two() {
        let m = VelocityModel::underwood(1.0).unwrap();
        assert!(check_concave(&m, 1.9, 64).is_ok());
        assert!(matches!(check_concave(&m, 3.0, 64), Err(Error::NonConcaveFlux { .. })));
    }

    #[test]
    fn table_reproduces_linear_data() {
        let rho = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let v: Vec<f64> = rho.iter().map(|r| 1.0 - r).collect();
        let m = VelocityModel::tabulated(rho, v).unwrap();
        for k in 0..=40 {
            let r = k as f64 / 40.0;
            assert!((m.v(r) - (1.0 - r)).abs() < 1e-14);
            assert!((m.dv(r) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_derivative_matches_difference_quotient() {
        let m = VelocityModel::tabulated(
            vec![0.0, 0.2, 0.5, 0.7, 1.0],
            vec![1.0, 0.9, 0.5, 0.2, 0.0],
        )
        .unwrap();
        let h = 1e-6;
        for k in 1..99 {
            let r = k as f64 / 100.0;
            let fd = (m.v(r + h) - m.v(r - h)) / (2.0 * h);
            assert!((fd - m.dv(r)).abs() < 1e-5, "rho={r}: {fd} vs {}", m.dv(r));
        }
        let rep = validate_assumptions(&m, 1.0, 500);
        assert!(rep.v1_ok);
    }

    #[test]
    fn table_validation() {
        assert!(VelocityModel::tabulated(vec![0.1, 1.0], vec![1.0, 0.0]).is_err());
        assert!(VelocityModel::tabulated(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(VelocityModel::tabulated(vec![0.0], vec![1.0]).is_err());
        assert!(VelocityModel::tabulated(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn closed_form_dflux_inverse() {
        let lwr = VelocityModel::Lwr;
        assert_eq!(lwr.dflux_inverse(0.0, 0.0, 1.0), 0.5);
        let g = VelocityModel::generalized_lwr(1.0, 2.0).unwrap();
        for s in [-0.5, 0.0, 0.3, 0.9] {
            let rho = g.dflux_inverse(s, 0.0, 1.0);
            assert!((g.dflux(rho) - s).abs() < 1e-12);
        }
        let u = VelocityModel::underwood(1.0).unwrap();
        let rho = u.dflux_inverse(0.2, 0.0, 1.5);
        assert!((u.dflux(rho) - 0.2).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn strictly_decreasing_on_v1_models(a in 1e-6f64..1.0, b in 1e-6f64..1.0, gamma in 1.0f64..4.0) {
                prop_assume!((a - b).abs() > 1e-9);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                for m in [VelocityModel::Lwr, VelocityModel::generalized_lwr(1.3, gamma).unwrap()] {
                    prop_assert!(m.v(lo) > m.v(hi));
                }
            }

            #[test]
            fn flux_is_rho_times_v(rho in 0.0f64..5.0) {
                for m in [VelocityModel::Lwr, VelocityModel::underwood(2.0).unwrap()] {
                    let fe = flux(&m, rho).unwrap();
                    prop_assert_eq!(fe.f - rho * m.v(rho), 0.0);
                }
            }

            #[test]
            fn lwr_dflux(rho in 0.0f64..1.0) {
                let fe = flux(&VelocityModel::Lwr, rho).unwrap();
                prop_assert!((fe.df - (1.0 - 2.0 * rho)).abs() < 1e-14);
            }
        }
    }
}
