//! Piecewise-constant densities, their CDFs and pseudo-inverses.

use alloc::format;
use alloc::vec::Vec;

use crate::quantile::ParticleState;
use crate::{Error, Result};

/// Breakpoints closer than this fraction of the domain width are merged.
const MERGE_FRACTION: f64 = 1e-14;

/// A nonnegative step function: value `values[j]` on
/// `[breaks[j], breaks[j + 1])`, zero outside `[breaks[0], breaks[m])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantDensity {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantDensity {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints for {} cells",
                breaks.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("density needs at least one cell".into()));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("non-finite breakpoint".into()));
        }
        if let Some(&c) = values.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::Domain { what: "density value", value: c });
        }
        if let Some(k) = breaks.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(format!("breakpoints decrease at index {}", k + 1)));
        }
        let width = breaks[breaks.len() - 1] - breaks[0];
        let eps = MERGE_FRACTION * width;
        let mut out_b = Vec::with_capacity(breaks.len());
        let mut out_v = Vec::with_capacity(values.len());
        out_b.push(breaks[0]);
        for (j, &c) in values.iter().enumerate() {
            let right = breaks[j + 1];
            if right - out_b[out_b.len() - 1] <= eps {
                continue;
            }
            out_v.push(c);
            out_b.push(right);
        }
        if out_v.is_empty() {
            return Err(Error::InvalidInput("density has zero width".into()));
        }
        // A merged tail leaves the last cell ending short of the domain.
        let last = out_b.len() - 1;
        out_b[last] = breaks[breaks.len() - 1];
        Ok(PiecewiseConstantDensity { breaks: out_b, values: out_v })
    }

    /// Builds a density from `(left, right, value)` pieces. Pieces may come in
    /// any order; holes between them are filled with zero; overlaps are
    /// rejected.
    pub fn from_pieces(pieces: &[(f64, f64, f64)]) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidInput("no density pieces".into()));
        }
        let mut sorted: Vec<(f64, f64, f64)> = pieces.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lo = sorted[0].0;
        let hi = sorted.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let eps = MERGE_FRACTION * (hi - lo);
        let mut breaks = Vec::with_capacity(2 * sorted.len());
        let mut values = Vec::with_capacity(2 * sorted.len());
        breaks.push(lo);
        for (k, &(l, r, c)) in sorted.iter().enumerate() {
            if !(l.is_finite() && r.is_finite()) || r <= l {
                return Err(Error::InvalidInput(format!("piece {k} has empty or invalid extent [{l}, {r}]")));
            }
            let end = breaks[breaks.len() - 1];
            if l < end - eps {
                return Err(Error::InvalidInput(format!(
                    "piece [{l}, {r}] overlaps previous piece ending at {end}"
                )));
            }
            if l > end + eps {
                values.push(0.0);
                breaks.push(l);
            }
            values.push(c);
            breaks.push(r);
        }
        Self::new(breaks, values)
    }

    /// `rho^n(t, .)`: value `ell / (x_{i+1} - x_i)` on each gap.
    pub fn from_state(state: &ParticleState) -> Self {
        let x = state.positions();
        let ell = state.ell();
        let values = x.windows(2).map(|w| ell / (w[1] - w[0])).collect();
        PiecewiseConstantDensity { breaks: x.to_vec(), values }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// `(left, right, value)` for each cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breaks.windows(2).zip(self.values.iter()).map(|(w, &c)| (w[0], w[1], c))
    }

    pub fn mass(&self) -> f64 {
        self.cells().map(|(a, b, c)| c * (b - a)).sum()
    }

    /// Essential supremum.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest interval outside which the density vanishes, if any mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|&c| c > 0.0)?;
        let last = self.values.iter().rposition(|&c| c > 0.0)?;
        Some((self.breaks[first], self.breaks[last + 1]))
    }

    /// Right-continuous evaluation.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.breaks[0] || x >= self.breaks[self.breaks.len() - 1] {
            return 0.0;
        }
        let j = self.breaks.partition_point(|&b| b <= x) - 1;
        self.values[j]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, c) in self.cells() {
            if x <= a {
                break;
            }
            acc += c * (x.min(b) - a);
        }
        acc
    }

    /// Applies `g` to every cell value. The result may be any real step
    /// function; it is only meant for diagnostics such as `TV(v(rho))`.
    pub fn map_values(&self, g: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|&c| g(c)).collect(),
            background: g(0.0),
        }
    }

    pub fn as_step_function(&self) -> StepFunction {
        StepFunction { breaks: self.breaks.clone(), values: self.values.clone(), background: 0.0 }
    }

    pub fn pseudo_inverse(&self) -> Result<PseudoInverse> {
        pseudo_inverse(self)
    }
}

/// A real-valued step function with a constant background value outside
/// its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
    pub background: f64,
}

pub fn reconstruct(state: &ParticleState) -> PiecewiseConstantDensity {
    PiecewiseConstantDensity::from_state(state)
}

pub fn cdf(d: &PiecewiseConstantDensity, x: f64) -> f64 {
    d.cdf(x)
}

/// Generalized inverse `X(z) = inf { x : F(x) > z }` of a CDF, stored as a
/// non-decreasing polyline on `[0, M]`. A vacuum plateau of the CDF appears
/// as two knots with the same `z` (a vertical segment).
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverse {
    z: Vec<f64>,
    x: Vec<f64>,
}

impl PseudoInverse {
    /// Closed form for `rho^n`: knots `(i ell, x_i)`.
    pub fn from_state(state: &ParticleState) -> Self {
        let ell = state.ell();
        let z = (0..state.positions().len()).map(|i| i as f64 * ell).collect();
        PseudoInverse { z, x: state.positions().to_vec() }
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z.iter().copied().zip(self.x.iter().copied())
    }

    pub fn mass(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    /// Right-continuous value at `z`; clamped to the end knots outside `[0, M]`.
    pub fn eval(&self, z: f64) -> f64 {
        let k = self.z.partition_point(|&zk| zk <= z);
        self.on_segment(k, z)
    }

    /// Left limit `X(z-)`.
    pub fn eval_left(&self, z: f64) -> f64 {
        let k = self.z.partition_point(|&zk| zk < z);
        self.on_segment(k, z)
    }

    // `k` = number of knots strictly/weakly left of `z`.
    fn on_segment(&self, k: usize, z: f64) -> f64 {
        if k == 0 {
            return self.x[0];
        }
        let n = self.z.len();
        if k >= n {
            return self.x[n - 1];
        }
        let (z0, z1) = (self.z[k - 1], self.z[k]);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        if z1 == z0 {
            return x1;
        }
        x0 + (z - z0) * ((x1 - x0) / (z1 - z0))
    }

    pub(crate) fn z_knots(&self) -> &[f64] {
        &self.z
    }
}

pub fn pseudo_inverse(d: &PiecewiseConstantDensity) -> Result<PseudoInverse> {
    let (first, last) = match (
        d.values.iter().position(|&c| c > 0.0),
        d.values.iter().rposition(|&c| c > 0.0),
    ) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::ZeroMass),
    };
    let mut z = Vec::with_capacity(last - first + 2);
    let mut x = Vec::with_capacity(last - first + 2);
    z.push(0.0);
    x.push(d.breaks[first]);
    let mut acc = 0.0;
    for j in first..=last {
        acc += d.values[j] * (d.breaks[j + 1] - d.breaks[j]);
        z.push(acc);
        x.push(d.breaks[j + 1]);
    }
    Ok(PseudoInverse { z, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::Mode;
    use alloc::vec;

    fn two_step_datum() -> PiecewiseConstantDensity {
        PiecewiseConstantDensity::new(vec![-1.0, 0.0, 1.0], vec![0.4, 0.8]).unwrap()
    }

    #[test]
    fn reconstruct_uniform() {
        let s = ParticleState::new(0.0, vec![0.0, 0.5, 1.0], 0.5, Mode::Anchored).unwrap();
        let d = reconstruct(&s);
        assert_eq!(d.values(), &[1.0, 1.0]);
        assert_eq!(d.support(), Some((0.0, 1.0)));
        assert_eq!(d.mass(), 1.0);
    }

    #[test]
    fn reconstruct_uneven() {
        let s = ParticleState::new(0.0, vec![0.0, 0.25, 1.0], 0.5, Mode::Anchored).unwrap();
        let d = reconstruct(&s);
        assert!((d.values()[0] - 2.0).abs() < 1e-15);
        assert!((d.values()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cdf_values() {
        let u = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(u.cdf(0.5), 0.5);
        assert_eq!(u.cdf(-3.0), 0.0);
        assert_eq!(u.cdf(7.0), 1.0);
        let d = two_step_datum();
        assert!((d.cdf(0.0) - 0.4).abs() < 1e-15);
        assert!((d.cdf(1.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn pseudo_inverse_uniform() {
        let u = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let x = u.pseudo_inverse().unwrap();
        assert_eq!(x.eval(0.25), 0.25);
    }

    #[test]
    fn pseudo_inverse_jumps_over_vacuum() {
        let d = PiecewiseConstantDensity::from_pieces(&[(0.0, 1.0, 0.5), (2.0, 3.0, 0.5)]).unwrap();
        assert_eq!(d.num_cells(), 3);
        let x = d.pseudo_inverse().unwrap();
        assert_eq!(x.eval_left(0.5), 1.0);
        assert_eq!(x.eval(0.5), 2.0);
        assert!((x.eval(0.5 + 1e-9) - 2.0).abs() < 1e-8);
        assert!((x.eval(0.5 - 1e-9) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pseudo_inverse_of_zero_mass_fails() {
        let d = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(d.pseudo_inverse(), Err(Error::ZeroMass));
    }

    #[test]
    fn state_pseudo_inverse_matches_closed_form() {
        let x = vec![-1.0, -0.7, -0.2, 0.1, 0.15, 0.9];
        let ell = 0.3;
        let s = ParticleState::new(0.2, x.clone(), ell, Mode::Anchored).unwrap();
        let p = PseudoInverse::from_state(&s);
        let r: Vec<f64> = x.windows(2).map(|w| ell / (w[1] - w[0])).collect();
        for i in 0..5 {
            for frac in [0.0, 0.1, 0.5, 0.9] {
                let z = i as f64 * ell + frac * ell;
                let closed = x[i] + (z - i as f64 * ell) / r[i];
                assert!((p.eval(z) - closed).abs() < 1e-14);
            }
            assert_eq!(p.eval(i as f64 * ell), x[i]);
        }
        let q = pseudo_inverse(&reconstruct(&s)).unwrap();
        for i in 0..=5 {
            assert!((q.eval(i as f64 * ell) - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn from_pieces_rejects_overlap_and_negative() {
        assert!(PiecewiseConstantDensity::from_pieces(&[(0.0, 1.0, 1.0), (0.5, 2.0, 1.0)]).is_err());
        assert!(PiecewiseConstantDensity::from_pieces(&[(0.0, 1.0, -1.0)]).is_err());
        assert!(PiecewiseConstantDensity::from_pieces(&[(1.0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn tiny_cells_are_merged() {
        let d = PiecewiseConstantDensity::new(vec![0.0, 1e-16, 1.0, 2.0], vec![5.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.num_cells(), 2);
        assert_eq!(d.breaks(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn value_at_is_right_continuous() {
        let d = two_step_datum();
        assert_eq!(d.value_at(-1.0), 0.4);
        assert_eq!(d.value_at(0.0), 0.8);
        assert_eq!(d.value_at(1.0), 0.0);
        assert_eq!(d.value_at(-1.5), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_state() -> impl Strategy<Value = ParticleState> {
            (proptest::collection::vec(0.01f64..1.0, 3..30), -5.0f64..5.0, 0.01f64..2.0).prop_map(
                |(gaps, start, ell)| {
                    let mut x = vec![start];
                    for g in gaps {
                        let last = *x.last().unwrap();
                        x.push(last + g);
                    }
                    ParticleState::new(0.0, x, ell, Mode::Anchored).unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn round_trip_hits_particles(s in arb_state()) {
                let p = PseudoInverse::from_state(&s);
                for (i, &xi) in s.positions().iter().enumerate() {
                    prop_assert_eq!(p.eval(i as f64 * s.ell()), xi);
                }
                let q = pseudo_inverse(&reconstruct(&s)).unwrap();
                let scale = s.positions().iter().fold(1.0f64, |m, x| m.max(x.abs()));
                for (i, &xi) in s.positions().iter().enumerate() {
                    prop_assert!((q.eval(i as f64 * s.ell()) - xi).abs() <= 1e-12 * scale);
                }
            }

            #[test]
            fn cdf_inverts_pseudo_inverse(s in arb_state(), frac in 0.0f64..1.0) {
                let d = reconstruct(&s);
                let m = d.mass();
                prop_assert!((m - s.num_gaps() as f64 * s.ell()).abs() <= 1e-13 * m);
                let q = d.pseudo_inverse().unwrap();
                let z = frac * m;
                prop_assert!((d.cdf(q.eval(z)) - z).abs() <= 1e-12 * m.max(1.0));
            }
        }
    }
}
