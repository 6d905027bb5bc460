//! Equal-mass splitting of the initial datum and the particle state.

use alloc::format;
use alloc::vec::Vec;

use crate::density::PiecewiseConstantDensity;
use crate::{Error, Result};

/// How the two outermost particles are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `x_0` and `x_N` are reflections of their neighbours (recomputed, not
    /// integrated); the leader is `x_{N-1}`.
    Phantom,
    /// `x_0` and `x_N` start at the ends of the support; `x_N` is the leader.
    Anchored,
}

/// Positions `x_0 < ... < x_N` at time `t`, each gap carrying mass `ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    t: f64,
    x: Vec<f64>,
    ell: f64,
    mode: Mode,
}

impl ParticleState {
    pub fn new(t: f64, x: Vec<f64>, ell: f64, mode: Mode) -> Result<Self> {
        let min_gaps = match mode {
            Mode::Anchored => 2,
            Mode::Phantom => 3,
        };
        if x.len() < min_gaps + 1 {
            return Err(Error::InvalidInput(format!(
                "{mode:?} mode needs at least {min_gaps} gaps, got {} particles",
                x.len()
            )));
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::Domain { what: "ell", value: ell });
        }
        if !t.is_finite() {
            return Err(Error::Domain { what: "time", value: t });
        }
        check_ordering(&x)?;
        Ok(ParticleState { t, x, ell, mode })
    }

    pub(crate) fn from_parts_unchecked(t: f64, x: Vec<f64>, ell: f64, mode: Mode) -> Self {
        ParticleState { t, x, ell, mode }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of gaps `N`.
    pub fn num_gaps(&self) -> usize {
        self.x.len() - 1
    }

    pub fn mass(&self) -> f64 {
        self.num_gaps() as f64 * self.ell
    }

    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.x.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().fold(f64::INFINITY, f64::min)
    }

    /// Index of the gap directly behind the leader.
    pub fn leader_gap(&self) -> usize {
        match self.mode {
            Mode::Anchored => self.num_gaps() - 1,
            Mode::Phantom => self.num_gaps() - 2,
        }
    }

    /// Same state shifted by `d` in space.
    pub fn translated(&self, d: f64) -> Self {
        ParticleState { x: self.x.iter().map(|x| x + d).collect(), ..self.clone() }
    }
}

pub(crate) fn check_ordering(x: &[f64]) -> Result<()> {
    for (i, w) in x.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::Integrity { index: i, left: w[0], right: w[1] });
        }
    }
    Ok(())
}

/// A tabulated, piecewise-linear CDF: `F(x[k]) = cum[k]`, non-decreasing,
/// `cum[0] = 0`. Mass outside the table is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    x: Vec<f64>,
    cum: Vec<f64>,
}

impl CdfTable {
    pub fn new(x: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if x.len() != cum.len() || x.len() < 2 {
            return Err(Error::InvalidInput("CDF table needs two equal columns of length >= 2".into()));
        }
        if x.iter().chain(cum.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("CDF table has non-finite entries".into()));
        }
        if let Some(k) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!("CDF abscissae not increasing at row {}", k + 1)));
        }
        if let Some(k) = cum.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(format!("CDF decreases at row {}", k + 1)));
        }
        if cum[0] != 0.0 {
            return Err(Error::InvalidInput("CDF table must start at 0".into()));
        }
        Ok(CdfTable { x, cum })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let n = self.x.len();
        if y <= self.x[0] {
            return 0.0;
        }
        if y >= self.x[n - 1] {
            return self.cum[n - 1];
        }
        let k = self.x.partition_point(|&a| a <= y) - 1;
        let s = (y - self.x[k]) / (self.x[k + 1] - self.x[k]);
        self.cum[k] + s * (self.cum[k + 1] - self.cum[k])
    }

    pub fn mass(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    fn max_slope(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.cum.windows(2))
            .map(|(a, c)| (c[1] - c[0]) / (a[1] - a[0]))
            .fold(0.0, f64::max)
    }

    fn support(&self) -> Option<(f64, f64)> {
        let first = self.cum.windows(2).position(|c| c[1] > c[0])?;
        let last = self.cum.windows(2).rposition(|c| c[1] > c[0])?;
        Some((self.x[first], self.x[last + 1]))
    }

    /// `sup { y : F(y) < level }` by bisection to `tol` in position.
    fn quantile(&self, level: f64, tol: f64) -> f64 {
        let (mut lo, mut hi) = (self.x[0], self.x[self.x.len() - 1]);
        // invariant: F(lo) < level <= F(hi)
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Piecewise-constant density whose CDF is this table.
    pub fn to_density(&self) -> Result<PiecewiseConstantDensity> {
        let values = self
            .x
            .windows(2)
            .zip(self.cum.windows(2))
            .map(|(a, c)| (c[1] - c[0]) / (a[1] - a[0]))
            .collect();
        PiecewiseConstantDensity::new(self.x.clone(), values)
    }
}

/// Where the initial mass is described.
#[derive(Debug, Clone, PartialEq)]
pub enum DatumProfile {
    Density(PiecewiseConstantDensity),
    Cdf(CdfTable),
}

/// A nonnegative, integrable, bounded initial datum.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    profile: DatumProfile,
    mass: f64,
    sup: f64,
    support: (f64, f64),
}

impl InitialDatum {
    pub fn from_density(density: PiecewiseConstantDensity) -> Result<Self> {
        let mass = density.mass();
        let support = density.support().ok_or(Error::ZeroMass)?;
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let sup = density.sup();
        Ok(InitialDatum { profile: DatumProfile::Density(density), mass, sup, support })
    }

    pub fn from_cdf(table: CdfTable) -> Result<Self> {
        let mass = table.mass();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        let support = table.support().ok_or(Error::ZeroMass)?;
        let sup = table.max_slope();
        Ok(InitialDatum { profile: DatumProfile::Cdf(table), mass, sup, support })
    }

    /// The datum used for the L1 convergence table:
    /// 0.4 on [-1, 0], 0.8 on (0, 1], zero elsewhere.
    pub fn riemann_pair() -> Self {
        let d = PiecewiseConstantDensity::new(alloc::vec![-1.0, 0.0, 1.0], alloc::vec![0.4, 0.8])
            .expect("static datum");
        Self::from_density(d).expect("static datum")
    }

    pub fn profile(&self) -> &DatumProfile {
        &self.profile
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `R`, the essential supremum of the datum.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.profile {
            DatumProfile::Density(d) => d.cdf(x),
            DatumProfile::Cdf(t) => t.eval(x),
        }
    }

    /// Piecewise-constant view of the datum.
    pub fn density(&self) -> Result<PiecewiseConstantDensity> {
        match &self.profile {
            DatumProfile::Density(d) => Ok(d.clone()),
            DatumProfile::Cdf(t) => t.to_density(),
        }
    }

    /// `sup { x : F(x) < level }`, the left end of any plateau at `level`.
    fn quantile(&self, level: f64) -> f64 {
        match &self.profile {
            DatumProfile::Density(d) => density_quantile(d, level),
            DatumProfile::Cdf(t) => {
                let width = self.support.1 - self.support.0;
                t.quantile(level, 1e-12 * width)
            }
        }
    }
}

fn density_quantile(d: &PiecewiseConstantDensity, level: f64) -> f64 {
    let mut acc = 0.0;
    let mut last_end = d.breaks()[0];
    for (a, b, c) in d.cells() {
        if c <= 0.0 {
            continue;
        }
        let m = c * (b - a);
        if acc + m >= level {
            let x = a + (level - acc) / c;
            return x.clamp(a, b);
        }
        acc += m;
        last_end = b;
    }
    last_end
}

/// Places `N + 1` particles so that every gap carries mass `ell = M / N`.
pub fn partition(datum: &InitialDatum, n: usize, mode: Mode) -> Result<ParticleState> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("N must be at least 3, got {n}")));
    }
    let mass = datum.mass();
    let ell = mass / n as f64;
    if let DatumProfile::Cdf(_) = datum.profile {
        let resolution = 64.0 * f64::EPSILON * mass;
        if ell <= resolution {
            return Err(Error::TooFine { ell, resolution });
        }
    }
    let mut x = Vec::with_capacity(n + 1);
    let (lo, hi) = datum.support();
    x.push(lo);
    for i in 1..n {
        x.push(datum.quantile(mass * i as f64 / n as f64));
    }
    x.push(hi);
    if mode == Mode::Phantom {
        x[0] = 2.0 * x[1] - x[2];
        x[n] = 2.0 * x[n - 1] - x[n - 2];
    }
    if let Err(Error::Integrity { index, .. }) = check_ordering(&x) {
        return Err(Error::TooFine { ell, resolution: datum.cdf(x[index + 1]) - datum.cdf(x[index]) });
    }
    Ok(ParticleState { t: 0.0, x, ell, mode })
}
