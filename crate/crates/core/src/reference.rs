//! Exact solutions for piecewise-constant data under a strictly concave
//! flux: the Riemann solver and a front-tracking evolution.
//!
//! Rarefaction fans are tracked as fans of small jumps (at most
//! `delta_rho` each) moving with their Rankine–Hugoniot speeds, so the
//! tracked solution conserves mass exactly. When a profile is requested,
//! every fan that has not interacted yet is replaced by its exact
//! continuous profile.

use alloc::format;
use alloc::vec::Vec;

use crate::density::PiecewiseConstantDensity;
use crate::model::{check_concave, Velocity};
use crate::{Error, Result};

/// Grid size used to validate concavity of the flux.
const CONCAVITY_GRID: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveKind {
    Shock { speed: f64 },
    /// Fan between the characteristic speeds `s_l = f'(rho_l) < s_r = f'(rho_r)`.
    Rarefaction { s_l: f64, s_r: f64 },
    /// `rho_l == rho_r`.
    Trivial,
}

/// Self-similar solution of one Riemann problem centred at `origin = (t0, x0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub kind: WaveKind,
    pub left: f64,
    pub right: f64,
    pub origin: (f64, f64),
}

impl Wave {
    /// Right-continuous value at `(t, x)`.
    pub fn value_at<V: Velocity + ?Sized>(&self, model: &V, t: f64, x: f64) -> f64 {
        let (t0, x0) = self.origin;
        let tau = t - t0;
        if tau <= 0.0 {
            return if x < x0 { self.left } else { self.right };
        }
        let xi = (x - x0) / tau;
        match self.kind {
            WaveKind::Trivial => self.left,
            WaveKind::Shock { speed } => {
                if xi < speed {
                    self.left
                } else {
                    self.right
                }
            }
            WaveKind::Rarefaction { s_l, s_r } => {
                if xi < s_l {
                    self.left
                } else if xi >= s_r {
                    self.right
                } else {
                    model.dflux_inverse(xi, self.right, self.left)
                }
            }
        }
    }
}

fn rh_speed<V: Velocity + ?Sized>(model: &V, l: f64, r: f64) -> f64 {
    (model.flux(r) - model.flux(l)) / (r - l)
}

fn check_state(what: &'static str, rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value: rho })
    }
}

/// Entropy solution of the Riemann problem `(rho_l, rho_r)` at the origin.
pub fn solve_riemann<V: Velocity + ?Sized>(rho_l: f64, rho_r: f64, model: &V) -> Result<Wave> {
    check_state("left state", rho_l)?;
    check_state("right state", rho_r)?;
    check_concave(model, rho_l.max(rho_r), CONCAVITY_GRID)?;
    Ok(riemann_unchecked(rho_l, rho_r, model, (0.0, 0.0)))
}

fn riemann_unchecked<V: Velocity + ?Sized>(l: f64, r: f64, model: &V, origin: (f64, f64)) -> Wave {
    let kind = if l == r {
        WaveKind::Trivial
    } else if l < r {
        WaveKind::Shock { speed: rh_speed(model, l, r) }
    } else {
        WaveKind::Rarefaction { s_l: model.dflux(l), s_r: model.dflux(r) }
    };
    Wave { kind, left: l, right: r, origin }
}

/// One straight front segment between its birth and death.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Front {
    t0: f64,
    x0: f64,
    speed: f64,
    left: f64,
    right: f64,
    death: f64,
    fan: Option<usize>,
}

impl Front {
    fn position(&self, t: f64) -> f64 {
        libm::fma(self.speed, t - self.t0, self.x0)
    }

    fn alive_at(&self, t: f64) -> bool {
        self.t0 <= t && t < self.death
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Fan {
    t0: f64,
    x0: f64,
    left: f64,
    right: f64,
    first: usize,
    last: usize,
}

/// Configures and runs front tracking.
#[derive(Debug, Clone)]
pub struct FrontTracker<V> {
    model: V,
    delta_rho: f64,
    far_left: f64,
    far_right: f64,
    max_interactions: usize,
}

impl<V: Velocity + Clone> FrontTracker<V> {
    pub fn new(model: V) -> Self {
        FrontTracker { model, delta_rho: 1e-3, far_left: 0.0, far_right: 0.0, max_interactions: 1_000_000 }
    }

    /// Largest jump inside a discretized fan.
    pub fn delta_rho(mut self, delta_rho: f64) -> Self {
        self.delta_rho = delta_rho;
        self
    }

    /// State outside the datum's breakpoints (default 0) on both sides.
    pub fn background(self, rho: f64) -> Self {
        self.far_field(rho, rho)
    }

    pub fn far_field(mut self, left: f64, right: f64) -> Self {
        self.far_left = left;
        self.far_right = right;
        self
    }

    pub fn max_interactions(mut self, n: usize) -> Self {
        self.max_interactions = n;
        self
    }

    /// Evolves `datum` from `t = 0` up to `t_end`.
    pub fn solve(&self, datum: &PiecewiseConstantDensity, t_end: f64) -> Result<FrontSolution<V>> {
        if !(self.delta_rho > 0.0 && self.delta_rho.is_finite()) {
            return Err(Error::Domain { what: "delta_rho", value: self.delta_rho });
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Domain { what: "t_end", value: t_end });
        }
        check_state("left far field", self.far_left)?;
        check_state("right far field", self.far_right)?;
        let rho_max = datum.sup().max(self.far_left).max(self.far_right);
        check_concave(&self.model, rho_max, CONCAVITY_GRID)?;

        let mut sol = FrontSolution {
            model: self.model.clone(),
            fronts: Vec::new(),
            fans: Vec::new(),
            far_left: self.far_left,
            t_end,
            interactions: 0,
        };
        let mut active = Vec::new();
        let b = datum.breaks();
        let v = datum.values();
        for (j, &x) in b.iter().enumerate() {
            let l = if j == 0 { self.far_left } else { v[j - 1] };
            let r = if j == v.len() { self.far_right } else { v[j] };
            sol.emit(l, r, 0.0, x, self.delta_rho, &mut active);
        }
        sol.track(&mut active, self.delta_rho, self.max_interactions)?;
        Ok(sol)
    }
}

/// Shorthand for `FrontTracker::new(model).delta_rho(delta_rho).solve(datum, t_end)`.
pub fn front_track<V: Velocity + Clone>(
    datum: &PiecewiseConstantDensity,
    t_end: f64,
    model: V,
    delta_rho: f64,
) -> Result<FrontSolution<V>> {
    FrontTracker::new(model).delta_rho(delta_rho).solve(datum, t_end)
}

/// A front alive at some time, as seen by [`FrontSolution::fronts_at`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontView {
    pub x: f64,
    pub speed: f64,
    pub left: f64,
    pub right: f64,
    /// Part of a discretized rarefaction fan.
    pub in_fan: bool,
}

/// Result of front tracking on `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct FrontSolution<V> {
    model: V,
    fronts: Vec<Front>,
    fans: Vec<Fan>,
    far_left: f64,
    t_end: f64,
    interactions: usize,
}

impl<V: Velocity + Clone> FrontSolution<V> {
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of collision events processed.
    pub fn interactions(&self) -> usize {
        self.interactions
    }

    fn emit(&mut self, l: f64, r: f64, t: f64, x: f64, delta_rho: f64, active: &mut Vec<usize>) {
        if l == r {
            return;
        }
        let front = |speed, left, right, fan| Front { t0: t, x0: x, speed, left, right, death: f64::INFINITY, fan };
        if l < r {
            active.push(self.fronts.len());
            self.fronts.push(front(rh_speed(&self.model, l, r), l, r, None));
            return;
        }
        let k = libm::ceil((l - r) / delta_rho).max(1.0) as usize;
        let id = self.fans.len();
        let first = self.fronts.len();
        let mut prev = l;
        for j in 1..=k {
            let next = if j == k { r } else { l - (l - r) * j as f64 / k as f64 };
            active.push(self.fronts.len());
            self.fronts.push(front(rh_speed(&self.model, prev, next), prev, next, Some(id)));
            prev = next;
        }
        self.fans.push(Fan { t0: t, x0: x, left: l, right: r, first, last: self.fronts.len() - 1 });
    }

    fn collision_time(&self, a: usize, b: usize, t_now: f64) -> f64 {
        let (fa, fb) = (&self.fronts[a], &self.fronts[b]);
        if fa.speed <= fb.speed {
            return f64::INFINITY;
        }
        let gap = (fb.position(t_now) - fa.position(t_now)).max(0.0);
        t_now + gap / (fa.speed - fb.speed)
    }

    fn track(&mut self, active: &mut Vec<usize>, delta_rho: f64, max_interactions: usize) -> Result<()> {
        let mut t_now = 0.0;
        let mut times: Vec<f64> = Vec::new();
        loop {
            times.clear();
            times.extend(active.windows(2).map(|w| self.collision_time(w[0], w[1], t_now)));
            let t_hit = times.iter().copied().fold(f64::INFINITY, f64::min);
            if !(t_hit <= self.t_end) {
                return Ok(());
            }
            let eps = 1e-12 * t_hit.abs().max(1.0);
            let mut next = Vec::with_capacity(active.len());
            let mut k = 0;
            while k < active.len() {
                // Run of consecutive fronts meeting at t_hit.
                let mut end = k;
                while end < times.len() && times[end] <= t_hit + eps {
                    end += 1;
                }
                if end == k {
                    next.push(active[k]);
                    k += 1;
                    continue;
                }
                self.interactions += 1;
                if self.interactions > max_interactions {
                    return Err(Error::InteractionLimit(max_interactions));
                }
                let members = &active[k..=end];
                let x_hit = members.iter().map(|&i| self.fronts[i].position(t_hit)).sum::<f64>()
                    / members.len() as f64;
                let l = self.fronts[members[0]].left;
                let r = self.fronts[members[members.len() - 1]].right;
                for &i in members {
                    self.fronts[i].death = t_hit;
                }
                self.emit(l, r, t_hit, x_hit, delta_rho, &mut next);
                k = end + 1;
            }
            *active = next;
            t_now = t_hit;
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.t_end {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, t_min: 0.0, t_max: self.t_end })
        }
    }

    /// Fronts alive at `t`, left to right.
    pub fn fronts_at(&self, t: f64) -> Result<Vec<FrontView>> {
        self.check_time(t)?;
        Ok(self.alive_sorted(t).into_iter().map(|(i, x)| {
            let f = &self.fronts[i];
            FrontView { x, speed: f.speed, left: f.left, right: f.right, in_fan: f.fan.is_some() }
        }).collect())
    }

    fn alive_sorted(&self, t: f64) -> Vec<(usize, f64)> {
        let mut alive: Vec<(usize, f64)> = self
            .fronts
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive_at(t))
            .map(|(i, f)| (i, f.position(t)))
            .collect();
        alive.sort_by(|a, b| {
            a.1.total_cmp(&b.1).then(self.fronts[a.0].speed.total_cmp(&self.fronts[b.0].speed))
        });
        alive
    }

    /// Solution at time `t`, with exact profiles for undisturbed fans.
    pub fn profile(&self, t: f64) -> Result<ReferenceProfile<V>> {
        self.check_time(t)?;
        let alive = self.alive_sorted(t);
        let mut pieces = Vec::with_capacity(alive.len() + 2);
        let mut left_edge = f64::NEG_INFINITY;
        let mut state = self.far_left;
        let mut k = 0;
        while k < alive.len() {
            let (i, x) = alive[k];
            if let Some(exact) = self.exact_fan(&alive, k, t) {
                let fan = &self.fans[self.fronts[i].fan.unwrap_or(0)];
                push_constant(&mut pieces, left_edge, exact.0, state);
                pieces.push(Piece::Fan {
                    left: exact.0,
                    right: exact.1,
                    t0: fan.t0,
                    x0: fan.x0,
                    rho_left: fan.left,
                    rho_right: fan.right,
                });
                left_edge = exact.1;
                state = fan.right;
                k += fan.last - fan.first + 1;
                continue;
            }
            push_constant(&mut pieces, left_edge, x, state);
            left_edge = x;
            state = self.fronts[i].right;
            k += 1;
        }
        push_constant(&mut pieces, left_edge, f64::INFINITY, state);
        Ok(ReferenceProfile { t, pieces, model: self.model.clone() })
    }

    // Exact edges of the fan starting at alive[k], if it can be substituted.
    fn exact_fan(&self, alive: &[(usize, f64)], k: usize, t: f64) -> Option<(f64, f64)> {
        let id = self.fronts[alive[k].0].fan?;
        let fan = &self.fans[id];
        let count = fan.last - fan.first + 1;
        if t <= fan.t0 || alive[k].0 != fan.first || k + count > alive.len() {
            return None;
        }
        if (0..count).any(|j| alive[k + j].0 != fan.first + j) {
            return None;
        }
        let tau = t - fan.t0;
        let lo = fan.x0 + self.model.dflux(fan.left) * tau;
        let hi = fan.x0 + self.model.dflux(fan.right) * tau;
        let left_bound = if k == 0 { f64::NEG_INFINITY } else { alive[k - 1].1 };
        let right_bound = alive.get(k + count).map_or(f64::INFINITY, |a| a.1);
        (lo >= left_bound && hi <= right_bound).then_some((lo, hi))
    }

    /// Pointwise value at `(t, x)`.
    pub fn sample(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.profile(t)?.value_at(x))
    }
}

fn push_constant(pieces: &mut Vec<Piece>, left: f64, right: f64, value: f64) {
    if right > left {
        pieces.push(Piece::Constant { left, right, value });
    }
}

/// One piece of a [`ReferenceProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Constant { left: f64, right: f64, value: f64 },
    /// Centred rarefaction from `(t0, x0)` between `rho_left > rho_right`.
    Fan { left: f64, right: f64, t0: f64, x0: f64, rho_left: f64, rho_right: f64 },
}

impl Piece {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Piece::Constant { left, right, .. } | Piece::Fan { left, right, .. } => (left, right),
        }
    }
}

/// Solution at a fixed time: consecutive pieces covering the real line.
#[derive(Debug, Clone)]
pub struct ReferenceProfile<V> {
    t: f64,
    pieces: Vec<Piece>,
    model: V,
}

impl<V: Velocity> ReferenceProfile<V> {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn piece_at(&self, x: f64) -> &Piece {
        let k = self.pieces.partition_point(|p| p.bounds().1 <= x);
        &self.pieces[k.min(self.pieces.len() - 1)]
    }

    fn fan_value(&self, x: f64, t0: f64, x0: f64, hi: f64, lo: f64) -> f64 {
        self.model.dflux_inverse((x - x0) / (self.t - t0), lo, hi)
    }

    /// Right-continuous value at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        match *self.piece_at(x) {
            Piece::Constant { value, .. } => value,
            Piece::Fan { t0, x0, rho_left, rho_right, .. } => self.fan_value(x, t0, x0, rho_left, rho_right),
        }
    }

    // int_p^q rho dx inside a fan, from x = x0 + tau f'(rho):
    // int rho dx = tau [rho f'(rho) - f(rho)].
    fn fan_integral(&self, p: f64, q: f64, t0: f64, x0: f64, hi: f64, lo: f64) -> f64 {
        let tau = self.t - t0;
        let g = |x: f64| {
            let xi = (x - x0) / tau;
            let rho = self.model.dflux_inverse(xi, lo, hi);
            rho * self.model.dflux(rho) - self.model.flux(rho)
        };
        tau * (g(q) - g(p))
    }

    /// `int_a^b rho dx`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for piece in &self.pieces {
            let (l, r) = piece.bounds();
            let (p, q) = (l.max(a), r.min(b));
            if !(q > p) {
                continue;
            }
            acc += match *piece {
                Piece::Constant { value, .. } => value * (q - p),
                Piece::Fan { t0, x0, rho_left, rho_right, .. } => {
                    self.fan_integral(p, q, t0, x0, rho_left, rho_right)
                }
            };
        }
        acc
    }

    /// Total mass; infinite unless both far fields vanish.
    pub fn mass(&self) -> f64 {
        let first = self.pieces[0];
        let last = self.pieces[self.pieces.len() - 1];
        for p in [first, last] {
            if let Piece::Constant { value, .. } = p {
                if value != 0.0 {
                    return f64::INFINITY;
                }
            }
        }
        let lo = first.bounds().1;
        let hi = last.bounds().0;
        if hi > lo {
            self.integral(lo, hi)
        } else {
            0.0
        }
    }

    /// Exact `int_a^b |rho - d| dx`.
    pub fn l1_distance(&self, d: &PiecewiseConstantDensity, a: f64, b: f64) -> f64 {
        let mut xs: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| {
                let (l, r) = p.bounds();
                [l, r]
            })
            .chain(d.breaks().iter().copied())
            .filter(|&x| x > a && x < b)
            .collect();
        xs.push(a);
        xs.push(b);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut acc = 0.0;
        for w in xs.windows(2) {
            let (p, q) = (w[0], w[1]);
            let mid = 0.5 * (p + q);
            let c = d.value_at(mid);
            acc += match *self.piece_at(mid) {
                Piece::Constant { value, .. } => (value - c).abs() * (q - p),
                Piece::Fan { t0, x0, rho_left, rho_right, .. } => {
                    let cross = x0 + self.model.dflux(c) * (self.t - t0);
                    let part = |u: f64, v: f64| {
                        (self.fan_integral(u, v, t0, x0, rho_left, rho_right) - c * (v - u)).abs()
                    };
                    if cross > p && cross < q {
                        part(p, cross) + part(cross, q)
                    } else {
                        part(p, q)
                    }
                }
            };
        }
        acc
    }

    /// Piecewise-constant version on the finite pieces: fans become cells of
    /// width at most `fan_cell_width` carrying their exact averages.
    pub fn to_density(&self, fan_cell_width: f64) -> Result<PiecewiseConstantDensity> {
        if !(fan_cell_width > 0.0) {
            return Err(Error::Domain { what: "fan cell width", value: fan_cell_width });
        }
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        for piece in &self.pieces {
            let (l, r) = piece.bounds();
            if !(l.is_finite() && r.is_finite()) || r <= l {
                continue;
            }
            if breaks.is_empty() {
                breaks.push(l);
            }
            match *piece {
                Piece::Constant { value, .. } => {
                    values.push(value);
                    breaks.push(r);
                }
                Piece::Fan { t0, x0, rho_left, rho_right, .. } => {
                    let m = libm::ceil((r - l) / fan_cell_width).max(1.0) as usize;
                    let mut prev = l;
                    for j in 1..=m {
                        let next = if j == m { r } else { l + (r - l) * j as f64 / m as f64 };
                        let avg = self.fan_integral(prev, next, t0, x0, rho_left, rho_right) / (next - prev);
                        values.push(avg.max(0.0));
                        breaks.push(next);
                        prev = next;
                    }
                }
            }
        }
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("profile at t = {} has no finite pieces", self.t)));
        }
        PiecewiseConstantDensity::new(breaks, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VelocityModel;
    use alloc::vec;

    fn two_step_datum() -> PiecewiseConstantDensity {
        PiecewiseConstantDensity::new(vec![-1.0, 0.0, 1.0], vec![0.4, 0.8]).unwrap()
    }

    #[test]
    fn riemann_examples() {
        let m = VelocityModel::Lwr;
        let w = solve_riemann(0.0, 0.4, &m).unwrap();
        assert!(matches!(w.kind, WaveKind::Shock { speed } if (speed - 0.6).abs() < 1e-12));
        let w = solve_riemann(0.4, 0.8, &m).unwrap();
        assert!(matches!(w.kind, WaveKind::Shock { speed } if (speed + 0.2).abs() < 1e-12));
        let w = solve_riemann(0.8, 0.0, &m).unwrap();
        match w.kind {
            WaveKind::Rarefaction { s_l, s_r } => {
                assert!((s_l + 0.6).abs() < 1e-12 && (s_r - 1.0).abs() < 1e-12);
            }
            k => panic!("{k:?}"),
        }
        assert!((w.value_at(&m, 1.0, 0.2) - 0.4).abs() < 1e-15);
        assert_eq!(solve_riemann(0.3, 0.3, &m).unwrap().kind, WaveKind::Trivial);
    }

    #[test]
    fn riemann_rejects_nonconcave() {
        let u = VelocityModel::underwood(1.0).unwrap();
        assert!(matches!(solve_riemann(0.5, 3.0, &u), Err(Error::NonConcaveFlux { .. })));
        assert!(solve_riemann(0.5, 1.5, &u).is_ok());
        assert!(solve_riemann(-0.1, 0.5, &VelocityModel::Lwr).is_err());
    }

    #[test]
    fn two_step_datum_at_half() {
        let sol = front_track(&two_step_datum(), 0.5, VelocityModel::Lwr, 1e-3).unwrap();
        assert_eq!(sol.interactions(), 0);
        let p = sol.profile(0.5).unwrap();
        let pieces = p.pieces();
        assert_eq!(pieces.len(), 5, "{pieces:?}");
        let b: Vec<(f64, f64)> = pieces.iter().map(|p| p.bounds()).collect();
        assert!((b[0].1 + 0.7).abs() < 1e-12);
        assert!((b[1].1 + 0.1).abs() < 1e-12);
        assert!((b[2].1 - 0.7).abs() < 1e-12);
        assert!((b[3].1 - 1.5).abs() < 1e-12);
        assert!(matches!(pieces[3], Piece::Fan { .. }));
        assert_eq!(sol.sample(0.5, -0.9).unwrap(), 0.0);
        assert_eq!(sol.sample(0.5, -0.4).unwrap(), 0.4);
        assert!((sol.sample(0.5, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((p.mass() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn sample_outside_range() {
        let sol = front_track(&two_step_datum(), 0.5, VelocityModel::Lwr, 1e-3).unwrap();
        assert!(matches!(sol.sample(0.6, 0.0), Err(Error::TimeOutOfRange { .. })));
        assert!(sol.sample(-0.1, 0.0).is_err());
        assert_eq!(sol.sample(0.0, -0.5).unwrap(), 0.4);
    }

    #[test]
    fn constant_state_has_no_waves() {
        let d = PiecewiseConstantDensity::new(vec![-1.0, 1.0], vec![0.3]).unwrap();
        let sol = FrontTracker::new(VelocityModel::Lwr).background(0.3).solve(&d, 2.0).unwrap();
        assert!(sol.fronts_at(2.0).unwrap().is_empty());
        assert_eq!(sol.sample(2.0, 17.0).unwrap(), 0.3);
        assert_eq!(sol.profile(1.0).unwrap().pieces().len(), 1);
    }

    #[test]
    fn single_riemann_matches_solver() {
        let m = VelocityModel::generalized_lwr(1.0, 2.0).unwrap();
        for (l, r) in [(0.2, 0.7), (0.9, 0.1)] {
            let d = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![r]).unwrap();
            let sol = FrontTracker::new(m.clone()).far_field(l, r).solve(&d, 1.0).unwrap();
            let mut w = solve_riemann(l, r, &m).unwrap();
            w.origin = (0.0, 0.0);
            for k in 0..=40 {
                let x = -1.5 + 3.0 * k as f64 / 40.0;
                let a = sol.sample(1.0, x).unwrap();
                let b = w.value_at(&m, 1.0, x);
                assert!((a - b).abs() < 1e-12, "{l} {r} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn self_similar() {
        let m = VelocityModel::Lwr;
        let d = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![0.1]).unwrap();
        let sol = FrontTracker::new(m).far_field(0.9, 0.1).solve(&d, 2.0).unwrap();
        for (t, xi) in [(0.3, -0.5), (1.7, 0.2), (0.9, 0.75), (2.0, -0.79)] {
            let a = sol.sample(t, xi * t).unwrap();
            let b = sol.sample(t / 2.0, xi * t / 2.0).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shock_swallows_fan() {
        // 0.8 on [0, 1]: the fan's tail reaches the shock at t = 1.25; after
        // that the shock sits at 1 + t - sqrt(3.2 t).
        let m = VelocityModel::Lwr;
        let d = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![0.8]).unwrap();
        let t = 3.0;
        let sol = front_track(&d, t, m.clone(), 1e-3).unwrap();
        assert!(sol.interactions() > 100);
        let p = sol.profile(t).unwrap();
        assert!((p.mass() - 0.8).abs() < 1e-12, "{}", p.mass());
        for f in sol.fronts_at(t).unwrap() {
            if !f.in_fan {
                assert!(f.left < f.right);
                assert!((f.speed - (m.flux(f.right) - m.flux(f.left)) / (f.right - f.left)).abs() < 1e-12);
            }
        }
        let xs = 1.0 + t - libm::sqrt(3.2 * t);
        let exact = |x: f64| if x < xs || x > 1.0 + t { 0.0 } else { 0.5 * (1.0 - (x - 1.0) / t) };
        let n = 4000;
        let mut err = 0.0;
        for k in 0..n {
            let x = -1.0 + 6.0 * (k as f64 + 0.5) / n as f64;
            err += (p.value_at(x) - exact(x)).abs() * 6.0 / n as f64;
        }
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn mass_conserved_with_interactions() {
        let m = VelocityModel::generalized_lwr(1.0, 2.0).unwrap();
        let d = PiecewiseConstantDensity::new(
            vec![-2.0, -1.5, -0.5, 0.0, 0.3, 1.0, 2.0],
            vec![0.9, 0.1, 0.6, 0.2, 1.0, 0.3],
        )
        .unwrap();
        let sol = front_track(&d, 4.0, m, 1e-2).unwrap();
        assert!(sol.interactions() > 0);
        for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let p = sol.profile(t).unwrap();
            assert!((p.mass() - d.mass()).abs() < 1e-8, "t={t}: {}", p.mass());
            let dens = p.to_density(1e-3).unwrap();
            assert!((dens.mass() - d.mass()).abs() < 1e-8);
        }
    }

    #[test]
    fn refinement_is_first_order() {
        let m = VelocityModel::Lwr;
        let d = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![0.8]).unwrap();
        let t = 3.0;
        let coarse = front_track(&d, t, m.clone(), 4e-3).unwrap().profile(t).unwrap();
        let fine = front_track(&d, t, m, 2e-3).unwrap().profile(t).unwrap();
        let fine_d = fine.to_density(1e-4).unwrap();
        let diff = coarse.l1_distance(&fine_d, -1.0, 5.0);
        assert!(diff < 4e-3, "{diff}");
    }

    #[test]
    fn l1_distance_exact_in_fan() {
        let sol = front_track(&two_step_datum(), 0.5, VelocityModel::Lwr, 1e-3).unwrap();
        let p = sol.profile(0.5).unwrap();
        // fan 0.8 -> 0 on [0.7, 1.5] against the constant 0.4: two triangles
        // of height 0.4 and width 0.4
        let c = PiecewiseConstantDensity::new(vec![0.7, 1.5], vec![0.4]).unwrap();
        assert!((p.l1_distance(&c, 0.7, 1.5) - 0.16).abs() < 1e-14);
        let dens = p.to_density(0.01).unwrap();
        assert!((dens.mass() - 1.2).abs() < 1e-13);
        assert!(p.l1_distance(&dens, -2.0, 2.0) < 0.01 * 0.8 / 2.0);
    }

    #[test]
    fn interaction_guard() {
        let d = PiecewiseConstantDensity::new(vec![0.0, 1.0], vec![0.8]).unwrap();
        let r = FrontTracker::new(VelocityModel::Lwr).max_interactions(10).solve(&d, 3.0);
        assert_eq!(r.err(), Some(Error::InteractionLimit(10)));
    }
}
