//! Outward-rounded interval arithmetic and axis-aligned boxes.
//!
//! Every abstract transformer and the validated integrator are built on the
//! operations in this module, so each one must return an interval that
//! contains the exact real image of its inputs. Native `f64` operations are
//! checked for exactness (via error-free transformations); inexact results
//! are nudged one ulp outward in the offending direction. Results of libm
//! functions (`sin`, `cos`, `atan2`) are widened by two ulps since those are
//! faithfully rounded at best.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IntervalError {
    #[error("sqrt of an interval with negative lower bound")]
    SqrtDomain,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Bracket of the real pi: `PI_LO <= pi <= PI_HI` (the f64 constant rounds
/// the true value down).
pub const PI_LO: f64 = std::f64::consts::PI;
pub const PI_HI: f64 = std::f64::consts::PI.next_up();
const TWO_PI: f64 = std::f64::consts::TAU;

// ---------------------------------------------------------------------------
// directed-rounding scalar helpers
// ---------------------------------------------------------------------------

/// `a + b` rounded toward `-inf` (`up = false`) or `+inf` (`up = true`).
///
/// The 2Sum error term tells us the exact rounding direction, so exact sums
/// stay exact and inexact ones move a single ulp.
fn ro_add(a: f64, b: f64, up: bool) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let aa = s - bb;
    let err = (a - aa) + (b - bb);
    nudge(s, err, up)
}

fn ro_sub(a: f64, b: f64, up: bool) -> f64 {
    ro_add(a, -b, up)
}

fn ro_mul(a: f64, b: f64, up: bool) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if p != 0.0 && p.is_subnormal() {
        // exact-residual detection needs no underflow; give up on exactness
        return if up { p.next_up() } else { p.next_down() };
    }
    let err = a.mul_add(b, -p);
    nudge(p, err, up)
}

fn ro_div(a: f64, b: f64, up: bool) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    if q != 0.0 && q.is_subnormal() {
        return if up { q.next_up() } else { q.next_down() };
    }
    // residual q*b - a is exactly representable; true - q has the opposite
    // sign of residual/b
    let e = b.mul_add(q, -a);
    if e == 0.0 {
        return q;
    }
    let true_above = (e < 0.0) == (b > 0.0);
    match (true_above, up) {
        (true, true) => q.next_up(),
        (false, false) => q.next_down(),
        _ => q,
    }
}

fn ro_sqrt(a: f64, up: bool) -> f64 {
    let s = a.sqrt();
    let e = s.mul_add(s, -a);
    if e == 0.0 {
        return s;
    }
    let true_above = e < 0.0; // s^2 < a  =>  true sqrt above s
    match (true_above, up) {
        (true, true) => s.next_up(),
        (false, false) => s.next_down(),
        _ => s,
    }
}

/// Move `v` one ulp in the requested direction when the rounding error `err`
/// indicates the true value lies beyond it.
fn nudge(v: f64, err: f64, up: bool) -> f64 {
    if err == 0.0 {
        v
    } else if up {
        if err > 0.0 { v.next_up() } else { v }
    } else if err < 0.0 {
        v.next_down()
    } else {
        v
    }
}

/// Two-ulp outward widening for libm results.
fn libm_lo(v: f64) -> f64 {
    v.next_down().next_down()
}

fn libm_hi(v: f64) -> f64 {
    v.next_up().next_up()
}

// ---------------------------------------------------------------------------
// Interval
// ---------------------------------------------------------------------------

/// A closed, nonempty real interval `[lo, hi]`.
///
/// Emptiness is never encoded as an inverted pair; operations that can
/// produce an empty set (intersection) return `Option<Interval>` instead.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "interval bound is NaN");
        assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval::new(v, v)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        // midpoint without overflow for sane magnitudes
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Smallest magnitude attained on the interval.
    pub fn min_abs(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: ro_add(self.lo, other.lo, false),
            hi: ro_add(self.hi, other.hi, true),
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        Interval {
            lo: ro_sub(self.lo, other.hi, false),
            hi: ro_sub(self.hi, other.lo, true),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let combos = [
            (self.lo, other.lo),
            (self.lo, other.hi),
            (self.hi, other.lo),
            (self.hi, other.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in combos {
            lo = lo.min(ro_mul(a, b, false));
            hi = hi.max(ro_mul(a, b, true));
        }
        Interval { lo, hi }
    }

    /// Multiply by a scalar constant.
    pub fn scale(&self, k: f64) -> Interval {
        if k >= 0.0 {
            Interval {
                lo: ro_mul(self.lo, k, false),
                hi: ro_mul(self.hi, k, true),
            }
        } else {
            Interval {
                lo: ro_mul(self.hi, k, false),
                hi: ro_mul(self.lo, k, true),
            }
        }
    }

    /// Divide by a nonzero scalar constant.
    pub fn div_scalar(&self, k: f64) -> Interval {
        assert!(k != 0.0, "division by zero scalar");
        if k > 0.0 {
            Interval {
                lo: ro_div(self.lo, k, false),
                hi: ro_div(self.hi, k, true),
            }
        } else {
            Interval {
                lo: ro_div(self.hi, k, false),
                hi: ro_div(self.lo, k, true),
            }
        }
    }

    /// Tight square: always a subset of `self.mul(self)` around zero.
    pub fn sqr(&self) -> Interval {
        let m = self.min_abs();
        let big = self.max_abs();
        Interval {
            lo: ro_mul(m, m, false),
            hi: ro_mul(big, big, true),
        }
    }

    pub fn sqrt(&self) -> Result<Interval, IntervalError> {
        if self.lo < 0.0 {
            return Err(IntervalError::SqrtDomain);
        }
        Ok(Interval {
            lo: ro_sqrt(self.lo, false),
            hi: ro_sqrt(self.hi, true),
        })
    }

    pub fn sin(&self) -> Interval {
        if self.lo == 0.0 && self.hi == 0.0 {
            return Interval::point(0.0);
        }
        trig_range(
            self,
            f64::sin,
            std::f64::consts::FRAC_PI_2,
            -std::f64::consts::FRAC_PI_2,
        )
    }

    pub fn cos(&self) -> Interval {
        trig_range(self, f64::cos, 0.0, std::f64::consts::PI)
    }

    /// Widen by `delta` on both sides (test/heuristic helper, outward-safe).
    pub fn inflate(&self, delta: f64) -> Interval {
        assert!(delta >= 0.0);
        Interval {
            lo: ro_sub(self.lo, delta, false),
            hi: ro_add(self.hi, delta, true),
        }
    }
}

/// Shared body of the interval sine/cosine: endpoint evaluation plus a
/// conservative test for interior extrema at `max_at + 2k*pi` / `min_at + 2k*pi`.
fn trig_range(x: &Interval, f: fn(f64) -> f64, max_at: f64, min_at: f64) -> Interval {
    const LIMIT: f64 = 1e15; // beyond this the critical-point search is meaningless
    if x.max_abs() > LIMIT || x.width() >= TWO_PI {
        return Interval::new(-1.0, 1.0);
    }
    // sin(0) and cos(0) are exact, everything else gets libm slack
    let bounds = |v: f64| -> (f64, f64) {
        let fv = f(v);
        if v == 0.0 {
            (fv, fv)
        } else {
            (libm_lo(fv), libm_hi(fv))
        }
    };
    let (lo1, hi1) = bounds(x.lo);
    let (lo2, hi2) = bounds(x.hi);
    let mut lo = lo1.min(lo2);
    let mut hi = hi1.max(hi2);
    if may_contain_shifted(x, max_at) {
        hi = 1.0;
    }
    if may_contain_shifted(x, min_at) {
        lo = -1.0;
    }
    Interval {
        lo: lo.max(-1.0),
        hi: hi.min(1.0),
    }
}

/// Could `c + 2k*pi` lie in `x` for some integer `k`? Errs on the side of yes.
fn may_contain_shifted(x: &Interval, c: f64) -> bool {
    let slack = 1e-9 + x.max_abs() * 4.0 * f64::EPSILON;
    let k_min = ((x.lo - c - slack) / TWO_PI).ceil();
    let k_max = ((x.hi - c + slack) / TWO_PI).floor();
    k_min <= k_max
}

/// Interval `atan2(y, x)`: encloses the angle of every point of the box
/// `x × y`. Boxes containing the origin or crossing the half-line
/// `{x < 0, y = 0}` yield the full range.
pub fn atan2(y: &Interval, x: &Interval) -> Interval {
    if x.contains(0.0) && y.contains(0.0) {
        return Interval::new(-PI_HI, PI_HI);
    }
    if x.lo < 0.0 && y.contains(0.0) {
        return Interval::new(-PI_HI, PI_HI);
    }
    if y.lo == 0.0 && y.hi == 0.0 && x.lo > 0.0 {
        return Interval::point(0.0);
    }
    // off the cut and away from the origin the extrema sit at box corners
    let corners = [(y.lo, x.lo), (y.lo, x.hi), (y.hi, x.lo), (y.hi, x.hi)];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (yy, xx) in corners {
        let v = yy.atan2(xx);
        // atan2(+-0, positive) is exactly +-0
        let (vl, vh) = if yy == 0.0 && xx > 0.0 {
            (0.0, 0.0)
        } else {
            (libm_lo(v), libm_hi(v))
        };
        lo = lo.min(vl);
        hi = hi.max(vh);
    }
    Interval {
        lo: lo.max(-PI_HI),
        hi: hi.min(PI_HI),
    }
}

// ---------------------------------------------------------------------------
// IntervalBox
// ---------------------------------------------------------------------------

/// An axis-aligned box: the cartesian product of `dim` intervals.
#[derive(Clone, PartialEq)]
pub struct IntervalBox {
    dims: Vec<Interval>,
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.dims.iter()).finish()
    }
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Self {
        IntervalBox { dims }
    }

    pub fn from_point(p: &[f64]) -> Self {
        IntervalBox {
            dims: p.iter().map(|&v| Interval::point(v)).collect(),
        }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Self {
        IntervalBox {
            dims: bounds
                .iter()
                .map(|&(lo, hi)| Interval::new(lo, hi))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn get(&self, i: usize) -> &Interval {
        &self.dims[i]
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    fn check_dim(&self, other: &IntervalBox) -> Result<(), IntervalError> {
        if self.dim() != other.dim() {
            Err(IntervalError::DimensionMismatch(self.dim(), other.dim()))
        } else {
            Ok(())
        }
    }

    /// Componentwise smallest box containing both operands.
    pub fn hull(&self, other: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        self.check_dim(other)?;
        Ok(IntervalBox {
            dims: self
                .dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| a.hull(b))
                .collect(),
        })
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.dim() == p.len() && self.dims.iter().zip(p).all(|(iv, &v)| iv.contains(v))
    }

    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.contains_interval(b))
    }

    pub fn intersects(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && self
                .dims
                .iter()
                .zip(&other.dims)
                .all(|(a, b)| a.intersects(b))
    }

    pub fn intersect(&self, other: &IntervalBox) -> Option<IntervalBox> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut dims = Vec::with_capacity(self.dim());
        for (a, b) in self.dims.iter().zip(&other.dims) {
            dims.push(a.intersect(b)?);
        }
        Some(IntervalBox { dims })
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.dims.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::center).collect()
    }

    /// Split one dimension at its midpoint. The two halves union back to the
    /// exact original box.
    pub fn bisect(&self, dim: usize) -> (IntervalBox, IntervalBox) {
        assert!(dim < self.dim(), "bisect dimension out of range");
        let iv = self.dims[dim];
        let mid = iv.center().clamp(iv.lo(), iv.hi());
        let mut left = self.clone();
        let mut right = self.clone();
        left.dims[dim] = Interval::new(iv.lo(), mid);
        right.dims[dim] = Interval::new(mid, iv.hi());
        (left, right)
    }

    pub fn add(&self, other: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        self.check_dim(other)?;
        Ok(IntervalBox {
            dims: self
                .dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    /// Componentwise multiplication by one interval (e.g. a time range).
    pub fn scale_interval(&self, k: &Interval) -> IntervalBox {
        IntervalBox {
            dims: self.dims.iter().map(|d| d.mul(k)).collect(),
        }
    }

    /// Lower bound on `sum_i v_i^2` over the selected dimensions; rounded
    /// down so comparisons against squared radii stay conservative.
    pub fn min_sq_norm_lower(&self, dims: &[usize]) -> f64 {
        let mut acc = 0.0;
        for &d in dims {
            let m = self.dims[d].min_abs();
            acc = ro_add(acc, ro_mul(m, m, false), false);
        }
        acc
    }
}
