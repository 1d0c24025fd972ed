//! Validated simulation of the plant over one controller period.
//!
//! Each integration sub-step runs the two-stage scheme: an a-priori enclosure
//! of all solutions over the whole sub-interval obtained by Picard iteration,
//! then a tighter enclosure at the right endpoint from an interval Taylor
//! series whose truncation remainder is evaluated over the a-priori box.

use crate::interval::{Interval, IntervalBox, PI_HI, PI_LO};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OdeError {
    #[error("a-priori enclosure not reached at integration step {step} (reduce the step size)")]
    EnclosureFailure { step: usize },
}

/// Right-hand side of the plant ODE `s'(t) = f(s(t), u(t))`.
///
/// Both built-in models are autonomous and uniformly Lipschitz in the state
/// on bounded boxes, which is what the enclosure machinery requires.
#[derive(Clone, Debug, PartialEq)]
pub enum PlantModel {
    /// Planar ACAS-Xu encounter kinematics, state `(x, y, psi, v_own, v_int)`
    /// with the turn-rate command in deg/s:
    ///
    /// ```text
    /// x'     = -v_int * sin(psi)
    /// y'     =  v_int * cos(psi) - v_own
    /// psi'   = -u
    /// v_own' = 0
    /// v_int' = 0
    /// ```
    AcasXu,
    /// `s' = A s + B u` for testing against closed-form solutions.
    Linear { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl PlantModel {
    pub fn state_dim(&self) -> usize {
        match self {
            PlantModel::AcasXu => 5,
            PlantModel::Linear { a, .. } => a.len(),
        }
    }

    pub fn command_dim(&self) -> usize {
        match self {
            PlantModel::AcasXu => 1,
            PlantModel::Linear { b, .. } => b.first().map_or(0, Vec::len),
        }
    }

    /// Turn-rate command in deg/s mapped to an enclosure of the rad/s value.
    fn acas_omega(u: &[f64]) -> Interval {
        Interval::point(u[0])
            .mul(&Interval::new(PI_LO, PI_HI))
            .div_scalar(180.0)
    }

    /// Interval image of the right-hand side over a state box.
    pub fn f_interval(&self, s: &IntervalBox, u: &[f64]) -> IntervalBox {
        match self {
            PlantModel::AcasXu => {
                let omega = Self::acas_omega(u);
                let psi = s.get(2);
                let v_own = s.get(3);
                let v_int = s.get(4);
                let dx = v_int.mul(&psi.sin()).neg();
                let dy = v_int.mul(&psi.cos()).sub(v_own);
                IntervalBox::new(vec![
                    dx,
                    dy,
                    omega.neg(),
                    Interval::point(0.0),
                    Interval::point(0.0),
                ])
            }
            PlantModel::Linear { a, b } => {
                let n = a.len();
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let mut acc = Interval::point(0.0);
                    for (j, &w) in a[i].iter().enumerate() {
                        acc = acc.add(&s.get(j).scale(w));
                    }
                    for (j, &w) in b[i].iter().enumerate() {
                        acc = acc.add(&Interval::point(u[j]).scale(w));
                    }
                    out.push(acc);
                }
                IntervalBox::new(out)
            }
        }
    }

    /// Point evaluation of the right-hand side (reference simulations).
    pub fn f_point(&self, s: &[f64], u: &[f64]) -> Vec<f64> {
        match self {
            PlantModel::AcasXu => {
                let omega = u[0].to_radians();
                vec![
                    -s[4] * s[2].sin(),
                    s[4] * s[2].cos() - s[3],
                    -omega,
                    0.0,
                    0.0,
                ]
            }
            PlantModel::Linear { a, b } => {
                let n = a.len();
                let mut out = vec![0.0; n];
                for i in 0..n {
                    for (j, &w) in a[i].iter().enumerate() {
                        out[i] += w * s[j];
                    }
                    for (j, &w) in b[i].iter().enumerate() {
                        out[i] += w * u[j];
                    }
                }
                out
            }
        }
    }

    /// Interval Taylor coefficients `c_0 .. c_order` of the solution through
    /// `s`, i.e. enclosures with `solution(t) ∈ Σ c_i t^i` for small `t`.
    fn taylor_coeffs(&self, s: &IntervalBox, u: &[f64], order: usize) -> Vec<IntervalBox> {
        match self {
            PlantModel::AcasXu => {
                let omega = Self::acas_omega(u);
                let v_own = *s.get(3);
                let v_int = *s.get(4);
                // sin(psi(t)) and cos(psi(t)) obey p' = -omega q, q' = omega p
                let mut p = s.get(2).sin();
                let mut q = s.get(2).cos();
                let mut coeffs = vec![s.clone()];
                for i in 0..order {
                    let k = (i + 1) as f64;
                    let x_next = v_int.mul(&p).neg().div_scalar(k);
                    let mut y_next = v_int.mul(&q);
                    if i == 0 {
                        y_next = y_next.sub(&v_own);
                    }
                    let y_next = y_next.div_scalar(k);
                    let psi_next = if i == 0 {
                        omega.neg()
                    } else {
                        Interval::point(0.0)
                    };
                    coeffs.push(IntervalBox::new(vec![
                        x_next,
                        y_next,
                        psi_next,
                        Interval::point(0.0),
                        Interval::point(0.0),
                    ]));
                    let p_next = omega.neg().mul(&q).div_scalar(k);
                    let q_next = omega.mul(&p).div_scalar(k);
                    p = p_next;
                    q = q_next;
                }
                coeffs
            }
            PlantModel::Linear { a, b } => {
                let n = a.len();
                let mut coeffs = vec![s.clone()];
                for i in 0..order {
                    let prev = &coeffs[i];
                    let k = (i + 1) as f64;
                    let mut next = Vec::with_capacity(n);
                    for row in 0..n {
                        let mut acc = Interval::point(0.0);
                        for (col, &w) in a[row].iter().enumerate() {
                            acc = acc.add(&prev.get(col).scale(w));
                        }
                        if i == 0 {
                            for (col, &w) in b[row].iter().enumerate() {
                                acc = acc.add(&Interval::point(u[col]).scale(w));
                            }
                        }
                        next.push(acc.div_scalar(k));
                    }
                    coeffs.push(IntervalBox::new(next));
                }
                coeffs
            }
        }
    }
}

/// Enclosure of one integration sub-step: `tube` holds every solution over
/// the whole sub-interval, `end` the tighter box at its right endpoint.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub tube: IntervalBox,
    pub end: IntervalBox,
}

const PICARD_MAX_ITERS: usize = 20;
const PICARD_INFLATE_REL: f64 = 1.1;
const PICARD_INFLATE_ABS: f64 = 1e-9;

/// A-priori enclosure: a box `[S]` with `s0 + [0,h]·f([S], u) ⊆ [S]`, so by
/// the Banach fixed-point argument every solution starting in `s0` stays in
/// `[S]` for the whole step.
pub fn priori_enclosure(
    model: &PlantModel,
    s0: &IntervalBox,
    u: &[f64],
    h: f64,
) -> Result<IntervalBox, OdeError> {
    assert!(h > 0.0, "step length must be positive");
    let span = Interval::new(0.0, h);
    let euler = s0
        .add(&model.f_interval(s0, u).scale_interval(&span))
        .expect("dimension preserved");
    let mut candidate = s0.hull(&euler).expect("dimension preserved");
    for _ in 0..PICARD_MAX_ITERS {
        let image = s0
            .add(&model.f_interval(&candidate, u).scale_interval(&span))
            .expect("dimension preserved");
        if candidate.contains_box(&image) {
            // two refinement passes; Picard images of a contained box stay contained
            let mut refined = image;
            for _ in 0..2 {
                refined = s0
                    .add(&model.f_interval(&refined, u).scale_interval(&span))
                    .expect("dimension preserved");
            }
            return Ok(refined);
        }
        let grown = candidate.hull(&image).expect("dimension preserved");
        let mut dims = Vec::with_capacity(grown.dim());
        for d in grown.dims() {
            let pad = d.width() * (PICARD_INFLATE_REL - 1.0) * 0.5 + PICARD_INFLATE_ABS;
            dims.push(d.inflate(pad));
        }
        candidate = IntervalBox::new(dims);
    }
    Err(OdeError::EnclosureFailure { step: 0 })
}

/// One interval Taylor step of length `h` (given as an enclosure of the real
/// step, so an inexact `T/M` stays sound).
pub fn taylor_step(
    model: &PlantModel,
    s0: &IntervalBox,
    u: &[f64],
    h: &Interval,
    order: usize,
) -> Result<StepResult, OdeError> {
    assert!(order >= 1, "Taylor order must be at least 1");
    let apriori = priori_enclosure(model, s0, u, h.hi())?;
    let coeffs = model.taylor_coeffs(s0, u, order);
    let remainder = model.taylor_coeffs(&apriori, u, order + 1);

    // Horner evaluation with the remainder coefficient folded in at the top.
    let mut acc = remainder[order + 1].clone();
    for i in (1..=order).rev() {
        acc = coeffs[i]
            .add(&acc.scale_interval(h))
            .expect("dimension preserved");
    }
    let end = coeffs[0]
        .add(&acc.scale_interval(h))
        .expect("dimension preserved");

    // Solutions at t = h also lie in the a-priori box; intersect for tightness.
    let end = end.intersect(&apriori).unwrap_or_else(|| apriori.clone());
    let tube = apriori; // built as a superset of s0, hence of the whole step
    debug_assert!(tube.contains_box(&end));
    Ok(StepResult { tube, end })
}

/// Chain `steps` Taylor steps across one controller period of length
/// `period` under a zero-order-hold command `u`. Returns the per-sub-interval
/// tube boxes and the enclosure at `t = period`.
pub fn simulate(
    model: &PlantModel,
    s0: &IntervalBox,
    u: &[f64],
    period: f64,
    steps: usize,
    order: usize,
) -> Result<(Vec<IntervalBox>, IntervalBox), OdeError> {
    assert!(steps >= 1, "need at least one integration step");
    assert!(period > 0.0, "period must be positive");
    // enclosure of the real sub-step length period/steps
    let q = period / steps as f64;
    let h = if (steps as f64).mul_add(q, -period) == 0.0 {
        Interval::point(q)
    } else {
        Interval::new(q.next_down(), q.next_up())
    };
    let mut tubes = Vec::with_capacity(steps);
    let mut cur = s0.clone();
    for i in 0..steps {
        let step = taylor_step(model, &cur, u, &h, order)
            .map_err(|_| OdeError::EnclosureFailure { step: i })?;
        tubes.push(step.tube);
        cur = step.end;
    }
    Ok((tubes, cur))
}

/// Dense point reference integration (RK4) used by tests and oracles; not
/// validated, just accurate.
pub fn reference_rk4(
    model: &PlantModel,
    s0: &[f64],
    u: &[f64],
    t: f64,
    substeps: usize,
) -> Vec<f64> {
    let h = t / substeps as f64;
    let mut s = s0.to_vec();
    let axpy = |s: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        s.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for _ in 0..substeps {
        let k1 = model.f_point(&s, u);
        let k2 = model.f_point(&axpy(&s, &k1, h / 2.0), u);
        let k3 = model.f_point(&axpy(&s, &k2, h / 2.0), u);
        let k4 = model.f_point(&axpy(&s, &k3, h), u);
        for i in 0..s.len() {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}
