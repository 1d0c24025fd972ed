//! The discrete controller: network selection by previous command, the
//! pre-processing stage (concrete and abstract), and the post-processing
//! argmin over the finite command set.

use crate::interval::{Interval, IntervalBox, atan2};
use crate::network::{NetworkError, ReluNetwork};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("bearing undefined: state at (or straddling) the origin")]
    OriginBearing,
    #[error("command index {0} out of range")]
    BadCommand(usize),
    #[error("state has {got} components, expected {expected}")]
    BadState { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid controller: {0}")]
    Validation(String),
}

/// The finite, ordered set of actuation commands `u^(1)..u^(P)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandSet {
    vectors: Vec<Vec<f64>>,
}

impl CommandSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, ControllerError> {
        if vectors.is_empty() {
            return Err(ControllerError::Validation("command set is empty".into()));
        }
        let d = vectors[0].len();
        if vectors.iter().any(|v| v.len() != d) {
            return Err(ControllerError::Validation(
                "commands have mixed dimensions".into(),
            ));
        }
        for (i, v) in vectors.iter().enumerate() {
            for w in &vectors[i + 1..] {
                if v == w {
                    return Err(ControllerError::Validation(format!(
                        "duplicate command {v:?}"
                    )));
                }
            }
        }
        Ok(CommandSet { vectors })
    }

    /// The five ACAS-Xu turn-rate advisories in deg/s:
    /// clear-of-conflict, weak left, weak right, strong left, strong right.
    pub fn acasxu() -> Self {
        CommandSet::new(vec![
            vec![0.0],
            vec![1.5],
            vec![-1.5],
            vec![3.0],
            vec![-3.0],
        ])
        .unwrap()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }
}

/// Pre/post-processing flavor of the controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrePostKind {
    /// Cartesian-to-polar pre-processing on the 5-dimensional encounter
    /// state, argmin post-processing over 5 advisory scores.
    AcasXu,
    /// State passed to the network unchanged.
    Identity,
}

/// A bank of networks keyed by the previous command, plus the execution
/// period and pre/post flavor.
#[derive(Clone, Debug)]
pub struct ControllerSpec {
    pub commands: CommandSet,
    networks: Vec<ReluNetwork>,
    pub period: f64,
    pub kind: PrePostKind,
}

impl ControllerSpec {
    pub fn new(
        commands: CommandSet,
        networks: Vec<ReluNetwork>,
        period: f64,
        kind: PrePostKind,
    ) -> Result<Self, ControllerError> {
        if networks.len() != commands.len() {
            return Err(ControllerError::Validation(format!(
                "{} commands but {} networks in the selection table",
                commands.len(),
                networks.len()
            )));
        }
        if period.is_nan() || period <= 0.0 {
            return Err(ControllerError::Validation(
                "period must be positive".into(),
            ));
        }
        let m = networks[0].input_dim();
        let p = networks[0].output_dim();
        if networks
            .iter()
            .any(|n| n.input_dim() != m || n.output_dim() != p)
        {
            return Err(ControllerError::Validation(
                "networks disagree on input/output dimensions".into(),
            ));
        }
        if p != commands.len() {
            return Err(ControllerError::Validation(format!(
                "networks output {p} scores for {} commands",
                commands.len()
            )));
        }
        Ok(ControllerSpec {
            commands,
            networks,
            period,
            kind,
        })
    }

    /// The selection table: previous command index to network.
    pub fn network_for(&self, command: usize) -> Result<&ReluNetwork, ControllerError> {
        self.networks
            .get(command)
            .ok_or(ControllerError::BadCommand(command))
    }

    pub fn input_dim(&self) -> usize {
        self.networks[0].input_dim()
    }

    /// Concrete pre-processing of a sampled plant state.
    ///
    /// The ACAS flavor maps `(x, y, psi, v_own, v_int)` to
    /// `(rho, theta, psi, v_own, v_int)` where `rho` is the distance to the
    /// intruder and `theta` its bearing measured counter-clockwise from the
    /// ownship heading (the +y axis), in `(-pi, pi]`.
    pub fn pre_concrete(&self, s: &[f64]) -> Result<Vec<f64>, ControllerError> {
        match self.kind {
            PrePostKind::Identity => Ok(s.to_vec()),
            PrePostKind::AcasXu => {
                if s.len() != 5 {
                    return Err(ControllerError::BadState {
                        expected: 5,
                        got: s.len(),
                    });
                }
                let (x, y) = (s[0], s[1]);
                let rho = x.hypot(y);
                if rho == 0.0 {
                    return Err(ControllerError::OriginBearing);
                }
                let theta = (-x).atan2(y);
                Ok(vec![rho, theta, s[2], s[3], s[4]])
            }
        }
    }

    /// Interval image of the pre-processing over a state box.
    pub fn pre_abstract(&self, s: &IntervalBox) -> Result<IntervalBox, ControllerError> {
        match self.kind {
            PrePostKind::Identity => Ok(s.clone()),
            PrePostKind::AcasXu => {
                if s.dim() != 5 {
                    return Err(ControllerError::BadState {
                        expected: 5,
                        got: s.dim(),
                    });
                }
                let x = s.get(0);
                let y = s.get(1);
                if x.contains(0.0) && y.contains(0.0) {
                    return Err(ControllerError::OriginBearing);
                }
                let rho = x
                    .sqr()
                    .add(&y.sqr())
                    .sqrt()
                    .expect("squares are nonnegative");
                let theta = atan2(&x.neg(), y);
                Ok(IntervalBox::new(vec![
                    rho,
                    theta,
                    *s.get(2),
                    *s.get(3),
                    *s.get(4),
                ]))
            }
        }
    }

    /// Concrete post-processing: argmin score, lowest index on ties.
    pub fn post_concrete(&self, y: &[f64]) -> usize {
        let mut best = 0;
        for (i, &v) in y.iter().enumerate().skip(1) {
            if v < y[best] {
                best = i;
            }
        }
        best
    }

    /// Abstract post-processing: every command index that could be the
    /// argmin for some concrete score vector in the box. Never empty.
    pub fn post_abstract(&self, y: &IntervalBox) -> Vec<usize> {
        let min_hi = y
            .dims()
            .iter()
            .map(Interval::hi)
            .fold(f64::INFINITY, f64::min);
        (0..y.dim()).filter(|&i| y.get(i).lo() <= min_hi).collect()
    }

    /// One abstract controller execution: select the network from the
    /// previous command, then pre, network, post.
    pub fn step_abstract(
        &self,
        region: &IntervalBox,
        command: usize,
    ) -> Result<Vec<usize>, ControllerError> {
        let net = self.network_for(command)?;
        let x = self.pre_abstract(region)?;
        let y = net.eval_symbolic(&x)?;
        Ok(self.post_abstract(&y))
    }

    /// One concrete controller execution (reference semantics for oracles).
    pub fn step_concrete(&self, s: &[f64], command: usize) -> Result<usize, ControllerError> {
        let net = self.network_for(command)?;
        let x = self.pre_concrete(s)?;
        let y = net.eval_concrete(&x)?;
        Ok(self.post_concrete(&y))
    }
}
