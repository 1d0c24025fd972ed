//! ReLU feedforward networks: file loading, concrete evaluation, and two
//! sound abstract transformers over input boxes.
//!
//! The naive transformer pushes an interval box layer by layer. The symbolic
//! transformer additionally carries affine lower/upper bound forms in the
//! (normalized) network inputs, which keeps cross-neuron dependencies alive
//! across layers and is never looser than the naive pass: every neuron's
//! concrete bounds are the intersection of both estimates.

use crate::interval::{Interval, IntervalBox};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid network: {0}")]
    Validation(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A ReLU feedforward network: hidden layers apply `max(0, .)`, the output
/// layer is affine. Inputs are clamped to `[input_min, input_max]` and
/// normalized as `(x - mean) / range`; outputs are denormalized with the
/// single trailing mean/range pair.
#[derive(Clone, Debug)]
pub struct ReluNetwork {
    layer_sizes: Vec<usize>,
    /// `weights[l][i][j]`: edge from neuron `j` of layer `l` to neuron `i` of layer `l+1`.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    input_min: Vec<f64>,
    input_max: Vec<f64>,
    input_mean: Vec<f64>,
    input_range: Vec<f64>,
    output_mean: f64,
    output_range: f64,
}

impl ReluNetwork {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
        input_min: Vec<f64>,
        input_max: Vec<f64>,
        input_mean: Vec<f64>,
        input_range: Vec<f64>,
        output_mean: f64,
        output_range: f64,
    ) -> Result<Self, NetworkError> {
        let net = ReluNetwork {
            layer_sizes,
            weights,
            biases,
            input_min,
            input_max,
            input_mean,
            input_range,
            output_mean,
            output_range,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<(), NetworkError> {
        let l = self.layer_sizes.len();
        if l < 2 {
            return Err(NetworkError::Validation("need at least two layers".into()));
        }
        if self.weights.len() != l - 1 || self.biases.len() != l - 1 {
            return Err(NetworkError::Dimension(format!(
                "{} weighted layers declared, got {} weight and {} bias blocks",
                l - 1,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (idx, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let (rows, cols) = (self.layer_sizes[idx + 1], self.layer_sizes[idx]);
            if w.len() != rows || b.len() != rows {
                return Err(NetworkError::Dimension(format!(
                    "layer {}: expected {} rows, got {} weight rows and {} biases",
                    idx + 2,
                    rows,
                    w.len(),
                    b.len()
                )));
            }
            for row in w {
                if row.len() != cols {
                    return Err(NetworkError::Dimension(format!(
                        "layer {}: expected {} columns, got {}",
                        idx + 2,
                        cols,
                        row.len()
                    )));
                }
            }
        }
        let m = self.layer_sizes[0];
        for (name, v) in [
            ("input minimums", &self.input_min),
            ("input maximums", &self.input_max),
            ("input means", &self.input_mean),
            ("input ranges", &self.input_range),
        ] {
            if v.len() != m {
                return Err(NetworkError::Dimension(format!(
                    "{name}: expected {m} values, got {}",
                    v.len()
                )));
            }
        }
        if self.input_range.iter().any(|&r| r.is_nan() || r <= 0.0)
            || self.output_range.is_nan()
            || self.output_range <= 0.0
        {
            return Err(NetworkError::Validation("ranges must be positive".into()));
        }
        Ok(())
    }

    /// Total layer count, input layer included.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    // -- file format ---------------------------------------------------------

    /// Parse the line-based text format: `//` comments, then the number of
    /// weighted layers, the layer sizes, input minimums, input maximums,
    /// means and ranges (inputs plus one output slot), then per weighted
    /// layer the weight rows followed by one bias line per neuron.
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"));

        let mut next = |what: &str| -> Result<(usize, &str), NetworkError> {
            lines.next().ok_or_else(|| NetworkError::Parse {
                line: text.lines().count() + 1,
                msg: format!("unexpected end of input, expected {what}"),
            })
        };

        fn numbers(line: usize, s: &str) -> Result<Vec<f64>, NetworkError> {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|e| NetworkError::Parse {
                        line,
                        msg: format!("bad number {t:?}: {e}"),
                    })
                })
                .collect()
        }

        let (ln, s) = next("the weighted layer count")?;
        let weighted: usize = s
            .split(',')
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| NetworkError::Parse {
                line: ln,
                msg: format!("bad layer count: {e}"),
            })?;
        if weighted == 0 {
            return Err(NetworkError::Parse {
                line: ln,
                msg: "network needs at least one weighted layer".into(),
            });
        }

        let (ln, s) = next("the layer sizes")?;
        let sizes: Vec<usize> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>().map_err(|e| NetworkError::Parse {
                    line: ln,
                    msg: format!("bad layer size {t:?}: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if sizes.len() != weighted + 1 {
            return Err(NetworkError::Dimension(format!(
                "{} weighted layers need {} sizes, got {}",
                weighted,
                weighted + 1,
                sizes.len()
            )));
        }
        let m = sizes[0];

        let mut fixed_row = |what: &str, want: usize| -> Result<Vec<f64>, NetworkError> {
            let (ln, s) = next(what)?;
            let v = numbers(ln, s)?;
            if v.len() != want {
                return Err(NetworkError::Parse {
                    line: ln,
                    msg: format!("{what}: expected {want} values, got {}", v.len()),
                });
            }
            Ok(v)
        };

        let input_min = fixed_row("input minimums", m)?;
        let input_max = fixed_row("input maximums", m)?;
        let means = fixed_row("means", m + 1)?;
        let ranges = fixed_row("ranges", m + 1)?;

        let mut weights = Vec::with_capacity(weighted);
        let mut biases = Vec::with_capacity(weighted);
        for l in 0..weighted {
            let (rows, cols) = (sizes[l + 1], sizes[l]);
            let mut w = Vec::with_capacity(rows);
            for _ in 0..rows {
                let (ln, s) = next("a weight row")?;
                let row = numbers(ln, s)?;
                if row.len() != cols {
                    return Err(NetworkError::Parse {
                        line: ln,
                        msg: format!("weight row: expected {cols} values, got {}", row.len()),
                    });
                }
                w.push(row);
            }
            let mut b = Vec::with_capacity(rows);
            for _ in 0..rows {
                let (ln, s) = next("a bias value")?;
                let v = numbers(ln, s)?;
                if v.len() != 1 {
                    return Err(NetworkError::Parse {
                        line: ln,
                        msg: format!("bias line: expected 1 value, got {}", v.len()),
                    });
                }
                b.push(v[0]);
            }
            weights.push(w);
            biases.push(b);
        }

        ReluNetwork::new(
            sizes,
            weights,
            biases,
            input_min,
            input_max,
            means[..m].to_vec(),
            ranges[..m].to_vec(),
            means[m],
            ranges[m],
        )
    }

    pub fn load_file(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serialize back to the text format. `f64` display is the shortest
    /// decimal that round-trips, so parse(to_text(net)) restores the exact
    /// bit patterns.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        out.push_str(&format!("{}\n", self.layer_sizes.len() - 1));
        out.push_str(
            &self
                .layer_sizes
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        out.push_str(&format!("{}\n", join(&self.input_min)));
        out.push_str(&format!("{}\n", join(&self.input_max)));
        let mut means = self.input_mean.clone();
        means.push(self.output_mean);
        let mut ranges = self.input_range.clone();
        ranges.push(self.output_range);
        out.push_str(&format!("{}\n", join(&means)));
        out.push_str(&format!("{}\n", join(&ranges)));
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for row in w {
                out.push_str(&format!("{}\n", join(row)));
            }
            for bias in b {
                out.push_str(&format!("{bias}\n"));
            }
        }
        out
    }

    // -- concrete evaluation --------------------------------------------------

    fn check_input(&self, got: usize) -> Result<(), NetworkError> {
        if got != self.input_dim() {
            return Err(NetworkError::Dimension(format!(
                "input has {got} components, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Exact composition `F_L ∘ ... ∘ F_1` in f64, normalization included.
    /// The accumulation order matches the abstract transformers so that the
    /// computed path always lies inside the abstract boxes.
    pub fn eval_concrete(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(x.len())?;
        let mut cur: Vec<f64> = (0..x.len())
            .map(|i| {
                (x[i].clamp(self.input_min[i], self.input_max[i]) - self.input_mean[i])
                    / self.input_range[i]
            })
            .collect();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = Vec::with_capacity(w.len());
            for (row, &bias) in w.iter().zip(b) {
                let mut acc = 0.0;
                for (j, &wj) in row.iter().enumerate() {
                    acc += wj * cur[j];
                }
                acc += bias;
                next.push(if l < last { acc.max(0.0) } else { acc });
            }
            cur = next;
        }
        Ok(cur
            .iter()
            .map(|&y| y * self.output_range + self.output_mean)
            .collect())
    }

    // -- abstract transformers --------------------------------------------------

    /// Clamp an input box to the declared bounds and normalize it.
    fn normalize_box(&self, x: &IntervalBox) -> IntervalBox {
        let dims = (0..x.dim())
            .map(|i| {
                let iv = x.get(i);
                let clamped = Interval::new(
                    iv.lo().clamp(self.input_min[i], self.input_max[i]),
                    iv.hi().clamp(self.input_min[i], self.input_max[i]),
                );
                clamped
                    .sub(&Interval::point(self.input_mean[i]))
                    .div_scalar(self.input_range[i])
            })
            .collect();
        IntervalBox::new(dims)
    }

    fn denormalize(&self, y: Interval) -> Interval {
        y.scale(self.output_range)
            .add(&Interval::point(self.output_mean))
    }

    /// One affine layer on interval inputs; accumulation order mirrors
    /// `eval_concrete`.
    fn affine_interval(w: &[Vec<f64>], b: &[f64], inputs: &[Interval]) -> Vec<Interval> {
        w.iter()
            .zip(b)
            .map(|(row, &bias)| {
                let mut acc = Interval::point(0.0);
                for (j, &wj) in row.iter().enumerate() {
                    acc = acc.add(&inputs[j].scale(wj));
                }
                acc.add(&Interval::point(bias))
            })
            .collect()
    }

    fn relu_interval(v: &Interval) -> Interval {
        Interval::new(v.lo().max(0.0), v.hi().max(0.0))
    }

    /// Plain interval bound propagation: sound and inclusion monotone.
    pub fn eval_interval_naive(&self, x: &IntervalBox) -> Result<IntervalBox, NetworkError> {
        self.check_input(x.dim())?;
        let mut cur: Vec<Interval> = self.normalize_box(x).dims().to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = Self::affine_interval(w, b, &cur);
            if l < last {
                next = next.iter().map(Self::relu_interval).collect();
            }
            cur = next;
        }
        Ok(IntervalBox::new(
            cur.into_iter().map(|y| self.denormalize(y)).collect(),
        ))
    }

    /// Symbolic interval propagation. Always componentwise inside the naive
    /// result; exact on stable (never-straddling) networks.
    pub fn eval_symbolic(&self, x: &IntervalBox) -> Result<IntervalBox, NetworkError> {
        self.check_input(x.dim())?;
        let input_box = self.normalize_box(x);
        let m = input_box.dim();
        let mut cur: Vec<SymbolicBounds> = (0..m)
            .map(|i| SymbolicBounds {
                low: AffineForm::var(m, i),
                up: AffineForm::var(m, i),
                concrete: *input_box.get(i),
            })
            .collect();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = Vec::with_capacity(w.len());
            for (row, &bias) in w.iter().zip(b) {
                // affine combination, picking the form that bounds each side
                let mut low = AffineForm::zero(m);
                let mut up = AffineForm::zero(m);
                for (j, &wj) in row.iter().enumerate() {
                    if wj >= 0.0 {
                        low.add_scaled(&cur[j].low, wj);
                        up.add_scaled(&cur[j].up, wj);
                    } else {
                        low.add_scaled(&cur[j].up, wj);
                        up.add_scaled(&cur[j].low, wj);
                    }
                }
                low.cst = low.cst.add(&Interval::point(bias));
                up.cst = up.cst.add(&Interval::point(bias));

                // concrete bounds: intersection of the naive estimate with the
                // concretized forms (the naive side mirrors eval_interval_naive)
                let naive = {
                    let mut acc = Interval::point(0.0);
                    for (j, &wj) in row.iter().enumerate() {
                        acc = acc.add(&cur[j].concrete.scale(wj));
                    }
                    acc.add(&Interval::point(bias))
                };
                let symbolic = Interval::new(low.eval(&input_box).lo(), up.eval(&input_box).hi());
                let concrete = naive.intersect(&symbolic).unwrap_or(naive);

                let mut node = SymbolicBounds { low, up, concrete };
                if l < last {
                    node = node.relu(&input_box);
                }
                next.push(node);
            }
            cur = next;
        }
        Ok(IntervalBox::new(
            cur.into_iter()
                .map(|n| self.denormalize(n.concrete))
                .collect(),
        ))
    }
}

/// Affine form over the normalized network inputs with interval coefficients
/// (the intervals absorb rounding in coefficient arithmetic).
#[derive(Clone, Debug)]
pub struct AffineForm {
    coeffs: Vec<Interval>,
    cst: Interval,
}

impl AffineForm {
    fn zero(m: usize) -> Self {
        AffineForm {
            coeffs: vec![Interval::point(0.0); m],
            cst: Interval::point(0.0),
        }
    }

    fn var(m: usize, i: usize) -> Self {
        let mut f = Self::zero(m);
        f.coeffs[i] = Interval::point(1.0);
        f
    }

    fn constant(m: usize, v: Interval) -> Self {
        let mut f = Self::zero(m);
        f.cst = v;
        f
    }

    fn add_scaled(&mut self, other: &AffineForm, k: f64) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c = c.add(&o.scale(k));
        }
        self.cst = self.cst.add(&other.cst.scale(k));
    }

    /// Concretize over the input box.
    fn eval(&self, input: &IntervalBox) -> Interval {
        let mut acc = self.cst;
        for (c, x) in self.coeffs.iter().zip(input.dims()) {
            acc = acc.add(&c.mul(x));
        }
        acc
    }
}

/// Lower/upper affine bound forms plus cached concrete bounds for one neuron.
#[derive(Clone, Debug)]
pub struct SymbolicBounds {
    low: AffineForm,
    up: AffineForm,
    concrete: Interval,
}

impl SymbolicBounds {
    /// The ReLU relaxation: stable neurons pass or die, the unstable case
    /// keeps a zero lower form and either the existing upper form (when it is
    /// provably nonnegative over the box) or the constant `[0, hi]`.
    fn relu(self, input: &IntervalBox) -> SymbolicBounds {
        let m = self.low.coeffs.len();
        let (lo, hi) = (self.concrete.lo(), self.concrete.hi());
        if lo >= 0.0 {
            self
        } else if hi <= 0.0 {
            SymbolicBounds {
                low: AffineForm::zero(m),
                up: AffineForm::zero(m),
                concrete: Interval::point(0.0),
            }
        } else {
            let up = if self.up.eval(input).lo() >= 0.0 {
                self.up
            } else {
                AffineForm::constant(m, Interval::new(0.0, hi))
            };
            SymbolicBounds {
                low: AffineForm::zero(m),
                up,
                concrete: Interval::new(0.0, hi),
            }
        }
    }
}
