//! Finite conditional probability tables p(o₁,o₂|i₁,i₂).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on per-input-pair normalization.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Bipartite behavior. Party 1 has input `x`, output `a`; party 2 has input
/// `y`, output `b`. Storage is flat with `x` most significant, then `y`, `a`, `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorTable {
    inputs: (usize, usize),
    outputs: (usize, usize),
    probs: Vec<f64>,
}

impl BehaviorTable {
    /// Builds a table and checks that every conditional distribution is
    /// normalized and non-negative.
    pub fn new(inputs: (usize, usize), outputs: (usize, usize), probs: Vec<f64>) -> Result<Self> {
        let t = Self::unchecked(inputs, outputs, probs)?;
        t.validate(NORMALIZATION_TOL)?;
        Ok(t)
    }

    /// Shape-checked but not normalization-checked (subnormalized components).
    pub fn unchecked(inputs: (usize, usize), outputs: (usize, usize), probs: Vec<f64>) -> Result<Self> {
        if inputs.0 == 0 || inputs.1 == 0 || outputs.0 == 0 || outputs.1 == 0 {
            return Err(Error::InvalidTable("alphabets must be non-empty".into()));
        }
        let n = inputs.0 * inputs.1 * outputs.0 * outputs.1;
        if probs.len() != n {
            return Err(Error::InvalidTable(format!("{} probabilities for {n} cells", probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidTable("non-finite probability".into()));
        }
        Ok(Self { inputs, outputs, probs })
    }

    pub fn from_fn(
        inputs: (usize, usize),
        outputs: (usize, usize),
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(inputs.0 * inputs.1 * outputs.0 * outputs.1);
        for x in 0..inputs.0 {
            for y in 0..inputs.1 {
                for a in 0..outputs.0 {
                    for b in 0..outputs.1 {
                        probs.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self::new(inputs, outputs, probs)
    }

    /// Deterministic table with outputs `(f(x,y), g(x,y))`.
    pub fn deterministic(
        inputs: (usize, usize),
        outputs: (usize, usize),
        f: impl Fn(usize, usize) -> usize,
        g: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        Self::from_fn(inputs, outputs, |a, b, x, y| if f(x, y) == a && g(x, y) == b { 1.0 } else { 0.0 })
    }

    pub fn uniform(inputs: (usize, usize), outputs: (usize, usize)) -> Self {
        let w = 1.0 / (outputs.0 * outputs.1) as f64;
        Self {
            inputs,
            outputs,
            probs: vec![w; inputs.0 * inputs.1 * outputs.0 * outputs.1],
        }
    }

    pub fn inputs(&self) -> (usize, usize) {
        self.inputs
    }

    pub fn outputs(&self) -> (usize, usize) {
        self.outputs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.inputs.1 + y) * self.outputs.0 + a) * self.outputs.1 + b
    }

    /// p(a, b | x, y).
    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[self.index(a, b, x, y)]
    }

    /// Σ_{a,b} p(a,b|x,y).
    pub fn block_sum(&self, x: usize, y: usize) -> f64 {
        let start = self.index(0, 0, x, y);
        self.probs[start..start + self.outputs.0 * self.outputs.1].iter().sum()
    }

    /// p(a | x, y), party 1's marginal.
    pub fn marginal_1(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.outputs.1).map(|b| self.p(a, b, x, y)).sum()
    }

    /// p(b | x, y), party 2's marginal.
    pub fn marginal_2(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.outputs.0).map(|a| self.p(a, b, x, y)).sum()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Some(p) = self.probs.iter().find(|&&p| !(-tol..=1.0 + tol).contains(&p)) {
            return Err(Error::InvalidTable(format!("probability {p} outside [0, 1]")));
        }
        for x in 0..self.inputs.0 {
            for y in 0..self.inputs.1 {
                let s = self.block_sum(x, y);
                if (s - 1.0).abs() > tol {
                    return Err(Error::InvalidTable(format!("p(·|{x},{y}) sums to {s}")));
                }
            }
        }
        Ok(())
    }

    /// `w·self + (1-w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.inputs != other.inputs || self.outputs != other.outputs {
            return Err(Error::InvalidTable("mixing tables of different shapes".into()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("mixing weight {w} outside [0, 1]")));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| w * p + (1.0 - w) * q)
            .collect();
        Ok(Self { inputs: self.inputs, outputs: self.outputs, probs })
    }

    /// Entrywise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }

    /// Cellwise scaled copy (used for subnormalized components).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            inputs: self.inputs,
            outputs: self.outputs,
            probs: self.probs.iter().map(|p| p * s).collect(),
        }
    }
}

/// JSON form: `{"inputs": [nx, ny], "outputs": [na, nb], "p": [[[[p(a,b|x,y)]]]]}`
/// nested as `p[x][y][a][b]`.
#[derive(Serialize, Deserialize)]
struct BehaviorJson {
    inputs: [usize; 2],
    outputs: [usize; 2],
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Serialize for BehaviorTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let p = (0..self.inputs.0)
            .map(|x| {
                (0..self.inputs.1)
                    .map(|y| {
                        (0..self.outputs.0)
                            .map(|a| (0..self.outputs.1).map(|b| self.p(a, b, x, y)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        BehaviorJson {
            inputs: [self.inputs.0, self.inputs.1],
            outputs: [self.outputs.0, self.outputs.1],
            p,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BehaviorTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = BehaviorJson::deserialize(d)?;
        let inputs = (j.inputs[0], j.inputs[1]);
        let outputs = (j.outputs[0], j.outputs[1]);
        let mut probs = Vec::new();
        if j.p.len() != inputs.0 {
            return Err(D::Error::custom("p has the wrong number of x blocks"));
        }
        for row in &j.p {
            if row.len() != inputs.1 {
                return Err(D::Error::custom("p has the wrong number of y blocks"));
            }
            for block in row {
                if block.len() != outputs.0 || block.iter().any(|r| r.len() != outputs.1) {
                    return Err(D::Error::custom("p block shape does not match outputs"));
                }
                probs.extend(block.iter().flatten().copied());
            }
        }
        BehaviorTable::new(inputs, outputs, probs).map_err(D::Error::custom)
    }
}
