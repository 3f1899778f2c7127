//! Strategy profiles and box-shaped constraint sets.

use serde::Serialize;

use crate::error::{Error, Result};

/// Per-player block structure of a joint strategy vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    offsets: Vec<usize>,
}

impl Partition {
    /// Builds a partition from the block dimensions `n_1, ..., n_N`.
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("dims", "at least one player is required"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("dims", "every player needs a positive dimension"));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for d in dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(Self { offsets })
    }

    /// `count` players of dimension one.
    pub fn scalar(count: usize) -> Result<Self> {
        Self::new(&vec![1; count])
    }

    pub fn players(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn max_dim(&self) -> usize {
        (0..self.players()).map(|i| self.dim(i)).max().unwrap_or(0)
    }

    /// Index range of player `i` (zero based) inside the joint vector.
    pub fn range(&self, i: usize) -> Result<std::ops::Range<usize>> {
        if i >= self.players() {
            return Err(Error::PlayerIndex {
                index: i,
                players: self.players(),
            });
        }
        Ok(self.offsets[i]..self.offsets[i + 1])
    }
}

/// Joint strategy vector together with its per-player partition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyProfile {
    values: Vec<f64>,
    partition: Partition,
}

impl StrategyProfile {
    pub fn new(values: Vec<f64>, partition: Partition) -> Result<Self> {
        if values.len() != partition.total_dim() {
            return Err(Error::Dimension {
                expected: partition.total_dim(),
                got: values.len(),
            });
        }
        Ok(Self { values, partition })
    }

    /// Profile with every player at dimension one.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        let partition = Partition::scalar(values.len())?;
        Self::new(values, partition)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn players(&self) -> usize {
        self.partition.players()
    }

    /// Block of player `i` (zero based).
    pub fn slice_player(&self, i: usize) -> Result<&[f64]> {
        let r = self.partition.range(i)?;
        Ok(&self.values[r])
    }

    /// Block of player `i`; panics if `i` is out of range.
    pub fn player(&self, i: usize) -> &[f64] {
        &self.values[self.partition.offsets[i]..self.partition.offsets[i + 1]]
    }

    pub fn player_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.partition.offsets[i]..self.partition.offsets[i + 1];
        &mut self.values[r]
    }

    /// Replaces the block of player `i`.
    pub fn set_player(&mut self, i: usize, block: &[f64]) -> Result<()> {
        let r = self.partition.range(i)?;
        if block.len() != r.len() {
            return Err(Error::Dimension {
                expected: r.len(),
                got: block.len(),
            });
        }
        self.values[r].copy_from_slice(block);
        Ok(())
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Closed convex set with a Euclidean projection.
pub trait ConvexSet {
    fn dim(&self) -> usize;

    /// Projects `x` onto the set in place. `x.len()` must equal `dim()`.
    fn project_in_place(&self, x: &mut [f64]);

    fn contains(&self, x: &[f64], tol: f64) -> bool;
}

/// Axis-aligned box `[l_1, u_1] x ... x [l_n, u_n]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::invalid("lower", "box must have positive dimension"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(Error::invalid("bounds", format!("invalid interval [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// Cartesian product of the given boxes, in order.
    pub fn product(parts: &[BoxSet]) -> Result<Self> {
        let lower = parts.iter().flat_map(|b| b.lower.iter().copied()).collect();
        let upper = parts.iter().flat_map(|b| b.upper.iter().copied()).collect();
        Self::new(lower, upper)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest squared distance from `p` to a point of the box.
    pub fn max_sq_distance_from(&self, p: &[f64]) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(p)
            .map(|((l, u), c)| (c - l).abs().max((u - c).abs()).powi(2))
            .sum()
    }

    /// Projection returning a new vector.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }
}

impl ConvexSet for BoxSet {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn project_in_place(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, l), u)| *v >= l - tol && *v <= u + tol)
    }
}

/// Euclidean projection of `x` onto `set`.
pub fn project(x: &[f64], set: &BoxSet) -> Result<Vec<f64>> {
    set.project(x)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
