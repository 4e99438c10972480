//! Deterministic tensor-trapezoid quadrature over the complex plane.
//!
//! Every integral reports a boundary-mass diagnostic: the fraction of
//! `Σ|f|` carried by the outermost ring of nodes. Sums are reduced pairwise
//! over a fixed binary tree on the canonical node order, so the result does
//! not depend on how many threads evaluated the nodes.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{ComplexPoint, OperatorMatrix};

/// Boundary-mass fraction above which an integral counts as unconverged.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;

/// Default points per axis.
pub const DEFAULT_POINTS: usize = 101;

// Below this many nodes the pairwise reduction stays on the current thread.
const PAR_THRESHOLD: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    center: ComplexPoint,
    extent: f64,
    points_per_axis: usize,
    nodes: Vec<ComplexPoint>,
    weights: Vec<f64>,
}

/// Composite trapezoid grid on the square `center ± extent` (both axes).
///
/// Nodes are ordered row-major with the real part varying fastest.
pub fn make_grid(center: ComplexPoint, extent: f64, points_per_axis: usize) -> Result<QuadGrid> {
    if !extent.is_finite() || extent <= 0.0 {
        return Err(Error::Domain(format!(
            "grid extent must be positive, got {extent}"
        )));
    }
    if points_per_axis < 3 || points_per_axis.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "points per axis must be odd and >= 3, got {points_per_axis}"
        )));
    }
    let m = points_per_axis;
    let h = 2.0 * extent / (m - 1) as f64;
    let half = (m / 2) as f64;
    let axis: Vec<f64> = (0..m).map(|i| (i as f64 - half) * h).collect();
    let w1: Vec<f64> = (0..m)
        .map(|i| if i == 0 || i == m - 1 { 0.5 * h } else { h })
        .collect();
    let mut nodes = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for iy in 0..m {
        for ix in 0..m {
            nodes.push(ComplexPoint::new(
                center.re + axis[ix],
                center.im + axis[iy],
            ));
            weights.push(w1[ix] * w1[iy]);
        }
    }
    Ok(QuadGrid {
        center,
        extent,
        points_per_axis: m,
        nodes,
        weights,
    })
}

impl QuadGrid {
    pub fn center(&self) -> ComplexPoint {
        self.center
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn nodes(&self) -> &[ComplexPoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points_per_axis - 1) as f64
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        let m = self.points_per_axis;
        let (iy, ix) = (index / m, index % m);
        ix == 0 || iy == 0 || ix == m - 1 || iy == m - 1
    }

    /// True when the square `point ± half_width` lies inside the grid.
    pub fn covers(&self, point: ComplexPoint, half_width: f64) -> bool {
        let slack = 1e-12 * self.extent.max(1.0);
        (point.re - self.center.re).abs() + half_width <= self.extent + slack
            && (point.im - self.center.im).abs() + half_width <= self.extent + slack
    }

    /// Integrates `f` over the grid, evaluating nodes in parallel.
    pub fn integrate<T, F>(&self, f: F) -> Integral<T>
    where
        T: Integrand,
        F: Fn(ComplexPoint) -> T + Sync,
    {
        let partial = self.reduce(0, self.len(), &f);
        Integral {
            value: partial.sum,
            boundary_mass: if partial.abs_total > 0.0 {
                partial.abs_boundary / partial.abs_total
            } else {
                0.0
            },
        }
    }

    /// Integrates precomputed node values.
    pub fn integrate_values<T: Integrand + Clone>(&self, values: &[T]) -> Result<Integral<T>> {
        if values.len() != self.len() {
            return Err(Error::Domain(format!(
                "expected {} node values, got {}",
                self.len(),
                values.len()
            )));
        }
        let partial = self.reduce_values(0, self.len(), values);
        Ok(Integral {
            value: partial.sum,
            boundary_mass: if partial.abs_total > 0.0 {
                partial.abs_boundary / partial.abs_total
            } else {
                0.0
            },
        })
    }

    fn leaf<T: Integrand>(&self, i: usize, v: T) -> Partial<T> {
        let mag = v.magnitude();
        Partial {
            sum: v.scale(self.weights[i]),
            abs_total: mag,
            abs_boundary: if self.is_boundary(i) { mag } else { 0.0 },
        }
    }

    fn reduce<T, F>(&self, lo: usize, hi: usize, f: &F) -> Partial<T>
    where
        T: Integrand,
        F: Fn(ComplexPoint) -> T + Sync,
    {
        if hi - lo == 1 {
            return self.leaf(lo, f(self.nodes[lo]));
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = if hi - lo >= PAR_THRESHOLD {
            rayon::join(|| self.reduce(lo, mid, f), || self.reduce(mid, hi, f))
        } else {
            (self.reduce(lo, mid, f), self.reduce(mid, hi, f))
        };
        a.merge(b)
    }

    fn reduce_values<T: Integrand + Clone>(
        &self,
        lo: usize,
        hi: usize,
        values: &[T],
    ) -> Partial<T> {
        if hi - lo == 1 {
            return self.leaf(lo, values[lo].clone());
        }
        let mid = lo + (hi - lo) / 2;
        self.reduce_values(lo, mid, values)
            .merge(self.reduce_values(mid, hi, values))
    }
}

struct Partial<T> {
    sum: T,
    abs_total: f64,
    abs_boundary: f64,
}

impl<T: Integrand> Partial<T> {
    fn merge(self, other: Partial<T>) -> Partial<T> {
        Partial {
            sum: self.sum.add(other.sum),
            abs_total: self.abs_total + other.abs_total,
            abs_boundary: self.abs_boundary + other.abs_boundary,
        }
    }
}

/// Result of a grid integral with its boundary-mass diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub boundary_mass: f64,
}

impl<T> Integral<T> {
    pub fn converged(&self) -> bool {
        self.boundary_mass <= BOUNDARY_MASS_LIMIT
    }

    /// Errors with [`Error::NonConverged`] when the boundary mass is too large.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged() {
            Ok(self)
        } else {
            Err(Error::NonConverged {
                boundary_mass: self.boundary_mass,
                limit: BOUNDARY_MASS_LIMIT,
            })
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Integral<U> {
        Integral {
            value: f(self.value),
            boundary_mass: self.boundary_mass,
        }
    }
}

/// Values that can be linearly accumulated on a grid.
pub trait Integrand: Send + Sized {
    fn add(self, other: Self) -> Self;
    fn scale(self, w: f64) -> Self;
    /// Size used by the boundary-mass diagnostic.
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for C64 {
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Integrand for Array1<f64> {
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(|v| v.abs()).sum()
    }
}

impl Integrand for Array2<C64> {
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, w: f64) -> Self {
        self * w
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl Integrand for OperatorMatrix {
    fn add(self, other: Self) -> Self {
        OperatorMatrix::from_array(self.into_entries() + other.into_entries())
    }
    fn scale(self, w: f64) -> Self {
        OperatorMatrix::from_array(self.into_entries() * w)
    }
    fn magnitude(&self) -> f64 {
        self.entries().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl<A: Integrand, B: Integrand> Integrand for (A, B) {
    fn add(self, other: Self) -> Self {
        (self.0.add(other.0), self.1.add(other.1))
    }
    fn scale(self, w: f64) -> Self {
        (self.0.scale(w), self.1.scale(w))
    }
    fn magnitude(&self) -> f64 {
        self.0.magnitude() + self.1.magnitude()
    }
}
