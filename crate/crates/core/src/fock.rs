//! Truncated Fock-space foundation.
//!
//! States and operators live in the span of the photon-number states
//! `|0⟩ … |N⟩`, where `N` is the cutoff. Matrix elements of the displacement
//! operator are the exact infinite-dimensional ones restricted to this block,
//! evaluated from associated-Laguerre polynomials; nothing is obtained by
//! exponentiating a truncated generator.
//!
//! Quadratures follow `x̂ = (a + a†)/2`, `ŷ = (a − a†)/(2i)` (vacuum variance
//! 1/4), so `D̂(β) = exp(β a† − β* a)` shifts `(x̂, ŷ)` by `(Re β, Im β)`.

use std::fmt;
use std::ops::{Add, Sub};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|‖ψ‖² − 1|` for operations that require normalized input.
pub const NORM_TOL: f64 = 1e-6;

/// Largest truncation leakage accepted by the non-Gaussian state constructors.
pub const STATE_LEAKAGE_LIMIT: f64 = 1e-6;

/// A point of the complex measurement plane, `β = x₋ + i·y₊`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub const ZERO: ComplexPoint = ComplexPoint { re: 0.0, im: 0.0 };

    /// Panics on NaN or infinite coordinates; use [`ComplexPoint::try_new`]
    /// for untrusted input.
    pub fn new(re: f64, im: f64) -> Self {
        assert!(re.is_finite() && im.is_finite(), "non-finite ComplexPoint");
        ComplexPoint { re, im }
    }

    pub fn try_new(re: f64, im: f64) -> Result<Self> {
        if re.is_finite() && im.is_finite() {
            Ok(ComplexPoint { re, im })
        } else {
            Err(Error::Domain(format!("non-finite point ({re}, {im})")))
        }
    }

    pub fn real(re: f64) -> Self {
        Self::new(re, 0.0)
    }

    pub fn to_c64(self) -> C64 {
        C64::new(self.re, self.im)
    }

    pub fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: f64) -> Self {
        ComplexPoint::new(self.re * s, self.im * s)
    }
}

impl From<C64> for ComplexPoint {
    fn from(z: C64) -> Self {
        ComplexPoint::new(z.re, z.im)
    }
}

impl From<ComplexPoint> for C64 {
    fn from(p: ComplexPoint) -> Self {
        p.to_c64()
    }
}

impl Add for ComplexPoint {
    type Output = ComplexPoint;
    fn add(self, rhs: Self) -> Self {
        ComplexPoint::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for ComplexPoint {
    type Output = ComplexPoint;
    fn sub(self, rhs: Self) -> Self {
        ComplexPoint::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl std::ops::Neg for ComplexPoint {
    type Output = ComplexPoint;
    fn neg(self) -> Self {
        ComplexPoint::new(-self.re, -self.im)
    }
}

impl fmt::Display for ComplexPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im < 0.0 {
            write!(f, "{}-{}i", self.re, -self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

/// Pure-state amplitudes `⟨n|ψ⟩` for `n = 0..=cutoff`.
///
/// Not necessarily normalized: truncated coherent states keep their leakage
/// and teleported outputs carry the outcome probability in their norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: Array1<C64>,
}

impl FockVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Domain(
                "FockVector needs at least one amplitude".into(),
            ));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        Ok(FockVector {
            amps: Array1::from(amps),
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub(crate) fn from_array(amps: Array1<C64>) -> Self {
        debug_assert!(!amps.is_empty());
        FockVector { amps }
    }

    pub fn zeros(cutoff: usize) -> Self {
        FockVector {
            amps: Array1::zeros(cutoff + 1),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or_default()
    }

    pub fn to_vec(&self) -> Vec<C64> {
        self.amps.to_vec()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `1 − ‖ψ‖²`: probability mass lost above the cutoff.
    pub fn leakage(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized {
                norm_sqr: self.norm_sqr(),
            })
        }
    }

    /// Explicitly rescaled copy with unit norm. Zero vectors are rejected.
    pub fn normalized(&self) -> Result<FockVector> {
        let n = self.norm_sqr();
        if n.is_nan() || n <= 0.0 {
            return Err(Error::Domain("cannot normalize a zero-norm state".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, s: C64) -> FockVector {
        FockVector {
            amps: self.amps.mapv(|a| a * s),
        }
    }

    /// Copy with a different cutoff, zero-padding or dropping the top levels.
    pub fn with_cutoff(&self, cutoff: usize) -> FockVector {
        let mut amps = Array1::zeros(cutoff + 1);
        for (n, a) in self.amps.iter().enumerate().take(cutoff + 1) {
            amps[n] = *a;
        }
        FockVector { amps }
    }

    /// Photon-number expectation `Σ n |ψₙ|²`.
    pub fn mean_photon_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(n, a)| n as f64 * a.norm_sqr())
            .sum()
    }

    /// `⟨ψ|a|ψ⟩`, the coherent centroid of the state.
    pub fn coherent_centroid(&self) -> ComplexPoint {
        let mut acc = C64::new(0.0, 0.0);
        for n in 1..self.amps.len() {
            acc += self.amps[n - 1].conj() * self.amps[n] * (n as f64).sqrt();
        }
        ComplexPoint::from(acc)
    }

    /// `⟨ψ|a²|ψ⟩`.
    pub fn second_moment_a(&self) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for n in 2..self.amps.len() {
            acc += self.amps[n - 2].conj() * self.amps[n] * ((n * (n - 1)) as f64).sqrt();
        }
        acc
    }

    /// Amplitude-wise complex conjugate, `Σ ⟨n|ψ⟩* |n⟩`.
    pub fn conjugate(&self) -> FockVector {
        FockVector {
            amps: self.amps.mapv(|a| a.conj()),
        }
    }

    pub fn max_abs_diff(&self, other: &FockVector) -> f64 {
        let n = self.dim().max(other.dim());
        (0..n)
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max)
    }
}

/// Dense `(N+1)×(N+1)` complex matrix on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<C64>,
}

impl OperatorMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::Domain(format!(
                "operator must be square, got {r}x{c}"
            )));
        }
        Ok(OperatorMatrix { entries })
    }

    pub(crate) fn from_array(entries: Array2<C64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        OperatorMatrix { entries }
    }

    pub fn zeros(cutoff: usize) -> Self {
        OperatorMatrix {
            entries: Array2::zeros((cutoff + 1, cutoff + 1)),
        }
    }

    pub fn identity(cutoff: usize) -> Self {
        OperatorMatrix {
            entries: Array2::eye(cutoff + 1),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn get(&self, m: usize, n: usize) -> C64 {
        self.entries[[m, n]]
    }

    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix {
            entries: self.entries.t().mapv(|z| z.conj()),
        }
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_cutoffs(self.cutoff(), other.cutoff())?;
        Ok(OperatorMatrix {
            entries: self.entries.dot(&other.entries),
        })
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        check_cutoffs(self.cutoff(), v.cutoff())?;
        Ok(FockVector {
            amps: self.entries.dot(v.amplitudes()),
        })
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, v: &FockVector) -> Result<C64> {
        let av = self.apply(v)?;
        overlap(v, &av)
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn scaled(&self, s: f64) -> OperatorMatrix {
        OperatorMatrix {
            entries: self.entries.mapv(|z| z * s),
        }
    }

    /// Max entry-wise deviation, optionally restricted to the leading
    /// `dim × dim` block.
    pub fn max_abs_diff(&self, other: &OperatorMatrix, dim: Option<usize>) -> f64 {
        let d = dim.unwrap_or(self.dim()).min(self.dim()).min(other.dim());
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in 0..d {
                worst = worst.max((self.entries[[m, n]] - other.entries[[m, n]]).norm());
            }
        }
        worst
    }

    /// Exact Hermiticity check, `A[m][n] == conj(A[n][m])` bit for bit.
    pub fn is_hermitian(&self) -> bool {
        let d = self.dim();
        (0..d).all(|m| (0..=m).all(|n| self.entries[[m, n]] == self.entries[[n, m]].conj()))
    }

    pub fn outer(u: &FockVector, v: &FockVector) -> Result<OperatorMatrix> {
        check_cutoffs(u.cutoff(), v.cutoff())?;
        let d = u.dim();
        let mut e = Array2::zeros((d, d));
        for m in 0..d {
            for n in 0..d {
                e[[m, n]] = u.amps[m] * v.amps[n].conj();
            }
        }
        Ok(OperatorMatrix { entries: e })
    }
}

pub(crate) fn check_cutoffs(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::CutoffMismatch { left: a, right: b })
    }
}

/// Number of Fock levels below the truncation-contaminated band for a
/// displacement of size `|β|`: the top `ceil(4|β|² + 8)` levels are excluded.
pub fn interior_dim(cutoff: usize, beta: ComplexPoint) -> usize {
    let excluded = (4.0 * beta.norm_sqr() + 8.0).ceil() as usize;
    (cutoff + 1).saturating_sub(excluded)
}

pub fn number_state(n: usize, cutoff: usize) -> Result<FockVector> {
    if n > cutoff {
        return Err(Error::Domain(format!(
            "photon number {n} exceeds cutoff {cutoff}"
        )));
    }
    let mut v = FockVector::zeros(cutoff);
    v.amps[n] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Truncated coherent state `e^{−|α|²/2} Σ αⁿ/√n! |n⟩`, not renormalized;
/// see [`FockVector::leakage`].
pub fn coherent_state(alpha: ComplexPoint, cutoff: usize) -> FockVector {
    let a = alpha.to_c64();
    let mut amps = Array1::zeros(cutoff + 1);
    let mut cur = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps[0] = cur;
    for n in 1..=cutoff {
        cur = cur * a / (n as f64).sqrt();
        amps[n] = cur;
    }
    FockVector { amps }
}

/// `⟨m|D̂(β)|n⟩` for `m < rows`, `n < cols`.
///
/// Each diagonal `m − n = k` is filled by an upward recurrence in `n` for
/// `g_n = √(k!·n!/(n+k)!)·L_n^{(k)}(|β|²)`, and the prefactor
/// `e^{−|β|²/2}|β|^k/√k!` is formed in log space. Entries above the
/// diagonal come from `⟨n|D̂(β)|n+k⟩ = (−β*)^k e^{−|β|²/2} g_n/√k!`, which is
/// the adjoint image of the entry below it.
pub fn displacement_block(beta: ComplexPoint, rows: usize, cols: usize) -> Array2<C64> {
    let mut out = Array2::zeros((rows, cols));
    if rows == 0 || cols == 0 {
        return out;
    }
    let x = beta.norm_sqr();
    if x == 0.0 {
        for n in 0..rows.min(cols) {
            out[[n, n]] = C64::new(1.0, 0.0);
        }
        return out;
    }
    let r = x.sqrt();
    let ln_r = r.ln();
    let unit = beta.to_c64() / r;
    let kmax = rows.max(cols);

    let mut ln_fact = 0.0f64;
    let mut phase = C64::new(1.0, 0.0);
    let mut g = Vec::with_capacity(rows.max(cols));
    for k in 0..kmax {
        if k > 0 {
            ln_fact += (k as f64).ln();
            phase *= unit;
        }
        let lower_len = rows.saturating_sub(k).min(cols);
        let upper_len = if k == 0 {
            0
        } else {
            cols.saturating_sub(k).min(rows)
        };
        let len = lower_len.max(upper_len);
        if len == 0 {
            continue;
        }
        laguerre_normalized(k, x, len, &mut g);
        let pref = (-0.5 * x + k as f64 * ln_r - 0.5 * ln_fact).exp();
        let lower = phase * pref;
        // (−β*)^k = (−1)^k conj(β^k)
        let upper = if k % 2 == 0 {
            phase.conj()
        } else {
            -phase.conj()
        } * pref;
        for n in 0..lower_len {
            out[[n + k, n]] = lower * g[n];
        }
        for n in 0..upper_len {
            out[[n, n + k]] = upper * g[n];
        }
    }
    out
}

/// Fills `g[0..len]` with `√(k!·n!/(n+k)!)·L_n^{(k)}(x)`.
fn laguerre_normalized(k: usize, x: f64, len: usize, g: &mut Vec<f64>) {
    g.clear();
    let kf = k as f64;
    g.push(1.0);
    if len > 1 {
        g.push((1.0 + kf - x) / (1.0 + kf).sqrt());
    }
    for n in 1..len.saturating_sub(1) {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - x) * g[n] - (nf * (nf + kf)).sqrt() * g[n - 1])
            / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
        g.push(next);
    }
}

/// Matrix of `D̂(β)` on the truncated space, with exact matrix elements.
pub fn displacement_matrix(beta: ComplexPoint, cutoff: usize) -> OperatorMatrix {
    if interior_dim(cutoff, beta) == 0 {
        log::warn!(
            "|beta| = {} leaves no accurate interior subspace at cutoff {cutoff}",
            beta.norm()
        );
    }
    OperatorMatrix::from_array(displacement_block(beta, cutoff + 1, cutoff + 1))
}

/// `D̂(β)|n⟩` truncated at `cutoff`.
pub fn displaced_number_state(beta: ComplexPoint, n: usize, cutoff: usize) -> Result<FockVector> {
    if n > cutoff {
        return Err(Error::Domain(format!(
            "photon number {n} exceeds cutoff {cutoff}"
        )));
    }
    let block = displacement_block(beta, cutoff + 1, n + 1);
    Ok(FockVector::from_array(block.column(n).to_owned()))
}

pub fn annihilation(cutoff: usize) -> OperatorMatrix {
    let d = cutoff + 1;
    let mut e = Array2::zeros((d, d));
    for n in 1..d {
        e[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::from_array(e)
}

pub fn number_operator(cutoff: usize) -> OperatorMatrix {
    let d = cutoff + 1;
    let mut e = Array2::zeros((d, d));
    for n in 0..d {
        e[[n, n]] = C64::new(n as f64, 0.0);
    }
    OperatorMatrix::from_array(e)
}

/// `(x̂, ŷ)` with `x̂ = (a + a†)/2` and `ŷ = (a − a†)/(2i)`.
pub fn quadrature_operators(cutoff: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if cutoff < 1 {
        return Err(Error::Domain(
            "quadrature operators need cutoff >= 1".into(),
        ));
    }
    let d = cutoff + 1;
    let mut x = Array2::zeros((d, d));
    let mut y = Array2::zeros((d, d));
    for n in 1..d {
        let s = 0.5 * (n as f64).sqrt();
        x[[n - 1, n]] = C64::new(s, 0.0);
        x[[n, n - 1]] = C64::new(s, 0.0);
        // ⟨n−1|ŷ|n⟩ = √n/(2i) = −i√n/2
        y[[n - 1, n]] = C64::new(0.0, -s);
        y[[n, n - 1]] = C64::new(0.0, s);
    }
    Ok((OperatorMatrix::from_array(x), OperatorMatrix::from_array(y)))
}

/// `⟨u|v⟩ = Σ conj(uₙ)·vₙ`.
pub fn overlap(u: &FockVector, v: &FockVector) -> Result<C64> {
    check_cutoffs(u.cutoff(), v.cutoff())?;
    Ok(u.amps
        .iter()
        .zip(v.amps.iter())
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// `(|α⟩ + sign·|−α⟩)` normalized by its analytic norm `√(2(1 + sign·e^{−2|α|²}))`.
pub fn cat_state(alpha: ComplexPoint, sign: i32, cutoff: usize) -> Result<FockVector> {
    if sign != 1 && sign != -1 {
        return Err(Error::Domain(format!(
            "cat sign must be +1 or -1, got {sign}"
        )));
    }
    let plus = coherent_state(alpha, cutoff);
    let leakage = plus.leakage();
    if leakage > STATE_LEAKAGE_LIMIT {
        return Err(Error::CutoffTooSmall {
            cutoff,
            leakage,
            limit: STATE_LEAKAGE_LIMIT,
        });
    }
    let s = sign as f64;
    let norm_sqr = 2.0 * (1.0 + s * (-2.0 * alpha.norm_sqr()).exp());
    if norm_sqr < 1e-12 {
        return Err(Error::Domain(
            "odd cat state with vanishing amplitude".into(),
        ));
    }
    // |−α⟩ has amplitudes (−1)ⁿ times those of |α⟩.
    let inv = 1.0 / norm_sqr.sqrt();
    let amps = plus
        .amps
        .iter()
        .enumerate()
        .map(|(n, a)| {
            let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
            a * (1.0 + s * parity) * inv
        })
        .collect::<Array1<_>>();
    Ok(FockVector { amps })
}

/// Squeezed vacuum `S(r)|0⟩` squeezing `x̂`:
/// `Σ (−tanh r)^m √((2m)!)/(2^m m!) |2m⟩ / √(cosh r)`.
pub fn squeezed_vacuum(r: f64, cutoff: usize) -> Result<FockVector> {
    if !r.is_finite() {
        return Err(Error::Domain("non-finite squeezing parameter".into()));
    }
    let t = r.tanh();
    let mut amps = Array1::zeros(cutoff + 1);
    let mut cur = 1.0 / r.cosh().sqrt();
    amps[0] = C64::new(cur, 0.0);
    let mut m = 1;
    while 2 * m <= cutoff {
        let mf = m as f64;
        cur *= -t * ((2.0 * mf - 1.0) / (2.0 * mf)).sqrt();
        amps[2 * m] = C64::new(cur, 0.0);
        m += 1;
    }
    let v = FockVector { amps };
    let leakage = v.leakage();
    if leakage > STATE_LEAKAGE_LIMIT {
        return Err(Error::CutoffTooSmall {
            cutoff,
            leakage,
            limit: STATE_LEAKAGE_LIMIT,
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// exp(βa† − β*a) by Taylor series on an enlarged truncation.
    fn displacement_by_series(beta: C64, big: usize) -> Array2<C64> {
        let d = big + 1;
        let mut gen = Array2::<C64>::zeros((d, d));
        for n in 1..d {
            let s = (n as f64).sqrt();
            gen[[n, n - 1]] += beta * s;
            gen[[n - 1, n]] -= beta.conj() * s;
        }
        let mut term = Array2::<C64>::eye(d);
        let mut sum = term.clone();
        for k in 1..200 {
            term = term.dot(&gen) / k as f64;
            sum += &term;
            if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-18 {
                break;
            }
        }
        sum
    }

    #[test]
    fn number_state_basis() {
        let v = number_state(0, 4).unwrap();
        assert_eq!(
            v.to_vec(),
            vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]
        );
        let v = number_state(2, 4).unwrap();
        assert_eq!(v.amplitude(2), c(1., 0.));
        assert_eq!(v.norm_sqr(), 1.0);
        assert!(matches!(number_state(5, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn coherent_state_values() {
        assert_eq!(
            coherent_state(ComplexPoint::ZERO, 6),
            number_state(0, 6).unwrap()
        );
        let a1 = coherent_state(ComplexPoint::real(1.0), 10);
        assert!((a1.amplitude(0).re - (-0.5f64).exp()).abs() < 1e-15);
        assert!((a1.amplitude(0).re - 0.60653).abs() < 1e-5);

        // Poisson tail oracle: Σ_{n>30} e^{−4} 4ⁿ/n!
        let mut term = (-4.0f64).exp();
        let mut tail = 0.0;
        for n in 1..200 {
            term *= 4.0 / n as f64;
            if n > 30 {
                tail += term;
            }
        }
        let leak = coherent_state(ComplexPoint::real(2.0), 30).leakage();
        assert!(tail < 1e-9);
        assert!(leak < 1e-9);
        assert!((leak - tail).abs() < 1e-14);
    }

    #[test]
    fn coherent_leakage_monotone_in_cutoff() {
        let alpha = ComplexPoint::new(1.5, -0.7);
        let mut prev = f64::INFINITY;
        for cutoff in 0..40 {
            let leak = coherent_state(alpha, cutoff).leakage();
            assert!(leak <= prev);
            prev = leak;
        }
    }

    #[test]
    fn displacement_identity_and_vacuum_element() {
        let d = displacement_matrix(ComplexPoint::ZERO, 5);
        assert_eq!(d, OperatorMatrix::identity(5));
        let d = displacement_matrix(ComplexPoint::real(1.0), 8);
        assert!((d.get(0, 0) - c((-0.5f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn displacement_matches_series_exponential() {
        for beta in [c(1.0, 0.0), c(0.3, -0.8), c(-1.2, 0.5)] {
            let series = displacement_by_series(beta, 80);
            let d = displacement_matrix(ComplexPoint::from(beta), 12);
            for m in 0..=12 {
                for n in 0..=12 {
                    assert!(
                        (d.get(m, n) - series[[m, n]]).norm() < 1e-12,
                        "beta={beta} m={m} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn displacement_column_zero_is_coherent_state() {
        let beta = ComplexPoint::new(1.3, 0.9);
        let d = displacement_matrix(beta, 30);
        let coh = coherent_state(beta, 30);
        for m in 0..=30 {
            assert!((d.get(m, 0) - coh.amplitude(m)).norm() < 1e-12);
        }
        let col = displaced_number_state(beta, 0, 30).unwrap();
        assert!(col.max_abs_diff(&coh) < 1e-12);
    }

    #[test]
    fn displaced_number_state_basics() {
        assert_eq!(
            displaced_number_state(ComplexPoint::ZERO, 3, 6).unwrap(),
            number_state(3, 6).unwrap()
        );
        let v = displaced_number_state(ComplexPoint::real(1.0), 2, 40).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-9);
        assert!(displaced_number_state(ComplexPoint::real(1.0), 7, 6).is_err());
    }

    #[test]
    fn displacement_adjoint_consistency() {
        for beta in [
            ComplexPoint::new(0.4, 0.1),
            ComplexPoint::new(-1.7, 0.9),
            ComplexPoint::new(0.0, 2.0),
        ] {
            let dp = displacement_matrix(beta, 30);
            let dm = displacement_matrix(-beta, 30);
            assert!(dm.max_abs_diff(&dp.dagger(), None) <= 1e-15);
        }
    }

    #[test]
    fn displacement_unitarity_and_composition_on_interior() {
        for cutoff in [20usize, 40] {
            for beta in [
                ComplexPoint::new(0.5, 0.5),
                ComplexPoint::new(-1.0, 1.0),
                ComplexPoint::new(0.0, -2.0),
            ] {
                let interior = interior_dim(cutoff, beta);
                let d = displacement_matrix(beta, cutoff);
                let dd = d.dagger().matmul(&d).unwrap();
                let comp = d.matmul(&displacement_matrix(-beta, cutoff)).unwrap();
                let id = OperatorMatrix::identity(cutoff);
                if interior > 0 {
                    // D†D is only exact where D's columns stay inside the truncation.
                    let ok_dim = (0..=cutoff)
                        .take_while(|&n| {
                            displaced_number_state(beta, n, cutoff).unwrap().leakage() < 1e-10
                        })
                        .count()
                        .min(interior);
                    assert!(dd.max_abs_diff(&id, Some(ok_dim)) < 1e-8);
                    assert!(comp.max_abs_diff(&id, Some(ok_dim)) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn displacement_large_cutoff_stays_finite() {
        let d = displacement_block(ComplexPoint::new(3.0, -1.0), 220, 220);
        assert!(d.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        // columns with support (√n + |β|)² well inside the cutoff
        for n in 0..100 {
            let col: f64 = d.column(n).iter().map(|z| z.norm_sqr()).sum();
            assert!((col - 1.0).abs() < 1e-9, "n={n} col={col}");
        }
    }

    #[test]
    fn quadrature_operator_properties() {
        let (x, y) = quadrature_operators(10).unwrap();
        assert!(x.is_hermitian() && y.is_hermitian());
        let vac = number_state(0, 10).unwrap();
        assert_eq!(x.expectation(&vac).unwrap(), c(0.0, 0.0));
        let x2 = x.matmul(&x).unwrap();
        assert!((x2.expectation(&vac).unwrap() - c(0.25, 0.0)).norm() < 1e-15);
        let comm = x.matmul(&y).unwrap().entries() - y.matmul(&x).unwrap().entries();
        for m in 0..10 {
            for n in 0..10 {
                let want = if m == n { c(0.0, 0.5) } else { c(0.0, 0.0) };
                assert!((comm[[m, n]] - want).norm() < 1e-14);
            }
        }
        assert!(quadrature_operators(0).is_err());
    }

    #[test]
    fn coherent_quadrature_means_and_number() {
        let alpha = ComplexPoint::new(0.7, -1.1);
        let v = coherent_state(alpha, 40);
        let (x, y) = quadrature_operators(40).unwrap();
        assert!((x.expectation(&v).unwrap().re - 0.7).abs() < 1e-10);
        assert!((y.expectation(&v).unwrap().re + 1.1).abs() < 1e-10);
        let n = number_operator(40).expectation(&v).unwrap().re;
        assert!((n - alpha.norm_sqr()).abs() < 1e-10);
        assert!((v.coherent_centroid().to_c64() - alpha.to_c64()).norm() < 1e-10);
    }

    #[test]
    fn overlaps() {
        let e0 = number_state(0, 3).unwrap();
        let e1 = number_state(1, 3).unwrap();
        assert_eq!(overlap(&e0, &e0).unwrap(), c(1.0, 0.0));
        assert_eq!(overlap(&e0, &e1).unwrap(), c(0.0, 0.0));
        let a = coherent_state(ComplexPoint::real(1.0), 40);
        let b = coherent_state(ComplexPoint::real(-1.0), 40);
        let ov = overlap(&a, &b).unwrap().norm();
        assert!((ov - (-2.0f64).exp()).abs() < 1e-12);
        assert!((ov - 0.13534).abs() < 1e-5);
        assert!(matches!(
            overlap(&e0, &number_state(0, 4).unwrap()),
            Err(Error::CutoffMismatch { .. })
        ));
    }

    #[test]
    fn cat_and_squeezed_states() {
        let cat = cat_state(ComplexPoint::ZERO, 1, 10).unwrap();
        assert!(cat.max_abs_diff(&number_state(0, 10).unwrap()) < 1e-15);
        let cat = cat_state(ComplexPoint::new(1.5, 0.5), -1, 40).unwrap();
        assert!((cat.norm_sqr() - 1.0).abs() < 1e-10);
        assert!(cat.amplitudes().iter().step_by(2).all(|a| a.norm() == 0.0));
        assert!(matches!(
            cat_state(ComplexPoint::real(4.0), 1, 10),
            Err(Error::CutoffTooSmall { .. })
        ));
        assert!(cat_state(ComplexPoint::ZERO, -1, 10).is_err());

        let sq = squeezed_vacuum(0.0, 10).unwrap();
        assert!(sq.max_abs_diff(&number_state(0, 10).unwrap()) < 1e-15);
        let sq = squeezed_vacuum(0.5, 40).unwrap();
        let (x, y) = quadrature_operators(40).unwrap();
        let vx = x.matmul(&x).unwrap().expectation(&sq).unwrap().re;
        let vy = y.matmul(&y).unwrap().expectation(&sq).unwrap().re;
        assert!((vx - 0.25 * (-1.0f64).exp()).abs() < 1e-9);
        assert!((vx - 0.09197).abs() < 1e-5);
        assert!((vy - 0.25 * 1.0f64.exp()).abs() < 1e-9);
        assert!(matches!(
            squeezed_vacuum(2.0, 10),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn zero_vector_cannot_be_normalized() {
        assert!(FockVector::zeros(3).normalized().is_err());
        assert!(FockVector::zeros(3).require_normalized().is_err());
    }
}
