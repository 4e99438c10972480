//! The finite-entanglement teleportation channel.
//!
//! The resource is the two-mode state `√(1−q²) Σ qⁿ |n;n⟩`, kept only as its
//! Schmidt coefficients. An outcome `β` of the joint quadrature measurement
//! maps the input to `T̂(β)|ψ⟩` with
//!
//! ```text
//! T̂(β) = √((1−q²)/π) Σₙ qⁿ D̂(β)|n⟩⟨n|D̂(−β)
//! ```
//!
//! whose squared norm is the outcome density `P(β)`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{
    coherent_state, displacement_block, interior_dim, ComplexPoint, FockVector, OperatorMatrix,
};
use crate::quad::{make_grid, Integral, QuadGrid, DEFAULT_POINTS};

/// Largest `q` accepted without an explicit override.
pub const Q_DEFAULT_MAX: f64 = 0.95;

/// Outcome densities below this are treated as underflow.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    q: f64,
    cutoff: usize,
}

impl ChannelParams {
    /// Validates `0 ≤ q ≤ 0.95`.
    pub fn new(q: f64, cutoff: usize) -> Result<Self> {
        if !q.is_finite() || !(0.0..=Q_DEFAULT_MAX).contains(&q) {
            return Err(Error::InvalidParams(format!(
                "q must lie in [0, {Q_DEFAULT_MAX}], got {q}"
            )));
        }
        Ok(ChannelParams { q, cutoff })
    }

    /// Accepts `0 ≤ q < 1` provided the cutoff is at least ten times the
    /// thermal occupation `q²/(1−q²)` of each resource mode.
    pub fn with_high_q(q: f64, cutoff: usize) -> Result<Self> {
        if !q.is_finite() || !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParams(format!(
                "q must lie in [0, 1), got {q}"
            )));
        }
        let occupation = q * q / (1.0 - q * q);
        if (cutoff as f64) < 10.0 * occupation {
            return Err(Error::InvalidParams(format!(
                "cutoff {cutoff} is below 10x the resource occupation {occupation:.3} for q={q}"
            )));
        }
        Ok(ChannelParams { q, cutoff })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `√((1−q²)/π)`, the largest eigenvalue of `T̂(β)`.
    pub fn transfer_scale(&self) -> f64 {
        ((1.0 - self.q * self.q) / PI).sqrt()
    }

    /// Eigenvalues `√((1−q²)/π)·qⁿ` for `n = 0..=cutoff`.
    pub fn transfer_eigenvalues(&self) -> Vec<f64> {
        let c = self.transfer_scale();
        let mut out = Vec::with_capacity(self.cutoff + 1);
        let mut qn = 1.0;
        for _ in 0..=self.cutoff {
            out.push(c * qn);
            qn *= self.q;
        }
        out
    }
}

/// Schmidt coefficients `cₙ = √(1−q²)·qⁿ` of the two-mode resource.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtCoefficients {
    coeffs: Vec<f64>,
}

impl SchmidtCoefficients {
    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    /// `Σ cₙ²`, equal to `1 − q^{2(N+1)}` at cutoff `N`.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Mean photon number per mode, `Σ n cₙ²`.
    pub fn mean_photon_number(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c * c)
            .sum()
    }
}

pub fn epr_schmidt(params: &ChannelParams) -> SchmidtCoefficients {
    let s = (1.0 - params.q * params.q).sqrt();
    let mut coeffs = Vec::with_capacity(params.cutoff + 1);
    let mut qn = 1.0;
    for _ in 0..=params.cutoff {
        coeffs.push(s * qn);
        qn *= params.q;
    }
    SchmidtCoefficients { coeffs }
}

/// `Σⱼ λⱼ D[k][j] conj(D[l][j])`, filled on and above the diagonal and
/// mirrored, so the result is Hermitian bit for bit.
fn conjugate_diagonal(d: &Array2<C64>, lambda: &[f64]) -> OperatorMatrix {
    let dim = d.nrows();
    let mut out = Array2::<C64>::zeros((dim, dim));
    for k in 0..dim {
        let mut diag = 0.0;
        for j in 0..dim {
            diag += lambda[j] * d[[k, j]].norm_sqr();
        }
        out[[k, k]] = C64::new(diag, 0.0);
        for l in (k + 1)..dim {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..dim {
                acc += d[[k, j]] * d[[l, j]].conj() * lambda[j];
            }
            out[[k, l]] = acc;
            out[[l, k]] = acc.conj();
        }
    }
    OperatorMatrix::from_array(out)
}

fn hermitian_outer(v: &Array1<C64>, w: f64) -> Array2<C64> {
    let dim = v.len();
    let mut out = Array2::<C64>::zeros((dim, dim));
    for k in 0..dim {
        out[[k, k]] = C64::new(w * v[k].norm_sqr(), 0.0);
        for l in (k + 1)..dim {
            let z = v[k] * v[l].conj() * w;
            out[[k, l]] = z;
            out[[l, k]] = z.conj();
        }
    }
    out
}

/// `T̂(β) = D(β)·diag(√((1−q²)/π)·qⁿ)·D(β)†`.
pub fn transfer_operator(beta: ComplexPoint, params: &ChannelParams) -> OperatorMatrix {
    let dim = params.cutoff + 1;
    let d = displacement_block(beta, dim, dim);
    conjugate_diagonal(&d, &params.transfer_eigenvalues())
}

/// `T̂²(β) = D(β)·diag(((1−q²)/π)·q²ⁿ)·D(β)†`, formed from the eigenvalues
/// rather than by squaring the truncated matrix.
pub fn transfer_operator_squared(beta: ComplexPoint, params: &ChannelParams) -> OperatorMatrix {
    let dim = params.cutoff + 1;
    let d = displacement_block(beta, dim, dim);
    let lambda: Vec<f64> = params
        .transfer_eigenvalues()
        .iter()
        .map(|l| l * l)
        .collect();
    conjugate_diagonal(&d, &lambda)
}

/// Half-width around `β` that the coherent-state integral needs.
pub fn coherent_rep_radius(q: f64) -> f64 {
    4.0 * (q / (1.0 - q)).sqrt() + 2.0
}

/// `T̂(β)` from its coherent-state form
/// `√((1−q²)/(π³q²)) ∫d²α exp(−((1−q)/q)|α−β|²) |α⟩⟨α|`.
pub fn transfer_operator_coherent_rep(
    beta: ComplexPoint,
    params: &ChannelParams,
    grid: &QuadGrid,
) -> Result<Integral<OperatorMatrix>> {
    let q = params.q;
    if q <= 0.0 {
        return Err(Error::Domain(
            "coherent-state representation is singular at q = 0".into(),
        ));
    }
    let pref = ((1.0 - q * q) / (PI * PI * PI * q * q)).sqrt();
    let rate = (1.0 - q) / q;
    let cutoff = params.cutoff;
    let integral = grid.integrate(|alpha| {
        let w = pref * (-rate * (alpha - beta).norm_sqr()).exp();
        let v = coherent_state(alpha, cutoff);
        OperatorMatrix::from_array(hermitian_outer(v.amplitudes(), w))
    });
    if !grid.covers(beta, coherent_rep_radius(q)) {
        return Err(Error::NonConverged {
            boundary_mass: integral.boundary_mass.max(f64::MIN_POSITIVE),
            limit: crate::quad::BOUNDARY_MASS_LIMIT,
        });
    }
    integral.require_converged()
}

/// `⟨m|D̂(−β)|ψ⟩` for `m = 0..=cutoff`, given the block of `D̂(β)`.
fn displaced_components(d: &Array2<C64>, psi: &FockVector) -> Array1<C64> {
    let amps = psi.amplitudes();
    let dim = d.nrows();
    let mut out = Array1::<C64>::zeros(dim);
    for m in 0..dim {
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..dim {
            acc += d[[n, m]].conj() * amps[n];
        }
        out[m] = acc;
    }
    out
}

/// Per-outcome quantities shared by probability, fidelity and output.
struct Outcome {
    /// `⟨m|D̂(−β)|ψ⟩`
    displaced: Array1<C64>,
    d: Array2<C64>,
    lambda: Vec<f64>,
}

impl Outcome {
    fn new(psi: &FockVector, beta: ComplexPoint, params: &ChannelParams) -> Result<Self> {
        crate::fock::check_cutoffs(psi.cutoff(), params.cutoff)?;
        let dim = params.cutoff + 1;
        let d = displacement_block(beta, dim, dim);
        let displaced = displaced_components(&d, psi);
        Ok(Outcome {
            displaced,
            d,
            lambda: params.transfer_eigenvalues(),
        })
    }

    /// `Σ λₘ² |⟨m|D̂(−β)|ψ⟩|²`
    fn probability(&self) -> f64 {
        self.displaced
            .iter()
            .zip(&self.lambda)
            .map(|(a, l)| l * l * a.norm_sqr())
            .sum()
    }

    /// `⟨ψ|T̂(β)|ψ⟩ = Σ λₘ |⟨m|D̂(−β)|ψ⟩|²`
    fn transfer_expectation(&self) -> f64 {
        self.displaced
            .iter()
            .zip(&self.lambda)
            .map(|(a, l)| l * a.norm_sqr())
            .sum()
    }

    /// Unnormalized `T̂(β)|ψ⟩`.
    fn output(&self) -> Array1<C64> {
        let scaled: Array1<C64> = self
            .displaced
            .iter()
            .zip(&self.lambda)
            .map(|(a, l)| a * *l)
            .collect();
        self.d.dot(&scaled)
    }
}

/// Outcome density `P(β) = ((1−q²)/π) Σ q²ⁿ |⟨n|D̂(−β)|ψ⟩|²`.
pub fn measurement_probability(
    psi: &FockVector,
    beta: ComplexPoint,
    params: &ChannelParams,
) -> Result<f64> {
    psi.require_normalized()?;
    Ok(Outcome::new(psi, beta, params)?.probability())
}

/// One teleportation event.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportResult {
    pub beta: ComplexPoint,
    /// `‖T̂(β)|ψ⟩‖²`
    pub weight: f64,
    /// Normalized output; `None` when the weight underflowed.
    pub output: Option<FockVector>,
    pub conditional_fidelity: Option<f64>,
}

impl TeleportResult {
    pub fn is_underflow(&self) -> bool {
        self.output.is_none()
    }
}

pub fn teleport_pure(
    psi: &FockVector,
    beta: ComplexPoint,
    params: &ChannelParams,
) -> Result<TeleportResult> {
    psi.require_normalized()?;
    let outcome = Outcome::new(psi, beta, params)?;
    let out = outcome.output();
    let weight: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    if weight < UNDERFLOW_THRESHOLD {
        return Ok(TeleportResult {
            beta,
            weight,
            output: None,
            conditional_fidelity: None,
        });
    }
    let p = outcome.probability();
    let fidelity = fidelity_ratio(outcome.transfer_expectation(), p);
    let output = FockVector::from_array(out.mapv(|a| a / weight.sqrt()));
    Ok(TeleportResult {
        beta,
        weight,
        output: Some(output),
        conditional_fidelity: fidelity,
    })
}

fn fidelity_ratio(expectation: f64, probability: f64) -> Option<f64> {
    if probability < UNDERFLOW_THRESHOLD {
        None
    } else {
        Some((expectation * expectation / probability).clamp(0.0, 1.0))
    }
}

/// `F(β) = |⟨ψ|T̂(β)|ψ⟩|² / P(β)`.
pub fn conditional_fidelity(
    psi: &FockVector,
    beta: ComplexPoint,
    params: &ChannelParams,
) -> Result<f64> {
    psi.require_normalized()?;
    let outcome = Outcome::new(psi, beta, params)?;
    let p = outcome.probability();
    fidelity_ratio(outcome.transfer_expectation(), p).ok_or(Error::Underflow { weight: p })
}

/// `P(β)` and `F(β)` together, sharing one displacement evaluation.
/// The fidelity is `None` on underflow.
pub fn probability_and_fidelity(
    psi: &FockVector,
    beta: ComplexPoint,
    params: &ChannelParams,
) -> Result<(f64, Option<f64>)> {
    psi.require_normalized()?;
    let outcome = Outcome::new(psi, beta, params)?;
    let p = outcome.probability();
    Ok((p, fidelity_ratio(outcome.transfer_expectation(), p)))
}

/// Grid centred on the coherent centroid of `psi`, wide enough for every
/// Gaussian factor of the outcome statistics.
pub fn default_grid(psi: &FockVector, params: &ChannelParams) -> Result<QuadGrid> {
    let center = psi.coherent_centroid();
    let spread = (psi.mean_photon_number() - center.norm_sqr())
        .max(0.0)
        .sqrt();
    let extent = spread + 4.0 / (1.0 - params.q * params.q).sqrt() + 2.0;
    make_grid(center, extent, DEFAULT_POINTS)
}

/// `F_av = ∫d²β |⟨ψ|T̂(β)|ψ⟩|²`.
pub fn average_fidelity(
    psi: &FockVector,
    params: &ChannelParams,
    grid: &QuadGrid,
) -> Result<Integral<f64>> {
    psi.require_normalized()?;
    crate::fock::check_cutoffs(psi.cutoff(), params.cutoff)?;
    let integral = grid.integrate(|beta| {
        let t = Outcome::new(psi, beta, params)
            .map(|o| o.transfer_expectation())
            .unwrap_or(0.0);
        t * t
    });
    integral.require_converged()
}

/// `∫d²β P(β)`; one for any normalized input when the grid is adequate.
pub fn total_probability(
    psi: &FockVector,
    params: &ChannelParams,
    grid: &QuadGrid,
) -> Result<Integral<f64>> {
    psi.require_normalized()?;
    crate::fock::check_cutoffs(psi.cutoff(), params.cutoff)?;
    Ok(grid.integrate(|beta| {
        Outcome::new(psi, beta, params)
            .map(|o| o.probability())
            .unwrap_or(0.0)
    }))
}

/// `ρ_out = ∫d²β T̂(β)|ψ⟩⟨ψ|T̂(β)`.
///
/// Accurate on levels the teleported outputs do not push past the cutoff;
/// the trace falls short of one by the output leakage.
pub fn output_density_matrix(
    psi: &FockVector,
    params: &ChannelParams,
    grid: &QuadGrid,
) -> Result<Integral<OperatorMatrix>> {
    psi.require_normalized()?;
    crate::fock::check_cutoffs(psi.cutoff(), params.cutoff)?;
    let dim = params.cutoff + 1;
    let integral = grid.integrate(|beta| match Outcome::new(psi, beta, params) {
        Ok(o) => OperatorMatrix::from_array(hermitian_outer(&o.output(), 1.0)),
        Err(_) => OperatorMatrix::from_array(Array2::zeros((dim, dim))),
    });
    integral.require_converged()
}

/// `∫d²β T̂²(β)`, which equals the identity (up to `q^{2(N+1)}`) when the
/// grid covers the displaced-number-state support of the levels of interest.
pub fn trace_preservation_integral(
    params: &ChannelParams,
    grid: &QuadGrid,
) -> Integral<OperatorMatrix> {
    grid.integrate(|beta| transfer_operator_squared(beta, params))
}

/// `(1/π) ∫d²β D̂(β)|ψ_R*⟩⟨ψ_R*|D̂†(β)`, where `|ψ_R*⟩` has conjugated
/// number-basis amplitudes. Callers compare the value with the identity on
/// an interior block; non-convergence is reported through the diagnostic.
pub fn reference_povm_completeness(
    psi_r: &FockVector,
    grid: &QuadGrid,
) -> Result<Integral<OperatorMatrix>> {
    psi_r.require_normalized()?;
    let conj = psi_r.conjugate();
    let dim = psi_r.dim();
    Ok(grid.integrate(|beta| {
        let d = displacement_block(beta, dim, dim);
        let v = d.dot(conj.amplitudes());
        OperatorMatrix::from_array(hermitian_outer(&v, 1.0 / PI))
    }))
}

/// Grid for completeness integrals over the leading `interior` levels.
pub fn completeness_grid(psi_r: &FockVector, interior: usize) -> Result<QuadGrid> {
    let extent = (interior as f64).sqrt() + psi_r.mean_photon_number().sqrt() + 6.0;
    make_grid(ComplexPoint::ZERO, extent, DEFAULT_POINTS)
}

/// Interior block used for the accuracy claims of integrated operators.
pub fn integrated_interior_dim(cutoff: usize) -> usize {
    interior_dim(cutoff, ComplexPoint::ZERO).max(1)
}
