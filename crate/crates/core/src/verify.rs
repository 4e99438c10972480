//! Verification measurements on teleported states.
//!
//! A verification basis is a discretized POVM `{w_V, |V⟩}` with
//! `Σ w_V |V⟩⟨V| ≈ 1`; completeness is checked numerically rather than
//! assumed. Joint statistics follow `P(β, V) = |⟨V|T̂(β)|ψ⟩|²`.
//!
//! For eight-port homodyne detection (`|V⟩ = |α⟩/√π`) each joint outcome
//! projects the input on a single coherent state:
//! `T̂(β)|α⟩/√π = κ·e^{iθ}|γ⟩` with `γ = β + q(α − β)`,
//! `κ = (√(1−q²)/π)·exp(−(1−q²)|α−β|²/2)` and `θ = (1−q)·Im(β*α)`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{transfer_operator, ChannelParams};
use crate::error::{Error, Result};
use crate::fock::{
    coherent_state, number_state, overlap, quadrature_operators, ComplexPoint, FockVector,
    OperatorMatrix,
};
use crate::quad::{make_grid, QuadGrid, BOUNDARY_MASS_LIMIT};
use crate::sampler::{mean_and_std_error, BetaSampler};

/// Completeness tolerance on the interior block.
pub const COMPLETENESS_TOL: f64 = 1e-4;

/// Default number of homodyne bins.
pub const HOMODYNE_POINTS: usize = 801;

/// `⟨x|n⟩ = (2/π)^{1/4} (2ⁿ n!)^{−1/2} Hₙ(√2 x) e^{−x²}` for `n = 0..=cutoff`,
/// by the normalized Hermite-function recurrence.
pub fn quadrature_amplitudes(x: f64, cutoff: usize) -> Result<FockVector> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite quadrature value {x}")));
    }
    Ok(FockVector::from_array(
        hermite_functions(x, cutoff).mapv(|h| C64::new(h, 0.0)),
    ))
}

fn hermite_functions(x: f64, cutoff: usize) -> Array1<f64> {
    let xi = std::f64::consts::SQRT_2 * x;
    let mut h = Array1::zeros(cutoff + 1);
    // 2^{1/4} h_n(ξ) with h_n the standard Hermite functions
    h[0] = (2.0 / PI).powf(0.25) * (-x * x).exp();
    if cutoff >= 1 {
        h[1] = std::f64::consts::SQRT_2 * xi * h[0];
    }
    for n in 1..cutoff {
        let nf = n as f64;
        h[n + 1] = (2.0 / (nf + 1.0)).sqrt() * xi * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
    }
    h
}

/// `⟨y|n⟩ = (−i)ⁿ ⟨x = y|n⟩` for the conjugate quadrature `ŷ`.
pub fn conjugate_quadrature_amplitudes(y: f64, cutoff: usize) -> Result<FockVector> {
    let h = quadrature_amplitudes(y, cutoff)?;
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
    ];
    Ok(FockVector::from_array(
        h.amplitudes()
            .iter()
            .enumerate()
            .map(|(n, a)| a * phases[n % 4])
            .collect(),
    ))
}

/// Evenly spaced homodyne bins with trapezoid weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineGrid {
    pub fn new(center: f64, half_width: f64, points: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 || points < 3 || points.is_multiple_of(2) {
            return Err(Error::Domain(
                "line grid needs positive width and odd points >= 3".into(),
            ));
        }
        let h = 2.0 * half_width / (points - 1) as f64;
        let nodes = (0..points)
            .map(|i| center - half_width + i as f64 * h)
            .collect();
        let weights = (0..points)
            .map(|i| {
                if i == 0 || i == points - 1 {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect();
        Ok(LineGrid { nodes, weights })
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Mean and variance of a density sampled on the nodes.
    pub fn moments(&self, density: &[f64]) -> (f64, f64, f64) {
        let mass = self.integrate(density);
        let mean = self
            .nodes
            .iter()
            .zip(density)
            .zip(&self.weights)
            .map(|((x, p), w)| w * x * p)
            .sum::<f64>()
            / mass;
        let var = self
            .nodes
            .iter()
            .zip(density)
            .zip(&self.weights)
            .map(|((x, p), w)| w * (x - mean).powi(2) * p)
            .sum::<f64>()
            / mass;
        (mass, mean, var)
    }
}

/// Turning point of the `n`-th Hermite function in `x` units.
fn turning_point(n: usize) -> f64 {
    ((2 * n + 1) as f64).sqrt() / std::f64::consts::SQRT_2
}

/// Homodyne grid for a state: mean ± 8 standard deviations of `x̂`, widened
/// to the Hermite support of the interior levels `n ≤ cutoff/2` plus margin.
pub fn homodyne_grid(psi: &FockVector) -> Result<LineGrid> {
    let cutoff = psi.cutoff().max(1);
    let (x, _) = quadrature_operators(cutoff)?;
    let psi = psi.with_cutoff(cutoff);
    let mean = x.expectation(&psi)?.re;
    let second = x.matmul(&x)?.expectation(&psi)?.re;
    let sd = (second - mean * mean).max(0.0).sqrt();
    let half = (8.0 * sd).max(turning_point(cutoff / 2) + 3.0 + mean.abs());
    LineGrid::new(mean, half, HOMODYNE_POINTS)
}

/// `p(x) = |Σₙ ⟨x|n⟩ψₙ|²` at each node.
pub fn homodyne_distribution(psi: &FockVector, x_nodes: &[f64]) -> Result<Vec<f64>> {
    psi.require_normalized()?;
    x_nodes
        .iter()
        .map(|&x| {
            let v = quadrature_amplitudes(x, psi.cutoff())?;
            Ok(overlap(&v, psi)?.norm_sqr())
        })
        .collect()
}

/// `p(x) = ⟨x|ρ|x⟩` for a density matrix.
pub fn homodyne_distribution_mixed(rho: &OperatorMatrix, x_nodes: &[f64]) -> Result<Vec<f64>> {
    x_nodes
        .iter()
        .map(|&x| {
            let v = quadrature_amplitudes(x, rho.cutoff())?;
            Ok(rho.expectation(&v)?.re)
        })
        .collect()
}

/// Density values on a 2D grid with their mass and boundary diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDensity {
    pub values: Vec<f64>,
    pub mass: f64,
    pub boundary_mass: f64,
}

impl GridDensity {
    pub fn converged(&self) -> bool {
        self.boundary_mass <= BOUNDARY_MASS_LIMIT
    }
}

fn density_on_grid(grid: &QuadGrid, f: impl Fn(ComplexPoint) -> f64 + Sync) -> GridDensity {
    let values: Vec<f64> = grid.nodes().iter().map(|&a| f(a)).collect();
    let integral = grid
        .integrate_values(&values)
        .expect("values sized to the grid");
    GridDensity {
        values,
        mass: integral.value,
        boundary_mass: integral.boundary_mass,
    }
}

/// Husimi density `Q(α) = |⟨α|ψ⟩|²/π` on the grid.
pub fn eight_port_distribution(psi: &FockVector, alpha_grid: &QuadGrid) -> Result<GridDensity> {
    psi.require_normalized()?;
    let cutoff = psi.cutoff();
    Ok(density_on_grid(alpha_grid, |a| {
        let v = coherent_state(a, cutoff);
        overlap(&v, psi).map(|o| o.norm_sqr() / PI).unwrap_or(0.0)
    }))
}

/// `Q(α) = ⟨α|ρ|α⟩/π` on the grid.
pub fn eight_port_distribution_mixed(rho: &OperatorMatrix, alpha_grid: &QuadGrid) -> GridDensity {
    let cutoff = rho.cutoff();
    density_on_grid(alpha_grid, |a| {
        let v = coherent_state(a, cutoff);
        rho.expectation(&v).map(|e| e.re / PI).unwrap_or(0.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    HomodyneX,
    HomodyneY,
    EightPort,
    Number,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homodyne-x" => Ok(BasisKind::HomodyneX),
            "homodyne-y" => Ok(BasisKind::HomodyneY),
            "eight-port" => Ok(BasisKind::EightPort),
            "number" => Ok(BasisKind::Number),
            other => Err(Error::Domain(format!(
                "unknown verification basis '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisKind::HomodyneX => "homodyne-x",
            BasisKind::HomodyneY => "homodyne-y",
            BasisKind::EightPort => "eight-port",
            BasisKind::Number => "number",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BasisNode {
    Quadrature(f64),
    Coherent(ComplexPoint),
    Number(usize),
}

/// Discretized verification POVM on a fixed cutoff.
#[derive(Debug, Clone)]
pub struct VerificationBasis {
    kind: BasisKind,
    nodes: Vec<BasisNode>,
    weights: Vec<f64>,
    /// Row `j` holds `⟨V_j|n⟩*`, i.e. the amplitudes of `|V_j⟩`.
    states: Array2<C64>,
    cutoff: usize,
}

impl VerificationBasis {
    pub fn homodyne_x(grid: &LineGrid, cutoff: usize) -> Result<Self> {
        Self::from_quadrature(BasisKind::HomodyneX, grid, cutoff)
    }

    pub fn homodyne_y(grid: &LineGrid, cutoff: usize) -> Result<Self> {
        Self::from_quadrature(BasisKind::HomodyneY, grid, cutoff)
    }

    fn from_quadrature(kind: BasisKind, grid: &LineGrid, cutoff: usize) -> Result<Self> {
        let mut states = Array2::zeros((grid.nodes.len(), cutoff + 1));
        for (j, &x) in grid.nodes.iter().enumerate() {
            let v = match kind {
                BasisKind::HomodyneY => conjugate_quadrature_amplitudes(x, cutoff)?.conjugate(),
                _ => quadrature_amplitudes(x, cutoff)?,
            };
            states.row_mut(j).assign(v.amplitudes());
        }
        Ok(VerificationBasis {
            kind,
            nodes: grid
                .nodes
                .iter()
                .map(|&x| BasisNode::Quadrature(x))
                .collect(),
            weights: grid.weights.clone(),
            states,
            cutoff,
        })
    }

    /// Coherent states `|α⟩` with weights `w_α/π` from the grid.
    pub fn eight_port(grid: &QuadGrid, cutoff: usize) -> Self {
        let mut states = Array2::zeros((grid.len(), cutoff + 1));
        for (j, &a) in grid.nodes().iter().enumerate() {
            states
                .row_mut(j)
                .assign(coherent_state(a, cutoff).amplitudes());
        }
        VerificationBasis {
            kind: BasisKind::EightPort,
            nodes: grid
                .nodes()
                .iter()
                .map(|&a| BasisNode::Coherent(a))
                .collect(),
            weights: grid.weights().iter().map(|w| w / PI).collect(),
            states,
            cutoff,
        }
    }

    pub fn number(cutoff: usize) -> Self {
        VerificationBasis {
            kind: BasisKind::Number,
            nodes: (0..=cutoff).map(BasisNode::Number).collect(),
            weights: vec![1.0; cutoff + 1],
            states: Array2::eye(cutoff + 1),
            cutoff,
        }
    }

    /// Default basis of the given kind for states at `cutoff`.
    pub fn default_for(kind: BasisKind, cutoff: usize) -> Result<Self> {
        match kind {
            BasisKind::Number => Ok(Self::number(cutoff)),
            BasisKind::HomodyneX | BasisKind::HomodyneY => {
                let half = turning_point(cutoff / 2) + 3.0;
                let grid = LineGrid::new(0.0, half.max(4.0), HOMODYNE_POINTS)?;
                Self::from_quadrature(kind, &grid, cutoff)
            }
            BasisKind::EightPort => {
                let extent = ((cutoff / 2) as f64).sqrt() + 6.0;
                Ok(Self::eight_port(
                    &make_grid(ComplexPoint::ZERO, extent, 121)?,
                    cutoff,
                ))
            }
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn nodes(&self) -> &[BasisNode] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_V |V⟩⟨V|`.
    pub fn completeness_operator(&self) -> OperatorMatrix {
        let d = self.cutoff + 1;
        let mut out = Array2::<C64>::zeros((d, d));
        for (row, &w) in self.states.rows().into_iter().zip(&self.weights) {
            for k in 0..d {
                for l in 0..d {
                    out[[k, l]] += row[k] * row[l].conj() * w;
                }
            }
        }
        OperatorMatrix::from_array(out)
    }

    /// Max deviation of `Σ w_V |V⟩⟨V|` from the identity on levels `n ≤ cutoff/2`.
    pub fn completeness_deviation(&self) -> f64 {
        let interior = self.cutoff / 2 + 1;
        self.completeness_operator()
            .max_abs_diff(&OperatorMatrix::identity(self.cutoff), Some(interior))
    }

    pub fn require_complete(&self) -> Result<f64> {
        let dev = self.completeness_deviation();
        if dev < COMPLETENESS_TOL {
            Ok(dev)
        } else {
            Err(Error::NonConverged {
                boundary_mass: dev,
                limit: COMPLETENESS_TOL,
            })
        }
    }

    /// `|⟨V_j|φ⟩|²` for every basis element.
    pub fn probabilities(&self, phi: &FockVector) -> Result<Vec<f64>> {
        crate::fock::check_cutoffs(self.cutoff, phi.cutoff())?;
        Ok(self
            .states
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(phi.amplitudes())
                    .map(|(v, a)| v.conj() * a)
                    .sum::<C64>()
                    .norm_sqr()
            })
            .collect())
    }

    /// `⟨V_j|ρ|V_j⟩` for every basis element.
    pub fn probabilities_mixed(&self, rho: &OperatorMatrix) -> Result<Vec<f64>> {
        crate::fock::check_cutoffs(self.cutoff, rho.cutoff())?;
        let m = rho.entries();
        Ok(self
            .states
            .rows()
            .into_iter()
            .map(|row| {
                let rv = m.dot(&row);
                row.iter()
                    .zip(rv.iter())
                    .map(|(v, w)| v.conj() * w)
                    .sum::<C64>()
                    .re
            })
            .collect())
    }
}

/// Joint table of `P(β_i, V_j) = |⟨V_j|T̂(β_i)|ψ⟩|²`.
///
/// `values[i][j]` is a density in `β` and, for continuous bases, in `V`; the
/// basis weights turn sums over `j` into integrals.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub values: Array2<f64>,
    pub beta_nodes: Vec<ComplexPoint>,
    pub beta_weights: Vec<f64>,
    pub basis_weights: Vec<f64>,
    /// `Σ_j w_j P(β_i, V_j)`, which reproduces `P(β_i)`.
    pub beta_marginal: Vec<f64>,
    /// `Σ_i w_i P(β_i, V_j)`, the teleported verification statistics `P(V_j)`.
    pub verification_marginal: Vec<f64>,
    pub total_mass: f64,
    pub beta_boundary_mass: f64,
}

pub fn joint_distribution(
    psi: &FockVector,
    params: &ChannelParams,
    basis: &VerificationBasis,
    beta_grid: &QuadGrid,
) -> Result<JointDistribution> {
    psi.require_normalized()?;
    crate::fock::check_cutoffs(psi.cutoff(), params.cutoff())?;
    crate::fock::check_cutoffs(basis.cutoff(), params.cutoff())?;
    basis.require_complete()?;
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        beta_grid
            .nodes()
            .par_iter()
            .map(|&beta| {
                let out = transfer_operator(beta, params).apply(psi)?;
                basis.probabilities(&out)
            })
            .collect::<Result<_>>()?
    };
    let nb = rows.len();
    let nv = basis.len();
    let mut values = Array2::zeros((nb, nv));
    for (i, r) in rows.iter().enumerate() {
        values.row_mut(i).assign(&Array1::from(r.clone()));
    }
    let beta_marginal: Vec<f64> = values
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(basis.weights()).map(|(p, w)| p * w).sum())
        .collect();
    let verification_marginal: Vec<f64> = (0..nv)
        .map(|j| {
            values
                .column(j)
                .iter()
                .zip(beta_grid.weights())
                .map(|(p, w)| p * w)
                .sum()
        })
        .collect();
    let beta_integral = beta_grid.integrate_values(&beta_marginal)?;
    Ok(JointDistribution {
        values,
        beta_nodes: beta_grid.nodes().to_vec(),
        beta_weights: beta_grid.weights().to_vec(),
        basis_weights: basis.weights().to_vec(),
        beta_marginal,
        verification_marginal,
        total_mass: beta_integral.value,
        beta_boundary_mass: beta_integral.boundary_mass,
    })
}

/// The eight-port effective measurement state for outcomes `(β, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveState {
    /// `(√(1−q²)/π)·exp(−(1−q²)|α−β|²/2)`
    pub prefactor: f64,
    pub gamma: ComplexPoint,
    /// `(1−q)·Im(β*α)`, the phase carried by the displacement products.
    pub phase: f64,
    /// `e^{iθ}|γ⟩`, truncated at the channel cutoff.
    pub state: FockVector,
}

pub fn reconstruct_gamma(beta: ComplexPoint, alpha: ComplexPoint, q: f64) -> ComplexPoint {
    beta + (alpha - beta).scale(q)
}

/// Satisfies `T̂(β)|α⟩/√π = prefactor · state`.
pub fn effective_measurement_state(
    beta: ComplexPoint,
    alpha: ComplexPoint,
    params: &ChannelParams,
) -> EffectiveState {
    let q = params.q();
    let s = 1.0 - q * q;
    let prefactor = s.sqrt() / PI * (-0.5 * s * (alpha - beta).norm_sqr()).exp();
    let gamma = reconstruct_gamma(beta, alpha, q);
    let phase = (1.0 - q) * (beta.to_c64().conj() * alpha.to_c64()).im;
    let state = coherent_state(gamma, params.cutoff()).scaled(C64::from_polar(1.0, phase));
    EffectiveState {
        prefactor,
        gamma,
        phase,
        state,
    }
}

/// One simulated teleport-then-eight-port-verify event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EightPortShot {
    pub beta: ComplexPoint,
    pub alpha: ComplexPoint,
    pub gamma: ComplexPoint,
}

/// Draws `(β, α)` from `P(β, α)`: `β` from `P(β)`, then `α` from the Husimi
/// density of the normalized teleported output.
pub fn sample_eight_port<R: Rng + ?Sized>(
    psi: &FockVector,
    params: &ChannelParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<EightPortShot>> {
    let beta_sampler = BetaSampler::new(psi, params)?;
    let classical = ChannelParams::new(0.0, params.cutoff())?;
    let mut shots = Vec::with_capacity(n);
    for _ in 0..n {
        let beta = beta_sampler.draw(rng)?;
        let out = transfer_operator(beta, params).apply(psi)?;
        let out = out.normalized()?;
        // at q = 0 the outcome density is the Husimi density
        let alpha = BetaSampler::new(&out, &classical)?.draw(rng)?;
        shots.push(EightPortShot {
            beta,
            alpha,
            gamma: reconstruct_gamma(beta, alpha, params.q()),
        });
    }
    Ok(shots)
}

/// Mean and covariance of a distribution on the plane, as
/// `(mean, [var_re, var_im, cov])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneMoments {
    pub mean: ComplexPoint,
    pub var_re: f64,
    pub var_im: f64,
    pub cov: f64,
}

/// Husimi moments from the state: `E[γ] = ⟨a⟩`, `E[|γ|²] = ⟨aa†⟩`,
/// `E[γ²] = ⟨a²⟩`.
pub fn husimi_moments(psi: &FockVector) -> PlaneMoments {
    let mu = psi.coherent_centroid();
    let anti = psi.mean_photon_number() + psi.norm_sqr();
    let a2 = psi.second_moment_a();
    PlaneMoments {
        mean: mu,
        var_re: 0.5 * (anti + a2.re) - mu.re * mu.re,
        var_im: 0.5 * (anti - a2.re) - mu.im * mu.im,
        cov: 0.5 * a2.im - mu.re * mu.im,
    }
}

/// Sample moments with the standard errors of `(mean.re, mean.im, var_re, var_im, cov)`.
pub fn sample_moments(points: &[ComplexPoint]) -> (PlaneMoments, [f64; 5]) {
    let (mr, se_mr) = mean_and_std_error(points.iter().map(|p| p.re));
    let (mi, se_mi) = mean_and_std_error(points.iter().map(|p| p.im));
    let (vr, se_vr) = mean_and_std_error(points.iter().map(|p| (p.re - mr).powi(2)));
    let (vi, se_vi) = mean_and_std_error(points.iter().map(|p| (p.im - mi).powi(2)));
    let (cv, se_cv) = mean_and_std_error(points.iter().map(|p| (p.re - mr) * (p.im - mi)));
    (
        PlaneMoments {
            mean: ComplexPoint::new(mr, mi),
            var_re: vr,
            var_im: vi,
            cov: cv,
        },
        [se_mr, se_mi, se_vr, se_vi, se_cv],
    )
}

/// Coherent and number states used by the verification self-tests.
pub fn reference_states(cutoff: usize) -> Result<Vec<FockVector>> {
    Ok(vec![
        number_state(0, cutoff)?,
        number_state(1.min(cutoff), cutoff)?,
        coherent_state(ComplexPoint::new(0.8, -0.4), cutoff),
    ])
}
