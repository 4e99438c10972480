//! Monte Carlo teleportation shots.
//!
//! Outcomes `β` are drawn from `P(β)` by rejection. Writing `μ = ⟨ψ|a|ψ⟩`,
//! `φ = D̂(−μ)|ψ⟩` and `δ = β − μ`, Cauchy–Schwarz with weights `|φₖ|` gives
//!
//! ```text
//! P(β) ≤ S² Σₖ (|φₖ|/S) Pₖ(δ),    S = Σₖ |φₖ|
//! ```
//!
//! where `Pₖ` is the outcome density of the number state `|k⟩`. Each `Pₖ` is
//! the Husimi density of `|k⟩` (radius² ~ Gamma(k+1), uniform phase) blurred
//! by a Gaussian of per-axis variance `q²/(2(1−q²))`, so the envelope is a
//! finite mixture that can be sampled exactly. For coherent inputs `φ` is the
//! vacuum, `S = 1` and every proposal is accepted.
//!
//! Shots are generated in fixed-size batches; batch `b` draws from a ChaCha20
//! stream keyed by `(seed, b)`, so results do not depend on thread count.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::channel::{probability_and_fidelity, teleport_pure, ChannelParams};
use crate::error::{Error, Result};
use crate::fock::{displacement_block, ComplexPoint, FockVector};

/// Version tag of the random stream layout. Bump on any change to batching,
/// seeding, or the order of draws.
pub const RNG_VERSION: &str = "chacha20-batch1024-rand0.9-distr0.5-v1";

/// Shots per independently seeded batch.
pub const BATCH_SIZE: usize = 1024;

// Relative slack before an envelope violation counts as a bug.
const ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub max_rejections_per_draw: u64,
    /// Keep the normalized output amplitudes of every shot.
    pub store_outputs: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            max_rejections_per_draw: 1_000_000,
            store_outputs: false,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotRecord {
    pub shot_index: u64,
    pub beta: ComplexPoint,
    pub conditional_fidelity: f64,
    pub weight_at_beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Vec<C64>>,
}

/// Rejection sampler for the outcome density of a fixed input and channel.
#[derive(Debug, Clone)]
pub struct BetaSampler {
    centroid: ComplexPoint,
    /// `D̂(−μ)|ψ⟩`, padded until the displaced state is captured.
    shifted: Array1<C64>,
    /// Indices `k` with `|φₖ| > 0` and their weights `|φₖ|`.
    components: Vec<(usize, f64)>,
    weight_sum: f64,
    picker: WeightedIndex<f64>,
    gammas: Vec<Gamma<f64>>,
    noise_sd: f64,
    /// Highest `m` kept in `Σ q²ᵐ |⟨m|…⟩|²`.
    m_max: usize,
    q: f64,
    max_rejections: u64,
}

/// Smallest `M` with `q^{2(M+1)}/(1−q²) < 1e−17`.
fn geometric_cutoff(q: f64) -> usize {
    if q == 0.0 {
        return 0;
    }
    let s = q * q;
    let target = (1e-17 * (1.0 - s)).ln();
    let m = (target / s.ln()).ceil() as usize;
    m.saturating_sub(1)
}

impl BetaSampler {
    pub fn new(psi: &FockVector, params: &ChannelParams) -> Result<Self> {
        psi.require_normalized()?;
        let centroid = psi.coherent_centroid();
        let n = psi.cutoff();
        let shifted = if centroid.norm_sqr() == 0.0 {
            psi.amplitudes().clone()
        } else {
            let target = psi.norm_sqr();
            let r = centroid.norm();
            let mut extra = (4.0 * r * r + 8.0 + 6.0 * r * ((n + 1) as f64).sqrt()).ceil() as usize;
            loop {
                let rows = n + 1 + extra;
                let d = displacement_block(-centroid, rows, n + 1);
                let phi = d.dot(psi.amplitudes());
                let captured: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
                if target - captured < 1e-13 || extra > 4000 {
                    break phi;
                }
                extra *= 2;
            }
        };
        let components: Vec<(usize, f64)> = shifted
            .iter()
            .enumerate()
            .map(|(k, a)| (k, a.norm()))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let weight_sum: f64 = components.iter().map(|c| c.1).sum();
        let picker = WeightedIndex::new(components.iter().map(|c| c.1))
            .map_err(|e| Error::Sampler(format!("bad mixture weights: {e}")))?;
        let gammas = components
            .iter()
            .map(|&(k, _)| Gamma::new((k + 1) as f64, 1.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Sampler(format!("gamma distribution: {e}")))?;
        let q = params.q();
        let s = q * q;
        Ok(BetaSampler {
            centroid,
            shifted,
            components,
            weight_sum,
            picker,
            gammas,
            noise_sd: (s / (2.0 * (1.0 - s))).sqrt(),
            m_max: geometric_cutoff(q).max(n),
            q,
            max_rejections: 1_000_000,
        })
    }

    pub fn with_max_rejections(mut self, max: u64) -> Self {
        self.max_rejections = max;
        self
    }

    pub fn centroid(&self) -> ComplexPoint {
        self.centroid
    }

    /// Expected proposals per accepted draw, `S²`.
    pub fn envelope_mass(&self) -> f64 {
        self.weight_sum * self.weight_sum
    }

    /// Target and envelope densities at `β`.
    pub fn densities(&self, beta: ComplexPoint) -> (f64, f64) {
        let delta = beta - self.centroid;
        let kmax = self.shifted.len();
        let rows = self.m_max + 1;
        let d = displacement_block(-delta, rows, kmax);
        let scale = (1.0 - self.q * self.q) / PI;
        let mut target = 0.0;
        let mut envelope = 0.0;
        let mut qm = 1.0;
        let s = self.q * self.q;
        for m in 0..rows {
            if qm == 0.0 {
                break;
            }
            let row = d.row(m);
            let amp: C64 = row
                .iter()
                .zip(self.shifted.iter())
                .map(|(a, b)| a * b)
                .sum();
            target += qm * amp.norm_sqr();
            let mut mix = 0.0;
            for &(k, w) in &self.components {
                mix += w * row[k].norm_sqr();
            }
            envelope += qm * mix;
            qm *= s;
        }
        // envelope above is Σ wₖ Pₖ/scale; the bound carries a further factor S
        (scale * target, scale * self.weight_sum * envelope)
    }

    /// One draw and the number of proposals it took.
    pub fn draw_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(ComplexPoint, u64)> {
        for trial in 1..=self.max_rejections {
            let pick = self.picker.sample(rng);
            let r2: f64 = self.gammas[pick].sample(rng);
            let theta = 2.0 * PI * rng.random::<f64>();
            let ux: f64 = rng.sample(StandardNormal);
            let uy: f64 = rng.sample(StandardNormal);
            let r = r2.sqrt();
            let delta = ComplexPoint::new(
                r * theta.cos() + self.noise_sd * ux,
                r * theta.sin() + self.noise_sd * uy,
            );
            let beta = self.centroid + delta;
            let (target, envelope) = self.densities(beta);
            let ratio = if envelope > 0.0 {
                target / envelope
            } else {
                0.0
            };
            if ratio > 1.0 + ENVELOPE_SLACK {
                return Err(Error::Sampler(format!(
                    "acceptance ratio {ratio} exceeds 1 at beta = {beta}"
                )));
            }
            if rng.random::<f64>() < ratio {
                return Ok((beta, trial));
            }
        }
        Err(Error::Sampler(format!(
            "no acceptance after {} proposals",
            self.max_rejections
        )))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ComplexPoint> {
        self.draw_counted(rng).map(|(b, _)| b)
    }
}

/// Draws one outcome from `P(β)`. Prefer [`BetaSampler`] for repeated draws.
pub fn sample_beta<R: Rng + ?Sized>(
    psi: &FockVector,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ComplexPoint> {
    BetaSampler::new(psi, params)?.draw(rng)
}

/// RNG for batch `batch` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, batch: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotRun {
    pub records: Vec<ShotRecord>,
    pub mean_fidelity: f64,
    pub std_error: f64,
    /// Accepted draws over proposals.
    pub acceptance_rate: f64,
    pub rng_version: &'static str,
}

pub fn run_shots(
    psi: &FockVector,
    params: &ChannelParams,
    n_shots: usize,
    config: &SamplerConfig,
) -> Result<ShotRun> {
    if n_shots == 0 {
        return Err(Error::Domain("n_shots must be at least 1".into()));
    }
    if config.max_rejections_per_draw == 0 {
        return Err(Error::Domain(
            "max_rejections_per_draw must be positive".into(),
        ));
    }
    let sampler =
        BetaSampler::new(psi, params)?.with_max_rejections(config.max_rejections_per_draw);
    let n_batches = n_shots.div_ceil(BATCH_SIZE);
    let batches: Vec<Result<(Vec<ShotRecord>, u64)>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(config.seed, b as u64);
            let start = b * BATCH_SIZE;
            let end = (start + BATCH_SIZE).min(n_shots);
            let mut records = Vec::with_capacity(end - start);
            let mut trials = 0;
            for index in start..end {
                let (beta, t) = sampler.draw_counted(&mut rng)?;
                trials += t;
                records.push(make_record(
                    psi,
                    params,
                    index as u64,
                    beta,
                    config.store_outputs,
                )?);
            }
            Ok((records, trials))
        })
        .collect();

    let mut records = Vec::with_capacity(n_shots);
    let mut trials = 0u64;
    for batch in batches {
        let (r, t) = batch?;
        records.extend(r);
        trials += t;
    }
    let (mean, std_error) = mean_and_std_error(records.iter().map(|r| r.conditional_fidelity));
    Ok(ShotRun {
        acceptance_rate: n_shots as f64 / trials as f64,
        records,
        mean_fidelity: mean,
        std_error,
        rng_version: RNG_VERSION,
    })
}

fn make_record(
    psi: &FockVector,
    params: &ChannelParams,
    index: u64,
    beta: ComplexPoint,
    store_output: bool,
) -> Result<ShotRecord> {
    let (weight, output, fidelity) = if store_output {
        let r = teleport_pure(psi, beta, params)?;
        (
            r.weight,
            r.output.map(|o| o.to_vec()),
            r.conditional_fidelity,
        )
    } else {
        let (p, f) = probability_and_fidelity(psi, beta, params)?;
        (p, None, f)
    };
    let conditional_fidelity = fidelity.ok_or_else(|| {
        Error::Sampler(format!(
            "accepted outcome {beta} has underflowing weight {weight:e}"
        ))
    })?;
    Ok(ShotRecord {
        shot_index: index,
        beta,
        conditional_fidelity,
        weight_at_beta: weight,
        output,
    })
}

/// Sample mean and its standard error.
pub fn mean_and_std_error(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Goodness of fit of `|β − α|²` against the exponential law with rate
/// `1 − q²` that holds for a coherent input `|α⟩`, using `bins` equiprobable
/// radial bins.
pub fn radial_chi_square(
    betas: &[ComplexPoint],
    alpha: ComplexPoint,
    q: f64,
    bins: usize,
) -> Result<ChiSquareTest> {
    if bins < 2 || betas.is_empty() {
        return Err(Error::Domain(
            "chi-square needs >= 2 bins and some samples".into(),
        ));
    }
    let rate = 1.0 - q * q;
    let mut counts = vec![0usize; bins];
    for b in betas {
        let u = 1.0 - (-rate * (*b - alpha).norm_sqr()).exp();
        let idx = ((u * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let expected = betas.len() as f64 / bins as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = bins - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}
