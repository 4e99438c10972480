//! The subcommands. Each returns the documents it emits; writing them out is
//! left to the caller.

use cvtele::channel::{
    average_fidelity, completeness_grid, default_grid, integrated_interior_dim,
    output_density_matrix, probability_and_fidelity, reference_povm_completeness,
    total_probability,
};
use cvtele::fock::{quadrature_operators, OperatorMatrix};
use cvtele::quad::BOUNDARY_MASS_LIMIT;
use cvtele::sampler::{batch_rng, radial_chi_square, run_shots, BATCH_SIZE, RNG_VERSION};
use cvtele::verify::{
    eight_port_distribution, eight_port_distribution_mixed, husimi_moments, sample_eight_port,
    sample_moments, BasisKind, EightPortShot, LineGrid, VerificationBasis, HOMODYNE_POINTS,
};
use cvtele::{make_grid, ChannelParams, ComplexPoint, Error, FockVector, QuadGrid, SamplerConfig};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{Artifact, Cell, Document, Format, Table};
use crate::CliError;

/// Version of every table layout below; bump when a column changes.
pub const SCHEMA_VERSION: u32 = 1;

fn base_document(command: &str, cfg: &RunConfig) -> Document {
    let mut d = Document::new();
    d.set("schema", format!("cvtele.{command}/{SCHEMA_VERSION}"));
    d.set("config_hash", cfg.hash());
    d.set("rng_version", RNG_VERSION);
    d.set("cutoff", cfg.cutoff);
    d.set("q", cfg.q);
    d.set("state", cfg.state.as_str());
    d
}

fn grid_meta(d: &mut Document, prefix: &str, grid: &QuadGrid, boundary_mass: f64) {
    d.set(&format!("{prefix}_center_re"), grid.center().re);
    d.set(&format!("{prefix}_center_im"), grid.center().im);
    d.set(&format!("{prefix}_extent"), grid.extent());
    d.set(&format!("{prefix}_points"), grid.points_per_axis());
    d.set(&format!("{prefix}_boundary_mass"), boundary_mass);
}

/// The configured extent around the input centroid, or the automatic grid.
pub fn beta_grid(
    cfg: &RunConfig,
    psi: &FockVector,
    params: &ChannelParams,
) -> Result<QuadGrid, CliError> {
    let auto = default_grid(psi, params)?;
    let extent = cfg.extent.unwrap_or(auto.extent());
    Ok(make_grid(auto.center(), extent, cfg.points)?)
}

fn closed_form_f_av(cfg: &RunConfig, q: f64) -> Option<f64> {
    cfg.is_coherent().then_some(0.5 * (1.0 + q))
}

pub fn cmd_fidelity(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let psi = cfg.input_state()?;
    let params = cfg.params()?;
    let grid = beta_grid(cfg, &psi, &params)?;
    let f_av = average_fidelity(&psi, &params, &grid)?;
    let total = total_probability(&psi, &params, &grid)?;

    let mut d = base_document("fidelity", cfg);
    grid_meta(&mut d, "grid", &grid, f_av.boundary_mass);
    d.set("f_av", f_av.value);
    d.set("f_av_closed_form", closed_form_f_av(cfg, cfg.q));
    d.set("total_probability", total.value);
    d.set("total_probability_boundary_mass", total.boundary_mass);
    d.set("ray_angle", cfg.ray_angle);

    let origin = psi.coherent_centroid();
    let dir = ComplexPoint::new(cfg.ray_angle.cos(), cfg.ray_angle.sin());
    let mut table = Table::new(vec![
        "t",
        "beta_re",
        "beta_im",
        "probability",
        "conditional_fidelity",
    ]);
    for k in 0..cfg.ray_points {
        let t = cfg.ray_length * k as f64 / (cfg.ray_points - 1) as f64;
        let beta = origin + dir.scale(t);
        let (p, f) = probability_and_fidelity(&psi, beta, &params)?;
        table.push(vec![
            t.into(),
            beta.re.into(),
            beta.im.into(),
            p.into(),
            f.into(),
        ]);
    }
    d.table = Some(table);
    Ok(vec![Artifact::primary(d)])
}

pub fn cmd_sweep_q(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    if cfg.q_list.is_empty() {
        return Err(Error::Domain("q_list must contain at least one value".into()).into());
    }
    let psi = cfg.input_state()?;
    let params: Vec<ChannelParams> = cfg
        .q_list
        .iter()
        .map(|&q| cfg.params_for(q))
        .collect::<Result<_, _>>()?;

    let mut d = base_document("sweep-q", cfg);
    d.set("q_count", cfg.q_list.len());
    d.set("sampled", cfg.sampled);
    if cfg.sampled {
        d.set("seed", cfg.seed);
        d.set("shots", cfg.shots);
    }
    let mut table = Table::new(vec![
        "q",
        "f_av",
        "grid_extent",
        "grid_boundary_mass",
        "f_av_closed_form",
        "f_av_sampled",
        "f_av_stderr",
    ]);
    let mut worst = 0.0f64;
    for p in &params {
        let grid = beta_grid(cfg, &psi, p)?;
        let f_av = average_fidelity(&psi, p, &grid)?;
        let closed = closed_form_f_av(cfg, p.q());
        if let Some(c) = closed {
            worst = worst.max((f_av.value - c).abs());
        }
        let (sampled, stderr) = if cfg.sampled {
            let run = run_shots(&psi, p, cfg.shots, &SamplerConfig::with_seed(cfg.seed))?;
            (Some(run.mean_fidelity), Some(run.std_error))
        } else {
            (None, None)
        };
        table.push(vec![
            p.q().into(),
            f_av.value.into(),
            grid.extent().into(),
            f_av.boundary_mass.into(),
            closed.into(),
            sampled.into(),
            stderr.into(),
        ]);
    }
    d.set("grid_points", cfg.points);
    if cfg.is_coherent() {
        d.set("max_closed_form_residual", worst);
    }
    d.table = Some(table);
    Ok(vec![Artifact::primary(d)])
}

pub fn cmd_shots(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let psi = cfg.input_state()?;
    let params = cfg.params()?;
    let sampler = SamplerConfig::with_seed(cfg.seed);
    let run = run_shots(&psi, &params, cfg.shots, &sampler)?;
    let grid = beta_grid(cfg, &psi, &params)?;
    let f_av = average_fidelity(&psi, &params, &grid)?;

    let mut d = base_document("shots", cfg);
    d.set("seed", cfg.seed);
    d.set("n_shots", cfg.shots);
    grid_meta(&mut d, "grid", &grid, f_av.boundary_mass);
    let mut table = Table::new(vec![
        "shot_index",
        "beta_re",
        "beta_im",
        "conditional_fidelity",
        "weight_at_beta",
    ]);
    for r in &run.records {
        table.push(vec![
            r.shot_index.into(),
            r.beta.re.into(),
            r.beta.im.into(),
            r.conditional_fidelity.into(),
            r.weight_at_beta.into(),
        ]);
    }

    let betas: Vec<ComplexPoint> = run.records.iter().map(|r| r.beta).collect();
    let (m, se) = sample_moments(&betas);
    let mut s = base_document("shots-summary", cfg);
    s.set("seed", cfg.seed);
    s.set("n_shots", cfg.shots);
    grid_meta(&mut s, "grid", &grid, f_av.boundary_mass);
    s.set("mean_fidelity", run.mean_fidelity);
    s.set("std_error", run.std_error);
    s.set("f_av_quadrature", f_av.value);
    s.set(
        "fidelity_z_score",
        (run.mean_fidelity - f_av.value) / run.std_error,
    );
    s.set("acceptance_rate", run.acceptance_rate);
    s.set("beta_mean_re", m.mean.re);
    s.set("beta_mean_im", m.mean.im);
    s.set("beta_var_re", m.var_re);
    s.set("beta_var_re_stderr", se[2]);
    s.set("beta_var_im", m.var_im);
    s.set("beta_var_im_stderr", se[3]);
    if let Some(alpha) = cfg.coherent_amplitude() {
        let q = params.q();
        s.set("beta_var_expected", 0.5 / (1.0 - q * q));
        let chi = radial_chi_square(&betas, alpha, q, cfg.chi_bins)?;
        s.set("chi_square_statistic", chi.statistic);
        s.set("chi_square_dof", chi.dof);
        s.set("chi_square_p_value", chi.p_value);
    }
    d.table = Some(table);
    Ok(vec![
        Artifact::primary(d),
        Artifact::companion("summary", Some(Format::Json), s),
    ])
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let psi = cfg.input_state()?;
    let params = cfg.params()?;
    let grid = beta_grid(cfg, &psi, &params)?;
    let rho = output_density_matrix(&psi, &params, &grid)?;

    let mut d = base_document("verify", cfg);
    d.set("basis", cfg.basis.to_string());
    grid_meta(&mut d, "grid", &grid, rho.boundary_mass);
    d.set("teleported_trace", rho.value.trace().re);
    match cfg.basis {
        BasisKind::HomodyneX | BasisKind::HomodyneY => {
            verify_homodyne(cfg, &psi, &rho.value, &mut d)?;
            Ok(vec![Artifact::primary(d)])
        }
        BasisKind::Number => {
            verify_number(cfg, &psi, &rho.value, &mut d)?;
            Ok(vec![Artifact::primary(d)])
        }
        BasisKind::EightPort => {
            verify_eight_port(cfg, &psi, &rho.value, &mut d)?;
            let gamma = gamma_reconstruction(cfg, &psi, &params)?;
            Ok(vec![
                Artifact::primary(d),
                Artifact::companion("gamma", None, gamma),
            ])
        }
    }
}

fn completeness_meta(d: &mut Document, basis: &VerificationBasis) -> Result<(), CliError> {
    let dev = basis.completeness_deviation();
    d.set("completeness_deviation", dev);
    d.set("completeness_interior_dim", basis.cutoff() / 2 + 1);
    basis.require_complete()?;
    Ok(())
}

fn moments_of(op: &OperatorMatrix, rho: &OperatorMatrix) -> Result<(f64, f64), CliError> {
    let tr = rho.trace().re;
    let mean = rho.matmul(op)?.trace().re / tr;
    let second = rho.matmul(&op.matmul(op)?)?.trace().re / tr;
    Ok((mean, second - mean * mean))
}

fn verify_homodyne(
    cfg: &RunConfig,
    psi: &FockVector,
    rho: &OperatorMatrix,
    d: &mut Document,
) -> Result<(), CliError> {
    let cutoff = cfg.cutoff;
    let (x, y) = quadrature_operators(cutoff)?;
    let op = if cfg.basis == BasisKind::HomodyneY {
        y
    } else {
        x
    };
    let pure = OperatorMatrix::outer(psi, psi)?;
    let (m_in, v_in) = moments_of(&op, &pure)?;
    let (m_out, v_out) = moments_of(&op, rho)?;
    let hermite = ((2 * (cutoff / 2) + 1) as f64 / 2.0).sqrt() + 3.0;
    let half = hermite.max(8.0 * v_in.max(v_out).sqrt() + m_in.abs().max(m_out.abs()));
    let line = LineGrid::new(0.0, half, HOMODYNE_POINTS)?;
    let basis = if cfg.basis == BasisKind::HomodyneY {
        VerificationBasis::homodyne_y(&line, cutoff)?
    } else {
        VerificationBasis::homodyne_x(&line, cutoff)?
    };
    completeness_meta(d, &basis)?;
    let p_in = basis.probabilities(psi)?;
    let p_out = basis.probabilities_mixed(rho)?;
    let (mass_in, mean_in, var_in) = line.moments(&p_in);
    let (mass_out, mean_out, var_out) = line.moments(&p_out);
    d.set("homodyne_half_width", half);
    d.set("homodyne_points", HOMODYNE_POINTS);
    d.set("input_mass", mass_in);
    d.set("input_mean", mean_in);
    d.set("input_variance", var_in);
    d.set("teleported_mass", mass_out);
    d.set("teleported_mean", mean_out);
    d.set("teleported_variance", var_out);
    if cfg.is_coherent() {
        let q = cfg.q;
        d.set(
            "teleported_variance_expected",
            0.25 + (1.0 - q) / (2.0 * (1.0 + q)),
        );
    }
    let mut table = Table::new(vec!["quadrature", "p_input", "p_teleported"]);
    for ((x, a), b) in line.nodes.iter().zip(&p_in).zip(&p_out) {
        table.push(vec![(*x).into(), (*a).into(), (*b).into()]);
    }
    d.table = Some(table);
    Ok(())
}

fn verify_number(
    cfg: &RunConfig,
    psi: &FockVector,
    rho: &OperatorMatrix,
    d: &mut Document,
) -> Result<(), CliError> {
    let basis = VerificationBasis::number(cfg.cutoff);
    completeness_meta(d, &basis)?;
    let p_in = basis.probabilities(psi)?;
    let p_out = basis.probabilities_mixed(rho)?;
    let mean = |p: &[f64]| p.iter().enumerate().map(|(n, v)| n as f64 * v).sum::<f64>();
    d.set("input_mean_photon_number", mean(&p_in));
    d.set(
        "teleported_mean_photon_number",
        mean(&p_out) / rho.trace().re,
    );
    let mut table = Table::new(vec!["n", "p_input", "p_teleported"]);
    for (n, (a, b)) in p_in.iter().zip(&p_out).enumerate() {
        table.push(vec![n.into(), (*a).into(), (*b).into()]);
    }
    d.table = Some(table);
    Ok(())
}

/// Points per axis of the eight-port grid.
pub const EIGHT_PORT_POINTS: usize = 161;

fn verify_eight_port(
    cfg: &RunConfig,
    psi: &FockVector,
    rho: &OperatorMatrix,
    d: &mut Document,
) -> Result<(), CliError> {
    let mu = psi.coherent_centroid();
    let spread = (psi.mean_photon_number() - mu.norm_sqr()).max(0.0).sqrt();
    let extent = mu.norm() + (spread + 7.0).max(((cfg.cutoff / 2) as f64).sqrt() + 6.0);
    let grid = make_grid(ComplexPoint::ZERO, extent, EIGHT_PORT_POINTS)?;
    let basis = VerificationBasis::eight_port(&grid, cfg.cutoff);
    completeness_meta(d, &basis)?;
    let q_in = eight_port_distribution(psi, &grid)?;
    let q_out = eight_port_distribution_mixed(rho, &grid);
    grid_meta(
        d,
        "alpha_grid",
        &grid,
        q_in.boundary_mass.max(q_out.boundary_mass),
    );
    d.set("input_mass", q_in.mass);
    d.set("teleported_mass", q_out.mass);
    let mut table = Table::new(vec!["alpha_re", "alpha_im", "q_input", "q_teleported"]);
    for ((a, x), y) in grid.nodes().iter().zip(&q_in.values).zip(&q_out.values) {
        table.push(vec![a.re.into(), a.im.into(), (*x).into(), (*y).into()]);
    }
    d.table = Some(table);
    Ok(())
}

/// Eight-port shots: `γ = β + q(α − β)` against the input Husimi moments.
fn gamma_reconstruction(
    cfg: &RunConfig,
    psi: &FockVector,
    params: &ChannelParams,
) -> Result<Document, CliError> {
    let n = cfg.shots;
    let batches: Vec<Result<Vec<EightPortShot>, Error>> = (0..n.div_ceil(BATCH_SIZE))
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(cfg.seed, b as u64);
            let len = BATCH_SIZE.min(n - b * BATCH_SIZE);
            sample_eight_port(psi, params, len, &mut rng)
        })
        .collect();
    let mut gammas = Vec::with_capacity(n);
    for b in batches {
        gammas.extend(b?.into_iter().map(|s| s.gamma));
    }
    let (m, se) = sample_moments(&gammas);
    let want = husimi_moments(psi);

    let mut d = base_document("verify-gamma", cfg);
    d.set("seed", cfg.seed);
    d.set("n_shots", n);
    let mut table = Table::new(vec![
        "moment",
        "sampled",
        "std_error",
        "expected",
        "z_score",
    ]);
    let rows = [
        ("mean_re", m.mean.re, se[0], want.mean.re),
        ("mean_im", m.mean.im, se[1], want.mean.im),
        ("var_re", m.var_re, se[2], want.var_re),
        ("var_im", m.var_im, se[3], want.var_im),
        ("cov", m.cov, se[4], want.cov),
    ];
    let mut worst = 0.0f64;
    for (name, got, err, expected) in rows {
        let z = (got - expected) / err;
        worst = worst.max(z.abs());
        table.push(vec![
            Cell::from(name),
            got.into(),
            err.into(),
            expected.into(),
            z.into(),
        ]);
    }
    d.set("max_abs_z_score", worst);
    d.table = Some(table);
    Ok(d)
}

pub fn cmd_povm_check(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let psi = cfg.input_state()?;
    let interior = integrated_interior_dim(cfg.cutoff);
    let auto = completeness_grid(&psi, interior)?;
    let extent = cfg.extent.unwrap_or(auto.extent());
    let grid = make_grid(ComplexPoint::ZERO, extent, cfg.points)?;
    let integral = reference_povm_completeness(&psi, &grid)?;
    let mut d = base_document("povm-check", cfg);
    grid_meta(&mut d, "grid", &grid, integral.boundary_mass);
    let converged = integral.boundary_mass <= BOUNDARY_MASS_LIMIT;
    let id = OperatorMatrix::identity(cfg.cutoff);
    let deviation = integral.value.max_abs_diff(&id, Some(interior));
    d.set("interior_dim", interior);
    d.set("deviation", deviation);
    d.set("converged", converged);
    let mut table = Table::new(vec!["n", "diagonal", "max_offdiagonal"]);
    for n in 0..interior {
        let diag = integral.value.get(n, n).re;
        let off = (0..interior)
            .filter(|&m| m != n)
            .map(|m| integral.value.get(n, m).norm())
            .fold(0.0, f64::max);
        table.push(vec![n.into(), diag.into(), off.into()]);
    }
    d.table = Some(table);
    if !converged {
        return Err(Error::NonConverged {
            boundary_mass: integral.boundary_mass,
            limit: BOUNDARY_MASS_LIMIT,
        }
        .into());
    }
    Ok(vec![Artifact::primary(d)])
}
