use cvtele::channel::{average_fidelity, default_grid};
use cvtele::fock::{coherent_state, number_state};
use cvtele::sampler::{mean_and_std_error, radial_chi_square, run_shots};
use cvtele::{ChannelParams, ComplexPoint, SamplerConfig};

const SHOTS: usize = 100_000;

#[test]
fn vacuum_beta_variance_within_three_sigma() {
    for (q, seed) in [(0.0, 1), (0.5, 2)] {
        let params = ChannelParams::new(q, 20).unwrap();
        let psi = number_state(0, 20).unwrap();
        let run = run_shots(&psi, &params, SHOTS, &SamplerConfig::with_seed(seed)).unwrap();
        let want = 0.5 / (1.0 - q * q);
        for axis in [0, 1] {
            let sq = run.records.iter().map(|r| {
                let x = if axis == 0 { r.beta.re } else { r.beta.im };
                x * x
            });
            let (var, se) = mean_and_std_error(sq);
            assert!((var - want).abs() < 3.0 * se, "q={q} axis={axis} var={var} se={se}");
        }
        let betas: Vec<ComplexPoint> = run.records.iter().map(|r| r.beta).collect();
        let chi = radial_chi_square(&betas, ComplexPoint::ZERO, q, 20).unwrap();
        assert!(chi.p_value > 0.001, "q={q} p={}", chi.p_value);
    }
}

#[test]
fn coherent_mean_fidelity_within_three_standard_errors() {
    let alpha = ComplexPoint::new(0.7, -0.4);
    for (q, seed) in [(0.5, 11), (0.0, 12)] {
        let params = ChannelParams::new(q, 20).unwrap();
        let psi = coherent_state(alpha, 20).normalized().unwrap();
        let run = run_shots(&psi, &params, SHOTS, &SamplerConfig::with_seed(seed)).unwrap();
        let want = 0.5 * (1.0 + q);
        assert!(
            (run.mean_fidelity - want).abs() < 3.0 * run.std_error,
            "q={q} mean={} se={}",
            run.mean_fidelity,
            run.std_error
        );
        let grid = default_grid(&psi, &params).unwrap();
        let quad = average_fidelity(&psi, &params, &grid).unwrap().value;
        assert!((run.mean_fidelity - quad).abs() < 4.0 * run.std_error);
        let betas: Vec<ComplexPoint> = run.records.iter().map(|r| r.beta).collect();
        let chi = radial_chi_square(&betas, alpha, q, 20).unwrap();
        assert!(chi.p_value > 0.001, "q={q} p={}", chi.p_value);
    }
}

#[test]
fn single_shot_is_deterministic() {
    let params = ChannelParams::new(0.3, 20).unwrap();
    let psi = number_state(1, 20).unwrap();
    let cfg = SamplerConfig::with_seed(99);
    let a = run_shots(&psi, &params, 1, &cfg).unwrap();
    let b = run_shots(&psi, &params, 1, &cfg).unwrap();
    assert_eq!(a.records.len(), 1);
    assert_eq!(a.records, b.records);
}
