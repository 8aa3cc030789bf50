//! Cross-module checks against independent references: analytic densities,
//! closed-form limits, and protocol-level invariants that no single unit
//! test covers.

use miw::density::{
    density_on_grid, inverse_spacing_density, rss_error, sample_monte_carlo, sample_uniform_fill,
    WorldEnsemble,
};
use miw::experiments::{energy_scan, ExperimentKind, RunConfig};
use miw::forces::VMode;
use miw::grid::GridSpec;
use miw::groundstate::{initial_configuration, relax, RelaxMethod, RelaxProtocol};
use miw::kernels::{bandwidth_amise, KernelFamily, KernelSpec};
use miw::numerov::{harmonic_ground_density, solve_potential};
use miw::potentials::{
    double_well_barrier, double_well_turning_point, double_well_zero_point_energy, PotentialSpec,
};
use miw::rates::{arrhenius, bell, bell_beta};
use miw::units::PROTON_MASS;
use std::path::PathBuf;

fn harm1_reference(grid: &GridSpec) -> miw::grid::GridField {
    harmonic_ground_density(1.0, PROTON_MASS, grid).unwrap()
}

#[test]
fn kde_density_has_unit_mass_on_the_preset_grid() {
    let grid = GridSpec::preset(1).unwrap();
    let reference = harm1_reference(&grid);
    let positions = sample_uniform_fill(&reference, 50).unwrap();
    let mut ens = WorldEnsemble::at_rest(positions, PROTON_MASS, 1).unwrap();
    ens.sort_1d();
    for family in [KernelFamily::Gaussian, KernelFamily::Exponential] {
        let b = bandwidth_amise(&reference, 50, family).unwrap();
        let kernel = KernelSpec::new(family, b, 1).unwrap();
        let density = density_on_grid(&ens, &kernel, &grid).unwrap();
        let mass = density.integral();
        assert!(
            (mass - 1.0).abs() < 2e-2,
            "{family:?}: grid mass {mass} strays from 1"
        );
    }
}

#[test]
fn uniform_fill_reconstructs_better_than_monte_carlo() {
    let grid = GridSpec::preset(1).unwrap();
    let reference = harm1_reference(&grid);
    let n = 50;
    let b = bandwidth_amise(&reference, n, KernelFamily::Gaussian).unwrap();
    let kernel = KernelSpec::new(KernelFamily::Gaussian, b, 1).unwrap();
    let rss_of = |positions: Vec<f64>| {
        let ens = WorldEnsemble::at_rest(positions, PROTON_MASS, 1).unwrap();
        let mut density = density_on_grid(&ens, &kernel, &grid).unwrap();
        density.normalize().unwrap();
        rss_error(&density, &reference).unwrap()
    };
    let uniform = rss_of(sample_uniform_fill(&reference, n).unwrap());
    let mut wins = 0;
    for seed in 0..20 {
        let mc = rss_of(sample_monte_carlo(&reference, n, seed).unwrap());
        if uniform < mc {
            wins += 1;
        }
    }
    assert!(
        wins >= 16,
        "uniform fill beat MC on only {wins}/20 seeds (uniform rss {uniform:.3e})"
    );
}

#[test]
fn inverse_spacing_density_improves_with_ideal_world_count() {
    let grid = GridSpec::preset(1).unwrap();
    let reference = harm1_reference(&grid);
    let err_at = |n: usize| {
        let mut positions = sample_uniform_fill(&reference, n).unwrap();
        positions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ens = WorldEnsemble::at_rest(positions.clone(), PROTON_MASS, 1).unwrap();
        let p = inverse_spacing_density(&ens).unwrap();
        // compare against the analytic density at the world positions
        let k: f64 = 1.0;
        let omega = (k / PROTON_MASS).sqrt();
        let s2 = miw::units::HBAR / (2.0 * PROTON_MASS * omega);
        let norm = 1.0 / (2.0 * std::f64::consts::PI * s2).sqrt();
        let mut acc = 0.0;
        for (x, pi) in positions.iter().zip(&p) {
            let f = norm * (-x * x / (2.0 * s2)).exp();
            acc += (pi - f).powi(2);
        }
        (acc / n as f64).sqrt() / norm
    };
    let coarse = err_at(20);
    let fine = err_at(200);
    assert!(
        fine < coarse,
        "inverse-spacing error did not improve: N=20 {coarse:.3e} vs N=200 {fine:.3e}"
    );
}

#[test]
fn relax_energy_error_improves_across_sequences() {
    let pot = PotentialSpec::preset("harm1", 1).unwrap();
    let grid = GridSpec::preset(1).unwrap();
    let ens = initial_configuration("harm1", 1, 50, 0).unwrap();
    let protocol = RelaxProtocol::standard(RelaxMethod::DampedMd, 1);
    let report = relax(&ens, &pot, KernelFamily::Exponential, &protocol, &grid, None).unwrap();
    let e_ref = 50.0 * miw::numerov::harmonic_ground_energy(1.0, PROTON_MASS, 1);
    let errs: Vec<f64> = report
        .records
        .iter()
        .map(|r| ((r.e_resampled - e_ref) / e_ref).abs())
        .collect();
    let median = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let early = median(&errs[..5]);
    let late = median(&errs[5..]);
    assert!(
        late <= early,
        "relative energy error got worse: first-half median {early:.3e}, second-half {late:.3e}"
    );
}

#[test]
fn numerov_ground_density_matches_the_analytic_gaussian() {
    let grid = GridSpec::preset(1).unwrap();
    let pot = PotentialSpec::preset("harm1", 1).unwrap();
    let solved = solve_potential(&pot, &grid, PROTON_MASS, 1).unwrap();
    let analytic = harm1_reference(&grid);
    let chi = rss_error(&solved.ground_density, &analytic).unwrap();
    // normalize by the reference density scale
    let peak = analytic.values.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        chi / peak < 1e-2,
        "eigensolver density deviates from the analytic form: chi/peak {:.3e}",
        chi / peak
    );
}

#[test]
fn bell_rate_dominates_arrhenius_on_the_preset() {
    let (k, x0) = (10.0, 0.2);
    let delta_e = double_well_barrier(k, x0);
    let e_zp = double_well_zero_point_energy(k, PROTON_MASS);
    let a = double_well_turning_point(k, x0, e_zp).unwrap();
    let beta = bell_beta(a, PROTON_MASS, delta_e);
    for i in 1..=40 {
        let t = 50.0 * i as f64;
        let nu_c = arrhenius(0.1, delta_e, t);
        let nu_q = bell(0.1, delta_e, beta, t);
        assert!(
            nu_q >= nu_c * (1.0 - 1e-12),
            "quantum-corrected rate fell below Arrhenius at T={t}"
        );
    }
}

#[test]
fn energy_scan_is_reproducible_in_deterministic_mode() {
    let config = RunConfig {
        experiment: ExperimentKind::EnergyScan,
        preset: "harm1".into(),
        d: 1,
        kernel: Some(KernelFamily::Gaussian),
        n_worlds: vec![10, 20],
        seeds: vec![7, 8],
        method: None,
        v_mode: VMode::Taylor2,
        temperatures: vec![],
        gamma: 0.1,
        out_dir: PathBuf::from(
            std::env::temp_dir().join("miw_oracle_repro"),
        ),
        deterministic: true,
    };
    let a = energy_scan(&config).unwrap();
    let b = energy_scan(&config).unwrap();
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.e_per_world.to_bits(), rb.e_per_world.to_bits());
        assert_eq!(ra.err_rel.to_bits(), rb.err_rel.to_bits());
    }
}
