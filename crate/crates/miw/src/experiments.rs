//! Experiment drivers: energy-vs-N scans, ground-state relaxation runs,
//! thermal statistics and tunneling rates, with CSV output.

use crate::density::{
    left_fraction_count, left_fraction_kde, sample_monte_carlo, sample_uniform_fill,
    WorldEnsemble,
};
use crate::dynamics::{Integrator, IntegratorConfig, Thermostat};
use crate::forces::{total_energy, ForceModel, VMode};
use crate::grid::{GridField, GridSpec};
use crate::groundstate::{initial_configuration, relax, RelaxMethod, RelaxProtocol, RelaxReport};
use crate::kernels::{bandwidth_amise, bandwidth_silverman, per_axis_variance, KernelFamily, KernelSpec};
use crate::numerov::{
    harmonic_ground_density, harmonic_ground_energy, potential_field, solve, EigenResult,
};
use crate::potentials::{PotentialKind, PotentialSpec};
use crate::rates::{arrhenius, bell, bell_beta, fit_decay, fit_nu0};
use crate::units::{HBAR, KB, PROTON_MASS};
use crate::{MiwError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::erf::erf_inv;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EnergyScan,
    Relax,
    Thermal,
    Tunnel,
    Numerov,
}

fn default_preset() -> String {
    "harm1".into()
}
fn default_d() -> usize {
    1
}
fn default_n_worlds() -> Vec<usize> {
    vec![50]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_temperatures() -> Vec<f64> {
    (0..=8).map(|i| 300.0 + 150.0 * i as f64).collect()
}
fn default_thermal_temperatures() -> Vec<f64> {
    vec![0.0, 300.0, 600.0, 1000.0, 1500.0, 2000.0]
}
fn default_tunnel_gamma() -> f64 {
    0.1
}
fn default_v_mode() -> VMode {
    VMode::Taylor2
}

/// One experiment request, deserializable from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default = "default_d")]
    pub d: usize,
    /// Restrict to one kernel family; `None` runs every applicable one.
    #[serde(default)]
    pub kernel: Option<KernelFamily>,
    #[serde(default = "default_n_worlds")]
    pub n_worlds: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub method: Option<RelaxMethod>,
    #[serde(default = "default_v_mode")]
    pub v_mode: VMode,
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(default = "default_tunnel_gamma")]
    pub gamma: f64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub deterministic: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        PotentialSpec::preset(&self.preset, self.d)?;
        if self.n_worlds.iter().any(|n| *n < 2) {
            return Err(MiwError::InvalidConfig("need at least 2 worlds".into()));
        }
        if self.seeds.is_empty() {
            return Err(MiwError::InvalidConfig("need at least one seed".into()));
        }
        Ok(())
    }

    /// Short hash of the serialized config, stamped into every output CSV.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).unwrap_or_default());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn open_out(config: &RunConfig, name: &str) -> Result<fs::File> {
    fs::create_dir_all(&config.out_dir)?;
    let mut f = fs::File::create(config.out_dir.join(name))?;
    writeln!(f, "# config {}", config.hash())?;
    Ok(f)
}

/// Reference ground state: analytic for harmonic presets, grid eigensolve
/// otherwise.
pub fn reference_ground_state(preset: &str, d: usize) -> Result<(f64, GridField)> {
    let potential = PotentialSpec::preset(preset, d)?;
    let grid = GridSpec::preset(d)?;
    match potential.kind {
        PotentialKind::Harmonic { k } => Ok((
            harmonic_ground_energy(k, PROTON_MASS, d),
            harmonic_ground_density(k, PROTON_MASS, &grid)?,
        )),
        _ => {
            let res = solve(&potential_field(&potential, &grid)?, PROTON_MASS, 1)?;
            Ok((res.ground_energy(), res.ground_density))
        }
    }
}

fn kernel_for(
    family: KernelFamily,
    reference: &GridField,
    n: usize,
    d: usize,
) -> Result<Option<KernelSpec>> {
    if family == KernelFamily::Original1d {
        return Ok(None);
    }
    let b = bandwidth_amise(reference, n, family)?;
    Ok(Some(KernelSpec::new(family, b, d)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyScanRow {
    pub family: KernelFamily,
    pub init: String,
    pub n: usize,
    pub seed: u64,
    pub b: Option<f64>,
    pub e_per_world: f64,
    pub e_ref: f64,
    pub err_rel: f64,
}

/// Place worlds in the reference ground-state density (deterministic
/// uniform fill and seeded Monte Carlo draws) and tabulate the energy error
/// against the reference eigenvalue.
pub fn energy_scan(config: &RunConfig) -> Result<Vec<EnergyScanRow>> {
    config.validate()?;
    let d = config.d;
    let potential = PotentialSpec::preset(&config.preset, d)?;
    let (e_ref, reference) = reference_ground_state(&config.preset, d)?;
    let families: Vec<KernelFamily> = match config.kernel {
        Some(f) => vec![f],
        None => {
            let mut fams = vec![KernelFamily::Gaussian, KernelFamily::Exponential];
            if d == 1 {
                fams.push(KernelFamily::Original1d);
            }
            fams
        }
    };

    let mut jobs: Vec<(KernelFamily, String, usize, u64)> = Vec::new();
    for &family in &families {
        for &n in &config.n_worlds {
            jobs.push((family, "uniform".into(), n, 0));
            for &seed in &config.seeds {
                jobs.push((family, "mc".into(), n, seed));
            }
        }
    }

    let run_job = |&(family, ref init, n, seed): &(KernelFamily, String, usize, u64)| -> Result<EnergyScanRow> {
        let positions = if init == "uniform" {
            sample_uniform_fill(&reference, n)?
        } else {
            sample_monte_carlo(&reference, n, seed)?
        };
        let mut ens = WorldEnsemble::at_rest(positions, PROTON_MASS, d)?;
        if d == 1 {
            ens.sort_1d();
        }
        let kernel = kernel_for(family, &reference, n, d)?;
        let (spec, v_mode) = match &kernel {
            Some(k) => (Some(k.clone()), config.v_mode),
            None => (
                Some(KernelSpec {
                    family: KernelFamily::Original1d,
                    b: 1.0,
                    d: 1,
                }),
                VMode::Pointlike,
            ),
        };
        let report = total_energy(&ens, &potential, spec.as_ref(), v_mode)?;
        let e_per_world = report.total / n as f64;
        Ok(EnergyScanRow {
            family,
            init: init.clone(),
            n,
            seed,
            b: kernel.map(|k| k.b),
            e_per_world,
            e_ref,
            err_rel: (e_per_world - e_ref) / e_ref,
        })
    };

    let rows: Vec<EnergyScanRow> = if config.deterministic {
        jobs.iter().map(run_job).collect::<Result<_>>()?
    } else {
        jobs.par_iter().map(run_job).collect::<Result<_>>()?
    };

    let mut out = open_out(config, &format!("energy_scan_{}_{}d.csv", config.preset, d))?;
    writeln!(out, "preset,d,family,init,n,seed,b,e_per_world,e_ref,err_rel")?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{:?},{},{},{},{},{:.10e},{:.10e},{:.10e}",
            config.preset,
            d,
            r.family,
            r.init,
            r.n,
            r.seed,
            r.b.map(|b| format!("{b:.6e}")).unwrap_or_default(),
            r.e_per_world,
            r.e_ref,
            r.err_rel
        )?;
    }
    Ok(rows)
}

/// Median of the absolute relative errors of the Monte-Carlo rows for one
/// (family, N).
pub fn median_mc_error(rows: &[EnergyScanRow], family: KernelFamily, n: usize) -> Option<f64> {
    let mut errs: Vec<f64> = rows
        .iter()
        .filter(|r| r.family == family && r.n == n && r.init == "mc")
        .map(|r| r.err_rel.abs())
        .collect();
    if errs.is_empty() {
        return None;
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(errs[errs.len() / 2])
}

/// Run the relaxation protocol for each requested (family, method, seed).
pub fn relax_experiment(
    config: &RunConfig,
) -> Result<Vec<(KernelFamily, RelaxMethod, u64, RelaxReport)>> {
    config.validate()?;
    let d = config.d;
    let potential = PotentialSpec::preset(&config.preset, d)?;
    let grid = GridSpec::preset(d)?;
    let (_, reference) = reference_ground_state(&config.preset, d)?;
    let n = *config.n_worlds.first().unwrap_or(&50);

    let families: Vec<KernelFamily> = match config.kernel {
        Some(f) => vec![f],
        None => vec![KernelFamily::Gaussian, KernelFamily::Exponential],
    };
    let methods: Vec<RelaxMethod> = match config.method {
        Some(m) => vec![m],
        None => vec![RelaxMethod::DampedMd, RelaxMethod::Bfgs],
    };

    let mut jobs = Vec::new();
    for &family in &families {
        for &method in &methods {
            for &seed in &config.seeds {
                jobs.push((family, method, seed));
            }
        }
    }

    let run_job = |&(family, method, seed): &(KernelFamily, RelaxMethod, u64)| {
        let ens = initial_configuration(&config.preset, d, n, seed)?;
        let mut protocol = RelaxProtocol::standard(method, d);
        protocol.v_mode = config.v_mode;
        let report = relax(&ens, &potential, family, &protocol, &grid, Some(&reference))?;
        Ok((family, method, seed, report))
    };

    let results: Vec<(KernelFamily, RelaxMethod, u64, RelaxReport)> = if config.deterministic {
        jobs.iter().map(run_job).collect::<Result<_>>()?
    } else {
        jobs.par_iter().map(run_job).collect::<Result<_>>()?
    };

    for (family, method, seed, report) in &results {
        let name = format!(
            "relax_{}_{}d_{:?}_{:?}_s{}.csv",
            config.preset, d, family, method, seed
        )
        .to_lowercase();
        let f = open_out(config, &name)?;
        report.write_csv(f)?;
        let path = config.out_dir.join(
            format!(
                "relax_{}_{}d_{:?}_{:?}_s{}_final.traj",
                config.preset, d, family, method, seed
            )
            .to_lowercase(),
        );
        let file = fs::File::create(path)?;
        let traj = crate::dynamics::Trajectory {
            times: vec![0.0],
            snapshots: vec![report.ensemble.positions.clone()],
            energies: Vec::new(),
            sample_stride: 1,
            n: report.ensemble.n,
            k: report.ensemble.k(),
        };
        traj.write_binary(file)?;
    }
    Ok(results)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalRow {
    pub family: Option<KernelFamily>,
    pub temperature: f64,
    pub seed: u64,
    pub sigma_pos: f64,
    pub sigma_kde: f64,
    pub sigma_quantum: f64,
    pub sigma_classical: f64,
}

/// Quantum-thermal position spread of the harmonic oscillator,
/// σ² = (ħ/2mω)·coth(ħω/2k_BT).
pub fn harmonic_thermal_sigma(k: f64, mass: f64, t: f64) -> f64 {
    let omega = (k / mass).sqrt();
    let s2_gs = HBAR / (2.0 * mass * omega);
    if t <= 0.0 {
        return s2_gs.sqrt();
    }
    let x = HBAR * omega / (2.0 * KB * t);
    (s2_gs / x.tanh()).sqrt()
}

/// Thermalized harmonic runs: time-averaged position spread vs temperature.
pub fn thermal_experiment(config: &RunConfig) -> Result<Vec<ThermalRow>> {
    config.validate()?;
    let potential = PotentialSpec::preset(&config.preset, 1)?;
    let k = match potential.kind {
        PotentialKind::Harmonic { k } => k,
        _ => {
            return Err(MiwError::InvalidConfig(
                "thermal runs expect a harmonic preset".into(),
            ))
        }
    };
    let n = *config.n_worlds.first().unwrap_or(&30);
    let temps = if config.temperatures.is_empty() {
        default_thermal_temperatures()
    } else {
        config.temperatures.clone()
    };
    let families: Vec<Option<KernelFamily>> = match config.kernel {
        Some(f) => vec![Some(f)],
        None => vec![Some(KernelFamily::Gaussian), Some(KernelFamily::Exponential)],
    };
    let (_, reference) = reference_ground_state(&config.preset, 1)?;

    let mut jobs = Vec::new();
    for &family in &families {
        for &t in &temps {
            for &seed in &config.seeds {
                jobs.push((family, t, seed));
            }
        }
    }

    let run_job = |&(family, t, seed): &(Option<KernelFamily>, f64, u64)| -> Result<ThermalRow> {
        let positions = sample_uniform_fill(&reference, n)?;
        let mut ens = WorldEnsemble::at_rest(positions, PROTON_MASS, 1)?;
        ens.sort_1d();
        // bandwidth tuned to the expected thermal spread
        let kernel = match family {
            Some(f) => {
                let sigma_t = harmonic_thermal_sigma(k, PROTON_MASS, t);
                let rlap = 3.0 / (8.0 * std::f64::consts::PI.sqrt() * sigma_t.powi(5));
                let (rk, m2) = crate::kernels::unit_kernel_constants(f, 1)?;
                let b = (rk / (m2 * m2 * rlap * n as f64)).powf(0.2);
                Some(KernelSpec::new(f, b, 1)?)
            }
            None => None,
        };
        let model = ForceModel::new(potential.clone(), kernel.clone(), config.v_mode);
        let int_config = IntegratorConfig {
            dt0: 0.05,
            dt_max: 0.05,
            gamma: 1.0,
            temperature: t,
            steps: 40_000,
            seed,
            thermostat: Thermostat::Langevin,
        };
        let mut integrator = Integrator::new(int_config)?;
        // typical restoring force at the thermal spread, so dt stays at
        // dt_max except for genuine outliers
        let sigma_scale = harmonic_thermal_sigma(k, PROTON_MASS, t.max(300.0));
        integrator.set_reference(4.0 * k * sigma_scale);
        let mut forces_fn = |e: &WorldEnsemble| model.forces(e);
        let mut f = model.forces(&ens)?;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0usize;
        for s in 0..40_000 {
            let (fnew, _) = integrator.step(&mut ens, &mut forces_fn, &f)?;
            f = fnew;
            if s >= 10_000 && s % 10 == 0 {
                for x in &ens.positions {
                    sum += x;
                    sum2 += x * x;
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        let var_pos = (sum2 / count as f64 - mean * mean).max(0.0);
        let s2 = match &kernel {
            Some(kspec) => per_axis_variance(kspec.family, 1, kspec.b)?,
            None => 0.0,
        };
        Ok(ThermalRow {
            family,
            temperature: t,
            seed,
            sigma_pos: var_pos.sqrt(),
            sigma_kde: (var_pos + s2).sqrt(),
            sigma_quantum: harmonic_thermal_sigma(k, PROTON_MASS, t),
            sigma_classical: if t > 0.0 { (KB * t / k).sqrt() } else { 0.0 },
        })
    };

    let rows: Vec<ThermalRow> = if config.deterministic {
        jobs.iter().map(run_job).collect::<Result<_>>()?
    } else {
        jobs.par_iter().map(run_job).collect::<Result<_>>()?
    };

    let mut out = open_out(config, &format!("thermal_{}.csv", config.preset))?;
    writeln!(
        out,
        "family,temperature,seed,sigma_pos,sigma_kde,sigma_quantum,sigma_classical"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{:.10e},{:.10e},{:.10e},{:.10e}",
            r.family.map(|f| format!("{f:?}")).unwrap_or_else(|| "none".into()),
            r.temperature,
            r.seed,
            r.sigma_pos,
            r.sigma_kde,
            r.sigma_quantum,
            r.sigma_classical
        )?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TunnelRow {
    pub family: Option<KernelFamily>,
    pub temperature: f64,
    pub seed: u64,
    pub lambda: f64,
    pub nu: f64,
    pub r2: f64,
    pub f0: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFitResult {
    pub rows: Vec<TunnelRow>,
    /// Median ν per (family, T), families keyed as none/gaussian/exponential.
    pub medians: Vec<(Option<KernelFamily>, f64, f64)>,
    pub nu0: f64,
    pub nu0_r2: f64,
    pub beta: f64,
    pub delta_e: f64,
}

impl RateFitResult {
    pub fn median_nu(&self, family: Option<KernelFamily>, t: f64) -> Option<f64> {
        self.medians
            .iter()
            .find(|(f, mt, _)| *f == family && (mt - t).abs() < 1e-9)
            .map(|(_, _, nu)| *nu)
    }
}

/// Double-well escape runs: decay of the left-well population vs
/// temperature for no-kernel, gaussian-kernel and exponential-kernel
/// ensembles, with Arrhenius and Bell model fits.
pub fn tunnel_experiment(config: &RunConfig) -> Result<RateFitResult> {
    config.validate()?;
    let potential = PotentialSpec::preset(&config.preset, 1)?;
    let (k, x0) = match potential.kind {
        PotentialKind::DoubleWell { k, x0 } => (k, x0),
        _ => {
            return Err(MiwError::InvalidConfig(
                "tunneling expects the double-well preset".into(),
            ))
        }
    };
    let delta_e = crate::potentials::double_well_barrier(k, x0);
    let e_zp = crate::potentials::double_well_zero_point_energy(k, PROTON_MASS);
    let a = crate::potentials::double_well_turning_point(k, x0, e_zp)?;
    let beta = bell_beta(a, PROTON_MASS, delta_e);

    let n = *config.n_worlds.first().unwrap_or(&50);
    let omega = (k / PROTON_MASS).sqrt();
    let sigma_gs = (HBAR / (2.0 * PROTON_MASS * omega)).sqrt();

    let families: Vec<Option<KernelFamily>> = match config.kernel {
        Some(f) => vec![Some(f)],
        None => vec![None, Some(KernelFamily::Gaussian), Some(KernelFamily::Exponential)],
    };

    let mut jobs = Vec::new();
    for &family in &families {
        for &t in &config.temperatures {
            for &seed in &config.seeds {
                jobs.push((family, t, seed));
            }
        }
    }

    let run_job = |&(family, t, seed): &(Option<KernelFamily>, f64, u64)| -> Result<TunnelRow> {
        // worlds packed into the left well at the ground-state width
        let positions: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                -x0 + sigma_gs * std::f64::consts::SQRT_2 * erf_inv(2.0 * u - 1.0)
            })
            .collect();
        let mut ens = WorldEnsemble::at_rest(positions, PROTON_MASS, 1)?;
        let kernel = match family {
            Some(f) => {
                let b = bandwidth_silverman(&ens.positions, n, 1)?;
                Some(KernelSpec::new(f, b, 1)?)
            }
            None => None,
        };
        let model = ForceModel::new(
            potential.clone(),
            kernel.clone(),
            if kernel.is_some() {
                config.v_mode
            } else {
                VMode::Pointlike
            },
        );
        let int_config = IntegratorConfig {
            dt0: 0.05,
            dt_max: 0.05,
            gamma: config.gamma,
            temperature: t,
            steps: 0,
            seed,
            thermostat: Thermostat::Langevin,
        };
        let mut integrator = Integrator::new(int_config)?;
        let mut forces_fn = |e: &WorldEnsemble| model.forces(e);
        let mut f = model.forces(&ens)?;
        // worlds range over roughly ±3x0 during escape; baseline the step
        // to the restoring force out there
        let f_init_max = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        integrator.set_reference(f_init_max.max(2.0 * k * x0));
        let stride = 50usize;
        let max_steps = 2_000_000usize;
        let mut times = Vec::new();
        let mut fractions = Vec::new();
        let fraction = |e: &WorldEnsemble| -> Result<f64> {
            match &kernel {
                Some(kspec) => left_fraction_kde(e, kspec),
                None => left_fraction_count(e),
            }
        };
        for s in 0..max_steps {
            if s % stride == 0 {
                let fr = fraction(&ens)?;
                times.push(integrator.time);
                fractions.push(fr);
                // stop once the population has effectively equilibrated
                if fr < 0.52 && s > 0 {
                    break;
                }
            }
            let (fnew, _) = integrator.step(&mut ens, &mut forces_fn, &f)?;
            f = fnew;
        }
        match fit_decay(&times, &fractions) {
            Ok((lambda, f0, r2)) => Ok(TunnelRow {
                family,
                temperature: t,
                seed,
                lambda,
                nu: 0.5 * lambda,
                r2,
                f0,
                converged: true,
            }),
            Err(_) => Ok(TunnelRow {
                family,
                temperature: t,
                seed,
                lambda: f64::NAN,
                nu: f64::NAN,
                r2: f64::NAN,
                f0: f64::NAN,
                converged: false,
            }),
        }
    };

    let rows: Vec<TunnelRow> = if config.deterministic {
        jobs.iter().map(run_job).collect::<Result<_>>()?
    } else {
        jobs.par_iter().map(run_job).collect::<Result<_>>()?
    };

    // medians over seeds
    let mut medians = Vec::new();
    for &family in &families {
        for &t in &config.temperatures {
            let mut nus: Vec<f64> = rows
                .iter()
                .filter(|r| {
                    r.family == family && (r.temperature - t).abs() < 1e-9 && r.converged
                })
                .map(|r| r.nu)
                .collect();
            if nus.is_empty() {
                continue;
            }
            nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push((family, t, nus[nus.len() / 2]));
        }
    }

    // Arrhenius prefactor from the kernel-free medians
    let (temps_fit, nus_fit): (Vec<f64>, Vec<f64>) = medians
        .iter()
        .filter(|(f, _, _)| f.is_none())
        .map(|(_, t, nu)| (*t, *nu))
        .unzip();
    let (nu0, nu0_r2) = if temps_fit.len() >= 3 {
        fit_nu0(&temps_fit, &nus_fit, delta_e)?
    } else {
        (f64::NAN, f64::NAN)
    };

    let result = RateFitResult {
        rows,
        medians,
        nu0,
        nu0_r2,
        beta,
        delta_e,
    };

    let mut out = open_out(config, "tunnel_rates.csv")?;
    writeln!(
        out,
        "family,temperature,seed,lambda,nu,r2,f0,converged"
    )?;
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{:.10e},{:.10e},{:.6},{:.6},{}",
            r.family.map(|f| format!("{f:?}")).unwrap_or_else(|| "none".into()),
            r.temperature,
            r.seed,
            r.lambda,
            r.nu,
            r.r2,
            r.f0,
            r.converged
        )?;
    }
    let mut out = open_out(config, "tunnel_models.csv")?;
    writeln!(out, "temperature,nu_arrhenius,nu_bell")?;
    for &t in &config.temperatures {
        writeln!(
            out,
            "{},{:.10e},{:.10e}",
            t,
            arrhenius(result.nu0, delta_e, t),
            bell(result.nu0, delta_e, beta, t)
        )?;
    }
    Ok(result)
}

/// Eigensolve a preset and write the spectrum head plus ground density.
pub fn numerov_experiment(config: &RunConfig) -> Result<EigenResult> {
    config.validate()?;
    let potential = PotentialSpec::preset(&config.preset, config.d)?;
    let grid = GridSpec::preset(config.d)?;
    let res = solve(&potential_field(&potential, &grid)?, PROTON_MASS, 4)?;
    let mut out = open_out(
        config,
        &format!("numerov_{}_{}d_energies.csv", config.preset, config.d),
    )?;
    writeln!(out, "state,energy_ev")?;
    for (i, e) in res.energies.iter().enumerate() {
        writeln!(out, "{i},{e:.10e}")?;
    }
    let out = open_out(
        config,
        &format!("numerov_{}_{}d_density.csv", config.preset, config.d),
    )?;
    res.ground_density.write_csv(out)?;
    Ok(res)
}
