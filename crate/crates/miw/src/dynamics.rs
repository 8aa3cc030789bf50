//! Time integration: velocity Verlet, Langevin thermostat, adaptive
//! timestep, trajectory recording.

use crate::density::WorldEnsemble;
use crate::forces::{EnergyReport, ForceModel};
use crate::units::KB;
use crate::{MiwError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thermostat {
    Off,
    Langevin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Base step, fs.
    pub dt0: f64,
    /// Upper bound on the adaptive step, fs.
    pub dt_max: f64,
    /// Friction, 1/fs.
    pub gamma: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    pub steps: usize,
    pub seed: u64,
    pub thermostat: Thermostat,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0) || !(self.dt_max >= self.dt0) {
            return Err(MiwError::InvalidConfig(format!(
                "need 0 < dt0 <= dt_max, got dt0={} dt_max={}",
                self.dt0, self.dt_max
            )));
        }
        if self.gamma < 0.0 || self.temperature < 0.0 {
            return Err(MiwError::InvalidConfig(
                "gamma and temperature must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Step size scaled down when forces exceed the reference level:
/// dt = min(dt0 · max|F_ref| / max|F_now|, dt_max).
pub fn adaptive_dt(f_now_max: f64, f_ref_max: f64, config: &IntegratorConfig) -> f64 {
    if f_now_max <= 0.0 || f_ref_max <= 0.0 {
        return config.dt_max;
    }
    (config.dt0 * f_ref_max / f_now_max).min(config.dt_max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Velocity-Verlet / BAOAB stepper with per-run RNG and force-reference
/// bookkeeping for the adaptive timestep.
pub struct Integrator {
    pub config: IntegratorConfig,
    rng: ChaCha8Rng,
    f_ref_max: Option<f64>,
    pub time: f64,
}

impl Integrator {
    pub fn new(config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Integrator {
            config,
            rng,
            f_ref_max: None,
            time: 0.0,
        })
    }

    /// Forget the force reference; the next step re-baselines max|F_ref|.
    /// Called at sequence boundaries of the relaxation protocol.
    pub fn rebaseline(&mut self) {
        self.f_ref_max = None;
    }

    /// Pin the force reference explicitly. Thermostatted runs that start
    /// from a near-equilibrium configuration should use the typical thermal
    /// force scale here; otherwise the tiny startup forces become the
    /// baseline and every later step is needlessly (and force-correlatedly)
    /// shortened.
    pub fn set_reference(&mut self, f_ref_max: f64) {
        self.f_ref_max = Some(f_ref_max);
    }

    /// One BAOAB step: half-kick, half-drift, friction/noise velocity
    /// update with the exact exp(−γ·dt) coefficient, half-drift, half-kick
    /// with freshly evaluated forces. Returns the new forces and the step
    /// actually taken.
    pub fn step(
        &mut self,
        ensemble: &mut WorldEnsemble,
        forces_fn: &mut dyn FnMut(&WorldEnsemble) -> Result<Vec<f64>>,
        f_prev: &[f64],
    ) -> Result<(Vec<f64>, f64)> {
        let f_now_max = max_abs(f_prev);
        // The reference level is the first non-vanishing force maximum seen
        // since the last rebaseline; an all-zero snapshot must not pin the
        // reference (and hence dt) to zero.
        if self.f_ref_max.is_none() && f_now_max > 0.0 {
            self.f_ref_max = Some(f_now_max);
        }
        let f_ref = self.f_ref_max.unwrap_or(0.0);
        let dt = adaptive_dt(f_now_max, f_ref, &self.config);
        let m = ensemble.mass;

        for (v, f) in ensemble.velocities.iter_mut().zip(f_prev) {
            *v += 0.5 * dt * f / m;
        }
        for (x, v) in ensemble.positions.iter_mut().zip(&ensemble.velocities) {
            *x += 0.5 * dt * v;
        }
        if self.config.thermostat == Thermostat::Langevin {
            let c1 = (-self.config.gamma * dt).exp();
            let c2 = ((1.0 - c1 * c1) * KB * self.config.temperature / m).sqrt();
            for v in ensemble.velocities.iter_mut() {
                let xi: f64 = StandardNormal.sample(&mut self.rng);
                *v = c1 * *v + c2 * xi;
            }
        }
        for (x, v) in ensemble.positions.iter_mut().zip(&ensemble.velocities) {
            *x += 0.5 * dt * v;
        }
        let f_new = forces_fn(ensemble)?;
        if !max_abs(&f_new).is_finite() {
            return Err(MiwError::NonFiniteForce { world: 0 });
        }
        for (v, f) in ensemble.velocities.iter_mut().zip(&f_new) {
            *v += 0.5 * dt * f / m;
        }
        self.time += dt;
        Ok((f_new, dt))
    }
}

/// Recorded samples of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Positions per sample, N×K row-major.
    pub snapshots: Vec<Vec<f64>>,
    pub energies: Vec<EnergyReport>,
    pub sample_stride: usize,
    pub n: usize,
    pub k: usize,
}

impl Trajectory {
    /// One row per sample: time then all coordinates.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t_fs".to_string()];
        for i in 0..self.n {
            for a in 0..self.k {
                header.push(format!("x{i}_{a}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            let row: Vec<String> = snap.iter().map(|x| format!("{x:.10e}")).collect();
            writeln!(w, "{t:.10e},{}", row.join(","))?;
        }
        Ok(())
    }

    /// Compact binary layout: magic "MIWT", version u32, then n, k, stride
    /// and sample count as u64, then per sample the time followed by n·k
    /// coordinates, all little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"MIWT")?;
        w.write_all(&1u32.to_le_bytes())?;
        for v in [self.n as u64, self.k as u64, self.sample_stride as u64, self.times.len() as u64]
        {
            w.write_all(&v.to_le_bytes())?;
        }
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            w.write_all(&t.to_le_bytes())?;
            for x in snap {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Trajectory> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"MIWT" {
            return Err(MiwError::InvalidConfig("bad trajectory magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Err(MiwError::InvalidConfig(format!(
                "unsupported trajectory version {version}"
            )));
        }
        let mut b8 = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = read_u64(&mut r)? as usize;
        let k = read_u64(&mut r)? as usize;
        let stride = read_u64(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let mut times = Vec::with_capacity(count);
        let mut snapshots = Vec::with_capacity(count);
        let mut b8 = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            times.push(f64::from_le_bytes(b8));
            let mut snap = Vec::with_capacity(n * k);
            for _ in 0..n * k {
                r.read_exact(&mut b8)?;
                snap.push(f64::from_le_bytes(b8));
            }
            snapshots.push(snap);
        }
        Ok(Trajectory {
            times,
            snapshots,
            energies: Vec::new(),
            sample_stride: stride,
            n,
            k,
        })
    }
}

/// Integrate `config.steps` steps under the given force model, recording
/// every `stride`-th state (the initial state is always recorded).
pub fn run(
    ensemble: &mut WorldEnsemble,
    model: &ForceModel,
    config: &IntegratorConfig,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(MiwError::InvalidConfig("stride must be positive".into()));
    }
    let mut integrator = Integrator::new(config.clone())?;
    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        energies: Vec::new(),
        sample_stride: stride,
        n: ensemble.n,
        k: ensemble.k(),
    };
    let mut forces_fn = |e: &WorldEnsemble| model.forces(e);
    let mut f = model.forces(ensemble)?;
    for s in 0..=config.steps {
        if s % stride == 0 || s == config.steps {
            traj.times.push(integrator.time);
            traj.snapshots.push(ensemble.positions.clone());
            traj.energies.push(model.energy(ensemble)?);
        }
        if s == config.steps {
            break;
        }
        let (f_new, _) = integrator.step(ensemble, &mut forces_fn, &f)?;
        f = f_new;
    }
    Ok(traj)
}
