//! Interworld quantum forces and total-energy accounting.
//!
//! The repulsive coupling between worlds derives from the kernel density
//! estimate: g_i^(k) = (hbar/2) P_i'^(k)/P_i and U = (1/2m) sum g^2. Forces
//! are the analytic derivative of U, organised in four summation blocks; the
//! two cross-dimension blocks vanish in 1D.

use crate::density::WorldEnsemble;
use crate::kernels::{pair_tables, per_axis_variance, KernelFamily, KernelSpec};
use crate::potentials::PotentialSpec;
use crate::units::HBAR;
use crate::{MiwError, Result};
use serde::{Deserialize, Serialize};

/// How the external potential is evaluated per world.
///
/// A kernel-carrying world represents a distributed density, so the bare
/// point value V(x_i) underestimates the potential energy; `Taylor2` adds
/// the second-order convolution correction (s^2/2)·lap V with s^2 the kernel
/// per-axis variance, and `Analytic` is the exact kernel convolution
/// (harmonic potentials only, where it coincides with `Taylor2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VMode {
    Pointlike,
    Taylor2,
    Analytic,
}

impl Default for VMode {
    fn default() -> Self {
        VMode::Taylor2
    }
}

/// Interworld potential, per-world log-density gradients and forces.
#[derive(Debug, Clone)]
pub struct MiwForceField {
    /// U_MW, eV. Non-negative by construction.
    pub u: f64,
    /// g_i^(k), eV·fs/Å, N×K row-major.
    pub g: Vec<f64>,
    /// Forces −dU/dx, eV/Å, N×K row-major.
    pub forces: Vec<f64>,
}

/// Energy bookkeeping for one configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyReport {
    pub u_mw: f64,
    pub u_corr: f64,
    pub v_ext: f64,
    pub kinetic: f64,
    pub total: f64,
    pub v_mode: VMode,
}

/// Interworld potential and analytic forces for the gaussian or exponential
/// kernel.
pub fn interworld(ensemble: &WorldEnsemble, kernel: &KernelSpec) -> Result<MiwForceField> {
    if ensemble.n < 2 {
        return Err(MiwError::DegenerateConfiguration);
    }
    let t = pair_tables(ensemble, kernel)?;
    let n = t.n;
    let kk = t.k;
    let mass = ensemble.mass;

    // Per-world sums over the pair tables.
    let mut pi = vec![0.0; n];
    let mut pgi = vec![0.0; n * kk];
    let mut pggi = vec![0.0; n * kk];
    for i in 0..n {
        for j in 0..n {
            pi[i] += t.p[t.idx2(i, j)];
            for a in 0..kk {
                pgi[i * kk + a] += t.pg[t.idx3(i, j, a)];
                pggi[i * kk + a] += t.pgg[t.idx3(i, j, a)];
            }
        }
    }

    let mut g = vec![0.0; n * kk];
    let mut u = 0.0;
    for i in 0..n {
        for a in 0..kk {
            g[i * kk + a] = 0.5 * HBAR * pgi[i * kk + a] / pi[i];
            u += g[i * kk + a] * g[i * kk + a] / (2.0 * mass);
        }
    }

    // Cross-dimension sums sum_j c_nj^(k) P'_nj^(l), needed only for K > 1.
    let mut cross = vec![0.0; n * kk * kk];
    if kk > 1 {
        for i in 0..n {
            for j in 0..n {
                for a in 0..kk {
                    let cf = t.cross_factor(i, j, a);
                    if cf == 0.0 {
                        continue;
                    }
                    for l in 0..kk {
                        cross[(i * kk + a) * kk + l] += cf * t.pg[t.idx3(i, j, l)];
                    }
                }
            }
        }
    }

    let mut forces = vec![0.0; n * kk];
    for nw in 0..n {
        for l in 0..kk {
            // Block 1: i = n, k = l.
            let mut acc = 2.0 * g[nw * kk + l]
                * (-pgi[nw * kk + l] * pgi[nw * kk + l] / (pi[nw] * pi[nw])
                    + pggi[nw * kk + l] / pi[nw]);
            // Block 2: i != n, k = l.
            for i in 0..n {
                if i == nw {
                    continue;
                }
                acc += 2.0 * g[i * kk + l]
                    * (t.pg[t.idx3(i, nw, l)] * pgi[i * kk + l] / (pi[i] * pi[i])
                        - t.pgg[t.idx3(i, nw, l)] / pi[i]);
            }
            if kk > 1 {
                // Block 3: i = n, k != l.
                for a in 0..kk {
                    if a == l {
                        continue;
                    }
                    acc += 2.0 * g[nw * kk + a]
                        * (-pgi[nw * kk + a] * pgi[nw * kk + l] / (pi[nw] * pi[nw])
                            - cross[(nw * kk + a) * kk + l] / pi[nw]);
                }
                // Block 4: i != n, k != l.
                for i in 0..n {
                    if i == nw {
                        continue;
                    }
                    for a in 0..kk {
                        if a == l {
                            continue;
                        }
                        acc += 2.0 * g[i * kk + a]
                            * (pgi[i * kk + a] * t.pg[t.idx3(i, nw, l)] / (pi[i] * pi[i])
                                + t.cross_factor(i, nw, a) * t.pg[t.idx3(i, nw, l)] / pi[i]);
                    }
                }
            }
            let f = -acc * HBAR / (4.0 * mass);
            if !f.is_finite() {
                return Err(MiwError::NonFiniteForce { world: nw });
            }
            forces[nw * kk + l] = f;
        }
    }
    Ok(MiwForceField { u, g, forces })
}

/// Smallest admissible gap between adjacent sorted worlds.
pub const MIN_GAP: f64 = 1e-9;

/// Interworld potential of the inverse-spacing method: U = (hbar^2/8m) sum
/// sigma_n^2 with sigma_n = 1/(x_{n+1}-x_n) - 1/(x_n-x_{n-1}) and sigma = 0
/// at both boundary worlds.
pub fn interworld_original_1d(ensemble: &WorldEnsemble) -> Result<MiwForceField> {
    if ensemble.d != 1 {
        return Err(MiwError::DimensionMismatch {
            expected: 1,
            got: ensemble.d,
        });
    }
    if ensemble.n < 3 {
        return Err(MiwError::DegenerateConfiguration);
    }
    ensemble.check_sorted_1d()?;
    let n = ensemble.n;
    let x = &ensemble.positions;
    let mass = ensemble.mass;

    let mut gaps = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let gp = x[i + 1] - x[i];
        if gp < MIN_GAP {
            return Err(MiwError::VanishingGap { index: i });
        }
        gaps[i] = gp;
    }

    let mut sigma = vec![0.0; n];
    for i in 1..n - 1 {
        sigma[i] = 1.0 / gaps[i] - 1.0 / gaps[i - 1];
    }
    let pref = HBAR * HBAR / (8.0 * mass);
    let u: f64 = sigma.iter().map(|s| pref * s * s).sum();

    // dU/dx_m = (hbar^2/4m) sum_n sigma_n dsigma_n/dx_m; only n in
    // {m-1, m, m+1} contribute and boundary sigmas are fixed at zero.
    let dpref = HBAR * HBAR / (4.0 * mass);
    let mut forces = vec![0.0; n];
    let mut g = vec![0.0; n];
    for m in 0..n {
        let mut acc = 0.0;
        if m >= 1 && m < n - 1 {
            acc += sigma[m] * (1.0 / (gaps[m] * gaps[m]) + 1.0 / (gaps[m - 1] * gaps[m - 1]));
        }
        if m + 1 < n - 1 {
            acc -= sigma[m + 1] / (gaps[m] * gaps[m]);
        }
        if m >= 2 {
            acc -= sigma[m - 1] / (gaps[m - 1] * gaps[m - 1]);
        }
        forces[m] = -dpref * acc;
        g[m] = 0.5 * HBAR * sigma[m];
    }
    Ok(MiwForceField { u, g, forces })
}

/// Constant kernel self-interaction energy entering the total-energy
/// bookkeeping: gaussian hbar^2 D/(4 m b^2), exponential
/// hbar^2 D/(8 m b^2); zero for the kernel-free methods.
pub fn internal_energy_correction(kernel: &KernelSpec, mass: f64) -> f64 {
    let d = kernel.d as f64;
    let b2 = kernel.b * kernel.b;
    match kernel.family {
        KernelFamily::Gaussian => HBAR * HBAR * d / (4.0 * mass * b2),
        KernelFamily::Exponential => HBAR * HBAR * d / (8.0 * mass * b2),
        KernelFamily::Original1d => 0.0,
    }
}

fn taylor2_variance(kernel: Option<&KernelSpec>) -> Result<f64> {
    match kernel {
        Some(k) if k.family != KernelFamily::Original1d => {
            per_axis_variance(k.family, k.d, k.b)
        }
        _ => Err(MiwError::UnsupportedMode(
            "distributed potential evaluation needs a gaussian or exponential kernel".into(),
        )),
    }
}

/// External potential energy of the ensemble under the chosen evaluation
/// mode.
pub fn external_potential_energy(
    ensemble: &WorldEnsemble,
    potential: &PotentialSpec,
    kernel: Option<&KernelSpec>,
    mode: VMode,
) -> Result<f64> {
    let s2 = match mode {
        VMode::Pointlike => 0.0,
        VMode::Taylor2 | VMode::Analytic => taylor2_variance(kernel)?,
    };
    if mode == VMode::Analytic && !potential.is_harmonic() {
        return Err(MiwError::UnsupportedMode(
            "analytic kernel convolution is only available for harmonic potentials".into(),
        ));
    }
    let mut v = 0.0;
    for i in 0..ensemble.n {
        let val = potential.eval(ensemble.pos(i))?;
        v += val.v + 0.5 * s2 * val.laplacian;
    }
    Ok(v)
}

/// Forces from the external potential alone, mode-consistent with
/// [`external_potential_energy`].
pub fn external_forces(
    ensemble: &WorldEnsemble,
    potential: &PotentialSpec,
    kernel: Option<&KernelSpec>,
    mode: VMode,
) -> Result<Vec<f64>> {
    let s2 = match mode {
        VMode::Pointlike => 0.0,
        VMode::Taylor2 | VMode::Analytic => taylor2_variance(kernel)?,
    };
    let kk = ensemble.k();
    let mut f = vec![0.0; ensemble.n * kk];
    for i in 0..ensemble.n {
        let val = potential.eval(ensemble.pos(i))?;
        let gl = if s2 != 0.0 {
            potential.grad_laplacian(ensemble.pos(i))?
        } else {
            vec![0.0; kk]
        };
        for a in 0..kk {
            f[i * kk + a] = -val.grad[a] - 0.5 * s2 * gl[a];
        }
    }
    Ok(f)
}

/// Full force model: external potential plus optional interworld coupling.
#[derive(Debug, Clone)]
pub struct ForceModel {
    pub potential: PotentialSpec,
    pub kernel: Option<KernelSpec>,
    pub v_mode: VMode,
}

impl ForceModel {
    pub fn new(potential: PotentialSpec, kernel: Option<KernelSpec>, v_mode: VMode) -> Self {
        ForceModel {
            potential,
            kernel,
            v_mode,
        }
    }

    fn interworld_field(&self, ensemble: &WorldEnsemble) -> Result<Option<MiwForceField>> {
        match &self.kernel {
            None => Ok(None),
            Some(k) if k.family == KernelFamily::Original1d => {
                Ok(Some(interworld_original_1d(ensemble)?))
            }
            Some(k) => Ok(Some(interworld(ensemble, k)?)),
        }
    }

    /// Total forces (interworld + external), N×K row-major.
    pub fn forces(&self, ensemble: &WorldEnsemble) -> Result<Vec<f64>> {
        let mut f = external_forces(ensemble, &self.potential, self.kernel.as_ref(), self.v_mode)?;
        if let Some(field) = self.interworld_field(ensemble)? {
            for (fi, mi) in f.iter_mut().zip(&field.forces) {
                *fi += mi;
            }
        }
        Ok(f)
    }

    /// Assembles the total-energy report: U_MW + U_corr + V_ext + KE.
    pub fn energy(&self, ensemble: &WorldEnsemble) -> Result<EnergyReport> {
        let u_mw = match self.interworld_field(ensemble)? {
            Some(field) => field.u,
            None => 0.0,
        };
        let u_corr = self
            .kernel
            .as_ref()
            .map(|k| internal_energy_correction(k, ensemble.mass))
            .unwrap_or(0.0);
        let v_ext =
            external_potential_energy(ensemble, &self.potential, self.kernel.as_ref(), self.v_mode)?;
        let kinetic = ensemble.kinetic_energy();
        Ok(EnergyReport {
            u_mw,
            u_corr,
            v_ext,
            kinetic,
            total: u_mw + u_corr + v_ext + kinetic,
            v_mode: self.v_mode,
        })
    }
}

/// Convenience wrapper over [`ForceModel::energy`].
pub fn total_energy(
    ensemble: &WorldEnsemble,
    potential: &PotentialSpec,
    kernel: Option<&KernelSpec>,
    mode: VMode,
) -> Result<EnergyReport> {
    ForceModel::new(potential.clone(), kernel.cloned(), mode).energy(ensemble)
}
