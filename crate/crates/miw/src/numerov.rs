//! Matrix eigensolver for ground states on a grid.
//!
//! The 1D fourth-order (Numerov) discretization −(ħ²/2m) B⁻¹A ψ + Vψ = Eψ
//! with A the second-difference stencil and B = I + (h²/12)A extends to D
//! dimensions through Kronecker sums: A = Σᵢ Aᵢ, B = I + (1/12) Σᵢ hᵢ²Aᵢ,
//! plus the mixed correction Σ_{i<j} AᵢAⱼ (hᵢ²+hⱼ²)/12. The wavefunction is
//! implicitly zero outside the box (hard-wall truncation).
//!
//! All Aᵢ commute and are symmetric, so B⁻¹(A + mixed) is symmetric and the
//! assembled Hamiltonian can be fed to the symmetric eigensolver after
//! numerical symmetrization.

use crate::grid::{GridField, GridSpec};
use crate::potentials::PotentialSpec;
use crate::units::HBAR;
use crate::{MiwError, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, UPLO};

/// Ground-state solve output.
#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Lowest eigenvalues, ascending, eV.
    pub energies: Vec<f64>,
    /// |ψ₀|² normalized to unit integral on the grid.
    pub ground_density: GridField,
}

impl EigenResult {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }
}

/// Apply the 1D second-difference stencil along `axis` to dense matrix
/// accumulation: out += coeff · Sᵢ acting from configuration `col` space.
/// Entries connect nodes that differ by ±1 along the axis.
fn add_axis_stencil(m: &mut Array2<f64>, grid: &GridSpec, axis: usize, coeff: f64) {
    let n = grid.len();
    let h2 = grid.step(axis) * grid.step(axis);
    for flat in 0..n {
        let idx = grid.multi_index(flat);
        m[(flat, flat)] += coeff * (-2.0) / h2;
        if idx[axis] > 0 {
            let mut o = idx.clone();
            o[axis] -= 1;
            m[(flat, grid.flat_index(&o))] += coeff / h2;
        }
        if idx[axis] + 1 < grid.points {
            let mut o = idx.clone();
            o[axis] += 1;
            m[(flat, grid.flat_index(&o))] += coeff / h2;
        }
    }
}

/// out += coeff · Sᵢ Sⱼ for i ≠ j (stencil product, offsets in two axes).
fn add_mixed_stencil(m: &mut Array2<f64>, grid: &GridSpec, ai: usize, aj: usize, coeff: f64) {
    let n = grid.len();
    let hi2 = grid.step(ai) * grid.step(ai);
    let hj2 = grid.step(aj) * grid.step(aj);
    let offsets = [(-1i64, 1.0), (0, -2.0), (1, 1.0)];
    for flat in 0..n {
        let idx = grid.multi_index(flat);
        for (di, ci) in offsets {
            let ti = idx[ai] as i64 + di;
            if ti < 0 || ti >= grid.points as i64 {
                continue;
            }
            for (dj, cj) in offsets {
                let tj = idx[aj] as i64 + dj;
                if tj < 0 || tj >= grid.points as i64 {
                    continue;
                }
                let mut o = idx.clone();
                o[ai] = ti as usize;
                o[aj] = tj as usize;
                m[(flat, grid.flat_index(&o))] += coeff * ci * cj / (hi2 * hj2);
            }
        }
    }
}

/// Dense kinetic operator −(ħ²/2m) B⁻¹(A + mixed).
fn kinetic_matrix(grid: &GridSpec, mass: f64) -> Result<Array2<f64>> {
    let d = grid.dim();
    let n = grid.len();
    let mut a = Array2::<f64>::zeros((n, n));
    for axis in 0..d {
        add_axis_stencil(&mut a, grid, axis, 1.0);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let c = (grid.step(i).powi(2) + grid.step(j).powi(2)) / 12.0;
            add_mixed_stencil(&mut a, grid, i, j, c);
        }
    }
    let mut b = Array2::<f64>::eye(n);
    for axis in 0..d {
        add_axis_stencil(&mut b, grid, axis, grid.step(axis).powi(2) / 12.0);
    }
    let b_inv = b
        .inv()
        .map_err(|e| MiwError::Eigen(format!("B inversion failed: {e}")))?;
    let mut t = b_inv.dot(&a);
    t.mapv_inplace(|x| -HBAR * HBAR / (2.0 * mass) * x);
    Ok(t)
}

/// Solve for the lowest `n_states` states of the potential sampled in `v`.
pub fn solve(v: &GridField, mass: f64, n_states: usize) -> Result<EigenResult> {
    if n_states == 0 {
        return Err(MiwError::InvalidConfig("need at least one state".into()));
    }
    let grid = &v.grid;
    let n = grid.len();
    let mut m = kinetic_matrix(grid, mass)?;
    for i in 0..n {
        m[(i, i)] += v.values[i];
    }
    // enforce exact symmetry before the symmetric solver
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let (vals, vecs) = m
        .eigh(UPLO::Lower)
        .map_err(|e| MiwError::Eigen(format!("symmetric eigensolve failed: {e}")))?;
    let energies: Vec<f64> = vals.iter().take(n_states).copied().collect();
    let psi: Array1<f64> = vecs.column(0).to_owned();
    let mut density = GridField::new(grid.clone(), psi.iter().map(|p| p * p).collect())?;
    density.normalize()?;
    Ok(EigenResult {
        energies,
        ground_density: density,
    })
}

/// Sample a potential on a grid.
pub fn potential_field(potential: &PotentialSpec, grid: &GridSpec) -> Result<GridField> {
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        values.push(potential.eval(&grid.node(flat))?.v);
    }
    GridField::new(grid.clone(), values)
}

/// Ground state of a preset-style potential on its grid.
pub fn solve_potential(
    potential: &PotentialSpec,
    grid: &GridSpec,
    mass: f64,
    n_states: usize,
) -> Result<EigenResult> {
    solve(&potential_field(potential, grid)?, mass, n_states)
}

/// 1D cross-check path: eigensolve the unsymmetrized B⁻¹-form operator with
/// the general (non-symmetric) solver and return the lowest real eigenvalue.
pub fn ground_energy_general_1d(v: &GridField, mass: f64) -> Result<f64> {
    if v.grid.dim() != 1 {
        return Err(MiwError::DimensionMismatch {
            expected: 1,
            got: v.grid.dim(),
        });
    }
    let mut m = kinetic_matrix(&v.grid, mass)?;
    for i in 0..v.grid.len() {
        m[(i, i)] += v.values[i];
    }
    let (vals, _) = m
        .eig()
        .map_err(|e| MiwError::Eigen(format!("general eigensolve failed: {e}")))?;
    vals.iter()
        .filter(|z| z.im.abs() < 1e-8)
        .map(|z| z.re)
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.min(x)))
        })
        .ok_or_else(|| MiwError::Eigen("no real eigenvalues".into()))
}

/// Analytic isotropic-harmonic ground energy D·ħω/2.
pub fn harmonic_ground_energy(k: f64, mass: f64, d: usize) -> f64 {
    0.5 * d as f64 * HBAR * (k / mass).sqrt()
}

/// Analytic harmonic ground density on a grid.
pub fn harmonic_ground_density(k: f64, mass: f64, grid: &GridSpec) -> Result<GridField> {
    let omega = (k / mass).sqrt();
    let sigma2 = HBAR / (2.0 * mass * omega);
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let r2: f64 = grid.node(flat).iter().map(|c| c * c).sum();
        values.push((-r2 / (2.0 * sigma2)).exp());
    }
    let mut f = GridField::new(grid.clone(), values)?;
    f.normalize()?;
    Ok(f)
}
