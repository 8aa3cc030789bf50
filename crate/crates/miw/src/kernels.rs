//! Kernel functions, normalization constants, pairwise derivative tables
//! and bandwidth selection.

use crate::density::WorldEnsemble;
use crate::grid::GridField;
use crate::{MiwError, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// Distinct-but-coincident pair threshold, A.
const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    /// Inverse-spacing approximation of the density; 1D only, no kernel
    /// function attached.
    Original1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Bandwidth, A. Unused by `Original1d`.
    pub b: f64,
    pub d: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, b: f64, d: usize) -> Result<Self> {
        let spec = KernelSpec { family, b, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != KernelFamily::Original1d && !(self.b > 0.0) {
            return Err(MiwError::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.b
            )));
        }
        if self.family == KernelFamily::Original1d && self.d != 1 {
            return Err(MiwError::DimensionMismatch {
                expected: 1,
                got: self.d,
            });
        }
        if self.d == 0 || self.d > 3 {
            return Err(MiwError::DimensionMismatch {
                expected: 3,
                got: self.d,
            });
        }
        Ok(())
    }

    /// Normalization constant of this kernel.
    pub fn normalization(&self) -> Result<f64> {
        normalization_constant(self.family, self.d, self.b)
    }

    /// Kernel value at squared distance `r2`, including normalization.
    pub fn value(&self, r2: f64) -> Result<f64> {
        let c = self.normalization()?;
        Ok(match self.family {
            KernelFamily::Gaussian => c * (-r2 / (self.b * self.b)).exp(),
            KernelFamily::Exponential => c * (-r2.sqrt() / self.b).exp(),
            KernelFamily::Original1d => unreachable!(),
        })
    }

    /// Per-axis variance of the normalized kernel.
    pub fn per_axis_variance(&self) -> Result<f64> {
        per_axis_variance(self.family, self.d, self.b)
    }
}

/// Constant c such that c * integral(K) = 1 over R^D.
pub fn normalization_constant(family: KernelFamily, d: usize, b: f64) -> Result<f64> {
    let sqpi_b = std::f64::consts::PI.sqrt() * b;
    match family {
        KernelFamily::Gaussian => Ok(1.0 / sqpi_b.powi(d as i32)),
        KernelFamily::Exponential => {
            let factorial: f64 = (1..d).map(|i| i as f64).product();
            Ok(gamma(d as f64 / 2.0) / (2.0 * factorial * sqpi_b.powi(d as i32)))
        }
        KernelFamily::Original1d => Err(MiwError::UnsupportedMode(
            "original1d has no kernel function".into(),
        )),
    }
}

/// Surface area of the (D-1)-sphere of radius r.
pub fn sphere_surface(d: usize, r: f64) -> f64 {
    let nd = d as f64;
    2.0 * std::f64::consts::PI.powf(nd / 2.0) / gamma(nd / 2.0) * r.powi(d as i32 - 1)
}

/// Composite-Simpson integral of `f(r) * sphere_surface(r)` over [0, rmax].
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, d: usize, rmax: f64, steps: usize) -> f64 {
    let n = if steps % 2 == 0 { steps } else { steps + 1 };
    let h = rmax / n as f64;
    let eval = |i: usize| {
        let r = i as f64 * h;
        f(r) * sphere_surface(d, r)
    };
    let mut acc = eval(0) + eval(n);
    for i in 1..n {
        acc += eval(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Per-axis variance of the normalized kernel: b^2/2 for the Gaussian,
/// numeric quadrature for the exponential.
pub fn per_axis_variance(family: KernelFamily, d: usize, b: f64) -> Result<f64> {
    match family {
        KernelFamily::Gaussian => Ok(0.5 * b * b),
        KernelFamily::Exponential => {
            let c = normalization_constant(family, d, b)?;
            let second = radial_integral(|r| r * r * (-r / b).exp(), d, 80.0 * b, 4000);
            Ok(c * second / d as f64)
        }
        KernelFamily::Original1d => Err(MiwError::UnsupportedMode(
            "original1d has no kernel function".into(),
        )),
    }
}

/// R(K) = integral of K^2 and per-axis second moment of the kernel at unit
/// bandwidth, as used by the AMISE formula.
pub fn unit_kernel_constants(family: KernelFamily, d: usize) -> Result<(f64, f64)> {
    match family {
        KernelFamily::Gaussian => {
            let rk = (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
            Ok((rk, 0.5))
        }
        KernelFamily::Exponential => {
            let c = normalization_constant(family, d, 1.0)?;
            let rk = radial_integral(|r| (c * (-r).exp()).powi(2), d, 80.0, 4000);
            let m2 = per_axis_variance(family, d, 1.0)?;
            Ok((rk, m2))
        }
        KernelFamily::Original1d => Err(MiwError::UnsupportedMode(
            "original1d has no kernel function".into(),
        )),
    }
}

/// Pairwise displacement, kernel and kernel-derivative tables.
///
/// Layouts: `(i, j)` entries at `i * n + j`, `(i, j, axis)` entries at
/// `(i * n + j) * k + axis`. Diagonal entries of the derivative tables are
/// zero: the self-contribution to the density is constant in the world's
/// own position.
#[derive(Debug, Clone)]
pub struct PairTables {
    pub n: usize,
    pub k: usize,
    pub b: f64,
    pub family: KernelFamily,
    /// r_ij^(a) = x_i^(a) - x_j^(a)
    pub disp: Vec<f64>,
    /// |r_ij|
    pub dist: Vec<f64>,
    /// P_ij, kernel contribution of world j at world i (normalized, / N)
    pub p: Vec<f64>,
    /// dP_ij / dx_i^(a)
    pub pg: Vec<f64>,
    /// d^2 P_ij / d(x_i^(a))^2
    pub pgg: Vec<f64>,
    /// Distinct world pairs closer than the coincidence guard; their
    /// derivative entries were zeroed.
    pub coincident_pairs: usize,
}

impl PairTables {
    #[inline]
    pub fn idx2(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn idx3(&self, i: usize, j: usize, a: usize) -> usize {
        (i * self.n + j) * self.k + a
    }

    /// Factor multiplying P'^(l)_ij in the cross-dimension derivative
    /// blocks: 2 r^(a)/b^2 for the Gaussian kernel, (r^(a)/r)(1/r + 1/b)
    /// for the exponential one. Zero for self and coincident pairs.
    #[inline]
    pub fn cross_factor(&self, i: usize, j: usize, a: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let r = self.dist[self.idx2(i, j)];
        if r < COINCIDENCE_EPS {
            return 0.0;
        }
        let ra = self.disp[self.idx3(i, j, a)];
        match self.family {
            KernelFamily::Gaussian => 2.0 * ra / (self.b * self.b),
            KernelFamily::Exponential => (ra / r) * (1.0 / r + 1.0 / self.b),
            KernelFamily::Original1d => 0.0,
        }
    }
}

/// Build all pairwise kernel quantities for an ensemble.
pub fn pair_tables(ensemble: &WorldEnsemble, spec: &KernelSpec) -> Result<PairTables> {
    spec.validate()?;
    if spec.family == KernelFamily::Original1d {
        return Err(MiwError::UnsupportedMode(
            "pair tables are defined for the gaussian and exponential kernels".into(),
        ));
    }
    if spec.d != ensemble.d {
        return Err(MiwError::DimensionMismatch {
            expected: ensemble.d,
            got: spec.d,
        });
    }
    let n = ensemble.n;
    let k = ensemble.k();
    let b = spec.b;
    let c = spec.normalization()? / n as f64;
    let mut t = PairTables {
        n,
        k,
        b,
        family: spec.family,
        disp: vec![0.0; n * n * k],
        dist: vec![0.0; n * n],
        p: vec![0.0; n * n],
        pg: vec![0.0; n * n * k],
        pgg: vec![0.0; n * n * k],
        coincident_pairs: 0,
    };
    for i in 0..n {
        let xi = ensemble.pos(i);
        for j in 0..n {
            let xj = ensemble.pos(j);
            let pair = t.idx2(i, j);
            let mut r2 = 0.0;
            for a in 0..k {
                let ra = xi[a] - xj[a];
                t.disp[pair * k + a] = ra;
                r2 += ra * ra;
            }
            let r = r2.sqrt();
            t.dist[pair] = r;
            match spec.family {
                KernelFamily::Gaussian => {
                    let p = c * (-r2 / (b * b)).exp();
                    t.p[pair] = p;
                    if i != j {
                        for a in 0..k {
                            let ra = t.disp[pair * k + a];
                            t.pg[pair * k + a] = -2.0 / (b * b) * ra * p;
                            t.pgg[pair * k + a] =
                                -2.0 / (b * b) * (1.0 - 2.0 * ra * ra / (b * b)) * p;
                        }
                    }
                }
                KernelFamily::Exponential => {
                    let p = c * (-r / b).exp();
                    t.p[pair] = p;
                    if i != j {
                        if r < COINCIDENCE_EPS {
                            // cusp: the force direction is undefined
                            t.coincident_pairs += 1;
                        } else {
                            for a in 0..k {
                                let ra = t.disp[pair * k + a];
                                t.pg[pair * k + a] = -ra / (b * r) * p;
                                t.pgg[pair * k + a] = -1.0 / (b * r)
                                    * (1.0 - ra * ra / r2 - ra * ra / (b * r))
                                    * p;
                            }
                        }
                    }
                }
                KernelFamily::Original1d => unreachable!(),
            }
        }
    }
    Ok(t)
}

/// Silverman rule-of-thumb bandwidth from sample positions
/// (`n` worlds by `d` coordinates, row-major).
pub fn bandwidth_silverman(positions: &[f64], n: usize, d: usize) -> Result<f64> {
    if n < 2 || positions.len() != n * d {
        return Err(MiwError::InvalidConfig(format!(
            "need at least two worlds with {d} coordinates each"
        )));
    }
    let mut sigma_sum = 0.0;
    for a in 0..d {
        let mean: f64 = (0..n).map(|i| positions[i * d + a]).sum::<f64>() / n as f64;
        let var: f64 = (0..n)
            .map(|i| (positions[i * d + a] - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        sigma_sum += var.sqrt();
    }
    let sigma = sigma_sum / d as f64;
    if !(sigma > 0.0) {
        return Err(MiwError::DegenerateConfiguration);
    }
    let nd = d as f64;
    Ok(sigma * (4.0 / ((nd + 2.0) * n as f64)).powf(1.0 / (nd + 4.0)))
}

/// Gaussian pilot smoothing along one grid axis (zero outside the box),
/// sigma in grid cells.
fn pilot_smooth_axis(values: &[f64], grid: &crate::grid::GridSpec, axis: usize) -> Vec<f64> {
    const SIGMA_CELLS: f64 = 2.0;
    let radius = (3.0 * SIGMA_CELLS).ceil() as isize;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|o| (-0.5 * (o as f64 / SIGMA_CELLS).powi(2)).exp())
        .collect();
    let wsum: f64 = weights.iter().sum();
    let mut out = vec![0.0; values.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let mut idx = grid.multi_index(flat);
        let center = idx[axis] as isize;
        let mut acc = 0.0;
        for (wi, w) in weights.iter().enumerate() {
            let pos = center + wi as isize - radius;
            if pos < 0 || pos >= grid.points as isize {
                continue;
            }
            idx[axis] = pos as usize;
            acc += w * values[grid.flat_index(&idx)];
        }
        *o = acc / wsum;
    }
    out
}

/// Asymptotic-MISE bandwidth against a known target density on a grid.
///
/// The curvature functional R(lap f) is evaluated after a light gaussian
/// pilot smoothing (2 grid cells per axis). Without it, isolated
/// kernel-width bumps from stragglers in an N-world KDE dominate the
/// integral and drag the bandwidth far below the optimum for the smooth
/// underlying density; for already-smooth targets the smoothing shifts the
/// result by only a few percent.
pub fn bandwidth_amise(target: &GridField, n_worlds: usize, family: KernelFamily) -> Result<f64> {
    let d = target.grid.dim();
    let cellvol = target.grid.cell_volume();
    let mut smoothed = target.clone();
    for axis in 0..d {
        smoothed.values = pilot_smooth_axis(&smoothed.values, &smoothed.grid, axis);
    }
    let lap = smoothed.laplacian();
    let r_lap: f64 = lap.iter().map(|l| l * l).sum::<f64>() * cellvol;
    if !(r_lap > 0.0) {
        return Err(MiwError::FlatDensity);
    }
    let (rk, m2) = unit_kernel_constants(family, d)?;
    let nd = d as f64;
    Ok((nd * rk / (m2 * m2 * r_lap * n_worlds as f64)).powf(1.0 / (nd + 4.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_normalization_1d() {
        // the 1D integral of exp(-|x|/b) is 2b
        for b in [0.05, 0.2, 1.0, 3.0] {
            let c = normalization_constant(KernelFamily::Exponential, 1, b).unwrap();
            assert_relative_eq!(c, 1.0 / (2.0 * b), max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_normalization_1d() {
        let c = normalization_constant(KernelFamily::Gaussian, 1, 1.0).unwrap();
        assert_relative_eq!(c, 1.0 / std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn normalized_kernels_integrate_to_one() {
        for family in [KernelFamily::Gaussian, KernelFamily::Exponential] {
            for d in 1..=3 {
                for b in [0.05, 0.2, 1.0] {
                    let c = normalization_constant(family, d, b).unwrap();
                    let integral = radial_integral(
                        |r| match family {
                            KernelFamily::Gaussian => c * (-r * r / (b * b)).exp(),
                            KernelFamily::Exponential => c * (-r / b).exp(),
                            KernelFamily::Original1d => unreachable!(),
                        },
                        d,
                        60.0 * b,
                        8000,
                    );
                    assert!(
                        (integral - 1.0).abs() < 1e-6,
                        "{family:?} d={d} b={b}: {integral}"
                    );
                }
            }
        }
    }

    #[test]
    fn exponential_radial_integral_closed_form() {
        // integral of r^(D-1) exp(-r/b) over [0, inf) is (D-1)! b^D
        for d in 1..=3usize {
            for b in [0.2, 1.0] {
                let numeric = radial_integral(|r| (-r / b).exp(), d, 80.0 * b, 8000);
                let factorial: f64 = (1..d).map(|i| i as f64).product();
                let analytic = sphere_surface(d, 1.0) * factorial * b.powi(d as i32);
                assert_relative_eq!(numeric, analytic, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn gaussian_per_axis_second_moment() {
        for d in 1..=3usize {
            for b in [0.2, 1.0] {
                let c = normalization_constant(KernelFamily::Gaussian, d, b).unwrap();
                let second = radial_integral(|r| r * r * c * (-r * r / (b * b)).exp(), d, 40.0 * b, 8000);
                assert!(
                    (second / d as f64 - 0.5 * b * b).abs() < 1e-8,
                    "d={d} b={b}"
                );
            }
        }
    }

    #[test]
    fn exponential_per_axis_variance_closed_form() {
        // quadrature should reproduce (D+1) b^2
        for d in 1..=3usize {
            for b in [0.1, 0.5] {
                let v = per_axis_variance(KernelFamily::Exponential, d, b).unwrap();
                assert_relative_eq!(v, (d as f64 + 1.0) * b * b, max_relative = 1e-6);
            }
        }
    }

    fn two_worlds(x: &[f64], d: usize) -> WorldEnsemble {
        WorldEnsemble::new(x.to_vec(), vec![0.0; x.len()], 1.0, d).unwrap()
    }

    #[test]
    fn gaussian_pair_value_and_coincident_gradient() {
        let spec = KernelSpec::new(KernelFamily::Gaussian, 1.0, 1).unwrap();
        let ens = two_worlds(&[0.0, 1.0], 1);
        let t = pair_tables(&ens, &spec).unwrap();
        let expected = (-1.0f64).exp() / (2.0 * std::f64::consts::PI.sqrt());
        assert_relative_eq!(t.p[t.idx2(0, 1)], expected, max_relative = 1e-12);
        assert_relative_eq!(t.p[t.idx2(1, 0)], expected, max_relative = 1e-12);

        let coincident = two_worlds(&[0.3, 0.3], 1);
        let t = pair_tables(&coincident, &spec).unwrap();
        assert_eq!(t.pg[t.idx3(0, 1, 0)], 0.0);
        assert_eq!(t.pg[t.idx3(1, 0, 0)], 0.0);
    }

    #[test]
    fn exponential_coincidence_counter() {
        let spec = KernelSpec::new(KernelFamily::Exponential, 0.5, 1).unwrap();
        let t = pair_tables(&two_worlds(&[0.3, 0.3], 1), &spec).unwrap();
        assert_eq!(t.coincident_pairs, 2);
        assert_eq!(t.pg[t.idx3(0, 1, 0)], 0.0);
    }

    #[test]
    fn pair_symmetry() {
        let spec = KernelSpec::new(KernelFamily::Exponential, 0.3, 2).unwrap();
        let ens = two_worlds(&[0.1, -0.4, 0.7, 0.2, -0.3, 0.9], 2);
        let t = pair_tables(&ens, &spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(t.p[t.idx2(i, j)], t.p[t.idx2(j, i)], max_relative = 1e-14);
                for a in 0..2 {
                    assert_relative_eq!(
                        t.pg[t.idx3(i, j, a)],
                        -t.pg[t.idx3(j, i, a)],
                        max_relative = 1e-14
                    );
                }
            }
        }
    }

    #[test]
    fn pair_gradients_match_finite_differences() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for family in [KernelFamily::Gaussian, KernelFamily::Exponential] {
            for d in 1..=3usize {
                let b = 0.4;
                let spec = KernelSpec::new(family, b, d).unwrap();
                let n = 4;
                let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let ens = two_worlds(&x, d);
                let t = pair_tables(&ens, &spec).unwrap();
                let h = 1e-6;
                for i in 0..n {
                    for j in 0..n {
                        if i == j || t.dist[t.idx2(i, j)] < 10.0 * b * f64::EPSILON.sqrt() {
                            continue;
                        }
                        for a in 0..d {
                            let perturb = |delta: f64| {
                                let mut xs = x.clone();
                                xs[i * d + a] += delta;
                                let e = two_worlds(&xs, d);
                                let tt = pair_tables(&e, &spec).unwrap();
                                (tt.p[tt.idx2(i, j)], tt.pg[tt.idx3(i, j, a)])
                            };
                            let (pp, gp) = perturb(h);
                            let (pm, gm) = perturb(-h);
                            let fd_g = (pp - pm) / (2.0 * h);
                            let g = t.pg[t.idx3(i, j, a)];
                            assert!(
                                (g - fd_g).abs() / g.abs().max(1e-12) < 1e-6,
                                "{family:?} d={d} grad: {g} vs {fd_g}"
                            );
                            let fd_gg = (gp - gm) / (2.0 * h);
                            let gg = t.pgg[t.idx3(i, j, a)];
                            assert!(
                                (gg - fd_gg).abs() / gg.abs().max(1e-9) < 1e-4,
                                "{family:?} d={d} second: {gg} vs {fd_gg}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn silverman_formula_and_errors() {
        // D=1, N=100, sigma = 0.3 gives 0.3 (4/300)^(1/5)
        let n = 100;
        let positions: Vec<f64> = (0..n).map(|i| (i as f64 / (n - 1) as f64) - 0.5).collect();
        let mean = 0.0;
        let sigma = (positions.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
            .sqrt();
        let scaled: Vec<f64> = positions.iter().map(|x| x * 0.3 / sigma).collect();
        let b = bandwidth_silverman(&scaled, n, 1).unwrap();
        assert_relative_eq!(b, 0.3 * (4.0f64 / 300.0).powf(0.2), max_relative = 1e-12);

        assert!(matches!(
            bandwidth_silverman(&vec![1.0; 10], 10, 1),
            Err(MiwError::DegenerateConfiguration)
        ));
    }

    #[test]
    fn silverman_shrinks_with_n() {
        let mut prev = f64::INFINITY;
        for n in [10usize, 100, 1000, 10000] {
            let positions: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let b = bandwidth_silverman(&positions, n, 1).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn amise_scaling_with_n() {
        use crate::grid::{GridField, GridSpec};
        let grid = GridSpec::cubic(1, -2.0, 2.0, 200).unwrap();
        let sigma: f64 = 0.3;
        let values: Vec<f64> = (0..grid.len())
            .map(|i| (-grid.node(i)[0].powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let mut target = GridField::new(grid, values).unwrap();
        target.normalize().unwrap();
        for family in [KernelFamily::Gaussian, KernelFamily::Exponential] {
            let b1 = bandwidth_amise(&target, 50, family).unwrap();
            let b2 = bandwidth_amise(&target, 100, family).unwrap();
            assert_relative_eq!(b2 / b1, 2.0f64.powf(-0.2), max_relative = 1e-10);
        }
    }

    #[test]
    fn amise_flat_density_rejected() {
        use crate::grid::{GridField, GridSpec};
        let grid = GridSpec::cubic(1, -2.0, 2.0, 200).unwrap();
        let target = GridField::new(grid, vec![0.0; 200]).unwrap();
        assert!(matches!(
            bandwidth_amise(&target, 50, KernelFamily::Gaussian),
            Err(MiwError::FlatDensity)
        ));
    }
}
