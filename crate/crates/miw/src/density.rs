//! World ensembles, density reconstruction and (re)sampling.

use crate::grid::{GridField, GridSpec};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::{MiwError, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

/// Positions and velocities of N worlds of a single quantum particle in D
/// dimensions (K = D degrees of freedom per world). Flat row-major layout,
/// world-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldEnsemble {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Mass per degree of freedom, eV fs^2/A^2.
    pub mass: f64,
    pub d: usize,
    pub n: usize,
}

impl WorldEnsemble {
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>, mass: f64, d: usize) -> Result<Self> {
        if d == 0 || positions.len() % d != 0 || positions.len() != velocities.len() {
            return Err(MiwError::DimensionMismatch {
                expected: d,
                got: positions.len(),
            });
        }
        if !(mass > 0.0)
            || positions.iter().any(|v| !v.is_finite())
            || velocities.iter().any(|v| !v.is_finite())
        {
            return Err(MiwError::InvalidConfig("non-finite ensemble entry".into()));
        }
        let n = positions.len() / d;
        Ok(WorldEnsemble {
            positions,
            velocities,
            mass,
            d,
            n,
        })
    }

    /// Worlds at rest.
    pub fn at_rest(positions: Vec<f64>, mass: f64, d: usize) -> Result<Self> {
        let vel = vec![0.0; positions.len()];
        Self::new(positions, vel, mass, d)
    }

    /// Degrees of freedom per world (single particle: K = D).
    pub fn k(&self) -> usize {
        self.d
    }

    pub fn pos(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.velocities.iter().map(|v| v * v).sum::<f64>()
    }

    /// Check the 1D ordering x_{n+1} > x_n required by the inverse-spacing
    /// density.
    pub fn check_sorted_1d(&self) -> Result<()> {
        if self.d != 1 {
            return Err(MiwError::DimensionMismatch {
                expected: 1,
                got: self.d,
            });
        }
        for i in 1..self.n {
            if self.positions[i] <= self.positions[i - 1] {
                return Err(MiwError::OrderingViolation { index: i });
            }
        }
        Ok(())
    }

    /// Sort worlds by position (1D); velocities follow their worlds.
    pub fn sort_1d(&mut self) {
        assert_eq!(self.d, 1);
        let mut pairs: Vec<(f64, f64)> = self
            .positions
            .iter()
            .zip(&self.velocities)
            .map(|(&x, &v)| (x, v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, (x, v)) in pairs.into_iter().enumerate() {
            self.positions[i] = x;
            self.velocities[i] = v;
        }
    }
}

/// KDE density at `q`.
pub fn kde_density(q: &[f64], ensemble: &WorldEnsemble, kernel: &KernelSpec) -> Result<f64> {
    if q.len() != ensemble.d || kernel.d != ensemble.d {
        return Err(MiwError::DimensionMismatch {
            expected: ensemble.d,
            got: q.len(),
        });
    }
    if kernel.family == KernelFamily::Original1d {
        return Err(MiwError::UnsupportedMode(
            "kde_density needs a gaussian or exponential kernel".into(),
        ));
    }
    let mut acc = 0.0;
    for i in 0..ensemble.n {
        let r2: f64 = ensemble
            .pos(i)
            .iter()
            .zip(q)
            .map(|(x, qq)| (x - qq).powi(2))
            .sum();
        acc += kernel.value(r2)?;
    }
    Ok(acc / ensemble.n as f64)
}

/// Inverse-spacing density of the original 1D method: P(x_n) =
/// 1/[N (x_{n+1} - x_n)], with the last world falling back to the
/// preceding gap.
pub fn inverse_spacing_density(ensemble: &WorldEnsemble) -> Result<Vec<f64>> {
    ensemble.check_sorted_1d()?;
    let n = ensemble.n;
    let x = &ensemble.positions;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let gap = if i + 1 < n {
            x[i + 1] - x[i]
        } else {
            x[n - 1] - x[n - 2]
        };
        out[i] = 1.0 / (n as f64 * gap);
    }
    Ok(out)
}

/// Evaluate the KDE on every node of `grid`.
pub fn density_on_grid(
    ensemble: &WorldEnsemble,
    kernel: &KernelSpec,
    grid: &GridSpec,
) -> Result<GridField> {
    grid.validate()?;
    if grid.dim() != ensemble.d {
        return Err(MiwError::DimensionMismatch {
            expected: ensemble.d,
            got: grid.dim(),
        });
    }
    let mut values = vec![0.0; grid.len()];
    for (flat, v) in values.iter_mut().enumerate() {
        *v = kde_density(&grid.node(flat), ensemble, kernel)?;
    }
    GridField::new(grid.clone(), values)
}

/// Root-sum-square deviation over grid nodes.
pub fn rss_error(a: &GridField, b: &GridField) -> Result<f64> {
    if a.grid != b.grid {
        return Err(MiwError::GridMismatch);
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Deterministic placement matching the target as closely as possible:
/// every cell receives its largest-remainder share of `n` and fills it
/// with a centered sub-lattice.
pub fn sample_uniform_fill(target: &GridField, n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(MiwError::InvalidConfig("need at least one world".into()));
    }
    let d = target.grid.dim();
    let total: f64 = target.values.iter().sum();
    if !(total > 0.0) {
        return Err(MiwError::FlatDensity);
    }
    // largest-remainder apportionment of n over cells
    let mut counts = vec![0usize; target.values.len()];
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(counts.len());
    let mut placed = 0usize;
    for (c, v) in target.values.iter().enumerate() {
        let share = v / total * n as f64;
        let base = share.floor() as usize;
        counts[c] = base;
        placed += base;
        remainders.push((share - base as f64, c));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(n - placed) {
        counts[c] += 1;
    }
    // centered sub-lattice inside each cell
    let mut positions = Vec::with_capacity(n * d);
    for (c, &m) in counts.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let center = target.grid.node(c);
        let side = (m as f64).powf(1.0 / d as f64).ceil() as usize;
        for sub in 0..m {
            let mut rem = sub;
            for a in (0..d).rev() {
                let i = rem % side;
                rem /= side;
                let offset = ((i as f64 + 0.5) / side as f64 - 0.5) * target.grid.step(a);
                positions.push(center[a] + offset);
            }
            let start = positions.len() - d;
            positions[start..].reverse();
        }
    }
    Ok(positions)
}

/// N i.i.d. draws from the target: inverse CDF over flattened cells plus
/// uniform jitter inside the chosen cell. Reproducible per seed.
pub fn sample_monte_carlo(target: &GridField, n: usize, seed: u64) -> Result<Vec<f64>> {
    let d = target.grid.dim();
    let total: f64 = target.values.iter().sum();
    if !(total > 0.0) {
        return Err(MiwError::FlatDensity);
    }
    let mut cdf = Vec::with_capacity(target.values.len());
    let mut acc = 0.0;
    for v in &target.values {
        acc += v / total;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let cell = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        let center = target.grid.node(cell);
        for (a, c) in center.iter().enumerate() {
            let jitter: f64 = rng.gen::<f64>() - 0.5;
            positions.push(c + jitter * target.grid.step(a));
        }
    }
    Ok(positions)
}

/// Fraction of KDE mass at x < 0 for a 1D ensemble (closed-form kernel
/// tail integrals).
pub fn left_fraction_kde(ensemble: &WorldEnsemble, kernel: &KernelSpec) -> Result<f64> {
    if ensemble.d != 1 {
        return Err(MiwError::DimensionMismatch {
            expected: 1,
            got: ensemble.d,
        });
    }
    let b = kernel.b;
    let mut acc = 0.0;
    for i in 0..ensemble.n {
        let x = ensemble.positions[i];
        acc += match kernel.family {
            KernelFamily::Gaussian => 0.5 * erfc(x / b),
            KernelFamily::Exponential => {
                if x >= 0.0 {
                    0.5 * (-x / b).exp()
                } else {
                    1.0 - 0.5 * (x / b).exp()
                }
            }
            KernelFamily::Original1d => {
                return Err(MiwError::UnsupportedMode(
                    "left_fraction_kde needs a kernel".into(),
                ))
            }
        };
    }
    Ok(acc / ensemble.n as f64)
}

/// Fraction of worlds at x < 0.
pub fn left_fraction_count(ensemble: &WorldEnsemble) -> Result<f64> {
    if ensemble.d != 1 {
        return Err(MiwError::DimensionMismatch {
            expected: 1,
            got: ensemble.d,
        });
    }
    let count = ensemble.positions.iter().filter(|&&x| x < 0.0).count();
    Ok(count as f64 / ensemble.n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ens(x: &[f64], d: usize) -> WorldEnsemble {
        WorldEnsemble::at_rest(x.to_vec(), 1.0, d).unwrap()
    }

    #[test]
    fn kde_single_world_center() {
        let kernel = KernelSpec::new(KernelFamily::Gaussian, 0.7, 2).unwrap();
        let e = ens(&[0.3, -0.2], 2);
        let v = kde_density(&[0.3, -0.2], &e, &kernel).unwrap();
        assert_relative_eq!(v, kernel.normalization().unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn kde_two_world_midpoint() {
        let kernel = KernelSpec::new(KernelFamily::Gaussian, 1.0, 1).unwrap();
        let e = ens(&[-1.0, 1.0], 1);
        let v = kde_density(&[0.0], &e, &kernel).unwrap();
        assert_relative_eq!(
            v,
            (-1.0f64).exp() / std::f64::consts::PI.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn inverse_spacing_uniform_and_gap_scaling() {
        let h = 0.25;
        let x: Vec<f64> = (0..8).map(|i| i as f64 * h).collect();
        let e = ens(&x, 1);
        let p = inverse_spacing_density(&e).unwrap();
        for v in &p {
            assert_relative_eq!(*v, 1.0 / (8.0 * h), max_relative = 1e-14);
        }

        // halving one gap doubles that world's density
        let mut x2 = x.clone();
        x2[4] = x[3] + h / 2.0;
        let p2 = inverse_spacing_density(&ens(&x2, 1)).unwrap();
        assert_relative_eq!(p2[3], 2.0 * p[3], max_relative = 1e-12);
    }

    #[test]
    fn inverse_spacing_rejects_disorder() {
        let e = ens(&[0.0, 1.0, 0.5], 1);
        assert!(matches!(
            inverse_spacing_density(&e),
            Err(MiwError::OrderingViolation { index: 2 })
        ));
    }

    #[test]
    fn inverse_spacing_diverges_as_gap_closes() {
        let mut prev = 0.0;
        for gap in [1e-1, 1e-2, 1e-3, 1e-4] {
            let e = ens(&[0.0, gap, 1.0], 1);
            let p = inverse_spacing_density(&e).unwrap();
            assert!(p[0] > prev);
            prev = p[0];
        }
    }

    #[test]
    fn grid_density_matches_point_evaluations() {
        let kernel = KernelSpec::new(KernelFamily::Exponential, 0.3, 1).unwrap();
        let e = ens(&[-0.5, 0.1, 0.6], 1);
        let grid = GridSpec::cubic(1, -2.0, 2.0, 50).unwrap();
        let field = density_on_grid(&e, &kernel, &grid).unwrap();
        for flat in [0usize, 17, 49] {
            let direct = kde_density(&grid.node(flat), &e, &kernel).unwrap();
            assert_relative_eq!(field.values[flat], direct, max_relative = 1e-14);
        }
    }

    #[test]
    fn rss_basics() {
        let grid = GridSpec::cubic(1, -1.0, 1.0, 10).unwrap();
        let a = GridField::new(grid.clone(), vec![0.5; 10]).unwrap();
        assert_eq!(rss_error(&a, &a).unwrap(), 0.0);
        let mut bvals = vec![0.5; 10];
        bvals[3] += 0.25;
        let b = GridField::new(grid, vec![0.5; 10]).unwrap();
        let b2 = GridField::new(b.grid.clone(), bvals).unwrap();
        assert_relative_eq!(rss_error(&a, &b2).unwrap(), 0.25, max_relative = 1e-14);

        let other = GridField::new(GridSpec::cubic(1, -1.0, 1.0, 12).unwrap(), vec![0.0; 12])
            .unwrap();
        assert!(matches!(
            rss_error(&a, &other),
            Err(MiwError::GridMismatch)
        ));
    }

    #[test]
    fn uniform_fill_flat_target() {
        let grid = GridSpec::cubic(1, -1.0, 1.0, 10).unwrap();
        let mut target = GridField::new(grid, vec![1.0; 10]).unwrap();
        target.normalize().unwrap();
        let pos = sample_uniform_fill(&target, 20).unwrap();
        assert_eq!(pos.len(), 20);
        // two per cell, symmetric around each node
        for c in 0..10 {
            let node = target.grid.node(c)[0];
            let h = target.grid.step(0);
            let inside = pos
                .iter()
                .filter(|&&x| (x - node).abs() <= h / 2.0 + 1e-12)
                .count();
            assert_eq!(inside, 2);
        }
    }

    #[test]
    fn monte_carlo_deterministic_and_sized() {
        let grid = GridSpec::cubic(2, -1.0, 1.0, 8).unwrap();
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                (-(x[0] * x[0] + x[1] * x[1])).exp()
            })
            .collect();
        let mut target = GridField::new(grid, values).unwrap();
        target.normalize().unwrap();
        let a = sample_monte_carlo(&target, 40, 99).unwrap();
        let b = sample_monte_carlo(&target, 40, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 80);
        assert!(sample_monte_carlo(&target, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn left_fraction_consistency() {
        let kernel = KernelSpec::new(KernelFamily::Exponential, 0.05, 1).unwrap();
        let e = ens(&[-0.4, -0.3, -0.2, 0.3], 1);
        let f = left_fraction_kde(&e, &kernel).unwrap();
        assert!((f - 0.75).abs() < 0.01, "f = {f}");
        assert_eq!(left_fraction_count(&e).unwrap(), 0.75);

        // symmetric configuration splits evenly
        let sym = ens(&[-0.2, 0.2], 1);
        let g = KernelSpec::new(KernelFamily::Gaussian, 0.3, 1).unwrap();
        assert_relative_eq!(left_fraction_kde(&sym, &g).unwrap(), 0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn uniform_fill_conserves_count(weights in proptest::collection::vec(0.01f64..1.0, 16), n in 1usize..120) {
            let grid = GridSpec::cubic(1, -2.0, 2.0, 16).unwrap();
            let mut target = GridField::new(grid, weights).unwrap();
            target.normalize().unwrap();
            let pos = sample_uniform_fill(&target, n).unwrap();
            prop_assert_eq!(pos.len(), n);
        }

        #[test]
        fn kde_positive_everywhere(xs in proptest::collection::vec(-1.5f64..1.5, 2..12), q in -2.0f64..2.0) {
            let e = ens(&xs, 1);
            for family in [KernelFamily::Gaussian, KernelFamily::Exponential] {
                let kernel = KernelSpec::new(family, 0.2, 1).unwrap();
                let v = kde_density(&[q], &e, &kernel).unwrap();
                prop_assert!(v > 0.0);
            }
        }
    }
}
