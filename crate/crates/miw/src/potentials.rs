//! External (classical) potentials: value, analytic gradient and Laplacian.

use crate::units::HBAR;
use crate::{MiwError, Result};
use serde::{Deserialize, Serialize};

/// Guard radius around the Lennard-Jones singularity, A.
const LJ_SINGULARITY_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PotentialKind {
    /// V = (k/2) |x|^2
    Harmonic { k: f64 },
    /// Lennard-Jones well around `x0` plus an angular penalty favoring the
    /// +x direction from `x0`.
    LennardJonesAngular {
        dvr: f64,
        dva: f64,
        x0: Vec<f64>,
        r0: f64,
    },
    /// Two 1D parabolas (k/2)(x +- x0)^2 joined at x = 0, shifted so the
    /// well minima sit at V = 0.
    DoubleWell { k: f64, x0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub d: usize,
}

/// Potential value with its first and second derivatives.
#[derive(Debug, Clone)]
pub struct PotentialValue {
    pub v: f64,
    pub grad: Vec<f64>,
    pub laplacian: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, d: usize) -> Result<Self> {
        let spec = PotentialSpec { kind, d };
        spec.validate()?;
        Ok(spec)
    }

    /// Named parameter sets used throughout: `harm1`, `harm10`, `lj1`,
    /// `dwell`.
    pub fn preset(name: &str, d: usize) -> Result<Self> {
        let kind = match name {
            "harm1" => PotentialKind::Harmonic { k: 1.0 },
            "harm10" => PotentialKind::Harmonic { k: 10.0 },
            "lj1" => {
                let mut x0 = vec![0.0; d];
                x0[0] = -2.5;
                PotentialKind::LennardJonesAngular {
                    dvr: 1.0,
                    dva: 10.0,
                    x0,
                    r0: 1.0,
                }
            }
            "dwell" => PotentialKind::DoubleWell { k: 10.0, x0: 0.2 },
            _ => return Err(MiwError::UnknownPreset(name.into())),
        };
        Self::new(kind, d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 3 {
            return Err(MiwError::DimensionMismatch {
                expected: 3,
                got: self.d,
            });
        }
        let ok = match &self.kind {
            PotentialKind::Harmonic { k } => *k > 0.0,
            PotentialKind::LennardJonesAngular { dvr, dva, x0, r0 } => {
                *dvr > 0.0
                    && *dva >= 0.0
                    && *r0 > 0.0
                    && x0.len() == self.d
                    && x0.iter().all(|c| c.is_finite())
            }
            PotentialKind::DoubleWell { k, x0 } => *k > 0.0 && *x0 > 0.0 && self.d == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(MiwError::InvalidConfig(format!("bad potential {self:?}")))
        }
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self.kind, PotentialKind::Harmonic { .. })
    }

    /// Location of the classical minimum.
    pub fn classical_minimum(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::Harmonic { .. } => vec![0.0; self.d],
            PotentialKind::LennardJonesAngular { x0, r0, .. } => {
                let mut m = x0.clone();
                m[0] += r0;
                m
            }
            PotentialKind::DoubleWell { x0, .. } => vec![*x0],
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<PotentialValue> {
        if x.len() != self.d {
            return Err(MiwError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        match &self.kind {
            PotentialKind::Harmonic { k } => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                Ok(PotentialValue {
                    v: 0.5 * k * r2,
                    grad: x.iter().map(|c| k * c).collect(),
                    laplacian: k * self.d as f64,
                })
            }
            PotentialKind::LennardJonesAngular { dvr, dva, x0, r0 } => {
                let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
                let s2: f64 = d.iter().map(|c| c * c).sum();
                let s = s2.sqrt();
                if s < LJ_SINGULARITY_GUARD {
                    return Err(MiwError::Singularity { dist: s });
                }
                let t6 = (r0 / s).powi(6);
                let t12 = t6 * t6;
                let v_r = dvr * (t12 - 2.0 * t6);
                let fr1 = 12.0 * dvr * (t6 - t12) / s;
                let fr2 = dvr * (156.0 * t12 - 84.0 * t6) / s2;
                let nd = self.d as f64;
                let mut grad: Vec<f64> = d.iter().map(|c| fr1 * c / s).collect();
                let mut v = v_r;
                let mut lap = fr2 + (nd - 1.0) * fr1 / s;
                if self.d == 1 {
                    // the angular factor is sign(d); piecewise constant
                    v += dva * (1.0 - d[0].signum());
                } else {
                    let s3 = s2 * s;
                    v += dva * (1.0 - d[0] / s);
                    for (j, g) in grad.iter_mut().enumerate() {
                        let e = if j == 0 { 1.0 } else { 0.0 };
                        *g -= dva * (e / s - d[0] * d[j] / s3);
                    }
                    lap += dva * (nd - 1.0) * d[0] / s3;
                }
                Ok(PotentialValue {
                    v,
                    grad,
                    laplacian: lap,
                })
            }
            PotentialKind::DoubleWell { k, x0 } => {
                let xv = x[0];
                let sg = if xv == 0.0 { 0.0 } else { xv.signum() };
                let u = xv.abs() - x0;
                Ok(PotentialValue {
                    v: 0.5 * k * u * u,
                    grad: vec![k * u * sg],
                    laplacian: *k,
                })
            }
        }
    }

    /// Gradient of the Laplacian, needed for mode-consistent forces when
    /// the potential energy carries the second-order kernel correction.
    pub fn grad_laplacian(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(MiwError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        match &self.kind {
            PotentialKind::Harmonic { .. } | PotentialKind::DoubleWell { .. } => {
                Ok(vec![0.0; self.d])
            }
            PotentialKind::LennardJonesAngular { dvr, dva, x0, r0 } => {
                let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
                let s2: f64 = d.iter().map(|c| c * c).sum();
                let s = s2.sqrt();
                if s < LJ_SINGULARITY_GUARD {
                    return Err(MiwError::Singularity { dist: s });
                }
                let t6 = (r0 / s).powi(6);
                let t12 = t6 * t6;
                let fr1 = 12.0 * dvr * (t6 - t12) / s;
                let fr2 = dvr * (156.0 * t12 - 84.0 * t6) / s2;
                let fr3 = dvr * (672.0 * t6 - 2184.0 * t12) / (s2 * s);
                let nd = self.d as f64;
                let lr1 = fr3 + (nd - 1.0) * (fr2 / s - fr1 / s2);
                let mut out: Vec<f64> = d.iter().map(|c| lr1 * c / s).collect();
                if self.d > 1 {
                    let s3 = s2 * s;
                    let s5 = s3 * s2;
                    for (j, g) in out.iter_mut().enumerate() {
                        let e = if j == 0 { 1.0 } else { 0.0 };
                        *g += dva * (nd - 1.0) * (e / s3 - 3.0 * d[0] * d[j] / s5);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Barrier height k x0^2 / 2 of a double well.
pub fn double_well_barrier(k: f64, x0: f64) -> f64 {
    0.5 * k * x0 * x0
}

/// Ground-state zero-point energy hw/2 of one well.
pub fn double_well_zero_point_energy(k: f64, mass: f64) -> f64 {
    0.5 * HBAR * (k / mass).sqrt()
}

/// Distance from the barrier top at which the rising branch of the well
/// crosses `zero_point_energy`.
pub fn double_well_turning_point(k: f64, x0: f64, zero_point_energy: f64) -> Result<f64> {
    let barrier = double_well_barrier(k, x0);
    if !(zero_point_energy > 0.0 && zero_point_energy < barrier) {
        return Err(MiwError::EnergyOutOfRange {
            energy: zero_point_energy,
            barrier,
        });
    }
    Ok(x0 - (2.0 * zero_point_energy / k).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::PROTON_MASS;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(spec: &PotentialSpec, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|a| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                (spec.eval(&xp).unwrap().v - spec.eval(&xm).unwrap().v) / (2.0 * h)
            })
            .collect()
    }

    fn fd_laplacian(spec: &PotentialSpec, x: &[f64], h: f64) -> f64 {
        let v0 = spec.eval(x).unwrap().v;
        (0..x.len())
            .map(|a| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                (spec.eval(&xp).unwrap().v - 2.0 * v0 + spec.eval(&xm).unwrap().v) / (h * h)
            })
            .sum()
    }

    fn random_point(rng: &mut ChaCha8Rng, spec: &PotentialSpec) -> Vec<f64> {
        // keep away from kinks and the LJ singularity
        loop {
            let x: Vec<f64> = (0..spec.d).map(|_| rng.gen_range(-1.8..1.8)).collect();
            match &spec.kind {
                PotentialKind::DoubleWell { .. } if x[0].abs() < 1e-2 => continue,
                PotentialKind::LennardJonesAngular { x0, .. } => {
                    let s: f64 = x
                        .iter()
                        .zip(x0)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    // also avoid the 1D angular step at x = x0
                    if s < 0.5 {
                        continue;
                    }
                    if spec.d > 1 {
                        // the angular term's laplacian is rough near the axis origin
                        if s < 0.5 {
                            continue;
                        }
                    }
                    return x;
                }
                _ => {}
            }
            return x;
        }
    }

    fn all_specs() -> Vec<PotentialSpec> {
        let mut specs = Vec::new();
        for d in 1..=3 {
            specs.push(PotentialSpec::preset("harm1", d).unwrap());
            specs.push(PotentialSpec::preset("harm10", d).unwrap());
            specs.push(PotentialSpec::preset("lj1", d).unwrap());
        }
        specs.push(PotentialSpec::preset("dwell", 1).unwrap());
        specs
    }

    #[test]
    fn harmonic_minimum() {
        let spec = PotentialSpec::preset("harm1", 2).unwrap();
        let pv = spec.eval(&[0.0, 0.0]).unwrap();
        assert_eq!(pv.v, 0.0);
        assert!(pv.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn lj_value_at_minimum_on_axis() {
        // dVr = 1 eV, r0 = 1 A, x on the +x axis at distance r0 from x0:
        // radial part gives -1 eV, angular term vanishes when aligned.
        let spec = PotentialSpec::preset("lj1", 2).unwrap();
        let pv = spec.eval(&[-1.5, 0.0]).unwrap();
        assert!((pv.v + 1.0).abs() < 1e-12, "v = {}", pv.v);
        for g in &pv.grad {
            assert!(g.abs() < 1e-9);
        }
    }

    #[test]
    fn double_well_barrier_height() {
        let spec = PotentialSpec::preset("dwell", 1).unwrap();
        let top = spec.eval(&[0.0]).unwrap().v;
        let min = spec.eval(&[0.2]).unwrap().v;
        assert!((top - min - 0.2).abs() < 1e-12);
    }

    #[test]
    fn double_well_even_and_harmonic_even() {
        let dw = PotentialSpec::preset("dwell", 1).unwrap();
        let h = PotentialSpec::preset("harm10", 1).unwrap();
        for delta in [0.01, 0.1, 0.3, 1.2] {
            assert_eq!(
                dw.eval(&[delta]).unwrap().v,
                dw.eval(&[-delta]).unwrap().v
            );
            assert_eq!(h.eval(&[delta]).unwrap().v, h.eval(&[-delta]).unwrap().v);
        }
    }

    #[test]
    fn turning_point_for_proton_preset() {
        let e0 = double_well_zero_point_energy(10.0, PROTON_MASS);
        let a = double_well_turning_point(10.0, 0.2, e0).unwrap();
        assert!((a - 0.06).abs() < 0.005, "a = {a}");
    }

    #[test]
    fn turning_point_limit_and_errors() {
        let barrier = double_well_barrier(10.0, 0.2);
        let a = double_well_turning_point(10.0, 0.2, barrier * (1.0 - 1e-10)).unwrap();
        assert!(a < 1e-4);
        assert!(double_well_turning_point(10.0, 0.2, barrier * 1.1).is_err());
        assert!(double_well_turning_point(10.0, 0.2, 0.0).is_err());
    }

    #[test]
    fn turning_point_cross_checked_by_bisection() {
        // root-find V(x) = E on the rising branch of the right well
        let spec = PotentialSpec::preset("dwell", 1).unwrap();
        let e0 = double_well_zero_point_energy(10.0, PROTON_MASS);
        let (mut lo, mut hi) = (0.0f64, 0.2f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spec.eval(&[mid]).unwrap().v > e0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = double_well_turning_point(10.0, 0.2, e0).unwrap();
        assert!((a - 0.5 * (lo + hi)).abs() < 1e-8);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in all_specs() {
            for _ in 0..100 {
                let x = random_point(&mut rng, &spec);
                let pv = spec.eval(&x).unwrap();
                let fd = fd_grad(&spec, &x, 1e-5);
                for (a, (g, f)) in pv.grad.iter().zip(&fd).enumerate() {
                    let err = (g - f).abs() / (1.0 + g.abs());
                    assert!(err < 1e-6, "{spec:?} axis {a} at {x:?}: {g} vs {f}");
                }
                let fl = fd_laplacian(&spec, &x, 1e-4);
                let err = (pv.laplacian - fl).abs() / (1.0 + pv.laplacian.abs());
                assert!(err < 1e-4, "{spec:?} laplacian at {x:?}: {} vs {fl}", pv.laplacian);
            }
        }
    }

    #[test]
    fn grad_laplacian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in all_specs() {
            for _ in 0..50 {
                let x = random_point(&mut rng, &spec);
                let gl = spec.grad_laplacian(&x).unwrap();
                for a in 0..spec.d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[a] += 1e-5;
                    xm[a] -= 1e-5;
                    let fd = (spec.eval(&xp).unwrap().laplacian
                        - spec.eval(&xm).unwrap().laplacian)
                        / 2e-5;
                    let err = (gl[a] - fd).abs() / (1.0 + gl[a].abs());
                    assert!(err < 1e-4, "{spec:?} axis {a} at {x:?}: {} vs {fd}", gl[a]);
                }
            }
        }
    }

    #[test]
    fn lj_singularity_and_dimension_errors() {
        let spec = PotentialSpec::preset("lj1", 1).unwrap();
        assert!(matches!(
            spec.eval(&[-2.5 + 1e-12]),
            Err(MiwError::Singularity { .. })
        ));
        assert!(matches!(
            spec.eval(&[0.0, 0.0]),
            Err(MiwError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn double_well_needs_one_dimension() {
        assert!(PotentialSpec::new(PotentialKind::DoubleWell { k: 10.0, x0: 0.2 }, 2).is_err());
    }
}
