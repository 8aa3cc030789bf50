//! Jump-rate extraction and temperature models: exponential decay of the
//! left-well population, the classical Arrhenius rate and its
//! quantum-corrected (Bell) version.

use crate::units::{HBAR, KB};
use crate::{MiwError, Result};

/// Fit f(t) = 0.5 + (f0 − 0.5)·exp(−λt) by linear regression of
/// ln(f − 1/2) on t, using only samples still above the 0.5 plateau.
/// Returns (λ, f0, r²) with λ in 1/fs.
pub fn fit_decay(times: &[f64], fractions: &[f64]) -> Result<(f64, f64, f64)> {
    if times.len() != fractions.len() {
        return Err(MiwError::FitFailed("length mismatch".into()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(fractions)
        .filter(|(_, f)| **f > 0.5 + 1e-6)
        .map(|(t, f)| (*t, (f - 0.5).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(MiwError::FitFailed(
            "too few samples above the 1/2 plateau".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(t, _)| t).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| t * t).sum();
    let sxy: f64 = pts.iter().map(|(t, y)| t * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(MiwError::FitFailed("degenerate time axis".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let lambda = -slope;
    if !(lambda > 0.0) {
        return Err(MiwError::FitFailed(format!(
            "non-positive decay constant {lambda}"
        )));
    }
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|(t, y)| (y - (intercept + slope * t)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((lambda, 0.5 + intercept.exp(), r2))
}

/// Classical jump rate ν0·exp(−ΔE/kBT).
pub fn arrhenius(nu0: f64, delta_e: f64, t: f64) -> f64 {
    nu0 * (-delta_e / (KB * t)).exp()
}

/// Dimensionless barrier parameter β = aπ√(2mΔE)/ħ of the parabolic
/// tunneling correction.
pub fn bell_beta(a: f64, mass: f64, delta_e: f64) -> f64 {
    a * std::f64::consts::PI * (2.0 * mass * delta_e).sqrt() / HBAR
}

/// Quantum-corrected rate ν0·[β·e^(−u) − u·e^(−β)]/(β − u) with
/// u = ΔE/kBT, reducing to ν0(1+β)e^(−β) at the crossing u = β.
pub fn bell(nu0: f64, delta_e: f64, beta: f64, t: f64) -> f64 {
    let u = delta_e / (KB * t);
    if (beta - u).abs() < 1e-9 {
        return nu0 * (1.0 + beta) * (-beta).exp();
    }
    nu0 * (beta * (-u).exp() - u * (-beta).exp()) / (beta - u)
}

/// One-parameter Arrhenius fit at fixed ΔE: least squares for ln ν0 in log
/// space. Returns (ν0, r²).
pub fn fit_nu0(temps: &[f64], nus: &[f64], delta_e: f64) -> Result<(f64, f64)> {
    if temps.len() != nus.len() || temps.is_empty() {
        return Err(MiwError::FitFailed("bad rate table".into()));
    }
    let logs: Vec<f64> = temps
        .iter()
        .zip(nus)
        .map(|(t, nu)| {
            if *nu > 0.0 {
                Ok(nu.ln() + delta_e / (KB * t))
            } else {
                Err(MiwError::FitFailed("non-positive rate".into()))
            }
        })
        .collect::<Result<_>>()?;
    let ln_nu0 = logs.iter().sum::<f64>() / logs.len() as f64;
    // r^2 of ln(nu) against the fitted Arrhenius line
    let ys: Vec<f64> = nus.iter().map(|nu| nu.ln()).collect();
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = temps
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - (ln_nu0 - delta_e / (KB * t))).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((ln_nu0.exp(), r2))
}
