//! Physical constants in the eV / Angstrom / fs unit system.

/// Reduced Planck constant, eV fs.
pub const HBAR: f64 = 0.6582119569;

/// Boltzmann constant, eV/K.
pub const KB: f64 = 8.617333262e-5;

/// Speed of light, A/fs.
pub const C_LIGHT: f64 = 2997.92458;

/// Proton rest energy, eV.
pub const PROTON_REST_ENERGY: f64 = 938.272e6;

/// Proton mass, eV fs^2/A^2 (m = E/c^2).
pub const PROTON_MASS: f64 = PROTON_REST_ENERGY / (C_LIGHT * C_LIGHT);
