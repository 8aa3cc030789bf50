use clap::{Parser, Subcommand};
use miw::experiments::{
    energy_scan, numerov_experiment, relax_experiment, thermal_experiment, tunnel_experiment,
    ExperimentKind, RunConfig,
};
use miw::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "miw", about = "Many-interacting-worlds quantum simulation toolkit")]
struct Cli {
    /// JSON run configuration; flags below override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and trajectory files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base RNG seed; seeds become seed..seed+4
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel runs
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run jobs sequentially for bit-for-bit reproducibility
    #[arg(long, global = true)]
    deterministic: bool,
    /// Potential preset: harm1, harm10, lj1, dwell
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Spatial dimension
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground-state energy error vs world count for static placements
    EnergyScan,
    /// Relax an ensemble to the ground state and report convergence
    Relax,
    /// Thermal position spread vs temperature in a harmonic trap
    Thermal,
    /// Double-well escape rates vs temperature with model fits
    Tunnel,
    /// Grid eigensolve of a preset potential
    Numerov,
    /// Quick internal consistency checks
    Selftest,
}

fn load_config(cli: &Cli, kind: ExperimentKind) -> Result<RunConfig> {
    let mut config: RunConfig = match &cli.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => serde_json::from_value(serde_json::json!({
            "experiment": serde_json::to_value(kind)?,
        }))?,
    };
    config.experiment = kind;
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seeds = (seed..seed + 5).collect();
    }
    if let Some(preset) = &cli.preset {
        config.preset = preset.clone();
    }
    if let Some(d) = cli.dim {
        config.d = d;
    }
    if cli.deterministic {
        config.deterministic = true;
    }
    config.validate()?;
    Ok(config)
}

fn selftest() -> Result<()> {
    use miw::experiments::reference_ground_state;
    use miw::units::HBAR;

    let (e0, density) = reference_ground_state("harm1", 1)?;
    let omega = (1.0f64 / miw::units::PROTON_MASS).sqrt();
    let expected = 0.5 * HBAR * omega;
    if (e0 - expected).abs() > 1e-10 * expected {
        return Err(miw::MiwError::InvalidConfig(format!(
            "harmonic reference energy {e0} != {expected}"
        )));
    }
    let norm = density.integral();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(miw::MiwError::InvalidConfig(format!(
            "reference density integrates to {norm}"
        )));
    }
    let potential = miw::potentials::PotentialSpec::preset("dwell", 1)?;
    let grid = miw::grid::GridSpec::preset(1)?;
    let res = miw::numerov::solve(
        &miw::numerov::potential_field(&potential, &grid)?,
        miw::units::PROTON_MASS,
        1,
    )?;
    if !res.ground_energy().is_finite() {
        return Err(miw::MiwError::InvalidConfig(
            "double-well eigensolve failed".into(),
        ));
    }
    println!("selftest ok: harm1 E0 = {e0:.6} eV, dwell E0 = {:.6} eV", res.ground_energy());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| miw::MiwError::InvalidConfig(e.to_string()))?;
    }
    match &cli.command {
        Command::EnergyScan => {
            let config = load_config(cli, ExperimentKind::EnergyScan)?;
            let rows = energy_scan(&config)?;
            println!("energy scan: {} rows -> {}", rows.len(), config.out_dir.display());
        }
        Command::Relax => {
            let config = load_config(cli, ExperimentKind::Relax)?;
            let results = relax_experiment(&config)?;
            for (family, method, seed, report) in &results {
                println!(
                    "{family:?} {method:?} seed {seed}: E = {:.6} eV after {} force evals",
                    report.final_energy(),
                    report.total_force_evals()
                );
            }
        }
        Command::Thermal => {
            let config = load_config(cli, ExperimentKind::Thermal)?;
            let rows = thermal_experiment(&config)?;
            println!("thermal: {} rows -> {}", rows.len(), config.out_dir.display());
        }
        Command::Tunnel => {
            let config = load_config(cli, ExperimentKind::Tunnel)?;
            let result = tunnel_experiment(&config)?;
            println!(
                "tunnel: nu0 = {:.4e} 1/fs (r2 {:.4}), beta = {:.3}, dE = {:.3} eV",
                result.nu0, result.nu0_r2, result.beta, result.delta_e
            );
        }
        Command::Numerov => {
            let config = load_config(cli, ExperimentKind::Numerov)?;
            let res = numerov_experiment(&config)?;
            println!("energies: {:?}", res.energies);
        }
        Command::Selftest => selftest()?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": err.to_string(),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
