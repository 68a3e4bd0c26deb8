//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 I/O error, 2 mesh/config validation
//! failure, 3 density-check failure, 4 no feasible candidate.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use varifrac::config::RunConfig;
use varifrac::energy::{
    verify_coercivity, verify_delta_convexity, verify_exponents, DensityCheckReport,
};
use varifrac::error::Error;
use varifrac::io;
use varifrac::minimizer::minimize_total;
use varifrac::report::write_run_outputs;
use varifrac::state::cut_mesh;

const THREADS_ENV: &str = "VARIFRAC_THREADS";

#[derive(Parser)]
#[command(name = "varifrac", version, about = "Fracture energy minimization")]
struct Cli {
    /// Worker threads (overrides the VARIFRAC_THREADS variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a mesh and print a structural summary.
    Validate { mesh: PathBuf },
    /// Certify the configured density's structural hypotheses.
    CheckDensity {
        #[arg(long)]
        config: PathBuf,
        /// Samples per numerical certificate.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Analyze a crack surface: mass, curvature, boundary, residual.
    Varifold {
        surface: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Full pipeline: candidate search, admissibility, report files.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_interpenetration_check: bool,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Parse { .. } => 1,
        Error::NoFeasibleCandidate(_) => 4,
        _ => 2,
    }
}

fn print_density_report(name: &str, report: &DensityCheckReport) {
    for c in &report.checks {
        println!(
            "{name}: {} ... {} (margin {:.3e}; {})",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.margin,
            c.detail
        );
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(n) = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.parse().ok()))
    {
        // ignore failure: the global pool may already be initialized
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    match cli.command {
        Command::Validate { mesh } => {
            let m = io::read_mesh(&mesh)?;
            let state = cut_mesh(&m, &[])?;
            println!("nodes: {}", m.nodes.len());
            println!("tets: {}", m.tets.len());
            println!("boundary faces: {}", m.boundary_faces.len());
            println!("gamma0 area: {}", m.gamma0_area());
            println!("gamma1 area: {}", m.gamma1_area());
            println!("candidate crack faces: {}", m.candidate_faces.len());
            println!("dirichlet nodes: {}", m.dirichlet.len());
            println!("min element volume: {:e}", state
                .topo
                .volumes
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min));
            println!("validate: pass");
            Ok(0)
        }
        Command::CheckDensity { config, samples } => {
            let text = std::fs::read_to_string(&config)?;
            let config: RunConfig = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("bad config: {e}")))?;
            let spec = config.density_spec();
            let exponents = verify_exponents(&config.energy);
            let coercivity = verify_coercivity(&spec, &config.energy, samples, config.seed);
            let convexity = verify_delta_convexity(&spec, samples, config.seed);
            print_density_report("exponents", &exponents);
            print_density_report("coercivity", &coercivity);
            print_density_report("convexity", &convexity);
            let all = exponents.pass() && coercivity.pass() && convexity.pass();
            println!("check-density: {}", if all { "pass" } else { "FAIL" });
            Ok(if all { 0 } else { 3 })
        }
        Command::Varifold { surface, config } => {
            let v = io::read_surface(&surface)?;
            let params = match config {
                Some(path) => RunConfig::load(&path)?.energy,
                None => varifrac::EnergyParams::default(),
            };
            let breakdown = v.crack_energy(&params)?;
            let center = {
                let n = v.vertices.len().max(1) as f64;
                let mut c = [0.0; 3];
                for p in &v.vertices {
                    for k in 0..3 {
                        c[k] += p[k] / n;
                    }
                }
                c
            };
            let residual =
                v.first_variation_residual(&varifrac::varifold::built_in_test_functions(
                    center, 1.0,
                ))?;
            println!("mass: {}", v.mass());
            println!("boundary mass: {}", v.boundary_mass());
            println!("crack energy mass term: {}", breakdown.mass_term);
            println!("crack energy curvature term: {}", breakdown.curvature_term);
            println!("crack energy boundary term: {}", breakdown.boundary_term);
            println!("crack energy total: {}", breakdown.total);
            println!("first variation residual: {:e}", residual);
            Ok(0)
        }
        Command::Minimize {
            config,
            out,
            seed,
            no_interpenetration_check,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            if let Some(seed) = seed {
                config.seed = seed;
                config.minimizer.seed = seed;
            }
            if no_interpenetration_check {
                config.minimizer.check_noninterpenetration = false;
            }
            let mesh = io::read_mesh(&config.mesh)?;
            let spec = config.density_spec();
            let report = minimize_total(&mesh, &spec, &config.energy, &config.minimizer)?;
            let json = write_run_outputs(&config.output_dir, &config, &report)?;

            // visualization + traces for the selected candidate
            let sel = report.selected_record();
            let (state, _, diag) = varifrac::minimizer::minimize_deformation(
                &mesh,
                &sel.faces,
                &spec,
                &config.energy,
                &config.minimizer,
                None,
            )?;
            std::fs::write(
                config.output_dir.join("deformed.vtk"),
                io::deformed_mesh_vtk(&state),
            )?;
            let theta = varifrac::minimizer::required_multiplicity(&config.energy);
            if !sel.faces.is_empty() {
                let v = varifrac::minimizer::crack_varifold(&mesh, &sel.faces, theta)?;
                std::fs::write(
                    config.output_dir.join("crack.vtk"),
                    io::crack_surface_vtk(&v)?,
                )?;
                std::fs::write(
                    config.output_dir.join("crack.trisurf"),
                    io::write_surface_string(&v),
                )?;
            }
            let mut trace = String::from("step,energy\n");
            for (i, e) in diag.energy_trace.iter().enumerate() {
                trace.push_str(&format!("{i},{e}\n"));
            }
            std::fs::write(config.output_dir.join("energy_trace.csv"), trace)?;
            println!("{json}");
            println!(
                "selected candidate: {:?} (total energy {})",
                sel.faces, sel.total_energy
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
