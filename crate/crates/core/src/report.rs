//! Run reports: a single JSON document with stable key order (struct
//! field order), plus a delimiter-separated per-candidate energy table
//! and per-candidate descent traces for plotting. Wall-clock time is
//! deliberately excluded so reports are byte-identical across runs.

use crate::config::RunConfig;
use crate::error::Result;
use crate::minimizer::MinimizationReport;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub tool_version: &'static str,
    pub config: &'a RunConfig,
    pub seed: u64,
    pub minimization: &'a MinimizationReport,
}

impl<'a> RunReport<'a> {
    pub fn new(config: &'a RunConfig, minimization: &'a MinimizationReport) -> Self {
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
            seed: config.seed,
            minimization,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Per-candidate energies as comma-separated values.
pub fn energy_table_csv(report: &MinimizationReport) -> String {
    let mut out = String::from(
        "id,faces,bulk_energy,crack_mass_term,crack_curvature_term,crack_boundary_term,total_energy,admissible,selected\n",
    );
    for (i, r) in report.candidates.iter().enumerate() {
        let faces = r
            .faces
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.id,
            faces,
            r.bulk_energy,
            r.crack_energy.mass_term,
            r.crack_energy.curvature_term,
            r.crack_energy.boundary_term,
            r.total_energy,
            r.admissible,
            i == report.selected
        );
    }
    out
}

/// Writes report.json and energy_table.csv into `dir` (created if
/// missing). Returns the serialized report for callers that also print
/// it.
pub fn write_run_outputs(
    dir: &Path,
    config: &RunConfig,
    minimization: &MinimizationReport,
) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let report = RunReport::new(config, minimization).to_json();
    std::fs::write(dir.join("report.json"), &report)?;
    std::fs::write(dir.join("energy_table.csv"), energy_table_csv(minimization))?;
    Ok(report)
}
