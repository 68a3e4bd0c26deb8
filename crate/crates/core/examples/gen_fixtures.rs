//! Regenerates the ASCII fixtures under `fixtures/`. Run from the
//! repository root:
//!
//! ```text
//! cargo run -p varifrac --example gen_fixtures
//! ```

use varifrac::io::{write_mesh, write_surface};
use varifrac::meshgen;
use varifrac::varifold::DiscreteVarifold;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::Path::new("fixtures");
    std::fs::create_dir_all(dir)?;

    write_mesh(&dir.join("cube.tetmesh"), &meshgen::unit_cube()?)?;
    write_mesh(
        &dir.join("bar.tetmesh"),
        &meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true)?,
    )?;
    write_mesh(
        &dir.join("bar_stretched.tetmesh"),
        &meshgen::structured_bar(2, 1, 1, 1.0, 1.6, true)?,
    )?;

    let disc = DiscreteVarifold::from_surface(&meshgen::disc(1.0, 8, 32), 1)?;
    write_surface(&dir.join("disc.trisurf"), &disc)?;
    let sphere = DiscreteVarifold::from_surface(&meshgen::icosphere(1.0, 3), 1)?;
    write_surface(&dir.join("sphere.trisurf"), &sphere)?;

    std::fs::write(
        dir.join("bar.toml"),
        "mesh = \"bar.tetmesh\"\noutput_dir = \"out\"\n\n[energy]\na_bar = 4.0\n\n[minimizer]\nvoxel_resolution = 48\ngms_samples = 2\n",
    )?;
    println!("fixtures written to {}", dir.display());
    Ok(())
}
