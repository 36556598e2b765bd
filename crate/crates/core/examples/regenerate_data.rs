//! Rewrites the shipped data: `data/pumpsets.json` from the seeded default
//! scenario and the golden reports in `data/golden/`.
//!
//! Run with `cargo run -p relfuse --example regenerate_data`.

use std::path::Path;

use relfuse::io::commands::{cmd_eb_fit, cmd_er_assess, cmd_validate};
use relfuse::io::{Tolerances, ValidateKind};
use relfuse::{Error, FinalizeMode, Result};

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let golden = data.join("golden");
    std::fs::create_dir_all(&golden).map_err(|e| Error::Io(e.to_string()))?;

    let set = relfuse::synth::default_scenario()?;
    let pumpsets = data.join("pumpsets.json");
    write(&pumpsets, relfuse::io::observations_to_json(&set) + "\n")?;

    let motorcycle = data.join("motorcycle.json");
    write(
        &golden.join("motorcycle.raw.json"),
        cmd_er_assess(&motorcycle, FinalizeMode::Raw)?.to_json(),
    )?;
    write(
        &golden.join("motorcycle.proportional.json"),
        cmd_er_assess(&motorcycle, FinalizeMode::Proportional)?.to_json(),
    )?;
    write(
        &golden.join("motorcycle.validate.json"),
        cmd_validate(&motorcycle, ValidateKind::Er, Tolerances::default())?.to_json(),
    )?;
    write(
        &golden.join("pumpsets.fit.json"),
        cmd_eb_fit(&pumpsets)?.to_json(),
    )?;
    write(
        &golden.join("pumpsets.validate.json"),
        cmd_validate(&pumpsets, ValidateKind::Eb, Tolerances::default())?.to_json(),
    )?;
    Ok(())
}
