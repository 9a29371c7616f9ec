//! Writes every gallery system as a JSON spec: `cargo run --example export_gallery -- specs`.

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "specs".into()));
    std::fs::create_dir_all(&dir)?;
    for g in evodich::gallery::gallery() {
        let file = g
            .name
            .replace('(', "_")
            .replace(')', "")
            .replace(',', "_")
            .replace('-', "m");
        std::fs::write(dir.join(format!("{file}.json")), evodich::io::spec_to_json(&g.spec))?;
    }
    Ok(())
}
