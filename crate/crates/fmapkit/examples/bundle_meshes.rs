//! Regenerates the meshes in `data/` from the built-in shape generators.
//!
//! `cargo run -p fmapkit --example bundle_meshes`

use std::path::Path;

use fmapkit::cli::builtin_meshes;
use fmapkit::mesh_io::write_off;

fn main() -> Result<(), fmapkit::Error> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for (name, mesh) in builtin_meshes() {
        let path = dir.join(format!("{name}.off"));
        write_off(&mesh, &path)?;
        println!("{}: {} vertices, {} faces", path.display(), mesh.n(), mesh.faces().len());
    }
    Ok(())
}
