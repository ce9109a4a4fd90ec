//! The bundled example manifests, embedded at build time and written out by
//! `--emit-examples`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub const EXAMPLES: &[(&str, &str)] = &[
    (
        "01-integrable.json",
        include_str!("../manifests/01-integrable.json"),
    ),
    (
        "02-contact-cylinder.json",
        include_str!("../manifests/02-contact-cylinder.json"),
    ),
    ("03-engel.json", include_str!("../manifests/03-engel.json")),
    (
        "04-contact-cocomplex.json",
        include_str!("../manifests/04-contact-cocomplex.json"),
    ),
    (
        "05-closed-theta.json",
        include_str!("../manifests/05-closed-theta.json"),
    ),
    (
        "06-elliptic-family.json",
        include_str!("../manifests/06-elliptic-family.json"),
    ),
];

pub fn emit(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating example directory {}", dir.display()))?;
    for (name, body) in EXAMPLES {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
