pub mod attribute;
pub mod causal;
pub mod classify;
pub mod cluster;
pub mod demo;
pub mod marker;
pub mod simulate;

use std::path::Path;

use crate::manifest::ManifestBuilder;
use crate::Failure;

/// Manifest file name written next to a command's outputs.
pub const MANIFEST: &str = "manifest.json";

/// Parses a choice flag through the library's `FromStr`, as a usage error.
pub(crate) fn parse_choice<T>(value: &str) -> Result<T, Failure>
where
    T: std::str::FromStr<Err = vocscreen::Error>,
{
    value.parse().map_err(Failure::from)
}

/// Records every path in `outputs` and writes `<dir>/manifest.json`.
pub(crate) fn finish(
    mut m: ManifestBuilder,
    dir: &Path,
    outputs: &[&Path],
) -> Result<crate::RunManifest, Failure> {
    for p in outputs {
        m.output(p)?;
    }
    m.finish(&dir.join(MANIFEST))
}
