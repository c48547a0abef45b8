//! Named initial measures for the localization subcommands.

use std::path::Path;

use stoloc_core::localization::{LocalizationConfig, Localizer};
use stoloc_core::measures::{discretize_density, DiscreteMeasure, GridMeasure};
use stoloc_core::{Error, Result};

pub const PRESETS: &[&str] =
    &["twopoint[:p]", "three-atom", "four-atom", "gaussian-grid", "interval-grid", "slab-grid", "<file>.json"];

/// Grid resolution of the 2D slab preset, per axis.
pub const SLAB_CELLS: usize = 48;

fn gaussian(x: &[f64]) -> f64 {
    -0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

/// Initial measure by name. Grid presets are returned in discrete form.
pub fn measure(name: &str) -> Result<DiscreteMeasure> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    match head {
        "twopoint" | "two-point" => {
            let p = arg
                .map(str::parse::<f64>)
                .transpose()
                .map_err(|e| Error::Config(format!("bad weight in '{name}': {e}")))?
                .unwrap_or(0.5);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("two-point weight {p} outside (0, 1)")));
            }
            DiscreteMeasure::two_point(p)
        }
        "three-atom" => DiscreteMeasure::normalized(
            vec![vec![1.0, 0.0], vec![-0.5, 0.9], vec![-0.4, -1.0]],
            vec![1.0, 1.0, 1.0],
        ),
        "four-atom" => DiscreteMeasure::normalized(
            vec![vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.0, -1.0], vec![0.3, 1.2]],
            vec![0.3, 0.2, 0.25, 0.25],
        ),
        _ => grid(name)?.to_discrete(),
    }
}

/// Grid presets and JSON files holding either kind of measure.
pub fn grid(name: &str) -> Result<GridMeasure> {
    match name {
        "gaussian-grid" => discretize_density(gaussian, &[(-6.0, 6.0)], 512),
        // standard Gaussian restricted to [-1, 1]
        "interval-grid" => discretize_density(gaussian, &[(-1.0, 1.0)], 256),
        // standard Gaussian restricted to |x_1| <= 1/2
        "slab-grid" => discretize_density(gaussian, &[(-0.5, 0.5), (-4.0, 4.0)], SLAB_CELLS),
        path if path.ends_with(".json") => Err(Error::Capability(format!("{path} is read by load_file"))),
        other => Err(Error::Config(format!("unknown measure '{other}'; expected one of {}", PRESETS.join(", ")))),
    }
}

/// Read a measure JSON document: `{dimension, atoms, weights}` or `{dimension, grid, weights}`.
pub fn load_file(path: &Path) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let parsed = if value.get("grid").is_some() {
        serde_json::from_value::<GridMeasure>(value).map(|g| g.to_discrete())
    } else {
        serde_json::from_value::<DiscreteMeasure>(value).map(Ok)
    };
    parsed.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
}

pub fn localizer(name: &str) -> Result<Localizer> {
    let mu = if name.ends_with(".json") { load_file(Path::new(name))? } else { measure(name)? };
    Localizer::new(&mu, LocalizationConfig::default())
}
