//! Chart references of the form `[cone:|doubled:|exp:]*name`, where `name`
//! is a catalog entry or a path to a chart TOML document.

use conelab::charts::{self, MetricChart};
use conelab::cone_constructions::{cone, double_warped, exponential_extension};
use conelab::Error;
use conelab::Result;
use nalgebra::DMatrix;
use std::path::Path;

/// Catalog names accepted by [`resolve`], besides `flatN`, `flatT_S`,
/// `sphereN`, `hyperbolicN`.
pub const CATALOG: [&str; 3] = ["cahen_wallach", "pp_wave_quadratic", "plane_wave_exp"];

fn numbered(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok().filter(|n| *n > 0)
}

fn catalog(name: &str) -> Result<MetricChart> {
    if let Some(rest) = name.strip_prefix("flat") {
        if let Some((t, s)) = rest.split_once('_') {
            if let (Ok(t), Ok(s)) = (t.parse::<usize>(), s.parse::<usize>()) {
                if t + s > 0 {
                    return Ok(charts::flat(t, s));
                }
            }
        } else if let Some(n) = numbered(name, "flat") {
            return Ok(charts::flat(0, n));
        }
    }
    if let Some(n) = numbered(name, "sphere") {
        return Ok(charts::sphere(n));
    }
    if let Some(n) = numbered(name, "hyperbolic") {
        return Ok(charts::hyperbolic(n));
    }
    match name {
        "cahen_wallach" => charts::cahen_wallach(&DMatrix::identity(2, 2)),
        "pp_wave_quadratic" => charts::pp_wave_expr(2, "y1^2 + y2^2"),
        "plane_wave_exp" => Ok(charts::plane_wave_exp()),
        _ => Err(Error::Config(format!(
            "unknown chart `{name}` (expected flatN, flatT_S, sphereN, hyperbolicN, {} or a .toml path)",
            CATALOG.join(", ")
        ))),
    }
}

/// Resolves a chart reference; unknown names and unreadable files are
/// configuration errors.
pub fn resolve(reference: &str) -> Result<MetricChart> {
    if let Some(rest) = reference.strip_prefix("cone:") {
        return resolve(rest).map(|c| cone(&c));
    }
    if let Some(rest) = reference.strip_prefix("doubled:") {
        return resolve(rest).map(|c| double_warped(&c));
    }
    if let Some(rest) = reference.strip_prefix("exp:") {
        return resolve(rest).map(|c| exponential_extension(&c));
    }
    if reference.ends_with(".toml") {
        let text = std::fs::read_to_string(Path::new(reference))
            .map_err(|e| Error::Config(format!("cannot read {reference}: {e}")))?;
        return charts::custom_chart_from_toml(&text);
    }
    catalog(reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_compose() {
        assert_eq!(resolve("cone:sphere2").unwrap().dim(), 3);
        assert_eq!(resolve("doubled:plane_wave_exp").unwrap().dim(), 5);
        assert_eq!(resolve("cone:exp:flat1").unwrap().dim(), 3);
        assert_eq!(resolve("flat1_3").unwrap().signature(), (1, 3));
        assert_eq!(resolve("hyperbolic3").unwrap().dim(), 3);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        for bad in ["sphere0", "torus", "cone:", "flat_", "missing.toml"] {
            assert!(matches!(resolve(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
