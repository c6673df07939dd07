//! Run settings resolved with precedence flag > environment > config file > default.
//! Flags and `CONELAB_*` variables arrive together through clap; the file
//! layer fills whatever both left unset.

use crate::report::SettingsEcho;
use conelab::charts::{DEFAULT_GRID_POINTS, DEFAULT_GRID_SEED};
use conelab::holonomy::DEFAULT_MAX_ORDER;
use conelab::linalg::DEFAULT_TOL;
use conelab::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Values given by flags or environment variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub jet_order: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub timing: Option<bool>,
}

/// Keys of a `verify` configuration document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub tol: Option<f64>,
    pub jet_order: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub timing: Option<bool>,
    /// null-plane configurations, relative to the document
    pub null_plane: Option<Vec<PathBuf>>,
}

impl FileSettings {
    pub fn load(path: &Path) -> Result<FileSettings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut file: FileSettings =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        if let Some(list) = &mut file.null_plane {
            for p in list.iter_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// rank tolerance of spans
    pub tol: f64,
    /// highest curvature derivative order of holonomy spans
    pub jet_order: usize,
    pub grid: usize,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub timing: bool,
    pub null_plane: Vec<PathBuf>,
}

impl Default for Settings {
    fn default() -> Settings {
        Settings {
            tol: DEFAULT_TOL,
            jet_order: DEFAULT_MAX_ORDER,
            grid: DEFAULT_GRID_POINTS,
            seed: DEFAULT_GRID_SEED,
            format: Format::Json,
            out: None,
            timing: false,
            null_plane: Vec::new(),
        }
    }
}

impl Settings {
    pub fn resolve(over: &Overrides, file: &FileSettings) -> Result<Settings> {
        let d = Settings::default();
        let s = Settings {
            tol: over.tol.or(file.tol).unwrap_or(d.tol),
            jet_order: over.jet_order.or(file.jet_order).unwrap_or(d.jet_order),
            grid: over.grid.or(file.grid).unwrap_or(d.grid),
            seed: over.seed.or(file.seed).unwrap_or(d.seed),
            format: over.format.or(file.format).unwrap_or(d.format),
            out: over.out.clone().or_else(|| file.out.clone()),
            timing: over.timing.or(file.timing).unwrap_or(d.timing),
            null_plane: file.null_plane.clone().unwrap_or_default(),
        };
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol must lie in (0, 1), got {}",
                s.tol
            )));
        }
        if s.grid == 0 {
            return Err(Error::Config("grid must be positive".into()));
        }
        if s.jet_order > 8 {
            return Err(Error::Config(format!(
                "jet order {} exceeds the supported 8",
                s.jet_order
            )));
        }
        Ok(s)
    }

    pub fn echo(&self) -> SettingsEcho {
        SettingsEcho {
            tol: self.tol,
            jet_order: self.jet_order,
            grid: self.grid,
            seed: self.seed,
        }
    }
}
