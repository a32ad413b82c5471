//! Run configuration: a TOML file plus `key.path=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use capl::materials::Material;
use capl::model::MeshConfig;
use capl::solver::SolverConfig;
use capl::toolpath::{parse_toolpath, Toolpath};
use serde::Deserialize;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write a 16-bit PGM of the reconstructed field at every snapshot.
    pub rasters: bool,
    /// Write `elements.csv` and `edges.csv`.
    pub mesh: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub toolpath: PathBuf,
    /// Material override file; IN625 when absent.
    #[serde(default)]
    pub material: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Recorded with the outputs. The pipeline itself has no random
    /// component.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, overrides).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into()?;
        cfg.solver.validate()?;
        cfg.mesh.validate()?;
        Ok(cfg)
    }

    pub fn read_toolpath(&self) -> Result<Toolpath> {
        let file = std::fs::File::open(&self.toolpath)
            .with_context(|| format!("opening toolpath {}", self.toolpath.display()))?;
        parse_toolpath(std::io::BufReader::new(file)).with_context(|| format!("in {}", self.toolpath.display()))
    }

    pub fn read_material(&self) -> Result<Material> {
        match &self.material {
            Some(p) => Ok(Material::from_override_file(p)?),
            None => Ok(Material::in625()),
        }
    }
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables. The value
/// is parsed as a TOML value, falling back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        bail!("override `{assignment}` has an empty key");
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{p}` is not a table"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Worker cap from `CAPL_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("CAPL_THREADS") {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow!("CAPL_THREADS must be a positive integer, got `{v}`"))?;
            if n == 0 {
                bail!("CAPL_THREADS must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}
