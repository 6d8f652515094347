//! Run configuration: TOML file, command-line overrides and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cocycle::LagrangianDistribution;
use crate::hamflow::{build_system, uniform_grid, EvolveOptions, HamiltonianSystem, PhasePoint, Scheme, ShellSpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OPTENT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "optent-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { name: "harmonic".into(), params: BTreeMap::new() }
    }
}

/// `distribution = "vertical"` or `distribution = { graph = [[...], ...] }`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionConfig {
    #[default]
    Vertical,
    /// Rows of a symmetric matrix `S`; the distribution is `{(S η, η)}`.
    Graph(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub system: SystemConfig,
    pub distribution: DistributionConfig,
    /// Energy of the shell or level.
    pub e: f64,
    /// Shell half-widths; three or more trigger the `ε → 0` extrapolation.
    pub epsilon: Vec<f64>,
    pub t_max: f64,
    /// Spacing of the output time grid.
    pub spacing: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub samples: usize,
    pub seed: u64,
    /// Regression window; defaults to `[t_max/2, t_max]`.
    pub window: Option<(f64, f64)>,
    /// Thresholds of the twist probe.
    pub deltas: Vec<f64>,
    /// Initial point `(q, p)` for `simulate` and `twist`; defaults to the first shell sample.
    pub point: Option<Vec<f64>>,
    /// Diagonal of a constant metric in which determinants are measured.
    pub metric: Option<Vec<f64>>,
    /// Sampling box `[(lo, hi); 2n]` for shells of systems without a built-in one.
    pub bounding_box: Option<Vec<(f64, f64)>>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            distribution: DistributionConfig::Vertical,
            e: 0.5,
            epsilon: vec![0.1],
            t_max: 20.0,
            spacing: 0.5,
            dt: 1e-3,
            scheme: Scheme::Auto,
            samples: 1000,
            seed: 1,
            window: None,
            deltas: vec![0.0, 0.01, 0.02, 0.05, 0.1],
            point: None,
            metric: None,
            bounding_box: None,
            out_dir: None,
            format: OutputFormat::Csv,
        }
    }
}

/// Values set on the command line; each overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub epsilon: Vec<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("invalid configuration: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.samples {
            self.samples = v;
        }
        if let Some(v) = o.t_max {
            self.t_max = v;
        }
        if let Some(v) = o.dt {
            self.dt = v;
        }
        if !o.epsilon.is_empty() {
            self.epsilon = o.epsilon.clone();
        }
        if let Some(v) = &o.out {
            self.out_dir = Some(v.clone());
        }
        if let Some(v) = o.format {
            self.format = v;
        }
    }

    /// Fills defaults that depend on other fields and the environment.
    pub fn resolve(&mut self, env_out: Option<String>) {
        if self.window.is_none() {
            self.window = Some((self.t_max / 2.0, self.t_max));
        }
        if self.out_dir.is_none() {
            self.out_dir = Some(env_out.map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)));
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{what} must be positive and finite"))
            }
        };
        pos(self.t_max, "t_max")?;
        pos(self.spacing, "spacing")?;
        pos(self.dt, "dt")?;
        if !self.e.is_finite() {
            return Err("e must be finite".into());
        }
        if self.epsilon.is_empty() {
            return Err("at least one epsilon is required".into());
        }
        for &eps in &self.epsilon {
            pos(eps, "epsilon")?;
        }
        if self.samples == 0 {
            return Err("samples must be positive".into());
        }
        if let Some((a, b)) = self.window {
            if !(a < b && a >= 0.0 && b <= self.t_max * (1.0 + 1e-12)) {
                return Err(format!("window [{a}, {b}] must lie inside [0, t_max] with t0 < t1"));
            }
        }
        if self.deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err("deltas must be nonnegative".into());
        }
        self.system()?;
        let n = self.system()?.dof();
        self.distribution(n)?;
        if let Some(p) = &self.point {
            if p.len() != 2 * n {
                return Err(format!("point must have {} coordinates", 2 * n));
            }
        }
        if let Some(m) = &self.metric {
            if m.len() != 2 * n || m.iter().any(|v| !(*v > 0.0)) {
                return Err(format!("metric must list {} positive entries", 2 * n));
            }
        }
        if let Some(b) = &self.bounding_box {
            if b.len() != 2 * n || b.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(format!("bounding_box must list {} intervals with lo < hi", 2 * n));
            }
        }
        Ok(())
    }

    /// Shell at the configured energy with half-width `epsilon`.
    pub fn shell(&self, epsilon: f64, count: usize) -> ShellSpec {
        let s = ShellSpec::new(self.e, epsilon, count, self.seed);
        match &self.bounding_box {
            Some(b) => s.with_box(b.clone()),
            None => s,
        }
    }

    pub fn system(&self) -> Result<Box<dyn HamiltonianSystem>, String> {
        let params: Vec<(String, f64)> = self.system.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        build_system(&self.system.name, &params).map_err(|e| e.to_string())
    }

    pub fn distribution(&self, n: usize) -> Result<LagrangianDistribution, String> {
        match &self.distribution {
            DistributionConfig::Vertical => Ok(LagrangianDistribution::Vertical),
            DistributionConfig::Graph(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(format!("graph matrix must be {n}×{n}"));
                }
                let s = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                LagrangianDistribution::graph(s).map_err(|e| e.to_string())
            }
        }
    }

    pub fn grid(&self) -> Result<Vec<f64>, String> {
        uniform_grid(self.t_max, self.spacing).map_err(|e| e.to_string())
    }

    pub fn window(&self) -> (f64, f64) {
        self.window.unwrap_or((self.t_max / 2.0, self.t_max))
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            scheme: self.scheme,
            metric: self.metric.as_ref().map(|m| DVector::from_column_slice(m)),
            ..EvolveOptions::with_dt(self.dt)
        }
    }

    pub fn start_point(&self) -> Result<Option<PhasePoint>, String> {
        self.point.as_ref().map(|p| PhasePoint::from_slice(p).map_err(|e| e.to_string())).transpose()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let c = Config::from_toml(
            r#"
            e = 1.0
            epsilon = [0.2, 0.1, 0.05]
            t_max = 50.0
            samples = 100
            window = [25.0, 50.0]
            distribution = { graph = [[1.0, 0.0], [0.0, 2.0]] }
            [system]
            name = "mechanical_torus"
            params = { c1 = 1.0, c3 = 0.5 }
            "#,
        )
        .unwrap();
        assert_eq!(c.system.params["c3"], 0.5);
        assert_eq!(c.epsilon.len(), 3);
        c.validate().unwrap();
        assert!(matches!(c.distribution(2).unwrap(), LagrangianDistribution::Graph(_)));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::from_toml("bogus = 1").is_err());
        assert!(Config::from_toml("[system]\nname = \"harmonic\"\nextra = 2").is_err());
        let c = Config { dt: -1.0, ..Config::default() };
        assert!(c.validate().is_err());
        let c = Config { system: SystemConfig { name: "nope".into(), params: BTreeMap::new() }, ..Config::default() };
        assert!(c.validate().is_err());
        let c = Config { window: Some((5.0, 50.0)), ..Config::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_and_defaults() {
        let mut c = Config::default();
        c.apply(&Overrides { seed: Some(9), epsilon: vec![0.3], ..Overrides::default() });
        c.resolve(Some("/tmp/x".into()));
        assert_eq!(c.seed, 9);
        assert_eq!(c.epsilon, vec![0.3]);
        assert_eq!(c.window, Some((10.0, 20.0)));
        assert_eq!(c.out_dir, Some(PathBuf::from("/tmp/x")));
    }
}
