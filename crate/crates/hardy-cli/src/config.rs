//! Run configuration: structured JSON input for every command.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use faer::Mat;
use hardy_core::coefficients::{jacobian_coefficients, CoefficientField};
use hardy_core::linalg::C;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coefficients: Option<CoefficientConfig>,
    /// Fourier modes (= grid points) per axis.
    pub modes: Option<usize>,
    pub data: Option<DataConfig>,
    pub t_levels: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub which: Option<String>,
    /// Solve method for n = 1 problems: "direct" (default) or "series"
    /// (boundary-equation path, reported as a deviation diagnostic).
    pub method: Option<String>,
    pub tolerances: Option<ToleranceConfig>,
    /// Dump the assembled generator matrix (n = 1) as CSV from `check`.
    #[serde(default)]
    pub dump_operator: Option<bool>,
    pub family: Option<FamilyConfig>,
    pub perturb: Option<PerturbConfig>,
    pub forms: Option<FormsConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Relative target for Neumann-series solves.
    pub series: Option<f64>,
    /// Relative zero-mean gate on boundary data (informational; the solvers
    /// use their built-in gate).
    pub zero_mean: Option<f64>,
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("series", self.series), ("zero_mean", self.zero_mean)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    bail!("tolerance `{name}` must be positive, got {v}");
                }
            }
        }
        Ok(())
    }
}

/// Coefficient input: constant matrix, grid samples, or the graph-pullback
/// generator.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant {
        n: usize,
        m: usize,
        /// Row-major complex entries as [re, im] pairs.
        matrix: Vec<Vec<[f64; 2]>>,
    },
    Grid {
        n: usize,
        m: usize,
        grid_size: usize,
        samples: Vec<Vec<Vec<[f64; 2]>>>,
    },
    /// `A = [1+|∇g|², -∇gᵗ; -∇g, I]` from `g(x) = amplitude·sin(mode·x₁)`.
    Jacobian {
        n: usize,
        m: usize,
        grid_size: usize,
        amplitude: f64,
        #[serde(default)]
        mode: Option<i64>,
    },
}

fn parse_matrix(rows: &[Vec<[f64; 2]>], dim: usize) -> Result<Mat<C>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        bail!("coefficient matrix must be {dim}×{dim}");
    }
    Ok(Mat::from_fn(dim, dim, |i, j| {
        C::new(rows[i][j][0], rows[i][j][1])
    }))
}

impl CoefficientConfig {
    pub fn build(&self) -> Result<CoefficientField> {
        match self {
            CoefficientConfig::Constant { n, m, matrix } => {
                let dim = (1 + n) * m;
                let mat = parse_matrix(matrix, dim)?;
                Ok(CoefficientField::constant(*n, *m, mat)?)
            }
            CoefficientConfig::Grid {
                n,
                m,
                grid_size,
                samples,
            } => {
                let dim = (1 + n) * m;
                let mats = samples
                    .iter()
                    .map(|s| parse_matrix(s, dim))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CoefficientField::grid(*n, *m, *grid_size, mats)?)
            }
            CoefficientConfig::Jacobian {
                n,
                m,
                grid_size,
                amplitude,
                mode,
            } => {
                let mode = mode.unwrap_or(1) as f64;
                let total = grid_size.pow(*n as u32);
                let h = 2.0 * std::f64::consts::PI / *grid_size as f64;
                let g: Vec<f64> = (0..total)
                    .map(|flat| {
                        // x₁ is the slowest axis in row-major order
                        let j1 = flat / grid_size.pow((*n - 1) as u32);
                        amplitude * (mode * j1 as f64 * h).sin()
                    })
                    .collect();
                Ok(jacobian_coefficients(&g, *n, *m, *grid_size)?)
            }
        }
    }
}

/// Boundary data: a trigonometric profile, a CSV file, or inline values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DataConfig {
    Profile {
        /// "cos" or "sin".
        profile: String,
        #[serde(default)]
        mode: Option<i64>,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        component: Option<usize>,
    },
    Csv { csv: PathBuf },
    Values { values: Vec<[f64; 2]> },
}

impl DataConfig {
    /// Builds point-major samples with `m` components on the `size^n` grid.
    pub fn build(&self, n: usize, m: usize, size: usize, base: &Path) -> Result<Vec<C>> {
        let total = size.pow(n as u32);
        match self {
            DataConfig::Profile {
                profile,
                mode,
                amplitude,
                component,
            } => {
                let mode = mode.unwrap_or(1) as f64;
                let amp = amplitude.unwrap_or(1.0);
                let comp = component.unwrap_or(0);
                if comp >= m {
                    bail!("data component {comp} out of range (m = {m})");
                }
                let h = 2.0 * std::f64::consts::PI / size as f64;
                let mut out = vec![C::new(0.0, 0.0); total * m];
                for flat in 0..total {
                    let j1 = flat / size.pow((n - 1) as u32);
                    let x = j1 as f64 * h;
                    let v = match profile.as_str() {
                        "cos" => amp * (mode * x).cos(),
                        "sin" => amp * (mode * x).sin(),
                        other => bail!("unknown data profile `{other}` (use cos|sin)"),
                    };
                    out[flat * m + comp] = C::new(v, 0.0);
                }
                Ok(out)
            }
            DataConfig::Csv { csv } => {
                let path = if csv.is_absolute() {
                    csv.clone()
                } else {
                    base.join(csv)
                };
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading data CSV {}", path.display()))?;
                let mut out = vec![C::new(0.0, 0.0); total * m];
                let mut seen = 0usize;
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let cells: Vec<&str> = line.split(',').map(str::trim).collect();
                    if seen == 0 && cells.iter().any(|c| c.parse::<f64>().is_err()) {
                        continue; // header row
                    }
                    if cells.len() != n + 2 * m {
                        bail!(
                            "data CSV rows need {} columns ({} index + {} re/im pairs), got {}",
                            n + 2 * m,
                            n,
                            m,
                            cells.len()
                        );
                    }
                    let mut flat = 0usize;
                    for ax in 0..n {
                        let idx: usize = cells[ax].parse()?;
                        if idx >= size {
                            bail!("grid index {idx} out of range (size {size})");
                        }
                        flat = flat * size + idx;
                    }
                    for comp in 0..m {
                        let re: f64 = cells[n + 2 * comp].parse()?;
                        let im: f64 = cells[n + 2 * comp + 1].parse()?;
                        out[flat * m + comp] = C::new(re, im);
                    }
                    seen += 1;
                }
                if seen != total {
                    bail!("data CSV has {seen} rows, expected {total}");
                }
                Ok(out)
            }
            DataConfig::Values { values } => {
                if values.len() != total * m {
                    bail!(
                        "inline data has {} values, expected {}",
                        values.len(),
                        total * m
                    );
                }
                Ok(values.iter().map(|p| C::new(p[0], p[1])).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub base: CoefficientConfig,
    pub direction: CoefficientConfig,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub directions: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub directions: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormsConfig {
    pub n: usize,
    pub k: usize,
    /// Coefficient matrix on Λᵏ as [re, im] pairs; identity when omitted.
    #[serde(default)]
    pub b_matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub modes: Option<usize>,
}

impl FormsConfig {
    pub fn build_b(&self) -> Result<Mat<C>> {
        let dim = hardy_core::forms::lambda_dim(self.n, self.k);
        match &self.b_matrix {
            None => Ok(hardy_core::linalg::identity(dim)),
            Some(rows) => parse_matrix(rows, dim),
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(t) = &cfg.tolerances {
        t.validate()?;
    }
    if let Some(modes) = cfg.modes {
        if !modes.is_power_of_two() || modes < 2 {
            bail!("`modes` must be a power of two ≥ 2, got {modes}");
        }
    }
    Ok(cfg)
}
