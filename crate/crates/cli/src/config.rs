//! Run configuration: defaults, flat `key = value` files, and flag
//! overrides, with precedence flags > file > defaults.

use std::path::{Path, PathBuf};

use palm::kernel::Nugget;
use palm::lagp::LocalConfig;
use palm::palm::PalmConfig;
use palm::{PalmError, Result};
use palm_testbed::Surface;

/// How expert centers are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterMode {
    /// One boundary-buffered maximin design of the full size.
    Spacefill,
    /// A small maximin seed grown one expert at a time toward the
    /// worst-residual regions.
    Sequential,
}

/// Everything a run needs beyond its input files. Every field maps to one
/// config-file key of the same name (see the README for the key table).
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Test surface: herbie | glee | michalewicz | sine.
    pub function: String,
    /// Input dimension (glee requires 2, sine requires 1).
    pub dims: usize,
    /// Training grid resolution, points per dimension (inclusive grid).
    pub train_ppd: usize,
    /// Test grid resolution, points per dimension (cell-midpoint grid,
    /// disjoint from any inclusive training grid with even `train_ppd`).
    pub test_ppd: usize,
    /// Standard deviation of the Gaussian noise added to training
    /// responses. Test responses are always the noise-free surface.
    pub noise_sd: f64,
    /// Number of local experts.
    pub k: usize,
    /// Seed design size for sequential center selection.
    pub k_init: usize,
    /// Center selection mode.
    pub center_mode: CenterMode,
    /// Local design size per expert.
    pub n: usize,
    /// Nearest-neighbor seed size per expert.
    pub n0: usize,
    /// Candidate pool cap for greedy local design search.
    pub n_cand: usize,
    /// Weight power override; `None` means the `log_d K` default.
    pub power: Option<f64>,
    /// Multi-starts per sequential center search.
    pub m_s: usize,
    /// Let each expert estimate its own noise level during fitting
    /// (recommended whenever `noise_sd > 0`).
    pub estimate_nugget: bool,
    /// Fixed expert nugget; `None` means the numerical jitter floor.
    pub nugget: Option<f64>,
    /// Fit a global trend stage first and aggregate experts on residuals.
    pub two_stage: bool,
    /// Sub-sample size for the two-stage global fit.
    pub m_global: usize,
    /// Master RNG seed (noise draws, designs, center searches).
    pub seed: u64,
    /// Output directory for all written artifacts.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            function: "herbie".into(),
            dims: 2,
            train_ppd: 50,
            test_ppd: 51,
            noise_sd: 0.0,
            k: 25,
            k_init: 5,
            center_mode: CenterMode::Spacefill,
            n: 50,
            n0: 6,
            n_cand: 1000,
            power: None,
            m_s: 10,
            estimate_nugget: false,
            nugget: None,
            two_stage: false,
            m_global: 200,
            seed: 7,
            out: PathBuf::from("."),
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> PalmError {
    PalmError::InvalidArgument(format!(
        "config key {key}: expected {want}, got {value:?}"
    ))
}

impl RunConfig {
    /// Applies one `key = value` assignment. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let usize_of = |v: &str| -> Result<usize> {
            v.parse().map_err(|_| bad(key, v, "a nonnegative integer"))
        };
        let f64_of = |v: &str| -> Result<f64> {
            let x: f64 = v.parse().map_err(|_| bad(key, v, "a number"))?;
            if !x.is_finite() {
                return Err(bad(key, v, "a finite number"));
            }
            Ok(x)
        };
        let bool_of = |v: &str| -> Result<bool> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(bad(key, v, "true or false")),
            }
        };
        match key {
            "function" => self.function = value.to_string(),
            "dims" => self.dims = usize_of(value)?,
            "train_ppd" => self.train_ppd = usize_of(value)?,
            "test_ppd" => self.test_ppd = usize_of(value)?,
            "noise_sd" => self.noise_sd = f64_of(value)?,
            "k" => self.k = usize_of(value)?,
            "k_init" => self.k_init = usize_of(value)?,
            "center_mode" => {
                self.center_mode = match value {
                    "spacefill" => CenterMode::Spacefill,
                    "sequential" => CenterMode::Sequential,
                    _ => return Err(bad(key, value, "spacefill or sequential")),
                }
            }
            "n" => self.n = usize_of(value)?,
            "n0" => self.n0 = usize_of(value)?,
            "n_cand" => self.n_cand = usize_of(value)?,
            "power" => {
                self.power = match value {
                    "auto" => None,
                    _ => Some(f64_of(value)?),
                }
            }
            "m_s" => self.m_s = usize_of(value)?,
            "estimate_nugget" => self.estimate_nugget = bool_of(value)?,
            "nugget" => {
                self.nugget = match value {
                    "jitter" => None,
                    _ => Some(f64_of(value)?),
                }
            }
            "two_stage" => self.two_stage = bool_of(value)?,
            "m_global" => self.m_global = usize_of(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| bad(key, value, "an unsigned integer"))?
            }
            "out" => self.out = PathBuf::from(value),
            _ => {
                return Err(PalmError::InvalidArgument(format!(
                    "unknown config key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Merges a flat `key = value` config file over the current values.
    /// Blank lines and lines starting with `#` are skipped; repeated keys
    /// are rejected so a file always reads unambiguously.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PalmError::InvalidArgument(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PalmError::InvalidArgument(format!(
                    "{}:{}: expected key = value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(PalmError::InvalidArgument(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            self.set(key, value).map_err(|e| {
                PalmError::InvalidArgument(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(())
    }

    /// Cross-field range checks, run once after all sources are merged.
    pub fn validate(&self) -> Result<()> {
        Surface::parse(&self.function, self.dims)?;
        let req = |ok: bool, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(PalmError::InvalidArgument(msg.into()))
            }
        };
        req(self.train_ppd >= 2, "train_ppd must be at least 2")?;
        req(self.test_ppd >= 1, "test_ppd must be at least 1")?;
        req(self.noise_sd >= 0.0, "noise_sd must be nonnegative")?;
        req(self.k >= 1, "k must be at least 1")?;
        req(
            (1..=self.k).contains(&self.k_init),
            "k_init must be in 1..=k",
        )?;
        req(
            self.n0 >= 1 && self.n0 < self.n,
            "need 1 <= n0 < n for local designs",
        )?;
        req(self.n_cand >= self.n, "n_cand must be at least n")?;
        if let Some(p) = self.power {
            req(p >= 0.0, "power must be nonnegative")?;
        }
        req(self.m_s >= 1, "m_s must be at least 1")?;
        if let Some(g) = self.nugget {
            req(g > 0.0, "nugget must be strictly positive")?;
        }
        req(self.m_global >= 2, "m_global must be at least 2")?;
        Ok(())
    }

    /// The surface this run targets.
    pub fn surface(&self) -> Result<Surface> {
        Surface::parse(&self.function, self.dims)
    }

    /// The model-fitting configuration this run implies.
    pub fn palm_config(&self) -> Result<PalmConfig<f64>> {
        let mut cfg = PalmConfig::<f64>::default();
        cfg.local = LocalConfig {
            n: self.n,
            n0: self.n0,
            n_cand: self.n_cand,
            estimate_nugget: self.estimate_nugget,
            ..LocalConfig::default()
        };
        cfg.power = self.power;
        if let Some(g) = self.nugget {
            cfg.nugget = Nugget::noise(g)?;
        }
        cfg.seed = self.seed;
        Ok(cfg)
    }
}
