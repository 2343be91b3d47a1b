//! Flat `key = value` sweep configuration.
//!
//! ```text
//! # comment
//! experiment = snr2d
//! pattern = builtin:mirror2d
//! snr_db = 0, 5, 10, 20
//! k = 100
//! trials = 200
//! fov_deg = -90:90, 0:90
//! objective = ml, simplified
//! seed = 7
//! theta_grid_deg = 0:90:1
//! ```
//!
//! Grids are `start:stop:step` in degrees with `stop` excluded. `fov_deg` entries are
//! `lo:hi` intervals on theta or `full`. `seed` is mandatory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::basis::{Dimension, POLE_EPSILON};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, FieldOfView, Objective};
use crate::pattern::{
    asymmetric_pattern_2d, load_model, low_gain_band_pattern_3d, mirror_symmetric_pattern_2d, PatternModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    AngleSweep2D,
    SnrSweep2D,
    Map3D,
    CrbOnly,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::AngleSweep2D => "angle2d",
            Experiment::SnrSweep2D => "snr2d",
            Experiment::Map3D => "map3d",
            Experiment::CrbOnly => "crb",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "angle2d" => Ok(Experiment::AngleSweep2D),
            "snr2d" => Ok(Experiment::SnrSweep2D),
            "map3d" => Ok(Experiment::Map3D),
            "crb" => Ok(Experiment::CrbOnly),
            other => Err(Error::InvalidInput(format!(
                "unknown experiment {other:?} (expected angle2d, snr2d, map3d or crb)"
            ))),
        }
    }
}

/// `start:stop:step` in degrees, stop excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::InvalidInput("grid bounds must be finite".into()));
        }
        if step <= 0.0 {
            return Err(Error::InvalidInput(format!("grid step {step} must be positive")));
        }
        if stop <= start {
            return Err(Error::InvalidInput(format!("grid {start}:{stop}:{step} is empty")));
        }
        Ok(GridSpec { start, stop, step })
    }

    /// Grid values in degrees.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step - 1e-9).ceil() as usize;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let nums: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some([a, b, c]) => GridSpec::new(*a, *b, *c),
            _ => Err(Error::InvalidInput(format!("grid {s:?} must be start:stop:step"))),
        }
    }
}

/// Theta search interval, in degrees, or the full manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FovSpec {
    Full,
    Theta { lo: f64, hi: f64 },
}

impl FovSpec {
    pub fn to_fov(self, dimension: Dimension) -> Result<FieldOfView> {
        match self {
            FovSpec::Full => Ok(FieldOfView::full(dimension)),
            FovSpec::Theta { lo, hi } => FieldOfView::theta_range(dimension, lo.to_radians(), hi.to_radians()),
        }
    }
}

impl fmt::Display for FovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FovSpec::Full => f.write_str("full"),
            FovSpec::Theta { lo, hi } => write!(f, "{lo}:{hi}"),
        }
    }
}

impl FromStr for FovSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "full" {
            return Ok(FovSpec::Full);
        }
        let bad = || Error::InvalidInput(format!("field of view {s:?} must be lo:hi in degrees or full"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(bad());
        }
        Ok(FovSpec::Theta { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub experiment: Experiment,
    /// `builtin:asymmetric2d`, `builtin:mirror2d`, `builtin:lowgain3d` or a model file path.
    pub pattern: Option<String>,
    pub snr_db: Vec<f64>,
    pub snapshots: usize,
    pub trials: usize,
    pub noise_var: f64,
    pub fovs: Vec<FovSpec>,
    pub objectives: Vec<Objective>,
    pub seed: u64,
    pub theta_grid: Option<GridSpec>,
    pub phi_grid: Option<GridSpec>,
    /// Estimator coarse grid step in degrees; dimension default when absent.
    pub coarse_step_deg: Option<f64>,
    pub refine_tol: f64,
    pub max_refine_iters: usize,
    pub refine_candidates: usize,
    /// Worker threads; 0 uses all cores. Never affects results.
    pub workers: usize,
}

const KEYS: [&str; 16] = [
    "experiment",
    "pattern",
    "snr_db",
    "k",
    "trials",
    "noise_var",
    "fov_deg",
    "objective",
    "seed",
    "theta_grid_deg",
    "phi_grid_deg",
    "coarse_step_deg",
    "refine_tol",
    "max_refine_iters",
    "refine_candidates",
    "workers",
];

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::InvalidInput(format!("{what} list is empty")));
    }
    items
        .iter()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::InvalidInput(format!("invalid {what} {t:?}")))
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl SweepConfig {
    /// Defaults: SNR 20 dB, K = 100, 500 trials, full field of view, ML objective.
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        SweepConfig {
            experiment,
            pattern: None,
            snr_db: vec![20.0],
            snapshots: 100,
            trials: 500,
            noise_var: 1.0,
            fovs: vec![FovSpec::Full],
            objectives: vec![Objective::Ml],
            seed,
            theta_grid: None,
            phi_grid: None,
            coarse_step_deg: None,
            refine_tol: 1e-8,
            max_refine_iters: 2000,
            refine_candidates: 3,
            workers: 0,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    /// Parses the flat text format; `path` only labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        Self::parse_for(text, path, None)
    }

    /// Like [`SweepConfig::parse`], with the experiment supplied by the caller.
    /// A conflicting `experiment` key is an error.
    pub fn parse_for(text: &str, path: &Path, experiment: Option<Experiment>) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno, "expected key = value"))?;
            let key = key.trim();
            let key = if key == "model" { "pattern" } else { key };
            if !KEYS.contains(&key) {
                return Err(Error::parse(path, lineno, format!("unknown key {key:?}")));
            }
            if entries.insert(key, (lineno, value.trim())).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate key {key:?}")));
            }
        }
        let at = |key: &str| entries.get(key).copied();
        let wrap = |line: usize, e: Error| match e {
            Error::InvalidInput(msg) | Error::Domain(msg) => Error::parse(path, line, msg),
            other => other,
        };
        let experiment = match (at("experiment"), experiment) {
            (Some((line, exp)), given) => {
                let parsed: Experiment = exp.parse().map_err(|e| wrap(line, e))?;
                if given.is_some_and(|g| g != parsed) {
                    return Err(Error::parse(path, line, format!("config is for experiment {parsed}")));
                }
                parsed
            }
            (None, Some(given)) => given,
            (None, None) => return Err(Error::parse(path, 1, "missing key \"experiment\"")),
        };
        let (line, seed) = at("seed").ok_or_else(|| Error::parse(path, 1, "missing key \"seed\""))?;
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::parse(path, line, format!("seed {seed:?} is not a 64-bit unsigned integer")))?;
        let mut cfg = SweepConfig::new(experiment, seed);
        for (key, (line, value)) in &entries {
            let line = *line;
            let num = |what: &str| -> Result<f64> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, line, format!("{what} {value:?} is not a finite number")))
            };
            let int = |what: &str| -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::parse(path, line, format!("{what} {value:?} is not a nonnegative integer")))
            };
            match *key {
                "experiment" | "seed" => {}
                "pattern" => cfg.pattern = Some(value.to_string()),
                "snr_db" => cfg.snr_db = parse_list(value, "snr_db").map_err(|e| wrap(line, e))?,
                "k" => cfg.snapshots = int("k")?,
                "trials" => cfg.trials = int("trials")?,
                "noise_var" => cfg.noise_var = num("noise_var")?,
                "fov_deg" => cfg.fovs = parse_list(value, "fov_deg").map_err(|e| wrap(line, e))?,
                "objective" => cfg.objectives = parse_list(value, "objective").map_err(|e| wrap(line, e))?,
                "theta_grid_deg" => cfg.theta_grid = Some(value.parse().map_err(|e| wrap(line, e))?),
                "phi_grid_deg" => cfg.phi_grid = Some(value.parse().map_err(|e| wrap(line, e))?),
                "coarse_step_deg" => cfg.coarse_step_deg = Some(num("coarse_step_deg")?),
                "refine_tol" => cfg.refine_tol = num("refine_tol")?,
                "max_refine_iters" => cfg.max_refine_iters = int("max_refine_iters")?,
                "refine_candidates" => cfg.refine_candidates = int("refine_candidates")?,
                "workers" => cfg.workers = int("workers")?,
                _ => unreachable!("keys are checked above"),
            }
        }
        cfg.validate().map_err(|e| wrap(1, e))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be >= 1".into()));
        }
        if self.trials >= 1 << 24 {
            return Err(Error::InvalidInput("trials must be below 2^24".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::InvalidInput("noise_var must be positive".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("snr_db must list finite values".into()));
        }
        if self.fovs.is_empty() || self.objectives.is_empty() {
            return Err(Error::InvalidInput("fov_deg and objective must be non-empty".into()));
        }
        if let Some(step) = self.coarse_step_deg {
            if !(step > 0.0) {
                return Err(Error::InvalidInput("coarse_step_deg must be positive".into()));
            }
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::InvalidInput("refine_tol must be positive".into()));
        }
        if self.refine_candidates == 0 {
            return Err(Error::InvalidInput("refine_candidates must be >= 1".into()));
        }
        Ok(())
    }

    pub fn theta_grid_or_default(&self, dimension: Dimension) -> GridSpec {
        self.theta_grid.unwrap_or(match dimension {
            Dimension::TwoD => GridSpec {
                start: -180.0,
                stop: 180.0,
                step: 1.0,
            },
            Dimension::ThreeD => GridSpec {
                start: 2.0,
                stop: 180.0,
                step: 4.0,
            },
        })
    }

    pub fn phi_grid_or_default(&self) -> GridSpec {
        self.phi_grid.unwrap_or(GridSpec {
            start: 0.0,
            stop: 360.0,
            step: 4.0,
        })
    }

    /// True directions in radians, theta outer. 3D theta values are clamped off the poles.
    pub fn truth_grid(&self, dimension: Dimension) -> Vec<(f64, f64)> {
        let thetas = self.theta_grid_or_default(dimension).values();
        match dimension {
            Dimension::TwoD => thetas.iter().map(|t| (t.to_radians(), 0.0)).collect(),
            Dimension::ThreeD => {
                let phis = self.phi_grid_or_default().values();
                let lo = POLE_EPSILON;
                let hi = std::f64::consts::PI - POLE_EPSILON;
                thetas
                    .iter()
                    .flat_map(|t| phis.iter().map(move |p| (t.to_radians().clamp(lo, hi), p.to_radians())))
                    .collect()
            }
        }
    }

    pub fn estimator_config(
        &self,
        dimension: Dimension,
        objective: Objective,
        fov: FovSpec,
    ) -> Result<EstimatorConfig> {
        let mut cfg = EstimatorConfig::default_for(dimension)
            .with_objective(objective)
            .with_fov(fov.to_fov(dimension)?);
        if let Some(step) = self.coarse_step_deg {
            cfg.coarse_grid_step = step.to_radians();
        }
        cfg.refine_tol = self.refine_tol;
        cfg.max_refine_iters = self.max_refine_iters;
        cfg.refine_candidates = self.refine_candidates;
        cfg.validate(dimension)?;
        Ok(cfg)
    }

    /// Loads the configured pattern; relative paths resolve against `base`.
    pub fn load_pattern(&self, base: &Path) -> Result<PatternModel> {
        let spec = self
            .pattern
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("config has no pattern".into()))?;
        match spec {
            "builtin:asymmetric2d" => Ok(asymmetric_pattern_2d()),
            "builtin:mirror2d" => Ok(mirror_symmetric_pattern_2d()),
            "builtin:lowgain3d" => Ok(low_gain_band_pattern_3d()),
            s if s.starts_with("builtin:") => Err(Error::InvalidInput(format!(
                "unknown builtin pattern {s:?} (expected asymmetric2d, mirror2d or lowgain3d)"
            ))),
            s => {
                let p = PathBuf::from(s);
                load_model(if p.is_absolute() { p } else { base.join(p) })
            }
        }
    }

    /// Single-line `key=value` rendering of every result-affecting field.
    pub fn echo(&self, dimension: Dimension) -> String {
        let mut s = format!(
            "experiment={} pattern={} snr_db={} k={} trials={} noise_var={} fov_deg={} objective={} seed={} theta_grid_deg={}",
            self.experiment,
            self.pattern.as_deref().unwrap_or("-"),
            join(&self.snr_db),
            self.snapshots,
            self.trials,
            self.noise_var,
            join(&self.fovs),
            join(&self.objectives),
            self.seed,
            self.theta_grid_or_default(dimension),
        );
        if dimension == Dimension::ThreeD {
            s.push_str(&format!(" phi_grid_deg={}", self.phi_grid_or_default()));
        }
        let step = self.coarse_step_deg.unwrap_or(match dimension {
            Dimension::TwoD => 1.0,
            Dimension::ThreeD => 4.0,
        });
        s.push_str(&format!(
            " coarse_step_deg={step} refine_tol={} max_refine_iters={} refine_candidates={}",
            self.refine_tol, self.max_refine_iters, self.refine_candidates
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_example() {
        let text = "# sweep\nexperiment = snr2d\npattern = builtin:mirror2d\nsnr_db = 0, 5\nk=50\ntrials = 10\n\
                    fov_deg = -90:90, 0:90\nobjective = ml, simplified\nseed = 7  # fixed\ntheta_grid_deg = 0:90:1\n";
        let cfg = SweepConfig::parse(text, Path::new("s.cfg")).unwrap();
        assert_eq!(cfg.experiment, Experiment::SnrSweep2D);
        assert_eq!(cfg.snr_db, vec![0.0, 5.0]);
        assert_eq!(cfg.snapshots, 50);
        assert_eq!(
            cfg.fovs,
            vec![
                FovSpec::Theta { lo: -90.0, hi: 90.0 },
                FovSpec::Theta { lo: 0.0, hi: 90.0 }
            ]
        );
        assert_eq!(cfg.objectives, vec![Objective::Ml, Objective::Simplified]);
        assert_eq!(cfg.theta_grid.unwrap().values().len(), 90);
    }

    #[test]
    fn rejects_bad_input() {
        let p = Path::new("s.cfg");
        assert!(SweepConfig::parse("experiment = angle2d\n", p).is_err());
        assert!(SweepConfig::parse("experiment = angle2d\nseed = 1\nbogus = 2\n", p).is_err());
        assert!(SweepConfig::parse("experiment = angle2d\nseed = 1\nseed = 2\n", p).is_err());
        assert!(SweepConfig::parse("experiment = angle2d\nseed = 1\ntrials = 0\n", p).is_err());
        let e = SweepConfig::parse("experiment = angle2d\nseed = 1\n\ntheta_grid_deg = 5:1:1\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e:?}");
    }

    #[test]
    fn grid_excludes_stop() {
        let g: GridSpec = "0:360:8".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 45);
        assert_eq!(v[44], 352.0);
        let g: GridSpec = "4:180:8".parse().unwrap();
        assert_eq!(g.values().len(), 22);
    }
}
