//! Experiment configuration: `key = value` lines grouped under `[section]`
//! headers, `#` comments. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use antireduce::integrators::Method;
use antireduce::BracketSign;

use crate::CliError;

/// Where the system comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSource {
    Preset(String),
    /// Structure constants from a text file with a diagonal quadratic energy
    /// `h = 1/2 sum_i d_i mu_i^2`.
    Inline {
        algebra: PathBuf,
        energy_diag: Vec<f64>,
        mu0: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PinningChoice {
    /// The preset's documented pinning rule.
    Preset,
    FixedQ(Vec<f64>),
    /// Gauss-Newton from a seeded random start with `p . q = f0`.
    Random {
        seed: u64,
        f0: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    /// `None` keeps the system's own sign.
    pub sign: Option<BracketSign>,
    pub params: BTreeMap<String, f64>,
    pub integrator: Method,
    /// `None` uses the preset's recommended step.
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
    pub sample_stride: usize,
    pub pinning: PinningChoice,
    pub drift_factor: f64,
    pub drift_floor: f64,
    pub convergence_dts: Vec<f64>,
    pub convergence_t_end: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemSource::Preset("kida".into()),
            sign: None,
            params: BTreeMap::new(),
            integrator: Method::Gl4,
            dt: None,
            t_end: None,
            newton_tolerance: 1e-13,
            newton_max_iterations: 25,
            sample_stride: 1,
            pinning: PinningChoice::Preset,
            drift_factor: 0.1,
            drift_floor: 1e-12,
            convergence_dts: vec![0.1, 0.05, 0.025, 0.0125],
            convergence_t_end: 2.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| parse_err(line, format!("`{key}` expects a finite number, got `{v}`")))
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').map(|x| parse_f64(line, key, x)).collect()
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, CliError> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("`{key}` expects a non-negative integer, got `{v}`")))
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut algebra: Option<PathBuf> = None;
        let mut energy_diag: Option<Vec<f64>> = None;
        let mut mu0: Option<Vec<f64>> = None;
        let mut strategy = String::from("preset");
        let mut fixed_q: Option<Vec<f64>> = None;
        let mut seed: u64 = 0;
        let mut f0 = 1.0;
        let mut preset: Option<String> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(line, "unterminated section header"))?;
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            let value = value.trim();
            match (section.as_str(), key) {
                ("system", "preset") => preset = Some(value.to_string()),
                ("system", "algebra") => algebra = Some(base.join(value)),
                ("system", "hamiltonian") => {
                    if value != "quadratic" {
                        return Err(parse_err(line, "inline systems support `hamiltonian = quadratic` only"));
                    }
                }
                ("system", "energy_diag") => energy_diag = Some(parse_list(line, key, value)?),
                ("system", "mu0") => mu0 = Some(parse_list(line, key, value)?),
                ("system", "sign") => {
                    cfg.sign = Some(
                        value
                            .parse()
                            .map_err(|e: antireduce::Error| parse_err(line, e.to_string()))?,
                    )
                }
                ("params", _) => {
                    cfg.params.insert(key.to_string(), parse_f64(line, key, value)?);
                }
                ("integration", "integrator") => {
                    cfg.integrator = value
                        .parse()
                        .map_err(|e: antireduce::Error| parse_err(line, e.to_string()))?
                }
                ("integration", "dt") => cfg.dt = Some(parse_f64(line, key, value)?),
                ("integration", "t_end") => cfg.t_end = Some(parse_f64(line, key, value)?),
                ("integration", "newton_tolerance") => cfg.newton_tolerance = parse_f64(line, key, value)?,
                ("integration", "newton_max_iterations") => cfg.newton_max_iterations = parse_usize(line, key, value)?,
                ("integration", "sample_stride") => cfg.sample_stride = parse_usize(line, key, value)?,
                ("pinning", "strategy") => strategy = value.to_ascii_lowercase(),
                ("pinning", "q") => fixed_q = Some(parse_list(line, key, value)?),
                ("pinning", "seed") => {
                    seed = value
                        .parse()
                        .map_err(|_| parse_err(line, format!("`seed` expects an unsigned integer, got `{value}`")))?
                }
                ("pinning", "f0") => f0 = parse_f64(line, key, value)?,
                ("diagnostics", "drift_factor") => cfg.drift_factor = parse_f64(line, key, value)?,
                ("diagnostics", "drift_floor") => cfg.drift_floor = parse_f64(line, key, value)?,
                ("convergence", "dts") => cfg.convergence_dts = parse_list(line, key, value)?,
                ("convergence", "t_end") => cfg.convergence_t_end = parse_f64(line, key, value)?,
                ("output", "dir") => cfg.out_dir = base.join(value),
                (s, k) => {
                    let where_ = if s.is_empty() {
                        "top level".to_string()
                    } else {
                        format!("[{s}]")
                    };
                    return Err(parse_err(line, format!("unknown key `{k}` in {where_}")));
                }
            }
        }

        cfg.system = match (preset, algebra) {
            (Some(_), Some(_)) => return Err(parse_err(0, "give either `preset` or `algebra`, not both")),
            (Some(p), None) => SystemSource::Preset(p),
            (None, Some(path)) => {
                let energy_diag = energy_diag.ok_or_else(|| parse_err(0, "inline system needs `energy_diag`"))?;
                let mu0 = mu0.ok_or_else(|| parse_err(0, "inline system needs `mu0`"))?;
                SystemSource::Inline {
                    algebra: path,
                    energy_diag,
                    mu0,
                }
            }
            (None, None) => SystemSource::Preset("kida".into()),
        };
        cfg.pinning = match strategy.as_str() {
            "preset" => PinningChoice::Preset,
            "fixed_q" => PinningChoice::FixedQ(fixed_q.ok_or_else(|| parse_err(0, "`strategy = fixed_q` needs `q`"))?),
            "random" => PinningChoice::Random { seed, f0 },
            other => return Err(parse_err(0, format!("unknown pinning strategy `{other}`"))),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad("dt must be positive");
            }
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                return bad("t_end must be non-negative");
            }
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1");
        }
        if !(self.newton_tolerance > 0.0) || self.newton_max_iterations == 0 {
            return bad("newton settings must be positive");
        }
        if self.convergence_dts.len() < 3 || self.convergence_dts.iter().any(|d| !(*d > 0.0)) {
            return bad("convergence needs at least three positive step sizes");
        }
        if !(self.convergence_t_end > 0.0) {
            return bad("convergence t_end must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config() {
        let text = "\
# Kida comparison
[system]
preset = kida
sign = plus

[params]
epsilon = 0.25   # weaker strain

[integration]
integrator = midpoint
dt = 0.05
t_end = 10
sample_stride = 2

[pinning]
strategy = random
seed = 42

[output]
dir = results
";
        let cfg = ExperimentConfig::parse(text, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.system, SystemSource::Preset("kida".into()));
        assert_eq!(cfg.sign, Some(BracketSign::Plus));
        assert_eq!(cfg.params["epsilon"], 0.25);
        assert_eq!(cfg.integrator, Method::Midpoint);
        assert_eq!(cfg.dt, Some(0.05));
        assert_eq!(cfg.sample_stride, 2);
        assert_eq!(cfg.pinning, PinningChoice::Random { seed: 42, f0: 1.0 });
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/x/results"));
    }

    #[test]
    fn inline_system() {
        let text =
            "[system]\nalgebra = so3.txt\nhamiltonian = quadratic\nenergy_diag = 1, 0.5, 0.25\nmu0 = 1, 0, 0.3\n";
        let cfg = ExperimentConfig::parse(text, Path::new("cfg")).unwrap();
        match cfg.system {
            SystemSource::Inline {
                algebra,
                energy_diag,
                mu0,
            } => {
                assert_eq!(algebra, PathBuf::from("cfg/so3.txt"));
                assert_eq!(energy_diag, vec![1.0, 0.5, 0.25]);
                assert_eq!(mu0, vec![1.0, 0.0, 0.3]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("[integration]\ndt = fast\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
        let err = ExperimentConfig::parse("[integration]\nspeed = 3\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        assert!(ExperimentConfig::parse("[system\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[integration]\ndt\n", Path::new(".")).is_err());
    }
}
