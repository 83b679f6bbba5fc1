//! Flat `key = value` config files and the resolved run settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hydroblow::{FamilyKind, ProfileFamily, SimConfig};

use crate::{Common, Failure};

pub const KEYS: &[&str] = &[
    "family", "c", "c1", "c2", "k", "nodes", "tmax", "rtol", "atol", "threshold", "out", "seed",
    "jobs", "param", "values", "sweep_tol", "trials", "y0", "f", "shift",
];

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected key = value", n + 1));
        };
        let (k, v) = (k.trim().replace('-', "_"), v.trim());
        if !KEYS.contains(&k.as_str()) {
            return Err(format!("line {}: unknown key `{k}`", n + 1));
        }
        map.insert(k, v.to_string());
    }
    Ok(map)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Every knob after applying defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub family: FamilyKind,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    pub nodes: usize,
    pub tmax: f64,
    pub rtol: f64,
    pub atol: f64,
    pub threshold: f64,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub jobs: usize,
    pub param: String,
    pub values: Option<Vec<f64>>,
    pub sweep_tol: f64,
    pub trials: usize,
    pub y0: Vec<f64>,
    pub f: Option<String>,
    pub shift: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            family: FamilyKind::Poly2,
            c: 3.0,
            c1: 1.0,
            c2: 1.0,
            k: 2.0,
            nodes: sim.n_nodes,
            tmax: sim.t_max,
            rtol: sim.rtol,
            atol: sim.atol,
            threshold: sim.blowup_threshold,
            out: None,
            seed: 0,
            jobs: 1,
            param: "c".into(),
            values: None,
            sweep_tol: 0.05,
            trials: 1000,
            y0: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            f: None,
            shift: vec![0.0, 0.0, 0.5],
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Failure> {
    v.trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("invalid value for {key}: `{v}`")))
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, Failure> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl Settings {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), Failure> {
        match key {
            "family" => {
                self.family = v
                    .parse()
                    .map_err(|e: hydroblow::Error| Failure::Usage(e.to_string()))?
            }
            "c" => self.c = num(key, v)?,
            "c1" => self.c1 = num(key, v)?,
            "c2" => self.c2 = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "nodes" => self.nodes = num(key, v)?,
            "tmax" => self.tmax = num(key, v)?,
            "rtol" => self.rtol = num(key, v)?,
            "atol" => self.atol = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "seed" => self.seed = num(key, v)?,
            "jobs" => self.jobs = num(key, v)?,
            "param" => self.param = v.to_string(),
            "values" => self.values = Some(parse_list(key, v)?),
            "sweep_tol" => self.sweep_tol = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "y0" => self.y0 = parse_list(key, v)?,
            "f" => self.f = Some(v.to_string()),
            "shift" => self.shift = parse_list(key, v)?,
            other => return Err(Failure::Usage(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(common: &Common, extra: &[(&str, Option<String>)]) -> Result<Self, Failure> {
        let mut s = Settings::default();
        if let Some(path) = &common.config {
            for (k, v) in load_config(path)? {
                s.set(&k, &v)?;
            }
        }
        for (k, v) in common.pairs().iter().chain(extra) {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        if s.nodes.is_multiple_of(2) {
            return Err(Failure::Usage(format!("--nodes must be odd, got {}", s.nodes)));
        }
        if s.jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        Ok(s)
    }

    pub fn family(&self) -> ProfileFamily {
        match self.family {
            FamilyKind::Poly2 => ProfileFamily::Poly2 { c: self.c },
            FamilyKind::Poly4 => ProfileFamily::Poly4 { c1: self.c1, c2: self.c2 },
            FamilyKind::CoshK => ProfileFamily::CoshK { c: self.c, k: self.k },
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_nodes: self.nodes,
            t_max: self.tmax,
            rtol: self.rtol,
            atol: self.atol,
            blowup_threshold: self.threshold,
            ..SimConfig::default()
        }
    }

    /// Flag, then config, then `HYDROBLOW_OUT`, then the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("HYDROBLOW_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Family parameters as `key = value` lines.
    pub fn describe_family(&self) -> String {
        let mut s = format!("family = {}\n", self.family);
        match self.family {
            FamilyKind::Poly2 => s += &format!("c = {}\n", self.c),
            FamilyKind::Poly4 => s += &format!("c1 = {}\nc2 = {}\n", self.c1, self.c2),
            FamilyKind::CoshK => s += &format!("c = {}\nk = {}\n", self.c, self.k),
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let m = parse_config("# run\nc = 2  # amplitude\n\nnodes=129\n").unwrap();
        assert_eq!(m["c"], "2");
        assert_eq!(m["nodes"], "129");
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("c 2").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("values", "1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_list("values", "").unwrap().is_empty());
        assert!(parse_list("values", "1,x").is_err());
    }
}
