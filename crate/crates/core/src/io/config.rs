//! Plain-text `key = value` run configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::diagnostics::LadderConfig;
use crate::error::{Error, Result};
use crate::mhd::{InitialCondition, Species, SpeciesSel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    /// `dx / 8`, which satisfies the CFL bound for every admissible amplitude.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub mu: f64,
    pub half_length: f64,
    pub n: usize,
    pub dt: TimeStep,
    pub t_final: f64,
    pub r: f64,
    pub k: usize,
    pub main_top: usize,
    pub ic: InitialCondition,
    pub amplitude: f64,
    pub envelope_sigma: f64,
    pub carrier_mode: u32,
    pub flux_cadence: usize,
    pub checkpoint_times: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub low_freq_h: f64,
}

const KEYS: &[&str] = &[
    "mu",
    "L",
    "n",
    "dt",
    "t_final",
    "R",
    "K",
    "main_top",
    "ic",
    "amplitude",
    "envelope_sigma",
    "carrier_mode",
    "flux_cadence",
    "checkpoint_times",
    "seed",
    "output_dir",
    "low_freq_h",
];

fn parse_ic(v: &str) -> std::result::Result<InitialCondition, String> {
    match v {
        "zero" => return Ok(InitialCondition::Zero),
        "packet_plus" => return Ok(InitialCondition::Packet(SpeciesSel::Plus)),
        "packet_minus" => return Ok(InitialCondition::Packet(SpeciesSel::Minus)),
        "packet_both" => return Ok(InitialCondition::Packet(SpeciesSel::Both)),
        _ => {}
    }
    let inner = v
        .strip_prefix("single_mode(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("unknown initial condition '{v}'"))?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err("single_mode expects (k1, k2, k3, plus|minus)".into());
    }
    let mut k = [0i64; 3];
    for (slot, p) in k.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("bad mode number '{p}'"))?;
    }
    let species = parse_species(parts[3])?;
    Ok(InitialCondition::SingleMode { k, species })
}

pub fn parse_species(v: &str) -> std::result::Result<Species, String> {
    match v {
        "plus" => Ok(Species::Plus),
        "minus" => Ok(Species::Minus),
        _ => Err(format!("species must be plus or minus, got '{v}'")),
    }
}

fn ic_text(ic: &InitialCondition) -> String {
    match ic {
        InitialCondition::Zero => "zero".into(),
        InitialCondition::Packet(SpeciesSel::Plus) => "packet_plus".into(),
        InitialCondition::Packet(SpeciesSel::Minus) => "packet_minus".into(),
        InitialCondition::Packet(SpeciesSel::Both) => "packet_both".into(),
        InitialCondition::SingleMode { k, species } => {
            format!("single_mode({}, {}, {}, {})", k[0], k[1], k[2], species.name())
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse { line, msg: format!("{key}: cannot parse '{v}'") })
}

/// Parse and validate a configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut seen = HashSet::new();
    let mut mu = None;
    let mut l = None;
    let mut n = None;
    let mut t_final = None;
    let mut ic = None;
    let mut dt = TimeStep::Auto;
    let mut r = crate::characteristics::DEFAULT_R;
    let mut k = 2usize;
    let mut main_top = None;
    let mut amplitude = 0.1;
    let mut sigma = None;
    let mut carrier_mode = 0u32;
    let mut flux_cadence = 4usize;
    let mut checkpoint_times = Vec::new();
    let mut seed = 0u64;
    let mut output_dir = PathBuf::from("out");
    let mut low_freq_h = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(a, b)| (a.trim(), b.trim()))
            .ok_or_else(|| Error::Parse { line, msg: format!("expected 'key = value', got '{content}'") })?;
        if !KEYS.contains(&key) {
            return Err(Error::Parse { line, msg: format!("unknown key '{key}'") });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse { line, msg: format!("duplicate key '{key}'") });
        }
        match key {
            "mu" => mu = Some(num::<f64>(line, key, value)?),
            "L" => l = Some(num::<f64>(line, key, value)?),
            "n" => n = Some(num::<usize>(line, key, value)?),
            "dt" => {
                dt = if value == "auto" { TimeStep::Auto } else { TimeStep::Fixed(num(line, key, value)?) }
            }
            "t_final" => t_final = Some(num::<f64>(line, key, value)?),
            "R" => r = num(line, key, value)?,
            "K" => k = num(line, key, value)?,
            "main_top" => main_top = Some(num(line, key, value)?),
            "ic" => ic = Some(parse_ic(value).map_err(|msg| Error::Parse { line, msg })?),
            "amplitude" => amplitude = num(line, key, value)?,
            "envelope_sigma" => sigma = Some(num::<f64>(line, key, value)?),
            "carrier_mode" => carrier_mode = num(line, key, value)?,
            "flux_cadence" => flux_cadence = num(line, key, value)?,
            "checkpoint_times" => {
                checkpoint_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| num::<f64>(line, key, s))
                    .collect::<Result<_>>()?
            }
            "seed" => seed = num(line, key, value)?,
            "output_dir" => output_dir = PathBuf::from(value),
            "low_freq_h" => low_freq_h = Some(num::<f64>(line, key, value)?),
            _ => unreachable!(),
        }
    }

    let missing = |k: &str| Error::Validation(format!("missing required key '{k}'"));
    let half_length = l.ok_or_else(|| missing("L"))?;
    let n = n.ok_or_else(|| missing("n"))?;
    let cfg = SimConfig {
        mu: mu.ok_or_else(|| missing("mu"))?,
        half_length,
        n,
        dt,
        t_final: t_final.ok_or_else(|| missing("t_final"))?,
        r,
        k,
        main_top: main_top.unwrap_or(k),
        ic: ic.ok_or_else(|| missing("ic"))?,
        amplitude,
        envelope_sigma: sigma.unwrap_or(half_length / 16.0),
        carrier_mode,
        flux_cadence,
        checkpoint_times,
        seed,
        output_dir,
        low_freq_h: low_freq_h.unwrap_or((n / 6) as f64 * std::f64::consts::PI / half_length),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad(format!("mu = {} must lie in (0, 1)", self.mu));
        }
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return bad(format!("L = {} must be positive", self.half_length));
        }
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return bad(format!("n = {} must be even and at least 8", self.n));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt = {dt} must be positive"));
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be non-negative", self.t_final));
        }
        if !(self.r > 0.0) {
            return bad(format!("R = {} must be positive", self.r));
        }
        self.ladder().validate(self.n)?;
        if !(0.0..=crate::mhd::MAX_AMPLITUDE).contains(&self.amplitude) && self.ic != InitialCondition::Zero {
            return bad(format!("amplitude = {} violates the sup-norm bound 1/2", self.amplitude));
        }
        if !(self.envelope_sigma > 0.0) {
            return bad(format!("envelope_sigma = {} must be positive", self.envelope_sigma));
        }
        if self.flux_cadence == 0 {
            return bad("flux_cadence must be at least 1".into());
        }
        if self.checkpoint_times.windows(2).any(|w| w[1] <= w[0])
            || self.checkpoint_times.iter().any(|&t| !(t > 0.0 && t <= self.t_final))
        {
            return bad("checkpoint_times must be increasing and lie in (0, t_final]".into());
        }
        if !(self.low_freq_h > 0.0) {
            return bad(format!("low_freq_h = {} must be positive", self.low_freq_h));
        }
        Ok(())
    }

    pub fn ladder(&self) -> LadderConfig {
        LadderConfig { k: self.k, main_top: self.main_top }
    }

    /// `L >= e^(1/mu)`, the large-box regime.
    pub fn threshold_satisfied(&self) -> bool {
        self.half_length >= (1.0 / self.mu).exp()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Number of steps and the step length that lands exactly on `t_final`.
    pub fn schedule(&self) -> (usize, f64) {
        let target = match self.dt {
            TimeStep::Auto => self.dx() / 8.0,
            TimeStep::Fixed(dt) => dt,
        };
        if self.t_final == 0.0 {
            return (0, target);
        }
        let steps = (self.t_final / target - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }

    /// Serialize back to the configuration format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mu = {}", self.mu);
        let _ = writeln!(s, "L = {}", self.half_length);
        let _ = writeln!(s, "n = {}", self.n);
        match self.dt {
            TimeStep::Auto => s.push_str("dt = auto\n"),
            TimeStep::Fixed(dt) => {
                let _ = writeln!(s, "dt = {dt}");
            }
        }
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "R = {}", self.r);
        let _ = writeln!(s, "K = {}", self.k);
        let _ = writeln!(s, "main_top = {}", self.main_top);
        let _ = writeln!(s, "ic = {}", ic_text(&self.ic));
        let _ = writeln!(s, "amplitude = {}", self.amplitude);
        let _ = writeln!(s, "envelope_sigma = {}", self.envelope_sigma);
        let _ = writeln!(s, "carrier_mode = {}", self.carrier_mode);
        let _ = writeln!(s, "flux_cadence = {}", self.flux_cadence);
        let times: Vec<String> = self.checkpoint_times.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "checkpoint_times = {}", times.join(", "));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "low_freq_h = {}", self.low_freq_h);
        s
    }
}
