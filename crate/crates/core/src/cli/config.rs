use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::level_solver::{DEFAULT_SIGMA, DEFAULT_THETA, DEFAULT_Y};
use crate::operator_builder::{Branch, Variant};
use crate::scalars::MIN_DIGITS;

pub const DEFAULT_DIGITS: u32 = 40;
pub const DEFAULT_BLOCKS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameKind {
    Translated,
    Real,
    Dilated,
}

impl FrameKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "t" | "translated" => Ok(Self::Translated),
            "r" | "real" => Ok(Self::Real),
            "d" | "dilated" => Ok(Self::Dilated),
            other => Err(Error::InvalidParameter(format!("unknown frame {other:?}"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Translated => "t",
            Self::Real => "r",
            Self::Dilated => "d",
        }
    }

    /// Klein-Gordon on the real line, Dirac-Titchmarsh otherwise.
    pub fn default_variant(self) -> Variant {
        match self {
            Self::Real => Variant::KleinGordon,
            _ => Variant::DiracTitchmarsh,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidParameter(format!("unknown output format {other:?}"))),
        }
    }
}

pub fn parse_variant(text: &str) -> Result<Variant> {
    match text.trim().to_ascii_lowercase().as_str() {
        "dirac" | "dirac_titchmarsh" | "titchmarsh" => Ok(Variant::DiracTitchmarsh),
        "kg" | "klein_gordon" | "klein-gordon" => Ok(Variant::KleinGordon),
        other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
    }
}

pub fn parse_branch(text: &str) -> Result<Branch> {
    match text.trim().to_ascii_lowercase().as_str() {
        "plus" | "+" => Ok(Branch::Plus),
        "minus" | "-" => Ok(Branch::Minus),
        other => Err(Error::InvalidParameter(format!("unknown branch {other:?}"))),
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Decimal strings, kept verbatim so values parse exactly at any precision.
    pub omega_list: Vec<String>,
    pub levels: Vec<usize>,
    pub variant: Option<Variant>,
    pub branch: Branch,
    pub frames: Vec<FrameKind>,
    pub y: f64,
    pub theta: f64,
    pub sigma: f64,
    pub digits: u32,
    pub basis_blocks: usize,
    pub output_format: OutputFormat,
    pub output_path: Option<PathBuf>,
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega_list: Vec::new(),
            levels: vec![0],
            variant: None,
            branch: Branch::Plus,
            frames: vec![FrameKind::Translated],
            y: DEFAULT_Y,
            theta: DEFAULT_THETA,
            sigma: DEFAULT_SIGMA,
            digits: DEFAULT_DIGITS,
            basis_blocks: DEFAULT_BLOCKS,
            output_format: OutputFormat::Csv,
            output_path: None,
            timing: true,
        }
    }
}

impl RunConfig {
    pub fn variant_for(&self, frame: FrameKind) -> Variant {
        self.variant.unwrap_or_else(|| frame.default_variant())
    }

    pub fn validate(&self) -> Result<()> {
        if self.digits < MIN_DIGITS {
            return Err(Error::DigitsBelowMinimum {
                digits: self.digits,
                minimum: MIN_DIGITS,
            });
        }
        if self.basis_blocks < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 blocks, got {}",
                self.basis_blocks
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidBasis(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.y.is_finite() && self.y > 0.0) {
            return Err(Error::InvalidParameter(format!("y must be positive, got {}", self.y)));
        }
        let limit = std::f64::consts::PI / 6.0;
        if !(self.theta.abs() > 0.0 && self.theta.abs() < limit) {
            return Err(Error::InvalidParameter(format!(
                "dilation angle must satisfy 0 < |theta| < pi/6, got {}",
                self.theta
            )));
        }
        for w in &self.omega_list {
            let v: f64 = w
                .parse()
                .map_err(|_| Error::Parse(w.clone()))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("omega must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

/// Values accepted for `omega` in a config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OmegaEntry {
    Text(String),
    Number(f64),
}

impl OmegaEntry {
    fn into_strings(self) -> Result<Vec<String>> {
        match self {
            Self::Text(s) => parse_omega_list(&s),
            Self::Number(v) => Ok(vec![format!("{v}")]),
        }
    }
}

/// Optional TOML file; every key mirrors a command-line flag.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub omega: Option<Vec<OmegaEntry>>,
    pub levels: Option<Vec<usize>>,
    pub variant: Option<String>,
    pub branch: Option<String>,
    pub frame: Option<String>,
    pub frames: Option<Vec<String>>,
    pub y: Option<f64>,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub digits: Option<u32>,
    pub blocks: Option<usize>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn apply(self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(list) = self.omega {
            let mut out = Vec::new();
            for e in list {
                out.extend(e.into_strings()?);
            }
            cfg.omega_list = out;
        }
        if let Some(v) = self.levels {
            cfg.levels = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = Some(parse_variant(&v)?);
        }
        if let Some(v) = self.branch {
            cfg.branch = parse_branch(&v)?;
        }
        if let Some(v) = self.frame {
            cfg.frames = vec![FrameKind::parse(&v)?];
        }
        if let Some(v) = self.frames {
            cfg.frames = v.iter().map(|f| FrameKind::parse(f)).collect::<Result<_>>()?;
        }
        if let Some(v) = self.y {
            cfg.y = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.digits {
            cfg.digits = v;
        }
        if let Some(v) = self.blocks {
            cfg.basis_blocks = v;
        }
        if let Some(v) = self.format {
            cfg.output_format = OutputFormat::parse(&v)?;
        }
        if let Some(v) = self.out {
            cfg.output_path = Some(v);
        }
        Ok(())
    }
}

/// Comma-separated values, each a decimal or an inclusive range
/// `start:stop:step` in plain decimal notation. Range points are generated
/// in exact decimal arithmetic.
pub fn parse_omega_list(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [single] => {
                single.parse::<f64>().map_err(|_| Error::Parse(single.to_string()))?;
                out.push(single.to_string());
            }
            [start, stop, step] => out.extend(decimal_range(start, stop, step)?),
            _ => return Err(Error::Parse(item.to_string())),
        }
    }
    Ok(out)
}

fn decimal_places(s: &str) -> Result<usize> {
    if s.contains(['e', 'E']) {
        return Err(Error::Parse(format!("ranges take plain decimals, got {s:?}")));
    }
    Ok(s.split_once('.').map_or(0, |(_, frac)| frac.len()))
}

fn scaled(s: &str, places: usize) -> Result<i128> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let mut digits = format!("{int}{frac}");
    digits.extend(std::iter::repeat('0').take(places - frac.len()));
    digits.parse().map_err(|_| Error::Parse(s.to_string()))
}

fn unscaled(v: i128, places: usize) -> String {
    let neg = v < 0;
    let mut digits = v.unsigned_abs().to_string();
    if places > 0 {
        if digits.len() <= places {
            digits = format!("{}{digits}", "0".repeat(places + 1 - digits.len()));
        }
        digits.insert(digits.len() - places, '.');
    }
    if neg {
        format!("-{digits}")
    } else {
        digits
    }
}

fn decimal_range(start: &str, stop: &str, step: &str) -> Result<Vec<String>> {
    let places = decimal_places(start)?.max(decimal_places(stop)?).max(decimal_places(step)?);
    let (a, b, h) = (scaled(start, places)?, scaled(stop, places)?, scaled(step, places)?);
    if h <= 0 {
        return Err(Error::InvalidParameter(format!("range step must be positive, got {step}")));
    }
    let mut out = Vec::new();
    let mut v = a;
    while v <= b {
        out.push(unscaled(v, places));
        v += h;
    }
    Ok(out)
}

/// Comma-separated level indices or inclusive ranges `lo-hi`.
pub fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || Error::Parse(item.to_string());
        match item.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                out.extend(lo..=hi);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_range_is_exact() {
        let v = parse_omega_list("0.002:0.005:0.0005").unwrap();
        assert_eq!(v, ["0.0020", "0.0025", "0.0030", "0.0035", "0.0040", "0.0045", "0.0050"]);
        assert_eq!(parse_omega_list("1e-6, 0.01").unwrap(), ["1e-6", "0.01"]);
        assert!(parse_omega_list("").unwrap().is_empty());
        assert!(parse_omega_list("abc").is_err());
        assert!(parse_omega_list("1e-3:1e-2:1e-3").is_err());
    }

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("0-3,7").unwrap(), [0, 1, 2, 3, 7]);
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn file_values_apply() {
        let file: FileConfig = toml::from_str(
            "omega = [\"0.002:0.003:0.0005\", 0.004]\nlevels = [0, 1]\nframe = \"d\"\ndigits = 60\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        file.apply(&mut cfg).unwrap();
        assert_eq!(cfg.omega_list, ["0.0020", "0.0025", "0.0030", "0.004"]);
        assert_eq!(cfg.frames, [FrameKind::Dilated]);
        assert_eq!(cfg.digits, 60);
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.theta = 0.6;
        assert!(cfg.validate().is_err());
        cfg.theta = 0.3;
        cfg.omega_list = vec!["-0.1".into()];
        assert!(cfg.validate().is_err());
    }
}
