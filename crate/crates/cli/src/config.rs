//! `key = value` experiment manifests. Command-line flags override them.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sat_local::tape::Seed;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub seed: Option<Seed>,
    pub alpha: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub c: Option<f64>,
    pub theta: Option<f64>,
    pub horizon: Option<i64>,
    pub rcap: Option<usize>,
    pub caps: Option<usize>,
    pub fallback: Option<bool>,
    pub format: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("config line {}: bad value for {key}", i + 1);
            match key {
                "seed" => cfg.seed = Some(parse_seed(value).with_context(ctx)?),
                "alpha" => cfg.alpha = Some(value.parse().with_context(ctx)?),
                "beta1" => cfg.beta1 = Some(value.parse().with_context(ctx)?),
                "beta2" => cfg.beta2 = Some(value.parse().with_context(ctx)?),
                "c" => cfg.c = Some(value.parse().with_context(ctx)?),
                "theta" => cfg.theta = Some(value.parse().with_context(ctx)?),
                "horizon" | "T" => cfg.horizon = Some(value.parse().with_context(ctx)?),
                "rcap" | "r_cap" => cfg.rcap = Some(value.parse().with_context(ctx)?),
                "caps" => cfg.caps = Some(value.parse().with_context(ctx)?),
                "fallback" => cfg.fallback = Some(value.parse().with_context(ctx)?),
                "format" => cfg.format = Some(value.to_string()),
                other => bail!("config line {}: unknown key `{other}`", i + 1),
            }
        }
        Ok(cfg)
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: Config) -> Config {
        Config {
            seed: other.seed.or(self.seed),
            alpha: other.alpha.or(self.alpha),
            beta1: other.beta1.or(self.beta1),
            beta2: other.beta2.or(self.beta2),
            c: other.c.or(self.c),
            theta: other.theta.or(self.theta),
            horizon: other.horizon.or(self.horizon),
            rcap: other.rcap.or(self.rcap),
            caps: other.caps.or(self.caps),
            fallback: other.fallback.or(self.fallback),
            format: other.format.or(self.format),
        }
    }
}

/// 64 hex characters, or a decimal integer.
pub fn parse_seed(text: &str) -> Result<Seed> {
    let text = text.trim();
    if text.len() == 64 {
        return Ok(Seed::from_hex(text)?);
    }
    text.parse::<u64>()
        .map(Seed::from_u64)
        .map_err(|_| anyhow!("seed must be a decimal integer or 64 hex characters"))
}

/// `d` as a number or as `2^x`; returns `log2 d`.
pub fn parse_log2_d(text: &str) -> Result<f64> {
    let text = text.trim();
    if let Some(exp) = text.strip_prefix("2^") {
        return exp
            .parse::<f64>()
            .map_err(|_| anyhow!("bad exponent in `{text}`"));
    }
    let d: f64 = text.parse().map_err(|_| anyhow!("bad degree `{text}`"))?;
    if d <= 0.0 {
        bail!("degree must be positive");
    }
    Ok(d.log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overlays() {
        let base = Config::parse("seed = 7\nalpha=0.2 # comment\n\nformat = json\n").unwrap();
        assert_eq!(base.seed, Some(Seed::from_u64(7)));
        assert_eq!(base.alpha, Some(0.2));
        let flags = Config {
            alpha: Some(0.1),
            ..Default::default()
        };
        let merged = base.overlay(flags);
        assert_eq!(merged.alpha, Some(0.1));
        assert_eq!(merged.format.as_deref(), Some("json"));
    }

    #[test]
    fn rejects_unknown_keys_and_garbage() {
        assert!(Config::parse("gamma = 1").is_err());
        assert!(Config::parse("alpha").is_err());
        assert!(Config::parse("alpha = x").is_err());
    }

    #[test]
    fn degree_forms() {
        assert_eq!(parse_log2_d("2^25").unwrap(), 25.0);
        assert_eq!(parse_log2_d("8").unwrap(), 3.0);
        assert!(parse_log2_d("-1").is_err());
    }

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seed("3").unwrap(), Seed::from_u64(3));
        assert!(parse_seed(&"ab".repeat(32)).is_ok());
        assert!(parse_seed("xyz").is_err());
    }
}
