//! Scenario configuration: a flat `key = value` text format.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::cars::UpdateMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    PkOpt,
    CarsOpt,
    PkBmw,
    CarsBmw,
    Bg,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::PkOpt, Variant::CarsOpt, Variant::PkBmw, Variant::CarsBmw, Variant::Bg];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PkOpt => "PK-OPT",
            Variant::CarsOpt => "CARS-OPT",
            Variant::PkBmw => "PK-BMW",
            Variant::CarsBmw => "CARS-BMW",
            Variant::Bg => "BG",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn learns(self) -> bool {
        matches!(self, Variant::CarsOpt | Variant::CarsBmw)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrivals {
    /// Per-type counts are Poisson with the configured mean.
    Poisson,
    /// Per-type counts are the configured rate, rounded.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetRule {
    /// `budget_fraction` of the energy offered by the round's V2G tasks.
    SumOfV2g,
    /// A constant `budget_kwh` every round.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub num_workers: usize,
    pub rounds: u32,
    pub k: usize,
    pub lambda_km: f64,
    /// Mean arrivals per round for rideshare, battery swap and V2G.
    pub rates: [f64; 3],
    pub arrivals: Arrivals,
    pub region_km: f64,
    pub v2g_kwh_min: f64,
    pub v2g_kwh_max: f64,
    pub budget_rule: BudgetRule,
    pub budget_kwh: f64,
    pub budget_fraction: f64,
    pub preference_set: Vec<f64>,
    pub bid_base: f64,
    pub bid_per_km: f64,
    pub markup_min: f64,
    pub markup_max: f64,
    pub bid_noise_sd: f64,
    pub min_bid: f64,
    pub speed_kmh: f64,
    pub charge_rounds: u32,
    pub charge_margin_km: f64,
    pub carry_over_rounds: u32,
    pub static_mode: bool,
    pub update_mode: UpdateMode,
    pub prior: f64,
    pub seed: u64,
    pub variant: Variant,
    pub workers_file: Option<PathBuf>,
    pub tasks_file: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            num_workers: 54,
            rounds: 96,
            k: 5,
            lambda_km: 10.0,
            rates: [6.0, 6.0, 8.0],
            arrivals: Arrivals::Poisson,
            region_km: 20.0,
            v2g_kwh_min: 1.0,
            v2g_kwh_max: 10.0,
            budget_rule: BudgetRule::SumOfV2g,
            budget_kwh: 0.0,
            budget_fraction: 1.0,
            preference_set: vec![0.1, 0.4, 0.5, 0.7, 0.9, 1.0],
            bid_base: 2.5,
            bid_per_km: 1.0,
            markup_min: 0.9,
            markup_max: 1.3,
            bid_noise_sd: 0.5,
            min_bid: 0.5,
            speed_kmh: 30.0,
            charge_rounds: 4,
            charge_margin_km: 20.0,
            carry_over_rounds: 1,
            static_mode: false,
            update_mode: UpdateMode::Bernoulli,
            prior: 0.5,
            seed: 1,
            variant: Variant::PkOpt,
            workers_file: None,
            tasks_file: None,
        }
    }
}

/// Every key accepted by [`Scenario::set`], in file order.
pub const KEYS: &[&str] = &[
    "num_workers",
    "rounds",
    "k",
    "lambda_km",
    "rate_rideshare",
    "rate_battery_swap",
    "rate_v2g",
    "arrivals",
    "region_km",
    "v2g_kwh_min",
    "v2g_kwh_max",
    "budget_rule",
    "budget_kwh",
    "budget_fraction",
    "preference_set",
    "bid_base",
    "bid_per_km",
    "markup_min",
    "markup_max",
    "bid_noise_sd",
    "min_bid",
    "speed_kmh",
    "charge_rounds",
    "charge_margin_km",
    "carry_over_rounds",
    "static_mode",
    "update_mode",
    "prior",
    "seed",
    "variant",
    "workers_file",
    "tasks_file",
];

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_owned(),
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse `{value}` as {}", std::any::type_name::<T>())))
}

impl Scenario {
    /// Sets one key from its text form. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "num_workers" => self.num_workers = num(key, v)?,
            "rounds" => self.rounds = num(key, v)?,
            "k" | "K" => self.k = num(key, v)?,
            "lambda_km" | "lambda" => self.lambda_km = num(key, v)?,
            "rate_rideshare" => self.rates[0] = num(key, v)?,
            "rate_battery_swap" => self.rates[1] = num(key, v)?,
            "rate_v2g" => self.rates[2] = num(key, v)?,
            "arrivals" => {
                self.arrivals = match v {
                    "poisson" => Arrivals::Poisson,
                    "fixed" => Arrivals::Fixed,
                    _ => return Err(config_err(key, "expected `poisson` or `fixed`")),
                }
            }
            "region_km" => self.region_km = num(key, v)?,
            "v2g_kwh_min" => self.v2g_kwh_min = num(key, v)?,
            "v2g_kwh_max" => self.v2g_kwh_max = num(key, v)?,
            "budget_rule" => {
                self.budget_rule = match v {
                    "sum_v2g" => BudgetRule::SumOfV2g,
                    "fixed" => BudgetRule::Fixed,
                    _ => return Err(config_err(key, "expected `sum_v2g` or `fixed`")),
                }
            }
            "budget_kwh" => self.budget_kwh = num(key, v)?,
            "budget_fraction" => self.budget_fraction = num(key, v)?,
            "preference_set" => {
                self.preference_set = v
                    .split(',')
                    .map(|p| num::<f64>(key, p.trim()))
                    .collect::<Result<_>>()?
            }
            "bid_base" => self.bid_base = num(key, v)?,
            "bid_per_km" => self.bid_per_km = num(key, v)?,
            "markup_min" => self.markup_min = num(key, v)?,
            "markup_max" => self.markup_max = num(key, v)?,
            "bid_noise_sd" => self.bid_noise_sd = num(key, v)?,
            "min_bid" => self.min_bid = num(key, v)?,
            "speed_kmh" => self.speed_kmh = num(key, v)?,
            "charge_rounds" => self.charge_rounds = num(key, v)?,
            "charge_margin_km" => self.charge_margin_km = num(key, v)?,
            "carry_over_rounds" => self.carry_over_rounds = num(key, v)?,
            "static_mode" => self.static_mode = num(key, v)?,
            "update_mode" => {
                self.update_mode =
                    UpdateMode::parse(v).ok_or_else(|| config_err(key, "expected `bernoulli` or `bid-only`"))?
            }
            "prior" => self.prior = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "variant" => self.variant = Variant::parse(v).ok_or_else(|| config_err(key, format!("unknown variant `{v}`")))?,
            "workers_file" => self.workers_file = (!v.is_empty()).then(|| PathBuf::from(v)),
            "tasks_file" => self.tasks_file = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(config_err(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<scenario>".into(),
                row: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Scenario> {
        let mut s = Scenario::default();
        s.apply_text(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut s = Scenario::default();
        s.apply_text(&text).map_err(|e| match e {
            Error::Parse { row, message, .. } => Error::Parse {
                path: path.display().to_string(),
                row,
                message,
            },
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for file in [&mut s.workers_file, &mut s.tasks_file].into_iter().flatten() {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(config_err(key, msg)) };
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        check(self.rounds >= 1, "rounds", "must be >= 1")?;
        check(self.k >= 1, "k", "must be >= 1")?;
        check(self.lambda_km.is_finite() && self.lambda_km > 0.0, "lambda_km", "must be > 0")?;
        for (key, rate) in ["rate_rideshare", "rate_battery_swap", "rate_v2g"].iter().zip(self.rates) {
            check(finite_nonneg(rate), key, "must be >= 0")?;
        }
        check(self.region_km.is_finite() && self.region_km > 0.0, "region_km", "must be > 0")?;
        check(
            self.v2g_kwh_min > 0.0 && self.v2g_kwh_min <= self.v2g_kwh_max && self.v2g_kwh_max.is_finite(),
            "v2g_kwh_min",
            "need 0 < v2g_kwh_min <= v2g_kwh_max",
        )?;
        check(finite_nonneg(self.budget_kwh), "budget_kwh", "must be >= 0")?;
        check(finite_nonneg(self.budget_fraction), "budget_fraction", "must be >= 0")?;
        check(
            !self.preference_set.is_empty() && self.preference_set.iter().all(|p| (0.0..=1.0).contains(p)),
            "preference_set",
            "need one or more values in [0, 1]",
        )?;
        check(finite_nonneg(self.bid_base), "bid_base", "must be >= 0")?;
        check(finite_nonneg(self.bid_per_km), "bid_per_km", "must be >= 0")?;
        check(
            self.markup_min > 0.0 && self.markup_min <= self.markup_max && self.markup_max.is_finite(),
            "markup_min",
            "need 0 < markup_min <= markup_max",
        )?;
        check(finite_nonneg(self.bid_noise_sd), "bid_noise_sd", "must be >= 0")?;
        check(self.min_bid.is_finite() && self.min_bid > 0.0, "min_bid", "must be > 0")?;
        check(self.speed_kmh.is_finite() && self.speed_kmh > 0.0, "speed_kmh", "must be > 0")?;
        check(finite_nonneg(self.charge_margin_km), "charge_margin_km", "must be >= 0")?;
        check((0.0..=1.0).contains(&self.prior), "prior", "must lie in [0, 1]")?;
        check(
            self.workers_file.is_some() || self.num_workers >= 1,
            "num_workers",
            "must be >= 1",
        )?;
        Ok(())
    }

    /// Text form accepted by [`Scenario::parse_str`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("num_workers", self.num_workers.to_string());
        kv("rounds", self.rounds.to_string());
        kv("k", self.k.to_string());
        kv("lambda_km", self.lambda_km.to_string());
        kv("rate_rideshare", self.rates[0].to_string());
        kv("rate_battery_swap", self.rates[1].to_string());
        kv("rate_v2g", self.rates[2].to_string());
        kv(
            "arrivals",
            match self.arrivals {
                Arrivals::Poisson => "poisson",
                Arrivals::Fixed => "fixed",
            }
            .into(),
        );
        kv("region_km", self.region_km.to_string());
        kv("v2g_kwh_min", self.v2g_kwh_min.to_string());
        kv("v2g_kwh_max", self.v2g_kwh_max.to_string());
        kv(
            "budget_rule",
            match self.budget_rule {
                BudgetRule::SumOfV2g => "sum_v2g",
                BudgetRule::Fixed => "fixed",
            }
            .into(),
        );
        kv("budget_kwh", self.budget_kwh.to_string());
        kv("budget_fraction", self.budget_fraction.to_string());
        kv(
            "preference_set",
            self.preference_set.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        kv("bid_base", self.bid_base.to_string());
        kv("bid_per_km", self.bid_per_km.to_string());
        kv("markup_min", self.markup_min.to_string());
        kv("markup_max", self.markup_max.to_string());
        kv("bid_noise_sd", self.bid_noise_sd.to_string());
        kv("min_bid", self.min_bid.to_string());
        kv("speed_kmh", self.speed_kmh.to_string());
        kv("charge_rounds", self.charge_rounds.to_string());
        kv("charge_margin_km", self.charge_margin_km.to_string());
        kv("carry_over_rounds", self.carry_over_rounds.to_string());
        kv("static_mode", self.static_mode.to_string());
        kv("update_mode", self.update_mode.as_str().into());
        kv("prior", self.prior.to_string());
        kv("seed", self.seed.to_string());
        kv("variant", self.variant.name().into());
        if let Some(p) = &self.workers_file {
            kv("workers_file", p.display().to_string());
        }
        if let Some(p) = &self.tasks_file {
            kv("tasks_file", p.display().to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = Scenario::parse_str("").unwrap();
        assert_eq!((s.k, s.lambda_km, s.rounds), (5, 10.0, 96));
        assert_eq!(s.preference_set, vec![0.1, 0.4, 0.5, 0.7, 0.9, 1.0]);
    }

    #[test]
    fn overrides_and_comments() {
        let s = Scenario::parse_str("# comment\nk = 10\nvariant = cars-bmw  # trailing\nstatic_mode=true\n").unwrap();
        assert_eq!(s.k, 10);
        assert_eq!(s.variant, Variant::CarsBmw);
        assert!(s.static_mode);
    }

    #[test]
    fn errors_name_the_key() {
        let e = Scenario::parse_str("rounds = 0").unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "rounds"), "{e}");
        let e = Scenario::parse_str("colour = blue").unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "colour"));
        let e = Scenario::parse_str("k = five").unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "k"));
        assert!(Scenario::parse_str("just words").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut s = Scenario::default();
        s.set("preference_set", "0.2, 0.8").unwrap();
        s.set("budget_rule", "fixed").unwrap();
        s.set("budget_kwh", "12.5").unwrap();
        s.set("update_mode", "bid-only").unwrap();
        s.set("workers_file", "fleet.csv").unwrap();
        assert_eq!(Scenario::parse_str(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let sample = Scenario::default().to_text();
        let mut seen: Vec<&str> = sample.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        seen.extend(["workers_file", "tasks_file"]);
        for key in KEYS {
            assert!(seen.contains(key), "{key}");
        }
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()), Some(v));
        }
        assert_eq!(Variant::parse("nope"), None);
    }
}
