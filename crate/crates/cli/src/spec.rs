//! Flag surface, config-file parsing, and resolution into a runnable spec.
//!
//! Every value flag is optional at the clap layer; resolution merges flags
//! over config-file entries over defaults, so that only `--R`, `--lambda`
//! and `--mu` end up mandatory for the system commands.

use clap::{Args, Subcommand};
use jsqps_core::{
    make_time_grid, Error, Hyperparameters, MethodId, PsVariant, RegimeMap, Result,
    ServiceDistribution, SimulationConfig, SystemConfig, TimeGrid,
};

use std::path::PathBuf;

pub const URLLC_ETAS: [f64; 4] = [0.99, 0.999, 0.9999, 0.99999];

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate P(T <= t) for one method, or the regime map's pick
    Cdf(CommonArgs),
    /// Percentiles of the approximated sojourn-time CDF
    Percentile(CommonArgs),
    /// Run the cluster simulator and tabulate the pooled empirical CDF
    Simulate(CommonArgs),
    /// Score one method against a simulated baseline
    Compare(CommonArgs),
    /// Rank methods against a simulated baseline at the given (R, rho) cell
    RegimeScan(CommonArgs),
    /// Regenerate a published dataset (table5, table6, fig4, fig8, fig9)
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// One of: table5, table6, fig4, fig8, fig9
    #[arg(value_name = "TARGET")]
    pub target: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Number of servers
    #[arg(long = "R")]
    pub r: Option<u32>,
    /// Total arrival rate
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Per-server service rate
    #[arg(long)]
    pub mu: Option<f64>,
    /// Method A..F, or "auto" to consult the regime map
    #[arg(long)]
    pub method: Option<String>,
    /// Markov chain truncation (per-server occupancy limit)
    #[arg(long = "L1")]
    pub l1: Option<usize>,
    /// Number of retained arrival-rate levels
    #[arg(long = "L2")]
    pub l2: Option<usize>,
    /// Grid horizon
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Grid spacing
    #[arg(long)]
    pub dt: Option<f64>,
    /// Maximum simulated time per trial
    #[arg(long)]
    pub qmax: Option<f64>,
    /// Warm-up time; arrivals before it are not recorded
    #[arg(long)]
    pub warmup: Option<f64>,
    /// Independent simulation trials
    #[arg(long)]
    pub trials: Option<u32>,
    /// Master RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Service law: exp, uniform, or det (all with mean 1/mu)
    #[arg(long)]
    pub service: Option<String>,
    /// Sharing discipline: standard, limited:k, or capacitated:k
    #[arg(long = "ps-variant")]
    pub ps_variant: Option<String>,
    /// Target probability; repeatable
    #[arg(long)]
    pub eta: Vec<f64>,
    /// Add the URLLC presets 0.99, 0.999, 0.9999, 0.99999
    #[arg(long)]
    pub urllc: bool,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key = value file supplying defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Regime-map override file consulted by "auto"
    #[arg(long = "regime-map")]
    pub regime_map: Option<PathBuf>,
    /// Reproduction scale: desk (default) or full
    #[arg(long)]
    pub scale: Option<String>,
    /// Acknowledge that a full-scale reproduction runs for hours
    #[arg(long = "confirm-long-run")]
    pub confirm_long_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Fixed(MethodId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceKind {
    Exp,
    Uniform,
    Det,
}

impl ServiceKind {
    pub fn distribution(self, mu: f64) -> ServiceDistribution {
        match self {
            ServiceKind::Exp => ServiceDistribution::exponential(mu),
            ServiceKind::Uniform => ServiceDistribution::uniform_for(mu),
            ServiceKind::Det => ServiceDistribution::deterministic_for(mu),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ServiceKind::Exp => "exp",
            ServiceKind::Uniform => "uniform",
            ServiceKind::Det => "det",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

/// Fully merged spec: flags over config file over defaults.
#[derive(Debug)]
pub struct Resolved {
    pub r: Option<u32>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub method: MethodChoice,
    pub l1: Option<usize>,
    pub l2: Option<usize>,
    pub tmax: f64,
    pub dt: f64,
    pub qmax: Option<f64>,
    pub warmup: Option<f64>,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
    pub service: ServiceKind,
    pub ps_variant: PsVariant,
    pub etas: Vec<f64>,
    pub urllc: bool,
    pub out: Option<PathBuf>,
    pub regime_map: Option<RegimeMap>,
    pub scale: Scale,
    pub confirm_long_run: bool,
}

impl Resolved {
    /// The mandatory trio, checked only by commands that need a system.
    pub fn system(&self) -> Result<SystemConfig> {
        let missing: Vec<&str> = [
            ("--R", self.r.is_none()),
            ("--lambda", self.lambda.is_none()),
            ("--mu", self.mu.is_none()),
        ]
        .iter()
        .filter(|(_, m)| *m)
        .map(|&(f, _)| f)
        .collect();
        if !missing.is_empty() {
            return Err(Error::Parameter(format!(
                "missing required flag(s): {}",
                missing.join(", ")
            )));
        }
        SystemConfig::new(self.r.unwrap(), self.lambda.unwrap(), self.mu.unwrap())
    }

    pub fn mu_or_one(&self) -> f64 {
        self.mu.unwrap_or(1.0)
    }

    /// Hyperparameters for `r`: tuned defaults with any explicit overrides.
    pub fn hyper_for(&self, r: u32) -> Result<Hyperparameters> {
        let mut h = Hyperparameters::defaults_for(r);
        if let Some(l1) = self.l1 {
            h = h.with_l1(l1);
        }
        if let Some(l2) = self.l2 {
            h = h.with_l2(l2);
        }
        h.validate(r)?;
        Ok(h)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        make_time_grid(self.tmax, self.dt)
    }

    pub fn qmax_or(&self, default: f64) -> f64 {
        self.qmax.unwrap_or(default)
    }

    pub fn warmup_or_default(&self) -> f64 {
        self.warmup.unwrap_or(SimulationConfig::DEFAULT_WARMUP)
    }

    pub fn trials_or_default(&self) -> u32 {
        self.trials.unwrap_or(SimulationConfig::DEFAULT_TRIALS)
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(SimulationConfig::DEFAULT_SEED)
    }

    /// Requested probabilities: explicit etas, then the URLLC presets if
    /// asked for (or if nothing else was requested and the command defaults
    /// to them).
    pub fn etas(&self, default_to_urllc: bool) -> Result<Vec<f64>> {
        let mut etas = self.etas.clone();
        if self.urllc || (default_to_urllc && etas.is_empty()) {
            for &e in &URLLC_ETAS {
                if !etas.contains(&e) {
                    etas.push(e);
                }
            }
        }
        for &e in &etas {
            if !(e.is_finite() && 0.0 < e && e < 1.0) {
                return Err(Error::Parameter(format!(
                    "eta must lie strictly between 0 and 1, got {e}"
                )));
            }
        }
        Ok(etas)
    }

    /// Method selection: a fixed id, or the override map (falling back to
    /// the built-in map) for auto.
    pub fn pick_method(&self, system: &SystemConfig) -> Result<MethodId> {
        match self.method {
            MethodChoice::Fixed(m) => Ok(m),
            MethodChoice::Auto => {
                if let Some(map) = &self.regime_map {
                    if let Some(m) = map.lookup(system.r, system.rho()) {
                        return Ok(m);
                    }
                }
                jsqps_core::best_method(system)
            }
        }
    }
}

pub fn resolve(args: &CommonArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Parameter(format!("cannot read config file {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => FileValues::default(),
    };

    let method = match args
        .method
        .clone()
        .or(file.method)
        .as_deref()
        .unwrap_or("auto")
    {
        "auto" => MethodChoice::Auto,
        other => MethodChoice::Fixed(other.parse()?),
    };
    let service = match args
        .service
        .clone()
        .or(file.service)
        .as_deref()
        .unwrap_or("exp")
    {
        "exp" => ServiceKind::Exp,
        "uniform" => ServiceKind::Uniform,
        "det" => ServiceKind::Det,
        other => {
            return Err(Error::Parameter(format!(
                "unknown service law {other:?}; expected exp, uniform, or det"
            )))
        }
    };
    let ps_variant = parse_ps_variant(
        args.ps_variant
            .clone()
            .or(file.ps_variant)
            .as_deref()
            .unwrap_or("standard"),
    )?;
    let scale = match args
        .scale
        .clone()
        .or(file.scale)
        .as_deref()
        .unwrap_or("desk")
    {
        "desk" => Scale::Desk,
        "full" => Scale::Full,
        other => {
            return Err(Error::Parameter(format!(
                "unknown scale {other:?}; expected desk or full"
            )))
        }
    };
    let regime_map = match args.regime_map.clone().or(file.regime_map) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::Parameter(format!("cannot read regime map {}: {e}", path.display()))
            })?;
            Some(RegimeMap::parse(&text)?)
        }
        None => None,
    };

    Ok(Resolved {
        r: args.r.or(file.r),
        lambda: args.lambda.or(file.lambda),
        mu: args.mu.or(file.mu),
        method,
        l1: args.l1.or(file.l1),
        l2: args.l2.or(file.l2),
        tmax: args.tmax.or(file.tmax).unwrap_or(TimeGrid::DEFAULT_T_MAX),
        dt: args.dt.or(file.dt).unwrap_or(TimeGrid::DEFAULT_DELTA),
        qmax: args.qmax.or(file.qmax),
        warmup: args.warmup.or(file.warmup),
        trials: args.trials.or(file.trials),
        seed: args.seed.or(file.seed),
        service,
        ps_variant,
        etas: if args.eta.is_empty() {
            file.eta
        } else {
            args.eta.clone()
        },
        urllc: args.urllc || file.urllc,
        out: args.out.clone().or(file.out),
        regime_map,
        scale,
        confirm_long_run: args.confirm_long_run || file.confirm_long_run,
    })
}

pub fn parse_ps_variant(text: &str) -> Result<PsVariant> {
    let v = if text == "standard" {
        PsVariant::Standard
    } else if let Some(k) = text.strip_prefix("limited:") {
        PsVariant::Limited(k.parse().map_err(|_| {
            Error::Parameter(format!("bad share count in ps-variant {text:?}"))
        })?)
    } else if let Some(k) = text.strip_prefix("capacitated:") {
        PsVariant::Capacitated(k.parse().map_err(|_| {
            Error::Parameter(format!("bad threshold in ps-variant {text:?}"))
        })?)
    } else {
        return Err(Error::Parameter(format!(
            "unknown ps-variant {text:?}; expected standard, limited:k, or capacitated:k"
        )));
    };
    v.validate()?;
    Ok(v)
}

pub fn ps_variant_name(v: PsVariant) -> String {
    match v {
        PsVariant::Standard => "standard".into(),
        PsVariant::Limited(k) => format!("limited:{k}"),
        PsVariant::Capacitated(k) => format!("capacitated:{k}"),
    }
}

/// Raw values recovered from a config file; same shape as the flags.
#[derive(Debug, Default)]
struct FileValues {
    r: Option<u32>,
    lambda: Option<f64>,
    mu: Option<f64>,
    method: Option<String>,
    l1: Option<usize>,
    l2: Option<usize>,
    tmax: Option<f64>,
    dt: Option<f64>,
    qmax: Option<f64>,
    warmup: Option<f64>,
    trials: Option<u32>,
    seed: Option<u64>,
    service: Option<String>,
    ps_variant: Option<String>,
    eta: Vec<f64>,
    urllc: bool,
    out: Option<PathBuf>,
    regime_map: Option<PathBuf>,
    scale: Option<String>,
    confirm_long_run: bool,
}

/// `key = value` per line, `#` comments, keys matching the flag names
/// without leading dashes. `eta` may repeat or hold a comma-separated list.
fn parse_config(text: &str) -> Result<FileValues> {
    fn num<T: std::str::FromStr>(ln: usize, key: &str, val: &str) -> Result<T> {
        val.parse().map_err(|_| {
            Error::Parameter(format!("config line {ln}: bad value {val:?} for {key}"))
        })
    }
    fn flag(ln: usize, key: &str, val: &str) -> Result<bool> {
        match val {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::Parameter(format!(
                "config line {ln}: bad boolean {val:?} for {key}"
            ))),
        }
    }

    let mut out = FileValues::default();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| {
            Error::Parameter(format!("config line {ln}: expected key = value, got {raw:?}"))
        })?;
        let (key, val) = (key.trim(), val.trim());
        match key {
            "R" => out.r = Some(num(ln, key, val)?),
            "lambda" => out.lambda = Some(num(ln, key, val)?),
            "mu" => out.mu = Some(num(ln, key, val)?),
            "method" => out.method = Some(val.to_string()),
            "L1" => out.l1 = Some(num(ln, key, val)?),
            "L2" => out.l2 = Some(num(ln, key, val)?),
            "tmax" => out.tmax = Some(num(ln, key, val)?),
            "dt" => out.dt = Some(num(ln, key, val)?),
            "qmax" => out.qmax = Some(num(ln, key, val)?),
            "warmup" => out.warmup = Some(num(ln, key, val)?),
            "trials" => out.trials = Some(num(ln, key, val)?),
            "seed" => out.seed = Some(num(ln, key, val)?),
            "service" => out.service = Some(val.to_string()),
            "ps-variant" => out.ps_variant = Some(val.to_string()),
            "eta" => {
                for part in val.split(',') {
                    out.eta.push(num(ln, key, part.trim())?);
                }
            }
            "urllc" => out.urllc = flag(ln, key, val)?,
            "out" => out.out = Some(PathBuf::from(val)),
            "regime-map" => out.regime_map = Some(PathBuf::from(val)),
            "scale" => out.scale = Some(val.to_string()),
            "confirm-long-run" => out.confirm_long_run = flag(ln, key, val)?,
            other => {
                return Err(Error::Parameter(format!(
                    "config line {ln}: unknown key {other:?}"
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let text = "\
# a comment
R = 3
lambda = 1.5   # trailing comment
mu = 1
eta = 0.9, 0.99
eta = 0.999
urllc = true
ps-variant = limited:2
";
        let v = parse_config(text).unwrap();
        assert_eq!(v.r, Some(3));
        assert_eq!(v.lambda, Some(1.5));
        assert_eq!(v.eta, vec![0.9, 0.99, 0.999]);
        assert!(v.urllc);
        assert_eq!(v.ps_variant.as_deref(), Some("limited:2"));
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("R = fast").is_err());
        assert!(parse_config("urllc = sometimes").is_err());
        assert!(parse_config("just a line").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("jsqps-spec-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("conf");
        std::fs::write(&path, "R = 2\nlambda = 1\nmu = 1\nseed = 5\n").unwrap();
        let args = CommonArgs {
            lambda: Some(1.6),
            config: Some(path),
            ..Default::default()
        };
        let resolved = resolve(&args).unwrap();
        assert_eq!(resolved.r, Some(2));
        assert_eq!(resolved.lambda, Some(1.6));
        assert_eq!(resolved.seed_or_default(), 5);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn ps_variant_parsing() {
        assert_eq!(parse_ps_variant("standard").unwrap(), PsVariant::Standard);
        assert_eq!(
            parse_ps_variant("limited:3").unwrap(),
            PsVariant::Limited(3)
        );
        assert_eq!(
            parse_ps_variant("capacitated:2").unwrap(),
            PsVariant::Capacitated(2)
        );
        assert!(parse_ps_variant("limited:0").is_err());
        assert!(parse_ps_variant("fair").is_err());
    }
}
