//! Command implementations. Every command writes CSV (or regime-map rows)
//! prefixed with a `#` comment line recording the resolved spec, so outputs
//! are self-describing and byte-identical across runs with the same spec.

use crate::spec::{
    ps_variant_name, resolve, Command, MethodChoice, Resolved, Scale, URLLC_ETAS,
};
use jsqps_core::markov::McSolution;
use jsqps_core::metrics::TIE_EPS;
use jsqps_core::{
    compare, compute_method, percentile, regime_scan, Error, Hyperparameters, MethodId, Result,
    ScanBudget, SimulationConfig, SojournCdf, SystemConfig,
};
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;

const DESK_Q_MAX: f64 = 40_000.0;
const FULL_Q_MAX: f64 = 160_000.0;
const DESK_R_SET: [u32; 5] = [1, 3, 5, 7, 10];

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Cdf(args) => cmd_cdf(&resolve(&args)?),
        Command::Percentile(args) => cmd_percentile(&resolve(&args)?),
        Command::Simulate(args) => cmd_simulate(&resolve(&args)?),
        Command::Compare(args) => cmd_compare(&resolve(&args)?),
        Command::RegimeScan(args) => cmd_regime_scan(&resolve(&args)?),
        Command::Reproduce(args) => cmd_reproduce(&args.target, &resolve(&args.common)?),
    }
}

/// Buffered sink: the --out file, or stdout.
fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| {
                Error::Parameter(format!("cannot create {}: {e}", path.display()))
            })?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::BufWriter::new(std::io::stdout()))),
    }
}

fn wr(e: std::io::Error) -> Error {
    Error::Parameter(format!("cannot write output: {e}"))
}

/// Decimal places that render grid times exactly (2 for the default 0.01).
fn decimals_for(dt: f64) -> usize {
    for n in 0..=12usize {
        let scaled = dt * 10f64.powi(n as i32);
        if (scaled - scaled.round()).abs() < 1e-9 * scaled.max(1.0) {
            return n;
        }
    }
    12
}

fn header_line(command: &str, fields: &[(&str, String)]) -> String {
    let mut s = format!("# command={command}");
    for (k, v) in fields {
        s.push(' ');
        s.push_str(k);
        s.push('=');
        s.push_str(v);
    }
    s
}

fn system_fields(sys: &SystemConfig) -> Vec<(&'static str, String)> {
    vec![
        ("R", sys.r.to_string()),
        ("lambda", sys.lambda.to_string()),
        ("mu", sys.mu.to_string()),
        ("rho", sys.rho().to_string()),
    ]
}

fn grid_fields(spec: &Resolved) -> Vec<(&'static str, String)> {
    vec![
        ("tmax", spec.tmax.to_string()),
        ("dt", spec.dt.to_string()),
    ]
}

fn hyper_fields(h: &Hyperparameters) -> Vec<(&'static str, String)> {
    vec![("L1", h.l1.to_string()), ("L2", h.l2.to_string())]
}

fn sim_fields(spec: &Resolved, qmax: f64) -> Vec<(&'static str, String)> {
    vec![
        ("service", spec.service.name().to_string()),
        ("ps-variant", ps_variant_name(spec.ps_variant)),
        ("qmax", qmax.to_string()),
        ("warmup", spec.warmup_or_default().to_string()),
        ("trials", spec.trials_or_default().to_string()),
        ("seed", spec.seed_or_default().to_string()),
    ]
}

fn etas_field(etas: &[f64]) -> (&'static str, String) {
    let list: Vec<String> = etas.iter().map(|e| e.to_string()).collect();
    ("etas", list.join(","))
}

fn sim_config(spec: &Resolved, system: SystemConfig, qmax: f64) -> SimulationConfig {
    SimulationConfig::new(system, spec.service.distribution(system.mu))
        .with_ps_variant(spec.ps_variant)
        .with_horizon(qmax, spec.warmup_or_default())
        .with_trials(spec.trials_or_default())
        .with_seed(spec.seed_or_default())
}

/// Percentile with saturation mapped onto the last grid point, as the
/// reproduction datasets report saturated tails at the horizon.
fn percentile_or_horizon(cdf: &SojournCdf, eta: f64) -> Result<f64> {
    match percentile(cdf, eta) {
        Ok(t) => Ok(t),
        Err(Error::Saturated { .. }) => Ok(cdf.grid().point(cdf.grid().len() - 1)),
        Err(e) => Err(e),
    }
}

fn cmd_cdf(spec: &Resolved) -> Result<()> {
    let system = spec.system()?;
    let hyper = spec.hyper_for(system.r)?;
    let grid = spec.grid()?;
    let method = spec.pick_method(&system)?;
    let cdf = compute_method(method, &system, &hyper, &grid)?;

    let mut fields = system_fields(&system);
    fields.push(("method", method.to_string()));
    fields.extend(hyper_fields(&hyper));
    fields.extend(grid_fields(spec));
    let prec = decimals_for(spec.dt);

    let mut w = sink(&spec.out)?;
    writeln!(w, "{}", header_line("cdf", &fields)).map_err(wr)?;
    writeln!(w, "t,cdf,method").map_err(wr)?;
    for (i, v) in cdf.values().iter().enumerate() {
        writeln!(w, "{:.prec$},{},{}", grid.point(i), v, method).map_err(wr)?;
    }
    w.flush().map_err(wr)
}

fn cmd_percentile(spec: &Resolved) -> Result<()> {
    let system = spec.system()?;
    let hyper = spec.hyper_for(system.r)?;
    let grid = spec.grid()?;
    let method = spec.pick_method(&system)?;
    let etas = spec.etas(true)?;
    let cdf = compute_method(method, &system, &hyper, &grid)?;

    let mut rows = Vec::with_capacity(etas.len());
    for &eta in &etas {
        rows.push((eta, percentile(&cdf, eta)?));
    }

    let mut fields = system_fields(&system);
    fields.push(("method", method.to_string()));
    fields.extend(hyper_fields(&hyper));
    fields.extend(grid_fields(spec));
    fields.push(etas_field(&etas));
    let prec = decimals_for(spec.dt);

    let mut w = sink(&spec.out)?;
    writeln!(w, "{}", header_line("percentile", &fields)).map_err(wr)?;
    writeln!(w, "eta,t_eta").map_err(wr)?;
    for (eta, t) in rows {
        writeln!(w, "{eta},{t:.prec$}").map_err(wr)?;
    }
    w.flush().map_err(wr)
}

fn cmd_simulate(spec: &Resolved) -> Result<()> {
    let system = spec.system()?;
    let grid = spec.grid()?;
    let qmax = spec.qmax_or(SimulationConfig::DEFAULT_Q_MAX);
    let cfg = sim_config(spec, system, qmax);
    let trials = jsqps_core::run_simulation(&cfg)?;
    let cdf = jsqps_core::aggregate_trials(&trials, &grid)?;

    let mut fields = system_fields(&system);
    fields.extend(sim_fields(spec, qmax));
    fields.extend(grid_fields(spec));
    let prec = decimals_for(spec.dt);

    let mut w = sink(&spec.out)?;
    writeln!(w, "{}", header_line("simulate", &fields)).map_err(wr)?;
    writeln!(w, "t,cdf,method").map_err(wr)?;
    for (i, v) in cdf.values().iter().enumerate() {
        writeln!(w, "{:.prec$},{},{}", grid.point(i), v, cdf.source()).map_err(wr)?;
    }
    w.flush().map_err(wr)?;

    // Raw per-trial sojourn samples land next to the aggregate so the
    // empirical CDF can be rebuilt or re-binned offline.
    if let Some(out) = &spec.out {
        for (k, samples) in trials.iter().enumerate() {
            let path = PathBuf::from(format!("{}.trial{k}.samples", out.display()));
            let f = std::fs::File::create(&path).map_err(|e| {
                Error::Parameter(format!("cannot create {}: {e}", path.display()))
            })?;
            let mut dump = std::io::BufWriter::new(f);
            for s in samples {
                writeln!(dump, "{s:.11e}").map_err(wr)?;
            }
            dump.flush().map_err(wr)?;
        }
    }
    Ok(())
}

fn cmd_compare(spec: &Resolved) -> Result<()> {
    let system = spec.system()?;
    let hyper = spec.hyper_for(system.r)?;
    let grid = spec.grid()?;
    let method = spec.pick_method(&system)?;
    let etas = spec.etas(false)?;
    let qmax = spec.qmax_or(SimulationConfig::DEFAULT_Q_MAX);

    let approx = compute_method(method, &system, &hyper, &grid)?;
    let baseline = jsqps_core::simulate_cdf(&sim_config(spec, system, qmax), &grid)?;
    let report = compare(&approx, &baseline, &system, &etas)?;

    let mut fields = system_fields(&system);
    fields.push(("method", method.to_string()));
    fields.extend(hyper_fields(&hyper));
    fields.extend(sim_fields(spec, qmax));
    fields.extend(grid_fields(spec));
    fields.push(etas_field(&etas));

    let mut w = sink(&spec.out)?;
    writeln!(w, "{}", header_line("compare", &fields)).map_err(wr)?;
    writeln!(w, "{}", jsqps_core::ComparisonReport::CSV_HEADER).map_err(wr)?;
    for row in report.csv_rows() {
        writeln!(w, "{row}").map_err(wr)?;
    }
    w.flush().map_err(wr)
}

fn cmd_regime_scan(spec: &Resolved) -> Result<()> {
    let system = spec.system()?;
    let grid = spec.grid()?;
    let methods: Vec<MethodId> = match spec.method {
        MethodChoice::Auto => MethodId::ALL.to_vec(),
        MethodChoice::Fixed(m) => vec![m],
    };
    let budget = ScanBudget {
        mu: system.mu,
        q_max: spec.qmax_or(SimulationConfig::DEFAULT_Q_MAX),
        q_warmup: spec.warmup_or_default(),
        trials: spec.trials_or_default(),
        seed: spec.seed_or_default(),
    };
    let cells = [(system.r, system.rho())];
    let scan = regime_scan(&cells, &methods, &budget, &grid)?;
    let cell = &scan[0];

    let mut fields = system_fields(&system);
    fields.push((
        "methods",
        methods
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    ));
    fields.push(("qmax", budget.q_max.to_string()));
    fields.push(("warmup", budget.q_warmup.to_string()));
    fields.push(("trials", budget.trials.to_string()));
    fields.push(("seed", budget.seed.to_string()));
    fields.extend(grid_fields(spec));

    let mut w = sink(&spec.out)?;
    writeln!(w, "{}", header_line("regime-scan", &fields)).map_err(wr)?;
    let dists: Vec<String> = cell
        .distances
        .iter()
        .map(|(m, d)| format!("{m}={d}"))
        .collect();
    writeln!(
        w,
        "# distances R={} rho={}: {} (ties within {TIE_EPS} resolve toward the default map)",
        cell.r,
        cell.rho,
        dists.join(" ")
    )
    .map_err(wr)?;
    // One override-format row centered on the scanned cell; combine rows
    // from several scans to build a total map for --regime-map.
    let lo = (cell.rho - 0.025).max(0.0);
    let hi = (cell.rho + 0.025).min(1.0);
    writeln!(w, "{} {lo} {hi} {}", cell.r, cell.winner).map_err(wr)?;
    w.flush().map_err(wr)
}

/// Which published dataset to regenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Table5,
    Table6,
    Fig4,
    Fig8,
    Fig9,
}

fn cmd_reproduce(target: &str, spec: &Resolved) -> Result<()> {
    let target = match target {
        "table5" => Target::Table5,
        "table6" => Target::Table6,
        "fig4" => Target::Fig4,
        "fig8" => Target::Fig8,
        "fig9" => Target::Fig9,
        other => {
            return Err(Error::Parameter(format!(
                "unknown reproduction target {other:?}; expected table5, table6, fig4, fig8, or fig9"
            )))
        }
    };
    if spec.scale == Scale::Full && !spec.confirm_long_run {
        return Err(Error::Parameter(
            "full-scale reproduction runs for hours; pass --confirm-long-run to proceed"
                .into(),
        ));
    }
    match target {
        Target::Table5 => reproduce_table5(spec),
        Target::Table6 => reproduce_table6(spec),
        Target::Fig4 => reproduce_fig4(spec),
        Target::Fig8 => reproduce_fig8(spec),
        Target::Fig9 => reproduce_fig9(spec),
    }
}

fn reproduce_fields(spec: &Resolved, target: &str, qmax: Option<f64>) -> Vec<(&'static str, String)> {
    let mut fields = vec![
        ("target", target.to_string()),
        ("scale", spec.scale.name().to_string()),
        ("mu", spec.mu_or_one().to_string()),
    ];
    if let Some(q) = qmax {
        fields.push(("qmax", q.to_string()));
        fields.push(("warmup", spec.warmup_or_default().to_string()));
        fields.push(("trials", spec.trials_or_default().to_string()));
        fields.push(("seed", spec.seed_or_default().to_string()));
    }
    fields.extend(grid_fields(spec));
    fields
}

fn reproduce_qmax(spec: &Resolved) -> f64 {
    spec.qmax_or(match spec.scale {
        Scale::Desk => DESK_Q_MAX,
        Scale::Full => FULL_Q_MAX,
    })
}

fn reproduce_table5(spec: &Resolved) -> Result<()> {
    let mut w = sink(&spec.out)?;
    let fields = vec![
        ("target", "table5".to_string()),
        ("scale", spec.scale.name().to_string()),
    ];
    writeln!(w, "{}", header_line("reproduce", &fields)).map_err(wr)?;
    writeln!(w, "R,L1").map_err(wr)?;
    for r in 1..=10u32 {
        writeln!(w, "{r},{}", Hyperparameters::defaults_for(r).l1).map_err(wr)?;
    }
    w.flush().map_err(wr)
}

fn reproduce_table6(spec: &Resolved) -> Result<()> {
    const RHO_HUNDREDTHS: [u32; 8] = [10, 25, 50, 75, 85, 90, 95, 99];
    const ETA: f64 = 0.9999;
    let mu = spec.mu_or_one();
    let qmax = reproduce_qmax(spec);
    let grid = spec.grid()?;
    let prec = decimals_for(spec.dt);

    let cells: Vec<(u32, f64)> = RHO_HUNDREDTHS
        .iter()
        .flat_map(|&h| DESK_R_SET.iter().map(move |&r| (r, h as f64 / 100.0)))
        .collect();
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(r, rho)| {
            let system = SystemConfig::from_rho(r, rho, mu)?;
            let method = spec.pick_method(&system)?;
            let hyper = spec.hyper_for(r)?;
            let approx = compute_method(method, &system, &hyper, &grid)?;
            let baseline = jsqps_core::simulate_cdf(&sim_config(spec, system, qmax), &grid)?;
            let a = percentile_or_horizon(&approx, ETA)?;
            let s = percentile_or_horizon(&baseline, ETA)?;
            Ok(format!(
                "{r},{rho},{ETA},{method},{a:.prec$},{s:.prec$},{:.prec$}",
                a - s
            ))
        })
        .collect::<Result<_>>()?;

    let mut w = sink(&spec.out)?;
    writeln!(
        w,
        "{}",
        header_line("reproduce", &reproduce_fields(spec, "table6", Some(qmax)))
    )
    .map_err(wr)?;
    writeln!(w, "# saturated percentiles are reported at the grid horizon").map_err(wr)?;
    writeln!(w, "R,rho,eta,method,approx_pct,sim_pct,error").map_err(wr)?;
    for row in rows {
        writeln!(w, "{row}").map_err(wr)?;
    }
    w.flush().map_err(wr)
}

fn reproduce_fig4(spec: &Resolved) -> Result<()> {
    const RHO_HUNDREDTHS: [u32; 3] = [85, 90, 95];
    let r_set: &[u32] = match spec.scale {
        Scale::Desk => &[1, 2, 3],
        // (L1+1)^(2R) stays under the truncation bound up to R = 4.
        Scale::Full => &[1, 2, 3, 4],
    };
    let mu = spec.mu_or_one();

    let cells: Vec<(u32, f64, usize)> = r_set
        .iter()
        .flat_map(|&r| {
            RHO_HUNDREDTHS.iter().flat_map(move |&h| {
                (2..=11usize).map(move |k| (r, h as f64 / 100.0, 2 * k))
            })
        })
        .collect();
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(r, rho, l1)| {
            let system = SystemConfig::from_rho(r, rho, mu)?;
            let hyper = Hyperparameters::defaults_for(r).with_l1(l1);
            hyper.validate(r)?;
            let sol = McSolution::compute(&system, &hyper)?;
            Ok(format!("{r},{rho},{l1},{}", sol.boundary_mass()))
        })
        .collect::<Result<_>>()?;

    let mut w = sink(&spec.out)?;
    writeln!(
        w,
        "{}",
        header_line("reproduce", &reproduce_fields(spec, "fig4", None))
    )
    .map_err(wr)?;
    writeln!(
        w,
        "# stationary chain mass on states where some server holds L1 - 1 customers"
    )
    .map_err(wr)?;
    writeln!(w, "R,rho,L1,boundary_mass").map_err(wr)?;
    for row in rows {
        writeln!(w, "{row}").map_err(wr)?;
    }
    w.flush().map_err(wr)
}

fn reproduce_fig8(spec: &Resolved) -> Result<()> {
    let (r_set, rho_hundredths): (Vec<u32>, Vec<u32>) = match spec.scale {
        Scale::Desk => (DESK_R_SET.to_vec(), (1..=19).map(|k| 5 * k).collect()),
        Scale::Full => ((1..=10).collect(), (1..=99).collect()),
    };
    let step_h = match spec.scale {
        Scale::Desk => 5,
        Scale::Full => 1,
    };
    let qmax = reproduce_qmax(spec);
    let grid = spec.grid()?;
    let budget = ScanBudget {
        mu: spec.mu_or_one(),
        q_max: qmax,
        q_warmup: spec.warmup_or_default(),
        trials: spec.trials_or_default(),
        seed: spec.seed_or_default(),
    };
    let cells: Vec<(u32, f64)> = r_set
        .iter()
        .flat_map(|&r| rho_hundredths.iter().map(move |&h| (r, h as f64 / 100.0)))
        .collect();
    let scan = regime_scan(&cells, &MethodId::ALL, &budget, &grid)?;

    let mut w = sink(&spec.out)?;
    writeln!(
        w,
        "{}",
        header_line("reproduce", &reproduce_fields(spec, "fig8", Some(qmax)))
    )
    .map_err(wr)?;
    writeln!(w, "R,rho,winner,w_A,w_B,w_C,w_D,w_E,w_F").map_err(wr)?;
    for cell in &scan {
        let dists: Vec<String> = cell.distances.iter().map(|(_, d)| d.to_string()).collect();
        writeln!(w, "{},{},{},{}", cell.r, cell.rho, cell.winner, dists.join(",")).map_err(wr)?;
    }

    // Override-format bands (comment lines): adjacent same-winner cells
    // merged per R. Rows cover only the scanned R values, so a total map
    // for --regime-map may need rows for the remaining cluster sizes.
    writeln!(w, "# override rows derived from this scan:").map_err(wr)?;
    for &r in &r_set {
        let winners: Vec<(u32, MethodId)> = scan
            .iter()
            .filter(|cell| cell.r == r)
            .zip(&rho_hundredths)
            .map(|(cell, &h)| (h, cell.winner))
            .collect();
        let mut start = 0usize;
        for i in 0..winners.len() {
            if i + 1 == winners.len() || winners[i + 1].1 != winners[i].1 {
                let lo = (2 * winners[start].0).saturating_sub(step_h) as f64 / 200.0;
                let hi = ((2 * winners[i].0 + step_h) as f64 / 200.0).min(1.0);
                writeln!(w, "# {r} {lo} {hi} {}", winners[i].1).map_err(wr)?;
                start = i + 1;
            }
        }
    }
    w.flush().map_err(wr)
}

fn reproduce_fig9(spec: &Resolved) -> Result<()> {
    let rho_hundredths: Vec<u32> = (1..=19).map(|k| 5 * k).collect();
    let mu = spec.mu_or_one();
    let qmax = reproduce_qmax(spec);
    let grid = spec.grid()?;
    let prec = decimals_for(spec.dt);
    let laws = [
        crate::spec::ServiceKind::Exp,
        crate::spec::ServiceKind::Uniform,
        crate::spec::ServiceKind::Det,
    ];

    let cells: Vec<(u32, f64)> = DESK_R_SET
        .iter()
        .flat_map(|&r| rho_hundredths.iter().map(move |&h| (r, h as f64 / 100.0)))
        .collect();
    let blocks: Vec<Vec<String>> = cells
        .par_iter()
        .map(|&(r, rho)| {
            let system = SystemConfig::from_rho(r, rho, mu)?;
            let method = spec.pick_method(&system)?;
            let hyper = spec.hyper_for(r)?;
            let approx = compute_method(method, &system, &hyper, &grid)?;
            let mut sims = Vec::with_capacity(laws.len());
            for law in laws {
                let cfg = SimulationConfig::new(system, law.distribution(mu))
                    .with_ps_variant(spec.ps_variant)
                    .with_horizon(qmax, spec.warmup_or_default())
                    .with_trials(spec.trials_or_default())
                    .with_seed(spec.seed_or_default());
                sims.push(jsqps_core::simulate_cdf(&cfg, &grid)?);
            }
            let mut rows = Vec::with_capacity(URLLC_ETAS.len());
            for &eta in &URLLC_ETAS {
                let a = percentile_or_horizon(&approx, eta)?;
                let mut row = format!("{r},{rho},{eta},{method},{a:.prec$}");
                for sim in &sims {
                    let s = percentile_or_horizon(sim, eta)?;
                    row.push_str(&format!(",{s:.prec$}"));
                }
                rows.push(row);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut w = sink(&spec.out)?;
    writeln!(
        w,
        "{}",
        header_line("reproduce", &reproduce_fields(spec, "fig9", Some(qmax)))
    )
    .map_err(wr)?;
    writeln!(w, "# saturated percentiles are reported at the grid horizon").map_err(wr)?;
    writeln!(w, "R,rho,eta,method,analytic,exp,uniform,det").map_err(wr)?;
    for block in blocks {
        for row in block {
            writeln!(w, "{row}").map_err(wr)?;
        }
    }
    w.flush().map_err(wr)
}
