//! fermikit: canonical free-fermion statistics as reproducible tables.
//!
//! Every run echoes its fully resolved configuration (defaults included)
//! into the output header, numbers carry 17 significant digits, and fixed
//! seeds give byte-identical files. Exit codes: 0 success, 2 usage error,
//! 3 numerical non-convergence (diagnostics on stderr).

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use fermikit::acceptance;
use fermikit::contour::{choose_radius, Regime};
use fermikit::identities::{preset, verify_identity, KMode, ModelPreset};
use fermikit::multitime::{multitime_correlation, multitime_gap, TimeGrid};
use fermikit::oracle::{sample_eigenstate, sample_positions, RngStream};
use fermikit::statistics::{
    correlation, correlation_with_contour, gap_probability, limit_bulk_density, limit_corr_interp,
    limit_corr_sine, limit_crossover, limit_tracy_widom, rightmost_cdf, CorrelationRequest,
    RegionSet, RightmostPath,
};
use fermikit::{FermiError, ModelParams};

#[derive(Parser)]
#[command(name = "fermikit", version, about = "Finite-n free-fermion statistics and their limiting laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// output path (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// worker-pool cap (overrides FERMIKIT_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// particle count
    #[arg(long)]
    n: usize,
    /// Boltzmann parameter q in (0,1)
    #[arg(long)]
    q: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Gap probability P(all particles in A)
    Gap {
        #[command(flatten)]
        model: ModelArgs,
        /// region A as comma-separated intervals "a:b,c:d" (inf allowed)
        #[arg(long)]
        region: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// CDF of the rightmost particle over an s-grid
    Rightmost {
        #[command(flatten)]
        model: ModelArgs,
        /// grid "lo:hi:step"
        #[arg(long, value_name = "LO:HI:STEP")]
        s_grid: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// evaluation path (z-contour is limited to n <= 40)
        #[arg(long, value_enum, default_value_t = PathArg::Auto)]
        path: PathArg,
    },
    /// m-point correlation function at fixed points
    Corr {
        #[command(flatten)]
        model: ModelArgs,
        /// points "x1,x2,..."
        #[arg(long)]
        points: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// one-point density over an x-grid
    Density {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "LO:HI:STEP")]
        x_grid: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// multi-time correlation at points x_i, imaginary times tau_i
    MultitimeCorr {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        points: String,
        /// times as fractions of beta, "0.0,0.4"
        #[arg(long)]
        taus: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// multi-time gap probability, one region per time
    MultitimeGap {
        #[command(flatten)]
        model: ModelArgs,
        /// semicolon-separated regions, e.g. "-inf:0;-inf:1"
        #[arg(long)]
        regions: String,
        #[arg(long)]
        taus: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// limiting laws: tw | crossover | sine | interp | bulk-density
    Limit {
        #[command(subcommand)]
        law: LimitLaw,
    },
    /// rightmost-particle CDF at the scaled edge vs the limiting law
    EdgeScan {
        /// particle counts "25,50,100"
        #[arg(long)]
        n_list: String,
        /// fixed q (Tracy-Widom regime); exclusive with --crossover-c
        #[arg(long)]
        q: Option<f64>,
        /// crossover scaling q = e^{-c n^{-1/3}}
        #[arg(long)]
        crossover_c: Option<f64>,
        #[arg(long, value_name = "LO:HI:STEP", default_value = "-2:2:1")]
        t_grid: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// scaled bulk correlation vs the sine / interpolating limit
    BulkScan {
        #[arg(long)]
        n: usize,
        /// fixed q (sine regime); exclusive with --bulk-c
        #[arg(long)]
        q: Option<f64>,
        /// bulk scaling q = e^{-c/n}
        #[arg(long)]
        bulk_c: Option<f64>,
        /// bulk position x (edge at |x| = 1 for fixed q)
        #[arg(long)]
        x: f64,
        /// xi offsets "0,0.5,1"
        #[arg(long, default_value = "0,0.5")]
        xi: String,
        /// correlation order (1 or 2)
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// draw eigenstates (and positions for n <= 4) from the Boltzmann law
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// also draw particle positions (n <= 4)
        #[arg(long, default_value_t = false)]
        positions: bool,
    },
    /// verify the contour-operator determinant identities
    VerifyIdentities {
        /// model: whittaker | qtasep | qtazrp | asep
        #[arg(long)]
        model: String,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0.3)]
        z_re: f64,
        #[arg(long, default_value_t = 0.0)]
        z_im: f64,
        #[arg(long, default_value_t = 96)]
        order: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// model time parameter (qtasep/qtazrp)
        #[arg(long, default_value_t = 0.5)]
        t: f64,
    },
    /// run the acceptance suite and report pass/fail per criterion
    SelfTest {
        #[arg(long, default_value_t = 20240817)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum LimitLaw {
    /// Tracy-Widom GUE distribution F_GUE(t)
    Tw {
        #[arg(long, value_name = "LO:HI:STEP")]
        t_grid: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// KPZ crossover distribution F_crossover(t; c)
    Crossover {
        #[arg(long, value_name = "LO:HI:STEP")]
        t_grid: String,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
    },
    /// sine-process correlation det K_sin at given points
    Sine {
        #[arg(long)]
        points: String,
    },
    /// interpolating-process correlation at given points
    Interp {
        #[arg(long)]
        points: String,
        #[arg(long)]
        a: f64,
    },
    /// limiting bulk density at q = e^{-c/n}
    BulkDensity {
        #[arg(long, value_name = "LO:HI:STEP")]
        x_grid: String,
        #[arg(long)]
        c: f64,
    },
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum PathArg {
    Auto,
    ZContour,
    Theta,
}

/// One table cell.
enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => {
                if s.contains(',') || s.contains('"') || s.contains('\n') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::F(v) => serde_json::json!(format!("{v:.16e}")),
            Cell::I(v) => serde_json::json!(v),
            Cell::S(s) => serde_json::json!(s),
        }
    }
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

fn emit(cli_format: Format, out: &Option<std::path::PathBuf>, config: serde_json::Value, table: Table) -> std::io::Result<()> {
    let mut buf = String::new();
    match cli_format {
        Format::Csv => {
            buf.push_str(&format!("# fermikit run\n# config: {config}\n"));
            buf.push_str(&table.columns.join(","));
            buf.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|c| c.csv()).collect();
                buf.push_str(&cells.join(","));
                buf.push('\n');
            }
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (name, cell) in table.columns.iter().zip(row) {
                        obj.insert(name.to_string(), cell.json());
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            let doc = serde_json::json!({ "config": config, "rows": rows });
            buf = serde_json::to_string_pretty(&doc).expect("json");
            buf.push('\n');
        }
    }
    match out {
        Some(path) => std::fs::write(path, buf),
        None => std::io::stdout().write_all(buf.as_bytes()),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{spec}' must be LO:HI:STEP"));
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("bad grid start: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("bad grid end: {e}"))?;
    let step: f64 = parts[2].parse().map_err(|e| format!("bad grid step: {e}"))?;
    if !(step > 0.0) || hi < lo {
        return Err(format!("grid '{spec}' must have positive step and hi >= lo"));
    }
    let count = ((hi - lo) / step + 1.5).floor() as usize;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn parse_list(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad number '{s}': {e}")))
        .collect()
}

fn parse_endpoint(s: &str) -> Result<f64, String> {
    match s.trim() {
        "-inf" | "-INF" => Ok(f64::NEG_INFINITY),
        "inf" | "INF" | "+inf" => Ok(f64::INFINITY),
        other => other.parse().map_err(|e| format!("bad endpoint '{other}': {e}")),
    }
}

fn parse_region(spec: &str) -> Result<RegionSet, String> {
    let mut intervals = Vec::new();
    for part in spec.split(',') {
        let ends: Vec<&str> = part.split(':').collect();
        if ends.len() != 2 {
            return Err(format!("interval '{part}' must be a:b"));
        }
        intervals.push((parse_endpoint(ends[0])?, parse_endpoint(ends[1])?));
    }
    RegionSet::new(intervals).map_err(|e| e.to_string())
}

enum RunError {
    Usage(String),
    Numerical(String),
}

impl From<FermiError> for RunError {
    fn from(e: FermiError) -> Self {
        match e {
            FermiError::Domain(_) | FermiError::Dimension(_) | FermiError::PathValidity(_) => {
                RunError::Usage(e.to_string())
            }
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<String> for RunError {
    fn from(s: String) -> Self {
        RunError::Usage(s)
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let threads = cli
        .threads
        .or_else(|| std::env::var("FERMIKIT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| RunError::Usage(format!("thread pool: {e}")))?;
    }
    let io_err = |e: std::io::Error| RunError::Numerical(format!("io: {e}"));
    match &cli.command {
        Command::Gap { model, region, tol } => {
            let params = ModelParams::new(model.n, model.q)?;
            let a = parse_region(region)?;
            let r = gap_probability(&a, params, *tol)?;
            let config = serde_json::json!({
                "command": "gap", "n": model.n, "q": model.q, "region": region,
                "tol": tol, "contour": "edge", "format": "csv-or-json",
            });
            let table = Table {
                columns: vec!["raw", "clamped", "im_residual", "err_est"],
                rows: vec![vec![Cell::F(r.raw), Cell::F(r.clamped), Cell::F(r.im_residual), Cell::F(r.err_est)]],
            };
            emit(cli.format, &cli.out, config, table).map_err(io_err)
        }
        Command::Rightmost { model, s_grid, tol, path } => {
            let params = ModelParams::new(model.n, model.q)?;
            let chosen = match path {
                PathArg::Auto => {
                    if model.n <= 40 {
                        RightmostPath::ZContour
                    } else {
                        RightmostPath::Theta
                    }
                }
                PathArg::ZContour => RightmostPath::ZContour,
                PathArg::Theta => RightmostPath::Theta,
            };
            let mut rows = Vec::new();
            for s in parse_grid(s_grid)? {
                let r = rightmost_cdf(s, params, *tol, chosen)?;
                rows.push(vec![Cell::F(s), Cell::F(r.raw), Cell::F(r.im_residual)]);
            }
            let config = serde_json::json!({
                "command": "rightmost", "n": model.n, "q": model.q, "s_grid": s_grid,
                "tol": tol, "path": match chosen { RightmostPath::ZContour => "z_contour", RightmostPath::Theta => "theta" },
            });
            emit(cli.format, &cli.out, config, Table { columns: vec!["s", "cdf", "im_residual"], rows })
                .map_err(io_err)
        }
        Command::Corr { model, points, tol } => {
            let params = ModelParams::new(model.n, model.q)?;
            let pts = parse_list(points)?;
            let req = CorrelationRequest { points: pts.clone(), params, tolerance: *tol };
            let v = correlation(&req)?;
            let config = serde_json::json!({
                "command": "corr", "n": model.n, "q": model.q, "points": points, "tol": tol,
                "contour": "edge",
            });
            let mut row = Vec::new();
            row.push(Cell::S(points.clone()));
            row.push(Cell::F(v));
            emit(cli.format, &cli.out, config, Table { columns: vec!["points", "value"], rows: vec![row] })
                .map_err(io_err)
        }
        Command::Density { model, x_grid, tol } => {
            let params = ModelParams::new(model.n, model.q)?;
            let mut rows = Vec::new();
            for x in parse_grid(x_grid)? {
                let v = fermikit::statistics::density(x, params, *tol)?;
                rows.push(vec![Cell::F(x), Cell::F(v)]);
            }
            let config = serde_json::json!({
                "command": "density", "n": model.n, "q": model.q, "x_grid": x_grid, "tol": tol,
            });
            emit(cli.format, &cli.out, config, Table { columns: vec!["x", "density"], rows }).map_err(io_err)
        }
        Command::MultitimeCorr { model, points, taus, tol } => {
            let params = ModelParams::new(model.n, model.q)?;
            let pts = parse_list(points)?;
            let fracs = parse_list(taus)?;
            let beta = params.beta();
            let tg = TimeGrid::new(fracs.iter().map(|f| f * beta).collect(), params)?;
            let v = multitime_correlation(&pts, &tg, params, *tol)?;
            let config = serde_json::json!({
                "command": "multitime-corr", "n": model.n, "q": model.q,
                "points": points, "tau_fractions_of_beta": taus, "beta": format!("{beta:.16e}"), "tol": tol,
            });
            let row = vec![Cell::S(points.clone()), Cell::S(taus.clone()), Cell::F(v)];
            emit(cli.format, &cli.out, config, Table { columns: vec!["points", "taus", "value"], rows: vec![row] })
                .map_err(io_err)
        }
        Command::MultitimeGap { model, regions, taus, tol } => {
            let params = ModelParams::new(model.n, model.q)?;
            let regs: Vec<RegionSet> = regions
                .split(';')
                .map(parse_region)
                .collect::<Result<Vec<_>, String>>()?;
            let fracs = parse_list(taus)?;
            let beta = params.beta();
            let tg = TimeGrid::new(fracs.iter().map(|f| f * beta).collect(), params)?;
            let r = multitime_gap(&regs, &tg, params, *tol)?;
            let config = serde_json::json!({
                "command": "multitime-gap", "n": model.n, "q": model.q,
                "regions": regions, "tau_fractions_of_beta": taus, "beta": format!("{beta:.16e}"), "tol": tol,
            });
            let table = Table {
                columns: vec!["raw", "clamped", "im_residual", "err_est"],
                rows: vec![vec![Cell::F(r.raw), Cell::F(r.clamped), Cell::F(r.im_residual), Cell::F(r.err_est)]],
            };
            emit(cli.format, &cli.out, config, table).map_err(io_err)
        }
        Command::Limit { law } => run_limit(&cli, law),
        Command::EdgeScan { n_list, q, crossover_c, t_grid, tol } => {
            let ns: Vec<usize> = n_list
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad n '{s}': {e}")))
                .collect::<Result<Vec<_>, String>>()?;
            let ts = parse_grid(t_grid)?;
            let regime = match (q, crossover_c) {
                (Some(q), None) => ("fixed_q", *q, 0.0),
                (None, Some(c)) => ("crossover", 0.0, *c),
                _ => return Err(RunError::Usage("edge-scan needs exactly one of --q / --crossover-c".into())),
            };
            let mut rows = Vec::new();
            for &n in &ns {
                let nf = n as f64;
                let qn = if regime.0 == "fixed_q" { regime.1 } else { (-regime.2 * nf.powf(-1.0 / 3.0)).exp() };
                let params = ModelParams::new(n, qn)?;
                for &t in &ts {
                    let s = 2.0 * nf.sqrt() + t * nf.powf(-1.0 / 6.0);
                    let v = rightmost_cdf(s, params, *tol, RightmostPath::Theta)?.raw;
                    let lim = if regime.0 == "fixed_q" {
                        limit_tracy_widom(t, *tol)?
                    } else {
                        limit_crossover(t, regime.2, *tol)?
                    };
                    rows.push(vec![
                        Cell::I(n as i64),
                        Cell::F(t),
                        Cell::F(s),
                        Cell::F(v),
                        Cell::F(lim),
                        Cell::F((v - lim).abs()),
                    ]);
                }
            }
            let config = serde_json::json!({
                "command": "edge-scan", "n_list": n_list, "regime": regime.0,
                "q": q, "crossover_c": crossover_c, "t_grid": t_grid, "tol": tol, "path": "theta",
            });
            emit(
                cli.format,
                &cli.out,
                config,
                Table { columns: vec!["n", "t", "s", "cdf", "limit", "abs_err"], rows },
            )
            .map_err(io_err)
        }
        Command::BulkScan { n, q, bulk_c, x, xi, m, tol } => {
            if *m > 2 || *m == 0 {
                return Err(RunError::Usage("bulk-scan supports m = 1 or 2".into()));
            }
            let xis = parse_list(xi)?;
            let nf = *n as f64;
            let (regime, qn, c) = match (q, bulk_c) {
                (Some(q), None) => ("fixed_q", *q, 0.0),
                (None, Some(c)) => ("bulk", (-c / nf).exp(), *c),
                _ => return Err(RunError::Usage("bulk-scan needs exactly one of --q / --bulk-c".into())),
            };
            let params = ModelParams::new(*n, qn)?;
            let unit = if regime == "fixed_q" {
                std::f64::consts::PI / ((1.0 - x * x).sqrt() * nf.sqrt())
            } else {
                std::f64::consts::PI / (nf / c).sqrt()
            };
            let mut rows = Vec::new();
            for &xiv in &xis {
                let (pts, limit_pts) = if *m == 1 {
                    (vec![2.0 * x * nf.sqrt() + xiv * unit], vec![xiv])
                } else {
                    (
                        vec![2.0 * x * nf.sqrt(), 2.0 * x * nf.sqrt() + xiv * unit],
                        vec![0.0, xiv],
                    )
                };
                let req = CorrelationRequest { points: pts, params, tolerance: *tol };
                let scaled = if regime == "fixed_q" {
                    unit.powi(*m as i32) * correlation(&req)?
                } else {
                    let spec = choose_radius(params, Regime::Bulk(c));
                    unit.powi(*m as i32) * correlation_with_contour(&req, &spec)?
                };
                let lim = if regime == "fixed_q" {
                    limit_corr_sine(&limit_pts)
                } else {
                    let a = (c * x * x).exp() / (c.exp() - 1.0);
                    limit_corr_interp(&limit_pts, a)?
                };
                rows.push(vec![
                    Cell::F(xiv),
                    Cell::F(scaled),
                    Cell::F(lim),
                    Cell::F((scaled - lim).abs()),
                ]);
            }
            let config = serde_json::json!({
                "command": "bulk-scan", "n": n, "regime": regime, "q": qn, "bulk_c": bulk_c,
                "x": x, "xi": xi, "m": m, "tol": tol,
            });
            emit(
                cli.format,
                &cli.out,
                config,
                Table { columns: vec!["xi", "scaled_corr", "limit", "abs_err"], rows },
            )
            .map_err(io_err)
        }
        Command::Sample { model, draws, seed, positions } => {
            let params = ModelParams::new(model.n, model.q)?;
            if *positions && model.n > 4 {
                return Err(RunError::Usage("--positions requires n <= 4".into()));
            }
            let mut rng = RngStream::new(*seed);
            let mut rows = Vec::new();
            for d in 0..*draws {
                let state = sample_eigenstate(params, &mut rng);
                let ks = state.ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
                let mut row = vec![Cell::I(d as i64), Cell::S(ks)];
                if *positions {
                    let xs = sample_positions(&state, &mut rng)?;
                    row.push(Cell::S(xs.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")));
                }
                rows.push(row);
            }
            let columns = if *positions { vec!["draw", "ks", "xs"] } else { vec!["draw", "ks"] };
            let config = serde_json::json!({
                "command": "sample", "n": model.n, "q": model.q, "draws": draws,
                "seed": seed, "positions": positions, "rng": "chacha8",
            });
            emit(cli.format, &cli.out, config, Table { columns, rows }).map_err(io_err)
        }
        Command::VerifyIdentities { model, q, z_re, z_im, order, tol, t } => {
            let cfg = match model.as_str() {
                "whittaker" => preset(ModelPreset::Whittaker {
                    a: vec![1.0, 1.05],
                    alpha: vec![0.2],
                    beta: vec![0.15],
                    gamma: 0.3,
                    q: *q,
                })?,
                "qtasep" => preset(ModelPreset::QTasep { a: vec![1.0, 0.95], t: *t, q: *q })?,
                "qtazrp" => preset(ModelPreset::QTazrp { b: vec![1.0, 1.0], t: *t, q: *q })?,
                "asep" => preset(ModelPreset::Asep { rho: 0.5, x: 0, t: 0.0, tau: *q })?,
                other => return Err(RunError::Usage(format!("unknown model '{other}'"))),
            };
            let z = Complex64::new(*z_re, *z_im);
            let r = verify_identity(&cfg, z, *order, KMode::Series)?;
            let config = serde_json::json!({
                "command": "verify-identities", "model": model, "q": q,
                "z": [z_re, z_im], "order": order, "tol": tol, "mode": "series", "t": t,
            });
            let table = Table {
                columns: vec!["model", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap"],
                rows: vec![vec![
                    Cell::S(model.clone()),
                    Cell::F(r.lhs.re),
                    Cell::F(r.lhs.im),
                    Cell::F(r.rhs.re),
                    Cell::F(r.rhs.im),
                    Cell::F(r.gap),
                ]],
            };
            emit(cli.format, &cli.out, config, table).map_err(io_err)?;
            if r.gap < *tol {
                Ok(())
            } else {
                Err(RunError::Numerical(format!("identity gap {} above tolerance {tol}", r.gap)))
            }
        }
        Command::SelfTest { seed } => {
            let reports = acceptance::run_all(*seed);
            let config = serde_json::json!({ "command": "self-test", "seed": seed });
            let rows: Vec<Vec<Cell>> = reports
                .iter()
                .map(|r| {
                    vec![
                        Cell::I(r.id as i64),
                        Cell::S(r.name.to_string()),
                        Cell::S(if r.pass { "PASS" } else { "FAIL" }.to_string()),
                        Cell::S(r.details.clone()),
                    ]
                })
                .collect();
            emit(
                cli.format,
                &cli.out,
                config,
                Table { columns: vec!["criterion", "name", "status", "details"], rows },
            )
            .map_err(io_err)?;
            if reports.iter().all(|r| r.pass) {
                Ok(())
            } else {
                let failing: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.line()).collect();
                Err(RunError::Numerical(format!("failing criteria:\n{}", failing.join("\n"))))
            }
        }
    }
}

fn run_limit(cli: &Cli, law: &LimitLaw) -> Result<(), RunError> {
    let io_err = |e: std::io::Error| RunError::Numerical(format!("io: {e}"));
    match law {
        LimitLaw::Tw { t_grid, tol } => {
            let mut rows = Vec::new();
            for t in parse_grid(t_grid)? {
                rows.push(vec![Cell::F(t), Cell::F(limit_tracy_widom(t, *tol)?)]);
            }
            let config = serde_json::json!({ "command": "limit tw", "t_grid": t_grid, "tol": tol });
            emit(cli.format, &cli.out, config, Table { columns: vec!["t", "F"], rows }).map_err(io_err)
        }
        LimitLaw::Crossover { t_grid, c, tol } => {
            let mut rows = Vec::new();
            for t in parse_grid(t_grid)? {
                rows.push(vec![Cell::F(t), Cell::F(*c), Cell::F(limit_crossover(t, *c, *tol)?)]);
            }
            let config = serde_json::json!({ "command": "limit crossover", "t_grid": t_grid, "c": c, "tol": tol });
            emit(cli.format, &cli.out, config, Table { columns: vec!["t", "c", "F"], rows }).map_err(io_err)
        }
        LimitLaw::Sine { points } => {
            let pts = parse_list(points)?;
            let v = limit_corr_sine(&pts);
            let config = serde_json::json!({ "command": "limit sine", "points": points });
            let row = vec![Cell::S(points.clone()), Cell::F(v)];
            emit(cli.format, &cli.out, config, Table { columns: vec!["points", "value"], rows: vec![row] })
                .map_err(io_err)
        }
        LimitLaw::Interp { points, a } => {
            let pts = parse_list(points)?;
            let v = limit_corr_interp(&pts, *a)?;
            let config = serde_json::json!({ "command": "limit interp", "points": points, "a": a });
            let row = vec![Cell::S(points.clone()), Cell::F(*a), Cell::F(v)];
            emit(cli.format, &cli.out, config, Table { columns: vec!["points", "a", "value"], rows: vec![row] })
                .map_err(io_err)
        }
        LimitLaw::BulkDensity { x_grid, c } => {
            let mut rows = Vec::new();
            for x in parse_grid(x_grid)? {
                rows.push(vec![Cell::F(x), Cell::F(*c), Cell::F(limit_bulk_density(x, *c)?)]);
            }
            let config = serde_json::json!({ "command": "limit bulk-density", "x_grid": x_grid, "c": c });
            emit(cli.format, &cli.out, config, Table { columns: vec!["x", "c", "value"], rows }).map_err(io_err)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}
