use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use driftlap::field::{self, FieldSolver};
use driftlap::measure::{ball_volume, radius_of_volume};
use driftlap::radial::{self, Spectrum};
use driftlap::raster::{rasterize_annulus, rasterize_disks, rasterize_rectangle, RasterDomain};
use driftlap::reverse_holder::{self, ChitiData};
use driftlap::shapeopt::{self, BallFamilyConfig, ObjectiveSpec};
use driftlap::{hardy, verify, Dimension, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "driftlap", version, about = "Spectra of the drift Laplacian -Δ - x·∇ on planar and radial domains")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Omit the runtime field so repeated runs print identical bytes.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenvalues of a centered ball, merged over angular modes.
    BallSpectrum {
        #[arg(long)]
        dim: u32,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = radial::DEFAULT_TOL)]
        tol: f64,
    },
    /// λ₁ of centered balls over a radius range.
    Sweep {
        #[arg(long)]
        dim: u32,
        #[arg(long)]
        rmin: f64,
        #[arg(long)]
        rmax: f64,
        #[arg(long, default_value_t = 40)]
        steps: usize,
    },
    /// Radial Hardy weight: its minimum, optional point values and sharpness data.
    Hardy {
        #[arg(long)]
        dim: u32,
        /// Evaluate ρ at these radii.
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
        /// Number of random radial profiles for the ratio test.
        #[arg(long, default_value_t = 0)]
        profiles: usize,
        /// Steepness parameters for the sharpness sequence.
        #[arg(long, value_delimiter = ',', default_values_t = [10u32, 100, 1000])]
        sharpness: Vec<u32>,
    },
    /// Reverse Hölder constant of the ball with first eigenvalue λ.
    Chiti {
        #[arg(long)]
        dim: u32,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        r: f64,
        /// Upper exponent; `inf` for the sup norm.
        #[arg(long)]
        q: f64,
    },
    /// Lowest eigenvalues of a rasterized planar domain.
    DomainSpectrum {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = field::DEFAULT_TOL)]
        tol: f64,
    },
    /// Torsion function of a rasterized planar domain.
    Torsion {
        #[arg(long)]
        mask: PathBuf,
        /// Also check u_j ≤ λ_j‖u_j‖_∞ w for j up to this index.
        #[arg(long, default_value_t = 0)]
        domination: usize,
        /// Write `x,y,w` rows for every active cell.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize λ_k over disjoint unions of balls centered on the x-axis.
    ShapeSearch {
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Weighted volume budget; defaults to that of the unit ball.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1.0 / 64.0)]
        h: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        centers: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Run a canned comparison instead of a single search.
        #[arg(long, value_enum)]
        experiment: Option<Experiment>,
    },
    /// Write a mask file for a union of disks, a rectangle or an annulus.
    Mask {
        /// Disk `x,y,r`; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        disk: Vec<String>,
        /// Rectangle `xmin,xmax,ymin,ymax`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rect: Vec<f64>,
        /// Annulus `inner,outer` centered at the origin.
        #[arg(long, value_delimiter = ',')]
        annulus: Vec<f64>,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suites of every module.
    Verify {
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    K2,
}

#[derive(Serialize)]
struct Meta {
    tolerances: BTreeMap<&'static str, f64>,
    grid: BTreeMap<&'static str, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_seconds: Option<f64>,
}

#[derive(Serialize)]
struct RunResult {
    schema: u32,
    command: &'static str,
    params: Value,
    outputs: Value,
    meta: Meta,
}

/// Tabular view for `--format csv`; `trailer` rows are emitted as `#` comments.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    trailer: Vec<String>,
}

struct Run {
    result: RunResult,
    table: Option<Table>,
    exit: u8,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) | Error::Domain(_) | Error::Parse { .. } | Error::Io(_) | Error::Overlap { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<Run, Failure>;

fn dimension(n: u32) -> std::result::Result<Dimension, Failure> {
    Dimension::new(n).map_err(Failure::from)
}

fn run_result(command: &'static str, params: Value, outputs: Value) -> RunResult {
    RunResult {
        schema: SCHEMA,
        command,
        params,
        outputs,
        meta: Meta {
            tolerances: BTreeMap::new(),
            grid: BTreeMap::new(),
            runtime_seconds: None,
        },
    }
}

fn spectrum_table(sp: &Spectrum) -> Table {
    Table {
        header: vec!["index", "lambda", "ell", "multiplicity", "residual"],
        rows: sp
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                vec![
                    (i + 1).to_string(),
                    format!("{:.12}", e.lambda),
                    e.ell.map(|l| l.to_string()).unwrap_or_default(),
                    e.multiplicity.to_string(),
                    format!("{:.3e}", e.residual),
                ]
            })
            .collect(),
        trailer: Vec::new(),
    }
}

fn read_mask(path: &PathBuf) -> std::result::Result<RasterDomain, Failure> {
    RasterDomain::read(path).map_err(|e| match e {
        Error::Io(io) => Failure::Usage(format!("cannot read {}: {io}", path.display())),
        e => e.into(),
    })
}

fn grid_meta(d: &RasterDomain) -> BTreeMap<&'static str, Value> {
    BTreeMap::from([
        ("nx", json!(d.nx)),
        ("ny", json!(d.ny)),
        ("h", json!(d.h)),
        ("active_cells", json!(d.active_count())),
    ])
}

fn ball_spectrum(dim: u32, radius: f64, count: usize, tol: f64) -> CmdResult {
    let sp = radial::ball_spectrum(dimension(dim)?, radius, count, tol)?;
    let mut result = run_result(
        "ball-spectrum",
        json!({"dim": dim, "radius": radius, "count": count, "tol": tol}),
        json!({"spectrum": sp.entries}),
    );
    result.meta.tolerances.insert("eigen", tol);
    result.meta.grid.insert("radial_cells", json!(radial::DEFAULT_CELLS));
    Ok(Run {
        table: Some(spectrum_table(&sp)),
        result,
        exit: 0,
    })
}

fn sweep(dim: u32, rmin: f64, rmax: f64, steps: usize) -> CmdResult {
    if !(rmin > 0.0 && rmin < rmax && rmax.is_finite()) {
        return Err(Failure::Usage(format!("need 0 < rmin < rmax, got {rmin}, {rmax}")));
    }
    if steps < 2 {
        return Err(Failure::Usage("steps must be at least 2".into()));
    }
    let d = dimension(dim)?;
    let radii: Vec<f64> = (0..steps)
        .map(|i| rmin + (rmax - rmin) * i as f64 / (steps - 1) as f64)
        .collect();
    let lambdas: Vec<f64> = radii
        .iter()
        .map(|&r| radial::lambda1_ball(d, r))
        .collect::<driftlap::Result<_>>()?;
    let decreasing = lambdas.windows(2).all(|w| w[1] < w[0]);
    let plateau = *lambdas.last().unwrap();
    let n = d.as_f64();
    let mut result = run_result(
        "sweep",
        json!({"dim": dim, "rmin": rmin, "rmax": rmax, "steps": steps}),
        json!({
            "r": radii,
            "lambda1": lambdas,
            "strictly_decreasing": decreasing,
            "plateau": plateau,
            "distance_to_n": plateau - n,
            "distance_to_three_halves_n": plateau - 1.5 * n,
        }),
    );
    result.meta.tolerances.insert("eigen", radial::DEFAULT_TOL);
    result.meta.grid.insert("radial_cells", json!(radial::DEFAULT_CELLS));
    let table = Table {
        header: vec!["r", "lambda1"],
        rows: radii
            .iter()
            .zip(&lambdas)
            .map(|(r, l)| vec![format!("{r:.12}"), format!("{l:.12}")])
            .collect(),
        trailer: vec![
            format!("plateau,{plateau:.12}"),
            format!("distance_to_n,{:.6e}", plateau - n),
            format!("distance_to_three_halves_n,{:.6e}", plateau - 1.5 * n),
            format!("strictly_decreasing,{decreasing}"),
        ],
    };
    Ok(Run {
        result,
        table: Some(table),
        exit: if decreasing { 0 } else { 4 },
    })
}

fn hardy_cmd(dim: u32, at: &[f64], profiles: usize, sharpness: &[u32], seed: u64) -> CmdResult {
    let d = dimension(dim)?;
    let w = hardy::find_t(d)?;
    let values = hardy::rho_many(d, at)?;
    let mut outputs = json!({
        "t": w.t,
        "rho_t": w.rho_t,
        "rho": at.iter().zip(&values).map(|(r, v)| json!({"r": r, "rho": v})).collect::<Vec<_>>(),
    });
    if profiles > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..profiles {
            let u = hardy::random_profile(d, &mut rng);
            worst = worst.min(hardy::hardy_ratio(&w, &u)?);
        }
        outputs["random_profiles"] = json!({"count": profiles, "min_ratio": worst, "bound": 0.25});
    }
    let ratios: Vec<f64> = sharpness
        .iter()
        .map(|&k| hardy::sharpness_sequence(d, k).map(|p| p.1))
        .collect::<driftlap::Result<_>>()?;
    outputs["sharpness"] = json!(sharpness
        .iter()
        .zip(&ratios)
        .map(|(k, r)| json!({"k": k, "ratio": r}))
        .collect::<Vec<_>>());
    let mut result = run_result(
        "hardy",
        json!({"dim": dim, "at": at, "profiles": profiles, "sharpness": sharpness, "seed": seed}),
        outputs,
    );
    result.meta.grid.insert("sharpness_radius", json!(hardy::SHARPNESS_RADIUS));
    Ok(Run {
        result,
        table: None,
        exit: 0,
    })
}

fn chiti(dim: u32, lambda: f64, r: f64, q: f64) -> CmdResult {
    let data = reverse_holder::build_chiti(dimension(dim)?, lambda)?;
    let constant = reverse_holder::chiti_constant(&data, r, q)?;
    let scale = 3.7;
    let scaled = ChitiData {
        z_star: data.z_star.scaled(scale),
        ..data.clone()
    };
    let rescaled = reverse_holder::chiti_constant(&scaled, r, q)?;
    let drift = (rescaled / constant - 1.0).abs();
    let invariant = drift <= 1e-10;
    let q_json = if q.is_infinite() { json!("inf") } else { json!(q) };
    let mut result = run_result(
        "chiti",
        json!({"dim": dim, "lambda": lambda, "r": r, "q": q_json}),
        json!({
            "constant": constant,
            "ball_radius": data.r_tilde,
            "measure_length": data.l_tilde,
            "scale_invariance": {"factor": scale, "relative_drift": drift, "passed": invariant},
        }),
    );
    result.meta.tolerances.insert("eigen", radial::DEFAULT_TOL);
    result.meta.tolerances.insert("scale_invariance", 1e-10);
    result.meta.grid.insert("radial_cells", json!(radial::DEFAULT_CELLS));
    Ok(Run {
        result,
        table: None,
        exit: if invariant { 0 } else { 4 },
    })
}

fn domain_spectrum(mask: &PathBuf, count: usize, tol: f64) -> CmdResult {
    if count == 0 {
        return Err(Failure::Usage("count must be at least 1".into()));
    }
    let d = read_mask(mask)?;
    let eig = field::eigenpairs(&d, count, tol)?;
    let mut result = run_result(
        "domain-spectrum",
        json!({"mask": mask, "count": count, "tol": tol}),
        json!({"spectrum": eig.spectrum.entries, "weighted_measure": d.weighted_measure()}),
    );
    result.meta.tolerances.insert("eigen", tol);
    result.meta.grid = grid_meta(&d);
    Ok(Run {
        table: Some(spectrum_table(&eig.spectrum)),
        result,
        exit: 0,
    })
}

fn torsion(mask: &PathBuf, domination: usize, out: Option<&PathBuf>) -> CmdResult {
    let d = Arc::new(read_mask(mask)?);
    let solver = FieldSolver::new(d.clone())?;
    let t = solver.torsion()?;
    let mut outputs = json!({
        "min": t.min(),
        "max": t.max(),
        "support_count": t.support_count(),
        "residual": t.residual,
    });
    let mut exit = 0;
    if domination > 0 {
        let rep = field::domination_report(&solver.eigenpairs(domination, field::DEFAULT_TOL)?, &t, 1e-8);
        if !rep.holds() {
            exit = 4;
        }
        outputs["domination"] = json!({"holds": rep.holds(), "report": rep});
    }
    if let Some(path) = out {
        let mut text = String::from("x,y,w\n");
        for ((x, y), w) in d.active_centers().iter().zip(&t.w.values) {
            text.push_str(&format!("{x},{y},{w:e}\n"));
        }
        std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut result = run_result(
        "torsion",
        json!({"mask": mask, "domination": domination}),
        outputs,
    );
    result.meta.tolerances.insert("torsion_residual", field::TORSION_TOL);
    result.meta.grid = grid_meta(&d);
    Ok(Run {
        result,
        table: None,
        exit,
    })
}

#[allow(clippy::too_many_arguments)]
fn shape_search(
    k: usize,
    c: Option<f64>,
    h: f64,
    centers: Vec<f64>,
    radii: Vec<f64>,
    tol: f64,
    experiment: Option<Experiment>,
) -> CmdResult {
    let c = match c {
        Some(c) => c,
        None => ball_volume(Dimension::PLANE, 1.0)?,
    };
    let params = json!({"k": k, "c": c, "h": h, "centers": centers, "radii": radii, "tol": tol});
    let mut result = if let Some(Experiment::K2) = experiment {
        let report = shapeopt::experiment_k2(c, h)?;
        run_result("shape-search", params, serde_json::to_value(&report).expect("plain data"))
    } else {
        let init = if centers.is_empty() && radii.is_empty() {
            BallFamilyConfig::new(vec![0.3], vec![radius_of_volume(Dimension::PLANE, c)?])?
        } else {
            BallFamilyConfig::new(centers, radii)?
        };
        let spec = ObjectiveSpec::new(k, c, h)?;
        let found = shapeopt::nelder_mead(&spec, &init, tol)?;
        run_result("shape-search", params, serde_json::to_value(&found).expect("plain data"))
    };
    result.meta.tolerances.insert("search", tol);
    result.meta.grid.insert("h", json!(h));
    Ok(Run {
        result,
        table: None,
        exit: 0,
    })
}

fn parse_triple(s: &str) -> std::result::Result<([f64; 2], f64), Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("bad disk `{s}`: {e}")))?;
    match v[..] {
        [x, y, r] => Ok(([x, y], r)),
        _ => Err(Failure::Usage(format!("disk needs `x,y,r`, got `{s}`"))),
    }
}

fn mask(disk: &[String], rect: &[f64], annulus: &[f64], h: f64, out: &PathBuf) -> CmdResult {
    let chosen = [!disk.is_empty(), !rect.is_empty(), !annulus.is_empty()];
    if chosen.iter().filter(|&&b| b).count() != 1 {
        return Err(Failure::Usage("give exactly one of --disk, --rect, --annulus".into()));
    }
    let d = if !disk.is_empty() {
        let disks = disk.iter().map(|s| parse_triple(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        rasterize_disks(&disks, h)?
    } else if !rect.is_empty() {
        let [a, b, c, e] = rect[..] else {
            return Err(Failure::Usage("rectangle needs `xmin,xmax,ymin,ymax`".into()));
        };
        rasterize_rectangle([a, b, c, e], h)?
    } else {
        let [inner, outer] = annulus[..] else {
            return Err(Failure::Usage("annulus needs `inner,outer`".into()));
        };
        rasterize_annulus(inner, outer, h)?
    };
    d.write(out)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?;
    let mut result = run_result(
        "mask",
        json!({"disk": disk, "rect": rect, "annulus": annulus, "h": h, "out": out}),
        json!({"weighted_measure": d.weighted_measure(), "lebesgue_area": d.lebesgue_area()}),
    );
    result.meta.grid = grid_meta(&d);
    Ok(Run {
        result,
        table: None,
        exit: 0,
    })
}

fn verify_cmd(quick: bool, seed: u64) -> CmdResult {
    let report = verify::run(quick, seed);
    let passed = report.passed();
    let table = Table {
        header: vec!["suite", "name", "passed", "seconds", "detail"],
        rows: report
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.suite.clone(),
                    c.name.clone(),
                    c.passed.to_string(),
                    format!("{:.2}", c.seconds),
                    format!("\"{}\"", c.detail.replace('"', "\"\"")),
                ]
            })
            .collect(),
        trailer: Vec::new(),
    };
    let result = run_result(
        "verify",
        json!({"quick": quick, "seed": seed}),
        json!({"passed": passed, "checks": report.checks}),
    );
    Ok(Run {
        result,
        table: Some(table),
        exit: if passed { 0 } else { 4 },
    })
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::BallSpectrum { dim, radius, count, tol } => ball_spectrum(*dim, *radius, *count, *tol),
        Command::Sweep { dim, rmin, rmax, steps } => sweep(*dim, *rmin, *rmax, *steps),
        Command::Hardy {
            dim,
            at,
            profiles,
            sharpness,
        } => hardy_cmd(*dim, at, *profiles, sharpness, cli.seed),
        Command::Chiti { dim, lambda, r, q } => chiti(*dim, *lambda, *r, *q),
        Command::DomainSpectrum { mask, count, tol } => domain_spectrum(mask, *count, *tol),
        Command::Torsion { mask, domination, out } => torsion(mask, *domination, out.as_ref()),
        Command::ShapeSearch {
            k,
            c,
            h,
            centers,
            radii,
            tol,
            experiment,
        } => shape_search(*k, *c, *h, centers.clone(), radii.clone(), *tol, *experiment),
        Command::Mask {
            disk,
            rect,
            annulus,
            h,
            out,
        } => mask(disk, rect, annulus, *h, out),
        Command::Verify { quick } => verify_cmd(*quick, cli.seed),
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, rows);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, rows);
            }
        }
        Value::String(s) => rows.push(vec![prefix.to_string(), s.clone()]),
        other => rows.push(vec![prefix.to_string(), other.to_string()]),
    }
}

fn render_csv(run: &Run) -> String {
    let owned;
    let table = match &run.table {
        Some(t) => t,
        None => {
            let mut rows = Vec::new();
            flatten("", &run.result.outputs, &mut rows);
            owned = Table {
                header: vec!["key", "value"],
                rows,
                trailer: Vec::new(),
            };
            &owned
        }
    };
    let mut s = table.header.join(",");
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    for line in &table.trailer {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match dispatch(&cli) {
        Ok(mut run) => {
            if !cli.no_timing {
                run.result.meta.runtime_seconds = Some(start.elapsed().as_secs_f64());
            }
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&run.result).expect("plain data") + "\n",
                Format::Csv => render_csv(&run),
            };
            // Ignore EPIPE from `| head`.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::from(run.exit)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
