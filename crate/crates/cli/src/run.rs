use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use biot_mrfem::mesh::{parse_mesh, unit_square_mesh, BoundaryConfig, Mesh};
use biot_mrfem::reduction::condense;
use biot_mrfem::solver::{default_grid, parameter_sweep, solve_condensed_minres, solve_minres, sweep_boundary, SolveReport};
use biot_mrfem::spaces::{FieldState, Spaces};
use biot_mrfem::system::{assemble_biot, Conductivity, MaterialParams, TimeLoop};
use biot_mrfem::verify::{component_errors, convergence_study, make_case, ExactFields, ManufacturedCase, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, Load, MeshSpec, Mode, RunConfig, SolverKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] biot_mrfem::Error),
    #[error("minres did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for solver failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::NotConverged { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Reads and parses the config file; `out` and `seed` override its keys.
pub fn load_config(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(crate::config::parse_config(&text, out, seed)?)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn build_mesh(spec: &MeshSpec) -> Result<Mesh> {
    match spec {
        MeshSpec::UnitSquare(n) => Ok(unit_square_mesh(*n)?),
        MeshSpec::File(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            parse_mesh(&text).map_err(|e| ConfigError::new("mesh.file", format!("{}: {e}", p.display())).into())
        }
    }
}

/// `base` with the configured `bc.<tag>` entries applied on top, checked
/// against the mesh.
fn boundary(cfg: &RunConfig, base: BoundaryConfig, mesh: &Mesh) -> Result<BoundaryConfig> {
    let mut bc = base;
    if let Some(over) = &cfg.bc {
        bc.mechanics.extend(over.mechanics.iter().map(|(t, m)| (t.clone(), *m)));
        bc.flow.extend(over.flow.iter().map(|(t, f)| (t.clone(), *f)));
    }
    bc.validate(mesh).map_err(|e| ConfigError::new("bc", e.to_string()))?;
    Ok(bc)
}

fn case_for(cfg: &RunConfig, name: &str, mesh: &Mesh) -> Result<ManufacturedCase> {
    let params = cfg.params.as_ref().expect("params present outside sweep mode");
    let mut case = make_case(name, params)?;
    case.bc = boundary(cfg, case.bc, mesh)?;
    Ok(case)
}

/// Runs the configured mode, writing all artifacts into `cfg.out`. Returns
/// the paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out).map_err(|source| CliError::Io { path: cfg.out.clone(), source })?;
    let mut written = vec![write(&cfg.out, "effective_config.txt", &cfg.to_text())?];
    match cfg.mode {
        Mode::Solve => run_solve(cfg, &mut written)?,
        Mode::TimeLoop => run_timeloop(cfg, &mut written)?,
        Mode::Convergence => run_convergence(cfg, &mut written)?,
        Mode::Sweep => run_sweep(cfg, &mut written)?,
    }
    Ok(written)
}

fn report_rows(rep: &SolveReport) -> Vec<(&'static str, String)> {
    vec![
        ("converged", rep.converged.to_string()),
        ("iterations", rep.iterations.to_string()),
        ("preconditioned_residual", fmt(rep.relative_residual)),
        ("ritz_min", fmt(rep.ritz_min)),
        ("ritz_max", fmt(rep.ritz_max)),
        ("condition_estimate", fmt(rep.condition_estimate)),
    ]
}

fn run_solve(cfg: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let params = cfg.params.as_ref().expect("params present outside sweep mode");
    let mesh = build_mesh(&cfg.mesh)?;
    let case = match &cfg.load {
        Load::Case(name) => Some(case_for(cfg, name, &mesh)?),
        Load::Random => None,
    };
    let bc = match &case {
        Some(c) => c.bc.clone(),
        None => boundary(cfg, sweep_boundary(), &mesh)?,
    };
    let mesh = Arc::new(mesh);
    let mut sys = assemble_biot(mesh, cfg.family, params, &bc, cfg.method == Method::Mr)?;
    match &case {
        Some(c) => {
            sys.assemble_rhs(&c.problem_data(), &bc)?;
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            sys.rhs = sys.essential.iter().map(|&e| if e { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        }
    }

    let mut summary: Vec<(&'static str, String)> = vec![
        ("dofs_r", sys.spaces.sizes()[0].to_string()),
        ("dofs_u", sys.spaces.sizes()[1].to_string()),
        ("dofs_q", sys.spaces.sizes()[2].to_string()),
        ("dofs_p", sys.spaces.sizes()[3].to_string()),
    ];
    let mut report = None;
    let state = match (cfg.solver, cfg.method) {
        (SolverKind::Direct, Method::FourField) => sys.solve_direct()?,
        (SolverKind::Direct, Method::Mr) => condense(&sys)?.solve_direct(&sys.rhs)?,
        (SolverKind::Minres, Method::FourField) => {
            let (x, rep) = solve_minres(&sys, cfg.tol, cfg.max_iter)?;
            report = Some(rep);
            FieldState::from_vector(&sys.spaces, &x)?
        }
        (SolverKind::Minres, Method::Mr) => {
            let cs = condense(&sys)?;
            let (y, rep) = solve_condensed_minres(&cs, &sys.spaces, params, cfg.tol, cfg.max_iter)?;
            report = Some(rep);
            let (u, p) = cs.split_up(&y);
            cs.recover(u, p, &sys.rhs)?
        }
    };
    log::info!("solved {} unknowns", sys.rhs.len());
    summary.push(("relative_residual", fmt(sys.relative_residual(&state.to_vector()))));
    if let Some(rep) = &report {
        summary.extend(report_rows(rep));
    }
    let norms = component_errors(&state, &sys.spaces, params, &ExactFields::default())?;
    summary.push(("norm_X", fmt(norms.x_norm(params))));
    if let Some(c) = &case {
        let e = component_errors(&state, &sys.spaces, params, &c.exact_fields())?;
        for (k, v) in [
            ("err_r", e.r),
            ("err_curl_r", e.curl_r),
            ("err_u", e.u),
            ("err_div_u", e.div_u),
            ("err_q", e.q),
            ("err_div_q", e.div_q),
            ("err_p", e.p),
            ("err_X", e.x_norm(params)),
        ] {
            summary.push((k, fmt(v)));
        }
    }
    let rows: Vec<Vec<String>> = summary.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
    written.push(write(&cfg.out, "summary.csv", &csv_string(&["quantity", "value"], &rows))?);

    let mut rows = Vec::new();
    for (name, v) in [("r", &state.r), ("u", &state.u), ("q", &state.q), ("p", &state.p)] {
        rows.extend(v.iter().enumerate().map(|(i, x)| vec![name.to_string(), i.to_string(), fmt(*x)]));
    }
    written.push(write(&cfg.out, "state.csv", &csv_string(&["field", "dof", "value"], &rows))?);

    if let Some(rep) = report {
        if !rep.converged {
            return Err(CliError::NotConverged { iterations: rep.iterations, residual: rep.relative_residual });
        }
    }
    Ok(())
}

fn run_timeloop(cfg: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let params = cfg.params.clone().expect("params present outside sweep mode");
    let mesh = build_mesh(&cfg.mesh)?;
    let Load::Case(name) = &cfg.load else { unreachable!("timeloop takes a manufactured case") };
    let case = case_for(cfg, name, &mesh)?;
    let mesh = Arc::new(mesh);
    let sources = |_t: f64| case.problem_data();
    let looper = TimeLoop {
        mesh: mesh.clone(),
        family: cfg.family,
        params: params.clone(),
        bc: case.bc.clone(),
        lumped: cfg.method == Method::Mr,
        scheme: cfg.scheme,
        sources: &sources,
    };
    let spaces = Spaces::new(mesh, cfg.family, &case.bc)?;
    let states = looper.run(&FieldState::zeros(&spaces), cfg.steps)?;
    let rows = states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let c = component_errors(s, &spaces, &params, &ExactFields::default())?;
            let mut row = vec![n.to_string(), fmt(n as f64 * params.dt)];
            row.extend([c.r, c.u, c.q, c.p, c.x_norm(&params)].map(fmt));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let header = ["step", "t", "norm_r", "norm_u", "norm_q", "norm_p", "norm_X"];
    written.push(write(&cfg.out, "timeloop.csv", &csv_string(&header, &rows))?);
    written.push(write(&cfg.out, "plot_timeloop.gp", TIMELOOP_PLOT)?);
    Ok(())
}

fn run_convergence(cfg: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let MeshSpec::UnitSquare(n0) = cfg.mesh else { unreachable!("convergence mode only accepts mesh.n") };
    let Load::Case(name) = &cfg.load else { unreachable!("convergence takes a manufactured case") };
    let coarse = unit_square_mesh(n0)?;
    let case = case_for(cfg, name, &coarse)?;
    let (table, failure) = match convergence_study(&case, cfg.family, cfg.method, n0, cfg.levels) {
        Ok(t) => (t, None),
        Err((t, e)) => (t, Some(e)),
    };
    for (row, rate) in table.rows.iter().skip(1).zip(table.rates_x()) {
        log::info!("level {}: err_X {:.3e}, rate {rate:.3}", row.level, row.err_x);
    }
    written.push(write(&cfg.out, "errors.csv", &table.to_csv())?);
    written.push(write(&cfg.out, "plot_errors.gp", ERROR_PLOT)?);
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn run_sweep(cfg: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let rows = parameter_sweep(&default_grid(), &cfg.sweep_levels, cfg.family, cfg.tol, cfg.max_iter, cfg.seed);
    let failures = rows.iter().filter(|r| r.result.is_err()).count();
    if failures > 0 {
        log::warn!("{failures} of {} sweep rows failed", rows.len());
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let p: &MaterialParams = &row.params;
            let k = match &p.k {
                Conductivity::Scalar(k) => *k,
                Conductivity::Tensor(_) => p.k_max(),
            };
            let mut r = vec![cfg.family.index().to_string()];
            r.extend([p.mu, p.lambda, p.alpha, p.c0, k, p.dt].map(fmt));
            r.push(row.n.to_string());
            match &row.result {
                Ok(rep) => {
                    r.extend([rep.converged.to_string(), rep.iterations.to_string()]);
                    r.extend([rep.relative_residual, rep.ritz_min, rep.ritz_max, rep.condition_estimate].map(fmt));
                    r.push(String::new());
                }
                Err(e) => {
                    r.extend(["false".to_string(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                    r.push(e.clone());
                }
            }
            r
        })
        .collect();
    let header = [
        "family", "mu", "lambda", "alpha", "c0", "k", "dt", "n", "converged", "iterations", "relative_residual", "ritz_min", "ritz_max",
        "condition_estimate", "error",
    ];
    written.push(write(&cfg.out, "sweep.csv", &csv_string(&header, &table))?);
    written.push(write(&cfg.out, "plot_sweep.gp", SWEEP_PLOT)?);
    Ok(())
}

const ERROR_PLOT: &str = "\
# gnuplot -p plot_errors.gp
set datafile separator ','
set key autotitle columnhead left top
set logscale xy
set xlabel 'h'
set ylabel 'error'
set grid
plot for [i=3:10] 'errors.csv' using 2:i with linespoints
";

const SWEEP_PLOT: &str = "\
# gnuplot -p plot_sweep.gp
set datafile separator ','
set xlabel 'row'
set ylabel 'MINRES iterations'
set grid
plot 'sweep.csv' every ::1 using 0:10 with points pt 7 title 'iterations'
";

const TIMELOOP_PLOT: &str = "\
# gnuplot -p plot_timeloop.gp
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set grid
plot for [i=3:7] 'timeloop.csv' using 2:i with linespoints
";
