//! Plain-text run configuration: one `key=value` per line, `#` starts a
//! comment, keys are dotted (`params.mu`, `bc.left`, `solver.tol`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use biot_mrfem::mesh::{BoundaryConfig, FlowBc, MechanicsBc};
use biot_mrfem::spaces::Family;
use biot_mrfem::system::{MaterialParams, TimeScheme};
use biot_mrfem::verify::{Method, CASE_NAMES};

/// A configuration problem, always tied to the key that caused it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config key `{key}`: {msg}")]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Self { key: key.into(), msg: msg.into() }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    TimeLoop,
    Convergence,
    Sweep,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::TimeLoop => "timeloop",
            Mode::Convergence => "convergence",
            Mode::Sweep => "sweep",
        }
    }

    /// Keys (besides `mode`, `seed`, `output.dir`, `family`) that take effect
    /// in this mode. `bc.*` and `params.*` are matched by prefix.
    fn accepts(self, key: &str) -> bool {
        let mesh = matches!(key, "mesh.n" | "mesh.file");
        let physics = key.starts_with("params.") || key.starts_with("bc.") || key == "case" || key == "method";
        let krylov = matches!(key, "solver.tol" | "solver.max_iter");
        match self {
            Mode::Solve => mesh || physics || krylov || key == "solver",
            Mode::TimeLoop => mesh || physics || matches!(key, "steps" | "scheme"),
            Mode::Convergence => key == "mesh.n" || physics || key == "levels",
            Mode::Sweep => krylov || key == "sweep.levels",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    /// `n × n` squares on the unit square, each split into two triangles.
    UnitSquare(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Minres,
}

/// Right-hand side of a single solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Load {
    /// Manufactured case by name.
    Case(String),
    /// Uniform random entries on the free DOFs, drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub mesh: MeshSpec,
    pub family: Family,
    pub method: Method,
    /// Absent only in sweep mode, which runs the built-in grid.
    pub params: Option<MaterialParams>,
    /// Per-tag overrides of the default boundary assignment (the manufactured
    /// case's own, or the sweep boundary for random loads).
    pub bc: Option<BoundaryConfig>,
    pub load: Load,
    pub levels: usize,
    pub sweep_levels: Vec<usize>,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    pub steps: usize,
    pub scheme: TimeScheme,
    pub out: PathBuf,
    pub seed: u64,
}

const DEFAULT_N: usize = 4;

/// Splits the text into `key → (value, line)`, rejecting malformed lines and
/// repeated keys.
fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::new(format!("line {}", i + 1), format!("expected key=value, got `{line}`")));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::new(format!("line {}", i + 1), "empty key"));
        }
        if map.insert(k.to_string(), (v.to_string(), i + 1)).is_some() {
            return Err(ConfigError::new(k, "given more than once"));
        }
    }
    Ok(map)
}

struct Keys(BTreeMap<String, (String, usize)>);

impl Keys {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(v, _)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| ConfigError::new(key, "missing"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| ConfigError::new(key, format!("expected {what}, got `{v}`"))))
            .transpose()
    }

    fn float(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse(key, "a number")?.ok_or_else(|| ConfigError::new(key, "missing"))?;
        if !v.is_finite() {
            return Err(ConfigError::new(key, "must be finite"));
        }
        Ok(v)
    }
}

fn parse_mechanics(s: &str) -> Option<MechanicsBc> {
    match s {
        "rotation" => Some(MechanicsBc::Rotation),
        "displacement" => Some(MechanicsBc::Displacement),
        _ => None,
    }
}

fn parse_flow(s: &str) -> Option<FlowBc> {
    match s {
        "pressure" => Some(FlowBc::Pressure),
        "flux" => Some(FlowBc::Flux),
        _ => None,
    }
}

fn mechanics_name(m: MechanicsBc) -> &'static str {
    match m {
        MechanicsBc::Rotation => "rotation",
        MechanicsBc::Displacement => "displacement",
    }
}

fn flow_name(f: FlowBc) -> &'static str {
    match f {
        FlowBc::Pressure => "pressure",
        FlowBc::Flux => "flux",
    }
}

fn parse_levels(key: &str, v: &str) -> Result<Vec<usize>> {
    let levels = v
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&n| n > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| ConfigError::new(key, format!("expected a comma-separated list of positive integers, got `{v}`")))?;
    if levels.is_empty() {
        return Err(ConfigError::new(key, "empty list"));
    }
    Ok(levels)
}

/// Parses and validates a configuration. `seed` and `out` override the file.
pub fn parse_config(text: &str, out: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let keys = Keys(tokenize(text)?);
    let mode = match keys.require("mode")? {
        "solve" => Mode::Solve,
        "timeloop" => Mode::TimeLoop,
        "convergence" => Mode::Convergence,
        "sweep" => Mode::Sweep,
        v => return Err(ConfigError::new("mode", format!("expected solve, timeloop, convergence or sweep, got `{v}`"))),
    };
    for (k, (_, line)) in &keys.0 {
        let common = matches!(k.as_str(), "mode" | "seed" | "output.dir" | "family");
        if !common && !mode.accepts(k) {
            return Err(ConfigError::new(k, format!("unknown or unused in {} mode (line {line})", mode.name())));
        }
    }

    let mesh = match (keys.get("mesh.n"), keys.get("mesh.file")) {
        (Some(_), Some(_)) => return Err(ConfigError::new("mesh.file", "give either mesh.n or mesh.file, not both")),
        (_, Some(f)) => MeshSpec::File(PathBuf::from(f)),
        _ => match keys.parse::<usize>("mesh.n", "a positive integer")? {
            Some(0) => return Err(ConfigError::new("mesh.n", "must be positive")),
            Some(n) => MeshSpec::UnitSquare(n),
            None => MeshSpec::UnitSquare(DEFAULT_N),
        },
    };
    let family = match keys.get("family").unwrap_or("2") {
        "1" => Family::One,
        "2" => Family::Two,
        v => return Err(ConfigError::new("family", format!("expected 1 or 2, got `{v}`"))),
    };
    let method: Method = match keys.get("method") {
        Some(v) => v.parse().map_err(|_| ConfigError::new("method", format!("expected 4F or MR, got `{v}`")))?,
        None => Method::FourField,
    };
    if method == Method::Mr && family == Family::One {
        return Err(ConfigError::new("method", "MR needs family 2 (RT0 fluxes have no vertex-local lumped mass)"));
    }

    let params = if mode == Mode::Sweep {
        None
    } else {
        let p = MaterialParams::new(
            keys.float("params.mu")?,
            keys.float("params.lambda")?,
            keys.float("params.alpha")?,
            keys.float("params.c0")?,
            keys.float("params.k")?,
            keys.float("params.dt")?,
        )
        .map_err(|e| match e {
            biot_mrfem::Error::InvalidParameter { name, msg } => ConfigError::new(format!("params.{name}"), msg),
            other => ConfigError::new("params", other.to_string()),
        })?;
        Some(p)
    };

    let mut mech = BTreeMap::new();
    let mut flow = BTreeMap::new();
    for (k, (v, _)) in keys.0.range("bc.".to_string()..) {
        let Some(tag) = k.strip_prefix("bc.") else { break };
        let parsed = v.split_once(',').and_then(|(m, f)| Some((parse_mechanics(m.trim())?, parse_flow(f.trim())?)));
        let Some((m, f)) = parsed else {
            return Err(ConfigError::new(k, format!("expected `<rotation|displacement>,<pressure|flux>`, got `{v}`")));
        };
        mech.insert(tag.to_string(), m);
        flow.insert(tag.to_string(), f);
    }
    let bc = (!mech.is_empty()).then_some(BoundaryConfig { mechanics: mech, flow });

    let load = match (mode, keys.get("case")) {
        (Mode::Sweep, _) => Load::Random,
        (_, None) => return Err(ConfigError::new("case", "missing")),
        (Mode::Solve, Some("random")) => Load::Random,
        (_, Some(c)) if CASE_NAMES.contains(&c) => Load::Case(c.to_string()),
        (_, Some(c)) => {
            let allowed = if mode == Mode::Solve { "poly, trig or random" } else { "poly or trig" };
            return Err(ConfigError::new("case", format!("expected {allowed}, got `{c}`")));
        }
    };
    if mode == Mode::TimeLoop && method == Method::Mr {
        // the time loop keeps the lumped four-field system; no condensation
        log::info!("timeloop with method=MR uses lumped masses without condensation");
    }

    let levels = keys.parse::<usize>("levels", "an integer")?.unwrap_or(4);
    if mode == Mode::Convergence && levels < 3 {
        return Err(ConfigError::new("levels", format!("a convergence study needs at least 3 levels, got {levels}")));
    }
    let sweep_levels = match keys.get("sweep.levels") {
        Some(v) => parse_levels("sweep.levels", v)?,
        None => vec![4, 8, 16],
    };
    let solver = match keys.get("solver").unwrap_or("direct") {
        "direct" => SolverKind::Direct,
        "minres" => SolverKind::Minres,
        v => return Err(ConfigError::new("solver", format!("expected direct or minres, got `{v}`"))),
    };
    let tol = if keys.get("solver.tol").is_some() { keys.float("solver.tol")? } else { 1e-10 };
    if tol <= 0.0 {
        return Err(ConfigError::new("solver.tol", "must be positive"));
    }
    let max_iter = keys.parse::<usize>("solver.max_iter", "a positive integer")?.unwrap_or(1000);
    if max_iter == 0 {
        return Err(ConfigError::new("solver.max_iter", "must be positive"));
    }
    let steps = keys.parse::<usize>("steps", "a positive integer")?.unwrap_or(10);
    if steps == 0 {
        return Err(ConfigError::new("steps", "must be positive"));
    }
    let scheme = match keys.get("scheme").unwrap_or("be") {
        "be" => TimeScheme::BackwardEuler,
        "cn" => TimeScheme::CrankNicolson,
        v => return Err(ConfigError::new("scheme", format!("expected be or cn, got `{v}`"))),
    };
    let out = out.unwrap_or_else(|| PathBuf::from(keys.get("output.dir").unwrap_or("out")));
    let seed = match seed {
        Some(s) => s,
        None => keys.parse::<u64>("seed", "a non-negative integer")?.unwrap_or(0),
    };

    Ok(RunConfig { mode, mesh, family, method, params, bc, load, levels, sweep_levels, solver, tol, max_iter, steps, scheme, out, seed })
}

impl RunConfig {
    /// The effective configuration in the input format, with every default
    /// resolved and only the keys the mode reads. Parsing it back yields the
    /// same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("mode", self.mode.name().into());
        kv("family", self.family.index().to_string());
        kv("seed", self.seed.to_string());
        kv("output.dir", self.out.display().to_string());
        if self.mode == Mode::Sweep {
            kv("sweep.levels", self.sweep_levels.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
            kv("solver.tol", format!("{:?}", self.tol));
            kv("solver.max_iter", self.max_iter.to_string());
            return s;
        }
        match &self.mesh {
            MeshSpec::UnitSquare(n) => kv("mesh.n", n.to_string()),
            MeshSpec::File(p) => kv("mesh.file", p.display().to_string()),
        }
        kv("method", self.method.to_string());
        if let Some(p) = &self.params {
            let k = match &p.k {
                biot_mrfem::system::Conductivity::Scalar(k) => *k,
                biot_mrfem::system::Conductivity::Tensor(_) => p.k_max(),
            };
            for (name, v) in [("mu", p.mu), ("lambda", p.lambda), ("alpha", p.alpha), ("c0", p.c0), ("k", k), ("dt", p.dt)] {
                kv(&format!("params.{name}"), format!("{v:?}"));
            }
        }
        if let Some(bc) = &self.bc {
            for (tag, m) in &bc.mechanics {
                let f = bc.flow.get(tag).copied().unwrap_or(FlowBc::Pressure);
                kv(&format!("bc.{tag}"), format!("{},{}", mechanics_name(*m), flow_name(f)));
            }
        }
        kv(
            "case",
            match &self.load {
                Load::Case(c) => c.clone(),
                Load::Random => "random".into(),
            },
        );
        match self.mode {
            Mode::Solve => {
                kv("solver", if self.solver == SolverKind::Direct { "direct" } else { "minres" }.into());
                kv("solver.tol", format!("{:?}", self.tol));
                kv("solver.max_iter", self.max_iter.to_string());
            }
            Mode::TimeLoop => {
                kv("steps", self.steps.to_string());
                kv("scheme", if self.scheme == TimeScheme::BackwardEuler { "be" } else { "cn" }.into());
            }
            Mode::Convergence => kv("levels", self.levels.to_string()),
            Mode::Sweep => unreachable!(),
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = "# a comment\nmode = solve\nmesh.n=8\nparams.mu=1\nparams.lambda=1e4 # trailing\nparams.alpha=0.5\nparams.c0=0.1\nparams.k=1e-6\nparams.dt=0.1\ncase=trig\nmethod=MR\nsolver=minres\n";

    #[test]
    fn parses_and_defaults() {
        let c = parse_config(SOLVE, None, None).unwrap();
        assert_eq!(c.mode, Mode::Solve);
        assert_eq!(c.mesh, MeshSpec::UnitSquare(8));
        assert_eq!(c.method, Method::Mr);
        assert_eq!(c.family, Family::Two);
        assert_eq!(c.params.as_ref().unwrap().lambda, 1e4);
        assert_eq!(c.solver, SolverKind::Minres);
        assert_eq!((c.tol, c.max_iter, c.seed), (1e-10, 1000, 0));
        assert_eq!(c.out, PathBuf::from("out"));
    }

    #[test]
    fn effective_config_round_trips() {
        let text = format!("{SOLVE}bc.left=rotation,flux\nbc.right=displacement,pressure\nbc.top=displacement,flux\nbc.bottom=rotation,pressure\n");
        let c = parse_config(&text, Some("elsewhere".into()), Some(17)).unwrap();
        assert_eq!(c.seed, 17);
        assert_eq!(parse_config(&c.to_text(), None, None).unwrap(), c);
        let sweep = parse_config("mode=sweep\nsweep.levels=4, 8\nsolver.tol=1e-8\n", None, None).unwrap();
        assert_eq!(sweep.sweep_levels, vec![4, 8]);
        assert_eq!(parse_config(&sweep.to_text(), None, None).unwrap(), sweep);
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text, None, None).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
        assert!(n >= 4);
    }

    #[test]
    fn errors_name_the_key() {
        let key = |text: &str| parse_config(text, None, None).unwrap_err().key;
        assert_eq!(key(&SOLVE.replace("params.mu=1\n", "")), "params.mu");
        assert_eq!(key(&SOLVE.replace("params.mu=1", "params.mu=-1")), "params.mu");
        assert_eq!(key(&SOLVE.replace("params.k=1e-6", "params.k=abc")), "params.k");
        assert_eq!(key(&format!("{SOLVE}params.mu=2\n")), "params.mu");
        assert_eq!(key(&format!("{SOLVE}levels=5\n")), "levels");
        assert_eq!(key(&format!("{SOLVE}bc.left=rotation\n")), "bc.left");
        assert_eq!(key(&SOLVE.replace("method=MR", "method=MR\nfamily=1")), "method");
        assert_eq!(key("mode=fly\n"), "mode");
        assert_eq!(key("mode=sweep\nnonsense\n"), "line 2");
        assert_eq!(key("mode=sweep\nparams.mu=1\n"), "params.mu");
    }
}
