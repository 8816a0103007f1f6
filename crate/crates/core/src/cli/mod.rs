//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computation fails (the error is written
//! to stderr as `{"error": kind, "message": text}`), 2 on usage errors.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chart::{build_chart, FrameChoice, Orders};
use crate::coeff::Coeff;
use crate::error::{Error, Result};
use crate::evolution::{self, InitialData, RunSpec, PATCH_RADIUS};
use crate::expr::{parse, Bindings};
use crate::families::{cubic_report, quadratic_report, FamilyReport, Mode};
use crate::fields::{conformal_check, default_u0, verify_affine};
use crate::obstruction::{obstruction_pijkl, validate_indices, ObstructionOptions, PRIMARY_INDICES};
use crate::oracle::{battery, cross_check, BatteryCase, PointFdSpec};
use config::FileConfig;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "BELTRAMI_THREADS";

#[derive(Debug, Parser)]
#[command(name = "beltrami", version, about = "Obstruction polynomials and numerical checks for Beltrami fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Proportionality factor as an expression in x1, x2, x3.
    #[arg(long, global = true)]
    pub f: Option<String>,
    /// Parameter binding, repeatable.
    #[arg(long = "param", global = true, value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// Base point `x1,x2,x3`.
    #[arg(long, global = true)]
    pub point: Option<String>,
    /// Highest ξ-degree of the obstruction polynomial.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Truncation orders `t,xi`.
    #[arg(long, global = true, value_name = "T,XI")]
    pub orders: Option<String>,
    /// `double` or `rational`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// `auto`, `aligned` or `graph`.
    #[arg(long, global = true)]
    pub frame: Option<String>,
    /// Output path, `-` for standard output.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// `json` or `csv`.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Obstruction polynomial P at a point.
    PEval,
    /// Generalized obstruction det(T_i, T_j, T_k, T_l).
    PHierarchy {
        #[arg(long, value_name = "I,J,K,L")]
        indices: Option<String>,
    },
    /// Cubic family coefficients against their closed forms.
    CoeffsProp3 {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
    },
    /// Quadratic family coefficients against their closed form.
    CoeffsProp4 {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
    },
    /// Residuals of the explicit solution for f = 1 + a x1 + x3.
    VerifyAffine {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        u0: Option<String>,
    },
    /// Conformal curl identity at seeded points.
    ConformalCheck,
    /// Integrate the chart evolution on a grid and report constraint drift.
    Evolve {
        #[arg(long)]
        tmax: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long, value_name = "N1xN2")]
        grid: Option<String>,
        #[arg(long)]
        spacing: Option<String>,
        #[arg(long, value_name = "psi:EXPR|affine-exact", allow_hyphen_values = true)]
        init: Option<String>,
        #[arg(long)]
        patch: Option<String>,
    },
    /// Series obstruction against the finite-difference oracle.
    CrossCheck {
        #[arg(long, value_name = "I,J,K,L")]
        indices: Option<String>,
    },
    /// Chart series as JSON.
    DumpChart,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PEval => "p-eval",
            Command::PHierarchy { .. } => "p-hierarchy",
            Command::CoeffsProp3 { .. } => "coeffs-prop3",
            Command::CoeffsProp4 { .. } => "coeffs-prop4",
            Command::VerifyAffine { .. } => "verify-affine",
            Command::ConformalCheck => "conformal-check",
            Command::Evolve { .. } => "evolve",
            Command::CrossCheck { .. } => "cross-check",
            Command::DumpChart => "dump-chart",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Flag values merged with the configuration file.
struct Resolved<'a> {
    common: &'a Common,
    file: FileConfig,
}

impl Resolved<'_> {
    fn raw(&self, key: &str, flag: Option<&String>) -> Option<String> {
        flag.cloned().or_else(|| self.file.get(key).map(str::to_string))
    }

    fn common_raw(&self, key: &str) -> Option<String> {
        let c = self.common;
        let flag = match key {
            "f" => c.f.clone(),
            "point" => c.point.clone(),
            "degree" => c.degree.map(|v| v.to_string()),
            "orders" => c.orders.clone(),
            "mode" => c.mode.clone(),
            "frame" => c.frame.clone(),
            "out" => c.out.clone(),
            "format" => c.format.clone(),
            "seed" => c.seed.map(|v| v.to_string()),
            "samples" => c.samples.map(|v| v.to_string()),
            _ => None,
        };
        self.raw(key, flag.as_ref())
    }

    fn f_text(&self) -> Result<String> {
        self.common_raw("f")
            .ok_or_else(|| Error::Config("missing --f".into()))
    }

    /// File parameters first, so flags rebind them.
    fn param_texts(&self) -> Result<Vec<(String, String)>> {
        let mut all: Vec<(String, String)> = self.file.params().to_vec();
        for p in &self.common.params {
            let (k, v) = config::split_param(p)?;
            all.retain(|(name, _)| *name != k);
            all.push((k, v));
        }
        Ok(all)
    }

    fn bindings(&self) -> Result<Bindings> {
        let mut b = Bindings::new();
        for (k, v) in self.param_texts()? {
            b = b.with(&k, config::rational(&k, &v)?);
        }
        Ok(b)
    }

    fn point(&self) -> Result<[BigRational; 3]> {
        match self.common_raw("point") {
            Some(t) => config::triple("point", &t, config::rational),
            None => Ok([0, 0, 0].map(|v| BigRational::from_integer(v.into()))),
        }
    }

    fn point_f64(&self) -> Result<[f64; 3]> {
        Ok(self.point()?.map(|q| Coeff::to_f64(&q)))
    }

    fn orders(&self) -> Result<Option<Orders>> {
        self.common_raw("orders").map(|t| config::orders(&t)).transpose()
    }

    fn mode(&self) -> Result<Mode> {
        self.common_raw("mode").map_or(Ok(Mode::Double), |m| m.parse())
    }

    fn frame(&self) -> Result<FrameChoice> {
        self.common_raw("frame").map_or(Ok(FrameChoice::Auto), |m| m.parse())
    }

    fn degree(&self) -> Result<usize> {
        self.common_raw("degree").map_or(Ok(4), |t| config::integer("degree", &t))
    }

    fn seed(&self) -> Result<u64> {
        self.common_raw("seed").map_or(Ok(0), |t| config::integer("seed", &t))
    }

    fn samples(&self, default: usize) -> Result<usize> {
        self.common_raw("samples").map_or(Ok(default), |t| config::integer("samples", &t))
    }

    fn format(&self, default: Format) -> Result<Format> {
        match self.common_raw("format").as_deref() {
            None => Ok(default),
            Some("json") => Ok(Format::Json),
            Some("csv") => Ok(Format::Csv),
            Some(other) => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }

    fn indices(&self, flag: Option<&String>) -> Result<[usize; 4]> {
        match self.raw("indices", flag) {
            Some(t) => validate_indices(&config::list("indices", &t, config::integer)?),
            None => Ok(PRIMARY_INDICES),
        }
    }

    fn real_or(&self, key: &str, flag: Option<&String>, default: f64) -> Result<f64> {
        self.raw(key, flag).map_or(Ok(default), |t| config::real(key, &t))
    }

    fn required(&self, key: &str, flag: Option<&String>) -> Result<String> {
        self.raw(key, flag)
            .ok_or_else(|| Error::Config(format!("missing --{key}")))
    }

    fn double_only(&self, cmd: &str) -> Result<()> {
        if self.mode()? == Mode::Rational {
            return Err(Error::Config(format!("{cmd} runs in double mode only")));
        }
        Ok(())
    }
}

/// Rendered report ready to be written.
pub struct Output {
    pub text: String,
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Config(format!("serialization failed: {e}")))
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn poly_csv(v: &Value) -> String {
    let mut s = String::from("i,j,c\n");
    for c in v["coeffs"].as_array().into_iter().flatten() {
        s.push_str(&format!("{},{},{}\n", c["mi"][0], c["mi"][1], csv_cell(&c["c"])));
    }
    s
}

fn family_csv(r: &FamilyReport) -> String {
    let mut s = String::from("name,i,j,computed,reference,abs_error,rel_error,pass\n");
    for c in &r.checks {
        s.push_str(&format!(
            "{},{},{},{},{},{:e},{:e},{}\n",
            c.name,
            c.mi[0],
            c.mi[1],
            csv_cell(&c.computed),
            c.reference,
            c.abs_error,
            c.rel_error,
            c.pass
        ));
    }
    s
}

/// One header line and one row from the scalar fields of a flat JSON object.
fn summary_csv(v: &Value) -> String {
    let mut keys = Vec::new();
    let mut vals = Vec::new();
    if let Value::Object(m) = v {
        for (k, x) in m {
            if !x.is_object() && !x.is_array() {
                keys.push(k.clone());
                vals.push(csv_cell(x));
            }
        }
    }
    format!("{}\n{}\n", keys.join(","), vals.join(","))
}

fn obstruction<C: Coeff>(
    f: &crate::expr::Expr,
    b: &Bindings,
    p: &[BigRational; 3],
    ix: &[usize; 4],
    m: usize,
    opts: ObstructionOptions,
) -> Result<Value> {
    let p = [0, 1, 2].map(|i| C::from_rational(&p[i]));
    Ok(obstruction_pijkl::<C>(f, b, &p, ix, m, opts)?.to_json())
}

fn chart_json<C: Coeff>(f: &crate::expr::Expr, b: &Bindings, p: &[BigRational; 3], orders: Orders, frame: FrameChoice) -> Result<Value> {
    let p = [0, 1, 2].map(|i| C::from_rational(&p[i]));
    Ok(build_chart::<C>(f, b, &p, orders, frame)?.to_json())
}

/// Runs one parsed invocation and renders its report.
pub fn execute(cli: &Cli) -> Result<Output> {
    let file = match &cli.common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let r = Resolved {
        common: &cli.common,
        file,
    };
    let text = match &cli.command {
        Command::PEval | Command::PHierarchy { .. } => {
            let ix = match &cli.command {
                Command::PHierarchy { indices } => r.indices(indices.as_ref())?,
                _ => PRIMARY_INDICES,
            };
            let f = parse(&r.f_text()?)?;
            let b = r.bindings()?;
            let p = r.point()?;
            let opts = ObstructionOptions {
                orders: r.orders()?,
                frame: r.frame()?,
            };
            let m = r.degree()?;
            let v = match r.mode()? {
                Mode::Double => obstruction::<f64>(&f, &b, &p, &ix, m, opts)?,
                Mode::Rational => obstruction::<BigRational>(&f, &b, &p, &ix, m, opts)?,
            };
            match r.format(Format::Json)? {
                Format::Json => json_text(&v)?,
                Format::Csv => poly_csv(&v),
            }
        }
        Command::CoeffsProp3 { a, b } => {
            let av = config::rational("a", &r.required("a", a.as_ref())?)?;
            let bv = config::rational("b", &r.required("b", b.as_ref())?)?;
            let rep = cubic_report(&av, &bv, r.mode()?)?;
            match r.format(Format::Json)? {
                Format::Json => json_text(&rep)?,
                Format::Csv => family_csv(&rep),
            }
        }
        Command::CoeffsProp4 { a } => {
            let av = config::rational("a", &r.required("a", a.as_ref())?)?;
            let rep = quadratic_report(&av, r.mode()?)?;
            match r.format(Format::Json)? {
                Format::Json => json_text(&rep)?,
                Format::Csv => family_csv(&rep),
            }
        }
        Command::VerifyAffine { a, u0 } => {
            r.double_only(cli.command.name())?;
            let av = r.real_or("a", a.as_ref(), 0.0)?;
            let u0v = match r.raw("u0", u0.as_ref()) {
                Some(t) => config::triple("u0", &t, config::real)?,
                None => default_u0(av),
            };
            let orders = r.orders()?.unwrap_or(Orders::new(4, 4));
            let rep = verify_affine(av, u0v, r.samples(100)?, r.seed()?, orders)?;
            let v = serde_json::to_value(&rep).map_err(|e| Error::Config(e.to_string()))?;
            match r.format(Format::Json)? {
                Format::Json => json_text(&rep)?,
                Format::Csv => summary_csv(&v),
            }
        }
        Command::ConformalCheck => {
            r.double_only(cli.command.name())?;
            let f = parse(&r.common_raw("f").unwrap_or_else(|| "1 + x1^2 + x2^2 + x3^2".into()))?;
            let rep = conformal_check(&f, r.samples(50)?, r.seed()?)?;
            let v = serde_json::to_value(&rep).map_err(|e| Error::Config(e.to_string()))?;
            match r.format(Format::Json)? {
                Format::Json => json_text(&rep)?,
                Format::Csv => summary_csv(&v),
            }
        }
        Command::Evolve {
            tmax,
            dt,
            grid,
            spacing,
            init,
            patch,
        } => {
            r.double_only(cli.command.name())?;
            let f = parse(&r.f_text()?)?;
            let b = r.bindings()?;
            let (n1, n2) = config::grid(&r.raw("grid", grid.as_ref()).unwrap_or_else(|| "9x9".into()))?;
            let init: InitialData = r.required("init", init.as_ref())?.parse()?;
            let spec = RunSpec {
                p: r.point_f64()?,
                init,
                t_max: r.real_or("tmax", tmax.as_ref(), 0.1)?,
                dt: r.real_or("dt", dt.as_ref(), 0.01)?,
                n1,
                n2,
                h: r.real_or("spacing", spacing.as_ref(), 0.025)?,
                orders: r.orders()?.unwrap_or_default(),
                patch: r.real_or("patch", patch.as_ref(), PATCH_RADIUS)?,
            };
            let rep = evolution::run(&f, &b, &spec)?;
            match r.format(Format::Csv)? {
                Format::Json => json_text(&rep)?,
                Format::Csv => rep.to_csv(),
            }
        }
        Command::CrossCheck { indices } => {
            r.double_only(cli.command.name())?;
            let ix = r.indices(indices.as_ref())?;
            let d = PointFdSpec::default();
            let spec = PointFdSpec {
                xi_step: r.real_or("fd-xi-step", None, d.xi_step)?,
                t_step: r.real_or("fd-t-step", None, d.t_step)?,
                flow_steps: r
                    .file
                    .get("flow-steps")
                    .map_or(Ok(d.flow_steps), |t| config::integer("flow-steps", t))?,
                ..d
            };
            let cases = match r.common_raw("f") {
                Some(text) => {
                    let mut params = Vec::new();
                    for (k, v) in r.param_texts()? {
                        let x = config::real(&k, &v)?;
                        params.push((k, x));
                    }
                    vec![BatteryCase {
                        f: text,
                        params,
                        point: r.point_f64()?,
                    }]
                }
                None => battery(),
            };
            let rep = cross_check(&cases, &ix, &spec)?;
            match r.format(Format::Json)? {
                Format::Json => json_text(&rep)?,
                Format::Csv => {
                    let mut s = String::from("f,point,series,fd,abs_error,rel_error,pass\n");
                    for e in &rep.entries {
                        let point = e.point.map(|x| x.to_string()).join(" ");
                        s.push_str(&format!(
                            "\"{}\",{},{:e},{:e},{:e},{:e},{}\n",
                            e.f, point, e.series, e.fd, e.abs_error, e.rel_error, e.pass
                        ));
                    }
                    s
                }
            }
        }
        Command::DumpChart => {
            let f = parse(&r.f_text()?)?;
            let b = r.bindings()?;
            let p = r.point()?;
            let orders = r.orders()?.unwrap_or_default();
            let frame = r.frame()?;
            let v = match r.mode()? {
                Mode::Double => chart_json::<f64>(&f, &b, &p, orders, frame)?,
                Mode::Rational => chart_json::<BigRational>(&f, &b, &p, orders, frame)?,
            };
            match r.format(Format::Json)? {
                Format::Json => json_text(&v)?,
                Format::Csv => return Err(Error::Config("dump-chart writes JSON only".into())),
            }
        }
    };
    let out = r.common_raw("out").unwrap_or_else(|| "-".into());
    let mut text = text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if out != "-" {
        std::fs::write(&out, &text).map_err(|e| Error::Config(format!("cannot write {out}: {e}")))?;
        return Ok(Output { text: String::new() });
    }
    Ok(Output { text })
}

/// JSON error object written to stderr.
pub fn error_json(e: &Error) -> String {
    json!({"error": e.kind(), "message": e.to_string()}).to_string()
}

/// Exit code for a failed run: configuration problems are usage errors.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args`, runs, writes the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    match execute(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}
