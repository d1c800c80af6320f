//! Batch front end over the core pipeline.
//!
//! Exit codes: 0 success, 1 check failure, 2 configuration or input error, 3 runtime or solver error.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use faid_core::em::FomValue;
use faid_core::faid::{Evaluation, FaidError, GradientResult, Pipeline, Stencil};
use faid_core::geometry::{contour_polygons, param_hash, DensityGrid};
use faid_core::io::{field_to_text, read_density, write_atomic, write_density};
use faid_core::litho::{LithoError, LithoModel};
use faid_core::optim::{run_campaign, run_single, trace_csv, RunMode, RunTrace, Termination};

pub use config::{LithoSpec, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<FaidError> for CliError {
    fn from(e: FaidError) -> Self {
        fn is_input(e: &FaidError) -> bool {
            match e {
                FaidError::Geometry(_) | FaidError::Config(_) => true,
                FaidError::Litho(LithoError::NonDifferentiableModel(_) | LithoError::Config(_)) => true,
                FaidError::Parameter { source, .. } => is_input(source),
                _ => false,
            }
        }
        if is_input(&e) {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "faid", version, about = "Fabrication-aware inverse design of 2D photonic devices")]
pub struct Cli {
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `run.threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Id,
    Faid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Ideal,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Chain,
    Numeric,
    Brute,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single optimization run against the ideal (id) or predicted (faid) geometry.
    Optimize {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Paired ID and FAID runs with a four-column loss report.
    Compare,
    /// Loss of a design (or of a density grid) per wavelength.
    Evaluate {
        /// Parameter CSV; defaults to the device's initial parameters.
        #[arg(long, conflicts_with = "density")]
        params: Option<PathBuf>,
        /// Already predicted density grid, simulated as is.
        #[arg(long)]
        density: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "model")]
        litho: Route,
        /// Also write the forward field at each wavelength.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Litho prediction of a mask density grid.
    Predict {
        #[arg(long)]
        mask: PathBuf,
        /// Also write the 0.5-level contour polygons.
        #[arg(long)]
        contour: bool,
    },
    /// Compare two gradient routes; exit 1 when they disagree beyond `gradcheck.threshold`.
    Gradcheck {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, value_enum, default_value = "brute")]
        against: Method,
        /// Parameter CSV; defaults to the device's initial parameters.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with(args, None)
}

/// As [`run`], with the configured litho model replaced by `litho` when given.
pub fn run_with<I, S>(args: I, litho: Option<Arc<dyn LithoModel<f64>>>) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, litho) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("faid: {e}");
            e.exit_code()
        }
    }
}

/// Loaded configuration plus the pipeline it describes.
pub struct Session {
    pub config: RunConfig,
    pub pipeline: Pipeline<f64>,
    pub fingerprint: String,
    pub out_dir: PathBuf,
}

impl Session {
    pub fn new(mut config: RunConfig, cli: &Cli, litho: Option<Arc<dyn LithoModel<f64>>>) -> Result<Self, CliError> {
        if let Some(d) = &cli.out_dir {
            config.out_dir = d.clone();
        }
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(t) = cli.threads {
            if t == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            config.threads = t;
        }
        std::fs::create_dir_all(&config.out_dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", config.out_dir.display())))?;
        let litho = match litho {
            Some(l) => l,
            None => config.litho_model()?,
        };
        let mut pipeline = Pipeline::new(
            config.device.clone(),
            config.dx,
            litho,
            config.materials,
            config.wavelengths.clone(),
            config.pml,
        )?;
        pipeline.threads = config.threads;
        Ok(Self { fingerprint: config.fingerprint(), out_dir: config.out_dir.clone(), config, pipeline })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn write_grid(&self, name: &str, rho: &DensityGrid<f64>) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        write_density(&path, rho, self.config.binary)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn header(&self) -> String {
        format!("# fingerprint={}\n", self.fingerprint)
    }

    /// Parameters from a CSV written by this tool (or one value per line), else the initial point.
    fn params(&self, path: Option<&Path>) -> Result<Vec<f64>, CliError> {
        let p0 = self.pipeline.device.initial_params();
        let Some(path) = path else {
            return Ok(p0.values().to_vec());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read params {}: {e}", path.display())))?;
        let p = parse_params(&text).map_err(|m| CliError::Input(format!("{}: {m}", path.display())))?;
        if p.len() != p0.len() {
            return Err(CliError::Input(format!(
                "{}: {} parameters, device expects {}",
                path.display(),
                p.len(),
                p0.len()
            )));
        }
        Ok(p)
    }

    fn params_csv(&self, p: &[f64]) -> String {
        let p0 = self.pipeline.device.initial_params();
        let mut s = self.header();
        s.push_str("index,value,lower,upper\n");
        for (i, v) in p.iter().enumerate() {
            let _ = writeln!(s, "{i},{v},{},{}", p0.lower()[i], p0.upper()[i]);
        }
        s
    }

    /// Design files of a finished run.
    fn write_design(&self, tag: &str, p: &[f64]) -> Result<(), CliError> {
        let polys = self.pipeline.device.polygons(p).map_err(FaidError::from)?;
        self.write(&format!("design_{tag}.txt"), &polys.to_text(self.pipeline.device.kind().as_str(), &param_hash(p)))?;
        self.write(&format!("params_{tag}.csv"), &self.params_csv(p))?;
        self.write_grid(&format!("mask_{tag}.fdg"), &self.pipeline.mask(p)?)?;
        Ok(())
    }
}

/// Reads `index,value,...` rows (header and `#` lines skipped) or bare values.
pub fn parse_params(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let field = if cols.len() >= 2 { cols[1] } else { cols[0] };
        out.push(field.parse::<f64>().map_err(|_| format!("line {}: cannot parse `{field}`", n + 1))?);
    }
    Ok(out)
}

fn execute(cli: &Cli, litho: Option<Arc<dyn LithoModel<f64>>>) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let session = Session::new(RunConfig::load(path)?, cli, litho)?;
    log::info!("config fingerprint {}", session.fingerprint);
    match &cli.command {
        Command::Optimize { mode } => optimize(&session, *mode),
        Command::Compare => compare(&session),
        Command::Evaluate { params, density, litho, dump_fields } => {
            evaluate(&session, params.as_deref(), density.as_deref(), *litho, *dump_fields)
        }
        Command::Predict { mask, contour } => predict(&session, mask, *contour),
        Command::Gradcheck { method, against, params } => gradcheck(&session, *method, *against, params.as_deref()),
    }
}

fn termination_str(t: &Termination) -> &'static str {
    match t {
        Termination::GradientTolerance => "gradient_tolerance",
        Termination::MaxIterations => "max_iterations",
        Termination::LineSearchFailed => "line_search_failed",
        Termination::ObjectiveFailed(_) => "objective_failed",
    }
}

fn optimize(s: &Session, mode: Mode) -> Result<(), CliError> {
    let (run_mode, tag) = match mode {
        Mode::Id => (RunMode::Id, "id"),
        Mode::Faid => (RunMode::Faid, "faid"),
    };
    let p0 = s.pipeline.device.initial_params();
    let trace = run_single(&s.pipeline, &p0, &s.config.optimizer, run_mode, s.config.perturbation)?;
    s.write(&format!("trace_{tag}.csv"), &trace_csv(&trace, &s.fingerprint))?;
    s.write_design(tag, &trace.final_p)?;
    let last = trace.records.last().expect("a successful run records its start");
    let mut summary = s.header();
    summary.push_str("mode,ideal_loss_db,predicted_loss_db,iterations,termination,em_solves\n");
    let _ = writeln!(
        summary,
        "{tag},{},{},{},{},{}",
        last.ideal_fom.insertion_loss_db,
        last.predicted_fom.insertion_loss_db,
        last.iteration,
        termination_str(&trace.termination),
        last.em_solves
    );
    s.write(&format!("summary_{tag}.csv"), &summary)?;
    println!(
        "{tag}: ideal {:.4} dB, predicted {:.4} dB after {} iterations ({})",
        last.ideal_fom.insertion_loss_db,
        last.predicted_fom.insertion_loss_db,
        last.iteration,
        termination_str(&trace.termination)
    );
    failed_run(&trace)
}

fn failed_run(trace: &RunTrace<f64>) -> Result<(), CliError> {
    match &trace.termination {
        Termination::ObjectiveFailed(m) => Err(CliError::Runtime(format!("optimization stopped early: {m}"))),
        _ => Ok(()),
    }
}

fn compare(s: &Session) -> Result<(), CliError> {
    let p0 = s.pipeline.device.initial_params();
    let c = run_campaign(&s.pipeline, &p0, &s.config.optimizer, s.config.perturbation)?;
    s.write("trace_id.csv", &trace_csv(&c.id_run, &s.fingerprint))?;
    s.write("trace_faid.csv", &trace_csv(&c.faid_run, &s.fingerprint))?;
    s.write_design("id", &c.id_run.final_p)?;
    s.write_design("faid", &c.faid_run.final_p)?;
    let mut report = s.header();
    report.push_str("id_ideal_db,id_predicted_db,faid_predicted_db,faid_ideal_db\n");
    let _ = writeln!(
        report,
        "{},{},{},{}",
        c.id_final.ideal.insertion_loss_db,
        c.id_final.predicted.insertion_loss_db,
        c.faid_final.predicted.insertion_loss_db,
        c.faid_final.ideal.insertion_loss_db
    );
    s.write("report.csv", &report)?;
    println!("{:>12} {:>14} {:>16} {:>14}", "ID (ideal)", "ID (predicted)", "FAID (predicted)", "FAID (ideal)");
    println!(
        "{:>12.4} {:>14.4} {:>16.4} {:>14.4}",
        c.id_final.ideal.insertion_loss_db,
        c.id_final.predicted.insertion_loss_db,
        c.faid_final.predicted.insertion_loss_db,
        c.faid_final.ideal.insertion_loss_db
    );
    failed_run(&c.id_run)?;
    failed_run(&c.faid_run)
}

fn evaluate(s: &Session, params: Option<&Path>, density: Option<&Path>, route: Route, dump: bool) -> Result<(), CliError> {
    let pipe = match route {
        Route::Ideal => s.pipeline.ideal(),
        Route::Model => s.pipeline.clone(),
    };
    let (tag, rho) = match density {
        Some(path) => {
            let rho: DensityGrid<f64> =
                read_density(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if !rho.grid.same_shape(&pipe.grid) {
                return Err(CliError::Input(format!(
                    "{}: {}x{} grid, device grid is {}x{}",
                    path.display(),
                    rho.grid.nx,
                    rho.grid.ny,
                    pipe.grid.nx,
                    pipe.grid.ny
                )));
            }
            ("density", rho)
        }
        None => {
            let p = s.params(params)?;
            let tag = match route {
                Route::Ideal => "ideal",
                Route::Model => "model",
            };
            (tag, pipe.predicted(&p)?.1)
        }
    };
    let Evaluation { fom, per_wavelength } = pipe.evaluate_density(&rho)?;
    let mut csv = s.header();
    csv.push_str("wavelength_um,transmission,loss_db\n");
    for (wl, f) in s.config.wavelengths.iter().zip(&per_wavelength) {
        let _ = writeln!(csv, "{wl},{},{}", f.transmission, f.insertion_loss_db);
    }
    s.write(&format!("evaluate_{tag}.csv"), &csv)?;
    let mut summary = s.header();
    summary.push_str("route,transmission,loss_db\n");
    let _ = writeln!(summary, "{tag},{},{}", fom.transmission, fom.insertion_loss_db);
    s.write(&format!("evaluate_{tag}_summary.csv"), &summary)?;
    if dump {
        for (k, x) in pipe.forward_fields(&rho)?.iter().enumerate() {
            s.write(&format!("field_{tag}_{k}.txt"), &field_to_text(x))?;
        }
    }
    print_fom(tag, &fom);
    Ok(())
}

fn print_fom(tag: &str, f: &FomValue<f64>) {
    println!("{tag}: transmission {:.6}, loss {:.6} dB", f.transmission, f.insertion_loss_db);
}

fn predict(s: &Session, mask: &Path, contour: bool) -> Result<(), CliError> {
    let m: DensityGrid<f64> = read_density(mask).map_err(|e| CliError::Input(format!("{}: {e}", mask.display())))?;
    let pred = s.pipeline.litho.predict(&m).map_err(|e| match e {
        LithoError::Config(_) | LithoError::Shape { .. } => CliError::Input(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    })?;
    let out = s.write_grid("predicted.fdg", &pred)?;
    if contour {
        s.write("predicted_contour.txt", &contour_polygons(&pred, 0.5).to_text("predicted", "-"))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn gradient(s: &Session, method: Method, p: &[f64]) -> Result<GradientResult<f64>, CliError> {
    let h = s.config.perturbation;
    if method == Method::Brute && p.len() > 60 {
        return Err(CliError::Config(format!("brute-force gradcheck allows at most 60 parameters, device has {}", p.len())));
    }
    Ok(match method {
        Method::Chain => s.pipeline.grad_chain_rule(p)?,
        Method::Numeric => s.pipeline.grad_numeric_perturbation(p, h, Stencil::Central)?,
        Method::Brute => s.pipeline.grad_brute_force(p, h)?,
    })
}

fn method_str(m: Method) -> &'static str {
    match m {
        Method::Chain => "chain",
        Method::Numeric => "numeric",
        Method::Brute => "brute",
    }
}

/// Max relative error over components at least `floor` of the reference's largest magnitude.
pub fn max_relative_error(got: &[f64], reference: &[f64], floor: f64) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    got.iter()
        .zip(reference)
        .filter(|(_, r)| r.abs() >= floor * scale && r.abs() > 0.0)
        .map(|(g, r)| (g - r).abs() / r.abs())
        .fold(0.0, f64::max)
}

fn gradcheck(s: &Session, method: Method, against: Method, params: Option<&Path>) -> Result<(), CliError> {
    let p = s.params(params)?;
    let a = gradient(s, method, &p)?;
    let b = gradient(s, against, &p)?;
    let (ma, mb) = (method_str(method), method_str(against));
    let mut csv = s.header();
    let _ = writeln!(csv, "index,{ma},{mb},rel_err");
    for (i, (x, y)) in a.grad.iter().zip(&b.grad).enumerate() {
        let rel = if *y != 0.0 { (x - y).abs() / y.abs() } else { f64::NAN };
        let _ = writeln!(csv, "{i},{x},{y},{rel}");
    }
    s.write(&format!("gradcheck_{ma}_vs_{mb}.csv"), &csv)?;
    let err = max_relative_error(&a.grad, &b.grad, s.config.gradcheck_floor);
    let mut summary = s.header();
    summary.push_str("method,against,max_rel_err,threshold,solves_method,solves_against\n");
    let _ = writeln!(summary, "{ma},{mb},{err},{},{},{}", s.config.gradcheck_threshold, a.em_solves, b.em_solves);
    s.write(&format!("gradcheck_{ma}_vs_{mb}_summary.csv"), &summary)?;
    println!("{ma} vs {mb}: max relative error {err:.3e} (threshold {:.1e})", s.config.gradcheck_threshold);
    if !(err < s.config.gradcheck_threshold) {
        return Err(CliError::CheckFailed(format!(
            "{ma} vs {mb} max relative error {err:.3e} exceeds {:.1e}",
            s.config.gradcheck_threshold
        )));
    }
    Ok(())
}
