//! Command-line front end.
//!
//! Every subcommand reads one config file and writes its results into the
//! output directory, next to a copy of the resolved config. CSV files start
//! with `#` comment lines carrying the config hash; JSON reports carry the
//! same information in a leading `comment` field. Outputs depend only on the
//! resolved config and flags, never on timing or thread count, except for
//! `run-info.json` which records the wall-clock time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::analysis::{
    extract_effective_coupling, lambda_c_curve, phase_diagram, CriticalOptions, CrossingLocator, CrossingOptions,
    CrossingReport, InstabilityReport, ModelSpectrum,
};
use crate::config::{parse_config, Coupling, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::rendering_grid;
use crate::response::{intensity_profile, spectral_grid, GridAxis, Model, SpectralGrid, WeightMethod};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "polariton",
    version,
    about = "Floquet polariton spectra, poles and instabilities of a multimode cavity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Spectral matrix entry as `i,j`.
    #[arg(long, global = true, value_parser = parse_entry)]
    pub entry: Option<(usize, usize)>,
    #[arg(long, global = true, action = clap::ArgAction::Set)]
    pub renormalize: Option<bool>,
}

/// Mode-weight estimator selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightEstimator {
    /// Null-direction eigenvector of the inverse Green's function.
    Eigenvector,
    /// Normalized diagonal of the spectral function.
    Spectral,
}

impl WeightEstimator {
    fn method(self) -> WeightMethod {
        match self {
            WeightEstimator::Eigenvector => WeightMethod::Eigenvector,
            WeightEstimator::Spectral => WeightMethod::SpectralDiagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectral function over frequency at the configured coupling.
    Spectrum,
    /// Spectral map over frequency and (Lambda / Lambda_c)^2.
    SweepLambda,
    /// Spectral map over frequency and modulation depth at fixed (Lambda / Lambda_c)^2.
    SweepBm,
    /// Cavity-mode weights at selected frequencies.
    Weights {
        #[arg(long, value_enum, default_value_t = WeightEstimator::Eigenvector)]
        method: WeightEstimator,
    },
    /// Real-space intensity profiles at selected frequencies.
    Profile,
    /// All poles of the Green's function.
    Poles,
    /// Critical coupling against modulation depth, bare and renormalized.
    LambdaC,
    /// Leading instability kind over epsilon and modulation depth.
    PhaseDiagram,
    /// Effective couplings at the avoided crossings of each mode.
    Crossing,
    /// Cavity-atom overlap matrix.
    Overlaps,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::SweepLambda => "sweep-lambda",
            Command::SweepBm => "sweep-bm",
            Command::Weights { .. } => "weights",
            Command::Profile => "profile",
            Command::Poles => "poles",
            Command::LambdaC => "lambda-c",
            Command::PhaseDiagram => "phase-diagram",
            Command::Crossing => "crossing",
            Command::Overlaps => "overlaps",
        }
    }
}

fn parse_entry(s: &str) -> std::result::Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or_else(|| format!("expected i,j, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad index {t:?}: {e}"));
    Ok((parse(i)?, parse(j)?))
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let name = cli.command.name();
    let ctx = match prepare(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {name}: cannot start thread pool: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let start = Instant::now();
    match pool.install(|| execute(cli.command, &ctx)) {
        Ok(files) => {
            let info = json!({
                "command": name,
                "config_hash": ctx.hash,
                "version": VERSION,
                "wall_clock_seconds": start.elapsed().as_secs_f64(),
            });
            if let Err(e) = write_file(&ctx.out.join("run-info.json"), &pretty(&info)) {
                eprintln!("error: {name}: {e}");
                return EXIT_NUMERICAL;
            }
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {name}: {e}");
            EXIT_NUMERICAL
        }
    }
}

/// Everything a subcommand needs, validated before any heavy computation.
pub struct Context {
    pub config: RunConfig,
    pub model: Model,
    pub entry: (usize, usize),
    pub out: PathBuf,
    pub hash: String,
    pub command: &'static str,
}

fn prepare(cli: &Cli) -> Result<Context> {
    let path = cli.config.as_deref().ok_or(Error::Config {
        line: 0,
        msg: "--config is required".into(),
    })?;
    let mut config = parse_config(path)?;
    if let Some(r) = cli.renormalize {
        config.set_renormalize(r);
    }
    if let Some(out) = &cli.out {
        config.set_output_dir(out.clone());
    }
    let model = Model::new(config.spec.clone()).map_err(|e| Error::Config {
        line: 0,
        msg: e.to_string(),
    })?;
    let entry = cli.entry.unwrap_or((0, 0));
    let n = model.n_modes();
    if entry.0 >= n || entry.1 >= n {
        return Err(Error::Config {
            line: 0,
            msg: format!("--entry {},{} is outside {n} modes", entry.0, entry.1),
        });
    }
    let residual = config.spec.drive.cutoff_residual();
    if residual > crate::medium::CUTOFF_WARN_LEVEL {
        eprintln!("warning: |J| beyond alpha_max is {residual:e}; the sideband sum is not converged");
    }
    let out = config.output_dir().to_path_buf();
    config.write_sidecar(&out)?;
    let hash = config.hash();
    Ok(Context {
        config,
        model,
        entry,
        out,
        hash,
        command: cli.command.name(),
    })
}

/// Run one subcommand and return the files it wrote.
pub fn execute(command: Command, ctx: &Context) -> Result<Vec<PathBuf>> {
    match command {
        Command::Spectrum => spectrum(ctx),
        Command::SweepLambda => sweep_lambda(ctx),
        Command::SweepBm => sweep_bm(ctx),
        Command::Weights { method } => weights(ctx, method),
        Command::Profile => profile(ctx),
        Command::Poles => poles(ctx),
        Command::LambdaC => lambda_c(ctx),
        Command::PhaseDiagram => phase(ctx),
        Command::Crossing => crossing(ctx),
        Command::Overlaps => overlaps(ctx),
    }
}

impl Context {
    fn critical_options(&self) -> CriticalOptions {
        self.config.critical_options()
    }

    fn reference_lambda_c(&self) -> Result<f64> {
        self.config.reference_lambda_c(&self.model)
    }

    fn coupled(&self) -> Result<Model> {
        self.config.coupled_model(&self.model)
    }

    fn header(&self) -> String {
        format!("# polariton {VERSION} {}\n# config_hash {}\n", self.command, self.hash)
    }

    fn json_report(&self, tolerances: Value, result: Value) -> Value {
        json!({
            "comment": format!("polariton {VERSION} {} config_hash {}", self.command, self.hash),
            "artifact": { "name": "polariton", "version": VERSION },
            "command": self.command,
            "config_hash": self.hash,
            "config": serde_json::to_value(self.config.file()).expect("config serializes"),
            "entry": [self.entry.0, self.entry.1],
            "tolerances": tolerances,
            "result": result,
        })
    }

    fn emit(&self, file: &str, body: &str) -> Result<PathBuf> {
        let path = self.out.join(file);
        write_file(&path, body)?;
        Ok(path)
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body)?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

fn entry_columns((i, j): (usize, usize)) -> String {
    if i == j {
        format!("a{i}{j}")
    } else {
        format!("a{i}{j}_re,a{i}{j}_im")
    }
}

fn entry_values((i, j): (usize, usize), v: Complex64) -> String {
    if i == j {
        fmt_f64(v.re)
    } else {
        format!("{},{}", fmt_f64(v.re), fmt_f64(v.im))
    }
}

fn spectrum(ctx: &Context) -> Result<Vec<PathBuf>> {
    let model = ctx.coupled()?;
    let omegas = ctx.config.omega_range().values();
    let mut out = ctx.header();
    writeln!(out, "# lambda {}", fmt_f64(model.spec().lambda)).unwrap();
    let max_imag = model.find_poles()?.max_imag();
    if max_imag > 1e-10 {
        writeln!(out, "# warning unstable: leading pole Im = {}", fmt_f64(max_imag)).unwrap();
    }
    writeln!(out, "omega,{}", entry_columns(ctx.entry)).unwrap();
    for &w in &omegas {
        let v = model.spectral_entry(w, ctx.entry)?;
        writeln!(out, "{},{}", fmt_f64(w), entry_values(ctx.entry, v)).unwrap();
    }
    Ok(vec![ctx.emit("spectrum.csv", &out)?])
}

fn grid_csv(ctx: &Context, grid: &SpectralGrid, extra: &str) -> String {
    let mut out = ctx.header();
    out.push_str(extra);
    for (a, &x) in grid.axis_values.iter().enumerate() {
        writeln!(
            out,
            "# row {} {} lambda {}{}",
            a,
            fmt_f64(x),
            fmt_f64(grid.lambdas[a]),
            if grid.unstable[a] { " unstable" } else { "" }
        )
        .unwrap();
    }
    for f in &grid.failures {
        let w = f.omega_index.map(|w| w.to_string()).unwrap_or_else(|| "all".into());
        writeln!(out, "# failure row {} omega {} {}", f.axis_index, w, f.message).unwrap();
    }
    writeln!(out, "omega,{},{}", grid.axis_name, entry_columns(grid.entry)).unwrap();
    for (a, &x) in grid.axis_values.iter().enumerate() {
        for (w, &omega) in grid.omegas.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(omega),
                fmt_f64(x),
                entry_values(grid.entry, grid.get(a, w))
            )
            .unwrap();
        }
    }
    out
}

fn sweep_lambda(ctx: &Context) -> Result<Vec<PathBuf>> {
    let lambda_c = ctx.reference_lambda_c()?;
    let axis = GridAxis::LambdaRatioSq {
        values: ctx.config.lambda_ratio_range().values(),
        lambda_c,
    };
    let grid = spectral_grid(&ctx.config.spec, &axis, &ctx.config.omega_range().values(), ctx.entry);
    let extra = format!("# lambda_c {}\n", fmt_f64(lambda_c));
    Ok(vec![ctx.emit("sweep-lambda.csv", &grid_csv(ctx, &grid, &extra))?])
}

fn sweep_bm(ctx: &Context) -> Result<Vec<PathBuf>> {
    let Coupling::RatioSq(ratio_sq, _) = ctx.config.coupling else {
        return Err(Error::domain("sweep-bm", "needs [coupling] lambda_ratio_sq"));
    };
    let axis = GridAxis::ModulationDepth {
        values: ctx.config.b_m_range().values(),
        ratio_sq,
        critical: ctx.critical_options(),
    };
    let grid = spectral_grid(&ctx.config.spec, &axis, &ctx.config.omega_range().values(), ctx.entry);
    let extra = format!("# lambda_ratio_sq {}\n", fmt_f64(ratio_sq));
    Ok(vec![ctx.emit("sweep-bm.csv", &grid_csv(ctx, &grid, &extra))?])
}

/// Configured frequencies, or the positive bright poles when none are given.
fn selected_omegas(ctx: &Context, model: &Model) -> Result<Vec<f64>> {
    let given = &ctx.config.sweep().weights_omegas;
    if !given.is_empty() {
        return Ok(given.clone());
    }
    let mut w: Vec<f64> = model
        .find_poles()?
        .poles
        .iter()
        .filter(|p| !p.dark && p.omega.re > 0.0)
        .map(|p| p.omega.re)
        .collect();
    w.sort_by(f64::total_cmp);
    Ok(w)
}

fn weights(ctx: &Context, estimator: WeightEstimator) -> Result<Vec<PathBuf>> {
    let model = ctx.coupled()?;
    let n = model.n_modes();
    let mut out = ctx.header();
    writeln!(out, "# lambda {}", fmt_f64(model.spec().lambda)).unwrap();
    writeln!(out, "# method {}", estimator.to_possible_value().unwrap().get_name()).unwrap();
    let cols: Vec<String> = (0..n).map(|j| format!("w{j}")).collect();
    writeln!(out, "omega,eigenvalue_re,eigenvalue_im,{}", cols.join(",")).unwrap();
    for w in selected_omegas(ctx, &model)? {
        let mw = model.mode_weights(w, estimator.method())?;
        let ws: Vec<String> = mw.weights.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(w),
            fmt_f64(mw.eigenvalue.re),
            fmt_f64(mw.eigenvalue.im),
            ws.join(",")
        )
        .unwrap();
    }
    Ok(vec![ctx.emit("weights.csv", &out)?])
}

fn profile(ctx: &Context) -> Result<Vec<PathBuf>> {
    let model = ctx.coupled()?;
    let r = rendering_grid();
    let omegas = selected_omegas(ctx, &model)?;
    let mut columns = vec![intensity_profile(&[Complex64::new(1.0, 0.0)], &r)?];
    for &w in &omegas {
        columns.push(intensity_profile(
            &model.mode_weights(w, WeightMethod::Eigenvector)?.vector,
            &r,
        )?);
    }
    let mut out = ctx.header();
    writeln!(out, "# r in units of the cavity waist; r_q = r * w0 Q").unwrap();
    for (k, &w) in omegas.iter().enumerate() {
        writeln!(out, "# i{k} omega {}", fmt_f64(w)).unwrap();
    }
    let names: Vec<String> = (0..omegas.len()).map(|k| format!("i{k}")).collect();
    writeln!(
        out,
        "r,r_q,lg00{}{}",
        if names.is_empty() { "" } else { "," },
        names.join(",")
    )
    .unwrap();
    let w0_q = ctx.config.spec.geom.w0_over_q;
    for (i, &ri) in r.iter().enumerate() {
        let vals: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        writeln!(out, "{},{},{}", fmt_f64(ri), fmt_f64(ri * w0_q), vals.join(",")).unwrap();
    }
    Ok(vec![ctx.emit("profile.csv", &out)?])
}

fn poles(ctx: &Context) -> Result<Vec<PathBuf>> {
    let model = ctx.coupled()?;
    let set = model.find_poles()?;
    let list: Vec<Value> = set
        .poles
        .iter()
        .map(|p| json!({ "re": p.omega.re, "im": p.omega.im, "mode": p.mode, "dark": p.dark }))
        .collect();
    let result = json!({
        "lambda": set.lambda,
        "b_m": set.b_m,
        "epsilon": set.epsilon,
        "detunings": model.detunings(),
        "max_imag": set.max_imag(),
        "poles": list,
    });
    let tol = json!({ "newton_iterations": 30, "spurious_root_distance": 1e-6, "residue_step": 1e-7 });
    Ok(vec![ctx.emit("poles.json", &pretty(&ctx.json_report(tol, result)))?])
}

fn report_cells(r: &std::result::Result<InstabilityReport, String>) -> String {
    match r {
        Ok(rep) => format!(
            "{},{},{}",
            rep.kind.label(),
            rep.critical_lambda.map(fmt_f64).unwrap_or_else(|| "nan".into()),
            rep.unstable_pole
                .map(|p| fmt_f64(p.re.abs()))
                .unwrap_or_else(|| "nan".into())
        ),
        Err(_) => "error,nan,nan".into(),
    }
}

fn report_errors(out: &mut String, label: &str, r: &std::result::Result<InstabilityReport, String>) {
    if let Err(e) = r {
        writeln!(out, "# failure {label}: {e}").unwrap();
    }
}

fn lambda_c(ctx: &Context) -> Result<Vec<PathBuf>> {
    let b_ms = ctx.config.b_m_range().values();
    let curve = lambda_c_curve(&ctx.config.spec, &b_ms, &ctx.critical_options());
    let mut out = ctx.header();
    for p in &curve {
        report_errors(&mut out, &format!("b_m {} bare", fmt_f64(p.b_m)), &p.bare);
        report_errors(
            &mut out,
            &format!("b_m {} renormalized", fmt_f64(p.b_m)),
            &p.renormalized,
        );
    }
    writeln!(
        out,
        "b_m,kind_bare,lambda_c_bare,frequency_bare,kind_renormalized,lambda_c_renormalized,frequency_renormalized"
    )
    .unwrap();
    for p in &curve {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(p.b_m),
            report_cells(&p.bare),
            report_cells(&p.renormalized)
        )
        .unwrap();
    }
    Ok(vec![ctx.emit("lambda-c.csv", &out)?])
}

fn phase(ctx: &Context) -> Result<Vec<PathBuf>> {
    let eps = ctx.config.epsilon_range().values();
    let b_ms = ctx.config.b_m_range().values();
    let diagram = phase_diagram(&ctx.config.spec, &eps, &b_ms, &ctx.critical_options());
    let mut out = ctx.header();
    writeln!(out, "# frequency is |Re w| of the leading pole at threshold").unwrap();
    for c in &diagram.cells {
        report_errors(
            &mut out,
            &format!("epsilon {} b_m {}", fmt_f64(c.epsilon), fmt_f64(c.b_m)),
            &c.report,
        );
    }
    writeln!(out, "epsilon,b_m,kind,lambda_c,frequency").unwrap();
    for c in &diagram.cells {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(c.epsilon),
            fmt_f64(c.b_m),
            report_cells(&c.report)
        )
        .unwrap();
    }
    Ok(vec![ctx.emit("phase-diagram.csv", &out)?])
}

fn crossing_json(r: Result<CrossingReport>) -> Value {
    match r {
        Ok(c) => json!({
            "lambda_ratio_sq": c.control,
            "g_eff": c.g_eff,
            "g_corrected": c.g_corrected,
            "peak_positions": [c.peak_positions.0, c.peak_positions.1],
            "peak_heights": [c.peak_heights.0, c.peak_heights.1],
            "height_mismatch": c.height_mismatch,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn crossing(ctx: &Context) -> Result<Vec<PathBuf>> {
    let lambda_c = ctx.reference_lambda_c()?;
    let kappa = ctx.config.spec.kappa;
    let window = ctx.config.sweep().crossing_window_kappa * kappa;
    let omegas = ctx.config.omega_range().values();
    let sweep = ctx.config.lambda_ratio_range().values();
    let detunings = ctx.model.detunings().to_vec();
    let mut found = Vec::new();
    for (j, &d) in detunings.iter().enumerate().skip(1) {
        let source = ModelSpectrum {
            model: &ctx.model,
            lambda_c,
            entry: j,
        };
        let mut opts = CrossingOptions::new(omegas.clone(), sweep.clone(), d, window, kappa);
        opts.control_tol = 1e-6;
        let eq = extract_effective_coupling(&source, CrossingLocator::EqualHeights, &opts);
        let min = extract_effective_coupling(&source, CrossingLocator::MinimumSplitting, &opts);
        found.push(json!({
            "mode": j,
            "detuning": d,
            "entry": [j, j],
            "equal_heights": crossing_json(eq),
            "minimum_splitting": crossing_json(min),
        }));
    }
    let result = json!({ "lambda_c": lambda_c, "kappa": kappa, "crossings": found });
    let tol = json!({ "height_tol": 0.02, "control_tol": 1e-6, "prominence": crate::analysis::DEFAULT_PROMINENCE });
    Ok(vec![ctx.emit("crossing.json", &pretty(&ctx.json_report(tol, result)))?])
}

fn overlaps(ctx: &Context) -> Result<Vec<PathBuf>> {
    let m = ctx.model.overlaps();
    let mut out = ctx.header();
    let cols: Vec<String> = (0..m.n_atom()).map(|n| format!("n{n}")).collect();
    writeln!(out, "j,{}", cols.join(",")).unwrap();
    for j in 0..m.n_cavity() {
        let row: Vec<String> = (0..m.n_atom()).map(|n| fmt_f64(m.get(j, n))).collect();
        writeln!(out, "{j},{}", row.join(",")).unwrap();
    }
    Ok(vec![ctx.emit("overlaps.csv", &out)?])
}
