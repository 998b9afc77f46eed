//! `typesize` — Type Size coding and finite-blocklength rate analysis.

mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use typesize::container::{Container, ContainerMode};
use typesize::markov::{
    entropy_rate, markov_eps_rate, markov_third_order_fit, markov_type_index, varentropy_rate, MarkovCodec,
};
use typesize::point::derive_lattice;
use typesize::rate::{
    gaussian_qinv, m_eps_of, ml_approx_check, normality_check, size_deviation, stream_class_masses, third_order_fit,
    ClassMode, ThirdOrderFit,
};
use typesize::specfile::{format_symbols, load_spec, parse_symbols, SpecDocument};
use typesize::{
    Error, GridParams, LatticeMap, ParamVector, RateReport, SourceSpec, TypeSizeCodec, DEFAULT_COMPOSITION_BUDGET,
    DEFAULT_PATH_BUDGET,
};

use output::{hex, write_atomic, Report};

/// Samples per blocklength in the normality part of `check`.
const CHECK_SAMPLES: usize = 10_000;
const DEFAULT_FIT_GRID: [u32; 7] = [16, 32, 64, 128, 256, 512, 1024];
const DEFAULT_CHECK_GRID: [u32; 4] = [8, 16, 32, 64];

#[derive(Parser)]
#[command(name = "typesize", version, about = "Type Size coding for exponential families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec file and print its derived quantities.
    Validate(Common),
    /// Encode a symbol file (whitespace-separated, 1-based) into a container.
    Encode {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Decode a container back into a symbol file.
    Decode {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Exact M(ε) and ε-rate at one blocklength.
    Rate(Common),
    /// Third-order fit over a grid of blocklengths; writes an SVG plot.
    Fit(Common),
    /// Likelihood-approximation, type-size and normality checks.
    Check(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Quantized,
    Point,
    Markov,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Cuboid side scale; cuboids have side s/n.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Cuboid anchor, comma separated (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    anchor: Option<Vec<f64>>,
    #[arg(long)]
    n: Option<u32>,
    /// Blocklengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_COMPOSITION_BUDGET)]
    budget_compositions: u64,
    #[arg(long, default_value_t = DEFAULT_PATH_BUDGET)]
    budget_paths: u64,
    /// Output file (encode/decode) or report directory (other commands).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => 1,
            Error::Schema(_) => 2,
            Error::Spec(_) | Error::Domain(_) => 3,
            Error::Resource { .. } => 4,
            Error::Corrupt(_) => 5,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::from(Error::Io(e))
    }
}

fn schema(problems: Vec<String>) -> Failure {
    Failure {
        code: 2,
        message: format!("invalid configuration:\n  {}", problems.join("\n  ")),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Validated run configuration.
struct RunConfig {
    doc: SpecDocument,
    mode: Mode,
    params: GridParams,
    n: Option<u32>,
    n_grid: Vec<u32>,
    epsilon: f64,
    seed: u64,
    budget_compositions: u64,
    budget_paths: u64,
    out: Option<PathBuf>,
    lattice: Option<LatticeMap>,
}

enum Need {
    Nothing,
    N,
    Grid(&'static [u32]),
    Theta,
}

impl RunConfig {
    /// Loads the spec and checks every field, reporting all problems at once.
    fn load(c: &Common, needs: &[Need]) -> CliResult<Self> {
        let doc = load_spec(&c.spec)?;
        let d = doc.d();
        let mut problems = Vec::new();
        let mode = match (c.mode, doc.markov().is_some()) {
            (None, true) => Mode::Markov,
            (None, false) => Mode::Quantized,
            (Some(Mode::Markov), false) => {
                problems.push("--mode markov needs a spec with tau2 and x0".to_string());
                Mode::Markov
            }
            (Some(m), true) if m != Mode::Markov => {
                problems.push("a Markov spec only supports --mode markov".to_string());
                m
            }
            (Some(m), _) => m,
        };
        if mode == Mode::Point && doc.exact().is_none() {
            problems.push("--mode point needs an [exact] block in the spec".to_string());
        }
        if !(c.s.is_finite() && c.s > 0.0) {
            problems.push(format!("--s must be positive and finite, got {}", c.s));
        }
        let anchor = c.anchor.clone().unwrap_or_else(|| vec![0.0; d]);
        if anchor.len() != d {
            problems.push(format!("--anchor has {} values, expected d = {d}", anchor.len()));
        }
        if anchor.iter().any(|a| !a.is_finite()) {
            problems.push("--anchor values must be finite".to_string());
        }
        if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
            problems.push(format!("--epsilon must lie in (0, 1), got {}", c.epsilon));
        }
        if c.n == Some(0) {
            problems.push("--n must be positive".to_string());
        }
        let mut n_grid = c.n_grid.clone().unwrap_or_default();
        for need in needs {
            match need {
                Need::N if c.n.is_none() => problems.push("--n is required".to_string()),
                Need::Grid(default) => {
                    if n_grid.is_empty() {
                        n_grid = default.to_vec();
                    }
                    if n_grid.first() == Some(&0) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
                        problems.push("--n-grid must be positive and strictly increasing".to_string());
                    }
                }
                Need::Theta if doc.theta_star.is_none() => {
                    problems.push("the spec needs theta_star for this command".to_string())
                }
                _ => {}
            }
        }
        if !problems.is_empty() {
            return Err(schema(problems));
        }
        let lattice = match (mode, doc.family(), doc.exact()) {
            (Mode::Point, Some(fam), Some(exact)) => Some(derive_lattice(exact, fam)?),
            _ => None,
        };
        Ok(RunConfig {
            mode,
            params: GridParams { s: c.s, anchor },
            n: c.n,
            n_grid,
            epsilon: c.epsilon,
            seed: c.seed,
            budget_compositions: c.budget_compositions,
            budget_paths: c.budget_paths,
            out: c.out.clone(),
            lattice,
            doc,
        })
    }

    fn theta(&self) -> CliResult<ParamVector> {
        Ok(self.doc.theta_param()?.expect("checked when loading"))
    }

    fn source(&self) -> CliResult<SourceSpec> {
        let fam = self.doc.family().expect("i.i.d. mode").clone();
        Ok(SourceSpec::new(fam, self.theta()?)?)
    }

    fn class_mode(&self) -> ClassMode {
        match &self.lattice {
            Some(l) => ClassMode::Point(l.clone()),
            None => ClassMode::Quantized(self.params.clone()),
        }
    }

    fn mode_name(&self) -> &'static str {
        match self.mode {
            Mode::Quantized => "quantized",
            Mode::Point => "point",
            Mode::Markov => "markov",
        }
    }

    fn base_report(&self, command: &str) -> Report {
        let mut r = Report::new(command);
        r.set("spec_hash", hex(&self.doc.hash()));
        r.set("mode", self.mode_name());
        r.set("alphabet_size", self.doc.alphabet_size());
        r.set("d", self.doc.d());
        if self.mode != Mode::Point {
            r.set("s", self.params.s);
            r.set("anchor", join(&self.params.anchor));
        }
        r
    }

    /// Writes `<command>.txt` (and extra files) into `--out` if given.
    fn emit(&self, command: &str, report: &Report, extra: &[(&str, String)]) -> CliResult<()> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
            write_atomic(&dir.join(format!("{command}.txt")), report.render().as_bytes())?;
            for (name, body) in extra {
                write_atomic(&dir.join(name), body.as_bytes())?;
            }
        }
        Ok(())
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("typesize: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Validate(c) => cmd_validate(&c),
        Command::Encode { common, input } => cmd_encode(&common, &input),
        Command::Decode { common, input } => cmd_decode(&common, &input),
        Command::Rate(c) => cmd_rate(&c),
        Command::Fit(c) => cmd_fit(&c),
        Command::Check(c) => cmd_check(&c),
    }
}

fn cmd_validate(c: &Common) -> CliResult<()> {
    let cfg = RunConfig::load(c, &[Need::Nothing])?;
    let mut r = Report::new("validate");
    r.set("spec_hash", hex(&cfg.doc.hash()));
    r.set("model", if cfg.doc.markov().is_some() { "markov" } else { "iid" });
    r.set("alphabet_size", cfg.doc.alphabet_size());
    r.set("d", cfg.doc.d());
    if let Some(fam) = cfg.doc.family() {
        r.set("rho_max", fam.rho_max());
        r.set("kappa", fam.kappa());
        if let Some(exact) = cfg.doc.exact() {
            let lm = derive_lattice(exact, fam)?;
            r.set("d_prime", lm.d_prime());
            for (i, msg) in lm.diagnostics().iter().enumerate() {
                r.set(format!("diagnostic.{i}"), msg);
            }
        }
    }
    if let Some(m) = cfg.doc.markov() {
        r.set("rho_max", m.rho_max());
        r.set("x0", m.x0() + 1);
    }
    if let Some(theta) = cfg.doc.theta_param()? {
        r.set("theta_star", join(theta.as_slice()));
    }
    print!("{}", r.render());
    cfg.emit("validate", &r, &[])
}

fn read_text(path: &Path) -> CliResult<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn cmd_encode(c: &Common, input: &Path) -> CliResult<()> {
    let cfg = RunConfig::load(c, &[Need::Nothing])?;
    let Some(out) = &cfg.out else {
        return Err(schema(vec!["--out is required".to_string()]));
    };
    let seq = parse_symbols(&read_text(input)?, cfg.doc.alphabet_size())?;
    if seq.is_empty() {
        return Err(Failure::from(Error::Domain("the input holds no symbols".to_string())));
    }
    let n = u32::try_from(seq.len()).map_err(|_| Failure::from(Error::Domain("input too long".to_string())))?;
    let grid = cfg.params.at(n)?;
    let (mode, codeword, x0, s, anchor) = match cfg.mode {
        Mode::Markov => {
            let mspec = cfg.doc.markov().expect("markov spec").clone();
            let x0 = mspec.x0() as u32;
            let codec = MarkovCodec::new(mspec, &grid, cfg.budget_paths)?;
            (ContainerMode::Markov, codec.encode(&seq)?, Some(x0), cfg.params.s, cfg.params.anchor.clone())
        }
        Mode::Quantized => {
            let fam = cfg.doc.family().expect("i.i.d. spec").clone();
            let codec = TypeSizeCodec::quantized(fam, &grid, cfg.budget_compositions)?;
            (ContainerMode::Quantized, codec.encode(&seq)?, None, cfg.params.s, cfg.params.anchor.clone())
        }
        Mode::Point => {
            let fam = cfg.doc.family().expect("i.i.d. spec").clone();
            let lm = cfg.lattice.as_ref().expect("lattice for point mode");
            let codec = TypeSizeCodec::point(fam, lm, n, cfg.budget_compositions)?;
            (ContainerMode::Point, codec.encode(&seq)?, None, 0.0, vec![0.0; cfg.doc.d()])
        }
    };
    let bits = codeword.len();
    let container = Container {
        spec_hash: cfg.doc.hash(),
        mode,
        s,
        anchor,
        x0,
        n,
        codeword,
    };
    write_atomic(out, &container.to_bytes())?;
    println!("encoded n={n} symbols into {bits} bits ({})", mode.name());
    Ok(())
}

fn cmd_decode(c: &Common, input: &Path) -> CliResult<()> {
    let cfg = RunConfig::load(c, &[Need::Nothing])?;
    let Some(out) = &cfg.out else {
        return Err(schema(vec!["--out is required".to_string()]));
    };
    let bytes = std::fs::read(input)?;
    let container = Container::from_bytes(&bytes, cfg.doc.d())?;
    container.check_spec(&cfg.doc.hash())?;
    let n = container.n;
    let seq = match container.mode {
        ContainerMode::Markov => {
            let mspec = cfg.doc.markov().ok_or_else(|| corrupt("container is Markov but the spec is i.i.d."))?.clone();
            if container.x0 != Some(mspec.x0() as u32) {
                return Err(corrupt("container x0 differs from the spec"));
            }
            let grid = typesize::Grid::new(n, container.s, container.anchor.clone())?;
            MarkovCodec::new(mspec, &grid, cfg.budget_paths)?.decode(&container.codeword)?
        }
        ContainerMode::Quantized => {
            let fam = cfg.doc.family().ok_or_else(|| corrupt("container is i.i.d. but the spec is Markov"))?.clone();
            let grid = typesize::Grid::new(n, container.s, container.anchor.clone())?;
            TypeSizeCodec::quantized(fam, &grid, cfg.budget_compositions)?.decode(&container.codeword)?
        }
        ContainerMode::Point => {
            let fam = cfg.doc.family().ok_or_else(|| corrupt("container is i.i.d. but the spec is Markov"))?.clone();
            let exact = cfg.doc.exact().ok_or_else(|| corrupt("point container needs an [exact] block in the spec"))?;
            let lm = derive_lattice(exact, &fam)?;
            TypeSizeCodec::point(fam, &lm, n, cfg.budget_compositions)?.decode(&container.codeword)?
        }
    };
    write_atomic(out, format_symbols(&seq).as_bytes())?;
    println!("decoded n={n} symbols ({})", container.mode.name());
    Ok(())
}

fn corrupt(msg: &str) -> Failure {
    Failure::from(Error::Corrupt(msg.to_string()))
}

fn rate_lines(r: &mut Report, report: &RateReport) {
    r.set("n", report.n);
    r.set("epsilon", report.epsilon);
    r.set("gamma", report.gamma);
    r.set("m", &report.m);
    r.set("ceil_log2_m", report.ceil_log2_m);
    r.set("rate", report.rate);
    r.set("overflow", report.overflow);
}

fn cmd_rate(c: &Common) -> CliResult<()> {
    let cfg = RunConfig::load(c, &[Need::N, Need::Theta])?;
    let n = cfg.n.expect("checked");
    let theta = cfg.theta()?;
    let (report, h, v) = match cfg.mode {
        Mode::Markov => {
            let mspec = cfg.doc.markov().expect("markov spec");
            let index = markov_type_index(mspec, &cfg.params.at(n)?, cfg.budget_paths)?;
            let report = markov_eps_rate(mspec, &theta, &index, cfg.epsilon)?;
            (report, entropy_rate(mspec, &theta)?, varentropy_rate(mspec, &theta)?)
        }
        _ => {
            let source = cfg.source()?;
            let mode = cfg.class_mode();
            let masses = stream_class_masses(&source, &mode, n, cfg.budget_compositions)?;
            (m_eps_of(&masses, n, cfg.epsilon, mode.name())?, source.entropy(), source.varentropy())
        }
    };
    let normal = h + (v / n as f64).sqrt() * gaussian_qinv(cfg.epsilon)?;
    let mut r = cfg.base_report("rate");
    rate_lines(&mut r, &report);
    r.set("entropy", h);
    r.set("varentropy", v);
    r.set("normal_approximation", normal);

    println!("{:>6} {:>8} {:>14} {:>6} {:>10} {:>10} {:>12}", "n", "eps", "M", "bits", "rate", "H", "H+σQ⁻¹/√n");
    println!(
        "{:>6} {:>8} {:>14} {:>6} {:>10.6} {:>10.6} {:>12.6}",
        n, cfg.epsilon, report.m, report.ceil_log2_m, report.rate, h, normal
    );
    cfg.emit("rate", &r, &[])
}

fn cmd_fit(c: &Common) -> CliResult<()> {
    let cfg = RunConfig::load(c, &[Need::Grid(&DEFAULT_FIT_GRID), Need::Theta])?;
    let theta = cfg.theta()?;
    let (fit, expected): (ThirdOrderFit, f64) = match cfg.mode {
        Mode::Markov => {
            let mspec = cfg.doc.markov().expect("markov spec");
            let fit = markov_third_order_fit(mspec, &theta, &cfg.params, &cfg.n_grid, cfg.epsilon, cfg.budget_paths)?;
            (fit, mspec.d() as f64 / 2.0 - 1.0)
        }
        _ => {
            let source = cfg.source()?;
            let dim = match &cfg.lattice {
                Some(l) => l.d_prime(),
                None => cfg.doc.d(),
            };
            let fit = third_order_fit(&source, &cfg.class_mode(), &cfg.n_grid, cfg.epsilon, cfg.budget_compositions)?;
            (fit, dim as f64 / 2.0 - 1.0)
        }
    };
    let mut r = cfg.base_report("fit");
    r.set("epsilon", cfg.epsilon);
    r.set("n_grid", cfg.n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    r.set("slope", fit.slope);
    r.set("intercept", fit.intercept);
    r.set("expected_slope", expected);
    println!("{:>6} {:>14} {:>10} {:>10}", "n", "ceil log2 M", "y", "residual");
    for (p, res) in fit.points.iter().zip(&fit.residuals) {
        r.set(format!("ceil_log2_m.{}", p.n), p.report.ceil_log2_m);
        r.set(format!("y.{}", p.n), p.y);
        r.set(format!("residual.{}", p.n), res);
        println!("{:>6} {:>14} {:>10.4} {:>10.4}", p.n, p.report.ceil_log2_m, p.y, res);
    }
    println!("slope = {:.4} (expected {expected})", fit.slope);
    let xs: Vec<f64> = fit.points.iter().map(|p| (p.n as f64).log2()).collect();
    let ys: Vec<f64> = fit.points.iter().map(|p| p.y).collect();
    let chart = svg::fit_chart(
        &format!("third-order fit, {} mode, eps = {}", cfg.mode_name(), cfg.epsilon),
        &xs,
        &ys,
        fit.slope,
        fit.intercept,
    );
    cfg.emit("fit", &r, &[("fit.svg", chart)])
}

fn cmd_check(c: &Common) -> CliResult<()> {
    let cfg = RunConfig::load(c, &[Need::Grid(&DEFAULT_CHECK_GRID), Need::Theta])?;
    if cfg.mode != Mode::Quantized {
        return Err(schema(vec!["check runs on quantized i.i.d. classes only".to_string()]));
    }
    let source = cfg.source()?;
    let fam = source.family();
    let mut r = cfg.base_report("check");
    r.set("seed", cfg.seed);
    r.set("samples", CHECK_SAMPLES);
    println!(
        "{:>6} {:>12} {:>12} {:>10} {:>14} {:>12}",
        "n", "min gap", "max gap", "2κs", "max|log T−r|", "sup dev·√n"
    );
    let mut all_hold = true;
    for &n in &cfg.n_grid {
        let gap = ml_approx_check(fam, &cfg.params, n, cfg.budget_compositions)?;
        let index = typesize::quantized::build_type_index(fam, &cfg.params.at(n)?, cfg.budget_compositions)?;
        let dev = size_deviation(fam, &index)?;
        let sup = normality_check(&source, n, CHECK_SAMPLES, cfg.seed)?;
        let holds = gap.holds(1e-9);
        all_hold &= holds;
        r.set(format!("ml_gap_min.{n}"), gap.min_gap);
        r.set(format!("ml_gap_max.{n}"), gap.max_gap);
        r.set(format!("ml_gap_bound.{n}"), gap.bound);
        r.set(format!("ml_gap_holds.{n}"), holds);
        r.set(format!("size_deviation.{n}"), dev);
        r.set(format!("normality_sup.{n}"), sup);
        r.set(format!("normality_scaled.{n}"), sup * (n as f64).sqrt());
        println!(
            "{:>6} {:>12.4e} {:>12.4} {:>10.4} {:>14.4} {:>12.4}",
            n,
            gap.min_gap,
            gap.max_gap,
            gap.bound,
            dev,
            sup * (n as f64).sqrt()
        );
    }
    r.set("ml_gap_holds", all_hold);
    cfg.emit("check", &r, &[])
}
