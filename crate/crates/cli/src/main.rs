//! `frictionlab`: run scenarios, sweep breakaway forces, solve pulley
//! problems, score assessments and serve the live simulation.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frictionlab_core::assessment::{self, AssessmentError};
use frictionlab_core::pulley::{self, PulleyProblem};
use frictionlab_core::session::{self, format_sig9, ForceRamp, ScenarioConfig, Trajectory};
use frictionlab_core::sweep::{self, BreakawayRamp, BreakawayRow, SweepSpec};
use frictionlab_core::{InputSource, ParamWarning, ScenarioError};
use frictionlab_service::{EngineOptions, DEFAULT_ADDR};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "frictionlab", version, about = "Block-on-incline friction simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a scenario headless and write its trajectory.
    Simulate(SimulateArgs),
    /// Ramp a push from rest over a parameter grid and report breakaway forces.
    Breakaway(BreakawayArgs),
    /// Solve a released-from-rest pulley problem.
    Pulley(PulleyArgs),
    /// Normalized gains from a `student_id,test2,test3[,group]` file.
    Gain(ScoresArgs),
    /// Welch t-test on a `group,score` file with groups A and B.
    Ttest(ScoresArgs),
    /// Stream the live simulation over a websocket at /ws.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
#[command(
    allow_negative_numbers = true,
    group = clap::ArgGroup::new("input").required(true).args(["script", "force"])
)]
struct SimulateArgs {
    /// Scenario JSON; defaults are used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Device script: JSON array of [t_seconds, device_coord].
    #[arg(long)]
    script: Option<PathBuf>,
    /// Tangential force on the block, N (up-slope positive).
    #[arg(long)]
    force: Option<f64>,
    /// Grow the force by this many N per second.
    #[arg(long, requires = "force")]
    ramp: Option<f64>,
    /// Simulated seconds; overrides the scenario's duration_s.
    #[arg(long)]
    duration: Option<f64>,
    /// Trajectory CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BreakawayArgs {
    /// Grid such as `mu_s=0.1:0.9:5` or `angle_deg=0:40:9`.
    #[arg(long)]
    sweep: String,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Force ramp rate, N/s.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Give up once the ramp exceeds this force, N.
    #[arg(long, default_value_t = 1000.0)]
    max_force: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct PulleyArgs {
    #[arg(long)]
    m1: f64,
    #[arg(long)]
    m2: f64,
    #[arg(long)]
    angle_deg: f64,
    #[arg(long)]
    mu_s: f64,
    #[arg(long)]
    mu_k: f64,
    #[arg(long, default_value_t = frictionlab_core::physics::STANDARD_GRAVITY)]
    g: f64,
}

#[derive(Debug, Args)]
struct ScoresArgs {
    #[arg(long)]
    scores: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ADDR)]
    addr: String,
    /// Directory for recordings started by clients.
    #[arg(long, default_value = ".")]
    record_dir: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    /// Bad input: unreadable or invalid files, inconsistent flags.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AssessmentError> for CliError {
    fn from(e: AssessmentError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn read_input(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {what} file `{}`: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(path) => ScenarioConfig::parse(&read_input(path, "scenario")?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
        None => Ok(ScenarioConfig::default()),
    }
}

fn create_output(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write `{}`: {e}", path.display())))
}

fn write_failed(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("cannot write `{}`: {e}", path.display()))
}

fn warn(warnings: &[ParamWarning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = load_config(args.scenario.as_deref())?;
    let scenario = config.build::<f64>()?;
    warn(&scenario.warnings);
    let duration = args
        .duration
        .or(config.duration_s)
        .ok_or_else(|| CliError::Usage("no duration: pass --duration or set duration_s".into()))?;

    let mut source: Box<dyn InputSource<f64>> = match (&args.script, args.force) {
        (Some(path), _) => Box::new(session::load_script::<f64>(&read_input(path, "script")?)?),
        (None, Some(force)) => Box::new(ForceRamp {
            initial: force,
            rate: args.ramp.unwrap_or(0.0),
        }),
        (None, None) => unreachable!("clap requires one input"),
    };
    let trajectory: Trajectory<f64> =
        session::run_for(&scenario, source.as_mut(), duration).map_err(|e| CliError::Usage(e.to_string()))?;

    if let Some(path) = &args.out {
        let mut out = create_output(path)?;
        trajectory.write_csv(&mut out).and_then(|_| out.flush()).map_err(write_failed(path))?;
    }
    if let Some(summary) = trajectory.summary() {
        println!("{summary}");
    }
    Ok(())
}

fn breakaway(args: BreakawayArgs) -> Result<(), CliError> {
    let spec: SweepSpec = args.sweep.parse().map_err(|e: sweep::SweepError| CliError::Usage(e.to_string()))?;
    let scenario = load_config(args.scenario.as_deref())?.build::<f64>()?;
    if !(args.rate > 0.0 && args.rate.is_finite()) {
        return Err(CliError::Usage("--rate must be a positive number".into()));
    }
    let ramp = BreakawayRamp {
        rate: args.rate,
        max_force: args.max_force,
    };
    let rows = sweep::breakaway_sweep(&scenario, &spec, &ramp).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut text = String::new();
    text.push_str(BreakawayRow::CSV_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.csv_line());
        text.push('\n');
    }
    match &args.out {
        Some(path) => fs::write(path, text).map_err(write_failed(path)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn solve_pulley(args: PulleyArgs) -> Result<(), CliError> {
    let problem = PulleyProblem {
        m1: args.m1,
        m2: args.m2,
        angle: args.angle_deg.to_radians(),
        mu_static: args.mu_s,
        mu_kinetic: args.mu_k,
        gravity: args.g,
    };
    if !(0.0..90.0).contains(&args.angle_deg) {
        return Err(CliError::Usage("invalid value for `angle_deg`: must lie in [0, 90) degrees".into()));
    }
    let warnings = problem.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    warn(&warnings);
    let sol = pulley::solve(&problem);
    let out = json!({
        "regime": sol.regime,
        "acceleration": sol.acceleration,
        "tension": sol.tension,
        "friction": sol.friction,
        "kinetic_stall": sol.kinetic_stall,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn gain(args: ScoresArgs) -> Result<(), CliError> {
    let text = read_input(&args.scores, "scores")?;
    let report = assessment::gain_report(text.as_bytes())?;
    println!("student_id,group,test2,test3,gain");
    for s in &report.students {
        println!(
            "{},{},{},{},{}",
            s.student_id,
            s.group.as_deref().unwrap_or(""),
            format_sig9(s.pair.test2()),
            format_sig9(s.pair.test3()),
            format_sig9(s.gain)
        );
    }
    println!();
    println!("group,mean_gain");
    for (group, mean) in &report.group_means {
        println!("{group},{}", format_sig9(*mean));
    }
    println!("all,{}", format_sig9(report.mean_gain));
    Ok(())
}

fn ttest(args: ScoresArgs) -> Result<(), CliError> {
    let text = read_input(&args.scores, "scores")?;
    let (a, b) = assessment::read_group_scores(text.as_bytes())?;
    let result = assessment::welch_t(&a, &b)?;
    println!(
        "t={} df={} p={}",
        format_sig9(result.t),
        format_sig9(result.df),
        format_sig9(result.p_two_tailed)
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let config = load_config(args.scenario.as_deref())?;
    config.build::<f64>()?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async move {
        let options = EngineOptions {
            record_dir: args.record_dir,
            ..EngineOptions::default()
        };
        let handle = frictionlab_service::serve(config, args.addr.as_str(), options)
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("listening on ws://{}/ws", handle.local_addr());
        io::stdout().flush().ok();
        tokio::signal::ctrl_c().await.map_err(|e| CliError::Runtime(e.to_string()))?;
        handle.shutdown().await;
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Simulate(args) => simulate(args),
        Cmd::Breakaway(args) => breakaway(args),
        Cmd::Pulley(args) => solve_pulley(args),
        Cmd::Gain(args) => gain(args),
        Cmd::Ttest(args) => ttest(args),
        Cmd::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
