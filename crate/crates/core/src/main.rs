use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tlmap::harness::{
    demo_config, estimate_reldeg_from_step, evaluate_map, identify_map, order_sweep, run_lti_experiment_detailed,
    Excitation, ExperimentConfig, IdentifiedMap, IdentifySettings, MapSource, Provenance, CT_STEP_THRESHOLD_FRACTION,
};
use tlmap::mapprops::{derive_map_properties, SignalDomain, SystemFacts};
use tlmap::polytf::{optimal_map, SystemSpec};
use tlmap::reldeg::{noise_adaptive_threshold, noise_free_threshold, reldeg_from_step_ct, reldeg_from_step_dt};
use tlmap::simkit::{simulate_tf, step_response, Signal};
use tlmap::{Error, Result};

#[derive(Parser)]
#[command(name = "tlmap", version, about = "Dynamic transfer-learning maps between SISO systems")]
struct Cli {
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a system spec on an excitation or an input CSV.
    Simulate(SimulateArgs),
    /// Step response of a system spec as CSV.
    Step(StepArgs),
    /// Estimate the relative degree from a spec or a recorded step response.
    Reldeg(ReldegArgs),
    /// Map order, relative degree and input recipe from system facts.
    Props(PropsArgs),
    /// Analytic optimal map between two specs.
    Construct(ConstructArgs),
    /// Identify a map from recorded source and target outputs.
    Identify(IdentifyArgs),
    /// Score an identified map on new recordings.
    Evaluate(EvaluateArgs),
    /// Built-in synthetic two-vehicle experiment.
    Demo(DemoArgs),
    /// Identify the map at several orders.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Ct,
    Dt,
}

impl From<DomainArg> for SignalDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Ct => SignalDomain::Ct,
            DomainArg::Dt => SignalDomain::Dt,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExcitationKind {
    Step,
    Multisine,
    Prbs,
}

#[derive(Args)]
struct ExcitationArgs {
    #[arg(long, value_enum, default_value = "multisine")]
    excitation: ExcitationKind,
    /// Multi-sine frequencies in Hz.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.13,0.29")]
    freqs: Vec<f64>,
    /// Multi-sine amplitudes; one value is repeated for every frequency.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    amps: Vec<f64>,
    /// Step or PRBS amplitude.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// PRBS switching rate in Hz.
    #[arg(long, default_value_t = 1.0)]
    band: f64,
}

impl ExcitationArgs {
    fn build(&self) -> Excitation {
        match self.excitation {
            ExcitationKind::Step => Excitation::Step { amplitude: self.amplitude },
            ExcitationKind::Multisine => {
                let amplitudes = if self.amps.len() == 1 {
                    vec![self.amps[0]; self.freqs.len()]
                } else {
                    self.amps.clone()
                };
                Excitation::MultiSine { frequencies: self.freqs.clone(), amplitudes }
            }
            ExcitationKind::Prbs => {
                Excitation::Prbs { seed: self.seed, band_hz: self.band, amplitude: self.amplitude }
            }
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Input signal CSV (`t,value`); overrides the excitation flags.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    excitation: ExcitationArgs,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Sample period; defaults to the spec's period for discrete systems.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args)]
struct StepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
}

#[derive(Args)]
#[command(group(ArgGroup::new("from").required(true).args(["spec", "csv"])))]
struct ReldegArgs {
    /// Simulate the step response of this spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Recorded step response CSV; the step happens at t = 0.
    #[arg(long, requires = "domain")]
    csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    domain: Option<DomainArg>,
    /// Detection threshold; defaults depend on the domain.
    #[arg(long)]
    threshold: Option<f64>,
    /// Highest derivative order tested for CT data.
    #[arg(long, default_value_t = 5)]
    max_order: usize,
    /// Sample period for simulating continuous specs.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
}

#[derive(Args)]
struct FactsArgs {
    #[arg(long)]
    ns: usize,
    #[arg(long)]
    rs: usize,
    #[arg(long)]
    nt: usize,
    #[arg(long)]
    rt: usize,
}

impl FactsArgs {
    fn props(&self, domain: SignalDomain) -> Result<tlmap::mapprops::MapProperties> {
        let src = SystemFacts::source(self.ns, self.rs)?;
        let tgt = SystemFacts::target(self.nt, self.rt)?;
        Ok(derive_map_properties(&src, &tgt, domain))
    }
}

#[derive(Args)]
struct PropsArgs {
    #[command(flatten)]
    facts: FactsArgs,
    #[arg(long, value_enum)]
    domain: DomainArg,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    source_csv: PathBuf,
    #[arg(long)]
    target_csv: PathBuf,
    #[command(flatten)]
    facts: FactsArgs,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Prefilter refinement iterations.
    #[arg(long, default_value_t = 0)]
    refine: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Identified map JSON from `identify`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    source_csv: PathBuf,
    #[arg(long)]
    target_csv: PathBuf,
    /// Tidy CSV of the source, target and transferred trajectories.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Use the analytic map instead of identifying one.
    #[arg(long)]
    construct: bool,
    #[arg(long)]
    plot_out: Option<PathBuf>,
    /// Print the demo configuration instead of running it.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment configuration JSON; the demo configuration is used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    orders: Vec<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn sample_period_for(spec: &SystemSpec, dt: Option<f64>) -> Result<f64> {
    match (spec.sample_period, dt) {
        (Some(p), Some(h)) if (p - h).abs() > 1e-12 * p => Err(Error::InvalidArgument(format!(
            "--dt {h} differs from the spec's sample period {p}"
        ))),
        (Some(p), _) => Ok(p),
        (None, Some(h)) => Ok(h),
        (None, None) => Err(Error::InvalidArgument("--dt is required for continuous specs".into())),
    }
}

struct Output {
    main: String,
    warnings: Vec<String>,
}

impl From<String> for Output {
    fn from(main: String) -> Self {
        Output { main, warnings: Vec::new() }
    }
}

fn write_side(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cmd: Command) -> Result<Output> {
    match cmd {
        Command::Simulate(a) => {
            let spec = SystemSpec::load(&a.spec)?;
            let g = spec.to_rational()?;
            let input = match &a.input {
                Some(path) => Signal::load_csv(path)?,
                None => {
                    let h = sample_period_for(&spec, a.dt)?;
                    a.excitation.build().signal(a.duration, h)?
                }
            };
            Ok(simulate_tf(&g, &input)?.to_csv_string().into())
        }
        Command::Step(a) => {
            let spec = SystemSpec::load(&a.spec)?;
            let h = sample_period_for(&spec, a.dt)?;
            Ok(step_response(&spec.to_rational()?, a.amplitude, a.duration, h)?.to_csv_string().into())
        }
        Command::Reldeg(a) => {
            let est = if let Some(path) = &a.spec {
                let spec = SystemSpec::load(path)?;
                let h = sample_period_for(&spec, spec.sample_period.is_none().then_some(a.dt))?;
                estimate_reldeg_from_step(&spec.to_rational()?, h)?
            } else {
                let step = Signal::load_csv(a.csv.as_ref().expect("group requires one source"))?;
                let i0 = (-step.start_time() / step.sample_period()).round().max(0.0) as usize;
                match a.domain.expect("csv requires domain") {
                    DomainArg::Dt => {
                        let threshold = match a.threshold {
                            Some(t) => t,
                            None if i0 >= 2 => noise_adaptive_threshold(&step, i0)?.max(noise_free_threshold(1.0)),
                            None => noise_free_threshold(1.0),
                        };
                        reldeg_from_step_dt(&step, i0, threshold)?
                    }
                    DomainArg::Ct => {
                        let threshold = a.threshold.unwrap_or(CT_STEP_THRESHOLD_FRACTION * step.max_abs());
                        reldeg_from_step_ct(&step, threshold, a.max_order)?
                    }
                }
            };
            Ok(json(&est).into())
        }
        Command::Props(a) => {
            let props = a.facts.props(a.domain.into())?;
            #[derive(Serialize)]
            struct PropsOut<'a> {
                #[serde(flatten)]
                props: &'a tlmap::mapprops::MapProperties,
                regressors: Option<Vec<String>>,
            }
            let regressors = matches!(a.domain, DomainArg::Dt).then(|| props.regressors().tags());
            Ok(json(&PropsOut { props: &props, regressors }).into())
        }
        Command::Construct(a) => {
            let g_s = SystemSpec::load(&a.source)?.to_rational()?;
            let g_t = SystemSpec::load(&a.target)?.to_rational()?;
            let map = optimal_map(&g_s, &g_t)?;
            let mut warnings = Vec::new();
            if !map.is_causal() {
                warnings.push(format!(
                    "map is non-causal (relative degree {}); tailor the input before using it",
                    map.relative_degree()
                ));
            }
            let nominal = g_s.order() + g_t.order() - g_s.relative_degree().min(g_t.relative_degree()) as usize;
            if map.order() != nominal {
                warnings.push(format!(
                    "shared factors cancel: map order {} against the nominal {nominal}",
                    map.order()
                ));
            }
            Ok(Output { main: SystemSpec::from_rational(&map).to_json() + "\n", warnings })
        }
        Command::Identify(a) => {
            let y_s = Signal::load_csv(&a.source_csv)?;
            let y_t = Signal::load_csv(&a.target_csv)?;
            let props = a.facts.props(SignalDomain::Dt)?;
            let mut warnings = Vec::new();
            let map = identify_map(
                &y_s,
                &y_t,
                &props,
                &IdentifySettings { ridge: a.ridge, refine_iterations: a.refine },
                &mut warnings,
            )?;
            Ok(Output { main: map.to_json(), warnings })
        }
        Command::Evaluate(a) => {
            let model_text = std::fs::read_to_string(&a.model)?;
            let map = IdentifiedMap::parse(&model_text)?;
            let y_s = Signal::load_csv(&a.source_csv)?;
            let y_t = Signal::load_csv(&a.target_csv)?;
            let provenance = Provenance {
                config_hash: {
                    use sha2::{Digest, Sha256};
                    let mut h = Sha256::new();
                    h.update(model_text.as_bytes());
                    h.update(y_s.to_csv_string().as_bytes());
                    h.update(y_t.to_csv_string().as_bytes());
                    hex::encode(h.finalize())
                },
                seed: None,
            };
            let (report, signals) = evaluate_map(&map, &y_s, &y_t, provenance)?;
            if let Some(p) = &a.plot_out {
                write_side(p, &signals.to_tidy_csv())?;
            }
            Ok(report.to_json().into())
        }
        Command::Demo(a) => {
            let mut cfg = demo_config(a.seed);
            if a.construct {
                cfg.identification.map_source = MapSource::Construct;
            }
            if a.print_config {
                return Ok((cfg.to_json() + "\n").into());
            }
            let run = run_lti_experiment_detailed(&cfg)?;
            if let Some(p) = &a.plot_out {
                write_side(p, &run.test_signals.to_tidy_csv())?;
            }
            Ok(run.report.to_json().into())
        }
        Command::Sweep(a) => {
            let cfg = match &a.config {
                Some(p) => ExperimentConfig::load(p)?,
                None => demo_config(a.seed),
            };
            let table = order_sweep(&cfg, &a.orders)?;
            let main = match a.format {
                TableFormat::Csv => table.to_tidy_csv(),
                TableFormat::Json => table.to_json(),
            };
            Ok(Output { main, warnings: table.warnings })
        }
    }
}

fn use_color() -> bool {
    std::env::var_os("TLMAP_NO_COLOR").is_none() && std::io::stderr().is_terminal()
}

fn main() -> ExitCode {
    let color = use_color();
    let command = Cli::command().color(if color { clap::ColorChoice::Auto } else { clap::ColorChoice::Never });
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (warn_tag, err_tag) = if color {
        ("\x1b[33mwarning\x1b[0m", "\x1b[31merror\x1b[0m")
    } else {
        ("warning", "error")
    };
    let out = cli.out.clone();
    match run(cli.command).and_then(|o| {
        match &out {
            Some(path) => write_side(path, &o.main)?,
            None => std::io::stdout().write_all(o.main.as_bytes())?,
        }
        Ok(o.warnings)
    }) {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("{warn_tag}: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{err_tag}: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
