//! Command-line surface. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 non-convergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{BenchConfig, EvalReport, Harness, InitMethod, ProxySetting, Variant};
use crate::disagg::{disaggregate, DisaggConfig};
use crate::error::Error;
use crate::estimate::{approx_target_solar, estimate_base_load, estimate_base_load_percentile, fit_pv_params, BaseLoad, Hemisphere};
use crate::io::{self, Manifest};
use crate::load::build_features;
use crate::metrics::ErrorStats;
use crate::mixture::{init_weights, Provenance, ProxyMatrix, WeightVector};
use crate::pv::{max_generation, synthesize_proxy, Channel, PvParams, WeatherBundle};
use crate::scenario::{generate_scenario, ScenarioConfig};
use crate::timeseries::{align, SiteLocation, TimeSeries, Unit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "btm-disagg", version, about = "Behind-the-meter solar disaggregation from net-load data")]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LocationArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: Option<f64>,
    /// Hours east of UTC for local-clock features.
    #[arg(long, allow_hyphen_values = true)]
    pub utc_offset: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a PV system's generation from weather.
    SynthProxy {
        /// PvParams JSON; alternatively give --tilt/--orientation/--rating.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        tilt: Option<f64>,
        #[arg(long)]
        orientation: Option<f64>,
        #[arg(long)]
        rating: Option<f64>,
        #[arg(long)]
        weather: Option<PathBuf>,
        #[command(flatten)]
        location: LocationArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit tilt, orientation and rating to a generation series.
    EstimateParams {
        #[arg(long)]
        generation: PathBuf,
        #[arg(long)]
        weather: Option<PathBuf>,
        #[command(flatten)]
        location: LocationArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Initial mixture weights for a target and its proxies.
    InitWeights {
        #[command(flatten)]
        inputs: PipelineArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full disaggregation of one target.
    Run {
        #[command(flatten)]
        inputs: PipelineArgs,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error metrics of estimates against ground truth.
    Eval {
        #[arg(long)]
        solar: PathBuf,
        #[arg(long)]
        true_solar: PathBuf,
        #[arg(long, requires = "true_load")]
        load: Option<PathBuf>,
        #[arg(long, requires = "load")]
        true_load: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a ground-truth scenario directory.
    Simulate {
        #[arg(long)]
        homes: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        step: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark proxy settings, initializations and lengths on a scenario.
    Benchmark {
        #[arg(long)]
        scenario: PathBuf,
        /// Proxy settings, comma separated, or `all`.
        #[arg(long, value_delimiter = ',')]
        setting: Vec<String>,
        /// Initialization methods, comma separated, or `all`.
        #[arg(long, value_delimiter = ',')]
        init: Vec<String>,
        /// Disaggregation lengths in intervals; omitted means the full window.
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
        /// Restrict the disaggregated homes (all homes stay proxy candidates).
        #[arg(long, value_delimiter = ',')]
        homes: Vec<usize>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Net-load CSV of the target.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Wide weather CSV or a directory of per-channel CSVs.
    #[arg(long)]
    pub weather: Option<PathBuf>,
    /// Real-proxy generation CSVs (repeatable).
    #[arg(long = "proxy")]
    pub proxies: Vec<PathBuf>,
    #[arg(long)]
    pub setting: Option<String>,
    #[arg(long)]
    pub init: Option<String>,
    /// Base load as this percentile of night net load instead of the minimum.
    #[arg(long)]
    pub base_percentile: Option<f64>,
    #[command(flatten)]
    pub location: LocationArgs,
}

/// Contents of `--config`. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub location: Option<SiteLocation>,
    pub net: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub proxies: Vec<PathBuf>,
    pub setting: Option<Variant>,
    /// Overrides the default synthetic-proxy deployments of the setting.
    pub synthetic: Option<Vec<PvParams>>,
    pub init: Option<InitMethod>,
    pub base_load_percentile: Option<f64>,
    pub disagg: Option<DisaggConfig>,
    pub scenario: Option<ScenarioConfig>,
    pub trials: Option<usize>,
    pub lengths: Vec<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("DISAGG_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Data(err) => eprintln!("error: {err}"),
            }
            exit_code(&e)
        }
    }
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Data(Error::NonConvergence { .. }) => EXIT_NONCONVERGENCE,
        CliError::Data(_) => EXIT_DATA,
    }
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn location(args: &LocationArgs, cfg: &RunConfig) -> CliResult<SiteLocation> {
    let base = cfg.location;
    let lat = args.lat.or(base.map(|l| l.latitude));
    let lon = args.lon.or(base.map(|l| l.longitude));
    let (Some(lat), Some(lon)) = (lat, lon) else {
        return usage("site location required: pass --lat and --lon or set `location` in the config");
    };
    let offset = args.utc_offset.or(base.map(|l| l.utc_offset)).unwrap_or((lon / 15.0).round());
    SiteLocation::new(lat, lon, offset).map_err(|e| CliError::Usage(e.to_string()))
}

fn required(flag: Option<PathBuf>, from_cfg: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| from_cfg.clone())
        .ok_or_else(|| CliError::Usage(format!("--{name} is required (or set `{name}` in the config)")))
}

fn parse_variant(s: &str) -> CliResult<Variant> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn parse_init(s: &str) -> CliResult<InitMethod> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn finish(mut manifest: Manifest, out: &Path, outputs: &[PathBuf]) -> CliResult<()> {
    for p in outputs {
        manifest.add_output(p, out)?;
    }
    io::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli.config)?;
    let config_json = serde_json::to_value(&cfg).map_err(Error::from)?;
    match cli.command {
        Command::SynthProxy { params, tilt, orientation, rating, weather, location: loc_args, out } => {
            let loc = location(&loc_args, &cfg)?;
            let p = match (params, tilt, orientation, rating) {
                (Some(path), None, None, None) => {
                    let p: PvParams = io::read_json(&path)?;
                    p.validate()?;
                    p
                }
                (None, Some(t), Some(o), Some(r)) => PvParams::new(t, o, r).map_err(|e| CliError::Usage(e.to_string()))?,
                _ => return usage("give either --params or all of --tilt, --orientation and --rating"),
            };
            let weather_path = required(weather, &cfg.weather, "weather")?;
            let w = io::read_weather(&weather_path)?;
            let gen = synthesize_proxy(&p, &loc, &w)?;
            let mut m = Manifest::new("synth-proxy", cli.seed, serde_json::json!({ "params": p, "location": loc, "config": config_json }));
            m.add_input(&weather_path)?;
            let path = out.join("proxy.csv");
            io::write_timeseries_csv(&path, &gen)?;
            finish(m, &out, &[path])
        }
        Command::EstimateParams { generation, weather, location: loc_args, out } => {
            let loc = location(&loc_args, &cfg)?;
            let weather_path = required(weather, &cfg.weather, "weather")?;
            let gen = io::read_timeseries_csv(&generation)?;
            let w = io::read_weather(&weather_path)?;
            let aligned = align(&[gen, w.channel(Channel::Temp)?.clone()])?;
            let p = fit_pv_params(&aligned[0], &loc, &aligned[1], Hemisphere::of(&loc))?;
            let mut m = Manifest::new("estimate-params", cli.seed, serde_json::json!({ "location": loc, "config": config_json }));
            m.add_input(&generation)?;
            m.add_input(&weather_path)?;
            let path = out.join("params.json");
            io::write_json(&path, &p)?;
            finish(m, &out, &[path])
        }
        Command::InitWeights { inputs, out } => {
            let prepared = Prepared::load(&inputs, &cfg)?;
            let init = prepared.initial_weights(prepared.init, cli.seed.unwrap_or(0))?;
            let mut m = Manifest::new("init-weights", cli.seed, prepared.describe(&config_json));
            prepared.record_inputs(&mut m)?;
            let path = out.join("weights.json");
            io::write_json(&path, &serde_json::json!({ "init": prepared.init, "weights": init.weights, "proxies": prepared.names }))?;
            finish(m, &out, &[path])
        }
        Command::Run { inputs, max_iterations, epsilon, out } => {
            let prepared = Prepared::load(&inputs, &cfg)?;
            let mut dcfg = cfg.disagg.unwrap_or_default();
            if let Some(s) = cli.seed {
                dcfg.master_seed = s;
            }
            if let Some(n) = max_iterations {
                dcfg.max_iterations = n;
            }
            if let Some(e) = epsilon {
                dcfg.epsilon = e;
            }
            dcfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let w0 = prepared.initial_weights(prepared.init, dcfg.master_seed)?;
            let features = build_features(&prepared.temp, &prepared.loc);
            let res = disaggregate(&prepared.net, &prepared.x, &w0, &features, &prepared.loc, &dcfg)?;
            if !res.converged {
                log::warn!("stopped at the iteration cap ({}) without converging", dcfg.max_iterations);
            }
            let mut m = Manifest::new("run", Some(dcfg.master_seed), prepared.describe(&config_json));
            prepared.record_inputs(&mut m)?;
            let solar = out.join("solar.csv");
            let load = out.join("load.csv");
            let diag = out.join("diagnostics.json");
            io::write_timeseries_csv(&solar, &res.solar)?;
            io::write_timeseries_csv(&load, &res.load)?;
            io::write_json(
                &diag,
                &serde_json::json!({
                    "setting": prepared.setting.variant,
                    "init": prepared.init,
                    "proxies": prepared.names,
                    "initial_weights": w0.weights,
                    "weights": res.weights.weights,
                    "iterations": res.iterations,
                    "converged": res.converged,
                    "max_iterations": dcfg.max_iterations,
                    "epsilon": dcfg.epsilon,
                    "master_seed": dcfg.master_seed,
                    "base_load_kw": prepared.base.value,
                    "night_intervals": prepared.base.night_interval_count,
                    "weight_trajectory": res.weight_trajectory.iter().map(|w| &w.weights).collect::<Vec<_>>(),
                    "residual_trajectory": res.residual_trajectory,
                }),
            )?;
            finish(m, &out, &[solar, load, diag])
        }
        Command::Eval { solar, true_solar, load, true_load, out } => {
            let mut report = serde_json::Map::new();
            let mut m = Manifest::new("eval", cli.seed, config_json);
            let pairs = [Some(("solar", solar, true_solar)), load.zip(true_load).map(|(l, t)| ("load", l, t))];
            for (name, pred, truth) in pairs.into_iter().flatten() {
                m.add_input(&pred)?;
                m.add_input(&truth)?;
                let stats = ErrorStats::compute(&io::read_timeseries_csv(&truth)?, &io::read_timeseries_csv(&pred)?)?;
                report.insert(
                    name.into(),
                    serde_json::json!({ "rmse": stats.rmse, "nrmse": stats.nrmse().ok(), "truth_mean": stats.truth_mean }),
                );
            }
            let path = out.join("metrics.json");
            io::write_json(&path, &report)?;
            finish(m, &out, &[path])
        }
        Command::Simulate { homes, days, step, out } => {
            let mut sc_cfg = cfg.scenario.unwrap_or_default();
            if let Some(loc) = cfg.location {
                sc_cfg.location = loc;
            }
            if let Some(s) = cli.seed {
                sc_cfg.seed = s;
            }
            if let Some(h) = homes {
                sc_cfg.n_homes = h;
            }
            if let Some(d) = days {
                sc_cfg.days = d;
            }
            if let Some(s) = step {
                sc_cfg.step_minutes = s;
            }
            let sc = generate_scenario(&sc_cfg).map_err(|e| match e {
                Error::Config(msg) => CliError::Usage(msg),
                other => CliError::Data(other),
            })?;
            let files = io::save_scenario(&out, &sc)?;
            let cfg_path = out.join("scenario_config.json");
            io::write_json(&cfg_path, &sc_cfg)?;
            let mut all = files;
            all.push(cfg_path);
            finish(Manifest::new("simulate", Some(sc_cfg.seed), serde_json::to_value(sc_cfg).map_err(Error::from)?), &out, &all)
        }
        Command::Benchmark { scenario, setting, init, lengths, trials, homes, threads, max_iterations, out } => {
            let sc = io::load_scenario(&scenario)?;
            let variants: Vec<Variant> = if setting.is_empty() || setting.iter().any(|s| s == "all") {
                if setting.is_empty() { cfg.setting.map_or(Variant::ALL.to_vec(), |v| vec![v]) } else { Variant::ALL.to_vec() }
            } else {
                setting.iter().map(|s| parse_variant(s)).collect::<CliResult<_>>()?
            };
            let inits: Vec<InitMethod> = if init.iter().any(|s| s == "all") {
                InitMethod::ALL.to_vec()
            } else if init.is_empty() {
                vec![cfg.init.unwrap_or(InitMethod::Ours)]
            } else {
                init.iter().map(|s| parse_init(s)).collect::<CliResult<_>>()?
            };
            let lengths = if !lengths.is_empty() { lengths } else if !cfg.lengths.is_empty() { cfg.lengths.clone() } else { vec![sc.len()] };
            let mut disagg = cfg.disagg.unwrap_or_default();
            if let Some(n) = max_iterations {
                disagg.max_iterations = n;
            }
            disagg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let base = BenchConfig {
                trials: trials.or(cfg.trials).unwrap_or(10),
                seed: cli.seed.unwrap_or(0),
                init: InitMethod::Ours,
                disagg,
                threads: threads.or(cfg.threads).unwrap_or(0),
            };
            if base.trials == 0 {
                return usage("--trials must be at least 1");
            }
            let mut harness = Harness::new(&sc);
            if !homes.is_empty() {
                harness = harness.with_targets(homes).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            let mut reports = Vec::new();
            for &v in &variants {
                let setting = match &cfg.synthetic {
                    Some(p) => ProxySetting::with_synthetic(v, p.clone()).map_err(|e| CliError::Usage(e.to_string()))?,
                    None => ProxySetting::new(v, &sc.location),
                };
                for &init in &inits {
                    let bc = BenchConfig { init, ..base };
                    match harness.sweep_length(&lengths, &setting, &bc) {
                        Ok(r) => reports.extend(r),
                        Err(e @ (Error::PoolTooSmall { .. } | Error::LengthTooLong { .. })) => return usage(e.to_string()),
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            let mut m = Manifest::new("benchmark", Some(base.seed), serde_json::json!({ "bench": base, "lengths": lengths, "config": config_json }));
            m.add_input(&scenario)?;
            let files = write_benchmark(&out, &reports)?;
            finish(m, &out, &files)
        }
    }
}

/// Target, weather and proxies loaded, aligned and validated for
/// `init-weights` and `run`.
struct Prepared {
    loc: SiteLocation,
    setting: ProxySetting,
    init: InitMethod,
    net: TimeSeries,
    temp: TimeSeries,
    x: ProxyMatrix,
    names: Vec<String>,
    /// Real-proxy deployments are fitted to their generation; synthetic ones
    /// are known.
    proxy_params: Vec<PvParams>,
    base: BaseLoad,
    base_percentile: Option<f64>,
    inputs: Vec<PathBuf>,
}

impl Prepared {
    fn load(args: &PipelineArgs, cfg: &RunConfig) -> CliResult<Self> {
        let loc = location(&args.location, cfg)?;
        let variant = match (&args.setting, cfg.setting) {
            (Some(s), _) => parse_variant(s)?,
            (None, Some(v)) => v,
            (None, None) => return usage("--setting is required (3proxies, 1p+1sp, 1p+3sp or 3sp)"),
        };
        let init = match (&args.init, cfg.init) {
            (Some(s), _) => parse_init(s)?,
            (None, Some(i)) => i,
            (None, None) => InitMethod::Ours,
        };
        let setting = match &cfg.synthetic {
            Some(p) => ProxySetting::with_synthetic(variant, p.clone()).map_err(|e| CliError::Usage(e.to_string()))?,
            None => ProxySetting::new(variant, &loc),
        };
        let proxy_paths = if args.proxies.is_empty() { cfg.proxies.clone() } else { args.proxies.clone() };
        if proxy_paths.len() != variant.n_real() {
            return usage(format!("setting {variant} needs {} real proxy files, got {}", variant.n_real(), proxy_paths.len()));
        }
        let net_path = required(args.net.clone(), &cfg.net, "net")?;
        let weather_path = required(args.weather.clone(), &cfg.weather, "weather")?;
        let base_percentile = args.base_percentile.or(cfg.base_load_percentile);

        let net = io::read_timeseries_csv(&net_path)?;
        if net.unit() != Unit::Kw {
            return Err(Error::InsufficientData(format!("net load must be in kW, got {}", net.unit())).into());
        }
        let weather = io::read_weather(&weather_path)?;
        if !setting.synthetic.is_empty() {
            weather.require_all()?;
        }
        let real: Vec<TimeSeries> = proxy_paths.iter().map(|p| io::read_timeseries_csv(p)).collect::<crate::Result<_>>()?;

        // Trim everything to the common window.
        let mut series = vec![net, weather.channel(Channel::Temp)?.clone()];
        series.extend(real);
        let present: Vec<Channel> = Channel::ALL.into_iter().filter(|&c| c != Channel::Temp && weather.channel(c).is_ok()).collect();
        for &c in &present {
            series.push(weather.channel(c)?.clone());
        }
        let mut aligned = align(&series)?.into_iter();
        let net = aligned.next().expect("net");
        let temp = aligned.next().expect("temp");
        let real: Vec<TimeSeries> = aligned.by_ref().take(variant.n_real()).collect();
        let mut w = WeatherBundle::default();
        w.set(Channel::Temp, temp.clone());
        for (c, s) in present.iter().zip(aligned) {
            w.set(*c, s);
        }

        let mut columns = Vec::new();
        let mut provenance = Vec::new();
        let mut names = Vec::new();
        let mut proxy_params = Vec::new();
        for (path, gen) in proxy_paths.iter().zip(real) {
            proxy_params.push(fit_pv_params(&gen, &loc, &temp, Hemisphere::of(&loc))?);
            names.push(path.display().to_string());
            columns.push(gen.with_unit(Unit::Kw));
            provenance.push(Provenance::Real);
        }
        for p in &setting.synthetic {
            columns.push(synthesize_proxy(p, &loc, &w)?);
            names.push(format!("synthetic(tilt={:.1}, orientation={:.1}, rating={:.1})", p.tilt, p.orientation, p.dc_rating));
            provenance.push(Provenance::Synthetic);
            proxy_params.push(*p);
        }
        let x = ProxyMatrix::new(columns, provenance)?;
        let base = match base_percentile {
            Some(p) => estimate_base_load_percentile(&net, &loc, p)?,
            None => estimate_base_load(&net, &loc)?,
        };
        let mut inputs = vec![net_path, weather_path];
        inputs.extend(proxy_paths);
        Ok(Prepared { loc, setting, init, net, temp, x, names, proxy_params, base, base_percentile, inputs })
    }

    fn initial_weights(&self, init: InitMethod, seed: u64) -> CliResult<WeightVector> {
        let k = self.x.k();
        let raw = match init {
            InitMethod::Ours => {
                let target = fit_pv_params(&approx_target_solar(&self.net, &self.base), &self.loc, &self.temp, Hemisphere::of(&self.loc))?;
                let m_c = max_generation(&target, &self.loc, &self.temp);
                let m_p: Vec<TimeSeries> = self.proxy_params.iter().map(|p| max_generation(p, &self.loc, &self.temp)).collect();
                return Ok(init_weights(&m_p, &m_c)?);
            }
            InitMethod::ConstantOne => crate::bench::constant_init(k),
            InitMethod::UniformRandom => crate::bench::uniform_random_init(k, seed),
        };
        Ok(WeightVector::new(raw)?)
    }

    fn describe(&self, config: &serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "location": self.loc,
            "setting": self.setting,
            "init": self.init,
            "base_load_percentile": self.base_percentile,
            "config": config,
        })
    }

    fn record_inputs(&self, m: &mut Manifest) -> CliResult<()> {
        for p in &self.inputs {
            m.add_input(p)?;
        }
        Ok(())
    }
}

/// Writes `reports.json`, the flat `trials.csv`, `summary.csv` and SVG plots.
pub fn write_benchmark(out: &Path, reports: &[EvalReport]) -> crate::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let p = out.join("reports.json");
    io::write_json(&p, reports)?;
    files.push(p);

    let mut trials = String::from("variant,init,length,home,trial,metric,value\n");
    let mut summary = String::from("variant,init,length,homes,failed_trials,capped_blocks,mean_solar_nrmse,mean_solar_rmse,mean_load_nrmse,mean_load_rmse,median_iterations\n");
    for r in reports {
        for t in &r.records {
            let metrics = [
                ("solar_nrmse", t.solar_nrmse()),
                ("solar_rmse", t.solar.map(|s| s.rmse)),
                ("load_nrmse", t.load_nrmse()),
                ("load_rmse", t.load.map(|s| s.rmse)),
                ("iterations", Some(t.block_iterations.iter().sum::<usize>() as f64)),
            ];
            for (name, v) in metrics {
                let v = v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
                let _ = writeln!(trials, "{},{},{},{},{},{name},{v}", r.variant, r.init.name(), r.length, t.home, t.trial);
            }
        }
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            r.variant,
            r.init.name(),
            r.length,
            r.homes.len(),
            r.failed_trials,
            r.capped_blocks,
            r.mean_solar_nrmse,
            r.mean_solar_rmse,
            r.mean_load_nrmse,
            r.mean_load_rmse,
            r.iteration_distribution.as_ref().map_or(f64::NAN, |d| d.median)
        );
    }
    for (name, text) in [("trials.csv", trials), ("summary.csv", summary)] {
        let p = out.join(name);
        std::fs::create_dir_all(out)?;
        std::fs::write(&p, text)?;
        files.push(p);
    }

    // One box plot per (init, length) comparing settings, one per (setting,
    // length) comparing inits, and a line plot over lengths.
    let mut groups: Vec<(String, Vec<(String, crate::metrics::Distribution)>)> = Vec::new();
    let mut push = |key: String, label: String, d: &Option<crate::metrics::Distribution>| {
        if let Some(d) = d {
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push((label, d.clone())),
                None => groups.push((key, vec![(label, d.clone())])),
            }
        }
    };
    for r in reports {
        push(format!("settings_{}_T{}", r.init.name(), r.length), r.variant.to_string(), &r.solar_nrmse_distribution);
        push(format!("inits_{}_T{}", r.variant.name().replace('+', "_"), r.length), r.init.name().to_string(), &r.solar_nrmse_distribution);
    }
    for (key, g) in groups.iter().filter(|(_, g)| g.len() > 1) {
        let p = out.join(format!("box_{key}.svg"));
        std::fs::write(&p, io::box_plot_svg(&format!("Solar nRMSE per home ({})", key.replace('_', " ")), "nRMSE", g))?;
        files.push(p);
    }
    let mut lengths: Vec<usize> = reports.iter().map(|r| r.length).collect();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.len() > 1 {
        let mut series: Vec<(String, Vec<f64>)> = Vec::new();
        for r in reports {
            let name = format!("{} / {}", r.variant, r.init.name());
            let i = lengths.iter().position(|&l| l == r.length).expect("collected above");
            match series.iter_mut().find(|(n, _)| *n == name) {
                Some((_, v)) => v[i] = r.mean_solar_nrmse,
                None => {
                    let mut v = vec![f64::NAN; lengths.len()];
                    v[i] = r.mean_solar_nrmse;
                    series.push((name, v));
                }
            }
        }
        let labels: Vec<String> = lengths.iter().map(|l| l.to_string()).collect();
        let p = out.join("length_sweep.svg");
        std::fs::write(&p, io::line_plot_svg("Mean solar nRMSE by disaggregation length", "length (intervals)", "nRMSE", &labels, &series))?;
        files.push(p);
    }
    Ok(files)
}
