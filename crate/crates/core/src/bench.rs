//! Benchmark harness: proxy-setting variants, randomized real-proxy draws,
//! disaggregation-length sweeps and initialization comparisons over a
//! ground-truth scenario.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disagg::{disaggregate, verify_output, DisaggConfig};
use crate::error::{Error, Result};
use crate::estimate::{approx_target_solar, estimate_base_load, fit_pv_params, Hemisphere};
use crate::load::{build_features, LoadFeatures};
use crate::metrics::{Distribution, ErrorStats};
use crate::mixture::{init_weights, Provenance, ProxyMatrix, WeightVector};
use crate::pv::{max_generation, synthesize_proxy, PvParams};
use crate::scenario::ScenarioBundle;
use crate::seed;
use crate::timeseries::{SiteLocation, TimeSeries};

/// Rating of every synthetic proxy, kW.
pub const SYNTHETIC_RATING: f64 = 3.0;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "3proxies")]
    ThreeProxies,
    #[serde(rename = "1p+1sp")]
    OnePOneSp,
    #[serde(rename = "1p+3sp")]
    OnePThreeSp,
    #[serde(rename = "3sp")]
    ThreeSp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::ThreeProxies, Variant::OnePOneSp, Variant::OnePThreeSp, Variant::ThreeSp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::ThreeProxies => "3proxies",
            Variant::OnePOneSp => "1p+1sp",
            Variant::OnePThreeSp => "1p+3sp",
            Variant::ThreeSp => "3sp",
        }
    }

    pub fn n_real(self) -> usize {
        match self {
            Variant::ThreeProxies => 3,
            Variant::OnePOneSp | Variant::OnePThreeSp => 1,
            Variant::ThreeSp => 0,
        }
    }

    pub fn n_synthetic(self) -> usize {
        match self {
            Variant::ThreeProxies => 0,
            Variant::OnePOneSp => 1,
            Variant::OnePThreeSp | Variant::ThreeSp => 3,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric() || *c == '+').collect();
        match key.as_str() {
            "3proxies" | "threeproxies" => Ok(Variant::ThreeProxies),
            "1p+1sp" | "onepone" | "oneponesp" => Ok(Variant::OnePOneSp),
            "1p+3sp" | "onepthreesp" => Ok(Variant::OnePThreeSp),
            "3sp" | "threesp" => Ok(Variant::ThreeSp),
            _ => Err(Error::Config(format!("unknown proxy setting `{s}`"))),
        }
    }
}

/// A variant plus the deployment of its synthetic proxies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxySetting {
    pub variant: Variant,
    pub synthetic: Vec<PvParams>,
}

impl ProxySetting {
    /// Default synthetic proxies: tilt equal to |latitude|, 3 kW, facing the
    /// equator, plus due east and due west for the three-proxy variants.
    pub fn new(variant: Variant, loc: &SiteLocation) -> Self {
        let ideal = Hemisphere::of(loc).ideal_orientation();
        let orientations: &[f64] = match variant.n_synthetic() {
            0 => &[],
            1 => &[ideal],
            _ => &[ideal, 90.0, 270.0],
        };
        let tilt = loc.latitude.abs().min(90.0);
        let synthetic = orientations
            .iter()
            .map(|&o| PvParams::new(tilt, o, SYNTHETIC_RATING).expect("valid synthetic proxy"))
            .collect();
        ProxySetting { variant, synthetic }
    }

    pub fn with_synthetic(variant: Variant, synthetic: Vec<PvParams>) -> Result<Self> {
        if synthetic.len() != variant.n_synthetic() {
            return Err(Error::Config(format!(
                "{variant} needs {} synthetic proxies, got {}",
                variant.n_synthetic(),
                synthetic.len()
            )));
        }
        for p in &synthetic {
            p.validate()?;
        }
        Ok(ProxySetting { variant, synthetic })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Ours,
    ConstantOne,
    UniformRandom,
}

impl InitMethod {
    pub const ALL: [InitMethod; 3] = [InitMethod::Ours, InitMethod::ConstantOne, InitMethod::UniformRandom];

    pub fn name(self) -> &'static str {
        match self {
            InitMethod::Ours => "ours",
            InitMethod::ConstantOne => "constant_one",
            InitMethod::UniformRandom => "uniform_random",
        }
    }
}

impl FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ours" => Ok(InitMethod::Ours),
            "constant" | "constant_one" => Ok(InitMethod::ConstantOne),
            "random" | "uniform_random" => Ok(InitMethod::UniformRandom),
            _ => Err(Error::Config(format!("unknown init method `{s}`"))),
        }
    }
}

/// Constant initialization: every weight 1.
pub fn constant_init(k: usize) -> Vec<f64> {
    vec![1.0; k]
}

/// Random initialization: independent U[0, 1) draws.
pub fn uniform_random_init(k: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..k).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub trials: usize,
    pub seed: u64,
    pub init: InitMethod,
    pub disagg: DisaggConfig,
    /// Worker threads; 0 uses the available parallelism. Results do not
    /// depend on it.
    #[serde(default)]
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            trials: 10,
            seed: 0,
            init: InitMethod::Ours,
            disagg: DisaggConfig::default(),
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub home: usize,
    pub trial: usize,
    /// Homes whose measured generation served as real proxies.
    pub real_proxies: Vec<usize>,
    pub block_iterations: Vec<usize>,
    pub block_converged: Vec<bool>,
    pub solar: Option<ErrorStats>,
    pub load: Option<ErrorStats>,
    /// Output identity, sign and night-zero checks held for every block.
    pub output_checks_passed: bool,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn solar_nrmse(&self) -> Option<f64> {
        self.solar.and_then(|s| s.nrmse().ok())
    }

    pub fn load_nrmse(&self) -> Option<f64> {
        self.load.and_then(|s| s.nrmse().ok())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomeSummary {
    pub home: usize,
    pub trials_ok: usize,
    pub solar_nrmse: f64,
    pub solar_rmse: f64,
    pub load_nrmse: f64,
    pub load_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub init: InitMethod,
    pub seed: u64,
    pub length: usize,
    pub trials_per_home: usize,
    pub homes: Vec<HomeSummary>,
    pub mean_solar_nrmse: f64,
    pub mean_solar_rmse: f64,
    pub mean_load_nrmse: f64,
    pub mean_load_rmse: f64,
    pub solar_nrmse_distribution: Option<Distribution>,
    pub load_nrmse_distribution: Option<Distribution>,
    pub iteration_distribution: Option<Distribution>,
    /// Blocks that stopped at the iteration cap without converging.
    pub capped_blocks: usize,
    pub failed_trials: usize,
    pub records: Vec<TrialRecord>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl EvalReport {
    fn assemble(variant: Variant, init: InitMethod, seed: u64, length: usize, trials: usize, records: Vec<TrialRecord>) -> Self {
        let mut homes = Vec::new();
        let mut ids: Vec<usize> = records.iter().map(|r| r.home).collect();
        ids.dedup();
        for id in ids {
            let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.home == id && r.error.is_none()).collect();
            if ok.is_empty() {
                continue;
            }
            let pick = |f: &dyn Fn(&TrialRecord) -> Option<f64>| mean(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            homes.push(HomeSummary {
                home: id,
                trials_ok: ok.len(),
                solar_nrmse: pick(&|r| r.solar_nrmse()),
                solar_rmse: pick(&|r| r.solar.map(|s| s.rmse)),
                load_nrmse: pick(&|r| r.load_nrmse()),
                load_rmse: pick(&|r| r.load.map(|s| s.rmse)),
            });
        }
        let col = |f: fn(&HomeSummary) -> f64| homes.iter().map(f).collect::<Vec<_>>();
        let solar_nrmse = col(|h| h.solar_nrmse);
        let load_nrmse = col(|h| h.load_nrmse);
        let iterations: Vec<f64> = records.iter().flat_map(|r| r.block_iterations.iter().map(|&i| i as f64)).collect();
        EvalReport {
            variant,
            init,
            seed,
            length,
            trials_per_home: trials,
            mean_solar_nrmse: mean(&solar_nrmse),
            mean_solar_rmse: mean(&col(|h| h.solar_rmse)),
            mean_load_nrmse: mean(&load_nrmse),
            mean_load_rmse: mean(&col(|h| h.load_rmse)),
            solar_nrmse_distribution: Distribution::of(&solar_nrmse),
            load_nrmse_distribution: Distribution::of(&load_nrmse),
            iteration_distribution: Distribution::of(&iterations),
            capped_blocks: records.iter().flat_map(|r| &r.block_converged).filter(|c| !**c).count(),
            failed_trials: records.iter().filter(|r| r.error.is_some()).count(),
            homes,
            records,
        }
    }
}

/// Per-scenario caches shared by every run: load features and the fitted
/// deployment of every home, both as a target (from its net load) and as a
/// real proxy (from its measured generation).
pub struct Harness<'a> {
    pub scenario: &'a ScenarioBundle,
    features: LoadFeatures,
    target_max_gen: Vec<Result<TimeSeries>>,
    proxy_max_gen: Vec<Result<TimeSeries>>,
    targets: Vec<usize>,
}

fn fitted_max_gen(gen: &TimeSeries, loc: &SiteLocation, ambient: &TimeSeries) -> Result<TimeSeries> {
    let params = fit_pv_params(gen, loc, ambient, Hemisphere::of(loc))?;
    Ok(max_generation(&params, loc, ambient))
}

/// Clear-sky potential of the target's own system, estimated from its net
/// load through the base load and `[base − y]⁺`.
pub fn target_max_generation(net: &TimeSeries, loc: &SiteLocation, ambient: &TimeSeries) -> Result<TimeSeries> {
    let base = estimate_base_load(net, loc)?;
    fitted_max_gen(&approx_target_solar(net, &base), loc, ambient)
}

impl<'a> Harness<'a> {
    pub fn new(scenario: &'a ScenarioBundle) -> Self {
        let loc = &scenario.location;
        let temp = scenario.temperature();
        Harness {
            scenario,
            features: build_features(temp, loc),
            target_max_gen: scenario.homes.iter().map(|h| target_max_generation(&h.net, loc, temp)).collect(),
            proxy_max_gen: scenario.homes.iter().map(|h| fitted_max_gen(&h.true_solar, loc, temp)).collect(),
            targets: (0..scenario.homes.len()).collect(),
        }
    }

    /// Restricts the disaggregated homes; every home stays in the proxy pool.
    pub fn with_targets(mut self, targets: Vec<usize>) -> Result<Self> {
        let n = self.scenario.homes.len();
        if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::Config(format!("target home {bad} out of range (0..{n})")));
        }
        self.targets = targets;
        Ok(self)
    }

    fn cached(v: &Result<TimeSeries>) -> Result<&TimeSeries> {
        v.as_ref().map_err(|e| Error::InsufficientData(format!("deployment fit failed: {e}")))
    }

    fn synthetic(&self, setting: &ProxySetting) -> Result<Vec<(TimeSeries, TimeSeries)>> {
        let loc = &self.scenario.location;
        setting
            .synthetic
            .iter()
            .map(|p| {
                Ok((
                    synthesize_proxy(p, loc, &self.scenario.weather)?,
                    max_generation(p, loc, self.scenario.temperature()),
                ))
            })
            .collect()
    }

    fn check_pool(&self, setting: &ProxySetting) -> Result<()> {
        let available = self.scenario.homes.len();
        let needed = (setting.variant.n_real() + 1).max(2);
        if available < needed {
            return Err(Error::PoolTooSmall { needed, available });
        }
        Ok(())
    }

    /// Real proxies for one trial: a seeded shuffle of the other homes, of
    /// which the first `n` are used. Variants with fewer real proxies see a
    /// prefix of the same draw.
    pub fn draw_real_proxies(&self, home: usize, n: usize, trial_seed: u64) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..self.scenario.homes.len()).filter(|&h| h != home).collect();
        pool.shuffle(&mut seed::rng(seed::derive(trial_seed, 1)));
        pool.truncate(n);
        pool
    }

    fn run_trial(
        &self,
        home: usize,
        trial: usize,
        length: usize,
        setting: &ProxySetting,
        synthetic: &[(TimeSeries, TimeSeries)],
        cfg: &BenchConfig,
    ) -> TrialRecord {
        let trial_seed = seed::derive_path(cfg.seed, &[home as u64, trial as u64]);
        let real = self.draw_real_proxies(home, setting.variant.n_real(), trial_seed);
        let mut record = TrialRecord {
            home,
            trial,
            real_proxies: real.clone(),
            block_iterations: Vec::new(),
            block_converged: Vec::new(),
            solar: None,
            load: None,
            output_checks_passed: true,
            error: None,
        };
        if let Err(e) = self.run_blocks(home, &real, length, synthetic, cfg, trial_seed, &mut record) {
            record.error = Some(e.to_string());
        }
        record
    }

    #[allow(clippy::too_many_arguments)]
    fn run_blocks(
        &self,
        home: usize,
        real: &[usize],
        length: usize,
        synthetic: &[(TimeSeries, TimeSeries)],
        cfg: &BenchConfig,
        trial_seed: u64,
        record: &mut TrialRecord,
    ) -> Result<()> {
        let sc = self.scenario;
        let loc = &sc.location;
        let target = &sc.homes[home];
        let mut columns = Vec::new();
        let mut provenance = Vec::new();
        let mut max_gens = Vec::new();
        for &r in real {
            columns.push(sc.homes[r].true_solar.clone());
            provenance.push(Provenance::Real);
            max_gens.push(Self::cached(&self.proxy_max_gen[r])?.clone());
        }
        for (gen, max_gen) in synthetic {
            columns.push(gen.clone());
            provenance.push(Provenance::Synthetic);
            max_gens.push(max_gen.clone());
        }
        let k = columns.len();
        let x = ProxyMatrix::new(columns, provenance)?;
        let target_max_gen = match cfg.init {
            InitMethod::Ours => Some(Self::cached(&self.target_max_gen[home])?),
            _ => None,
        };

        let blocks = sc.len() / length;
        let mut solar_est = Vec::with_capacity(blocks * length);
        let mut load_est = Vec::with_capacity(blocks * length);
        for b in 0..blocks {
            let offset = b * length;
            let y = target.net.window(offset, length)?;
            let xb = x.window(offset, length)?;
            let features = self.features.window(offset, length)?;
            let raw = match cfg.init {
                InitMethod::Ours => {
                    let m_c = target_max_gen.expect("fitted above").window(offset, length)?;
                    let m_p = max_gens.iter().map(|m| m.window(offset, length)).collect::<Result<Vec<_>>>()?;
                    init_weights(&m_p, &m_c)?.weights
                }
                InitMethod::ConstantOne => constant_init(k),
                InitMethod::UniformRandom => uniform_random_init(k, seed::derive_path(trial_seed, &[2, b as u64])),
            };
            let w0 = WeightVector::new(raw)?;
            let dcfg = DisaggConfig {
                master_seed: seed::derive_path(trial_seed, &[3, b as u64]),
                ..cfg.disagg
            };
            let res = disaggregate(&y, &xb, &w0, &features, loc, &dcfg)?;
            if verify_output(&y, &res, loc).is_err() {
                record.output_checks_passed = false;
            }
            record.block_iterations.push(res.iterations);
            record.block_converged.push(res.converged);
            solar_est.extend_from_slice(res.solar.values());
            load_est.extend_from_slice(res.load.values());
        }
        let covered = blocks * length;
        record.solar = Some(ErrorStats::from_values(&target.true_solar.values()[..covered], &solar_est));
        record.load = Some(ErrorStats::from_values(&target.true_load.values()[..covered], &load_est));
        Ok(())
    }

    fn run(&self, setting: &ProxySetting, length: usize, cfg: &BenchConfig) -> Result<EvalReport> {
        self.check_pool(setting)?;
        if length == 0 || length > self.scenario.len() {
            return Err(Error::LengthTooLong { length, available: self.scenario.len() });
        }
        let synthetic = self.synthetic(setting)?;
        let jobs: Vec<(usize, usize)> = self.targets.iter().flat_map(|&h| (0..cfg.trials).map(move |t| (h, t))).collect();
        let threads = match cfg.threads {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
        .min(jobs.len().max(1));
        let run = |&(home, trial): &(usize, usize)| {
            let r = self.run_trial(home, trial, length, setting, &synthetic, cfg);
            log::info!(
                "{} {} home {home} trial {trial}: solar nRMSE {:?}, iterations {:?}",
                setting.variant,
                cfg.init.name(),
                r.solar_nrmse(),
                r.block_iterations
            );
            r
        };
        let records: Vec<TrialRecord> = if threads <= 1 {
            jobs.iter().map(run).collect()
        } else {
            // Strided assignment keeps long and short homes mixed per worker.
            let mut slots: Vec<Option<TrialRecord>> = vec![None; jobs.len()];
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..threads)
                    .map(|w| {
                        let (jobs, run) = (&jobs, &run);
                        scope.spawn(move || (w..jobs.len()).step_by(threads).map(|i| (i, run(&jobs[i]))).collect::<Vec<_>>())
                    })
                    .collect();
                for h in handles {
                    for (i, r) in h.join().expect("benchmark worker panicked") {
                        slots[i] = Some(r);
                    }
                }
            });
            slots.into_iter().map(|r| r.expect("every job ran")).collect()
        };
        Ok(EvalReport::assemble(setting.variant, cfg.init, cfg.seed, length, cfg.trials, records))
    }

    /// Every home disaggregated over the full window, `trials` times with
    /// independently drawn real proxies.
    pub fn run_benchmark(&self, setting: &ProxySetting, cfg: &BenchConfig) -> Result<EvalReport> {
        self.run(setting, self.scenario.len(), cfg)
    }

    /// The window split into consecutive blocks of each length (a trailing
    /// partial block is dropped), each block disaggregated independently.
    pub fn sweep_length(&self, lengths: &[usize], setting: &ProxySetting, cfg: &BenchConfig) -> Result<Vec<EvalReport>> {
        for &l in lengths {
            if l > self.scenario.len() {
                return Err(Error::LengthTooLong { length: l, available: self.scenario.len() });
            }
        }
        lengths.iter().map(|&l| self.run(setting, l, cfg)).collect()
    }

    /// The same benchmark under each initialization method.
    pub fn compare_initializations(&self, setting: &ProxySetting, cfg: &BenchConfig) -> Result<Vec<EvalReport>> {
        InitMethod::ALL
            .iter()
            .map(|&init| self.run_benchmark(setting, &BenchConfig { init, ..*cfg }))
            .collect()
    }
}
