//! Phase I fitting and Phase II monitoring, plus the Monte Carlo ARL harness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::embedding::{fit_embedding, EmbeddingMap, Method};
use crate::error::{Error, Result};
use crate::manifold_fit::{fit_manifold, FitConfig, FittedManifold};
use crate::prewhiten::{fit_ar_with, ARFilter, ARModel, ArOrder};
use crate::processes::{SphereConfig, SphereProcess};
use crate::rankcharts::{ChartConfig, ChartStep, DfewmaState, UdfmState};

/// Default number of Phase II steps before a run is censored.
pub const DEFAULT_HORIZON: usize = 1000;

/// How Phase I is divided: fit/learn, AR fitting, chart reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPlan {
    pub m_fit: usize,
    pub m_ar: usize,
    pub m_chart: usize,
}

impl SplitPlan {
    pub const SPHERE: SplitPlan = SplitPlan {
        m_fit: 700,
        m_ar: 400,
        m_chart: 100,
    };

    pub fn total(&self) -> usize {
        self.m_fit + self.m_ar + self.m_chart
    }

    pub fn validate(&self, phase1_len: usize) -> Result<()> {
        if self.m_fit == 0 || self.m_ar == 0 || self.m_chart == 0 {
            return Err(Error::invalid("split", "all three parts must be positive"));
        }
        if self.total() != phase1_len {
            return Err(Error::invalid(
                "split",
                format!("parts sum to {} but Phase I has {phase1_len} observations", self.total()),
            ));
        }
        Ok(())
    }

    fn ranges(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>, std::ops::Range<usize>) {
        let a = self.m_fit;
        let b = a + self.m_ar;
        (0..a, a..b, b..b + self.m_chart)
    }
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self::SPHERE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfConfig {
    pub fit: FitConfig,
    /// Known noise level; estimated from the fitting sample when absent.
    pub sigma: Option<f64>,
    pub ar: ArOrder,
    /// Skip AR filtering and chart the raw deviations.
    pub prewhiten: bool,
    pub chart: ChartConfig,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            sigma: None,
            ar: ArOrder::default(),
            prewhiten: true,
            chart: ChartConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlConfig {
    pub method: Method,
    /// Embedding dimension.
    pub d: usize,
    pub k_neighbors: usize,
    pub ar: ArOrder,
    pub prewhiten: bool,
    pub chart: ChartConfig,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            method: Method::Npe,
            d: 3,
            k_neighbors: 15,
            ar: ArOrder::default(),
            prewhiten: true,
            chart: ChartConfig::default(),
        }
    }
}

/// Outcome of monitoring one Phase II stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRun {
    /// First alarm step, or the number of steps observed when censored.
    pub run_length: usize,
    pub censored: bool,
    pub trace: Vec<ChartStep>,
}

/// A Phase II monitor fed one observation at a time.
pub trait Monitor {
    fn step(&mut self, y: &[f64]) -> Result<ChartStep>;
}

/// Feeds `stream` until the first alarm or `horizon` steps.
pub fn run_monitor<M, I, Y>(monitor: &mut M, stream: I, horizon: usize) -> Result<MonitorRun>
where
    M: Monitor + ?Sized,
    I: IntoIterator<Item = Y>,
    Y: AsRef<[f64]>,
{
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let mut trace = Vec::new();
    for y in stream.into_iter().take(horizon) {
        let step = monitor.step(y.as_ref())?;
        trace.push(step);
        if step.alarm {
            return Ok(MonitorRun {
                run_length: trace.len(),
                censored: false,
                trace,
            });
        }
    }
    if trace.is_empty() {
        return Err(Error::TooShort { len: 0, needed: 1 });
    }
    Ok(MonitorRun {
        run_length: trace.len(),
        censored: true,
        trace,
    })
}

fn check_phase1(phase1: &[Vec<f64>], split: &SplitPlan) -> Result<()> {
    split.validate(phase1.len())?;
    PointCloud::new(phase1).map(|_| ())
}

/// Fitted manifold, AR model and chart reference for the manifold-fitting pipeline.
#[derive(Debug, Clone)]
pub struct MfMonitor {
    manifold: FittedManifold,
    filter: Option<ARFilter>,
    chart: UdfmState,
    reference: Vec<f64>,
}

impl MfMonitor {
    pub fn fit(phase1: &[Vec<f64>], split: &SplitPlan, cfg: &MfConfig) -> Result<Self> {
        check_phase1(phase1, split)?;
        let (fit, ar, chart) = split.ranges();
        let manifold = fit_manifold(PointCloud::new(&phase1[fit])?, &cfg.fit, cfg.sigma)?;
        let deviations = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
            phase1[range].iter().map(|y| manifold.deviation(y)).collect()
        };
        let ar_dev = deviations(ar)?;
        let chart_dev = deviations(chart)?;
        let (filter, reference) = if cfg.prewhiten {
            let model = fit_ar_with(&ar_dev, cfg.ar)?;
            let mut filter = ARFilter::with_history(model, &ar_dev);
            let reference = filter.filter_series(&chart_dev);
            (Some(filter), reference)
        } else {
            (None, chart_dev)
        };
        let chart = UdfmState::new(&reference, &cfg.chart)?;
        Ok(Self {
            manifold,
            filter,
            chart,
            reference,
        })
    }

    pub fn manifold(&self) -> &FittedManifold {
        &self.manifold
    }

    pub fn ar_model(&self) -> Option<&ARModel> {
        self.filter.as_ref().map(ARFilter::model)
    }

    /// Filtered in-control deviations the chart was initialized with.
    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// A fresh Phase II session; the fitted state is left untouched.
    pub fn session(&self) -> MfSession<'_> {
        self.session_with_seed(self.chart.config().seed)
    }

    /// As [`session`](Self::session) with a different chart seed.
    pub fn session_with_seed(&self, seed: u64) -> MfSession<'_> {
        let chart = if seed == self.chart.config().seed {
            self.chart.clone()
        } else {
            let cfg = ChartConfig {
                seed,
                ..self.chart.config().clone()
            };
            UdfmState::new(&self.reference, &cfg).expect("reference already validated")
        };
        MfSession {
            manifold: &self.manifold,
            filter: self.filter.clone(),
            chart,
        }
    }
}

pub struct MfSession<'a> {
    manifold: &'a FittedManifold,
    filter: Option<ARFilter>,
    chart: UdfmState,
}

impl MfSession<'_> {
    /// Deviation, filtered value and chart update for one observation.
    pub fn observe(&mut self, y: &[f64]) -> Result<(f64, f64, ChartStep)> {
        let dev = self.manifold.deviation(y)?;
        let x = match &mut self.filter {
            Some(f) => f.push(dev),
            None => dev,
        };
        let step = self.chart.update(x)?;
        Ok((dev, x, step))
    }
}

impl Monitor for MfSession<'_> {
    fn step(&mut self, y: &[f64]) -> Result<ChartStep> {
        self.observe(y).map(|r| r.2)
    }
}

/// Embedding, per-coordinate AR models and chart reference for the manifold-learning pipeline.
#[derive(Debug, Clone)]
pub struct MlMonitor {
    map: EmbeddingMap,
    filters: Option<Vec<ARFilter>>,
    chart: DfewmaState,
    reference: Vec<Vec<f64>>,
}

impl MlMonitor {
    pub fn fit(phase1: &[Vec<f64>], split: &SplitPlan, cfg: &MlConfig) -> Result<Self> {
        check_phase1(phase1, split)?;
        let (fit, ar, chart) = split.ranges();
        let map = fit_embedding(&PointCloud::new(&phase1[fit])?, cfg.method, cfg.d, cfg.k_neighbors)?;
        let embed = |range: std::ops::Range<usize>| -> Result<Vec<Vec<f64>>> {
            phase1[range].iter().map(|y| map.embed(y)).collect()
        };
        let ar_emb = embed(ar)?;
        let chart_emb = embed(chart)?;
        let (filters, reference) = if cfg.prewhiten {
            let mut filters = Vec::with_capacity(cfg.d);
            for i in 0..cfg.d {
                let series: Vec<f64> = ar_emb.iter().map(|v| v[i]).collect();
                let model = fit_ar_with(&series, cfg.ar)?;
                filters.push(ARFilter::with_history(model, &series));
            }
            let reference = chart_emb
                .iter()
                .map(|v| filters.iter_mut().zip(v).map(|(f, &x)| f.push(x)).collect())
                .collect();
            (Some(filters), reference)
        } else {
            (None, chart_emb)
        };
        let chart = DfewmaState::new(&reference, &cfg.chart)?;
        Ok(Self {
            map,
            filters,
            chart,
            reference,
        })
    }

    pub fn map(&self) -> &EmbeddingMap {
        &self.map
    }

    pub fn reference(&self) -> &[Vec<f64>] {
        &self.reference
    }

    pub fn session(&self) -> MlSession<'_> {
        self.session_with_seed(self.chart.config().seed)
    }

    pub fn session_with_seed(&self, seed: u64) -> MlSession<'_> {
        let chart = if seed == self.chart.config().seed {
            self.chart.clone()
        } else {
            let cfg = ChartConfig {
                seed,
                ..self.chart.config().clone()
            };
            DfewmaState::new(&self.reference, &cfg).expect("reference already validated")
        };
        MlSession {
            map: &self.map,
            filters: self.filters.clone(),
            chart,
        }
    }
}

pub struct MlSession<'a> {
    map: &'a EmbeddingMap,
    filters: Option<Vec<ARFilter>>,
    chart: DfewmaState,
}

impl MlSession<'_> {
    /// Embedded point, filtered residuals and chart update for one observation.
    pub fn observe(&mut self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>, ChartStep)> {
        let e = self.map.embed(y)?;
        let r = match &mut self.filters {
            Some(fs) => fs.iter_mut().zip(&e).map(|(f, &x)| f.push(x)).collect(),
            None => e.clone(),
        };
        let step = self.chart.update(&r)?;
        Ok((e, r, step))
    }
}

impl Monitor for MlSession<'_> {
    fn step(&mut self, y: &[f64]) -> Result<ChartStep> {
        self.observe(y).map(|r| r.2)
    }
}

/// Algorithm: fit on Phase I, then monitor `phase2` until alarm or `horizon`.
pub fn run_mf_pipeline<I, Y>(
    phase1: &[Vec<f64>],
    phase2: I,
    split: &SplitPlan,
    cfg: &MfConfig,
    horizon: usize,
) -> Result<MonitorRun>
where
    I: IntoIterator<Item = Y>,
    Y: AsRef<[f64]>,
{
    let monitor = MfMonitor::fit(phase1, split, cfg)?;
    run_monitor(&mut monitor.session(), phase2, horizon)
}

pub fn run_ml_pipeline<I, Y>(
    phase1: &[Vec<f64>],
    phase2: I,
    split: &SplitPlan,
    cfg: &MlConfig,
    horizon: usize,
) -> Result<MonitorRun>
where
    I: IntoIterator<Item = Y>,
    Y: AsRef<[f64]>,
{
    let monitor = MlMonitor::fit(phase1, split, cfg)?;
    run_monitor(&mut monitor.session(), phase2, horizon)
}

/// Run-length summary over replications; censored runs count at their observed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArlSummary {
    pub arl: f64,
    pub sdrl: f64,
    pub replications: usize,
    pub censored: usize,
}

impl ArlSummary {
    pub fn from_runs(runs: &[(usize, bool)]) -> Self {
        let n = runs.len();
        let mean = runs.iter().map(|r| r.0 as f64).sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            runs.iter().map(|r| (r.0 as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            arl: mean,
            sdrl: var.sqrt(),
            replications: n,
            censored: runs.iter().filter(|r| r.1).count(),
        }
    }
}

/// Runs `run(seed)` for seeds `base_seed + i`, `i < replications`, in parallel.
pub fn estimate_arl<F>(replications: usize, base_seed: u64, run: F) -> Result<ArlSummary>
where
    F: Fn(u64) -> Result<MonitorRun> + Sync,
{
    if replications == 0 {
        return Err(Error::invalid("replications", "must be at least 1"));
    }
    let runs: Vec<(usize, bool)> = (0..replications as u64)
        .into_par_iter()
        .map(|i| run(base_seed.wrapping_add(i)).map(|r| (r.run_length, r.censored)))
        .collect::<Result<_>>()?;
    Ok(ArlSummary::from_runs(&runs))
}

/// Which monitoring procedure a study cell uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Procedure {
    Mf,
    Pca,
    Lpp,
    Npe,
}

impl Procedure {
    pub fn embedding(self) -> Option<Method> {
        match self {
            Procedure::Mf => None,
            Procedure::Pca => Some(Method::Pca),
            Procedure::Lpp => Some(Method::Lpp),
            Procedure::Npe => Some(Method::Npe),
        }
    }
}

impl std::fmt::Display for Procedure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.embedding() {
            None => f.write_str("mf"),
            Some(m) => m.fmt(f),
        }
    }
}

/// A mean shift of `delta · σ` on one ambient coordinate (1-based), present
/// from the first Phase II observation. `coordinate = 0` means no shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub coordinate: usize,
    pub delta: f64,
}

/// Monte Carlo study on the sphere process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereStudy {
    /// Process parameters; `n` and `seed` are ignored (set per replication).
    pub sphere: SphereConfig,
    pub split: SplitPlan,
    pub horizon: usize,
    pub procedures: Vec<Procedure>,
    pub scenarios: Vec<Scenario>,
    pub mf: MfConfig,
    pub ml: MlConfig,
}

impl Default for SphereStudy {
    /// The 2-sphere in `R⁶` study with its published settings.
    fn default() -> Self {
        Self {
            sphere: SphereConfig {
                d: 2,
                ambient_dim: 6,
                sigma_x: 0.3,
                sigma: 0.1,
                n: 0,
                seed: 0,
            },
            split: SplitPlan::SPHERE,
            horizon: DEFAULT_HORIZON,
            procedures: vec![Procedure::Mf, Procedure::Npe, Procedure::Lpp, Procedure::Pca],
            scenarios: vec![
                Scenario { coordinate: 0, delta: 0.0 },
                Scenario { coordinate: 1, delta: 3.0 },
                Scenario { coordinate: 1, delta: 10.0 },
                Scenario { coordinate: 4, delta: 3.0 },
                Scenario { coordinate: 4, delta: 10.0 },
            ],
            mf: MfConfig {
                fit: FitConfig {
                    c0: 5.0,
                    c1: 3.0,
                    c2: 5.0,
                    d_hint: Some(2),
                    ..FitConfig::default()
                },
                ar: ArOrder::Fixed(10),
                ..MfConfig::default()
            },
            ml: MlConfig {
                d: 3,
                k_neighbors: 15,
                ar: ArOrder::Fixed(10),
                ..MlConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub procedure: Procedure,
    pub scenario: Scenario,
    pub summary: ArlSummary,
}

impl SphereStudy {
    /// Fewer Phase I observations (280) than ambient dimensions (300):
    /// only the manifold-fitting procedure applies.
    pub fn high_dimensional() -> Self {
        Self {
            sphere: SphereConfig {
                d: 2,
                ambient_dim: 300,
                sigma_x: 0.3,
                sigma: 0.01,
                n: 0,
                seed: 0,
            },
            split: SplitPlan {
                m_fit: 200,
                m_ar: 60,
                m_chart: 20,
            },
            procedures: vec![Procedure::Mf],
            scenarios: vec![Scenario { coordinate: 0, delta: 0.0 }],
            mf: MfConfig {
                fit: FitConfig {
                    c0: 50.0,
                    c1: 35.0,
                    c2: 50.0,
                    d_hint: Some(2),
                    ..FitConfig::default()
                },
                ar: ArOrder::Aic { p_max: 10 },
                ..MfConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sphere.validate()?;
        self.split.validate(self.split.total())?;
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        for s in &self.scenarios {
            if s.coordinate > self.sphere.ambient_dim {
                return Err(Error::IndexOutOfRange {
                    index: s.coordinate,
                    len: self.sphere.ambient_dim,
                });
            }
        }
        self.mf.fit.validate()?;
        self.mf.chart.validate()?;
        self.ml.chart.validate()
    }

    /// Phase I and the unshifted Phase II stream for one replication.
    pub fn simulate(&self, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let cfg = SphereConfig {
            seed,
            ..self.sphere.clone()
        };
        let mut process = SphereProcess::new(&cfg)?;
        let phase1 = (&mut process).take(self.split.total()).map(|p| p.1).collect();
        let phase2 = process.take(self.horizon).map(|p| p.1).collect();
        Ok((phase1, phase2))
    }

    fn shifted<'a>(&self, phase2: &'a [Vec<f64>], s: Scenario) -> impl Iterator<Item = Vec<f64>> + 'a {
        let amount = s.delta * self.sphere.sigma;
        let coord = s.coordinate;
        phase2.iter().map(move |y| {
            let mut y = y.clone();
            if coord > 0 {
                y[coord - 1] += amount;
            }
            y
        })
    }

    /// Run lengths of every (procedure, scenario) pair for one replication,
    /// in procedure-major order. Scenarios share the fitted monitor and the
    /// underlying Phase II noise.
    pub fn replicate(&self, seed: u64) -> Result<Vec<(usize, bool)>> {
        let (phase1, phase2) = self.simulate(seed)?;
        let chart_seed = seed ^ 0x5851_F42D_4C95_7F2D;
        let mut out = Vec::with_capacity(self.procedures.len() * self.scenarios.len());
        for &p in &self.procedures {
            match p.embedding() {
                None => {
                    let mut cfg = self.mf.clone();
                    cfg.chart.seed = chart_seed;
                    let monitor = MfMonitor::fit(&phase1, &self.split, &cfg)?;
                    for &s in &self.scenarios {
                        let run = run_monitor(&mut monitor.session(), self.shifted(&phase2, s), self.horizon)?;
                        out.push((run.run_length, run.censored));
                    }
                }
                Some(method) => {
                    let mut cfg = self.ml.clone();
                    cfg.method = method;
                    cfg.chart.seed = chart_seed;
                    let monitor = MlMonitor::fit(&phase1, &self.split, &cfg)?;
                    for &s in &self.scenarios {
                        let run = run_monitor(&mut monitor.session(), self.shifted(&phase2, s), self.horizon)?;
                        out.push((run.run_length, run.censored));
                    }
                }
            }
        }
        Ok(out)
    }

    /// ARL/SDRL for every cell over `replications` seeds `base_seed + i`.
    pub fn run(&self, replications: usize, base_seed: u64) -> Result<Vec<StudyCell>> {
        self.validate()?;
        if replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        let per_rep: Vec<Vec<(usize, bool)>> = (0..replications as u64)
            .into_par_iter()
            .map(|i| self.replicate(base_seed.wrapping_add(i)))
            .collect::<Result<_>>()?;
        let mut cells = Vec::new();
        let mut idx = 0;
        for &procedure in &self.procedures {
            for &scenario in &self.scenarios {
                let runs: Vec<(usize, bool)> = per_rep.iter().map(|r| r[idx]).collect();
                cells.push(StudyCell {
                    procedure,
                    scenario,
                    summary: ArlSummary::from_runs(&runs),
                });
                idx += 1;
            }
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Geometric};

    struct Fixed(usize, usize);

    impl Monitor for Fixed {
        fn step(&mut self, _: &[f64]) -> Result<ChartStep> {
            self.1 += 1;
            Ok(ChartStep {
                n: self.1,
                statistic: 0.0,
                limit: 0.0,
                alarm: self.1 == self.0,
                conditional: true,
                survivors: 0,
            })
        }
    }

    fn small_study() -> SphereStudy {
        SphereStudy {
            split: SplitPlan {
                m_fit: 300,
                m_ar: 150,
                m_chart: 60,
            },
            horizon: 200,
            mf: MfConfig {
                ar: ArOrder::Fixed(3),
                chart: ChartConfig {
                    replicates: 300,
                    ..ChartConfig::default()
                },
                ..SphereStudy::default().mf
            },
            ml: MlConfig {
                ar: ArOrder::Fixed(3),
                k_neighbors: 10,
                chart: ChartConfig {
                    replicates: 300,
                    ..ChartConfig::default()
                },
                ..SphereStudy::default().ml
            },
            ..SphereStudy::default()
        }
    }

    #[test]
    fn deterministic_alarm_summary() {
        let s = estimate_arl(10, 0, |_| {
            let stream = vec![vec![0.0]; 10];
            run_monitor(&mut Fixed(3, 0), stream, 10)
        })
        .unwrap();
        assert_eq!((s.arl, s.sdrl, s.censored), (3.0, 0.0, 0));
    }

    #[test]
    fn geometric_moments() {
        let alpha = 0.05;
        let geo = Geometric::new(alpha).unwrap();
        let s = estimate_arl(20_000, 0, |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rl = geo.sample(&mut rng) as usize + 1;
            run_monitor(&mut Fixed(rl, 0), std::iter::repeat(vec![0.0]), 10_000)
        })
        .unwrap();
        assert!((s.arl - 1.0 / alpha).abs() < 0.05 / alpha, "{}", s.arl);
        let sd = (1.0 - alpha).sqrt() / alpha;
        assert!((s.sdrl - sd).abs() < 0.05 * sd, "{}", s.sdrl);
    }

    #[test]
    fn horizon_censoring() {
        let run = run_monitor(&mut Fixed(5, 0), vec![vec![0.0]; 10], 1).unwrap();
        assert!(run.censored);
        assert_eq!((run.run_length, run.trace.len()), (1, 1));
    }

    #[test]
    fn split_validation() {
        assert!(SplitPlan::SPHERE.validate(1200).is_ok());
        assert!(SplitPlan::SPHERE.validate(1199).is_err());
        assert!(SplitPlan { m_fit: 0, m_ar: 1, m_chart: 1 }.validate(2).is_err());
    }

    #[test]
    fn pipelines_are_deterministic_and_detect() {
        let study = small_study();
        let (phase1, phase2) = study.simulate(3).unwrap();
        let shifted: Vec<Vec<f64>> = study.shifted(&phase2, Scenario { coordinate: 4, delta: 10.0 }).collect();
        let a = run_mf_pipeline(&phase1, &shifted, &study.split, &study.mf, 200).unwrap();
        let b = run_mf_pipeline(&phase1, &shifted, &study.split, &study.mf, 200).unwrap();
        assert_eq!(a, b);
        assert!(a.run_length <= 10 && !a.censored);
        assert_eq!(a.trace.len(), a.run_length);
        let ml = run_ml_pipeline(&phase1, &shifted, &study.split, &study.ml, 200).unwrap();
        assert_eq!(ml, run_ml_pipeline(&phase1, &shifted, &study.split, &study.ml, 200).unwrap());
    }

    #[test]
    fn phase2_data_never_enter_fitting() {
        let study = small_study();
        let (phase1, phase2) = study.simulate(4).unwrap();
        let m1 = MfMonitor::fit(&phase1, &study.split, &study.mf).unwrap();
        let mut s1 = m1.session();
        let mut s2 = m1.session();
        for y in phase2.iter().take(5) {
            s1.observe(y).unwrap();
        }
        // The monitor itself is unchanged by a session: a fresh session repeats.
        let first = s2.observe(&phase2[0]).unwrap();
        assert_eq!(first, m1.session().observe(&phase2[0]).unwrap());
        assert_eq!(m1.manifold().cloud().len(), study.split.m_fit);
        assert_eq!(m1.reference().len(), study.split.m_chart);
    }

    #[test]
    fn ml_refuses_too_few_points() {
        let split = SplitPlan {
            m_fit: 8,
            m_ar: 30,
            m_chart: 20,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phase1: Vec<Vec<f64>> = (0..58)
            .map(|_| (0..10).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect())
            .collect();
        for method in [Method::Pca, Method::Lpp, Method::Npe] {
            let cfg = MlConfig {
                method,
                d: 2,
                k_neighbors: 4,
                ..MlConfig::default()
            };
            assert!(matches!(MlMonitor::fit(&phase1, &split, &cfg), Err(Error::IllPosed { .. })));
        }
    }

    #[test]
    fn small_study_runs() {
        let study = SphereStudy {
            scenarios: vec![Scenario { coordinate: 0, delta: 0.0 }, Scenario { coordinate: 4, delta: 10.0 }],
            ..small_study()
        };
        let cells = study.run(4, 10).unwrap();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells, study.run(4, 10).unwrap());
        // MF catches the off-manifold shift fast.
        let mf_shift = cells.iter().find(|c| c.procedure == Procedure::Mf && c.scenario.coordinate == 4).unwrap();
        assert!(mf_shift.summary.arl < 10.0);
    }
}
