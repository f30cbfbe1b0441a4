//! Replication studies: population, repeated field samples, resampling,
//! estimation, and the bias / MSE / coverage tables.
//!
//! Replications run in parallel but every random stream is derived from
//! the master seed, the design id and the replication index, and results
//! are reduced in replication order. Output files are therefore identical
//! for any thread count.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ConfigMap};
use crate::estimators::{self as est, EstimateResult, EstimatorError, EstimatorId, PairTable, VarianceId};
use crate::fieldsim::{self, DesignConfig, DesignKind, FieldError, SampleNetwork, SurveyStats};
use crate::netpop::{self, AttributeTable, NetpopError, PopulationGraph};
use crate::oracle::{self, AttributeSpec, DegreeDistribution, DegreeModel, OracleError, SyntheticPopSpec};
use crate::resampler::{
    self, BurnIn, InclusionFrequencies, PairFrequency, ResampleConfig, ResampleDiagnostics,
    ResampleError, ResampleMode,
};
use crate::rng;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid study: {0}")]
    Study(String),
    #[error(transparent)]
    Population(#[from] NetpopError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{design} replication {replication} (seed {sub_seed:#x}): {source}")]
    Replication {
        design: &'static str,
        replication: usize,
        sub_seed: u64,
        source: Box<HarnessError>,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("data file: {0}")]
    Data(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Process exit code: 1 usage or configuration, 2 data, 3 internal
/// invariant.
pub fn exit_code(err: &HarnessError) -> i32 {
    use HarnessError as H;
    match err {
        H::Config(_) | H::Study(_) => 1,
        H::Replication { source, .. } => exit_code(source),
        H::Invariant(_) => 3,
        H::Field(FieldError::Config(_)) | H::Resample(_) => 1,
        H::Oracle(OracleError::NotConverged { .. }) => 3,
        H::Oracle(OracleError::Field(FieldError::Config(_))) => 1,
        H::Oracle(OracleError::Field(_)) => 2,
        H::Oracle(_) => 1,
        H::Population(_) | H::Field(_) | H::Estimator(_) | H::Data(_) | H::Csv(_) | H::Io { .. } => 2,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug)]
pub enum PopulationSource {
    Files {
        edges: PathBuf,
        attributes: Option<PathBuf>,
    },
    /// Generated from the master seed unless `seed` is given.
    Synthetic {
        spec: SyntheticPopSpec,
        seed: Option<u64>,
    },
    InMemory {
        graph: Arc<PopulationGraph>,
        attrs: Arc<AttributeTable>,
    },
}

/// Stream index reserved for population generation.
const POPULATION_STREAM: u64 = u64::MAX;

impl PopulationSource {
    pub fn load(&self, master_seed: u64) -> Result<(Arc<PopulationGraph>, Arc<AttributeTable>)> {
        match self {
            PopulationSource::Files { edges, attributes } => {
                let ef = BufReader::new(File::open(edges).map_err(io_err(edges))?);
                let (graph, attrs) = match attributes {
                    Some(a) => {
                        let af = File::open(a).map_err(io_err(a))?;
                        let (g, t, _) = netpop::load_population(ef, af)?;
                        (g, t)
                    }
                    None => (netpop::load_edges(ef)?.0, AttributeTable::empty()),
                };
                Ok((Arc::new(graph), Arc::new(attrs)))
            }
            PopulationSource::Synthetic { spec, seed } => {
                let seed = seed.unwrap_or_else(|| rng::derive_seed(master_seed, &[POPULATION_STREAM]));
                let (g, t, _) = oracle::gen_population(spec, seed)?;
                Ok((Arc::new(g), Arc::new(t)))
            }
            PopulationSource::InMemory { graph, attrs } => Ok((graph.clone(), attrs.clone())),
        }
    }
}

/// Size of each resample, absolute or relative to the field sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResampleTarget {
    Fixed(usize),
    Fraction(f64),
}

impl ResampleTarget {
    pub fn resolve(self, sample_size: usize) -> usize {
        match self {
            ResampleTarget::Fixed(m) => m,
            ResampleTarget::Fraction(x) => ((x * sample_size as f64).round() as usize).clamp(1, sample_size.max(1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EstimatorSpec {
    pub estimator: EstimatorId,
    pub variance: VarianceId,
}

impl EstimatorSpec {
    pub fn new(estimator: EstimatorId, variance: VarianceId) -> Self {
        EstimatorSpec { estimator, variance }
    }

    /// Default variance for each estimator.
    pub fn default_for(estimator: EstimatorId) -> Self {
        let variance = match estimator {
            EstimatorId::AdherentWr => VarianceId::Wr,
            EstimatorId::Ratio => VarianceId::Ratio,
            _ => VarianceId::SimpleN,
        };
        EstimatorSpec { estimator, variance }
    }

    /// Parses `estimator` or `estimator:variance`.
    pub fn parse(s: &str) -> Option<Self> {
        match s.split_once(':') {
            Some((e, v)) => Some(EstimatorSpec::new(EstimatorId::parse(e.trim())?, VarianceId::parse(v.trim())?)),
            None => Some(EstimatorSpec::default_for(EstimatorId::parse(s.trim())?)),
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.estimator, self.variance)
    }

    /// Whether this pair can be computed from a field sample and its
    /// resampling output under `mode`.
    pub fn check(&self, mode: ResampleMode) -> Result<()> {
        use EstimatorId as E;
        use VarianceId as V;
        let ok = match self.estimator {
            E::Adherent => {
                mode != ResampleMode::ProcessWr
                    && matches!(
                        self.variance,
                        V::SimpleN | V::SimpleTaylor | V::TaylorEdges | V::TaylorDiag | V::TaylorConservative
                    )
            }
            E::VhCurrent | E::SampleMean => matches!(self.variance, V::SimpleN | V::SimpleTaylor),
            E::AdherentWr => mode == ResampleMode::ProcessWr && self.variance == V::Wr,
            E::BrewerPi | E::Ratio => false,
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Study(format!(
                "estimator {} is not available with resampling mode {}",
                self.label(),
                mode.name()
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParabolaWeights {
    Uniform,
    /// `1 / (p (1 - p))^2`.
    InverseBinomial,
}

impl ParabolaWeights {
    pub fn weight(self, p: f64) -> f64 {
        match self {
            ParabolaWeights::Uniform => 1.0,
            ParabolaWeights::InverseBinomial => {
                let x = p * (1.0 - p);
                if x > 0.0 {
                    1.0 / (x * x)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParabolaWeights::Uniform => "uniform",
            ParabolaWeights::InverseBinomial => "inverse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(ParabolaWeights::Uniform),
            "inverse" => Some(ParabolaWeights::InverseBinomial),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub population: PopulationSource,
    pub designs: Vec<(DesignKind, DesignConfig)>,
    pub replications: usize,
    pub resample: ResampleConfig,
    pub target: ResampleTarget,
    pub variables: Vec<String>,
    pub estimators: Vec<EstimatorSpec>,
    pub alpha: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
    pub parabola_weights: ParabolaWeights,
    /// Estimator summarised against the adherent one in `summary.csv`.
    pub comparator: EstimatorId,
}

impl StudyConfig {
    pub fn new(population: PopulationSource) -> Self {
        StudyConfig {
            population,
            designs: DesignKind::ALL.iter().map(|&d| (d, d.config())).collect(),
            replications: 1000,
            resample: ResampleConfig::process(1),
            target: ResampleTarget::Fraction(1.0 / 3.0),
            variables: vec!["degree".into(), "deg2plus".into()],
            estimators: [EstimatorId::Adherent, EstimatorId::VhCurrent, EstimatorId::SampleMean]
                .into_iter()
                .map(EstimatorSpec::default_for)
                .collect(),
            alpha: est::DEFAULT_ALPHA,
            seed: 1,
            threads: None,
            parabola_weights: ParabolaWeights::Uniform,
            comparator: EstimatorId::VhCurrent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Study(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.variables.is_empty() {
            return bad("no variables requested");
        }
        if self.designs.is_empty() {
            return bad("no designs requested");
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        if let ResampleTarget::Fraction(x) = self.target {
            if !(x > 0.0 && x <= 1.0) {
                return bad("resample target fraction must lie in (0, 1]");
            }
        }
        for spec in &self.estimators {
            spec.check(self.resample.mode)?;
        }
        Ok(())
    }

    fn needs_pairs(&self) -> bool {
        self.estimators.iter().any(|s| s.variance == VarianceId::TaylorEdges)
    }

    /// Builds a study from configuration keys (see [`study_keys`]).
    pub fn from_config(map: &ConfigMap) -> Result<Self> {
        let population = population_from_config(map)?;
        let mut cfg = StudyConfig::new(population);
        if let Some(list) = map.get_list("designs") {
            cfg.designs = list
                .iter()
                .map(|s| {
                    DesignKind::parse(s)
                        .map(|d| (d, d.config()))
                        .ok_or_else(|| HarnessError::Study(format!("unknown design `{s}`")))
                })
                .collect::<Result<_>>()?;
        }
        // shared overrides first, then per-design ones
        for kind in DesignKind::ALL {
            let mut dc = kind.config();
            apply_design_keys(map, "design", &mut dc)?;
            apply_design_keys(map, kind.slug(), &mut dc)?;
            if let Some(slot) = cfg.designs.iter_mut().find(|(d, _)| *d == kind) {
                slot.1 = dc;
            }
        }
        cfg.replications = map.get_or("replications", cfg.replications)?;
        cfg.seed = map.get_or("seed", cfg.seed)?;
        cfg.threads = map.get("threads")?;
        cfg.alpha = map.get_or("alpha", cfg.alpha)?;
        if let Some(vars) = map.get_list("variables") {
            cfg.variables = vars;
        }
        if let Some(list) = map.get_list("estimators") {
            cfg.estimators = list
                .iter()
                .map(|s| {
                    EstimatorSpec::parse(s).ok_or_else(|| HarnessError::Study(format!("unknown estimator `{s}`")))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = map.raw("comparator") {
            cfg.comparator = EstimatorId::parse(v).ok_or_else(|| map.bad("comparator", v, "unknown estimator"))?;
        }
        if let Some(v) = map.raw("parabola-weights") {
            cfg.parabola_weights =
                ParabolaWeights::parse(v).ok_or_else(|| map.bad("parabola-weights", v, "expected uniform or inverse"))?;
        }
        let (resample, target) = resample_from_config(map)?;
        cfg.resample = resample;
        cfg.target = target;
        Ok(cfg)
    }
}

const DESIGN_FIELDS: [&str; 6] = [
    "target-n",
    "seed-fraction",
    "coupon-max",
    "coupon-expiry-days",
    "redeem-prob",
    "reseed-fraction",
];

const RESAMPLE_FIELDS: [&str; 11] = [
    "mode",
    "iterations",
    "target-m",
    "target-fraction",
    "trace-p",
    "seed-p",
    "reseed-p",
    "burn-in",
    "burn-in-extra",
    "batches",
    "pairs",
];

const SYNTHETIC_FIELDS: [&str; 10] = [
    "nodes",
    "model",
    "degree",
    "mean-degree",
    "dispersion",
    "degrees",
    "sizes",
    "mean-degrees",
    "attributes",
    "seed",
];

const STUDY_FIELDS: [&str; 10] = [
    "designs",
    "replications",
    "seed",
    "threads",
    "alpha",
    "variables",
    "estimators",
    "comparator",
    "parabola-weights",
    "population.edges",
];

/// Every key understood by [`StudyConfig::from_config`].
pub fn study_keys() -> Vec<String> {
    let mut keys: Vec<String> = STUDY_FIELDS.iter().map(|s| s.to_string()).collect();
    keys.push("population.attributes".into());
    keys.extend(design_keys());
    keys.extend(resample_keys());
    keys.extend(synthetic_keys());
    keys
}

pub fn design_keys() -> Vec<String> {
    std::iter::once("design")
        .chain(DesignKind::ALL.iter().map(|d| d.slug()))
        .flat_map(|p| DESIGN_FIELDS.iter().map(move |f| format!("{p}.{f}")))
        .collect()
}

pub fn resample_keys() -> Vec<String> {
    RESAMPLE_FIELDS.iter().map(|f| format!("resample.{f}")).collect()
}

pub fn synthetic_keys() -> Vec<String> {
    SYNTHETIC_FIELDS.iter().map(|f| format!("synthetic.{f}")).collect()
}

pub fn apply_design_keys(map: &ConfigMap, prefix: &str, dc: &mut DesignConfig) -> Result<()> {
    let k = |f: &str| format!("{prefix}.{f}");
    dc.target_n = map.get_or(&k("target-n"), dc.target_n)?;
    dc.seed_fraction = map.get_or(&k("seed-fraction"), dc.seed_fraction)?;
    dc.coupon_max = map.get_or(&k("coupon-max"), dc.coupon_max)?;
    dc.coupon_expiry_days = map.get_or(&k("coupon-expiry-days"), dc.coupon_expiry_days)?;
    dc.redeem_prob = map.get_or(&k("redeem-prob"), dc.redeem_prob)?;
    dc.reseed_fraction = map.get_or(&k("reseed-fraction"), dc.reseed_fraction)?;
    Ok(())
}

pub fn resample_from_config(map: &ConfigMap) -> Result<(ResampleConfig, ResampleTarget)> {
    let mode = match map.raw("resample.mode") {
        None => ResampleMode::Process,
        Some(v) => ResampleMode::parse(v)
            .ok_or_else(|| map.bad("resample.mode", v, "expected repeated, process or process_wr"))?,
    };
    let mut rc = match mode {
        ResampleMode::Repeated => ResampleConfig::repeated(1),
        ResampleMode::Process => ResampleConfig::process(1),
        ResampleMode::ProcessWr => ResampleConfig::process_wr(1),
    };
    rc.iterations = map.get_or("resample.iterations", rc.iterations)?;
    rc.trace_p = map.get_or("resample.trace-p", rc.trace_p)?;
    rc.seed_p = map.get_or("resample.seed-p", rc.seed_p)?;
    rc.reseed_p = map.get_or("resample.reseed-p", rc.reseed_p)?;
    rc.batches = map.get_or("resample.batches", rc.batches)?;
    rc.track_pairs = map.get_bool("resample.pairs")?.unwrap_or(false);
    if let Some(extra) = map.get::<usize>("resample.burn-in-extra")? {
        rc.burn_in = BurnIn::Auto { extra };
    }
    if let Some(v) = map.raw("resample.burn-in") {
        if v != "auto" {
            let b = v
                .parse()
                .map_err(|_| map.bad("resample.burn-in", v, "expected `auto` or an iteration count"))?;
            rc.burn_in = BurnIn::Fixed(b);
        }
    }
    let target = match (map.get::<usize>("resample.target-m")?, map.get::<f64>("resample.target-fraction")?) {
        (Some(_), Some(_)) => {
            return Err(HarnessError::Study(
                "set either resample.target-m or resample.target-fraction, not both".into(),
            ))
        }
        (Some(m), None) => ResampleTarget::Fixed(m),
        (None, Some(x)) => ResampleTarget::Fraction(x),
        (None, None) => ResampleTarget::Fraction(1.0 / 3.0),
    };
    Ok((rc, target))
}

fn population_from_config(map: &ConfigMap) -> Result<PopulationSource> {
    if let Some(edges) = map.raw("population.edges") {
        return Ok(PopulationSource::Files {
            edges: PathBuf::from(edges),
            attributes: map.raw("population.attributes").map(PathBuf::from),
        });
    }
    if map.contains("synthetic.nodes") {
        return Ok(PopulationSource::Synthetic {
            spec: synthetic_spec_from_config(map)?,
            seed: map.get("synthetic.seed")?,
        });
    }
    Err(HarnessError::Study(
        "no population: set population.edges or synthetic.nodes".into(),
    ))
}

/// Reads `synthetic.*` keys. Attributes are `name:prevalence:homophily`
/// triples separated by commas.
pub fn synthetic_spec_from_config(map: &ConfigMap) -> Result<SyntheticPopSpec> {
    let nodes: usize = map
        .get("synthetic.nodes")?
        .ok_or_else(|| HarnessError::Study("synthetic.nodes is required".into()))?;
    let model = map.raw("synthetic.model").unwrap_or("configuration");
    let degree_model = match model {
        "configuration" => {
            let kind = map.raw("synthetic.degree").unwrap_or("negbin");
            let mean = map.get_or("synthetic.mean-degree", 8.0)?;
            let dist = match kind {
                "poisson" => DegreeDistribution::Poisson { mean },
                "negbin" => DegreeDistribution::ShiftedNegBinomial {
                    mean,
                    dispersion: map.get_or("synthetic.dispersion", 0.65)?,
                },
                "fixed" => DegreeDistribution::Fixed(
                    map.get_parsed_list("synthetic.degrees")?
                        .ok_or_else(|| HarnessError::Study("synthetic.degrees is required".into()))?,
                ),
                other => return Err(map.bad("synthetic.degree", other, "expected poisson, negbin or fixed").into()),
            };
            DegreeModel::Configuration(dist)
        }
        "two-component" => {
            let sizes: Vec<usize> = map.get_parsed_list("synthetic.sizes")?.unwrap_or_default();
            let means: Vec<f64> = map.get_parsed_list("synthetic.mean-degrees")?.unwrap_or_default();
            if sizes.len() != 2 || means.len() != 2 {
                return Err(HarnessError::Study(
                    "two-component needs two synthetic.sizes and two synthetic.mean-degrees".into(),
                ));
            }
            DegreeModel::TwoComponent {
                sizes: (sizes[0], sizes[1]),
                mean_degrees: (means[0], means[1]),
            }
        }
        other => return Err(map.bad("synthetic.model", other, "expected configuration or two-component").into()),
    };
    let attributes = map
        .get_list("synthetic.attributes")
        .unwrap_or_default()
        .iter()
        .map(|s| {
            parse_attribute_spec(s)
                .ok_or_else(|| HarnessError::from(map.bad("synthetic.attributes", s, "expected name:prevalence[:homophily]")))
        })
        .collect::<Result<_>>()?;
    Ok(SyntheticPopSpec {
        nodes,
        degree_model,
        attributes,
    })
}

fn parse_attribute_spec(s: &str) -> Option<AttributeSpec> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let (name, prevalence, homophily) = match parts.as_slice() {
        [name, prev] => (name, prev.parse().ok()?, 0.0),
        [name, prev, h] => (name, prev.parse().ok()?, h.parse().ok()?),
        _ => return None,
    };
    Some(AttributeSpec {
        name: name.to_string(),
        prevalence,
        homophily,
    })
}

// ---------------------------------------------------------------------------
// Estimation on one sample

/// Estimates for every requested variable and estimator on one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleEstimates {
    /// `results[variable][estimator]`.
    pub results: Vec<Vec<EstimateResult>>,
    pub zero_frequencies: usize,
    pub variance_clamps: usize,
}

pub fn estimate_sample(
    sample: &SampleNetwork,
    freq: &InclusionFrequencies,
    variables: &[String],
    estimators: &[EstimatorSpec],
    alpha: f64,
) -> Result<SampleEstimates> {
    if freq.f.len() != sample.len() {
        return Err(HarnessError::Data(format!(
            "{} frequencies for a sample of {}",
            freq.f.len(),
            sample.len()
        )));
    }
    let (f, zeros) = freq.guarded();
    let floor = 1.0 / (2.0 * freq.t_effective.max(1) as f64);
    let pairs: Option<PairTable> = freq.f_pairs.as_ref().map(|ps| {
        ps.iter()
            .map(|p| (p.a, p.b, if p.f > 0.0 { p.f } else { floor }))
            .collect()
    });
    let edges = sample.traceable_edges();
    // reported degree, floored at 1 so the weight stays invertible
    let degrees: Vec<f64> = sample.degrees().iter().map(|&d| d.max(1) as f64).collect();
    let ones = vec![1.0; sample.len()];
    let g = freq.guarded_g();
    let mut clamps = 0;
    let mut zero_count = zeros;
    if let Some((_, gz)) = &g {
        zero_count = zero_count.max(*gz);
    }
    let results = variables
        .iter()
        .map(|name| {
            let y = sample
                .values(name)
                .ok_or_else(|| NetpopError::UnknownVariable(name.clone()))?;
            estimators
                .iter()
                .map(|spec| {
                    use EstimatorId as E;
                    use VarianceId as V;
                    let mut weighted = |w: &[f64]| -> Result<(f64, f64)> {
                        let point = est::mu_f(&y, w)?;
                        let var = match spec.variance {
                            V::SimpleN => est::var_simple_n(&y, w, point)?,
                            V::SimpleTaylor => est::var_simple_taylor(&y, w, point)?,
                            V::TaylorDiag => est::var_taylor_diag(&y, w, point)?,
                            V::TaylorConservative => est::var_taylor_conservative(&y, w, point)?,
                            V::TaylorEdges => {
                                let table = pairs.as_ref().ok_or_else(|| {
                                    HarnessError::Study("taylor_edges needs pair frequencies".into())
                                })?;
                                let ev = est::var_taylor_edges(&y, w, &edges, table, point)?;
                                if ev.clamped {
                                    clamps += 1;
                                }
                                ev.variance
                            }
                            other => {
                                return Err(HarnessError::Study(format!("variance {other} not available here")))
                            }
                        };
                        Ok((point, var))
                    };
                    let (point, var) = match spec.estimator {
                        E::Adherent => weighted(&f)?,
                        E::VhCurrent => weighted(&degrees)?,
                        E::SampleMean => weighted(&ones)?,
                        E::AdherentWr => {
                            let (g, _) = g.as_ref().ok_or_else(|| {
                                HarnessError::Study("adherent_wr needs with-replacement resampling".into())
                            })?;
                            let point = est::wr_estimate(&y, &ones, g)?;
                            (point, est::wr_variance(&y, &ones, g, point)?)
                        }
                        other => return Err(HarnessError::Study(format!("estimator {other} not available here"))),
                    };
                    Ok(EstimateResult::new(spec.estimator, spec.variance, point, var, alpha)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleEstimates {
        results,
        zero_frequencies: zero_count,
        variance_clamps: clamps,
    })
}

// ---------------------------------------------------------------------------
// Studies

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub sub_seed: u64,
    pub sample_size: usize,
    pub survey: SurveyStats,
    pub resample: ResampleDiagnostics,
    pub target_m: usize,
    pub t_effective: usize,
    pub zero_frequencies: usize,
    pub variance_clamps: usize,
    /// `estimates[variable][estimator]`.
    pub estimates: Vec<Vec<EstimateResult>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableInfo {
    pub name: String,
    pub actual: f64,
    pub binary: bool,
}

/// Point-estimate metrics for one (variable, estimator) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub variable: String,
    pub estimator: EstimatorId,
    pub actual: f64,
    pub e_est: f64,
    pub bias: f64,
    pub sd: f64,
    pub mse: f64,
    /// `mse / mse(adherent)`.
    pub eff: f64,
    /// `|bias| / |bias(adherent)|`.
    pub rbias: f64,
}

/// Interval metrics for one (variable, estimator, variance) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub variable: String,
    pub spec: EstimatorSpec,
    pub actual: f64,
    pub mean_half_width: f64,
    pub mean_variance: f64,
    pub covered: usize,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignReport {
    pub design: DesignKind,
    pub config: DesignConfig,
    pub metrics: Vec<MetricRow>,
    pub coverage: Vec<CoverageRow>,
    pub replications: Vec<ReplicationRecord>,
    /// MSE parabola over binary variables for the adherent estimator.
    pub parabola: Option<ParabolaFit>,
}

impl DesignReport {
    pub fn metric(&self, variable: &str, estimator: EstimatorId) -> Option<&MetricRow> {
        self.metrics
            .iter()
            .find(|r| r.variable == variable && r.estimator == estimator)
    }

    pub fn coverage_of(&self, variable: &str, spec: EstimatorSpec) -> Option<&CoverageRow> {
        self.coverage
            .iter()
            .find(|r| r.variable == variable && r.spec == spec)
    }

    /// `(p, mse)` points of binary variables for one estimator.
    pub fn mse_points(&self, estimator: EstimatorId, variables: &[VariableInfo]) -> Vec<MsePoint> {
        variables
            .iter()
            .filter_map(|v| {
                let row = self.metric(&v.name, estimator)?;
                Some(MsePoint {
                    variable: v.name.clone(),
                    p: v.actual,
                    mse: row.mse,
                    binary: v.binary,
                    original: true,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub seed: u64,
    pub replications: usize,
    pub variables: Vec<VariableInfo>,
    pub estimators: Vec<EstimatorSpec>,
    pub comparator: EstimatorId,
    pub parabola_weights: ParabolaWeights,
    pub designs: Vec<DesignReport>,
}

impl StudyReport {
    pub fn design(&self, kind: DesignKind) -> Option<&DesignReport> {
        self.designs.iter().find(|d| d.design == kind)
    }
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::Study(format!("thread pool: {e}")))?
            .install(|| run_study_inner(cfg)),
        None => run_study_inner(cfg),
    }
}

fn run_study_inner(cfg: &StudyConfig) -> Result<StudyReport> {
    let (graph, attrs) = cfg.population.load(cfg.seed)?;
    let variables = cfg
        .variables
        .iter()
        .map(|name| {
            let values = netpop::variable_values(&graph, &attrs, name)?;
            let actual = values.iter().sum::<f64>() / values.len().max(1) as f64;
            let binary = values.iter().all(|&v| v == 0.0 || v == 1.0);
            Ok(VariableInfo {
                name: name.clone(),
                actual,
                binary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut resample = cfg.resample.clone();
    resample.track_pairs |= cfg.needs_pairs();

    let mut designs = Vec::with_capacity(cfg.designs.len());
    for &(kind, ref dc) in &cfg.designs {
        dc.validate(graph.node_count())?;
        let records = (0..cfg.replications)
            .into_par_iter()
            .map(|r| run_replication(&graph, &attrs, kind, dc, &resample, cfg, r))
            .collect::<Result<Vec<_>>>()?;
        designs.push(aggregate(kind, dc.clone(), records, &variables, cfg)?);
    }
    Ok(StudyReport {
        seed: cfg.seed,
        replications: cfg.replications,
        variables,
        estimators: cfg.estimators.clone(),
        comparator: cfg.comparator,
        parabola_weights: cfg.parabola_weights,
        designs,
    })
}

/// Seed of one replication; also printed on failure for replay.
pub fn replication_seed(master: u64, design: DesignKind, replication: usize) -> u64 {
    rng::derive_seed(master, &[design.id(), replication as u64])
}

fn run_replication(
    graph: &PopulationGraph,
    attrs: &AttributeTable,
    kind: DesignKind,
    dc: &DesignConfig,
    resample: &ResampleConfig,
    cfg: &StudyConfig,
    r: usize,
) -> Result<ReplicationRecord> {
    let sub_seed = replication_seed(cfg.seed, kind, r);
    let wrap = |e: HarnessError| HarnessError::Replication {
        design: kind.name(),
        replication: r,
        sub_seed,
        source: Box::new(e),
    };
    (|| {
        let sample = fieldsim::run_survey(graph, attrs, dc, rng::derive_seed(sub_seed, &[0]))?;
        let rc = ResampleConfig {
            target_m: cfg.target.resolve(sample.len()),
            ..resample.clone()
        };
        let freq = resampler::run(&sample, &rc, rng::derive_seed(sub_seed, &[1]))?;
        let est = estimate_sample(&sample, &freq, &cfg.variables, &cfg.estimators, cfg.alpha)?;
        Ok(ReplicationRecord {
            replication: r,
            sub_seed,
            sample_size: sample.len(),
            survey: sample.stats(),
            resample: freq.diagnostics,
            target_m: rc.target_m,
            t_effective: freq.t_effective,
            zero_frequencies: est.zero_frequencies,
            variance_clamps: est.variance_clamps,
            estimates: est.results,
        })
    })()
    .map_err(wrap)
}

fn aggregate(
    design: DesignKind,
    config: DesignConfig,
    records: Vec<ReplicationRecord>,
    variables: &[VariableInfo],
    cfg: &StudyConfig,
) -> Result<DesignReport> {
    let r = records.len() as f64;
    let mut metrics = Vec::new();
    let mut coverage = Vec::new();
    for (vi, var) in variables.iter().enumerate() {
        let actual = var.actual;
        let mut seen: Vec<EstimatorId> = Vec::new();
        for (ei, spec) in cfg.estimators.iter().enumerate() {
            let results: Vec<&EstimateResult> = records.iter().map(|rec| &rec.estimates[vi][ei]).collect();
            coverage.push(CoverageRow {
                variable: var.name.clone(),
                spec: *spec,
                actual,
                mean_half_width: results.iter().map(|e| e.half_width).sum::<f64>() / r,
                mean_variance: results.iter().map(|e| e.variance).sum::<f64>() / r,
                covered: results.iter().filter(|e| e.covers(actual)).count(),
                coverage: results.iter().filter(|e| e.covers(actual)).count() as f64 / r,
            });
            // point metrics do not depend on the variance choice
            if seen.contains(&spec.estimator) {
                continue;
            }
            seen.push(spec.estimator);
            let points: Vec<f64> = results.iter().map(|e| e.point).collect();
            metrics.push(point_metrics(&var.name, spec.estimator, &points, actual)?);
        }
    }
    for i in 0..metrics.len() {
        let adherent = metrics
            .iter()
            .find(|m| m.variable == metrics[i].variable && m.estimator == EstimatorId::Adherent)
            .map(|m| (m.mse, m.bias));
        let (eff, rbias) = match adherent {
            Some((mse, bias)) => (metrics[i].mse / mse, metrics[i].bias.abs() / bias.abs()),
            None => (f64::NAN, f64::NAN),
        };
        metrics[i].eff = eff;
        metrics[i].rbias = rbias;
    }
    let points: Vec<(f64, f64)> = variables
        .iter()
        .filter(|v| v.binary)
        .filter_map(|v| {
            metrics
                .iter()
                .find(|m| m.variable == v.name && m.estimator == EstimatorId::Adherent)
                .map(|m| (v.actual, m.mse))
        })
        .collect();
    let weights: Vec<f64> = points.iter().map(|&(p, _)| cfg.parabola_weights.weight(p)).collect();
    let parabola = fit_parabola(&points, &weights).ok();
    Ok(DesignReport {
        design,
        config,
        metrics,
        coverage,
        replications: records,
        parabola,
    })
}

/// Bias, spread and MSE of replicated point estimates. The standard
/// deviation uses the `R - 1` divisor, MSE the `R` divisor.
pub fn point_metrics(variable: &str, estimator: EstimatorId, points: &[f64], actual: f64) -> Result<MetricRow> {
    let r = points.len() as f64;
    if points.is_empty() {
        return Err(HarnessError::Study("no replications".into()));
    }
    let e_est = points.iter().sum::<f64>() / r;
    let bias = e_est - actual;
    let sd = if points.len() > 1 {
        (points.iter().map(|x| (x - e_est).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let mse = points.iter().map(|x| (x - actual).powi(2)).sum::<f64>() / r;
    let decomposed = bias * bias + (r - 1.0) / r * sd * sd;
    if (mse - decomposed).abs() > 1e-9 * mse.abs().max(decomposed.abs()) + 1e-24 {
        return Err(HarnessError::Invariant(format!(
            "{variable}/{estimator}: mse {mse} differs from bias^2 + sd^2 (R-1)/R = {decomposed}"
        )));
    }
    Ok(MetricRow {
        variable: variable.to_string(),
        estimator,
        actual,
        e_est,
        bias,
        sd,
        mse,
        eff: f64::NAN,
        rbias: f64::NAN,
    })
}

// ---------------------------------------------------------------------------
// MSE parabola

#[derive(Clone, Debug, PartialEq)]
pub struct MsePoint {
    pub variable: String,
    pub p: f64,
    pub mse: f64,
    pub binary: bool,
    /// False for mirrored complement points.
    pub original: bool,
}

/// Adds the complement `(1 - p, mse)` after each point. Only binary
/// variables have complements.
pub fn expand_complements(points: &[MsePoint]) -> Result<Vec<MsePoint>> {
    let mut out = Vec::with_capacity(points.len() * 2);
    for pt in points {
        if !pt.binary {
            return Err(HarnessError::Study(format!(
                "variable `{}` is not binary; it has no complement",
                pt.variable
            )));
        }
        out.push(MsePoint {
            original: true,
            ..pt.clone()
        });
        out.push(MsePoint {
            variable: format!("1-{}", pt.variable),
            p: 1.0 - pt.p,
            original: false,
            ..pt.clone()
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParabolaFit {
    /// Coefficient in `mse = a p (1 - p)`.
    pub a: f64,
    /// `(p, mse, weight)` for every point supplied.
    pub points: Vec<(f64, f64, f64)>,
    pub residual_ss: f64,
}

impl ParabolaFit {
    pub fn predict(&self, p: f64) -> f64 {
        self.a * p * (1.0 - p)
    }
}

/// One-parameter weighted least squares fit of `mse = a p (1 - p)`.
pub fn fit_parabola(points: &[(f64, f64)], weights: &[f64]) -> Result<ParabolaFit> {
    if points.len() != weights.len() {
        return Err(HarnessError::Study(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&(p, mse), &w) in points.iter().zip(weights) {
        if !(0.0..=1.0).contains(&p) || !(w >= 0.0 && w.is_finite()) || !mse.is_finite() {
            return Err(HarnessError::Study(format!("invalid point ({p}, {mse}) with weight {w}")));
        }
        let x = p * (1.0 - p);
        num += w * mse * x;
        den += w * x * x;
    }
    if !(den > 0.0) {
        return Err(HarnessError::Study(
            "no point with 0 < p < 1 and positive weight".into(),
        ));
    }
    let a = num / den;
    let residual_ss = points
        .iter()
        .zip(weights)
        .map(|(&(p, mse), &w)| w * (mse - a * p * (1.0 - p)).powi(2))
        .sum();
    Ok(ParabolaFit {
        a,
        points: points.iter().zip(weights).map(|(&(p, m), &w)| (p, m, w)).collect(),
        residual_ss,
    })
}

// ---------------------------------------------------------------------------
// Tables

pub const METRICS_HEADER: [&str; 9] = ["estimator", "variable", "actual", "E.est", "bias", "sd", "mse", "eff", "rbias"];
pub const COVERAGE_HEADER: [&str; 6] = ["estimator", "variance", "variable", "actual", "halfwidth", "coverage"];

fn fixed(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        format!("{v}")
    }
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// Writes the result tables and returns the paths written.
///
/// Per design: `metrics_<design>.csv` (6 decimals), `coverage_<design>.csv`
/// (2 decimals) and `coverage_detail_<design>.csv` (full precision). For the
/// study: `parabola.csv`, `parabola_points.csv`, `summary.csv` and the
/// per-replication `diagnostics.csv`.
pub fn emit_tables(report: &StudyReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for d in &report.designs {
        let slug = d.design.slug();

        let path = out_dir.join(format!("metrics_{slug}.csv"));
        let mut w = create(&path)?;
        w.write_record(METRICS_HEADER)?;
        // blocks by estimator, rows by variable
        let mut order: Vec<EstimatorId> = Vec::new();
        for s in &report.estimators {
            if !order.contains(&s.estimator) {
                order.push(s.estimator);
            }
        }
        for e in &order {
            for row in d.metrics.iter().filter(|r| r.estimator == *e) {
                w.write_record([
                    row.estimator.name().to_string(),
                    row.variable.clone(),
                    fixed(row.actual, 6),
                    fixed(row.e_est, 6),
                    fixed(row.bias, 6),
                    fixed(row.sd, 6),
                    fixed(row.mse, 6),
                    fixed(row.eff, 6),
                    fixed(row.rbias, 6),
                ])?;
            }
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);

        let path = out_dir.join(format!("coverage_{slug}.csv"));
        let mut w = create(&path)?;
        w.write_record(COVERAGE_HEADER)?;
        for s in &report.estimators {
            for row in d.coverage.iter().filter(|r| r.spec == *s) {
                w.write_record([
                    s.estimator.name().to_string(),
                    s.variance.name().to_string(),
                    row.variable.clone(),
                    fixed(row.actual, 2),
                    fixed(row.mean_half_width, 2),
                    fixed(row.coverage, 2),
                ])?;
            }
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);

        let path = out_dir.join(format!("coverage_detail_{slug}.csv"));
        let mut w = create(&path)?;
        w.write_record([
            "estimator",
            "variance",
            "variable",
            "actual",
            "mean_half_width",
            "mean_variance",
            "covered",
            "replications",
            "coverage",
        ])?;
        for s in &report.estimators {
            for row in d.coverage.iter().filter(|r| r.spec == *s) {
                w.write_record([
                    s.estimator.name().to_string(),
                    s.variance.name().to_string(),
                    row.variable.clone(),
                    row.actual.to_string(),
                    row.mean_half_width.to_string(),
                    row.mean_variance.to_string(),
                    row.covered.to_string(),
                    report.replications.to_string(),
                    row.coverage.to_string(),
                ])?;
            }
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }

    let path = out_dir.join("parabola.csv");
    let mut w = create(&path)?;
    w.write_record(["design", "estimator", "weights", "points", "a", "residual_ss"])?;
    for d in &report.designs {
        if let Some(fit) = &d.parabola {
            w.write_record([
                d.design.name().to_string(),
                EstimatorId::Adherent.name().to_string(),
                report.parabola_weights.name().to_string(),
                fit.points.len().to_string(),
                fit.a.to_string(),
                fit.residual_ss.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    let path = out_dir.join("parabola_points.csv");
    let mut w = create(&path)?;
    w.write_record(["design", "variable", "p", "mse", "original"])?;
    for d in &report.designs {
        let pts: Vec<MsePoint> = d
            .mse_points(EstimatorId::Adherent, &report.variables)
            .into_iter()
            .filter(|p| p.binary)
            .collect();
        for p in expand_complements(&pts)? {
            w.write_record([
                d.design.name().to_string(),
                p.variable.clone(),
                p.p.to_string(),
                p.mse.to_string(),
                p.original.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    let path = out_dir.join("summary.csv");
    let mut w = create(&path)?;
    w.write_record(["design", "variable", "actual", "comparator", "mse_adherent", "mse_comparator", "eff", "rbias"])?;
    for d in &report.designs {
        for v in &report.variables {
            let (Some(a), Some(c)) = (
                d.metric(&v.name, EstimatorId::Adherent),
                d.metric(&v.name, report.comparator),
            ) else {
                continue;
            };
            w.write_record([
                d.design.name().to_string(),
                v.name.clone(),
                fixed(v.actual, 6),
                report.comparator.name().to_string(),
                fixed(a.mse, 6),
                fixed(c.mse, 6),
                fixed(c.eff, 6),
                fixed(c.rbias, 6),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    let path = out_dir.join("diagnostics.csv");
    let mut w = create(&path)?;
    w.write_record([
        "design",
        "replication",
        "sub_seed",
        "sample_size",
        "survey_days",
        "reseeded",
        "expired_coupons",
        "rejected_surplus",
        "target_m",
        "burn_in",
        "t_effective",
        "mean_size",
        "stalled_resamples",
        "zero_frequencies",
        "variance_clamps",
    ])?;
    for d in &report.designs {
        for rec in &d.replications {
            w.write_record([
                d.design.name().to_string(),
                rec.replication.to_string(),
                format!("{:#x}", rec.sub_seed),
                rec.sample_size.to_string(),
                rec.survey.days.to_string(),
                rec.survey.reseeded.to_string(),
                rec.survey.expired_coupons.to_string(),
                rec.survey.rejected_surplus.to_string(),
                rec.target_m.to_string(),
                rec.resample.burn_in.to_string(),
                rec.t_effective.to_string(),
                rec.resample.mean_size.to_string(),
                rec.resample.stalled_resamples.to_string(),
                rec.zero_frequencies.to_string(),
                rec.variance_clamps.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}

// ---------------------------------------------------------------------------
// Frequency and estimate files

pub const FREQUENCIES_FILE: &str = "frequencies.csv";
pub const PAIR_FREQUENCIES_FILE: &str = "pair_frequencies.csv";

/// Writes `frequencies.csv` (and `pair_frequencies.csv` when tracked).
pub fn write_frequencies(freq: &InclusionFrequencies, sample: &SampleNetwork, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(FREQUENCIES_FILE);
    let mut w = create(&path)?;
    w.write_record(["member", "node", "f", "std_err", "g", "t_effective"])?;
    for i in 0..freq.f.len() {
        let opt = |v: &Option<Vec<f64>>| v.as_ref().map_or(String::new(), |x| x[i].to_string());
        w.write_record([
            i.to_string(),
            sample.labels().get(i).cloned().unwrap_or_default(),
            freq.f[i].to_string(),
            opt(&freq.std_err),
            opt(&freq.g),
            freq.t_effective.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    if let Some(pairs) = &freq.f_pairs {
        let path = dir.join(PAIR_FREQUENCIES_FILE);
        let mut w = create(&path)?;
        w.write_record(["a", "b", "f"])?;
        for p in pairs {
            w.write_record([p.a.to_string(), p.b.to_string(), p.f.to_string()])?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_frequencies(dir: &Path) -> Result<InclusionFrequencies> {
    let path = dir.join(FREQUENCIES_FILE);
    let mut r = csv::Reader::from_reader(File::open(&path).map_err(io_err(&path))?);
    let bad = |row: usize, what: &str| HarnessError::Data(format!("{}: row {row}: bad {what}", path.display()));
    let mut f = Vec::new();
    let mut se = Vec::new();
    let mut g = Vec::new();
    let mut t_eff = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let member: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad(row, "member"))?;
        if member != i {
            return Err(bad(row, "member order"));
        }
        f.push(rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| bad(row, "f"))?);
        let parse_opt = |k: usize| -> Result<Option<f64>> {
            match rec.get(k).unwrap_or("") {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(row, "number")),
            }
        };
        se.push(parse_opt(3)?);
        g.push(parse_opt(4)?);
        t_eff = rec.get(5).and_then(|s| s.parse().ok()).ok_or_else(|| bad(row, "t_effective"))?;
    }
    let collect = |v: Vec<Option<f64>>| -> Option<Vec<f64>> {
        if v.is_empty() || v.iter().any(Option::is_none) {
            None
        } else {
            Some(v.into_iter().flatten().collect())
        }
    };
    let pair_path = dir.join(PAIR_FREQUENCIES_FILE);
    let f_pairs = if pair_path.exists() {
        let mut r = csv::Reader::from_reader(File::open(&pair_path).map_err(io_err(&pair_path))?);
        let mut out = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| rec.get(k).and_then(|s| s.parse::<f64>().ok());
            match (num(0), num(1), num(2)) {
                (Some(a), Some(b), Some(f)) => out.push(PairFrequency {
                    a: a as usize,
                    b: b as usize,
                    f,
                }),
                _ => {
                    return Err(HarnessError::Data(format!(
                        "{}: row {}: bad pair",
                        pair_path.display(),
                        i + 2
                    )))
                }
            }
        }
        Some(out)
    } else {
        None
    };
    Ok(InclusionFrequencies {
        f,
        f_pairs,
        g: collect(g),
        std_err: collect(se),
        t_effective: t_eff,
        diagnostics: ResampleDiagnostics::default(),
    })
}

/// Writes one row per (variable, estimator). Binary variables also get the
/// interval clipped to `[0, 1]`.
pub fn write_estimates<W: Write>(
    out: W,
    sample: &SampleNetwork,
    variables: &[String],
    estimates: &SampleEstimates,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "variable",
        "estimator",
        "variance",
        "point",
        "variance_estimate",
        "half_width",
        "lo",
        "hi",
        "lo_clipped",
        "hi_clipped",
    ])?;
    for (name, row) in variables.iter().zip(&estimates.results) {
        let binary = sample
            .values(name)
            .is_some_and(|v| v.iter().all(|&x| x == 0.0 || x == 1.0));
        for e in row {
            let (cl, ch) = if binary {
                let (l, h) = e.clipped();
                (l.to_string(), h.to_string())
            } else {
                (String::new(), String::new())
            };
            w.write_record([
                name.clone(),
                e.estimator.name().to_string(),
                e.variance_id.name().to_string(),
                e.point.to_string(),
                e.variance.to_string(),
                e.half_width.to_string(),
                e.lo().to_string(),
                e.hi().to_string(),
                cl,
                ch,
            ])?;
        }
    }
    w.flush().map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok(())
}
