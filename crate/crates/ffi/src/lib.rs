//! C interface to `netsample`.
//!
//! Objects are opaque handles created by `ns_*_new`/`ns_*_run`-style
//! functions and released with the matching `ns_*_free`. Every fallible
//! function returns an [`NsStatus`]; on failure a message is kept per
//! thread and can be read with [`ns_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use netsample::estimators::{self as est, EstimatorId, VarianceId};
use netsample::fieldsim::{self, DesignConfig, DesignKind, FieldError, SampleNetwork};
use netsample::harness::{self, EstimatorSpec};
use netsample::netpop::{self, AttributeTable, PopulationGraph};
use netsample::oracle::{self, OracleError};
use netsample::resampler::{self, BurnIn, InclusionFrequencies, ResampleConfig, ResampleError, ResampleMode};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Reducible = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsDesignKind {
    Rds = 0,
    RdsPlus = 1,
    Sb = 2,
    SbPlus = 3,
}

impl From<NsDesignKind> for DesignKind {
    fn from(k: NsDesignKind) -> Self {
        match k {
            NsDesignKind::Rds => DesignKind::Rds,
            NsDesignKind::RdsPlus => DesignKind::RdsPlus,
            NsDesignKind::Sb => DesignKind::Sb,
            NsDesignKind::SbPlus => DesignKind::SbPlus,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsResampleMode {
    Repeated = 0,
    Process = 1,
    ProcessWr = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsEstimator {
    Adherent = 0,
    VhCurrent = 1,
    SampleMean = 2,
    AdherentWr = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsVariance {
    SimpleN = 0,
    SimpleTaylor = 1,
    TaylorEdges = 2,
    TaylorDiag = 3,
    TaylorConservative = 4,
    Wr = 5,
}

/// Field design parameters; see [`ns_design_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NsDesignConfig {
    pub target_n: usize,
    pub seed_fraction: f64,
    pub coupon_max: usize,
    pub coupon_expiry_days: u32,
    pub redeem_prob: f64,
    pub plus_links: bool,
    pub reseed_fraction: f64,
}

impl From<&NsDesignConfig> for DesignConfig {
    fn from(c: &NsDesignConfig) -> Self {
        DesignConfig {
            target_n: c.target_n,
            seed_fraction: c.seed_fraction,
            coupon_max: c.coupon_max,
            coupon_expiry_days: c.coupon_expiry_days,
            redeem_prob: c.redeem_prob,
            plus_links: c.plus_links,
            reseed_fraction: c.reseed_fraction,
        }
    }
}

/// Resampling parameters; see [`ns_resample_default`]. A negative
/// `burn_in` selects the automatic rule with `burn_in_extra` iterations
/// after first reaching the target size.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NsResampleConfig {
    pub mode: NsResampleMode,
    pub iterations: usize,
    pub target_m: usize,
    pub trace_p: f64,
    pub seed_p: f64,
    pub reseed_p: f64,
    pub burn_in: i64,
    pub burn_in_extra: usize,
    pub batches: usize,
    pub track_pairs: bool,
}

impl From<&NsResampleConfig> for ResampleConfig {
    fn from(c: &NsResampleConfig) -> Self {
        ResampleConfig {
            mode: match c.mode {
                NsResampleMode::Repeated => ResampleMode::Repeated,
                NsResampleMode::Process => ResampleMode::Process,
                NsResampleMode::ProcessWr => ResampleMode::ProcessWr,
            },
            iterations: c.iterations,
            target_m: c.target_m,
            trace_p: c.trace_p,
            seed_p: c.seed_p,
            reseed_p: c.reseed_p,
            burn_in: if c.burn_in < 0 {
                BurnIn::Auto {
                    extra: c.burn_in_extra,
                }
            } else {
                BurnIn::Fixed(c.burn_in as usize)
            },
            track_pairs: c.track_pairs,
            batches: c.batches,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NsEstimate {
    pub point: f64,
    pub variance: f64,
    pub half_width: f64,
    pub lo: f64,
    pub hi: f64,
}

pub struct NsPopulation {
    graph: PopulationGraph,
    attrs: AttributeTable,
}

pub struct NsSample {
    sample: SampleNetwork,
}

pub struct NsFrequencies {
    freq: InclusionFrequencies,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

struct Failure(NsStatus, String);

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        let status = match e {
            FieldError::Config(_) | FieldError::Invalid(_) => NsStatus::Config,
            _ => NsStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

impl From<ResampleError> for Failure {
    fn from(e: ResampleError) -> Self {
        Failure(NsStatus::Config, e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let status = match e {
            OracleError::Reducible { .. } => NsStatus::Reducible,
            OracleError::NotConverged { .. } => NsStatus::Internal,
            _ => NsStatus::Config,
        };
        Failure(status, e.to_string())
    }
}

impl From<est::EstimatorError> for Failure {
    fn from(e: est::EstimatorError) -> Self {
        Failure(NsStatus::Data, e.to_string())
    }
}

impl From<harness::HarnessError> for Failure {
    fn from(e: harness::HarnessError) -> Self {
        let status = match harness::exit_code(&e) {
            1 => NsStatus::Config,
            2 => NsStatus::Data,
            _ => NsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<netpop::NetpopError> for Failure {
    fn from(e: netpop::NetpopError) -> Self {
        Failure(NsStatus::Data, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NsStatus::NullArgument, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(NsStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any error or panic, and returns its status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            NsStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn pairs(p: *const usize, count: usize, what: &str) -> Result<Vec<(usize, usize)>, Failure> {
    Ok(as_slice(p, count * 2, what)?
        .chunks_exact(2)
        .map(|c| (c[0], c[1]))
        .collect())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

// ---------------------------------------------------------------------------
// Populations

/// Loads an edge list and an optional attribute CSV (`attributes_path` may
/// be NULL).
#[no_mangle]
pub unsafe extern "C" fn ns_population_load(
    edges_path: *const c_char,
    attributes_path: *const c_char,
    out: *mut *mut NsPopulation,
) -> NsStatus {
    guard(|| {
        let edges = as_str(edges_path, "edges_path")?;
        let open = |p: &str| File::open(p).map_err(|e| Failure(NsStatus::Data, format!("{p}: {e}")));
        let reader = BufReader::new(open(edges)?);
        let (graph, attrs) = if attributes_path.is_null() {
            (netpop::load_edges(reader)?.0, AttributeTable::empty())
        } else {
            let a = open(as_str(attributes_path, "attributes_path")?)?;
            let (g, t, _) = netpop::load_population(reader, a)?;
            (g, t)
        };
        put(out, NsPopulation { graph, attrs })
    })
}

/// Builds a population on nodes `0..node_count` from `edge_count` index
/// pairs stored flat in `edges`.
#[no_mangle]
pub unsafe extern "C" fn ns_population_from_edges(
    node_count: usize,
    edges: *const usize,
    edge_count: usize,
    out: *mut *mut NsPopulation,
) -> NsStatus {
    guard(|| {
        let e = pairs(edges, edge_count, "edges")?;
        if let Some(&(a, b)) = e.iter().find(|&&(a, b)| a >= node_count || b >= node_count) {
            return Err(invalid(format!("edge ({a}, {b}) out of range")));
        }
        let (graph, _) = PopulationGraph::from_index_edges(node_count, &e);
        put(
            out,
            NsPopulation {
                graph,
                attrs: AttributeTable::empty(),
            },
        )
    })
}

/// Adds or replaces a numeric attribute with one value per node.
#[no_mangle]
pub unsafe extern "C" fn ns_population_set_attribute(
    pop: *mut NsPopulation,
    name: *const c_char,
    values: *const f64,
    len: usize,
) -> NsStatus {
    guard(|| {
        let pop = pop.as_mut().ok_or_else(|| null("population"))?;
        let name = as_str(name, "name")?;
        if len != pop.graph.node_count() {
            return Err(invalid(format!(
                "{len} values for {} nodes",
                pop.graph.node_count()
            )));
        }
        let values = as_slice(values, len, "values")?.to_vec();
        let mut names = Vec::new();
        let mut columns = Vec::new();
        for (n, c) in pop.attrs.columns() {
            if n != name {
                names.push(n.to_string());
                columns.push(c.to_vec());
            }
        }
        names.push(name.to_string());
        columns.push(values);
        pop.attrs = AttributeTable::new(names, columns);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_population_node_count(pop: *const NsPopulation) -> usize {
    pop.as_ref().map_or(0, |p| p.graph.node_count())
}

#[no_mangle]
pub unsafe extern "C" fn ns_population_edge_count(pop: *const NsPopulation) -> usize {
    pop.as_ref().map_or(0, |p| p.graph.edge_count())
}

#[no_mangle]
pub unsafe extern "C" fn ns_population_free(pop: *mut NsPopulation) {
    if !pop.is_null() {
        drop(Box::from_raw(pop));
    }
}

// ---------------------------------------------------------------------------
// Field surveys

/// Fills `out` with the default parameters of a design.
#[no_mangle]
pub unsafe extern "C" fn ns_design_default(kind: NsDesignKind, out: *mut NsDesignConfig) -> NsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = DesignKind::from(kind).config();
        *out = NsDesignConfig {
            target_n: c.target_n,
            seed_fraction: c.seed_fraction,
            coupon_max: c.coupon_max,
            coupon_expiry_days: c.coupon_expiry_days,
            redeem_prob: c.redeem_prob,
            plus_links: c.plus_links,
            reseed_fraction: c.reseed_fraction,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_survey_run(
    pop: *const NsPopulation,
    cfg: *const NsDesignConfig,
    seed: u64,
    out: *mut *mut NsSample,
) -> NsStatus {
    guard(|| {
        let pop = as_ref(pop, "population")?;
        let cfg = DesignConfig::from(as_ref(cfg, "config")?);
        let sample = fieldsim::run_survey(&pop.graph, &pop.attrs, &cfg, seed)?;
        put(out, NsSample { sample })
    })
}

/// Builds a sample from local structure: `recruitment` holds
/// `(recruiter, recruit)` pairs and `plus` extra revealed links, both flat.
#[no_mangle]
pub unsafe extern "C" fn ns_sample_from_edges(
    member_count: usize,
    recruitment: *const usize,
    recruitment_count: usize,
    plus: *const usize,
    plus_count: usize,
    out: *mut *mut NsSample,
) -> NsStatus {
    guard(|| {
        let r = pairs(recruitment, recruitment_count, "recruitment")?;
        let p = pairs(plus, plus_count, "plus")?;
        let sample = SampleNetwork::from_edges(member_count, &r, &p)?;
        put(out, NsSample { sample })
    })
}

/// Adds or replaces a per-member variable.
#[no_mangle]
pub unsafe extern "C" fn ns_sample_set_variable(
    sample: *mut NsSample,
    name: *const c_char,
    values: *const f64,
    len: usize,
) -> NsStatus {
    guard(|| {
        let s = sample.as_mut().ok_or_else(|| null("sample"))?;
        let name = as_str(name, "name")?;
        if len != s.sample.len() {
            return Err(invalid(format!("{len} values for {} members", s.sample.len())));
        }
        let values = as_slice(values, len, "values")?.to_vec();
        s.sample = s.sample.clone().with_variable(name, values);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_sample_len(sample: *const NsSample) -> usize {
    sample.as_ref().map_or(0, |s| s.sample.len())
}

/// Copies population node indices of the members into `out`, which must
/// hold `len` entries where `len` equals [`ns_sample_len`].
#[no_mangle]
pub unsafe extern "C" fn ns_sample_members(sample: *const NsSample, out: *mut usize, len: usize) -> NsStatus {
    guard(|| {
        let s = as_ref(sample, "sample")?;
        let members = s.sample.members();
        if len != members.len() || out.is_null() {
            return Err(invalid(format!("output must hold {} entries", members.len())));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(members);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_sample_free(sample: *mut NsSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

// ---------------------------------------------------------------------------
// Resampling

/// Fills `out` with the default parameters of a resampling mode.
#[no_mangle]
pub unsafe extern "C" fn ns_resample_default(
    mode: NsResampleMode,
    target_m: usize,
    out: *mut NsResampleConfig,
) -> NsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = match mode {
            NsResampleMode::Repeated => ResampleConfig::repeated(target_m),
            NsResampleMode::Process => ResampleConfig::process(target_m),
            NsResampleMode::ProcessWr => ResampleConfig::process_wr(target_m),
        };
        let (burn_in, extra) = match c.burn_in {
            BurnIn::Auto { extra } => (-1, extra),
            BurnIn::Fixed(b) => (b as i64, 0),
        };
        *out = NsResampleConfig {
            mode,
            iterations: c.iterations,
            target_m,
            trace_p: c.trace_p,
            seed_p: c.seed_p,
            reseed_p: c.reseed_p,
            burn_in,
            burn_in_extra: extra,
            batches: c.batches,
            track_pairs: c.track_pairs,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_resample_run(
    sample: *const NsSample,
    cfg: *const NsResampleConfig,
    seed: u64,
    out: *mut *mut NsFrequencies,
) -> NsStatus {
    guard(|| {
        let s = as_ref(sample, "sample")?;
        let cfg = ResampleConfig::from(as_ref(cfg, "config")?);
        let freq = resampler::run(&s.sample, &cfg, seed)?;
        put(out, NsFrequencies { freq })
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_frequencies_len(freq: *const NsFrequencies) -> usize {
    freq.as_ref().map_or(0, |f| f.freq.f.len())
}

#[no_mangle]
pub unsafe extern "C" fn ns_frequencies_t_effective(freq: *const NsFrequencies) -> usize {
    freq.as_ref().map_or(0, |f| f.freq.t_effective)
}

/// Copies the inclusion frequencies `f_i` into `out` (`len` entries).
#[no_mangle]
pub unsafe extern "C" fn ns_frequencies_copy(freq: *const NsFrequencies, out: *mut f64, len: usize) -> NsStatus {
    guard(|| {
        let f = &as_ref(freq, "frequencies")?.freq.f;
        if len != f.len() || out.is_null() {
            return Err(invalid(format!("output must hold {} entries", f.len())));
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(f);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ns_frequencies_free(freq: *mut NsFrequencies) {
    if !freq.is_null() {
        drop(Box::from_raw(freq));
    }
}

// ---------------------------------------------------------------------------
// Estimation

/// Point estimate and interval for one variable of a resampled sample.
#[no_mangle]
pub unsafe extern "C" fn ns_estimate(
    sample: *const NsSample,
    freq: *const NsFrequencies,
    variable: *const c_char,
    estimator: NsEstimator,
    variance: NsVariance,
    alpha: f64,
    out: *mut NsEstimate,
) -> NsStatus {
    guard(|| {
        let s = as_ref(sample, "sample")?;
        let f = as_ref(freq, "frequencies")?;
        let name = as_str(variable, "variable")?.to_string();
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = EstimatorSpec::new(
            match estimator {
                NsEstimator::Adherent => EstimatorId::Adherent,
                NsEstimator::VhCurrent => EstimatorId::VhCurrent,
                NsEstimator::SampleMean => EstimatorId::SampleMean,
                NsEstimator::AdherentWr => EstimatorId::AdherentWr,
            },
            match variance {
                NsVariance::SimpleN => VarianceId::SimpleN,
                NsVariance::SimpleTaylor => VarianceId::SimpleTaylor,
                NsVariance::TaylorEdges => VarianceId::TaylorEdges,
                NsVariance::TaylorDiag => VarianceId::TaylorDiag,
                NsVariance::TaylorConservative => VarianceId::TaylorConservative,
                NsVariance::Wr => VarianceId::Wr,
            },
        );
        let r = harness::estimate_sample(&s.sample, &f.freq, &[name], &[spec], alpha)?;
        let e = &r.results[0][0];
        *out = NsEstimate {
            point: e.point,
            variance: e.variance,
            half_width: e.half_width,
            lo: e.lo(),
            hi: e.hi(),
        };
        Ok(())
    })
}

/// Generalized unequal-probability mean `sum(y/w) / sum(1/w)` over plain
/// arrays.
#[no_mangle]
pub unsafe extern "C" fn ns_mu_f(y: *const f64, w: *const f64, len: usize, out: *mut f64) -> NsStatus {
    guard(|| {
        let y = as_slice(y, len, "y")?;
        let w = as_slice(w, len, "w")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = est::mu_f(y, w)?;
        Ok(())
    })
}

/// Exact stationary marginals of the without-replacement sampling process
/// on a sample of at most 12 members. Fails with
/// `NS_STATUS_REDUCIBLE` when `reseed_p` is 0.
#[no_mangle]
pub unsafe extern "C" fn ns_exact_marginals(
    sample: *const NsSample,
    cfg: *const NsResampleConfig,
    out: *mut f64,
    len: usize,
) -> NsStatus {
    guard(|| {
        let s = as_ref(sample, "sample")?;
        let cfg = ResampleConfig::from(as_ref(cfg, "config")?);
        if len != s.sample.len() || out.is_null() {
            return Err(invalid(format!("output must hold {} entries", s.sample.len())));
        }
        let r = oracle::exact_process_stationary(&s.sample, &cfg, &[])?;
        slice::from_raw_parts_mut(out, len).copy_from_slice(&r.marginals);
        Ok(())
    })
}
