//! Second-stage resampling of the sample network.
//!
//! Inclusion frequencies `f_i` are the fraction of resamples that contain
//! member `i`. Resamples are drawn from the traceable edge set (recruitment
//! links in both directions plus revealed plus-edges) either as independent
//! link-tracing samples or as a Markov chain of node sets that traces,
//! re-seeds and thins itself around a target size. No coupons or expiry are
//! used here.

use rand::Rng;
use thiserror::Error;

use crate::fieldsim::SampleNetwork;
use crate::rng::{self, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("invalid resample configuration: {0}")]
    Config(String),
    #[error("sample network is empty")]
    EmptySample,
    #[error(
        "burn-in of {burn_in} iterations leaves nothing to count out of {iterations}"
    )]
    BurnInTooLong { burn_in: usize, iterations: usize },
}

pub type Result<T> = std::result::Result<T, ResampleError>;

/// Symmetric adjacency over sample members in CSR form, plus the undirected
/// edge list `E_s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl TraceGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut norm: Vec<(usize, usize)> = edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        norm.sort_unstable();
        norm.dedup();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &norm {
            assert!(b < n, "edge endpoint out of range");
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(norm.len() * 2);
        offsets.push(0);
        for mut list in adj {
            list.sort_unstable();
            neighbors.extend(list);
            offsets.push(neighbors.len());
        }
        TraceGraph {
            offsets,
            neighbors,
            edges: norm,
        }
    }

    pub fn from_sample(sample: &SampleNetwork) -> Self {
        Self::new(sample.len(), &sample.traceable_edges())
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Undirected edges `(a, b)`, `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleMode {
    /// Independent resamples, each grown from seeds to the target size.
    Repeated,
    /// Markov sampling process without replacement.
    Process,
    /// Markov sampling process with replacement; tracks selection counts.
    ProcessWr,
}

impl ResampleMode {
    pub fn name(self) -> &'static str {
        match self {
            ResampleMode::Repeated => "repeated",
            ResampleMode::Process => "process",
            ResampleMode::ProcessWr => "process_wr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "repeated" => Some(ResampleMode::Repeated),
            "process" => Some(ResampleMode::Process),
            "process_wr" | "process-wr" => Some(ResampleMode::ProcessWr),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BurnIn {
    /// Discard iterations until the chain first reaches the target size,
    /// then `extra` more.
    Auto { extra: usize },
    Fixed(usize),
}

impl Default for BurnIn {
    fn default() -> Self {
        BurnIn::Auto { extra: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResampleConfig {
    pub mode: ResampleMode,
    /// Total iterations `T`, burn-in included.
    pub iterations: usize,
    pub target_m: usize,
    pub trace_p: f64,
    /// Initial Bernoulli seeding rate.
    pub seed_p: f64,
    /// Ongoing re-seeding rate per non-member per step.
    pub reseed_p: f64,
    pub burn_in: BurnIn,
    /// Accumulate joint frequencies over the traceable edges.
    pub track_pairs: bool,
    /// Batch count for batch-means standard errors in process modes.
    pub batches: usize,
}

impl ResampleConfig {
    /// Markov sampling process: no initial seeds, re-seeding at 0.01,
    /// tracing at 0.5.
    pub fn process(target_m: usize) -> Self {
        ResampleConfig {
            mode: ResampleMode::Process,
            iterations: 10_000,
            target_m,
            trace_p: 0.5,
            seed_p: 0.0,
            reseed_p: 0.01,
            burn_in: BurnIn::default(),
            track_pairs: false,
            batches: 100,
        }
    }

    /// Independent resamples: seeding 0.0167, tracing 0.05, re-seeding 0.001.
    pub fn repeated(target_m: usize) -> Self {
        ResampleConfig {
            mode: ResampleMode::Repeated,
            trace_p: 0.05,
            seed_p: 0.0167,
            reseed_p: 0.001,
            ..Self::process(target_m)
        }
    }

    pub fn process_wr(target_m: usize) -> Self {
        ResampleConfig {
            mode: ResampleMode::ProcessWr,
            ..Self::process(target_m)
        }
    }

    pub fn rule(&self) -> ProcessRule {
        ProcessRule {
            trace_p: self.trace_p,
            reseed_p: self.reseed_p,
            target_m: self.target_m,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(ResampleError::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.target_m == 0 {
            return bad("target_m must be at least 1".into());
        }
        if self.mode != ResampleMode::ProcessWr && self.target_m > n {
            return bad(format!(
                "target_m {} exceeds sample size {n} for a without-replacement design",
                self.target_m
            ));
        }
        for (name, p) in [
            ("trace_p", self.trace_p),
            ("seed_p", self.seed_p),
            ("reseed_p", self.reseed_p),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.mode != ResampleMode::Repeated {
            if let BurnIn::Fixed(b) = self.burn_in {
                if b >= self.iterations {
                    return Err(ResampleError::BurnInTooLong {
                        burn_in: b,
                        iterations: self.iterations,
                    });
                }
            }
        }
        if self.track_pairs && self.mode == ResampleMode::ProcessWr {
            return bad("pair frequencies need a without-replacement mode".into());
        }
        Ok(())
    }
}

/// Rule constants of the sampling process, shared with the exact oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessRule {
    pub trace_p: f64,
    pub reseed_p: f64,
    pub target_m: usize,
}

impl ProcessRule {
    /// Removal probability `q_t` once additions bring the set to `size`.
    #[inline]
    pub fn removal_prob(&self, size: usize) -> f64 {
        if size > self.target_m {
            (size - self.target_m) as f64 / size as f64
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairFrequency {
    pub a: usize,
    pub b: usize,
    pub f: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResampleDiagnostics {
    /// Repeated mode: resamples that hit the step cap below target size.
    pub stalled_resamples: usize,
    /// Process modes: iterations discarded before counting.
    pub burn_in: usize,
    /// Mean resample size (selections, for the with-replacement mode).
    pub mean_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionFrequencies {
    pub f: Vec<f64>,
    pub f_pairs: Option<Vec<PairFrequency>>,
    /// Mean selection count per iteration, with-replacement mode only.
    pub g: Option<Vec<f64>>,
    /// Standard error of each `f_i`: binomial for independent resamples,
    /// batch means for the process modes.
    pub std_err: Option<Vec<f64>>,
    pub t_effective: usize,
    pub diagnostics: ResampleDiagnostics,
}

impl InclusionFrequencies {
    /// Frequencies safe to invert: zeros become `1 / (2 T_eff)`. Returns the
    /// number of members replaced.
    pub fn guarded(&self) -> (Vec<f64>, usize) {
        let floor = 1.0 / (2.0 * self.t_effective as f64);
        let mut zeros = 0;
        let f = self
            .f
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    v
                } else {
                    zeros += 1;
                    floor
                }
            })
            .collect();
        (f, zeros)
    }

    /// Mean selection counts with the same zero guard as [`Self::guarded`].
    pub fn guarded_g(&self) -> Option<(Vec<f64>, usize)> {
        let g = self.g.as_ref()?;
        let floor = 1.0 / (2.0 * self.t_effective as f64);
        let zeros = g.iter().filter(|&&v| v <= 0.0).count();
        Some((g.iter().map(|&v| if v > 0.0 { v } else { floor }).collect(), zeros))
    }
}

/// Draws the index gaps of a Bernoulli(p) process over `0..len`.
struct Hits {
    p: f64,
    log_q: f64,
}

impl Hits {
    fn new(p: f64) -> Self {
        Hits {
            p,
            log_q: (1.0 - p).ln(),
        }
    }

    /// Calls `hit` for every index in `0..len` selected independently with
    /// probability `p`.
    #[inline]
    fn for_each<F: FnMut(usize)>(&self, rng: &mut Stream, len: usize, mut hit: F) {
        if self.p <= 0.0 || len == 0 {
            return;
        }
        if self.p >= 1.0 {
            (0..len).for_each(hit);
            return;
        }
        let mut i = 0usize;
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let gap = (u.ln() / self.log_q).floor();
            if gap >= (len - i) as f64 {
                return;
            }
            i += gap as usize;
            hit(i);
            i += 1;
            if i >= len {
                return;
            }
        }
    }
}

/// Node set without replacement, with O(1) membership and a member list.
struct NodeSet {
    present: Vec<bool>,
    list: Vec<usize>,
}

impl NodeSet {
    fn new(n: usize) -> Self {
        NodeSet {
            present: vec![false; n],
            list: Vec::with_capacity(n),
        }
    }

    #[inline]
    fn insert(&mut self, v: usize) -> bool {
        if self.present[v] {
            return false;
        }
        self.present[v] = true;
        self.list.push(v);
        true
    }

    fn clear(&mut self) {
        for &v in &self.list {
            self.present[v] = false;
        }
        self.list.clear();
    }

    fn len(&self) -> usize {
        self.list.len()
    }

    #[cfg(debug_assertions)]
    fn check(&self) {
        let mut seen = vec![false; self.present.len()];
        for &v in &self.list {
            assert!(self.present[v] && !seen[v], "duplicate node {v} in resample");
            seen[v] = true;
        }
        assert_eq!(self.present.iter().filter(|&&p| p).count(), self.list.len());
    }
}

/// Adds traced neighbors of the first `frontier` members, each link taken
/// independently with probability `p`.
#[inline]
fn trace_links(graph: &TraceGraph, set: &mut NodeSet, frontier: usize, p: f64, rng: &mut Stream) {
    if p <= 0.0 {
        return;
    }
    for k in 0..frontier {
        let u = set.list[k];
        for &v in graph.neighbors(u) {
            if !set.present[v] && rng.random_bool(p) {
                set.insert(v);
            }
        }
    }
}

struct Counter {
    counts: Vec<u64>,
    pairs: Option<Vec<u64>>,
    size_total: u64,
    counted: usize,
    snapshots: Vec<Vec<u64>>,
    batch_ends: Vec<usize>,
}

impl Counter {
    fn new(n: usize, pairs: Option<usize>) -> Self {
        Counter {
            counts: vec![0; n],
            pairs: pairs.map(|m| vec![0; m]),
            size_total: 0,
            counted: 0,
            snapshots: Vec::new(),
            batch_ends: Vec::new(),
        }
    }

    fn plan_batches(&mut self, t_eff: usize, batches: usize) {
        let b = batches.min(t_eff);
        if b >= 2 {
            self.batch_ends = (1..=b).map(|k| k * t_eff / b).collect();
            self.batch_ends.reverse();
        }
    }

    fn record(&mut self, graph: &TraceGraph, set: &NodeSet) {
        for &v in &set.list {
            self.counts[v] += 1;
        }
        if let Some(pairs) = self.pairs.as_mut() {
            for (k, &(a, b)) in graph.edges().iter().enumerate() {
                if set.present[a] && set.present[b] {
                    pairs[k] += 1;
                }
            }
        }
        self.size_total += set.len() as u64;
        self.tick();
    }

    fn tick(&mut self) {
        self.counted += 1;
        if self.batch_ends.last() == Some(&self.counted) {
            self.batch_ends.pop();
            self.snapshots.push(self.counts.clone());
        }
    }

    fn batch_std_err(&self, t_eff: usize) -> Option<Vec<f64>> {
        let b = self.snapshots.len();
        if b < 2 {
            return None;
        }
        let n = self.counts.len();
        let mut means = vec![vec![0.0; n]; b];
        let mut prev_end = 0usize;
        for (k, snap) in self.snapshots.iter().enumerate() {
            let end = (k + 1) * t_eff / b;
            let len = (end - prev_end) as f64;
            for i in 0..n {
                let before = if k == 0 { 0 } else { self.snapshots[k - 1][i] };
                means[k][i] = (snap[i] - before) as f64 / len;
            }
            prev_end = end;
        }
        Some(
            (0..n)
                .map(|i| {
                    let avg = means.iter().map(|m| m[i]).sum::<f64>() / b as f64;
                    let var = means.iter().map(|m| (m[i] - avg).powi(2)).sum::<f64>()
                        / (b - 1) as f64;
                    (var / b as f64).sqrt()
                })
                .collect(),
        )
    }

    fn finish(
        self,
        graph: &TraceGraph,
        std_err: Option<Vec<f64>>,
        g: Option<Vec<f64>>,
        diagnostics: ResampleDiagnostics,
    ) -> InclusionFrequencies {
        let t = self.counted as f64;
        let f = self.counts.iter().map(|&c| c as f64 / t).collect();
        let f_pairs = self.pairs.map(|p| {
            graph
                .edges()
                .iter()
                .zip(p)
                .map(|(&(a, b), c)| PairFrequency {
                    a,
                    b,
                    f: c as f64 / t,
                })
                .collect()
        });
        InclusionFrequencies {
            f,
            f_pairs,
            g,
            std_err,
            t_effective: self.counted,
            diagnostics: ResampleDiagnostics {
                mean_size: self.size_total as f64 / t,
                ..diagnostics
            },
        }
    }
}

/// Dispatches on `cfg.mode`.
pub fn run(sample: &SampleNetwork, cfg: &ResampleConfig, rng_seed: u64) -> Result<InclusionFrequencies> {
    run_on(&TraceGraph::from_sample(sample), cfg, rng_seed)
}

pub fn run_on(graph: &TraceGraph, cfg: &ResampleConfig, rng_seed: u64) -> Result<InclusionFrequencies> {
    match cfg.mode {
        ResampleMode::Repeated => repeated_on(graph, cfg, rng_seed),
        ResampleMode::Process => process_on(graph, cfg, rng_seed),
        ResampleMode::ProcessWr => process_wr_on(graph, cfg, rng_seed),
    }
}

fn check_mode(cfg: &ResampleConfig, mode: ResampleMode) -> Result<()> {
    if cfg.mode != mode {
        return Err(ResampleError::Config(format!(
            "expected mode {}, got {}",
            mode.name(),
            cfg.mode.name()
        )));
    }
    Ok(())
}

/// Independent resamples grown from Bernoulli seeds to the target size.
pub fn run_repeated(
    sample: &SampleNetwork,
    cfg: &ResampleConfig,
    rng_seed: u64,
) -> Result<InclusionFrequencies> {
    check_mode(cfg, ResampleMode::Repeated)?;
    repeated_on(&TraceGraph::from_sample(sample), cfg, rng_seed)
}

/// Markov sampling process without replacement.
pub fn run_process(
    sample: &SampleNetwork,
    cfg: &ResampleConfig,
    rng_seed: u64,
) -> Result<InclusionFrequencies> {
    check_mode(cfg, ResampleMode::Process)?;
    process_on(&TraceGraph::from_sample(sample), cfg, rng_seed)
}

/// Markov sampling process with replacement.
pub fn run_process_wr(
    sample: &SampleNetwork,
    cfg: &ResampleConfig,
    rng_seed: u64,
) -> Result<InclusionFrequencies> {
    check_mode(cfg, ResampleMode::ProcessWr)?;
    process_wr_on(&TraceGraph::from_sample(sample), cfg, rng_seed)
}

/// Runs a without-replacement mode with joint frequencies over `E_s`.
pub fn pair_frequencies(
    sample: &SampleNetwork,
    cfg: &ResampleConfig,
    rng_seed: u64,
) -> Result<InclusionFrequencies> {
    let cfg = ResampleConfig {
        track_pairs: true,
        ..cfg.clone()
    };
    run(sample, &cfg, rng_seed)
}

pub fn repeated_on(graph: &TraceGraph, cfg: &ResampleConfig, rng_seed: u64) -> Result<InclusionFrequencies> {
    let n = graph.node_count();
    if n == 0 {
        return Err(ResampleError::EmptySample);
    }
    cfg.validate(n)?;
    let mut rng = rng::stream(rng_seed);
    let target = cfg.target_m;
    let step_cap = 10 * target;
    let seeding = Hits::new(cfg.seed_p);
    let reseeding = Hits::new(cfg.reseed_p);
    let mut set = NodeSet::new(n);
    let mut counter = Counter::new(n, cfg.track_pairs.then_some(graph.edges().len()));
    let mut stalled = 0;

    for _ in 0..cfg.iterations {
        set.clear();
        seeding.for_each(&mut rng, n, |v| {
            set.insert(v);
        });
        let mut steps = 0;
        while set.len() < target && steps < step_cap {
            steps += 1;
            let frontier = set.len();
            trace_links(graph, &mut set, frontier, cfg.trace_p, &mut rng);
            reseeding.for_each(&mut rng, n, |v| {
                set.insert(v);
            });
        }
        if set.len() > target {
            // keep a uniform subset of exactly `target` members
            let len = set.len();
            for k in 0..target {
                let j = rng.random_range(k..len);
                set.list.swap(k, j);
            }
            for &v in &set.list[target..] {
                set.present[v] = false;
            }
            set.list.truncate(target);
        } else if set.len() < target {
            stalled += 1;
        }
        #[cfg(debug_assertions)]
        set.check();
        counter.record(graph, &set);
    }

    let t = counter.counted as f64;
    let std_err = counter
        .counts
        .iter()
        .map(|&c| {
            let f = c as f64 / t;
            (f * (1.0 - f) / t).sqrt()
        })
        .collect();
    Ok(counter.finish(
        graph,
        Some(std_err),
        None,
        ResampleDiagnostics {
            stalled_resamples: stalled,
            ..Default::default()
        },
    ))
}

/// One transition of the without-replacement process: trace, re-seed, thin.
fn process_step(
    graph: &TraceGraph,
    rule: &ProcessRule,
    reseeding: &Hits,
    set: &mut NodeSet,
    rng: &mut Stream,
) {
    let frontier = set.len();
    trace_links(graph, set, frontier, rule.trace_p, rng);
    let n = graph.node_count();
    reseeding.for_each(rng, n, |v| {
        set.insert(v);
    });
    let q = rule.removal_prob(set.len());
    if q > 0.0 {
        let NodeSet { present, list } = set;
        list.retain(|&v| {
            let drop = rng.random_bool(q);
            if drop {
                present[v] = false;
            }
            !drop
        });
    }
}

fn burn_in_bound(cfg: &ResampleConfig, reached: Option<usize>) -> Option<usize> {
    match cfg.burn_in {
        BurnIn::Fixed(b) => Some(b),
        BurnIn::Auto { extra } => reached.map(|t| t + extra),
    }
}

pub fn process_on(graph: &TraceGraph, cfg: &ResampleConfig, rng_seed: u64) -> Result<InclusionFrequencies> {
    let n = graph.node_count();
    if n == 0 {
        return Err(ResampleError::EmptySample);
    }
    cfg.validate(n)?;
    let mut rng = rng::stream(rng_seed);
    let rule = cfg.rule();
    let reseeding = Hits::new(cfg.reseed_p);
    let mut set = NodeSet::new(n);
    Hits::new(cfg.seed_p).for_each(&mut rng, n, |v| {
        set.insert(v);
    });
    let mut counter = Counter::new(n, cfg.track_pairs.then_some(graph.edges().len()));
    let mut reached = (set.len() >= cfg.target_m).then_some(0);
    let mut burn_in = burn_in_bound(cfg, reached);
    if let Some(b) = burn_in {
        check_burn_in(b, cfg.iterations)?;
        counter.plan_batches(cfg.iterations - b, cfg.batches);
    }

    for t in 1..=cfg.iterations {
        process_step(graph, &rule, &reseeding, &mut set, &mut rng);
        #[cfg(debug_assertions)]
        set.check();
        if reached.is_none() && set.len() >= cfg.target_m {
            reached = Some(t);
            if burn_in.is_none() {
                burn_in = burn_in_bound(cfg, reached);
                let b = burn_in.unwrap();
                check_burn_in(b, cfg.iterations)?;
                counter.plan_batches(cfg.iterations - b, cfg.batches);
            }
        }
        if burn_in.is_some_and(|b| t > b) {
            counter.record(graph, &set);
        }
    }
    let burn_in = match burn_in {
        Some(b) => b,
        None => {
            return Err(ResampleError::BurnInTooLong {
                burn_in: cfg.iterations,
                iterations: cfg.iterations,
            })
        }
    };
    let t_eff = counter.counted;
    let std_err = counter.batch_std_err(t_eff);
    Ok(counter.finish(
        graph,
        std_err,
        None,
        ResampleDiagnostics {
            burn_in,
            ..Default::default()
        },
    ))
}

fn check_burn_in(burn_in: usize, iterations: usize) -> Result<()> {
    if burn_in >= iterations {
        Err(ResampleError::BurnInTooLong {
            burn_in,
            iterations,
        })
    } else {
        Ok(())
    }
}

/// Multiset of selections for the with-replacement process.
struct Selections {
    counts: Vec<u32>,
    total: usize,
}

fn process_wr_step(
    graph: &TraceGraph,
    rule: &ProcessRule,
    reseeding: &Hits,
    sel: &mut Selections,
    added: &mut [u32],
    rng: &mut Stream,
) {
    let n = graph.node_count();
    if rule.trace_p > 0.0 {
        for u in 0..n {
            let copies = sel.counts[u];
            if copies == 0 {
                continue;
            }
            for &v in graph.neighbors(u) {
                for _ in 0..copies {
                    if rng.random_bool(rule.trace_p) {
                        added[v] += 1;
                    }
                }
            }
        }
    }
    reseeding.for_each(rng, n, |v| added[v] += 1);
    for (c, a) in sel.counts.iter_mut().zip(added.iter_mut()) {
        *c += *a;
        sel.total += *a as usize;
        *a = 0;
    }
    let q = rule.removal_prob(sel.total);
    if q > 0.0 {
        let mut total = 0usize;
        for c in sel.counts.iter_mut() {
            let kept = (0..*c).filter(|_| !rng.random_bool(q)).count() as u32;
            *c = kept;
            total += kept as usize;
        }
        sel.total = total;
    }
}

pub fn process_wr_on(graph: &TraceGraph, cfg: &ResampleConfig, rng_seed: u64) -> Result<InclusionFrequencies> {
    let n = graph.node_count();
    if n == 0 {
        return Err(ResampleError::EmptySample);
    }
    cfg.validate(n)?;
    let mut rng = rng::stream(rng_seed);
    let rule = cfg.rule();
    let reseeding = Hits::new(cfg.reseed_p);
    let mut sel = Selections {
        counts: vec![0; n],
        total: 0,
    };
    Hits::new(cfg.seed_p).for_each(&mut rng, n, |v| {
        sel.counts[v] += 1;
        sel.total += 1;
    });
    let mut added = vec![0u32; n];
    let mut present = vec![0u64; n];
    let mut selections = vec![0u64; n];
    let mut size_total = 0u64;
    let mut counted = 0usize;
    let mut reached = (sel.total >= cfg.target_m).then_some(0);
    let mut burn_in = burn_in_bound(cfg, reached);
    if let Some(b) = burn_in {
        check_burn_in(b, cfg.iterations)?;
    }

    for t in 1..=cfg.iterations {
        process_wr_step(graph, &rule, &reseeding, &mut sel, &mut added, &mut rng);
        if reached.is_none() && sel.total >= cfg.target_m {
            reached = Some(t);
            if burn_in.is_none() {
                burn_in = burn_in_bound(cfg, reached);
                check_burn_in(burn_in.unwrap(), cfg.iterations)?;
            }
        }
        if burn_in.is_some_and(|b| t > b) {
            for (i, &c) in sel.counts.iter().enumerate() {
                if c > 0 {
                    present[i] += 1;
                    selections[i] += u64::from(c);
                }
            }
            size_total += sel.total as u64;
            counted += 1;
        }
    }
    let burn_in = burn_in.ok_or(ResampleError::BurnInTooLong {
        burn_in: cfg.iterations,
        iterations: cfg.iterations,
    })?;
    let t = counted as f64;
    Ok(InclusionFrequencies {
        f: present.iter().map(|&c| c as f64 / t).collect(),
        f_pairs: None,
        g: Some(selections.iter().map(|&c| c as f64 / t).collect()),
        std_err: None,
        t_effective: counted,
        diagnostics: ResampleDiagnostics {
            burn_in,
            mean_size: size_total as f64 / t,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> TraceGraph {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        TraceGraph::new(n, &e)
    }

    fn cycle(n: usize) -> TraceGraph {
        let e: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        TraceGraph::new(n, &e)
    }

    #[test]
    fn geometric_hits_match_bernoulli_rate() {
        let mut rng = rng::stream(3);
        let hits = Hits::new(0.013);
        let mut count = 0usize;
        let len = 1000;
        let reps = 2000;
        for _ in 0..reps {
            hits.for_each(&mut rng, len, |i| {
                assert!(i < len);
                count += 1;
            });
        }
        let expect = 0.013 * (len * reps) as f64;
        let sd = (expect * (1.0 - 0.013)).sqrt();
        assert!(((count as f64) - expect).abs() < 5.0 * sd, "{count} vs {expect}");
    }

    #[test]
    fn repeated_single_seed_is_always_included() {
        let g = TraceGraph::new(1, &[]);
        let cfg = ResampleConfig {
            seed_p: 1.0,
            iterations: 50,
            ..ResampleConfig::repeated(1)
        };
        let f = repeated_on(&g, &cfg, 1).unwrap();
        assert_eq!(f.f, vec![1.0]);
    }

    #[test]
    fn repeated_cycle_is_symmetric() {
        let g = cycle(8);
        let cfg = ResampleConfig {
            iterations: 40_000,
            seed_p: 0.1,
            trace_p: 0.3,
            reseed_p: 0.1,
            ..ResampleConfig::repeated(3)
        };
        let f = repeated_on(&g, &cfg, 5).unwrap();
        assert_eq!(f.diagnostics.stalled_resamples, 0);
        let mean = f.f.iter().sum::<f64>() / 8.0;
        assert!((mean * 8.0 - 3.0).abs() < 1e-9, "every resample has size 3");
        let sd = (mean * (1.0 - mean) / 40_000.0).sqrt();
        for &v in &f.f {
            assert!((v - mean).abs() < 4.0 * sd, "{v} vs {mean}");
        }
    }

    #[test]
    fn repeated_stalls_are_flagged() {
        // nothing can grow: no seeds, no tracing, no re-seeding
        let g = path(4);
        let cfg = ResampleConfig {
            iterations: 10,
            seed_p: 0.0,
            trace_p: 0.0,
            reseed_p: 0.0,
            ..ResampleConfig::repeated(2)
        };
        let f = repeated_on(&g, &cfg, 1).unwrap();
        assert_eq!(f.diagnostics.stalled_resamples, 10);
        assert!(f.f.iter().all(|&v| v == 0.0));
        let (guarded, zeros) = f.guarded();
        assert_eq!(zeros, 4);
        assert!(guarded.iter().all(|&v| v == 1.0 / 20.0));
    }

    #[test]
    fn process_single_node_absorbs() {
        let g = TraceGraph::new(1, &[]);
        let cfg = ResampleConfig {
            iterations: 5000,
            ..ResampleConfig::process(1)
        };
        let f = process_on(&g, &cfg, 2).unwrap();
        assert_eq!(f.f, vec![1.0]);
    }

    #[test]
    fn process_size_fluctuates_around_target() {
        let g = path(60);
        let cfg = ResampleConfig {
            iterations: 20_000,
            ..ResampleConfig::process(20)
        };
        let f = process_on(&g, &cfg, 8).unwrap();
        let size = f.diagnostics.mean_size;
        assert!((f.f.iter().sum::<f64>() - size).abs() < 1e-9);
        assert!(size > 20.0 * 0.8 && size < 20.0 * 1.2, "mean size {size}");
    }

    #[test]
    fn process_removal_expectation() {
        let rule = ProcessRule {
            trace_p: 0.5,
            reseed_p: 0.01,
            target_m: 40,
        };
        for size in [41usize, 50, 100, 400] {
            let q = rule.removal_prob(size);
            assert!((size as f64 * q - (size - 40) as f64).abs() < 1e-9);
        }
        assert_eq!(rule.removal_prob(40), 0.0);
        assert_eq!(rule.removal_prob(3), 0.0);
    }

    #[test]
    fn burn_in_not_shorter_than_iterations() {
        let g = path(5);
        let cfg = ResampleConfig {
            iterations: 10,
            burn_in: BurnIn::Fixed(10),
            ..ResampleConfig::process(2)
        };
        assert!(matches!(
            process_on(&g, &cfg, 1),
            Err(ResampleError::BurnInTooLong { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let g = path(5);
        let cfg = ResampleConfig {
            trace_p: 1.5,
            ..ResampleConfig::process(2)
        };
        assert!(matches!(process_on(&g, &cfg, 1), Err(ResampleError::Config(_))));
        let cfg = ResampleConfig::process(6);
        assert!(matches!(process_on(&g, &cfg, 1), Err(ResampleError::Config(_))));
        let cfg = ResampleConfig::process_wr(6);
        assert!(process_wr_on(&g, &cfg, 1).is_ok());
        assert!(matches!(
            process_on(&TraceGraph::new(0, &[]), &ResampleConfig::process(1), 1),
            Err(ResampleError::EmptySample)
        ));
    }

    #[test]
    fn wr_single_node_selected_once() {
        let g = TraceGraph::new(1, &[]);
        let cfg = ResampleConfig {
            iterations: 200,
            seed_p: 1.0,
            reseed_p: 0.0,
            ..ResampleConfig::process_wr(1)
        };
        let f = process_wr_on(&g, &cfg, 4).unwrap();
        assert_eq!(f.g, Some(vec![1.0]));
        assert_eq!(f.f, vec![1.0]);
    }

    #[test]
    fn wr_cycle_is_symmetric() {
        let g = cycle(6);
        let cfg = ResampleConfig {
            iterations: 200_000,
            ..ResampleConfig::process_wr(6)
        };
        let f = process_wr_on(&g, &cfg, 12).unwrap();
        let g = f.g.unwrap();
        let mean = g.iter().sum::<f64>() / 6.0;
        for &v in &g {
            assert!((v - mean).abs() < 0.05 * mean, "{v} vs {mean}");
        }
    }

    #[test]
    fn pairs_bounded_by_marginals() {
        let g = cycle(7);
        let cfg = ResampleConfig {
            iterations: 20_000,
            track_pairs: true,
            ..ResampleConfig::process(3)
        };
        let f = process_on(&g, &cfg, 6).unwrap();
        let pairs = f.f_pairs.as_ref().unwrap();
        assert_eq!(pairs.len(), 7);
        for p in pairs {
            assert_ne!(p.a, p.b);
            assert!(p.f <= f.f[p.a].min(f.f[p.b]) + 1e-15);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let g = path(30);
        let cfg = ResampleConfig {
            iterations: 3000,
            ..ResampleConfig::process(10)
        };
        assert_eq!(process_on(&g, &cfg, 77).unwrap(), process_on(&g, &cfg, 77).unwrap());
        assert_ne!(
            process_on(&g, &cfg, 77).unwrap().f,
            process_on(&g, &cfg, 78).unwrap().f
        );
    }
}
