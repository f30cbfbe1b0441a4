//! Ground truth for small instances and synthetic populations.
//!
//! [`exact_process_stationary`] enumerates every subset of a sample of at
//! most 12 members and computes the exact stationary law of the
//! without-replacement sampling process. It shares only the rule constants
//! ([`ProcessRule`]) with the simulator; the set-to-set transition
//! probabilities are derived here in closed form.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::fieldsim::{self, DesignConfig, FieldError, SampleNetwork};
use crate::netpop::{AttributeTable, PopulationGraph};
use crate::resampler::{ProcessRule, ResampleConfig, ResampleMode, TraceGraph};
use crate::rng;

pub const MAX_EXACT_NODES: usize = 12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact analysis supports at most {MAX_EXACT_NODES} sample members, got {0}")]
    TooLarge(usize),
    #[error("exact analysis needs the process mode")]
    WrongMode,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "sampling chain is reducible ({} closed classes); no global stationary law",
        closed_classes.len()
    )]
    Reducible { closed_classes: Vec<ClosedClass> },
    #[error("power iteration stopped at residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid population spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// A closed communicating class of the sampling chain with its own
/// stationary law.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedClass {
    /// States as member bitmasks.
    pub states: Vec<u32>,
    pub stationary: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryResult {
    pub n: usize,
    /// Probability of each subset, indexed by member bitmask.
    pub stationary: Vec<f64>,
    pub marginals: Vec<f64>,
    pub pair_marginals: Vec<((usize, usize), f64)>,
    pub iterations: usize,
    pub residual: f64,
}

impl StationaryResult {
    pub fn pair(&self, a: usize, b: usize) -> Option<f64> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.pair_marginals
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
    }
}

/// Sparse one-step kernel, factored into an addition stage (trace and
/// re-seed) and a thinning stage.
struct Kernel {
    n: usize,
    target_m: usize,
    /// For each state, the reachable post-addition sets and probabilities.
    additions: Vec<Vec<(u32, f64)>>,
    /// `thin[u][s]`: probability that a specific `s`-subset survives
    /// thinning from a set of size `u`.
    thin: Vec<Vec<f64>>,
}

impl Kernel {
    fn build(graph: &TraceGraph, rule: &ProcessRule) -> Self {
        let n = graph.node_count();
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let masks: Vec<u32> = (0..n)
            .map(|v| graph.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u)))
            .collect();
        let additions = (0..=full)
            .map(|state| {
                let outside = full & !state;
                // each outside node joins independently: via any of its
                // links into the state, or by re-seeding
                let probs: Vec<(u32, f64)> = (0..n)
                    .filter(|&v| outside & (1 << v) != 0)
                    .map(|v| {
                        let links = (masks[v] & state).count_ones() as i32;
                        let miss = (1.0 - rule.trace_p).powi(links) * (1.0 - rule.reseed_p);
                        (1u32 << v, 1.0 - miss)
                    })
                    .collect();
                let mut out = vec![(state, 1.0)];
                for (bit, a) in probs {
                    if a <= 0.0 {
                        continue;
                    }
                    let mut next = Vec::with_capacity(out.len() * 2);
                    for &(s, p) in &out {
                        if a < 1.0 {
                            next.push((s, p * (1.0 - a)));
                        }
                        next.push((s | bit, p * a));
                    }
                    out = next;
                }
                out
            })
            .collect();
        let thin = (0..=n)
            .map(|u| {
                let q = if u > rule.target_m {
                    (u - rule.target_m) as f64 / u as f64
                } else {
                    0.0
                };
                (0..=u)
                    .map(|s| {
                        if q == 0.0 {
                            if s == u {
                                1.0
                            } else {
                                0.0
                            }
                        } else {
                            (1.0 - q).powi(s as i32) * q.powi((u - s) as i32)
                        }
                    })
                    .collect()
            })
            .collect();
        Kernel {
            n,
            target_m: rule.target_m,
            additions,
            thin,
        }
    }

    fn states(&self) -> usize {
        1usize << self.n
    }

    /// One step of the distribution: `out = dist * K`.
    fn apply(&self, dist: &[f64], mid: &mut [f64], out: &mut [f64]) {
        mid.iter_mut().for_each(|v| *v = 0.0);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(u, w) in &self.additions[s] {
                mid[u as usize] += p * w;
            }
        }
        for (u, &p) in mid.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let size = (u as u32).count_ones() as usize;
            if size <= self.target_m {
                out[u] += p;
                continue;
            }
            let row = &self.thin[size];
            // every subset of u, including the empty set
            let u = u as u32;
            let mut sub = u;
            loop {
                out[sub as usize] += p * row[sub.count_ones() as usize];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & u;
            }
        }
    }

    /// Probability of staying put in one step.
    fn stay_prob(&self, state: u32) -> f64 {
        let size = state.count_ones() as usize;
        let stay_add = self.additions[state as usize]
            .iter()
            .find(|(u, _)| *u == state)
            .map_or(0.0, |(_, p)| *p);
        stay_add * self.thin[size][size]
    }
}

/// Dense transition matrix of the sampling process, `rows[from][to]`.
/// Intended for small samples.
pub fn transition_matrix(graph: &TraceGraph, rule: &ProcessRule) -> Result<Vec<Vec<f64>>> {
    let n = graph.node_count();
    if n > 10 {
        return Err(OracleError::TooLarge(n));
    }
    let kernel = Kernel::build(graph, rule);
    let size = kernel.states();
    let mut mid = vec![0.0; size];
    Ok((0..size)
        .map(|s| {
            let mut e = vec![0.0; size];
            e[s] = 1.0;
            let mut row = vec![0.0; size];
            kernel.apply(&e, &mut mid, &mut row);
            row
        })
        .collect())
}

pub const DEFAULT_MAX_POWER_ITERATIONS: usize = 2_000_000;
const TOLERANCE: f64 = 1e-12;

/// Exact stationary distribution of the sampling process on a sample.
pub fn exact_process_stationary(
    sample: &SampleNetwork,
    cfg: &ResampleConfig,
    pairs: &[(usize, usize)],
) -> Result<StationaryResult> {
    exact_stationary_on(&TraceGraph::from_sample(sample), cfg, pairs)
}

pub fn exact_stationary_on(
    graph: &TraceGraph,
    cfg: &ResampleConfig,
    pairs: &[(usize, usize)],
) -> Result<StationaryResult> {
    exact_stationary_with_limit(graph, cfg, pairs, DEFAULT_MAX_POWER_ITERATIONS)
}

pub fn exact_stationary_with_limit(
    graph: &TraceGraph,
    cfg: &ResampleConfig,
    pairs: &[(usize, usize)],
    max_iterations: usize,
) -> Result<StationaryResult> {
    let n = graph.node_count();
    if n > MAX_EXACT_NODES {
        return Err(OracleError::TooLarge(n));
    }
    if cfg.mode != ResampleMode::Process {
        return Err(OracleError::WrongMode);
    }
    if n == 0 || cfg.target_m == 0 {
        return Err(OracleError::Config("empty sample or zero target".into()));
    }
    for p in [cfg.trace_p, cfg.reseed_p] {
        if !(0.0..=1.0).contains(&p) {
            return Err(OracleError::Config(format!("{p} is not a probability")));
        }
    }
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(OracleError::Config(format!("pair ({a}, {b}) out of range")));
    }
    let kernel = Kernel::build(graph, &cfg.rule());
    if cfg.reseed_p == 0.0 {
        // without re-seeding the empty set is absorbing and unreachable
        // from anywhere else, so the chain cannot be irreducible
        let closed_classes = (0..kernel.states() as u32)
            .filter(|&s| (kernel.stay_prob(s) - 1.0).abs() < 1e-15)
            .map(|s| ClosedClass {
                states: vec![s],
                stationary: vec![1.0],
            })
            .collect();
        return Err(OracleError::Reducible { closed_classes });
    }

    let size = kernel.states();
    let mut dist = vec![1.0 / size as f64; size];
    let mut next = vec![0.0; size];
    let mut mid = vec![0.0; size];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        kernel.apply(&dist, &mut mid, &mut next);
        iterations += 1;
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = dist.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut dist, &mut next);
        if residual < TOLERANCE {
            break;
        }
    }
    if residual >= TOLERANCE {
        return Err(OracleError::NotConverged {
            iterations,
            residual,
        });
    }
    let marginals = (0..n)
        .map(|i| {
            dist.iter()
                .enumerate()
                .filter(|(s, _)| s & (1 << i) != 0)
                .map(|(_, p)| p)
                .sum()
        })
        .collect();
    let pair_marginals = pairs
        .iter()
        .map(|&(a, b)| {
            let key = if a < b { (a, b) } else { (b, a) };
            let mask = (1usize << a) | (1usize << b);
            let p = dist
                .iter()
                .enumerate()
                .filter(|(s, _)| s & mask == mask)
                .map(|(_, p)| p)
                .sum();
            (key, p)
        })
        .collect();
    Ok(StationaryResult {
        n,
        stationary: dist,
        marginals,
        pair_marginals,
        iterations,
        residual,
    })
}

/// Monte Carlo estimate of first-stage inclusion probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldInclusion {
    pub pi_hat: Vec<f64>,
    pub std_err: Vec<f64>,
    pub replications: usize,
}

/// Runs the field design `replications` times with independent sub-seeds
/// and counts how often each population node is sampled. The result does
/// not depend on the number of worker threads.
pub fn mc_field_inclusion(
    graph: &PopulationGraph,
    cfg: &DesignConfig,
    replications: usize,
    rng_seed: u64,
) -> Result<FieldInclusion> {
    if replications == 0 {
        return Err(OracleError::Config("replications must be at least 1".into()));
    }
    cfg.validate(graph.node_count())?;
    let n = graph.node_count();
    let empty = AttributeTable::empty();
    let counts = (0..replications)
        .into_par_iter()
        .try_fold(
            || vec![0u64; n],
            |mut acc, r| {
                let s = fieldsim::run_survey(
                    graph,
                    &empty,
                    cfg,
                    rng::derive_seed(rng_seed, &[r as u64]),
                )?;
                for &m in s.members() {
                    acc[m] += 1;
                }
                Ok::<_, FieldError>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let r = replications as f64;
    let pi_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / r).collect();
    let std_err = pi_hat.iter().map(|&p| (p * (1.0 - p) / r).sqrt()).collect();
    Ok(FieldInclusion {
        pi_hat,
        std_err,
        replications,
    })
}

impl StationaryResult {
    /// Writes per-member marginals (`member,node,phi`); `labels` names the
    /// members.
    pub fn write_marginals<W: std::io::Write>(&self, out: W, labels: &[String]) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["member", "node", "phi"])?;
        for (i, p) in self.marginals.iter().enumerate() {
            let label = labels.get(i).map_or(String::new(), Clone::clone);
            w.write_record([i.to_string(), label, p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_pairs<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a", "b", "phi"])?;
        for ((a, b), p) in &self.pair_marginals {
            w.write_record([a.to_string(), b.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes every subset with positive probability as a `;`-separated
    /// member list.
    pub fn write_states<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["members", "probability"])?;
        for (s, &p) in self.stationary.iter().enumerate() {
            if p > 0.0 {
                let members: Vec<String> = (0..self.n).filter(|i| s & (1 << i) != 0).map(|i| i.to_string()).collect();
                w.write_record([members.join(";"), p.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl FieldInclusion {
    pub fn write_csv<W: std::io::Write>(&self, out: W, graph: &PopulationGraph) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "pi_hat", "std_err"])?;
        for (i, (p, se)) in self.pi_hat.iter().zip(&self.std_err).enumerate() {
            w.write_record([graph.label(i).to_string(), p.to_string(), se.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Synthetic populations

#[derive(Clone, Debug, PartialEq)]
pub enum DegreeDistribution {
    Poisson { mean: f64 },
    /// `1 + NegBinomial(mean - 1, dispersion)`: heavy-tailed, no isolates.
    ShiftedNegBinomial { mean: f64, dispersion: f64 },
    Fixed(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DegreeModel {
    Configuration(DegreeDistribution),
    /// Two disconnected uniform random graphs with the given sizes and
    /// mean degrees. Nodes of the first block come first.
    TwoComponent {
        sizes: (usize, usize),
        mean_degrees: (f64, f64),
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeSpec {
    pub name: String,
    pub prevalence: f64,
    /// Probability that each new positive is planted next to an existing
    /// positive rather than uniformly.
    pub homophily: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPopSpec {
    pub nodes: usize,
    pub degree_model: DegreeModel,
    pub attributes: Vec<AttributeSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenReport {
    pub stubs: usize,
    pub erased_self_loops: usize,
    pub erased_multi_edges: usize,
}

pub fn gen_population(
    spec: &SyntheticPopSpec,
    rng_seed: u64,
) -> Result<(PopulationGraph, AttributeTable, GenReport)> {
    let n = spec.nodes;
    if n < 2 {
        return Err(OracleError::Spec("need at least 2 nodes".into()));
    }
    for a in &spec.attributes {
        if !(0.0..=1.0).contains(&a.prevalence) || !(0.0..=1.0).contains(&a.homophily) {
            return Err(OracleError::Spec(format!(
                "attribute `{}`: prevalence and homophily must lie in [0, 1]",
                a.name
            )));
        }
    }
    let mut rng = rng::stream(rng_seed);
    let (edges, report) = match &spec.degree_model {
        DegreeModel::Configuration(dist) => {
            let degrees = degree_sequence(dist, n, &mut rng)?;
            configuration_edges(&degrees, &mut rng)
        }
        DegreeModel::TwoComponent {
            sizes,
            mean_degrees,
        } => {
            if sizes.0 + sizes.1 != n {
                return Err(OracleError::Spec(format!(
                    "component sizes {} + {} do not add up to {n}",
                    sizes.0, sizes.1
                )));
            }
            let mut edges = uniform_edges(0, sizes.0, mean_degrees.0, &mut rng)?;
            edges.extend(uniform_edges(sizes.0, sizes.1, mean_degrees.1, &mut rng)?);
            (edges, GenReport::default())
        }
    };
    let (graph, _) = PopulationGraph::from_index_edges(n, &edges);
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for a in &spec.attributes {
        names.push(a.name.clone());
        columns.push(planted_attribute(&graph, a, &mut rng));
    }
    Ok((graph, AttributeTable::new(names, columns), report))
}

fn degree_sequence<R: Rng>(dist: &DegreeDistribution, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    let cap = n - 1;
    let mut degrees: Vec<usize> = match dist {
        DegreeDistribution::Fixed(seq) => {
            if seq.len() != n {
                return Err(OracleError::Spec(format!(
                    "degree sequence has {} entries for {n} nodes",
                    seq.len()
                )));
            }
            if !is_graphical(seq) {
                return Err(OracleError::Spec("degree sequence is not graphical".into()));
            }
            return Ok(seq.clone());
        }
        DegreeDistribution::Poisson { mean } => {
            if !(*mean > 0.0) {
                return Err(OracleError::Spec("mean degree must be positive".into()));
            }
            let d = Poisson::new(*mean).map_err(|e| OracleError::Spec(e.to_string()))?;
            (0..n).map(|_| (d.sample(rng) as usize).min(cap)).collect()
        }
        DegreeDistribution::ShiftedNegBinomial { mean, dispersion } => {
            if !(*mean > 1.0 && *dispersion > 0.0) {
                return Err(OracleError::Spec(
                    "shifted negative binomial needs mean > 1 and dispersion > 0".into(),
                ));
            }
            // gamma-Poisson mixture
            let gamma = Gamma::new(*dispersion, (mean - 1.0) / dispersion)
                .map_err(|e| OracleError::Spec(e.to_string()))?;
            (0..n)
                .map(|_| {
                    let lambda: f64 = gamma.sample(rng);
                    let extra = if lambda > 0.0 {
                        Poisson::new(lambda).map_or(0.0, |p| p.sample(rng))
                    } else {
                        0.0
                    };
                    (1 + extra as usize).min(cap)
                })
                .collect()
        }
    };
    if degrees.iter().sum::<usize>() % 2 == 1 {
        let candidates: Vec<usize> = (0..n).filter(|&i| degrees[i] < cap).collect();
        let i = candidates[rng.random_range(0..candidates.len())];
        degrees[i] += 1;
    }
    Ok(degrees)
}

/// Erdős–Gallai test.
pub fn is_graphical(seq: &[usize]) -> bool {
    let n = seq.len();
    if seq.iter().sum::<usize>() % 2 == 1 || seq.iter().any(|&d| d >= n.max(1)) {
        return false;
    }
    let mut d = seq.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    let mut left = 0usize;
    for k in 1..=n {
        left += d[k - 1];
        let right = k * (k - 1) + d[k..].iter().map(|&x| x.min(k)).sum::<usize>();
        if left > right {
            return false;
        }
    }
    true
}

fn configuration_edges<R: Rng>(degrees: &[usize], rng: &mut R) -> (Vec<(usize, usize)>, GenReport) {
    let mut stubs: Vec<usize> = degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    stubs.shuffle(rng);
    let mut report = GenReport {
        stubs: stubs.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(stubs.len() / 2);
    for pair in stubs.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            report.erased_self_loops += 1;
            continue;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if seen.insert(key) {
            edges.push(key);
        } else {
            report.erased_multi_edges += 1;
        }
    }
    (edges, report)
}

fn uniform_edges<R: Rng>(
    offset: usize,
    size: usize,
    mean_degree: f64,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let possible = size * size.saturating_sub(1) / 2;
    let m = (size as f64 * mean_degree / 2.0).round() as usize;
    if m > possible {
        return Err(OracleError::Spec(format!(
            "mean degree {mean_degree} impossible on {size} nodes"
        )));
    }
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let a = rng.random_range(0..size);
        let b = rng.random_range(0..size);
        if a == b {
            continue;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if seen.insert(key) {
            edges.push((key.0 + offset, key.1 + offset));
        }
    }
    Ok(edges)
}

fn planted_attribute<R: Rng>(graph: &PopulationGraph, spec: &AttributeSpec, rng: &mut R) -> Vec<f64> {
    let n = graph.node_count();
    let k = (spec.prevalence * n as f64).round() as usize;
    let mut value = vec![0.0; n];
    let mut positives: Vec<usize> = Vec::with_capacity(k);
    while positives.len() < k {
        let mut pick = None;
        if !positives.is_empty() && rng.random_bool(spec.homophily) {
            let u = positives[rng.random_range(0..positives.len())];
            let nb = graph.neighbors(u);
            if !nb.is_empty() {
                let v = nb[rng.random_range(0..nb.len())];
                if value[v] == 0.0 {
                    pick = Some(v);
                }
            }
        }
        let v = match pick {
            Some(v) => v,
            None => loop {
                let v = rng.random_range(0..n);
                if value[v] == 0.0 {
                    break v;
                }
            },
        };
        value[v] = 1.0;
        positives.push(v);
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, trace: f64, reseed: f64) -> ResampleConfig {
        ResampleConfig {
            trace_p: trace,
            reseed_p: reseed,
            ..ResampleConfig::process(m)
        }
    }

    fn path(n: usize) -> TraceGraph {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        TraceGraph::new(n, &e)
    }

    #[test]
    fn rows_are_distributions() {
        let g = path(4);
        let m = transition_matrix(&g, &cfg(2, 0.5, 0.05).rule()).unwrap();
        for row in &m {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn hand_checked_transition_two_nodes() {
        // path 0-1, target 1, p=0.5, r=0.1, from state {0}:
        // node 1 joins w.p. 1 - 0.5*0.9 = 0.55, then thinning with q=1/2
        let g = path(2);
        let m = transition_matrix(&g, &cfg(1, 0.5, 0.1).rule()).unwrap();
        let row = &m[0b01];
        assert!((row[0b01] - (0.45 + 0.55 * 0.25)).abs() < 1e-15);
        assert!((row[0b10] - 0.55 * 0.25).abs() < 1e-15);
        assert!((row[0b11] - 0.55 * 0.25).abs() < 1e-15);
        assert!((row[0b00] - 0.55 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_node_absorbs() {
        let g = TraceGraph::new(1, &[]);
        let r = exact_stationary_on(&g, &cfg(1, 0.5, 0.05), &[]).unwrap();
        assert!((r.marginals[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cycle_marginals_equal() {
        let e: Vec<_> = (0..4).map(|i| (i, (i + 1) % 4)).collect();
        let g = TraceGraph::new(4, &e);
        let r = exact_stationary_on(&g, &cfg(2, 0.5, 0.05), &[]).unwrap();
        let s: f64 = r.stationary.iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
        for &m in &r.marginals {
            assert!((m - r.marginals[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn path_center_has_largest_marginal() {
        let g = path(5);
        let r = exact_stationary_on(&g, &cfg(2, 0.5, 0.05), &[(0, 1), (1, 2)]).unwrap();
        let phi = &r.marginals;
        assert!(phi[2] > phi[1] && phi[1] > phi[0], "{phi:?}");
        assert!((phi[0] - phi[4]).abs() < 1e-10);
        for &(a, b) in &[(0, 1), (1, 2)] {
            let j = r.pair(a, b).unwrap();
            assert!(j <= phi[a].min(phi[b]));
            assert!(j > phi[a] * phi[b], "linked members co-occur more often");
        }
    }

    #[test]
    fn no_reseeding_is_reducible() {
        let g = TraceGraph::new(4, &[(0, 1), (2, 3)]);
        match exact_stationary_on(&g, &cfg(2, 0.5, 0.0), &[]) {
            Err(OracleError::Reducible { closed_classes }) => {
                let mut states: Vec<u32> =
                    closed_classes.iter().map(|c| c.states[0]).collect();
                states.sort_unstable();
                // empty set, each pair alone, but not both pairs (size 4 > 2)
                assert_eq!(states, vec![0b0000, 0b0011, 0b1100]);
            }
            other => panic!("expected reducible, got {other:?}"),
        }
    }

    #[test]
    fn size_limit_enforced() {
        let g = path(13);
        assert!(matches!(
            exact_stationary_on(&g, &cfg(2, 0.5, 0.05), &[]),
            Err(OracleError::TooLarge(13))
        ));
    }

    #[test]
    fn erdos_gallai() {
        assert!(is_graphical(&[2, 2, 2]));
        assert!(is_graphical(&[1, 1, 0]));
        assert!(!is_graphical(&[3, 1, 1]));
        assert!(!is_graphical(&[3, 3, 1, 1]));
        assert!(!is_graphical(&[1, 1, 1]));
    }

    #[test]
    fn fixed_sequence_errors() {
        let spec = SyntheticPopSpec {
            nodes: 3,
            degree_model: DegreeModel::Configuration(DegreeDistribution::Fixed(vec![3, 1, 1])),
            attributes: vec![],
        };
        assert!(matches!(gen_population(&spec, 1), Err(OracleError::Spec(_))));
    }

    #[test]
    fn two_component_density_and_zero_prevalence() {
        let spec = SyntheticPopSpec {
            nodes: 400,
            degree_model: DegreeModel::TwoComponent {
                sizes: (200, 200),
                mean_degrees: (10.0, 3.0),
            },
            attributes: vec![AttributeSpec {
                name: "none".into(),
                prevalence: 0.0,
                homophily: 0.5,
            }],
        };
        let (g, attrs, _) = gen_population(&spec, 3).unwrap();
        let edges_in = |lo: usize, hi: usize| {
            g.edges().filter(|&(a, _)| a >= lo && a < hi).count()
        };
        assert!(edges_in(0, 200) > edges_in(200, 400));
        assert!(g.edges().all(|(a, b)| (a < 200) == (b < 200)));
        assert!(attrs.column("none").unwrap().iter().all(|&v| v == 0.0));
    }
}
