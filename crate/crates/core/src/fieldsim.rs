//! First-stage field survey simulation.
//!
//! The survey is stepped in days. Seeds receive coupons on day 0; each day
//! every live coupon is redeemed with probability `redeem_prob` toward a
//! uniformly chosen not-yet-sampled partner of its holder, and coupons die
//! `coupon_expiry_days` after issue. Recruits get their own coupons the day
//! they join and can use them from the next day on.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::netpop::{format_number, AttributeTable, DerivedVariable, PopulationGraph};
use crate::rng;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid design: {0}")]
    Config(String),
    #[error("invalid sample network: {0}")]
    Invalid(String),
    #[error("sample file {file}: {message}")]
    Format { file: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// The four field designs compared in the study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignKind {
    Rds,
    RdsPlus,
    Sb,
    SbPlus,
}

impl DesignKind {
    pub const ALL: [DesignKind; 4] = [
        DesignKind::Rds,
        DesignKind::RdsPlus,
        DesignKind::Sb,
        DesignKind::SbPlus,
    ];

    /// Stable id used for seed derivation.
    pub fn id(self) -> u64 {
        match self {
            DesignKind::Rds => 0,
            DesignKind::RdsPlus => 1,
            DesignKind::Sb => 2,
            DesignKind::SbPlus => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Rds => "RDS",
            DesignKind::RdsPlus => "RDS+",
            DesignKind::Sb => "SB",
            DesignKind::SbPlus => "SB+",
        }
    }

    /// File-name friendly form.
    pub fn slug(self) -> &'static str {
        match self {
            DesignKind::Rds => "rds",
            DesignKind::RdsPlus => "rds_plus",
            DesignKind::Sb => "sb",
            DesignKind::SbPlus => "sb_plus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rds" => Some(DesignKind::Rds),
            "rds+" | "rds_plus" | "rdsplus" => Some(DesignKind::RdsPlus),
            "sb" => Some(DesignKind::Sb),
            "sb+" | "sb_plus" | "sbplus" => Some(DesignKind::SbPlus),
            _ => None,
        }
    }

    pub fn plus_links(self) -> bool {
        matches!(self, DesignKind::RdsPlus | DesignKind::SbPlus)
    }

    /// Default field design: n = 1200, 20% seeds, 28-day coupons, 3 coupons
    /// for RDS and up to 15 for snowball.
    pub fn config(self) -> DesignConfig {
        let coupon_max = match self {
            DesignKind::Rds | DesignKind::RdsPlus => 3,
            DesignKind::Sb | DesignKind::SbPlus => 15,
        };
        DesignConfig {
            coupon_max,
            plus_links: self.plus_links(),
            ..DesignConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignConfig {
    pub target_n: usize,
    pub seed_fraction: f64,
    pub coupon_max: usize,
    pub coupon_expiry_days: u32,
    /// Per-coupon, per-day redemption probability.
    pub redeem_prob: f64,
    pub plus_links: bool,
    /// Fresh seeds added on a stalled day, as a fraction of `target_n`.
    pub reseed_fraction: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            target_n: 1200,
            seed_fraction: 0.20,
            coupon_max: 3,
            coupon_expiry_days: 28,
            redeem_prob: 0.10,
            plus_links: false,
            reseed_fraction: 0.01,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self, population: usize) -> Result<()> {
        let bad = |m: String| Err(FieldError::Config(m));
        if self.target_n == 0 {
            return bad("target_n must be positive".into());
        }
        if self.target_n > population {
            return bad(format!(
                "target_n {} exceeds population size {population}",
                self.target_n
            ));
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0) {
            return bad(format!("seed_fraction {} not in (0, 1]", self.seed_fraction));
        }
        if self.coupon_max == 0 {
            return bad("coupon_max must be at least 1".into());
        }
        if self.coupon_expiry_days == 0 {
            return bad("coupon_expiry_days must be at least 1".into());
        }
        if !(self.redeem_prob > 0.0 && self.redeem_prob <= 1.0) {
            return bad(format!("redeem_prob {} not in (0, 1]", self.redeem_prob));
        }
        if !(self.reseed_fraction > 0.0 && self.reseed_fraction <= 1.0) {
            return bad(format!(
                "reseed_fraction {} not in (0, 1]",
                self.reseed_fraction
            ));
        }
        Ok(())
    }

    pub fn seed_count(&self) -> usize {
        ceil_count(self.seed_fraction, self.target_n)
    }

    fn reseed_count(&self) -> usize {
        ceil_count(self.reseed_fraction, self.target_n)
    }
}

fn ceil_count(fraction: f64, n: usize) -> usize {
    // tolerance keeps 0.2 * 1200 at 240 rather than 241
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SurveyStats {
    pub days: u32,
    pub reseeded: usize,
    pub wasted_coupons: usize,
    pub expired_coupons: usize,
    pub rejected_surplus: usize,
}

/// Result of a field survey.
///
/// Members are indexed locally `0..n` in order of recruitment. Recruitment
/// edges form a forest rooted at the seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleNetwork {
    population_index: Vec<usize>,
    labels: Vec<String>,
    recruiter: Vec<Option<usize>>,
    day: Vec<u32>,
    plus_edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    variables: Vec<(String, Vec<f64>)>,
    stats: SurveyStats,
}

impl SampleNetwork {
    /// Builds a sample directly from local structure; used for hand-made
    /// samples and for reading sample files. `recruitment` holds
    /// `(recruiter, recruit)` pairs.
    pub fn from_edges(
        n: usize,
        recruitment: &[(usize, usize)],
        plus: &[(usize, usize)],
    ) -> Result<Self> {
        let mut recruiter = vec![None; n];
        for &(from, to) in recruitment {
            if from >= n || to >= n {
                return Err(FieldError::Invalid(format!(
                    "recruitment edge ({from}, {to}) out of range"
                )));
            }
            if recruiter[to].replace(from).is_some() {
                return Err(FieldError::Invalid(format!(
                    "member {to} has more than one recruiter"
                )));
            }
        }
        let mut degrees = vec![0usize; n];
        for &(a, b) in recruitment.iter().chain(plus) {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        let sample = SampleNetwork {
            population_index: (0..n).collect(),
            labels: (0..n).map(|i| i.to_string()).collect(),
            recruiter,
            day: vec![0; n],
            plus_edges: Vec::new(),
            degrees,
            variables: Vec::new(),
            stats: SurveyStats::default(),
        };
        sample.check_forest()?;
        let sample = sample.with_plus_edges(plus)?;
        Ok(sample)
    }

    fn with_plus_edges(mut self, plus: &[(usize, usize)]) -> Result<Self> {
        let n = self.len();
        let recruit: HashSet<(usize, usize)> = self.recruitment_edges().map(ordered).collect();
        let mut seen = HashSet::new();
        for &(a, b) in plus {
            if a >= n || b >= n || a == b {
                return Err(FieldError::Invalid(format!("bad plus edge ({a}, {b})")));
            }
            let e = ordered((a, b));
            if !recruit.contains(&e) && seen.insert(e) {
                self.plus_edges.push(e);
            }
        }
        self.plus_edges.sort_unstable();
        Ok(self)
    }

    /// Replaces member degrees, e.g. with reported population degrees.
    pub fn with_degrees(mut self, degrees: Vec<usize>) -> Self {
        assert_eq!(degrees.len(), self.len());
        self.degrees = degrees;
        self
    }

    pub fn with_variable(mut self, name: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.len());
        self.variables.retain(|(n, _)| n != name);
        self.variables.push((name.to_string(), values));
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Population node index of each member.
    pub fn members(&self) -> &[usize] {
        &self.population_index
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_seed(&self, member: usize) -> bool {
        self.recruiter[member].is_none()
    }

    pub fn seeds(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_seed(i))
    }

    pub fn recruiter(&self, member: usize) -> Option<usize> {
        self.recruiter[member]
    }

    pub fn recruit_day(&self, member: usize) -> u32 {
        self.day[member]
    }

    /// `(recruiter, recruit)` pairs in member order.
    pub fn recruitment_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.recruiter
            .iter()
            .enumerate()
            .filter_map(|(to, from)| from.map(|f| (f, to)))
    }

    pub fn plus_edges(&self) -> &[(usize, usize)] {
        &self.plus_edges
    }

    /// Undirected edges usable for tracing: recruitment links in both
    /// directions plus any revealed plus-edges. Each edge once, `a < b`,
    /// sorted.
    pub fn traceable_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .recruitment_edges()
            .map(ordered)
            .chain(self.plus_edges.iter().copied())
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn stats(&self) -> SurveyStats {
        self.stats
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|(n, _)| n.as_str())
    }

    /// Per-member values of a stored attribute or a degree-derived variable.
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        if let Some((_, v)) = self.variables.iter().find(|(n, _)| n == name) {
            return Some(v.clone());
        }
        DerivedVariable::from_name(name)
            .map(|kind| self.degrees.iter().map(|&d| kind.value(d)).collect())
    }

    /// Maximum number of recruits made by any one member.
    pub fn max_recruits(&self) -> usize {
        let mut out = vec![0usize; self.len()];
        for (from, _) in self.recruitment_edges() {
            out[from] += 1;
        }
        out.into_iter().max().unwrap_or(0)
    }

    /// Verifies that recruitment edges form a forest rooted at the seeds.
    pub fn check_forest(&self) -> Result<()> {
        // 0 = unvisited, 1 = on current chain, 2 = reaches a seed
        let mut state = vec![0u8; self.len()];
        for start in 0..self.len() {
            let mut chain = Vec::new();
            let mut cur = start;
            loop {
                match state[cur] {
                    2 => break,
                    1 => {
                        return Err(FieldError::Invalid(format!(
                            "recruitment cycle through member {cur}"
                        )))
                    }
                    _ => {}
                }
                state[cur] = 1;
                chain.push(cur);
                match self.recruiter[cur] {
                    Some(r) => cur = r,
                    None => break,
                }
            }
            for c in chain {
                state[c] = 2;
            }
        }
        Ok(())
    }

    /// Checks that every traceable edge is a population link.
    pub fn check_against(&self, graph: &PopulationGraph) -> Result<()> {
        let mut seen = HashSet::new();
        for &p in &self.population_index {
            if !seen.insert(p) {
                return Err(FieldError::Invalid(format!("member {p} sampled twice")));
            }
        }
        for (a, b) in self.traceable_edges() {
            let (pa, pb) = (self.population_index[a], self.population_index[b]);
            if !graph.has_edge(pa, pb) {
                return Err(FieldError::Invalid(format!(
                    "edge ({}, {}) is not a population link",
                    self.labels[a], self.labels[b]
                )));
            }
        }
        Ok(())
    }
}

fn ordered((a, b): (usize, usize)) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Copy)]
struct Coupon {
    holder: usize,
    issued: u32,
}

/// Unsampled nodes split by whether they have any partner, supporting O(1)
/// uniform draws and removals.
struct Pool {
    linked: Vec<usize>,
    isolated: Vec<usize>,
    slot: Vec<usize>,
}

impl Pool {
    fn new(graph: &PopulationGraph) -> Self {
        let mut linked = Vec::new();
        let mut isolated = Vec::new();
        let mut slot = vec![0; graph.node_count()];
        for v in 0..graph.node_count() {
            let list = if graph.degree(v) > 0 {
                &mut linked
            } else {
                &mut isolated
            };
            slot[v] = list.len();
            list.push(v);
        }
        Pool {
            linked,
            isolated,
            slot,
        }
    }

    fn remove(&mut self, graph: &PopulationGraph, v: usize) {
        let list = if graph.degree(v) > 0 {
            &mut self.linked
        } else {
            &mut self.isolated
        };
        let i = self.slot[v];
        debug_assert_eq!(list[i], v);
        list.swap_remove(i);
        if let Some(&moved) = list.get(i) {
            self.slot[moved] = i;
        }
    }

    /// Uniform unsampled node, preferring nodes that have partners.
    fn draw<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        let list = if self.linked.is_empty() {
            &self.isolated
        } else {
            &self.linked
        };
        if list.is_empty() {
            None
        } else {
            Some(list[rng.random_range(0..list.len())])
        }
    }
}

struct SurveyState<'g> {
    graph: &'g PopulationGraph,
    local: Vec<usize>,
    pool: Pool,
    members: Vec<usize>,
    recruiter: Vec<Option<usize>>,
    day: Vec<u32>,
}

const UNSAMPLED: usize = usize::MAX;

impl<'g> SurveyState<'g> {
    fn new(graph: &'g PopulationGraph) -> Self {
        SurveyState {
            graph,
            local: vec![UNSAMPLED; graph.node_count()],
            pool: Pool::new(graph),
            members: Vec::new(),
            recruiter: Vec::new(),
            day: Vec::new(),
        }
    }

    fn admit(&mut self, node: usize, recruiter: Option<usize>, day: u32) -> usize {
        debug_assert_eq!(self.local[node], UNSAMPLED);
        let idx = self.members.len();
        self.local[node] = idx;
        self.pool.remove(self.graph, node);
        self.members.push(node);
        self.recruiter.push(recruiter);
        self.day.push(day);
        idx
    }
}

/// Runs one field survey with uniformly drawn seeds.
pub fn run_survey(
    graph: &PopulationGraph,
    attrs: &AttributeTable,
    cfg: &DesignConfig,
    rng_seed: u64,
) -> Result<SampleNetwork> {
    run_survey_inner(graph, attrs, cfg, None, rng_seed)
}

/// Runs one field survey starting from the given seed nodes instead of a
/// uniform draw. At most `target_n` seeds are used.
pub fn run_survey_from_seeds(
    graph: &PopulationGraph,
    attrs: &AttributeTable,
    cfg: &DesignConfig,
    seeds: &[usize],
    rng_seed: u64,
) -> Result<SampleNetwork> {
    let distinct: HashSet<usize> = seeds.iter().copied().collect();
    if distinct.len() != seeds.len() || seeds.iter().any(|&s| s >= graph.node_count()) {
        return Err(FieldError::Config("seed list must hold distinct node indices".into()));
    }
    if seeds.is_empty() {
        return Err(FieldError::Config("seed list is empty".into()));
    }
    run_survey_inner(graph, attrs, cfg, Some(seeds), rng_seed)
}

fn run_survey_inner(
    graph: &PopulationGraph,
    attrs: &AttributeTable,
    cfg: &DesignConfig,
    fixed_seeds: Option<&[usize]>,
    rng_seed: u64,
) -> Result<SampleNetwork> {
    cfg.validate(graph.node_count())?;
    let mut rng = rng::stream(rng_seed);
    let mut st = SurveyState::new(graph);
    let mut stats = SurveyStats::default();
    let mut coupons: Vec<Coupon> = Vec::new();
    let target = cfg.target_n;
    let expiry = cfg.coupon_expiry_days;

    let issue = |coupons: &mut Vec<Coupon>, member: usize, node: usize, day: u32| {
        let count = cfg.coupon_max.min(graph.degree(node));
        coupons.extend((0..count).map(|_| Coupon {
            holder: member,
            issued: day,
        }));
    };

    match fixed_seeds {
        Some(seeds) => {
            for &s in seeds.iter().take(target) {
                let m = st.admit(s, None, 0);
                issue(&mut coupons, m, s, 0);
            }
        }
        None => {
            for _ in 0..cfg.seed_count() {
                let s = st.pool.draw(&mut rng).expect("target_n <= N");
                let m = st.admit(s, None, 0);
                issue(&mut coupons, m, s, 0);
            }
        }
    }

    let mut day = 0u32;
    let mut candidates = Vec::new();
    let mut recruits: Vec<(usize, usize)> = Vec::new();
    while st.members.len() < target {
        day += 1;
        let before = coupons.len();
        coupons.retain(|c| day <= c.issued + expiry);
        stats.expired_coupons += before - coupons.len();

        if coupons.is_empty() {
            // stalled: nothing left to redeem, bring in fresh seeds
            let k = cfg.reseed_count().min(target - st.members.len());
            for _ in 0..k {
                let s = st.pool.draw(&mut rng).expect("target_n <= N");
                let m = st.admit(s, None, day);
                issue(&mut coupons, m, s, day);
            }
            stats.reseeded += k;
            continue;
        }

        coupons.shuffle(&mut rng);
        recruits.clear();
        let mut kept = Vec::with_capacity(coupons.len());
        for c in coupons.drain(..) {
            if !rng.random_bool(cfg.redeem_prob) {
                kept.push(c);
                continue;
            }
            let holder = st.members[c.holder];
            candidates.clear();
            candidates.extend(
                graph
                    .neighbors(holder)
                    .iter()
                    .copied()
                    .filter(|&v| st.local[v] == UNSAMPLED),
            );
            if candidates.is_empty() {
                stats.wasted_coupons += 1;
                continue;
            }
            let v = candidates[rng.random_range(0..candidates.len())];
            // mark now so the same partner cannot be recruited twice today
            st.local[v] = usize::MAX - 1;
            recruits.push((v, c.holder));
        }
        coupons = kept;

        let room = target - st.members.len();
        if recruits.len() > room {
            stats.rejected_surplus += recruits.len() - room;
            let mut keep: Vec<usize> =
                rand::seq::index::sample(&mut rng, recruits.len(), room).into_vec();
            keep.sort_unstable();
            let chosen: Vec<(usize, usize)> = keep.into_iter().map(|i| recruits[i]).collect();
            for &(v, _) in &recruits {
                st.local[v] = UNSAMPLED;
            }
            recruits = chosen;
        }
        for &(v, holder) in &recruits {
            st.local[v] = UNSAMPLED;
            let m = st.admit(v, Some(holder), day);
            issue(&mut coupons, m, v, day);
        }
    }
    stats.days = day;

    let labels = st.members.iter().map(|&p| graph.label(p).to_string()).collect();
    let degrees = st.members.iter().map(|&p| graph.degree(p)).collect();
    let variables = attrs
        .columns()
        .map(|(name, col)| {
            (
                name.to_string(),
                st.members.iter().map(|&p| col[p]).collect(),
            )
        })
        .collect();
    let sample = SampleNetwork {
        population_index: st.members,
        labels,
        recruiter: st.recruiter,
        day: st.day,
        plus_edges: Vec::new(),
        degrees,
        variables,
        stats,
    };
    Ok(if cfg.plus_links {
        augment_plus(&sample, graph)
    } else {
        sample
    })
}

/// Reveals every population link between two sample members that is not
/// already a recruitment link.
pub fn augment_plus(sample: &SampleNetwork, graph: &PopulationGraph) -> SampleNetwork {
    let mut local = HashMap::with_capacity(sample.len());
    for (i, &p) in sample.population_index.iter().enumerate() {
        local.insert(p, i);
    }
    let recruit: HashSet<(usize, usize)> = sample.recruitment_edges().map(ordered).collect();
    let mut plus = Vec::new();
    for (i, &p) in sample.population_index.iter().enumerate() {
        for q in graph.neighbors(p) {
            if let Some(&j) = local.get(q) {
                if i < j && !recruit.contains(&(i, j)) {
                    plus.push((i, j));
                }
            }
        }
    }
    plus.sort_unstable();
    SampleNetwork {
        plus_edges: plus,
        ..sample.clone()
    }
}

// ---------------------------------------------------------------------------
// Sample files

pub const MEMBERS_FILE: &str = "members.csv";
pub const RECRUITMENT_FILE: &str = "recruitment.csv";
pub const PLUS_FILE: &str = "plus_edges.csv";

impl SampleNetwork {
    /// Writes `members.csv`, `recruitment.csv` and `plus_edges.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(MEMBERS_FILE))?));
        let mut header = vec!["node", "seed", "degree", "day"];
        header.extend(self.variables.iter().map(|(n, _)| n.as_str()));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.labels[i].clone(),
                u8::from(self.is_seed(i)).to_string(),
                self.degrees[i].to_string(),
                self.day[i].to_string(),
            ];
            rec.extend(self.variables.iter().map(|(_, v)| format_number(v[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w =
            csv::Writer::from_writer(BufWriter::new(File::create(dir.join(RECRUITMENT_FILE))?));
        w.write_record(["recruiter", "recruit", "day"])?;
        for (from, to) in self.recruitment_edges() {
            w.write_record([
                self.labels[from].as_str(),
                self.labels[to].as_str(),
                &self.day[to].to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(PLUS_FILE))?));
        w.write_record(["a", "b"])?;
        for &(a, b) in &self.plus_edges {
            w.write_record([self.labels[a].as_str(), self.labels[b].as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a sample written by [`SampleNetwork::write_dir`]. Population
    /// indices are unknown after a round trip and are set to local indices.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let fmt = |file: &str, message: String| FieldError::Format {
            file: file.to_string(),
            message,
        };
        let mut r = csv::Reader::from_path(dir.join(MEMBERS_FILE))?;
        let headers = r.headers()?.clone();
        let expected = ["node", "seed", "degree", "day"];
        if headers.len() < 4 || headers.iter().take(4).ne(expected) {
            return Err(fmt(MEMBERS_FILE, "expected header node,seed,degree,day,...".into()));
        }
        let var_names: Vec<String> = headers.iter().skip(4).map(str::to_string).collect();
        let mut labels = Vec::new();
        let mut seed_flags = Vec::new();
        let mut degrees = Vec::new();
        let mut days = Vec::new();
        let mut vars = vec![Vec::new(); var_names.len()];
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| fmt(MEMBERS_FILE, format!("row {}: bad {what}", row + 2));
            labels.push(rec[0].to_string());
            seed_flags.push(rec[1].trim() == "1");
            degrees.push(rec[2].trim().parse::<usize>().map_err(|_| bad("degree"))?);
            days.push(rec[3].trim().parse::<u32>().map_err(|_| bad("day"))?);
            for (k, col) in vars.iter_mut().enumerate() {
                col.push(rec[4 + k].trim().parse::<f64>().map_err(|_| bad(&var_names[k]))?);
            }
        }
        let index: HashMap<&str, usize> =
            labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let lookup = |file: &str, l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| fmt(file, format!("unknown member `{l}`")))
        };
        let mut recruitment = Vec::new();
        for rec in csv::Reader::from_path(dir.join(RECRUITMENT_FILE))?.records() {
            let rec = rec?;
            recruitment.push((lookup(RECRUITMENT_FILE, &rec[0])?, lookup(RECRUITMENT_FILE, &rec[1])?));
        }
        let mut plus = Vec::new();
        let plus_path = dir.join(PLUS_FILE);
        if plus_path.exists() {
            for rec in csv::Reader::from_path(plus_path)?.records() {
                let rec = rec?;
                plus.push((lookup(PLUS_FILE, &rec[0])?, lookup(PLUS_FILE, &rec[1])?));
            }
        }
        let n = labels.len();
        let mut sample = SampleNetwork::from_edges(n, &recruitment, &plus)?;
        for (i, &seed) in seed_flags.iter().enumerate() {
            if seed != sample.is_seed(i) {
                return Err(fmt(
                    MEMBERS_FILE,
                    format!("seed flag of `{}` disagrees with recruitment edges", labels[i]),
                ));
            }
        }
        sample.labels = labels;
        sample.degrees = degrees;
        sample.day = days;
        sample.variables = var_names.into_iter().zip(vars).collect();
        Ok(sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> PopulationGraph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        PopulationGraph::from_index_edges(n, &edges).0
    }

    fn grid(w: usize) -> PopulationGraph {
        let mut edges = Vec::new();
        for r in 0..w {
            for c in 0..w {
                let v = r * w + c;
                if c + 1 < w {
                    edges.push((v, v + 1));
                }
                if r + 1 < w {
                    edges.push((v, v + w));
                }
            }
        }
        PopulationGraph::from_index_edges(w * w, &edges).0
    }

    #[test]
    fn seed_count_rounding() {
        let cfg = DesignConfig::default();
        assert_eq!(cfg.seed_count(), 240);
        assert_eq!(cfg.reseed_count(), 12);
    }

    #[test]
    fn target_above_population_rejected() {
        let g = cycle(5);
        let cfg = DesignConfig {
            target_n: 6,
            ..DesignConfig::default()
        };
        assert!(matches!(
            run_survey(&g, &AttributeTable::empty(), &cfg, 1),
            Err(FieldError::Config(_))
        ));
    }

    #[test]
    fn census_with_all_seeds() {
        let g = cycle(12);
        let cfg = DesignConfig {
            target_n: 12,
            seed_fraction: 1.0,
            ..DesignConfig::default()
        };
        let s = run_survey(&g, &AttributeTable::empty(), &cfg, 3).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s.seeds().count(), 12);
        let mut m = s.members().to_vec();
        m.sort_unstable();
        assert_eq!(m, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn single_coupon_gives_paths() {
        let g = grid(20);
        let cfg = DesignConfig {
            target_n: 150,
            seed_fraction: 0.05,
            coupon_max: 1,
            ..DesignConfig::default()
        };
        for seed in 0..5 {
            let s = run_survey(&g, &AttributeTable::empty(), &cfg, seed).unwrap();
            assert_eq!(s.len(), 150);
            assert!(s.max_recruits() <= 1);
            s.check_forest().unwrap();
            s.check_against(&g).unwrap();
        }
    }

    #[test]
    fn coupon_cap_respected_and_deterministic() {
        let g = grid(30);
        let cfg = DesignConfig {
            target_n: 300,
            seed_fraction: 0.1,
            ..DesignKind::Rds.config()
        };
        let a = run_survey(&g, &AttributeTable::empty(), &cfg, 9).unwrap();
        let b = run_survey(&g, &AttributeTable::empty(), &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.max_recruits() <= 3);
        assert!(a.seeds().count() >= 30);
        a.check_against(&g).unwrap();
    }

    #[test]
    fn triangle_plus_edge() {
        let g = PopulationGraph::from_index_edges(3, &[(0, 1), (1, 2), (2, 0)]).0;
        let s = SampleNetwork::from_edges(3, &[(0, 1), (1, 2)], &[]).unwrap();
        let plus = augment_plus(&s, &g);
        assert_eq!(plus.plus_edges(), &[(0, 2)]);
        assert_eq!(augment_plus(&plus, &g), plus);
    }

    #[test]
    fn plus_edges_saturate_on_census() {
        let g = grid(6);
        let cfg = DesignConfig {
            target_n: 36,
            seed_fraction: 0.1,
            plus_links: true,
            ..DesignConfig::default()
        };
        let s = run_survey(&g, &AttributeTable::empty(), &cfg, 5).unwrap();
        let mut got: Vec<_> = s
            .traceable_edges()
            .into_iter()
            .map(|(a, b)| ordered((s.members()[a], s.members()[b])))
            .collect();
        got.sort_unstable();
        let want: Vec<_> = g.edges().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn no_induced_edges_means_no_plus_edges() {
        // path 0-1-2 with members {0, 1} recruited along the only link
        let g = PopulationGraph::from_index_edges(3, &[(0, 1), (1, 2)]).0;
        let s = SampleNetwork::from_edges(2, &[(0, 1)], &[]).unwrap();
        assert!(augment_plus(&s, &g).plus_edges().is_empty());
    }

    #[test]
    fn forest_violations_detected() {
        assert!(SampleNetwork::from_edges(3, &[(0, 1), (1, 2), (2, 0)], &[]).is_err());
        assert!(SampleNetwork::from_edges(3, &[(0, 2), (1, 2)], &[]).is_err());
    }

    #[test]
    fn sample_files_round_trip() {
        let g = grid(8);
        let attrs = AttributeTable::new(
            vec!["x".into()],
            vec![(0..64).map(|i| f64::from(u8::from(i % 3 == 0))).collect()],
        );
        let cfg = DesignConfig {
            target_n: 30,
            seed_fraction: 0.1,
            plus_links: true,
            ..DesignConfig::default()
        };
        let s = run_survey(&g, &attrs, &cfg, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write_dir(dir.path()).unwrap();
        let back = SampleNetwork::read_dir(dir.path()).unwrap();
        assert_eq!(back.labels(), s.labels());
        assert_eq!(back.degrees(), s.degrees());
        assert_eq!(back.traceable_edges(), s.traceable_edges());
        assert_eq!(back.values("x"), s.values("x"));
        assert_eq!(back.seeds().collect::<Vec<_>>(), s.seeds().collect::<Vec<_>>());
    }

    #[test]
    fn surplus_recruits_truncated_to_exact_size() {
        // star: one seed with many coupons recruits many leaves in one day
        let edges: Vec<_> = (1..50).map(|i| (0, i)).collect();
        let g = PopulationGraph::from_index_edges(50, &edges).0;
        let cfg = DesignConfig {
            target_n: 7,
            seed_fraction: 1.0 / 7.0,
            coupon_max: 40,
            redeem_prob: 1.0,
            ..DesignConfig::default()
        };
        let s = run_survey_from_seeds(&g, &AttributeTable::empty(), &cfg, &[0], 4).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.stats().rejected_surplus, 34);
    }
}
