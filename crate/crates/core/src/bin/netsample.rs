use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use netsample::config::ConfigMap;
use netsample::fieldsim::{self, DesignKind, SampleNetwork};
use netsample::harness::{self, EstimatorSpec, HarnessError, PopulationSource, Result, StudyConfig};
use netsample::oracle::{self, OracleError};
use netsample::resampler;
use netsample::EstimatorId;

/// Link-tracing survey simulation and design-adherent estimation.
///
/// Every configuration key can be given in a `--config` file, with
/// `--set KEY=VALUE`, or as a flag of the same name (`--design.target-n 400`).
/// Flags win over `--set`, which wins over the file.
#[derive(Parser)]
#[command(name = "netsample", version)]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra configuration assignment, repeatable
    #[arg(long = "set", short = 'D', global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population from `synthetic.*` keys
    GenPopulation {
        /// Output directory for edges.txt and attributes.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw one field sample
    Survey {
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// rds, rds_plus, sb or sb_plus
        #[arg(long, default_value = "rds")]
        design: String,
        /// Output sample directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate inclusion frequencies by resampling a sample network
    Resample {
        #[arg(long)]
        sample: PathBuf,
        /// Output directory for frequencies.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Point estimates and confidence intervals for one sample
    Estimate {
        #[arg(long)]
        sample: PathBuf,
        /// Directory written by `resample`
        #[arg(long)]
        frequencies: PathBuf,
        /// Comma-separated; defaults to every sample variable plus degree and deg2plus
        #[arg(long)]
        variables: Option<String>,
        /// Comma-separated `estimator[:variance]`
        #[arg(long)]
        estimators: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Output CSV (default stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full replication study and write the tables
    Study {
        /// Output directory for the tables
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact stationary law of the resampling process, or Monte Carlo
    /// first-stage inclusion probabilities
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// Sample directory (exact)
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Also report joint probabilities over sample edges (exact)
        #[arg(long)]
        pairs: bool,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        attributes: Option<PathBuf>,
        #[arg(long, default_value = "rds")]
        design: String,
        /// Field replications (mc)
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Exact,
    Mc,
}

/// Configuration keys exposed as flags on each subcommand.
fn subcommand_keys(name: &str) -> Vec<String> {
    let population = || vec!["population.edges".to_string(), "population.attributes".to_string()];
    let mut keys = match name {
        "gen-population" => harness::synthetic_keys(),
        "survey" => harness::design_keys(),
        "resample" => harness::resample_keys(),
        "study" => harness::study_keys(),
        "oracle" => {
            let mut k = harness::resample_keys();
            k.extend(harness::design_keys());
            k
        }
        _ => Vec::new(),
    };
    if matches!(name, "survey" | "oracle") {
        keys.extend(population());
    }
    // these already exist as global flags
    keys.retain(|k| k != "seed" && k != "threads");
    keys
}

fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for name in ["gen-population", "survey", "resample", "study", "oracle"] {
        cmd = cmd.mut_subcommand(name, |mut sub| {
            for key in subcommand_keys(name) {
                let key: &'static str = Box::leak(key.into_boxed_str());
                sub = sub.arg(
                    clap::Arg::new(key)
                        .long(key)
                        .value_name("VALUE")
                        .hide(true)
                        .action(clap::ArgAction::Set),
                );
            }
            sub
        });
    }
    cmd
}

fn build_config(cli: &Cli, sub: &ArgMatches, sub_name: &str) -> Result<ConfigMap> {
    let mut map = match &cli.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::new(),
    };
    for pair in &cli.set {
        map.set_pair(pair)?;
    }
    for key in subcommand_keys(sub_name) {
        if let Ok(Some(v)) = sub.try_get_one::<String>(&key) {
            map.set(&key, v);
        }
    }
    if let Some(seed) = cli.seed {
        map.set("seed", &seed.to_string());
    }
    if let Some(t) = cli.threads {
        map.set("threads", &t.to_string());
    }
    let known: BTreeSet<String> = harness::study_keys().into_iter().collect();
    let unknown: Vec<String> = map.unused().into_iter().filter(|k| !known.contains(k)).collect();
    if !unknown.is_empty() {
        return Err(netsample::config::ConfigError::Unknown(unknown).into());
    }
    Ok(map)
}

fn master_seed(map: &ConfigMap) -> Result<u64> {
    Ok(map.get_or("seed", 1u64)?)
}

fn population(map: &ConfigMap, edges: &Option<PathBuf>, attributes: &Option<PathBuf>) -> Result<PopulationSource> {
    let edges = edges
        .clone()
        .or_else(|| map.raw("population.edges").map(PathBuf::from))
        .ok_or_else(|| HarnessError::Study("no population: pass --edges".into()))?;
    let attributes = attributes
        .clone()
        .or_else(|| map.raw("population.attributes").map(PathBuf::from));
    Ok(PopulationSource::Files { edges, attributes })
}

fn design(map: &ConfigMap, name: &str) -> Result<(DesignKind, fieldsim::DesignConfig)> {
    let kind = DesignKind::parse(name).ok_or_else(|| HarnessError::Study(format!("unknown design `{name}`")))?;
    let mut dc = kind.config();
    harness::apply_design_keys(map, "design", &mut dc)?;
    harness::apply_design_keys(map, kind.slug(), &mut dc)?;
    Ok((kind, dc))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli, matches: &ArgMatches) -> Result<()> {
    let (sub_name, sub) = matches.subcommand().expect("subcommand is required");
    let map = build_config(&cli, sub, sub_name)?;
    if let Some(t) = map.get::<usize>("threads")? {
        if t == 0 {
            return Err(HarnessError::Study("threads must be at least 1".into()));
        }
        // ignore failure: a global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let seed = master_seed(&map)?;
    match cli.command {
        Command::GenPopulation { out } => {
            let spec = harness::synthetic_spec_from_config(&map)?;
            let pop_seed = map.get("synthetic.seed")?.unwrap_or(seed);
            let (graph, attrs, report) = oracle::gen_population(&spec, pop_seed)?;
            mkdir(&out)?;
            let path = out.join("edges.txt");
            let mut w = create(&path)?;
            graph.write_edges(&mut w).and_then(|_| w.flush()).map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })?;
            attrs.write_csv(&graph, create(&out.join("attributes.csv"))?)?;
            eprintln!(
                "{} nodes, {} edges; erased {} self-loops and {} multi-edges",
                graph.node_count(),
                graph.edge_count(),
                report.erased_self_loops,
                report.erased_multi_edges
            );
        }
        Command::Survey {
            edges,
            attributes,
            design: name,
            out,
        } => {
            let (graph, attrs) = population(&map, &edges, &attributes)?.load(seed)?;
            let (_, dc) = design(&map, &name)?;
            let sample = fieldsim::run_survey(&graph, &attrs, &dc, seed)?;
            sample.write_dir(&out)?;
            let s = sample.stats();
            eprintln!(
                "{} members, {} seeds, {} days, {} plus edges",
                sample.len(),
                sample.seeds().count(),
                s.days,
                sample.plus_edges().len()
            );
        }
        Command::Resample { sample, out } => {
            let sample = SampleNetwork::read_dir(&sample)?;
            let (mut rc, target) = harness::resample_from_config(&map)?;
            rc.target_m = target.resolve(sample.len());
            let freq = resampler::run(&sample, &rc, seed)?;
            harness::write_frequencies(&freq, &sample, &out)?;
            let d = freq.diagnostics;
            eprintln!(
                "{} effective iterations, burn-in {}, mean size {:.2}, {} stalled",
                freq.t_effective, d.burn_in, d.mean_size, d.stalled_resamples
            );
        }
        Command::Estimate {
            sample,
            frequencies,
            variables,
            estimators,
            alpha,
            out,
        } => {
            let sample = SampleNetwork::read_dir(&sample)?;
            let freq = harness::read_frequencies(&frequencies)?;
            let variables = match variables {
                Some(v) => netsample::config::split_list(&v),
                None => {
                    let mut v: Vec<String> = sample.variable_names().map(str::to_string).collect();
                    v.extend(["degree".to_string(), "deg2plus".to_string()]);
                    v
                }
            };
            let specs = match estimators {
                Some(list) => netsample::config::split_list(&list)
                    .iter()
                    .map(|s| EstimatorSpec::parse(s).ok_or_else(|| HarnessError::Study(format!("unknown estimator `{s}`"))))
                    .collect::<Result<Vec<_>>>()?,
                None => {
                    let first = if freq.g.is_some() {
                        EstimatorId::AdherentWr
                    } else {
                        EstimatorId::Adherent
                    };
                    [first, EstimatorId::VhCurrent, EstimatorId::SampleMean]
                        .into_iter()
                        .map(EstimatorSpec::default_for)
                        .collect()
                }
            };
            let est = harness::estimate_sample(&sample, &freq, &variables, &specs, alpha)?;
            match out {
                Some(path) => harness::write_estimates(create(&path)?, &sample, &variables, &est)?,
                None => harness::write_estimates(io::stdout().lock(), &sample, &variables, &est)?,
            }
        }
        Command::Study { out } => {
            let cfg = StudyConfig::from_config(&map)?;
            let report = harness::run_study(&cfg)?;
            let files = harness::emit_tables(&report, &out)?;
            eprintln!("wrote {} tables to {}", files.len(), out.display());
        }
        Command::Oracle {
            kind,
            sample,
            pairs,
            edges,
            attributes,
            design: name,
            replications,
            out,
        } => {
            mkdir(&out)?;
            let io = |path: &Path| {
                let p = path.display().to_string();
                move |e: csv::Error| HarnessError::Data(format!("{p}: {e}"))
            };
            match kind {
                OracleKind::Exact => {
                    let dir = sample.ok_or_else(|| HarnessError::Study("--sample is required".into()))?;
                    let sample = SampleNetwork::read_dir(&dir)?;
                    let (mut rc, target) = harness::resample_from_config(&map)?;
                    rc.target_m = target.resolve(sample.len());
                    let pair_list = if pairs { sample.traceable_edges() } else { Vec::new() };
                    let result = match oracle::exact_process_stationary(&sample, &rc, &pair_list) {
                        Err(OracleError::Reducible { closed_classes }) => {
                            for c in &closed_classes {
                                let members: Vec<String> = (0..sample.len())
                                    .filter(|i| c.states[0] & (1 << i) != 0)
                                    .map(|i| i.to_string())
                                    .collect();
                                eprintln!("closed class: {{{}}}", members.join(", "));
                            }
                            return Err(OracleError::Reducible { closed_classes }.into());
                        }
                        other => other?,
                    };
                    let p = out.join("marginals.csv");
                    result.write_marginals(create(&p)?, sample.labels()).map_err(io(&p))?;
                    let p = out.join("states.csv");
                    result.write_states(create(&p)?).map_err(io(&p))?;
                    if pairs {
                        let p = out.join("pairs.csv");
                        result.write_pairs(create(&p)?).map_err(io(&p))?;
                    }
                    eprintln!("converged after {} iterations", result.iterations);
                }
                OracleKind::Mc => {
                    let (graph, _) = population(&map, &edges, &attributes)?.load(seed)?;
                    let (_, dc) = design(&map, &name)?;
                    let inc = oracle::mc_field_inclusion(&graph, &dc, replications, seed)?;
                    let p = out.join("inclusion.csv");
                    inc.write_csv(create(&p)?, &graph).map_err(io(&p))?;
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
