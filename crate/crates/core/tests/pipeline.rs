use std::sync::Arc;

use netsample::estimators::EstimatorId;
use netsample::fieldsim::{self, DesignConfig, DesignKind, SampleNetwork};
use netsample::harness::{self, PopulationSource, ResampleTarget, StudyConfig};
use netsample::netpop;
use netsample::oracle::{self, AttributeSpec, DegreeDistribution, DegreeModel, SyntheticPopSpec};
use netsample::resampler::{self, ResampleConfig};
use proptest::prelude::*;

fn population(nodes: usize, seed: u64) -> (netpop::PopulationGraph, netpop::AttributeTable) {
    let spec = SyntheticPopSpec {
        nodes,
        degree_model: DegreeModel::Configuration(DegreeDistribution::Poisson { mean: 4.0 }),
        attributes: vec![AttributeSpec {
            name: "flag".into(),
            prevalence: 0.3,
            homophily: 0.2,
        }],
    };
    let (g, a, _) = oracle::gen_population(&spec, seed).unwrap();
    (g, a)
}

#[test]
fn population_files_round_trip() {
    let (g, a) = population(150, 3);
    let dir = tempfile::tempdir().unwrap();
    let mut edges = Vec::new();
    g.write_edges(&mut edges).unwrap();
    let mut attrs = Vec::new();
    a.write_csv(&g, &mut attrs).unwrap();
    std::fs::write(dir.path().join("e.txt"), &edges).unwrap();

    let (g2, a2, _) = netpop::load_population(&edges[..], &attrs[..]).unwrap();
    assert_eq!(g2.node_count(), g.node_count());
    assert_eq!(g2.edge_count(), g.edge_count());
    let index = g2.label_index();
    for v in 0..g.node_count() {
        let w = index[g.label(v)];
        assert_eq!(g.degree(v), g2.degree(w));
        assert_eq!(a.column("flag").unwrap()[v], a2.column("flag").unwrap()[w]);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(netpop::load_edges("a b\nc\n".as_bytes()).is_err());
    assert!(netpop::load_edges("# nothing\n".as_bytes()).is_err());
    let (g, _) = netpop::load_edges("a b\n".as_bytes()).unwrap();
    assert!(netpop::load_attributes("node,x\nzz,1\n".as_bytes(), &g).is_err());
    assert!(netpop::load_attributes("node,x\na,yes\n".as_bytes(), &g).is_err());
}

#[test]
fn sample_directory_round_trip() {
    let (g, a) = population(300, 4);
    let cfg = DesignConfig {
        target_n: 60,
        ..DesignKind::RdsPlus.config()
    };
    let s = fieldsim::run_survey(&g, &a, &cfg, 9).unwrap();
    s.check_forest().unwrap();
    s.check_against(&g).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.write_dir(dir.path()).unwrap();
    let back = SampleNetwork::read_dir(dir.path()).unwrap();
    assert_eq!(back.len(), s.len());
    assert_eq!(back.labels(), s.labels());
    assert_eq!(back.degrees(), s.degrees());
    assert_eq!(back.values("flag"), s.values("flag"));
    let mut e1: Vec<_> = s.traceable_edges();
    let mut e2: Vec<_> = back.traceable_edges();
    e1.sort();
    e2.sort();
    assert_eq!(e1, e2);
}

#[test]
fn surveys_are_reproducible_from_the_seed() {
    let (g, a) = population(400, 5);
    let cfg = DesignConfig {
        target_n: 80,
        ..DesignKind::Sb.config()
    };
    let s1 = fieldsim::run_survey(&g, &a, &cfg, 77).unwrap();
    let s2 = fieldsim::run_survey(&g, &a, &cfg, 77).unwrap();
    assert_eq!(s1.members(), s2.members());
    let f1 = resampler::run(&s1, &ResampleConfig::process(27), 1).unwrap();
    let f2 = resampler::run(&s2, &ResampleConfig::process(27), 1).unwrap();
    assert_eq!(f1.f, f2.f);
}

#[test]
fn small_study_is_complete_and_deterministic() {
    let (g, a) = population(500, 6);
    let mut cfg = StudyConfig::new(PopulationSource::InMemory {
        graph: Arc::new(g),
        attrs: Arc::new(a),
    });
    cfg.designs = vec![(
        DesignKind::Rds,
        DesignConfig {
            target_n: 60,
            ..DesignKind::Rds.config()
        },
    )];
    cfg.replications = 12;
    cfg.resample = ResampleConfig {
        iterations: 800,
        ..ResampleConfig::process(20)
    };
    cfg.target = ResampleTarget::Fixed(20);
    cfg.variables = vec!["degree".into(), "flag".into()];
    let r1 = harness::run_study(&cfg).unwrap();
    let r2 = harness::run_study(&cfg).unwrap();
    let d = r1.design(DesignKind::Rds).unwrap();
    assert_eq!(d.replications.len(), 12);
    for est in [EstimatorId::Adherent, EstimatorId::VhCurrent, EstimatorId::SampleMean] {
        let m = d.metric("degree", est).unwrap();
        let r = 12.0;
        assert!((m.mse - (m.bias * m.bias + m.sd * m.sd * (r - 1.0) / r)).abs() < 1e-9 * m.mse.max(1.0));
    }
    let dir1 = tempfile::tempdir().unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    let files = harness::emit_tables(&r1, dir1.path()).unwrap();
    harness::emit_tables(&r2, dir2.path()).unwrap();
    assert!(!files.is_empty());
    for p in files {
        let name = p.file_name().unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(dir2.path().join(name)).unwrap(), "{name:?}");
    }
    let metrics = std::fs::read_to_string(dir1.path().join("metrics_rds.csv")).unwrap();
    assert!(metrics.starts_with(&harness::METRICS_HEADER.join(",")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn surveys_respect_the_design(seed in any::<u64>(), n in 5usize..60, coupons in 1usize..4, plus in any::<bool>()) {
        let (g, a) = population(200, 8);
        let kind = if plus { DesignKind::RdsPlus } else { DesignKind::Rds };
        let cfg = DesignConfig { target_n: n, coupon_max: coupons, ..kind.config() };
        let s = fieldsim::run_survey(&g, &a, &cfg, seed).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.check_forest().is_ok());
        prop_assert!(s.check_against(&g).is_ok());
        prop_assert!(s.max_recruits() <= coupons);
        let mut members = s.members().to_vec();
        members.sort();
        members.dedup();
        prop_assert_eq!(members.len(), n);
        if !plus {
            prop_assert!(s.plus_edges().is_empty());
        }
    }

    #[test]
    fn resampled_frequencies_are_probabilities(seed in any::<u64>(), m in 2usize..20) {
        let (g, a) = population(150, 10);
        let cfg = DesignConfig { target_n: 30, ..DesignKind::Sb.config() };
        let s = fieldsim::run_survey(&g, &a, &cfg, seed).unwrap();
        let f = resampler::run(&s, &ResampleConfig { iterations: 300, ..ResampleConfig::process(m) }, seed).unwrap();
        prop_assert_eq!(f.f.len(), s.len());
        prop_assert!(f.f.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mean_size: f64 = f.f.iter().sum();
        prop_assert!(mean_size <= s.len() as f64 + 1e-9);
    }
}
