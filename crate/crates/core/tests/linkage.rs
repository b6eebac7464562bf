mod common;

use std::collections::{HashMap, HashSet};

use common::*;
use linkstop::linkage::{
    compare_pair, estimate_u_probs, fs_score, known_links, link, link_quality, top_links, ComparisonVector,
    FsParameters, LinkageConfig, ScorerKind, TruthTable,
};
use linkstop::records::{BlockIndex, Field, RecordA, RecordB};
use linkstop::simgen::{simulate, CorpusConfig, Dataset, ScenarioConfig};
use linkstop::similarity::{jaro, jaro_winkler, JaroConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_dataset(seed: u64) -> Dataset {
    let cfg = CorpusConfig {
        n_persons: 1800,
        n_duplicates: 200,
        n_a: 400,
        n_b: 1600,
        ..CorpusConfig::default()
    };
    simulate(&cfg, &ScenarioConfig::default(), seed).unwrap().1
}

#[test]
fn jaro_winkler_reference_table() {
    let cfg = JaroConfig::default();
    for &(a, b, j, jw) in JW_TABLE {
        assert!((jaro(a, b, &cfg) - j).abs() < 1e-6, "{a}/{b}");
        assert!((jaro_winkler(a, b, &cfg) - jw).abs() < 1e-6, "{a}/{b}");
    }
}

fn random_records(rng: &mut ChaCha8Rng, n_a: usize, n_b: usize) -> (Vec<RecordA>, Vec<RecordB>) {
    let a = (0..n_a)
        .map(|i| RecordA {
            id: i as u64 + 1,
            first_name: "A".into(),
            last_name: "B".into(),
            birth_month: 1,
            birth_day: 1,
            birth_year: rng.random_range(1950..1960),
            covariates: vec![],
            treated: false,
        })
        .collect();
    let b = (0..n_b)
        .map(|i| RecordB {
            id: 1000 + i as u64,
            first_name: "A".into(),
            last_name: "B".into(),
            birth_month: 1,
            birth_day: 1,
            birth_year: rng.random_range(1950..1962),
            outcome: 0.0,
        })
        .collect();
    (a, b)
}

#[test]
fn blocking_counts_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let (a, b) = random_records(&mut rng, 100, 400);
    let index = BlockIndex::build(&a, &b, Field::BirthYear);
    let brute = a
        .iter()
        .map(|ra| b.iter().filter(|rb| rb.birth_year == ra.birth_year).count())
        .sum::<usize>();
    assert_eq!(index.pair_count(), brute);
    assert_eq!(index.candidate_pairs().count(), brute);
    for (i, j) in index.candidate_pairs() {
        assert_eq!(a[i].birth_year, b[j].birth_year);
    }
}

#[test]
fn top_links_match_brute_force_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (a, b) = random_records(&mut rng, 100, 400);
    // Coarse integer scores force many ties.
    let scores: Vec<Vec<f64>> = (0..a.len())
        .map(|_| (0..b.len()).map(|_| rng.random_range(0..6) as f64).collect())
        .collect();
    let floor = 2.0;
    let gamma = ComparisonVector::from_bits(&[true]);
    let index = BlockIndex::build(&a, &b, Field::BirthYear);
    let got = top_links(&index, &a, &b, |i, j| (scores[i][j], gamma), floor);

    let mut expected = Vec::new();
    for (i, ra) in a.iter().enumerate() {
        let best = b
            .iter()
            .enumerate()
            .filter(|(_, rb)| rb.birth_year == ra.birth_year)
            .map(|(j, rb)| (scores[i][j], rb.id))
            .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
        if let Some((s, bid)) = best.filter(|(s, _)| *s >= floor) {
            expected.push((ra.id, bid, s));
        }
    }
    expected.sort_by(|x, y| y.2.total_cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let got: Vec<_> = got.iter().map(|p| (p.a_id, p.b_id, p.score)).collect();
    assert_eq!(got, expected);
}

#[test]
fn link_output_is_consistent_with_recomputation() {
    let data = small_dataset(203);
    let cfg = LinkageConfig::default();
    let out = link(&data.file_a, &data.file_b, &cfg).unwrap();
    let params = out.params.clone().unwrap();
    let specs = cfg.field_specs();

    // u-probabilities recounted over every blocked pair.
    let b_by_year: HashMap<i32, Vec<&RecordB>> = data.file_b.iter().fold(HashMap::new(), |mut m, r| {
        m.entry(r.birth_year).or_default().push(r);
        m
    });
    let mut vectors = Vec::new();
    for ra in &data.file_a {
        for rb in b_by_year.get(&ra.birth_year).into_iter().flatten() {
            vectors.push(compare_pair(ra, *rb, &specs, &cfg.jaro));
        }
    }
    assert_eq!(out.candidate_pairs, vectors.len());
    let u = estimate_u_probs(&vectors, specs.len()).unwrap();
    assert_eq!(u, params.theta_u);

    let a_by_id: HashMap<u64, &RecordA> = data.file_a.iter().map(|r| (r.id, r)).collect();
    let b_by_id: HashMap<u64, &RecordB> = data.file_b.iter().map(|r| (r.id, r)).collect();
    let mut seen = HashSet::new();
    for p in &out.pairs {
        assert!(seen.insert(p.a_id), "one link per File A record");
        let g = compare_pair(a_by_id[&p.a_id], b_by_id[&p.b_id], &specs, &cfg.jaro);
        assert_eq!(g, p.comparison);
        assert_eq!(p.score, fs_score(&g, &params));
        assert!(p.score >= 0.0);
    }
    let known = out.pairs.iter().filter(|p| p.comparison.bits().all(|b| b)).count();
    assert_eq!(known_links(&out.pairs).len(), known);
}

#[test]
fn link_quality_rows_match_counting() {
    let data = small_dataset(204);
    let out = link(&data.file_a, &data.file_b, &LinkageConfig::default()).unwrap();
    let truth = TruthTable::new(data.file_a.iter().map(|r| r.id), data.truth.links.iter().copied());
    let rows = link_quality(&out.pairs, &truth).unwrap();
    let true_set: HashSet<(u64, u64)> = data.truth.links.iter().copied().collect();
    for row in &rows {
        let kept: Vec<_> = out.pairs.iter().filter(|p| p.score >= row.threshold).collect();
        let good = kept.iter().filter(|p| true_set.contains(&p.key())).count();
        assert_eq!(row.units, kept.len());
        assert!((row.link_rate - 100.0 * good as f64 / kept.len() as f64).abs() < 1e-9);
        let mut uses: HashMap<u64, usize> = HashMap::new();
        for p in &kept {
            *uses.entry(p.b_id).or_default() += 1;
        }
        assert_eq!(row.duplicates, uses.values().map(|&c| c - 1).sum::<usize>());
    }
    // Known links are all true links in this corpus.
    assert_eq!(rows.last().unwrap().link_rate, 100.0);
}

#[test]
fn average_jw_scorer_respects_its_floor() {
    let data = small_dataset(205);
    let cfg = LinkageConfig {
        scorer: ScorerKind::AvgJw,
        ..LinkageConfig::default()
    };
    let out = link(&data.file_a, &data.file_b, &cfg).unwrap();
    assert!(out.params.is_none());
    assert!(!out.pairs.is_empty());
    assert!(out.pairs.iter().all(|p| p.score >= 0.8 && p.score <= 1.0));
}

#[test]
fn score_routes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(206);
    for _ in 0..2000 {
        let f = rng.random_range(1..=8);
        let m: Vec<f64> = (0..f).map(|_| rng.random_range(0.5..0.999)).collect();
        let u: Vec<f64> = (0..f).map(|_| rng.random_range(0.001..0.5)).collect();
        let bits: Vec<bool> = (0..f).map(|_| rng.random_bool(0.5)).collect();
        let g = ComparisonVector::from_bits(&bits);
        let params = FsParameters::new(m, u).unwrap();
        let direct = fs_score(&g, &params);
        let ratio = (params.m_prob(&g) / params.u_prob(&g)).log2();
        assert!((direct - ratio).abs() < 1e-12);
    }
}
