mod common;

use std::collections::BTreeSet;

use common::{exhaustive_counts, random_design, rng};
use diffnet::ensemble::*;
use diffnet::metrics::*;
use diffnet::netfeat::EdgeIndex;
use diffnet::pipeline::{evaluate, TauRule};
use diffnet::rng::{key, stream, Purpose};
use diffnet::sgmcp::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn penalty(design: &JointDesign) -> PenaltyParams {
    let bounds = LambdaBounds::compute(design, true).unwrap();
    let l2 = 0.3 * bounds.lambda2_max();
    PenaltyParams::new(0.3 * bounds.lambda1_max(l2).unwrap(), l2)
}

#[test]
fn bootstrap_keeps_classes_and_includes_about_63_percent() {
    let n = 400;
    let z = DVector::from_fn(n, |k, _| f64::from(k % 3 == 0));
    let ids = DMatrix::from_fn(n, 1, |k, _| k as f64);
    let design = JointDesign::new(vec![DatasetBlock::new(ids, DMatrix::zeros(n, 0), z)]).unwrap();
    let mut total = 0.0;
    let reps = 50;
    for b in 0..reps {
        let mut r = stream(9, key(Purpose::Bootstrap, 0, 0, b));
        let sample = stratified_bootstrap(&design, &mut r).unwrap();
        let block = &sample.datasets[0];
        assert_eq!(block.n(), n);
        assert_eq!(block.n_cases(), design.datasets[0].n_cases());
        for k in 0..n {
            let id = block.features[(k, 0)] as usize;
            assert_eq!(block.labels[k], f64::from(id % 3 == 0));
        }
        let distinct: BTreeSet<u64> = block.features.iter().map(|&v| v as u64).collect();
        total += distinct.len() as f64 / n as f64;
    }
    let mean = total / reps as f64;
    let expected = 1.0 - (-1.0f64).exp();
    assert!((mean - expected).abs() < 0.01, "mean inclusion {mean}");
}

#[test]
fn ensemble_is_identical_across_thread_counts() {
    let mut r = rng(41);
    let design = random_design(&mut r, 30, 10, 1, 3, 1.0);
    let params = penalty(&design);
    let opts = EnsembleOptions {
        replicates: 12,
        seed: 5,
        ..EnsembleOptions::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&design, &params, &opts).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one.replicates, 12);
    for (&p, &c) in one.psi.iter().zip(one.counts.iter()) {
        assert_eq!(p, c as f64 / 12.0);
    }
}

#[test]
fn single_replicate_equals_fit_on_its_bootstrap_sample() {
    let mut r = rng(42);
    let design = random_design(&mut r, 30, 8, 0, 2, 1.0);
    let params = penalty(&design);
    let opts = EnsembleOptions {
        replicates: 1,
        seed: 17,
        ..EnsembleOptions::default()
    };
    let psi = run_ensemble(&design, &params, &opts).unwrap();
    let sample = stratified_bootstrap(&design, &mut stream(17, key(Purpose::Bootstrap, 0, 0, 0))).unwrap();
    let direct = fit(&sample, &params, &opts.fit).unwrap();
    assert_eq!(psi.psi.map(|v| v == 1.0), direct.support());
}

#[test]
fn psi_csv_round_trip_and_thresholds() {
    let index = EdgeIndex::new(4);
    let counts = DMatrix::from_row_slice(6, 2, &[5, 0, 1, 2, 0, 0, 3, 3, 4, 5, 2, 1]);
    let psi = EdgeWeightMatrix::from_counts(counts, 5, Some(index.clone())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/psi.csv");
    psi.save_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("edge,1,2\n1_2,"));
    let back = EdgeWeightMatrix::load_csv(&path, 5).unwrap().with_index(index).unwrap();
    assert_eq!(back.counts, psi.counts);
    let s = threshold_support(&back, 0.5).unwrap();
    assert_eq!(s.rows, vec![vec![0, 3, 4], vec![3, 4]]);
    let edges = s.edges.unwrap();
    assert_eq!(edges[1], [(1, 2), (1, 3)].into());
    assert!(threshold_support(&back, 1.0).is_err());
}

#[test]
fn score_support_matches_exhaustive_count() {
    let mut r = rng(43);
    for _ in 0..200 {
        let p = r.random_range(2..25);
        let index = EdgeIndex::new(p);
        let pick = |r: &mut common::ChaCha, frac: f64| -> EdgeSet {
            index.pairs().filter(|_| r.random::<f64>() < frac).collect()
        };
        let truth = pick(&mut r, 0.2);
        let estimate = pick(&mut r, 0.3);
        let s = score_support(&truth, &estimate, p).unwrap();
        let (tp, fp, tn, fn_) = exhaustive_counts(&truth, &estimate, p);
        assert_eq!((s.counts.tp, s.counts.fp, s.counts.tn, s.counts.fn_), (tp, fp, tn, fn_));
        assert_eq!(s.tpr, (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64));
        assert_eq!(s.tdr, (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64));
    }
}

#[test]
fn pr_curve_is_monotone_in_tau() {
    let mut r = rng(44);
    let index = EdgeIndex::new(8);
    let b = 20;
    let truth: EdgeSet = index.pairs().take(6).collect();
    let column: Vec<f64> = index
        .pairs()
        .map(|pair| {
            let boost = if truth.contains(&pair) { 8 } else { 0 };
            (r.random_range(0..=12) + boost) as f64 / b as f64
        })
        .collect();
    let curve = pr_curve(&column, b, &truth, &index).unwrap();
    assert_eq!(curve.len(), b);
    for w in curve.windows(2) {
        assert!(w[0].score.counts.tp >= w[1].score.counts.tp);
        assert!(w[0].score.counts.fp >= w[1].score.counts.fp);
        assert!(w[0].tau < w[1].tau);
    }
    let tau = select_tau_max_tpr_tdr(&column, b, &truth, &index).unwrap();
    let best = curve
        .iter()
        .filter_map(|pt| Some(pt.recall? + pt.precision?))
        .fold(f64::NEG_INFINITY, f64::max);
    let at = curve.iter().find(|pt| pt.tau == tau).unwrap();
    assert_eq!(at.recall.unwrap() + at.precision.unwrap(), best);
}

#[test]
fn evaluating_the_truth_gives_perfect_scores() {
    let index = EdgeIndex::new(6);
    let truth: Vec<EdgeSet> = vec![[(0, 1), (2, 5)].into(), [(3, 4)].into()];
    let mut counts = DMatrix::zeros(index.len(), 2);
    for (m, t) in truth.iter().enumerate() {
        for &(i, j) in t {
            counts[(index.position(i, j).unwrap(), m)] = 10u32;
        }
    }
    let psi = EdgeWeightMatrix::from_counts(counts, 10, Some(index)).unwrap();
    for rule in [TauRule::Fixed { tau: 0.5 }, TauRule::MaxTprTdr] {
        for e in evaluate(&psi, &truth, rule).unwrap() {
            assert_eq!((e.score.tpr, e.score.tnr, e.score.tdr), (Some(1.0), Some(1.0), Some(1.0)));
        }
    }
}

#[test]
fn summary_formats_percentages_and_missing_rates() {
    let score = |tp, fp, tn, fn_| RecoveryScore::from_counts(Counts { tp, fp, tn, fn_ });
    let row = SummaryRow::from_scores("joint", "hub (40,40,40)", 1, &[score(3, 1, 10, 1), score(0, 0, 14, 1)]);
    assert_eq!(row.tpr, Some(0.375));
    // TDR is undefined for the second replication and left out of the mean
    assert_eq!(row.tdr, Some(0.75));
    let text = format_summary(&[row]);
    assert!(text.contains("37.5"));
    assert!(text.contains("75.0"));
}
