use codelang_core::corpus::{class_histogram, Corpus, LabelSet, Snippet};
use codelang_core::eval::{
    aggregate, confusability, confusion, evaluate_model, per_class, percent, Averaging, ConfusionMatrix, EvalError,
    EvalReport, PredictError, Predictor,
};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: u64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn frac(n: u64, d: u64) -> BigRational {
    if d == 0 {
        BigRational::zero()
    } else {
        q(n) / q(d)
    }
}

struct Oracle {
    p: Vec<BigRational>,
    r: Vec<BigRational>,
    f1: Vec<BigRational>,
    support: Vec<u64>,
    accuracy: BigRational,
}

/// Metrics straight from the definitions, in exact arithmetic. F1 is taken
/// as 2PR/(P+R) of the rational P and R.
#[allow(clippy::needless_range_loop)]
fn oracle(counts: &[Vec<u64>]) -> Oracle {
    let k = counts.len();
    let mut o = Oracle {
        p: vec![],
        r: vec![],
        f1: vec![],
        support: vec![],
        accuracy: BigRational::zero(),
    };
    let total: u64 = counts.iter().flatten().sum();
    let mut trace = 0;
    for c in 0..k {
        let tp = counts[c][c];
        trace += tp;
        let fp: u64 = (0..k).filter(|&a| a != c).map(|a| counts[a][c]).sum();
        let fn_: u64 = (0..k).filter(|&p| p != c).map(|p| counts[c][p]).sum();
        let p = frac(tp, tp + fp);
        let r = frac(tp, tp + fn_);
        let f1 = if (&p + &r).is_zero() {
            BigRational::zero()
        } else {
            q(2) * &p * &r / (&p + &r)
        };
        o.p.push(p);
        o.r.push(r);
        o.f1.push(f1);
        o.support.push(tp + fn_);
    }
    o.accuracy = frac(trace, total);
    o
}

fn f(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn hand_case() {
    let m = confusion(&[0, 0, 1, 1, 1, 1], &[0, 0, 0, 1, 1, 1], 2).unwrap();
    assert_eq!(m.counts(), [vec![2, 1], vec![0, 3]]);
    let pc = per_class(&m);
    assert_eq!((pc[0].precision, pc[0].recall, pc[0].f1, pc[0].support), (1.0, 2.0 / 3.0, 0.8, 3));
    assert_eq!((pc[1].precision, pc[1].recall, pc[1].f1, pc[1].support), (0.75, 1.0, 6.0 / 7.0, 3));
    let agg = aggregate(&pc, &m, Averaging::Macro).unwrap();
    assert_eq!(agg.accuracy, 5.0 / 6.0);
    assert_eq!(agg.precision, 0.875);
    let top = confusability(&m, 1);
    assert_eq!((top[0].actual, top[0].predicted, top[0].count), (0, 1, 1));
    assert_eq!(top[0].rate, 1.0 / 3.0);
}

#[test]
fn percent_rendering() {
    assert_eq!(percent(0.87202), "87.202");
    assert_eq!(percent(1.0), "100.000");
    assert_eq!(percent(5.0 / 6.0), "83.333");
}

#[test]
fn confusion_errors_and_identity() {
    assert!(matches!(confusion(&[0], &[0, 1], 2), Err(EvalError::LengthMismatch { .. })));
    assert!(matches!(confusion(&[2], &[0], 2), Err(EvalError::IdOutOfRange { id: 2, k: 2 })));
    assert!(matches!(confusion(&[0], &[3], 2), Err(EvalError::IdOutOfRange { id: 3, k: 2 })));
    let ids = [0, 1, 2, 2, 1, 0, 0];
    let m = confusion(&ids, &ids, 3).unwrap();
    assert_eq!(m.counts(), [vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
    assert!(confusability(&m, 5).is_empty());
    let pc = per_class(&m);
    assert!(pc.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
    let agg = aggregate(&pc, &m, Averaging::Weighted).unwrap();
    assert_eq!((agg.accuracy, agg.precision, agg.recall, agg.f1), (1.0, 1.0, 1.0, 1.0));
    assert!(matches!(
        aggregate(&per_class(&ConfusionMatrix::zeros(2)), &ConfusionMatrix::zeros(2), Averaging::Macro),
        Err(EvalError::EmptyMatrix)
    ));
}

#[test]
fn zero_support_class_scores_zero() {
    let m = ConfusionMatrix::from_counts(vec![vec![4, 0], vec![0, 0]]);
    let pc = per_class(&m);
    assert_eq!((pc[1].precision, pc[1].recall, pc[1].f1, pc[1].support), (0.0, 0.0, 0.0, 0));
}

#[test]
fn injected_c_to_cpp_rate() {
    let labels = LabelSet::from_names(["C", "C++", "Java", "Python"]);
    let m = ConfusionMatrix::from_counts(vec![
        vec![900, 80, 15, 5],
        vec![30, 950, 10, 10],
        vec![5, 20, 960, 15],
        vec![10, 5, 25, 960],
    ]);
    let report = EvalReport::build(&m, &labels, Averaging::Macro, 3).unwrap();
    let top = &report.confusability[0];
    assert_eq!((top.actual.as_str(), top.predicted.as_str()), ("C", "C++"));
    assert!((top.rate - 0.080).abs() <= 0.001);
    assert!(report.to_table().contains("C -> C++: 80 (0.080)"));
}

#[test]
fn confusability_tie_order() {
    // equal rates 1/4: larger count first, then label order
    let m = ConfusionMatrix::from_counts(vec![vec![2, 1, 1], vec![2, 6, 0], vec![0, 1, 3]]);
    let got: Vec<(usize, usize)> = confusability(&m, 10).iter().map(|c| (c.actual, c.predicted)).collect();
    assert_eq!(got, [(1, 0), (0, 1), (0, 2), (2, 1)]);
}

#[test]
fn report_formats() {
    let labels = LabelSet::from_names(["A", "B"]);
    let m = ConfusionMatrix::from_counts(vec![vec![2, 1], vec![0, 3]]);
    let r = EvalReport::build(&m, &labels, Averaging::Macro, 5).unwrap();
    let table = r.to_table();
    let header = table.lines().next().unwrap();
    let cols: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(cols, ["Precision", "Recall", "F1", "Support"]);
    assert!(table.contains("Accuracy(%) 83.333  Precision(%) 87.500"));
    let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert!(matches!(
        EvalReport::build(&m, &LabelSet::from_names(["A"]), Averaging::Macro, 1),
        Err(EvalError::Shape { .. })
    ));
}

#[test]
fn rational_oracle_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let k = rng.gen_range(1..=19);
        let counts: Vec<Vec<u64>> = (0..k)
            .map(|_| (0..k).map(|_| if rng.gen_bool(0.2) { 0 } else { rng.gen_range(0..=10_000) }).collect())
            .collect();
        let m = ConfusionMatrix::from_counts(counts.clone());
        if m.total() == 0 {
            continue;
        }
        let o = oracle(&counts);
        let pc = per_class(&m);
        for (c, pc) in pc.iter().enumerate() {
            assert!(close(pc.precision, f(&o.p[c])));
            assert!(close(pc.recall, f(&o.r[c])));
            assert!(close(pc.f1, f(&o.f1[c])));
            assert_eq!(pc.support, o.support[c]);
        }
        let total: u64 = o.support.iter().sum();
        let mac = aggregate(&pc, &m, Averaging::Macro).unwrap();
        let wtd = aggregate(&pc, &m, Averaging::Weighted).unwrap();
        let kq = q(k as u64);
        let mean = |v: &[BigRational]| v.iter().fold(BigRational::zero(), |a, x| a + x) / &kq;
        let wmean = |v: &[BigRational]| {
            v.iter().zip(&o.support).fold(BigRational::zero(), |a, (x, &s)| a + x * q(s)) / q(total)
        };
        assert!(close(mac.accuracy, f(&o.accuracy)));
        assert!(close(mac.precision, f(&mean(&o.p))));
        assert!(close(mac.recall, f(&mean(&o.r))));
        assert!(close(mac.f1, f(&mean(&o.f1))));
        assert!(close(wtd.precision, f(&wmean(&o.p))));
        assert!(close(wtd.recall, f(&wmean(&o.r))));
        assert!(close(wtd.f1, f(&wmean(&o.f1))));
    }
}

fn pairs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..6).prop_flat_map(|k| (Just(k), prop::collection::vec((0..k, 0..k), 1..80)))
}

proptest! {
    #[test]
    fn metric_bounds_and_permutation((k, ps) in pairs(), seed in any::<u64>()) {
        let (preds, golds): (Vec<usize>, Vec<usize>) = ps.iter().copied().unzip();
        let m = confusion(&preds, &golds, k).unwrap();
        for c in 0..k {
            prop_assert_eq!(m.row_sum(c), golds.iter().filter(|&&g| g == c).count() as u64);
        }
        let pc = per_class(&m);
        for c in &pc {
            for x in [c.precision, c.recall, c.f1] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            if c.precision > 0.0 && c.recall > 0.0 {
                prop_assert!(c.f1 <= c.precision.max(c.recall) + 1e-15);
                prop_assert!(c.f1 >= c.precision.min(c.recall) - 1e-15);
                let hm = 2.0 * c.precision * c.recall / (c.precision + c.recall);
                prop_assert!((c.f1 - hm).abs() < 1e-12);
            }
        }
        let mut shuffled = ps.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (p2, g2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        let m2 = confusion(&p2, &g2, k).unwrap();
        prop_assert_eq!(&m2, &m);
        prop_assert_eq!(per_class(&m2), pc);
    }

    #[test]
    fn balanced_accuracy_is_mean_recall(k in 1usize..6, per in 1usize..10, preds in prop::collection::vec(0usize..6, 50)) {
        let golds: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, per)).collect();
        let preds: Vec<usize> = golds.iter().zip(&preds).map(|(_, &p)| p % k).collect();
        let m = confusion(&preds, &golds, k).unwrap();
        let agg = aggregate(&per_class(&m), &m, Averaging::Macro).unwrap();
        prop_assert!((agg.accuracy - agg.recall).abs() < 1e-12);
    }
}

struct Fixed<F: Fn(&str) -> Result<usize, PredictError>> {
    labels: LabelSet,
    f: F,
}

impl<F: Fn(&str) -> Result<usize, PredictError>> Predictor for Fixed<F> {
    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict_text(&self, text: &str) -> Result<usize, PredictError> {
        (self.f)(text)
    }
}

fn two_class_test() -> Corpus {
    Corpus::new(
        (0..10)
            .map(|i| Snippet::new(format!("s{i}"), if i % 2 == 0 { "Go" } else { "Rust" }))
            .collect(),
    )
}

#[test]
fn evaluate_with_oracle_and_constant_models() {
    let test = two_class_test();
    let labels = LabelSet::from_names(["Go", "Rust"]);
    let gold = Fixed {
        labels: labels.clone(),
        f: |t: &str| Ok(t[1..].parse::<usize>().unwrap() % 2),
    };
    let r = evaluate_model(&gold, &test, Averaging::Macro, 5).unwrap();
    assert_eq!(r.accuracy, 1.0);
    let hist = class_histogram(&test);
    for row in &r.per_class {
        assert_eq!(row.metrics.support as usize, hist[&row.label]);
    }

    let constant = Fixed {
        labels,
        f: |_: &str| Ok(0),
    };
    let r = evaluate_model(&constant, &test, Averaging::Macro, 5).unwrap();
    assert_eq!(r.accuracy, 0.5);
    assert!((r.f1 - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.per_class[0].metrics.f1, 2.0 / 3.0);
}

#[test]
fn evaluate_reports_failures_by_index() {
    let test = two_class_test();
    let failing = Fixed {
        labels: LabelSet::from_names(["Go", "Rust"]),
        f: |t: &str| if t == "s7" { Err("boom".into()) } else { Ok(0) },
    };
    match evaluate_model(&failing, &test, Averaging::Macro, 5) {
        Err(EvalError::Prediction { index, .. }) => assert_eq!(index, 7),
        other => panic!("unexpected {other:?}"),
    }
    let narrow = Fixed {
        labels: LabelSet::from_names(["Go"]),
        f: |_: &str| Ok(0),
    };
    assert!(matches!(
        evaluate_model(&narrow, &test, Averaging::Macro, 5),
        Err(EvalError::UnknownLabel { index: 1, .. })
    ));
}

#[test]
fn naive_bayes_is_a_predictor() {
    let train = Corpus::new(vec![
        Snippet::new("fn main ( )", "Rust"),
        Snippet::new("let mut x", "Rust"),
        Snippet::new("func main ( )", "Go"),
        Snippet::new("x := 1", "Go"),
    ]);
    let nb = codelang_core::baseline::fit_nb(&train, 1.0).unwrap();
    let r = evaluate_model(&nb, &train, Averaging::Macro, 5).unwrap();
    assert_eq!(r.accuracy, 1.0);
}
