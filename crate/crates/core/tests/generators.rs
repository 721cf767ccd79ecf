use shiftscope::data::{Causality, Dataset, DomainPair, ScenarioKind, TriState};
use shiftscope::engine::{class_conditional_screen, derive_shift_matrix};
use shiftscope::learners::{train, Hyperparameters, LearnerKind};
use shiftscope::stats::{feature_shift_screen, ks_two_sample, label_shift_test};
use shiftscope::synth::{generate, ScenarioParams, ScenarioSpec};

const LEVEL: f64 = 0.05;
const SEEDS: u64 = 100;

fn pair_for(kind: ScenarioKind, n: usize, seed: u64) -> DomainPair {
    generate(&ScenarioSpec::new(kind, n, seed)).unwrap().pair
}

fn labels(pair: &DomainPair) -> (Vec<usize>, Vec<usize>) {
    (pair.source_labels().unwrap(), pair.target_labels().unwrap().unwrap())
}

/// Equality of `P(y | x)` across domains. Pooled rows are binned on the
/// posterior of a logistic model fit on the source, with one cut at 0.5 so
/// no bin straddles the learned boundary and the remaining cuts at pooled
/// score deciles. Within each bin the label mix is compared by chi-squared;
/// bins with a single label in both domains carry no evidence and are
/// skipped. Rejects when any bin does at `level / bins`.
fn conditional_shift(pair: &DomainPair, level: f64) -> bool {
    let model = train(
        &pair.source,
        &pair.label_space,
        LearnerKind::Logistic,
        Hyperparameters::for_kind(LearnerKind::Logistic),
        None,
        0,
    )
    .unwrap();
    let score = |ds: &Dataset| -> Vec<f64> { model.predict_posterior(ds).unwrap().column(0).to_vec() };
    let (ss, st) = (score(&pair.source), score(&pair.target));
    let (ls, lt) = labels(pair);
    let mut pooled: Vec<f64> = ss.iter().chain(&st).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..10).map(|q| pooled[q * pooled.len() / 10]).collect();
    cuts.push(0.5);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let bin = |s: f64| cuts.partition_point(|&c| c <= s);
    let nbins = cuts.len() + 1;
    let mut p_values = Vec::new();
    for b in 0..nbins {
        let pick = |scores: &[f64], labels: &[usize]| -> Vec<usize> {
            scores.iter().zip(labels).filter(|(s, _)| bin(**s) == b).map(|(_, l)| *l).collect()
        };
        let (bs, bt) = (pick(&ss, &ls), pick(&st, &lt));
        if bs.len() < 5 || bt.len() < 5 {
            continue;
        }
        if let Ok(r) = label_shift_test(&bs, &bt, pair.label_space.len()) {
            p_values.push(r.p_value);
        }
    }
    p_values.iter().any(|&p| p < level / nbins as f64)
}

fn observed(pair: &DomainPair, cell: usize) -> bool {
    match cell {
        0 => {
            let (s, t) = labels(pair);
            label_shift_test(&s, &t, pair.label_space.len()).unwrap().rejects(LEVEL)
        }
        1 => feature_shift_screen(pair, LEVEL).unwrap().shifted,
        2 => class_conditional_screen(pair, LEVEL).unwrap().shifted,
        3 => conditional_shift(pair, LEVEL),
        _ => unreachable!(),
    }
}

const CELL_NAMES: [&str; 4] = ["P(y)", "P(x)", "P(x|y)", "P(y|x)"];

fn causality_for(kind: ScenarioKind) -> Causality {
    ScenarioSpec::new(kind, 2, 0).causality
}

#[test]
fn definitional_cells_hold_on_generated_data() {
    for kind in [
        ScenarioKind::Prior,
        ScenarioKind::ClassConditional,
        ScenarioKind::Covariate,
        ScenarioKind::Concept,
    ] {
        let matrix = derive_shift_matrix(kind, causality_for(kind)).unwrap();
        let cells = matrix.cells();
        let checked: Vec<(usize, bool)> = (0..4)
            .filter(|&c| cells[c].definitional)
            .map(|c| (c, cells[c].shifted == TriState::Yes))
            .collect();
        assert!(!checked.is_empty(), "{kind:?} has no definitional cells");
        let mut agree = vec![0u32; checked.len()];
        for seed in 0..SEEDS {
            let pair = pair_for(kind, 500, seed);
            for (i, &(cell, shifted)) in checked.iter().enumerate() {
                if observed(&pair, cell) == shifted {
                    agree[i] += 1;
                }
            }
        }
        for (i, &(cell, shifted)) in checked.iter().enumerate() {
            assert!(
                agree[i] >= 90,
                "{kind:?} {} expected shifted={shifted}, matched in {}/{SEEDS} seeds",
                CELL_NAMES[cell],
                agree[i]
            );
        }
    }
}

#[test]
fn general_shift_moves_labels_and_features() {
    let (mut py, mut px) = (0, 0);
    for seed in 0..SEEDS {
        let pair = pair_for(ScenarioKind::General, 500, seed);
        py += observed(&pair, 0) as u32;
        px += observed(&pair, 1) as u32;
    }
    assert!(py >= 90 && px >= 90, "P(y) {py}/100, P(x) {px}/100");
}

#[test]
fn prior_target_share_is_close_at_large_n() {
    let pair = pair_for(ScenarioKind::Prior, 10_000, 0);
    let (_, t) = labels(&pair);
    let pos = pair.label_space.index_of("+1").unwrap();
    let share = t.iter().filter(|&&l| l == pos).count() as f64 / t.len() as f64;
    assert!((share - 0.75).abs() <= 0.01, "target positive share {share}");
}

#[test]
fn unshifted_class_conditional_is_rarely_flagged() {
    let params = ScenarioParams::ClassConditional {
        means: [1.0, -1.0],
        sigma: 1.0,
        prior: 0.5,
        shift: 0.0,
    };
    let rejections = (0..SEEDS)
        .filter(|&seed| {
            let spec = ScenarioSpec::new(ScenarioKind::ClassConditional, 500, seed).with_params(params.clone());
            let pair = generate(&spec).unwrap().pair;
            let x = pair.source.column(0).to_vec();
            let y = pair.target.column(0).to_vec();
            ks_two_sample(&x, &y).unwrap().rejects(LEVEL)
        })
        .count();
    assert!(rejections < 10, "{rejections}/100 null rejections");
}

#[test]
fn screen_flags_only_the_moved_dimension() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut draw = |shift: f64| -> Vec<Vec<f64>> { (0..500).map(|_| vec![z.sample(&mut rng), shift + z.sample(&mut rng)]).collect() };
    let (src, tgt) = (draw(0.0), draw(2.0));
    let ys = (0..500).map(|i| if i % 2 == 0 { "+1" } else { "-1" }.to_string()).collect();
    let pair = DomainPair::new(
        Dataset::from_rows("source", &src, Some(ys)).unwrap(),
        Dataset::from_rows("target", &tgt, None).unwrap(),
        shiftscope::data::LabelSpace::signed_binary(),
    )
    .unwrap();
    let screen = feature_shift_screen(&pair, LEVEL).unwrap();
    assert!(screen.per_dimension[1].p_value < screen.corrected_level);
    assert!(screen.per_dimension[0].p_value >= screen.corrected_level);
    assert!(screen.shifted);
    assert_eq!(screen.verdict, "P(x) shifted");
}

#[test]
fn null_tests_are_calibrated() {
    // Same law in both domains: rejection rates must sit in [level / 5, 2 level].
    let params = ScenarioParams::Prior {
        means: [-1.0, 1.0],
        sigma: 1.5,
        source_prior: 0.5,
        target_prior: 0.5,
    };
    let trials = 400u64;
    let (mut ks, mut chi) = (0, 0);
    for seed in 0..trials {
        let spec = ScenarioSpec::new(ScenarioKind::Prior, 300, seed).with_params(params.clone());
        let pair = generate(&spec).unwrap().pair;
        let x = pair.source.column(0).to_vec();
        let y = pair.target.column(0).to_vec();
        ks += ks_two_sample(&x, &y).unwrap().rejects(LEVEL) as u32;
        let (s, t) = labels(&pair);
        chi += label_shift_test(&s, &t, 2).unwrap().rejects(LEVEL) as u32;
    }
    for (name, r) in [("ks", ks), ("chi2", chi)] {
        let rate = r as f64 / trials as f64;
        assert!((LEVEL / 5.0..=2.0 * LEVEL).contains(&rate), "{name} null rate {rate}");
    }
}
