use super::*;
use crate::classify::{one_vs_all_train, Algorithm, AlgorithmSpace, FeatureView, OvaConfig, ParamDist, SearchMode};

struct Fixture {
    sources: Vec<SourceData>,
    yt: Vec<Motivator>,
    yv: Vec<Motivator>,
}

/// M1 positives come in two halves: half A lights up the CT feature, half
/// B the CS feature. WSR carries either pure noise or a copy of CT.
fn fixture(seed: u64, wsr_copies_ct: bool) -> Fixture {
    let mut rng = SplitMix64::new(seed);
    let mut make = |n: usize| {
        let (mut ct, mut cs, mut ws, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            let kind = i % 8; // 0: A, 1: B, rest negative
            let a = if kind == 0 { 3.0 } else { 0.0 };
            let b = if kind == 1 { 3.0 } else { 0.0 };
            let c = vec![a + rng.normal()];
            ws.push(if wsr_copies_ct { c.clone() } else { vec![rng.normal()] });
            ct.push(c);
            cs.push(vec![b + rng.normal()]);
            y.push(if kind <= 1 { Motivator::M1 } else { Motivator::M2 });
        }
        (Matrix::from_rows(&ct).unwrap(), Matrix::from_rows(&ws).unwrap(), Matrix::from_rows(&cs).unwrap(), y)
    };
    let (ct_t, ws_t, cs_t, yt) = make(800);
    let (ct_v, ws_v, cs_v, yv) = make(400);
    let src = |s: Source, id: &str, t: Matrix<f64>, v: Matrix<f64>| SourceData {
        source: s,
        views: vec![FeatureView { id: id.into(), train: t, val: v, reduced: true }],
        train_available: vec![true; 800],
        val_available: vec![true; 400],
    };
    Fixture {
        sources: vec![src(Source::Ct, "ct", ct_t, ct_v), src(Source::Wsr, "wsr", ws_t, ws_v), src(Source::Cs, "cs", cs_t, cs_v)],
        yt,
        yv,
    }
}

fn ova_config() -> OvaConfig {
    OvaConfig {
        spaces: vec![AlgorithmSpace {
            algorithm: Algorithm::Logreg,
            mode: SearchMode::Grid,
            params: [("lambda".to_string(), ParamDist::Choice { values: vec![1e-2] })].into(),
        }],
        policy: SelectionPolicy { r_min: 0.6 },
        balanced: true,
        seed: 1,
    }
}

fn train(f: &Fixture, r_min: f64) -> Vec<EnsembleTraining> {
    let mut cfg = ova_config();
    cfg.policy.r_min = r_min;
    let ova = one_vs_all_train(&f.sources, &f.yt, &f.yv, &[Motivator::M1], &cfg).unwrap();
    train_ensembles(&ova, &f.sources, &f.yt, &f.yv, &cfg.policy, &EnsembleConfig::default()).unwrap()
}

#[test]
fn complementary_sources_beat_singles() {
    let f = fixture(1, false);
    let out = train(&f, 0.6);
    assert_eq!(out.len(), 1);
    let t = &out[0];
    let em = t.candidate("EM").unwrap();
    let best_single = ["CT", "WSR", "CS"].iter().map(|n| t.candidate(n).unwrap().precision).fold(0.0, f64::max);
    assert!(em.precision >= best_single + 0.1, "EM {} vs {}", em.precision, best_single);
    assert!(t.model.is_ensemble() && t.model.fallback.is_none());
    // noise source gets the smallest weight
    let w = &t.model.stacker.as_ref().unwrap().weights;
    assert!(w[1].abs() < w[0].abs() && w[1].abs() < w[2].abs(), "{w:?}");
}

#[test]
fn out_of_fold_discipline() {
    let f = fixture(2, false);
    let t = &train(&f, 0.6)[0];
    assert_eq!(t.oof.fitted_on.len(), 3);
    assert!(t.oof.is_leak_free());
    // every fold is used and sizes balance
    for k in 0..5 {
        assert_eq!(t.oof.fold_of.iter().filter(|&&f| f == k).count(), 160);
    }
    let mut broken = t.oof.clone();
    broken.fitted_on[0][0].push(broken.fold_of.iter().position(|&f| f == 0).unwrap());
    assert!(!broken.is_leak_free());
}

#[test]
fn duplicated_sources_add_nothing() {
    let f = fixture(3, true);
    let mut f = f;
    // make CS a copy of CT too
    f.sources[2].views[0].train = f.sources[0].views[0].train.clone();
    f.sources[2].views[0].val = f.sources[0].views[0].val.clone();
    let t = &train(&f, 0.3)[0];
    let em = t.candidate("EM").unwrap();
    let ct = t.candidate("CT").unwrap();
    assert!((em.precision - ct.precision).abs() < 1e-9);
    assert!(t.model.is_ensemble(), "ties go to the ensemble");
}

#[test]
fn selection_reproduces_from_persisted_predictions() {
    let f = fixture(4, false);
    let policy = SelectionPolicy { r_min: 0.6 };
    let t = &train(&f, policy.r_min)[0];
    let yv: Vec<bool> = f.yv.iter().map(|m| *m == Motivator::M1).collect();
    let recomputed: Vec<Candidate> = t
        .candidates
        .iter()
        .zip(&t.val_proba)
        .map(|(c, p)| {
            let ch = choose_threshold(p, &yv, policy.r_min).unwrap();
            Candidate { name: c.name.clone(), threshold: ch.threshold, precision: ch.precision, recall: ch.recall }
        })
        .collect();
    assert_eq!(recomputed, t.candidates);
    let w = &recomputed[select_candidate(&recomputed, &policy)];
    assert_eq!(w.precision, t.model.val_precision);
    assert!(t.val_proba.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn single_usable_source_forces_fallback() {
    let f = fixture(5, false);
    let cfg = ova_config();
    let ova = one_vs_all_train(&f.sources[..1], &f.yt, &f.yv, &[Motivator::M1], &cfg).unwrap();
    let out = train_ensembles(&ova, &f.sources, &f.yt, &f.yv, &cfg.policy, &EnsembleConfig::default()).unwrap();
    assert_eq!(out[0].usable_sources, 1);
    assert_eq!(out[0].model.fallback, Some(Source::Ct));
    assert!(out[0].model.stacker.is_none());
}

fn constant_model(m: Motivator, p_logit: f64, threshold: f64) -> EnsembleModel {
    let clf = BinaryClassifier::new(
        crate::classify::ModelKind::Logreg(LinearModel { weights: vec![0.0], bias: p_logit, calibration: None }),
        threshold,
        "v",
        1,
    );
    EnsembleModel {
        motivator: m,
        sources: Source::ALL.to_vec(),
        source_models: vec![Some(clf.clone()), Some(clf.clone()), Some(clf)],
        base_rates: vec![0.1, 0.2, 0.3],
        stacker: None,
        fallback: Some(Source::Ct),
        threshold,
        val_precision: 0.0,
        val_recall: 0.0,
    }
}

fn bundle(n: usize, cs_available: bool) -> FeatureBundle {
    FeatureBundle {
        n,
        views: [("v".to_string(), Matrix::zeros(n, 1))].into(),
        available: [vec![true; n], vec![true; n], vec![cs_available; n]],
    }
}

#[test]
fn stack_features_imputation() {
    let m = constant_model(Motivator::M1, 1000.0, 0.5);
    let z = m.stack_features(&bundle(2, true)).unwrap();
    assert_eq!(z.data, vec![1.0; 6]);
    let z = m.stack_features(&bundle(2, false)).unwrap();
    assert_eq!(z.row(0), &[1.0, 1.0, 0.3]);
    let mut missing = m.clone();
    missing.source_models[1] = None;
    assert_eq!(missing.stack_features(&bundle(1, true)).unwrap().row(0), &[1.0, 0.2, 1.0]);
}

#[test]
fn predictions_follow_thresholds() {
    let models: Vec<EnsembleModel> = Motivator::ALL[..11].iter().map(|&m| constant_model(m, -1000.0, 0.5)).collect();
    let out = predict_motivators(&models, &bundle(3, true)).unwrap();
    for p in &out {
        assert!(p.low_confidence);
        assert_eq!(p.decisions[..11], vec![Some(false); 11][..]);
        assert_eq!(p.probabilities[11], None);
        assert_eq!(p.decisions[11], None);
    }
    let mut models = models;
    models[3] = constant_model(Motivator::M4, 0.0, 0.5);
    let out = predict_motivators(&models, &bundle(1, true)).unwrap();
    assert_eq!(out[0].top, Some(Motivator::M4));
    assert_eq!(out[0].decisions[3], Some(true));
    assert!(!out[0].low_confidence);
}

#[test]
fn registry_roundtrip_and_tamper_detection() {
    let dir = tempfile::tempdir().unwrap();
    let models = vec![constant_model(Motivator::M1, 0.3, 0.4), constant_model(Motivator::Other, -0.3, 0.6)];
    let index = write_registry(dir.path(), &models).unwrap();
    assert_eq!(index[1].file, "Other.json");
    assert_eq!(index[0].winner, "fallback:CT");
    assert_eq!(read_registry(dir.path()).unwrap(), models);
    std::fs::write(dir.path().join("M1.json"), "{}").unwrap();
    assert!(read_registry(dir.path()).is_err());
}

#[test]
fn ensemble_and_fallback_are_exclusive() {
    let mut m = constant_model(Motivator::M1, 0.0, 0.5);
    m.stacker = Some(LinearModel { weights: vec![0.0; 3], bias: 0.0, calibration: None });
    assert!(m.predict_proba(&bundle(1, true)).is_err());
}
