use callmine::classify::{Algorithm, AlgorithmSpace};
use callmine::corpus::{
    filter_for_summarizer, generate_synthetic_corpus, load_calls, load_clicks, split_train_validation, write_jsonl, Motivator, SplitSpec,
    SynthConfig,
};
use callmine::features::{build_seq_vocab, encode_sequence, SequenceRole};
use callmine::normalize::{Normalizer, Resources};
use callmine::pipeline::{default_spaces, run_motivator_pipeline, MotivatorConfig};
use callmine::summarizer::{load_checkpoint, save_checkpoint, sidecar_path, train, ModelDims, SeqPair, TrainConfig};
use callmine::Seq2SeqF32;

fn small_corpus(n_calls: usize) -> (Vec<callmine::corpus::CallRecord>, Vec<callmine::corpus::ClickEvent>) {
    generate_synthetic_corpus(&SynthConfig { n_calls, ..SynthConfig::default() }, 3).unwrap()
}

#[test]
fn corpus_roundtrips_through_jsonl() {
    let (calls, clicks) = small_corpus(120);
    let dir = tempfile::tempdir().unwrap();
    let (cp, kp) = (dir.path().join("calls.jsonl"), dir.path().join("clicks.jsonl"));
    write_jsonl(&cp, &calls).unwrap();
    write_jsonl(&kp, &clicks).unwrap();
    let loaded = load_calls(&cp).unwrap();
    assert!(loaded.diagnostics.is_empty(), "{:?}", loaded.diagnostics);
    assert_eq!(loaded.records, calls);
    assert_eq!(load_clicks(&kp).unwrap().records, clicks);

    // same seed, same split; the two halves partition the corpus
    let spec = SplitSpec::default();
    let (tr, va) = split_train_validation(&calls, &spec).unwrap();
    assert_eq!(tr.len() + va.len(), calls.len());
    assert_eq!((tr, va), split_train_validation(&calls, &spec).unwrap());
}

#[test]
fn trained_summarizer_survives_a_checkpoint() {
    let (calls, _) = small_corpus(150);
    let norm = Normalizer::new(Resources::default()).unwrap();
    let pairs = filter_for_summarizer(&calls, &norm);
    assert!(!pairs.is_empty());
    let src_texts: Vec<Vec<String>> = pairs.iter().map(|p| p.transcript.clone()).collect();
    let tgt_texts: Vec<Vec<String>> = pairs.iter().map(|p| p.repnote.clone()).collect();
    let (vs, vt) = (build_seq_vocab(&src_texts, 1).unwrap(), build_seq_vocab(&tgt_texts, 1).unwrap());
    let seqs: Vec<SeqPair> = pairs
        .iter()
        .map(|p| {
            SeqPair::new(
                encode_sequence(&vs, &p.transcript, 40, SequenceRole::Source).unwrap(),
                encode_sequence(&vt, &p.repnote, 6, SequenceRole::Target).unwrap(),
            )
        })
        .collect();
    let dims = ModelDims { embed: 8, hidden: 10, encoder_layers: 2, bidirectional: true };
    let mut model = Seq2SeqF32::init(vs.len(), vt.len(), dims, 5).unwrap();
    let cfg = TrainConfig { max_epochs: 2, batch_size: 16, ..TrainConfig::default() };
    let history = train(&mut model, &seqs, &[], &cfg).unwrap();
    assert_eq!(history.epochs.len(), 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&model, &path, "src", "tgt", serde_json::json!({ "epochs": 2 })).unwrap();
    let (back, meta) = load_checkpoint(&path).unwrap();
    assert_eq!(meta.n_params, model.n_params());
    assert_eq!(back.params, model.params);
    for p in seqs.iter().take(10) {
        assert_eq!(back.greedy_decode(&p.src, 6).unwrap(), model.greedy_decode(&p.src, 6).unwrap());
    }

    // a flipped byte is caught by the sidecar hash
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    assert!(load_checkpoint(&path).is_err());
    assert!(sidecar_path(&path).exists());
}

#[test]
fn motivator_pipeline_is_deterministic_at_small_scale() {
    let (calls, clicks) = small_corpus(500);
    let (tr, va) = split_train_validation(&calls, &SplitSpec::default()).unwrap();
    let norm = Normalizer::new(Resources::default()).unwrap();
    // logreg only keeps this quick
    let spaces = default_spaces().into_iter().filter(|s: &AlgorithmSpace| s.algorithm == Algorithm::Logreg).collect();
    let mut cfg = MotivatorConfig { spaces, ..MotivatorConfig::default() };
    cfg.ensemble.folds = 3;
    let a = run_motivator_pipeline(&tr, &va, &clicks, &norm, &cfg).unwrap();
    assert_eq!(a.ensembles.len(), Motivator::ALL.len());
    for e in &a.ensembles {
        for c in &e.candidates {
            assert!((0.0..=1.0).contains(&c.precision) && (0.0..=1.0).contains(&c.recall), "{c:?}");
        }
    }
    let b = run_motivator_pipeline(&tr, &va, &clicks, &norm, &cfg).unwrap();
    let summary = |r: &callmine::pipeline::MotivatorRun| -> Vec<(String, u64, u64)> {
        r.ensembles
            .iter()
            .flat_map(|e| e.candidates.iter().map(|c| (c.name.clone(), c.precision.to_bits(), c.recall.to_bits())))
            .collect()
    };
    assert_eq!(summary(&a), summary(&b));
}
