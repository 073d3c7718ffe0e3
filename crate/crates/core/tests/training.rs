use advframe_core::adversary::{train, TrainConfig, Trained};
use advframe_core::corpus::{extract_instances, generate_synthetic_set, label_gold_domains, Corpus, SynthConfig, SyntheticSet, TargetInstance};
use advframe_core::metrics::{delta_grid, evaluate, sweep, Level};
use advframe_core::tagger::{LabelInventory, ParserModel, TaggerConfig, Vocabularies};
use advframe_core::Error;

fn small_set(sentences: usize, seed: u64) -> (SyntheticSet, Vec<TargetInstance>) {
    let set = generate_synthetic_set(&SynthConfig { sentences_per_domain: sentences, ..Default::default() }, seed).unwrap();
    let mut inst = extract_instances(&set.corpus, &set.lexicon).unwrap();
    label_gold_domains(&set.corpus, &mut inst).unwrap();
    (set, inst)
}

fn fresh_model(set: &SyntheticSet, corpus: &Corpus, seed: u64) -> ParserModel {
    let cfg = TaggerConfig { word_dim: 32, feature_dim: 4, hidden: 16, layers: 2 };
    let mut m = ParserModel::new(cfg, Vocabularies::build(&corpus.sentences, None), LabelInventory::from_lexicon(&set.lexicon), seed).unwrap();
    m.load_word_vectors(&set.vectors, false).unwrap();
    m
}

fn fit(set: &SyntheticSet, corpus: &Corpus, inst: &[TargetInstance], cfg: &TrainConfig) -> Trained {
    train(fresh_model(set, corpus, cfg.seed), corpus, inst, &set.lexicon, cfg).unwrap()
}

#[test]
fn memorises_a_single_sentence() {
    let (set, inst) = small_set(5, 1);
    let one = Corpus { sentences: vec![set.corpus.sentences[inst[0].sentence].clone()] };
    let mut mine = extract_instances(&one, &set.lexicon).unwrap();
    mine.truncate(1);
    let cfg = TrainConfig { epochs: 80, learning_rate: 0.2, batch_size: 1, seed: 3, ..Default::default() };
    let t = fit(&set, &one, &mine, &cfg);
    let e = evaluate(&t.model, &one, &mine, &set.lexicon, 0.0).unwrap();
    for level in Level::ALL {
        assert_eq!(e.counts.level(level).f1(), 1.0, "{level:?}");
    }
}

#[test]
fn sweep_properties_on_a_trained_model() {
    let (set, inst) = small_set(30, 2);
    let cfg = TrainConfig { epochs: 8, learning_rate: 0.2, batch_size: 4, seed: 1, ..Default::default() };
    let t = fit(&set, &set.corpus, &inst, &cfg);
    let grid = delta_grid(-0.4, 0.8, 0.1).unwrap();
    let curve = sweep(&t.model, &set.corpus, &inst, &set.lexicon, &grid).unwrap();
    assert_eq!(curve.points.len(), 13);

    let arg = curve.level(Level::Argument);
    assert!(arg.windows(2).all(|w| w[1].2 <= w[0].2 + 1e-12), "recall must not grow with δ");
    let target = curve.level(Level::Target);
    let frame = curve.level(Level::Frame);
    for (t, f) in target.iter().zip(&frame) {
        assert!(t.3 >= f.3);
    }
    for level in Level::ALL {
        for (_, p, r, f) in curve.level(level) {
            assert!([p, r, f].iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
    let at0 = evaluate(&t.model, &set.corpus, &inst, &set.lexicon, 0.0).unwrap();
    assert!(curve.fmax(Level::Argument).1 >= at0.counts.argument.f1());

    let single = sweep(&t.model, &set.corpus, &inst, &set.lexicon, &[0.0]).unwrap();
    assert_eq!(single.points.len(), 1);
    assert_eq!(single.fmax(Level::Argument).1, at0.counts.argument.f1());
    assert!(matches!(sweep(&t.model, &set.corpus, &inst, &set.lexicon, &[]), Err(Error::Usage(_))));

    let last = t.log.last().unwrap().train_f1.unwrap();
    assert!(at0.counts.argument.f1() >= last - 1e-9);
}

#[test]
fn near_total_offset_empties_arguments() {
    let (set, inst) = small_set(10, 4);
    let cfg = TrainConfig { epochs: 2, seed: 5, ..Default::default() };
    let t = fit(&set, &set.corpus, &inst, &cfg);
    let e = evaluate(&t.model, &set.corpus, &inst, &set.lexicon, 0.999).unwrap();
    assert_eq!(e.counts.argument.recall(), 0.0);
}

#[test]
fn adversarial_training_is_deterministic() {
    let (set, inst) = small_set(15, 6);
    let cfg = TrainConfig { epochs: 3, batch_size: 4, seed: 9, adversarial: true, k: 2, ..Default::default() };
    let a = fit(&set, &set.corpus, &inst, &cfg);
    let b = fit(&set, &set.corpus, &inst, &cfg);
    assert_eq!(a.model, b.model);
    assert_eq!(a.head, b.head);
    assert_eq!(a.log, b.log);
    assert!(a.log.iter().all(|e| e.loss_adv.is_some()));
    assert_eq!(a.log[0].lambda, 0.0);
}
