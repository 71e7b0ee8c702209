use std::collections::BTreeMap;

use attrv2l::harness::{caption_items, prepare_seed, qa_items, ExperimentConfig, SeedData};
use attrv2l::microworld::QuestionType;
use attrv2l::seqcore::{softmax, LstmParams, StepInput, TrainConfig};
use attrv2l::tasks::{
    answer_qa_seq, answer_qa_single, decode_caption, encode_question, guess_baseline, perplexity, train_captioner,
    train_qa_seq, train_qa_single, InputMode, QaItem, TaskKind,
};
use attrv2l::tensor::Parameters;
use attrv2l::vocab::{WordDict, END, START, UNK};
use attrv2l::Error;

fn small(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.2,
        batch_size: 10,
        epochs,
        embedding_dim: 16,
        hidden_dim: 16,
        l2_lambda: 1e-5,
        dropout_rate: 0.0,
        ..TrainConfig::default()
    }
}

fn seed_data(scenes: usize, noise: f64, dir: &std::path::Path) -> SeedData {
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.scenes = scenes;
    cfg.corpus.generator.noise = noise;
    cfg.corpus.generator.appearance_noise = noise;
    cfg.modes = vec![InputMode::AttGt, InputMode::RawFeature];
    cfg.out_dir = dir.to_path_buf();
    prepare_seed(&cfg, 5).unwrap()
}

fn item(v: &[f64], q: &str, a: &str, qt: QuestionType) -> QaItem {
    QaItem {
        id: 0,
        scene_id: 0,
        vector: v.to_vec(),
        question: q.split(' ').map(String::from).collect(),
        answer: a.split(' ').map(String::from).collect(),
        question_type: qt,
        synonym: false,
    }
}

/// Answers fully determined by (vector, question): colour or shape of the
/// one-hot object.
fn separable() -> (Vec<QaItem>, WordDict) {
    let colors = ["red", "blue", "green"];
    let shapes = ["ball", "box", "cup"];
    let mut items = Vec::new();
    for rep in 0..10 {
        for k in 0..3 {
            let mut v = vec![0.0; 3];
            v[k] = 1.0 + 0.01 * rep as f64;
            items.push(item(&v, "what color is it", colors[k], QuestionType::Color));
            items.push(item(&v, "what shape is it", shapes[(k + 1) % 3], QuestionType::Object));
        }
    }
    let words = "what color shape is it red blue green ball box cup";
    let dict = WordDict::from_tokens(words.split(' ').map(String::from).collect()).unwrap();
    (items, dict)
}

#[test]
fn separable_single_word_qa_is_learned() {
    let (items, dict) = separable();
    let m = train_qa_single(&items, &[], &dict, InputMode::AttGt, &small(80), 1).unwrap();
    let right = items
        .iter()
        .filter(|it| answer_qa_single(&m, &it.vector, &it.question).unwrap().0 == it.answer[0])
        .count();
    assert!(right as f64 / items.len() as f64 >= 0.95, "{right}/{}", items.len());
}

#[test]
fn zeroed_model_answers_the_first_candidate_with_a_normalised_distribution() {
    let (items, dict) = separable();
    let mut m = train_qa_single(&items, &[], &dict, InputMode::AttGt, &small(1), 1).unwrap();
    m.params = LstmParams::zeros(m.params.dims());
    let (a, dist) = answer_qa_single(&m, &[1.0, 0.0, 0.0], &["what", "color"]).unwrap();
    assert_eq!(a, m.answers[0]);
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(dist.iter().all(|&p| (p - dist[0]).abs() < 1e-15));
}

#[test]
fn answer_distribution_is_the_final_step_softmax() {
    let (items, dict) = separable();
    let m = train_qa_single(&items, &[], &dict, InputMode::AttGt, &small(3), 1).unwrap();
    let v = [0.0, 1.0, 0.0];
    let q = ["what", "shape", "is", "it"];
    let mut steps = vec![StepInput::Vector];
    steps.extend(dict.encode(&q).into_iter().map(StepInput::Token));
    let manual = softmax(&m.params.logits(&m.params.run(&v, &steps).unwrap().h));
    assert_eq!(answer_qa_single(&m, &v, &q).unwrap().1, manual);
}

#[test]
fn single_word_qa_input_errors() {
    let (mut items, dict) = separable();
    let m = train_qa_single(&items, &[], &dict, InputMode::AttGt, &small(1), 1).unwrap();
    let empty: [&str; 0] = [];
    assert!(matches!(answer_qa_single(&m, &[0.0; 3], &empty), Err(Error::Domain(_))));
    assert!(matches!(
        answer_qa_single(&m, &[0.0; 4], &["what"]),
        Err(Error::Domain(_))
    ));
    items[0].answer.push("ball".into());
    assert!(matches!(
        train_qa_single(&items, &[], &dict, InputMode::AttGt, &small(1), 1),
        Err(Error::Domain(_))
    ));
}

#[test]
fn captioner_halves_its_cost_and_beats_uniform_perplexity() {
    let dir = tempfile::tempdir().unwrap();
    let data = seed_data(50, 0.0, dir.path());
    let s = &data.splits;
    let train = caption_items(&data, InputMode::AttGt, &s.train);
    let val = caption_items(&data, InputMode::AttGt, &s.val);
    let m = train_captioner(&train, &val, &data.dict, InputMode::AttGt, &small(30), 3).unwrap();
    let final_cost = *m.log.train_cost.last().unwrap();
    assert!(
        final_cost < 0.5 * m.log.initial_cost,
        "{} -> {final_cost}",
        m.log.initial_cost
    );
    let ppl = perplexity(&m, &val).unwrap();
    assert!(ppl < data.dict.len() as f64, "{ppl}");

    let again = train_captioner(&train, &val, &data.dict, InputMode::AttGt, &small(30), 3).unwrap();
    assert_eq!(again.params, m.params);

    let hyps = decode_caption(&m, &train[0].vector, 5, 20).unwrap();
    assert!(hyps[0].tokens.iter().all(|&t| t != START && t != UNK && t != END));
    assert!(decode_caption(&m, &[0.0; 3], 5, 20).is_err());
}

#[test]
fn models_reject_other_modes_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let data = seed_data(30, 0.1, dir.path());
    let s = &data.splits;
    let gt = caption_items(&data, InputMode::AttGt, &s.train);
    let raw = caption_items(&data, InputMode::RawFeature, &s.train);
    assert_ne!(gt[0].vector.len(), raw[0].vector.len());
    let m = train_captioner(&gt, &[], &data.dict, InputMode::AttGt, &small(1), 3).unwrap();
    assert_eq!(m.task, TaskKind::Caption);
    assert!(matches!(
        decode_caption(&m, &raw[0].vector, 2, 5),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        answer_qa_single(&m, &gt[0].vector, &["what"]),
        Err(Error::Domain(_))
    ));
}

#[test]
fn sentence_qa_shares_one_lstm_and_encodes_questions_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = seed_data(40, 0.0, dir.path());
    let s = &data.splits;
    let train = qa_items(&data, InputMode::AttGt, &s.train, false);
    let m = train_qa_seq(&train, &[], &data.dict, InputMode::AttGt, &small(8), 4).unwrap();
    let one = LstmParams::new(m.params.dims(), 0);
    assert_eq!(m.params.count(), one.count());

    let q1 = &train[0].question;
    let q2 = train.iter().map(|it| &it.question).find(|q| *q != q1).unwrap();
    let e1 = encode_question(&m, q1).unwrap();
    assert_ne!(e1, encode_question(&m, q2).unwrap());
    // the same question paired with different answers encodes identically
    let same: Vec<&QaItem> = train.iter().filter(|it| &it.question == q1).collect();
    for it in same {
        assert_eq!(encode_question(&m, &it.question).unwrap(), e1);
    }

    let out = answer_qa_seq(&m, &train[0].vector, q1, 3, 10).unwrap();
    assert!(!out.is_empty());
    assert!(out.iter().all(|w| !w.starts_with('<')));
}

#[test]
fn guess_takes_the_per_type_mode() {
    let v = [0.0];
    let train = vec![
        item(&v, "what color", "red", QuestionType::Color),
        item(&v, "what color", "red", QuestionType::Color),
        item(&v, "what color", "blue", QuestionType::Color),
        item(&v, "where", "left", QuestionType::Location),
        item(&v, "where", "right", QuestionType::Location),
    ];
    let g = guess_baseline(&train).unwrap();
    assert_eq!(g.answer(QuestionType::Color), ["red"]);
    // tie broken lexicographically
    assert_eq!(g.answer(QuestionType::Location), ["left"]);
    // unseen type falls back to the global mode
    assert_eq!(g.answer(QuestionType::Number), ["red"]);

    let colors = &train[..3];
    let g = guess_baseline(colors).unwrap();
    let right = colors
        .iter()
        .filter(|it| g.answer(it.question_type) == it.answer.as_slice())
        .count();
    assert_eq!(right, 2);
    assert!(guess_baseline(&[]).is_err());
}

#[test]
fn input_modes_parse_and_print() {
    let mut seen = BTreeMap::new();
    for m in InputMode::ALL {
        assert_eq!(InputMode::parse(m.as_str()).unwrap(), m);
        assert_eq!(InputMode::parse(&m.as_str().to_lowercase()).unwrap(), m);
        seen.insert(m.as_str(), m.needs_predictor());
    }
    assert_eq!(seen.len(), 4);
    assert!(InputMode::parse("ATT_XYZ").is_err());
}
