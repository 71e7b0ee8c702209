//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 unless `ACCEPTANCE_STRICT=1` is set and a criterion failed.
//! `ACCEPTANCE_ONLY=1,7,9` restricts the run to the listed criteria.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use attrv2l::attrnet::{
    cluster_and_select, logistic_loss, ncut_value, predict_attributes, propose, spectral_partition, PredictorConfig,
    PredictorParams,
};
use attrv2l::decode::{beam_search, greedy};
use attrv2l::expand::{
    build_similarity, expand_vector, select_candidates, EmbeddingTable, LexiconGraph, Relation, SimilarityMatrix,
};
use attrv2l::harness::{
    guess_cell, median, prepare_seed, run_cell, run_experiment, ExperimentConfig, SYNONYM_ACCURACY,
};
use attrv2l::metrics::{bleu, perplexity_from_nll, wup_similarity, wups, TaxonomyTree, ACCURACY, PPL, WUPS_09};
use attrv2l::microworld::{generate_scene, shipped_taxonomy, GeneratorConfig, RegionBox};
use attrv2l::rng::{rng_from, Rng};
use attrv2l::seqcore::{unroll_nll, LstmDims, LstmParams, Sequence, StepInput};
use attrv2l::tasks::{InputMode, TaskKind};
use attrv2l::vocab::START;
use common::{brute_force_ncut, exhaustive_best, gradient_error, random_model, random_tokens, two_blob_boxes};
use rand::seq::index::sample;
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tiny_dims(vocab_out: usize) -> LstmDims {
    LstmDims {
        input: 3,
        embedding: 4,
        hidden: 4,
        vocab_in: 8,
        vocab_out,
    }
}

fn unit_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn c1_gradients() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from(1001);
    let mut worst = [0.0f64; 3];
    for seed in 0..100u64 {
        let lambda = if seed % 2 == 0 { 1e-3 } else { 0.0 };
        let p = random_model(tiny_dims(8), seed, 0.8);
        let vs: Vec<Vec<f64>> = (0..2).map(|_| unit_vec(&mut rng, 3)).collect();
        let ss: Vec<Vec<usize>> = (0..2)
            .map(|_| {
                let len = rng.random_range(1..=4);
                random_tokens(&mut rng, len, 3, 8)
            })
            .collect();
        let batch: Vec<Sequence> = vs.iter().zip(&ss).map(|(v, s)| Sequence::caption(v, s)).collect();
        worst[0] = worst[0].max(gradient_error(&p, &batch, lambda));

        let p = random_model(tiny_dims(5), 10_000 + seed, 0.8);
        let v = unit_vec(&mut rng, 3);
        let len = rng.random_range(1..=4);
        let q = random_tokens(&mut rng, len, 3, 8);
        let batch = vec![Sequence::answer_word(&v, &q, rng.random_range(0..5))];
        worst[1] = worst[1].max(gradient_error(&p, &batch, lambda));

        let p = random_model(tiny_dims(8), 20_000 + seed, 0.8);
        let v = unit_vec(&mut rng, 3);
        let (ql, al) = (rng.random_range(1..=4), rng.random_range(1..=3));
        let q = random_tokens(&mut rng, ql, 3, 8);
        let a = random_tokens(&mut rng, al, 3, 8);
        let batch = vec![Sequence::question_answer(&v, &q, &a)];
        worst[2] = worst[2].max(gradient_error(&p, &batch, lambda));
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        worst.iter().all(|&w| w < 1e-5) && secs < 60.0,
        format!(
            "300 models, worst rel err caption {:.2e}, single-word {:.2e}, encoder-decoder {:.2e}; {secs:.1}s",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn c2_logistic_loss() -> Outcome {
    let mut rng = rng_from(1002);
    let mut worst_grad: f64 = 0.0;
    let mut worst_loss: f64 = 0.0;
    for _ in 0..200 {
        let (n, c) = (rng.random_range(1..=5), rng.random_range(1..=6));
        let s: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..c).map(|_| rng.random_range(-6.0..6.0)).collect())
            .collect();
        let y: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..c).map(|_| f64::from(rng.random_bool(0.5))).collect())
            .collect();
        let (loss, grad) = logistic_loss(&s, &y).unwrap();
        // independent loss: -ln sigma(+-s) summed and averaged over rows
        let oracle: f64 = s
            .iter()
            .zip(&y)
            .flat_map(|(sr, yr)| sr.iter().zip(yr))
            .map(|(&si, &yi)| {
                let p = 1.0 / (1.0 + (-si).exp());
                -(if yi == 1.0 { p } else { 1.0 - p }).ln()
            })
            .sum::<f64>()
            / n as f64;
        worst_loss = worst_loss.max((loss - oracle).abs() / oracle.abs().max(1e-12));
        let eps = 1e-5;
        for i in 0..n {
            for j in 0..c {
                let at = |d: f64| {
                    let mut sp = s.clone();
                    sp[i][j] += d;
                    logistic_loss(&sp, &y).unwrap().0
                };
                let fd = (at(-2.0 * eps) - 8.0 * at(-eps) + 8.0 * at(eps) - at(2.0 * eps)) / (12.0 * eps);
                let denom = (grad[i][j].abs() + fd.abs()).max(1e-8);
                worst_grad = worst_grad.max((grad[i][j] - fd).abs() / denom);
            }
        }
    }
    Outcome::new(
        worst_grad < 1e-6 && worst_loss < 1e-12,
        format!("200 instances, worst gradient rel err {worst_grad:.2e}, loss vs oracle {worst_loss:.2e}"),
    )
}

fn c3_beam() -> Outcome {
    let dims = LstmDims {
        input: 3,
        embedding: 4,
        hidden: 4,
        vocab_in: 5,
        vocab_out: 5,
    };
    let prefix = [StepInput::Vector, StepInput::Token(START)];
    let mut rng = rng_from(1003);
    let mut exact = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let p = random_model(dims, 30_000 + seed, 1.5);
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (best, score) = exhaustive_best(&p, &v, &prefix, 3);
        let top = beam_search(&p, &v, &prefix, 125, 3, &[]).unwrap().remove(0);
        worst = worst.max((top.log_prob - score).abs());
        exact += usize::from(top.tokens == best && (top.log_prob - score).abs() < 1e-12);
    }
    let mut greedy_eq = 0;
    for seed in 0..200 {
        let p = random_model(dims, 40_000 + seed, 1.5);
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = beam_search(&p, &v, &prefix, 1, 3, &[]).unwrap();
        let g = greedy(&p, &v, &prefix, 3, &[]).unwrap();
        greedy_eq += usize::from(b[0].tokens == g.tokens && (b[0].log_prob - g.log_prob).abs() < 1e-12);
    }
    Outcome::new(
        exact == 50 && greedy_eq == 200,
        format!("b=125 matches enumeration on {exact}/50 (max score diff {worst:.1e}); b=1 matches greedy on {greedy_eq}/200"),
    )
}

/// Median metrics of the standard corpus keyed by (task, row, metric).
struct Standard {
    medians: BTreeMap<(&'static str, String, String), f64>,
    caption_secs: f64,
    total_secs: f64,
}

impl Standard {
    fn get(&self, task: TaskKind, row: &str, metric: &str) -> f64 {
        self.medians
            .get(&(task.as_str(), row.to_string(), metric.to_string()))
            .copied()
            .unwrap_or(f64::NAN)
    }
}

fn run_standard() -> attrv2l::Result<Standard> {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&configs_dir().join("standard.toml"))?;
    cfg.out_dir = out.path().to_path_buf();
    let tree = shipped_taxonomy(&cfg.corpus.generator.lexicon)?;
    let start = Instant::now();
    let mut caption_secs = 0.0;
    let mut values: BTreeMap<(&'static str, String, String), Vec<f64>> = BTreeMap::new();
    let mut push = |cell: attrv2l::harness::CellReport| {
        for (k, v) in &cell.metrics.scores {
            values
                .entry((cell.task.as_str(), cell.row.clone(), k.clone()))
                .or_default()
                .push(*v);
        }
    };
    let caption_modes = [InputMode::AttGt, InputMode::AttCnn, InputMode::RawFeature];
    for &seed in &cfg.seeds {
        let t = Instant::now();
        let data = prepare_seed(&cfg, seed)?;
        for &mode in &caption_modes {
            push(run_cell(&cfg, &data, mode, TaskKind::Caption, &tree)?);
        }
        caption_secs += t.elapsed().as_secs_f64();
        for mode in caption_modes.iter().copied().chain([InputMode::AttKb]) {
            push(run_cell(&cfg, &data, mode, TaskKind::QaSingle, &tree)?);
        }
        push(guess_cell(&cfg, &data, &tree)?);
        eprintln!(
            "  standard corpus: seed {seed} done after {:.0}s",
            start.elapsed().as_secs_f64()
        );
    }
    let medians = values.into_iter().map(|(k, v)| (k, median(&v).unwrap())).collect();
    Ok(Standard {
        medians,
        caption_secs,
        total_secs: start.elapsed().as_secs_f64(),
    })
}

fn ordered(xs: &[f64], gaps: &[f64]) -> bool {
    xs.windows(2).zip(gaps).all(|(w, g)| w[0] >= w[1] + g)
}

fn c4_caption_order(s: &Standard) -> Outcome {
    let rows = ["ATT_GT", "ATT_CNN", "RAW_FEATURE"];
    let b1: Vec<f64> = rows.iter().map(|r| s.get(TaskKind::Caption, r, "BLEU-1")).collect();
    let ppl: Vec<f64> = rows.iter().map(|r| -s.get(TaskKind::Caption, r, PPL)).collect();
    let pass = ordered(&b1, &[0.02, 0.02]) && ordered(&ppl, &[0.02, 0.02]) && s.caption_secs < 600.0;
    Outcome::new(
        pass,
        format!(
            "BLEU-1 GT {:.3} CNN {:.3} RAW {:.3}; PPL GT {:.3} CNN {:.3} RAW {:.3}; captioning {:.0}s",
            b1[0], b1[1], b1[2], -ppl[0], -ppl[1], -ppl[2], s.caption_secs
        ),
    )
}

fn c5_qa_order(s: &Standard) -> Outcome {
    let rows = ["ATT_GT", "ATT_CNN", "RAW_FEATURE", "GUESS"];
    let gaps = [0.02, 0.02, 0.10];
    let acc: Vec<f64> = rows.iter().map(|r| s.get(TaskKind::QaSingle, r, ACCURACY)).collect();
    let w09: Vec<f64> = rows.iter().map(|r| s.get(TaskKind::QaSingle, r, WUPS_09)).collect();
    let fmt = |v: &[f64]| format!("GT {:.3} CNN {:.3} RAW {:.3} GUESS {:.3}", v[0], v[1], v[2], v[3]);
    Outcome::new(
        ordered(&acc, &gaps) && ordered(&w09, &gaps),
        format!("accuracy {}; WUPS@0.9 {}", fmt(&acc), fmt(&w09)),
    )
}

fn c6_expansion_gain(s: &Standard) -> Outcome {
    let kb = s.get(TaskKind::QaSingle, "ATT_KB", SYNONYM_ACCURACY);
    let cnn = s.get(TaskKind::QaSingle, "ATT_CNN", SYNONYM_ACCURACY);
    Outcome::new(
        kb >= cnn + 0.02,
        format!("synonym-split accuracy KB {kb:.3} vs CNN {cnn:.3} (need +0.02)"),
    )
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn c7_metrics() -> Outcome {
    type Fixture<'a> = (&'a [&'a str], &'a [&'a [&'a str]], usize, f64);
    let cases: [Fixture; 6] = [
        (&["the cat sat"], &[&["the cat sat on the mat"]], 1, (-1.0f64).exp()),
        (&["a b c"], &[&["a b c"]], 3, 1.0),
        (&["b", "a b"], &[&["a"], &["a b"]], 2, (2.0f64 / 3.0).sqrt()),
        (&["d b d"], &[&["d b", "b d"]], 2, (2.0f64 / 3.0).sqrt()),
        (&["a b c d e"], &[&["a b c d f"]], 4, 0.2f64.powf(0.25)),
        (&["x y"], &[&["a b"]], 1, 0.0),
    ];
    let mut worst_bleu: f64 = 0.0;
    for (cands, refs, n, want) in cases {
        let c: Vec<Vec<String>> = cands.iter().map(|s| toks(s)).collect();
        let r: Vec<Vec<Vec<String>>> = refs.iter().map(|rs| rs.iter().map(|s| toks(s)).collect()).collect();
        worst_bleu = worst_bleu.max((bleu(&c, &r, n, 0.0).unwrap() - want).abs());
    }

    let tree = TaxonomyTree::parse(
        "root entity\nanimal entity\ncolor entity\ndog animal\ncat animal\nred color\nblue color\n",
        "fixture",
    )
    .unwrap();
    let pairs = [
        ("dog", "dog", 1.0),
        ("dog", "cat", 2.0 / 3.0),
        ("dog", "red", 1.0 / 3.0),
        ("animal", "dog", 0.8),
        ("entity", "blue", 2.0 / 4.0),
    ];
    let mut worst_wup: f64 = 0.0;
    for (a, b, want) in pairs {
        worst_wup = worst_wup.max((wup_similarity(&tree, a, b).unwrap() - want).abs());
    }
    let pred = ["dog", "cat", "red", "animal"];
    let gold = ["dog"; 4];
    for (th, want) in [(0.0, 0.7), (0.9, (1.0 + 0.2 / 3.0 + 0.1 / 3.0 + 0.08) / 4.0)] {
        worst_wup = worst_wup.max((wups(&pred, &gold, &tree, th).unwrap() - want).abs());
    }

    let mut ppl_ok = true;
    let mut rng = rng_from(1007);
    for v in [4usize, 5, 8, 50] {
        let p = LstmParams::zeros(LstmDims {
            input: 3,
            embedding: 4,
            hidden: 4,
            vocab_in: v,
            vocab_out: v,
        });
        let vec = unit_vec(&mut rng, 3);
        let sent = random_tokens(&mut rng, 5, 3, v);
        let nll = unroll_nll(&p, &Sequence::caption(&vec, &sent)).unwrap();
        let ppl = perplexity_from_nll(nll, sent.len() + 1).unwrap();
        ppl_ok &= (ppl - v as f64).abs() <= 1e-12 * v as f64;
    }
    Outcome::new(
        worst_bleu < 1e-9 && worst_wup < 1e-12 && ppl_ok,
        format!(
            "6 BLEU fixtures max err {worst_bleu:.1e}; WUP/WUPS max err {worst_wup:.1e}; uniform PPL = |V|: {ppl_ok}"
        ),
    )
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn c8_expansion() -> Outcome {
    let mut rng = rng_from(1008);
    let mut identity_ok = true;
    let mut violations = BTreeMap::from([("coverage", 0usize), ("self", 0), ("monotone", 0), ("bounds", 0)]);
    for _ in 0..10_000 {
        let m = rng.random_range(1..=8);
        let att_words = words("a", m);
        let att: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();

        let mut eye = vec![0.0; m * m];
        (0..m).for_each(|i| eye[i * m + i] = 1.0);
        let s = SimilarityMatrix::from_values(att_words.clone(), att_words.clone(), eye).unwrap();
        let out = expand_vector(&att, &s).unwrap();
        identity_ok &= out.iter().zip(&att).all(|(a, b)| a.to_bits() == b.to_bits());

        let extra = words("k", rng.random_range(0..8));
        let mut graph = LexiconGraph::new();
        for w in &extra {
            if rng.random_bool(0.7) {
                let a = &att_words[rng.random_range(0..m)];
                graph.add_edge(a, w, Relation::Synonym).unwrap();
            }
        }
        let questions: Vec<Vec<String>> = (0..10)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        extra
                            .get(rng.random_range(0..extra.len().max(1)))
                            .cloned()
                            .unwrap_or_default()
                    })
                    .collect()
            })
            .collect();
        let kb = select_candidates(&graph, &att_words, &questions, rng.random_range(0..4));
        if kb[..m] != att_words[..] {
            *violations.get_mut("coverage").unwrap() += 1;
        }
        let dim = 4;
        let mut emb = EmbeddingTable::new(dim);
        for w in att_words.iter().chain(&extra) {
            emb.insert(w, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
        }
        let s = build_similarity(&att_words, &kb, &emb, true).unwrap();
        let v = expand_vector(&att, &s).unwrap();
        if (0..m).any(|i| v[i] < att[i]) {
            *violations.get_mut("self").unwrap() += 1;
        }
        let max_att = att.iter().cloned().fold(0.0, f64::max);
        if v.iter().any(|&x| !(0.0..=max_att).contains(&x)) {
            *violations.get_mut("bounds").unwrap() += 1;
        }
        let bigger: Vec<f64> = att.iter().map(|&a| (a + rng.random::<f64>() * 0.5).min(1.0)).collect();
        let w = expand_vector(&bigger, &s).unwrap();
        if v.iter().zip(&w).any(|(a, b)| a > b) {
            *violations.get_mut("monotone").unwrap() += 1;
        }
    }
    let total: usize = violations.values().sum();
    Outcome::new(
        identity_ok && total == 0,
        format!("identity bit-exact: {identity_ok}; 10000 trials, violations {violations:?}"),
    )
}

fn c9_determinism() -> Outcome {
    let run = |dir: &Path| -> attrv2l::Result<BTreeMap<PathBuf, Vec<u8>>> {
        let mut cfg = ExperimentConfig::load(&configs_dir().join("smoke.toml"))?;
        cfg.out_dir = dir.to_path_buf();
        run_experiment(&cfg)?;
        let mut files = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let name = p.file_name().unwrap().to_string_lossy().to_string();
                    if name.ends_with(".ckpt") || name.starts_with("report") || name.ends_with(".report.json") {
                        files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
                    }
                }
            }
        }
        Ok(files)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (run(a.path()), run(b.path())) {
        (Ok(x), Ok(y)) => {
            let ckpts = x.keys().filter(|p| p.extension().is_some_and(|e| e == "ckpt")).count();
            let differing: Vec<String> = x
                .iter()
                .filter(|(k, v)| y.get(*k) != Some(*v))
                .map(|(k, _)| k.display().to_string())
                .collect();
            Outcome::new(
                differing.is_empty() && x.len() == y.len() && ckpts > 0,
                format!(
                    "{} files compared ({ckpts} checkpoints), differing: {differing:?}",
                    x.len()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => Outcome::new(false, format!("smoke run failed: {e}")),
    }
}

fn c10_pool_and_cut() -> Outcome {
    let gen = GeneratorConfig::default();
    let layout = gen.feature_layout();
    let params = PredictorParams::new(layout.dim(), 16, 12, 4);
    let cfg = PredictorConfig::default();
    let mut rng = rng_from(1010);
    let scenes: Vec<_> = (0..25u64)
        .map(|seed| {
            let s = generate_scene(seed, &gen).unwrap();
            let props = propose(&s, &cfg.proposer, seed).unwrap();
            let hyps = cluster_and_select(&props, cfg.clusters, cfg.per_cluster, s.canvas).unwrap();
            (s, hyps)
        })
        .collect();
    let mut pool_fail = 0;
    for trial in 0..1000 {
        let (s, hyps) = &scenes[trial % scenes.len()];
        let n = hyps.len();
        let small = rng.random_range(1..n);
        let big = rng.random_range(small..=n);
        let mut outer: Vec<usize> = sample(&mut rng, n, big).into_vec();
        outer.sort_unstable();
        let inner = outer[..small].to_vec();
        let a = predict_attributes(s, &params, &hyps.subset(&inner), &layout, gen.noise, trial as u64).unwrap();
        let b = predict_attributes(s, &params, &hyps.subset(&outer), &layout, gen.noise, trial as u64).unwrap();
        pool_fail += usize::from(a.iter().zip(&b).any(|(x, y)| x > y));
    }
    let mut cut_ok = 0;
    let trials = 1000;
    for trial in 0..trials {
        let n = rng.random_range(2..=10);
        let boxes: Vec<RegionBox> = if trial % 2 == 0 {
            two_blob_boxes(&mut rng, n)
        } else {
            (0..n)
                .map(|_| {
                    let (x, y) = (rng.random_range(0.0..80.0), rng.random_range(0.0..80.0));
                    let (w, h) = (rng.random_range(5.0..20.0), rng.random_range(5.0..20.0));
                    RegionBox::new(x, y, x + w, y + h).unwrap()
                })
                .collect()
        };
        let labels = spectral_partition(&boxes, 2, trial as u64).unwrap();
        cut_ok += usize::from((ncut_value(&boxes, &labels) - brute_force_ncut(&boxes)).abs() < 1e-9);
    }
    Outcome::new(
        pool_fail == 0 && cut_ok == trials,
        format!(
            "max-pool violations {pool_fail}/1000; Ncut equals brute force on {cut_ok}/{trials} instances (2-10 boxes)"
        ),
    )
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));

    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if wanted(n) {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            println!(
                "[{}] {n:>2} {name}: {} ({secs:.1}s)",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
            results.push((n, name, o, secs));
        }
    };
    record(1, "recurrent gradients", &c1_gradients);
    record(2, "logistic loss gradient", &c2_logistic_loss);
    record(3, "beam search oracle", &c3_beam);
    if [4, 5, 6].into_iter().any(wanted) {
        let t = Instant::now();
        match run_standard() {
            Ok(s) => {
                eprintln!("  standard corpus: {:.0}s in total", s.total_secs);
                record(4, "caption ordering", &|| c4_caption_order(&s));
                record(5, "single-word QA ordering", &|| c5_qa_order(&s));
                record(6, "knowledge expansion gain", &|| c6_expansion_gain(&s));
            }
            Err(e) => {
                let secs = t.elapsed().as_secs_f64();
                for (n, name) in [
                    (4, "caption ordering"),
                    (5, "single-word QA ordering"),
                    (6, "knowledge expansion gain"),
                ] {
                    record(n, name, &|| {
                        Outcome::new(false, format!("standard corpus failed after {secs:.0}s: {e}"))
                    });
                }
            }
        }
    }
    record(7, "metric oracles", &c7_metrics);
    record(8, "expansion algebra", &c8_expansion);
    record(9, "determinism", &c9_determinism);
    record(10, "max-pool and normalized cut", &c10_pool_and_cut);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        if strict {
            std::process::exit(1);
        }
    }
}
