//! Metrics, significance, BLEU and the evaluation harness.

use std::path::PathBuf;
use std::sync::Arc;

use casa_core::backends::{LlmClient, MockLlm, MockNli, MockScript, NliClient, NliLabel, ResponseCache};
use casa_core::eval::{
    accuracy, bleu, corpus_bleu, load_climate, load_dataset, macro_f1, mean_sentence_bleu, paired_permutation_exact,
    paired_permutation_test, run_method, sweep_csv, sweep_n, tokenize, Dataset, Method,
};
use casa_core::pipeline::Casa;
use casa_core::{CasaError, Label, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use Label::{Insufficient as I, Sufficient as S};

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Confusion matrix counted cell by cell, then the textbook formulas.
#[allow(clippy::needless_range_loop)]
fn brute_force(preds: &[Label], golds: &[Label]) -> (f64, f64) {
    let classes = [S, I];
    let mut m = [[0usize; 2]; 2];
    for (p, g) in preds.iter().zip(golds) {
        let pi = classes.iter().position(|c| c == p).unwrap();
        let gi = classes.iter().position(|c| c == g).unwrap();
        m[gi][pi] += 1;
    }
    let total: usize = m.iter().flatten().sum();
    let acc = (m[0][0] + m[1][1]) as f64 / total as f64;
    let mut f1s = Vec::new();
    for k in 0..2 {
        let tp = m[k][k] as f64;
        let pred_k = (m[0][k] + m[1][k]) as f64;
        let gold_k = (m[k][0] + m[k][1]) as f64;
        let precision = if pred_k > 0.0 { tp / pred_k } else { 0.0 };
        let recall = if gold_k > 0.0 { tp / gold_k } else { 0.0 };
        f1s.push(if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 });
    }
    (acc, (f1s[0] + f1s[1]) / 2.0)
}

fn random_labels(rng: &mut ChaCha8Rng, len: usize) -> Vec<Label> {
    (0..len).map(|_| if rng.random::<bool>() { S } else { I }).collect()
}

#[test]
pub fn metrics_agree_with_brute_force_confusion_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let len = rng.random_range(1..=200);
        let preds = random_labels(&mut rng, len);
        let golds = random_labels(&mut rng, len);
        let (acc, f1) = brute_force(&preds, &golds);
        assert!((accuracy(&preds, &golds).unwrap() - acc).abs() < 1e-9);
        assert!((macro_f1(&preds, &golds).unwrap() - f1).abs() < 1e-9);
    }
}

#[test]
pub fn metrics_hand_computed_example() {
    let golds = [S, S, I, I];
    let preds = [S, I, I, I];
    assert!((accuracy(&preds, &golds).unwrap() - 0.75).abs() < 1e-6);
    assert!((macro_f1(&preds, &golds).unwrap() - 0.733_333_3).abs() < 1e-6);
    assert_eq!(accuracy(&golds, &golds).unwrap(), 1.0);
    assert_eq!(macro_f1(&golds, &golds).unwrap(), 1.0);
}

#[test]
fn metric_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let len = rng.random_range(1..60);
        let preds = random_labels(&mut rng, len);
        let golds = random_labels(&mut rng, len);
        let flip = |v: &[Label]| v.iter().map(|l| l.flip()).collect::<Vec<_>>();
        let f1 = macro_f1(&preds, &golds).unwrap();
        assert!((macro_f1(&flip(&preds), &flip(&golds)).unwrap() - f1).abs() < 1e-12);
        let mut order: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let pp: Vec<Label> = order.iter().map(|&i| preds[i]).collect();
        let pg: Vec<Label> = order.iter().map(|&i| golds[i]).collect();
        assert!((macro_f1(&pp, &pg).unwrap() - f1).abs() < 1e-12);
        assert!((accuracy(&pp, &pg).unwrap() - accuracy(&preds, &golds).unwrap()).abs() < 1e-12);
    }
    assert!(matches!(macro_f1(&[S, I], &[S]), Err(CasaError::LengthMismatch(2, 1))));
}

#[test]
pub fn permutation_total_disagreement_on_ten_items() {
    let golds = vec![S; 10];
    let a = vec![S; 10];
    let b = vec![I; 10];
    // only the two all-same swap patterns reach |statistic| = 10
    let exact = paired_permutation_exact(&a, &b, &golds).unwrap();
    assert!((exact - 2.0 / 1024.0).abs() < 1e-15);
    assert!(exact <= 0.01);
    let mc = paired_permutation_test(&a, &b, &golds, 10_000, 17).unwrap();
    assert!(mc <= 0.01, "{mc}");
    assert_eq!(mc, paired_permutation_test(&a, &b, &golds, 10_000, 17).unwrap());
}

#[test]
fn permutation_monte_carlo_tracks_exact_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let golds = random_labels(&mut rng, 30);
    let a = random_labels(&mut rng, 30);
    let b = random_labels(&mut rng, 30);
    let exact = paired_permutation_exact(&a, &b, &golds).unwrap();
    let mc = paired_permutation_test(&a, &b, &golds, 20_000, 1).unwrap();
    assert!((exact - mc).abs() < 0.02, "exact {exact} vs monte carlo {mc}");
    assert_eq!(paired_permutation_test(&a, &a, &golds, 500, 1).unwrap(), 1.0);
}

const CONTEXT: &str = "The rapid rise of sea levels caused by climate change has led to the destruction of many \
coastal cities and ecosystems, demonstrating the vulnerability of biological, geological, and planetary systems.";
const REVISED: &str = "Although our evolving dynamic planet has survived sea level changes of hundreds of metres, the \
rapid rise of sea levels caused by climate change has led to the destruction of many coastal cities and ecosystems, \
demonstrating the vulnerability of biological, geological, and planetary systems.";

#[test]
pub fn bleu_identity_and_disjoint() {
    assert!((bleu(CONTEXT, CONTEXT).unwrap() - 1.0).abs() < 1e-12);
    assert!(bleu("red green blue", "one two three four five").unwrap() < 1e-6);
    assert!(matches!(bleu("a", ""), Err(CasaError::EmptyReference)));
}

#[test]
pub fn bleu_matches_independent_implementation() {
    // Values from a separate Python implementation using the same tokenizer,
    // clipping, epsilon and brevity penalty.
    let cases = [
        (vec![REVISED], vec![CONTEXT], 0.6629235768115816),
        (vec!["the cat sat on the mat"], vec!["the cat is on the mat"], 0.0025406637407730743),
        (
            vec!["He drank too much. He cannot be trusted."],
            vec!["Despite being an alcoholic, he is trusted by many voters."],
            2.054901307230195e-08,
        ),
        (
            vec![REVISED, "the cat sat on the mat", "He drank too much. He cannot be trusted."],
            vec![CONTEXT, "the cat is on the mat", "Despite being an alcoholic, he is trusted by many voters."],
            0.5636552363962369,
        ),
    ];
    for (cands, refs, want) in cases {
        let got = corpus_bleu(&cands, &refs).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn bleu_never_rises_as_tokens_are_replaced() {
    let reference = "the quick brown fox jumps over the lazy dog near the river bank";
    let mut tokens = tokenize(reference);
    let mut last = bleu(&tokens.join(" "), reference).unwrap();
    for i in 0..tokens.len() {
        tokens[i] = format!("zz{i}");
        let score = bleu(&tokens.join(" "), reference).unwrap();
        assert!(score <= last + 1e-15, "step {i}: {score} > {last}");
        assert!(score <= 1.0);
        last = score;
    }
    let mean = mean_sentence_bleu(&[reference, "x y z"], &[reference, reference]).unwrap();
    assert!(mean > 0.5 && mean < 0.51);
}

fn synthetic() -> Dataset {
    load_dataset(&fixture_path("synthetic.jsonl"), "synthetic").unwrap()
}

fn engine(script: &MockScript, config: PipelineConfig, cache: Option<Arc<ResponseCache>>) -> (Casa, Arc<MockLlm>, Arc<MockNli>) {
    let llm = Arc::new(MockLlm::new(script).unwrap());
    let nli = Arc::new(MockNli::new(script).unwrap());
    let (mut lc, mut nc) = (LlmClient::new(llm.clone()), NliClient::new(nli.clone()));
    if let Some(c) = cache {
        lc = lc.with_cache(c.clone());
        nc = nc.with_cache(c);
    }
    (Casa::new(config, lc, nc).unwrap(), llm, nli)
}

#[test]
fn casa_report_on_synthetic_set() {
    let script = MockScript::from_file(&fixture_path("synthetic.mock.json")).unwrap();
    let (casa, llm, nli) = engine(&script, PipelineConfig::default(), None);
    let report = run_method(Method::Casa, &synthetic(), &casa).unwrap();
    // s1 entailed (right), s2 contradicted (right), s3 entailed (wrong),
    // s4 has one claim and counts as wrong
    let preds: Vec<Label> = report.items.iter().map(|r| r.pred).collect();
    assert_eq!(preds, vec![S, I, S, I]);
    assert_eq!(report.accuracy, 0.5);
    assert_eq!(report.macro_f1, 0.5);
    assert_eq!(report.errors, 1);
    assert_eq!(report.items[3].error.as_deref(), Some(CasaError::SingleClaimArgument.to_string().as_str()));
    assert_eq!(report.items[0].ps.as_deref(), Some("3/3"));
    assert_eq!(report.items[1].ps.as_deref(), Some("0/3"));
    assert_eq!(report.n, Some(3));
    assert!(report.interrupted.is_none());
    assert_eq!(llm.history().len() + nli.history().len(), 3 * (1 + 1 + 3 + 3));
}

#[test]
pub fn warm_cache_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open(dir.path().join("cache.jsonl")).unwrap());
    let script = MockScript::from_file(&fixture_path("synthetic.mock.json")).unwrap();
    let (casa, _, _) = engine(&script, PipelineConfig::default(), Some(cache.clone()));
    let cold = run_method(Method::Casa, &synthetic(), &casa).unwrap().to_json();
    let reopened = Arc::new(ResponseCache::open(dir.path().join("cache.jsonl")).unwrap());
    let (casa, llm, nli) = engine(&script, PipelineConfig::default(), Some(reopened));
    let warm = run_method(Method::Casa, &synthetic(), &casa).unwrap().to_json();
    assert_eq!(cold, warm);
    assert_eq!(llm.history().len() + nli.history().len(), 0);
}

#[test]
fn sweep_with_constant_mocks() {
    let script = MockScript::from_file(&fixture_path("synthetic.mock.json")).unwrap();
    let (casa, _, _) = engine(&script, PipelineConfig::default(), None);
    let data = synthetic();
    let single = sweep_n(&data, &casa, &[3]).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].to_json(), run_method(Method::Casa, &data, &casa).unwrap().to_json());

    let all: Vec<usize> = (1..=9).collect();
    let reports = sweep_n(&data, &casa, &all).unwrap();
    assert_eq!(reports.len(), 9);
    assert!(reports.iter().all(|r| r.accuracy == 0.5 && r.macro_f1 == 0.5));
    let csv = sweep_csv(&reports);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[0], "n,accuracy,macro_f1");
    assert_eq!(lines[1], "1,0.500000,0.500000");
    assert_eq!(lines[9], "9,0.500000,0.500000");
}

#[test]
fn backend_failure_gives_partial_report() {
    // no sampling rule: the first item fails at the backend
    let script = MockScript::default().reply("Determine which part", "Conclusion: 2");
    let config = PipelineConfig { max_concurrency: 1, ..PipelineConfig::default() };
    let (casa, _, _) = engine(&script, config, None);
    let report = run_method(Method::Casa, &synthetic(), &casa).unwrap();
    assert!(report.interrupted.is_some());
    assert!(report.items.is_empty());
    assert_eq!(report.total, 4);
}

#[test]
fn baselines_through_the_harness() {
    let data = synthetic();
    let script = MockScript::default()
        .reply("Determine which part", "Conclusion: 2")
        .reply("", "Valid")
        .nli_default(NliLabel::Entailment);
    let (casa, _, _) = engine(&script, PipelineConfig::default(), None);
    let zs = run_method("zero_shot:1".parse().unwrap(), &data, &casa).unwrap();
    assert_eq!(zs.preds(), vec![S; 4]);
    assert_eq!(zs.accuracy, 0.5);
    let os = run_method("one_shot:1".parse().unwrap(), &data, &casa).unwrap();
    assert_eq!(os.preds(), vec![S; 4]);
    let nli = run_method(Method::DirectNli, &data, &casa).unwrap();
    // the single-claim item errors and is scored against its gold label
    assert_eq!(nli.preds(), vec![S, S, S, I]);
    assert_eq!(nli.errors, 1);
    let ppl = run_method(Method::Perplexity, &data, &casa).unwrap();
    assert!(ppl.interrupted.is_some());
    assert!("gpt4".parse::<Method>().is_err());
}

#[test]
fn climate_loader_drops_single_sentence_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("climate.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"a\",\"text\":\"Only one sentence here.\",\"label\":\"correct\"}\n\
         {\"id\":\"b\",\"text\":\"First sentence. Second sentence.\",\"label\":\"fallacious\"}\n",
    )
    .unwrap();
    let d = load_climate(&path).unwrap();
    assert_eq!(d.items.iter().map(|a| a.id.as_str()).collect::<Vec<_>>(), ["b"]);
    assert_eq!(d.items[0].gold_label, Some(I));
}
