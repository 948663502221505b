use std::collections::{BTreeSet, HashMap};

use coachqa_core::analysis::{Analyzer, AnalyzerConfig};
use coachqa_core::corpus::{Passage, PassageStore};
use coachqa_core::reader::{pipeline_answer, reference_read, AnswerSpan, ReferenceReader};
use coachqa_core::sparse::{Bm25Params, InvertedIndex};
use coachqa_core::text::char_slice;
use coachqa_core::Retriever;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_span_valid(span: &AnswerSpan, store: &PassageStore) {
    let p = store.get(&span.passage_id).unwrap();
    assert!(span.start_char < span.end_char);
    assert_eq!(char_slice(&p.text, span.start_char, span.end_char), Some(span.text.as_str()));
}

/// Enumerates every window from scratch; words are single-space separated.
fn window_oracle(
    words: &[&str],
    q_terms: &[&str],
    idf: &HashMap<&str, f64>,
    lambda: f64,
    max_len: usize,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..words.len() {
        for j in i..words.len().min(i + max_len) {
            let present: BTreeSet<&str> = words[i..=j]
                .iter()
                .copied()
                .filter(|w| q_terms.contains(w))
                .collect();
            let score = present.iter().map(|t| idf[t]).sum::<f64>() - lambda * (j - i + 1) as f64;
            let better = match best {
                None => true,
                Some((bi, bj, bs)) => {
                    score > bs || (score == bs && (i < bi || (i == bi && j - i < bj - bi)))
                }
            };
            if better {
                best = Some((i, j, score));
            }
        }
    }
    best.filter(|b| b.2 > 0.0)
}

#[test]
fn twenty_word_passage_matches_window_enumeration() {
    let vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"];
    let idf: HashMap<&str, f64> = [("alpha", 1.5), ("beta", 2.25)].into();
    let lambda = 0.125;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..200 {
        let words: Vec<&str> = (0..20).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
        let max_len = rng.gen_range(1..=25);
        let reader = ReferenceReader::with_weights(
            Analyzer::new(AnalyzerConfig::plain()),
            idf.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            lambda,
            max_len,
        );
        let text = words.join(" ");
        let passage = Passage::new("p", &text).unwrap();
        let got = reference_read(&reader, "alpha beta", &passage);
        let want = window_oracle(&words, &["alpha", "beta"], &idf, lambda, max_len);
        match (got, want) {
            (None, None) => {}
            (Some(span), Some((i, j, score))) => {
                let expected = words[i..=j].join(" ");
                assert_eq!(span.text, expected, "case {case}");
                assert_eq!(span.score, score, "case {case}");
            }
            (g, w) => panic!("case {case}: got {g:?}, oracle {w:?}"),
        }
    }
}

fn sample_store() -> PassageStore {
    PassageStore::new(vec![
        Passage::new("a", "Melatonin is a hormone that signals darkness to the body.").unwrap(),
        Passage::new("b", "Light exposure at night suppresses melatonin production strongly.").unwrap(),
        Passage::new("c", "Caffeine blocks adenosine and delays sleep onset.").unwrap(),
        Passage::new("d", "Melatonin supplements may help with jet lag and shift work.").unwrap(),
        Passage::new("e", "Adenosine builds up during waking hours and creates sleep pressure.").unwrap(),
        Passage::new("f", "Naps shorter than twenty minutes avoid deep sleep inertia.").unwrap(),
    ])
    .unwrap()
}

#[test]
fn pipeline_takes_argmax_over_hits() {
    let store = sample_store();
    let index = InvertedIndex::build(&store, AnalyzerConfig::default(), Bm25Params::default()).unwrap();
    let reader = ReferenceReader::from_index(&index, 30);
    let retriever = coachqa_core::Bm25Retriever::new(std::sync::Arc::new(index));
    for question in [
        "What does melatonin signal to the body?",
        "How does adenosine create sleep pressure?",
        "Does light suppress melatonin production at night?",
        "Can melatonin help jet lag?",
    ] {
        let hits = retriever.retrieve(question, 5).unwrap();
        let got = pipeline_answer(question, &hits, &reader, &store).unwrap().answer;
        // Scan oracle: read each hit independently, keep the best.
        let mut best: Option<AnswerSpan> = None;
        for h in &hits {
            if let Some(mut s) = reference_read(&reader, question, store.get(&h.passage_id).unwrap()) {
                s.retriever_rank = h.rank;
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        assert_eq!(got, best, "{question}");
        if let Some(span) = &got {
            assert_span_valid(span, &store);
        }
    }
}

#[test]
fn top_one_pipeline_equals_reading_the_top_passage() {
    let store = sample_store();
    let index = InvertedIndex::build(&store, AnalyzerConfig::default(), Bm25Params::default()).unwrap();
    let reader = ReferenceReader::from_index(&index, 30);
    for question in ["melatonin hormone", "adenosine sleep pressure", "twenty minute naps"] {
        let hits = index.search(question, 1).unwrap();
        let via_pipeline = pipeline_answer(question, &hits, &reader, &store).unwrap().answer;
        let direct = reference_read(&reader, question, store.get(&hits[0].passage_id).unwrap());
        assert_eq!(via_pipeline, direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn wider_windows_never_score_lower(
        seed in any::<u64>(),
        n_words in 1usize..40,
        l in 1usize..15,
    ) {
        let vocab = ["sleep", "nap", "rest", "dream", "night", "bed", "light", "dark"];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text: Vec<&str> = (0..n_words).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
        let idf: HashMap<String, f64> = vocab.iter().map(|w| (w.to_string(), rng.gen_range(0.1..3.0))).collect();
        let mk = |l| ReferenceReader::with_weights(Analyzer::new(AnalyzerConfig::plain()), idf.clone(), 0.05, l);
        let passage = Passage::new("p", &text.join(" ")).unwrap();
        let q = "sleep dream dark";
        let narrow = reference_read(&mk(l), q, &passage).map_or(0.0, |s| s.score);
        let wide = reference_read(&mk(l + 1), q, &passage).map_or(0.0, |s| s.score);
        prop_assert!(wide >= narrow);
    }

    #[test]
    fn spans_are_substrings_and_whitespace_stable(
        passage in "[a-zA-Z]{1,8}( [a-zA-Z,.]{1,8}){0,25}",
        question in "[a-z]{1,6}( [a-z]{1,6}){0,4}",
        pad in "[ \t\n]{0,4}",
    ) {
        let store = PassageStore::new(vec![Passage::new("p", &passage).unwrap()]).unwrap();
        let index = InvertedIndex::build(&store, AnalyzerConfig::default(), Bm25Params::default()).unwrap();
        let reader = ReferenceReader::from_index(&index, 30);
        let p = store.get("p").unwrap();
        let a = reference_read(&reader, &question, p);
        let b = reference_read(&reader, &format!("{question}{pad}"), p);
        prop_assert_eq!(&a, &b);
        if let Some(span) = a {
            assert_span_valid(&span, &store);
        }
    }
}
