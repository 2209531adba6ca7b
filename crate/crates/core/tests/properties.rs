use std::collections::BTreeMap;

use lame_core::charstream::{to_charstream_json, validate_charstream};
use lame_core::classifier::{evaluate, predict, train, FeatureSpec};
use lame_core::corpus::{build_vocab, detokenize, escape_separator, split_sequence, tokenize, FinetuneRow};
use lame_core::layout::{analyze_page, build_lines, merge_lines, order_boxes, LayoutParams};
use lame_core::matcher::{bleu, label_page, levenshtein_ratio, normalize_text, MatcherParams};
use lame_core::synth::{default_styles, generate_doc};
use lame_core::Label;
use proptest::prelude::*;

fn text_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            Just("a"),
            Just("B"),
            Just("z"),
            Just(" "),
            Just("\t"),
            Just("가"),
            Just("한"),
            Just("*"),
            Just("²"),
            Just("<TEX>x</TEX>"),
            Just("cid:12"),
            Just("(cid:3)"),
            Just("<TEX>"),
            Just("</TEX>"),
            Just("c"),
            Just("id:4"),
            Just("\u{E000}"),
            Just("\u{FFFD}"),
        ],
        0..30,
    )
    .prop_map(|parts| parts.concat())
}

fn words_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just("the"), Just("box"), Just("a"), Just("결과"), Just("모델")], 0..12)
        .prop_map(|w| w.join(" "))
}

fn style_doc() -> impl Strategy<Value = (usize, usize, u64)> {
    (0..default_styles().len(), 0..50usize, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_idempotent(raw in text_strategy()) {
        let (once, _) = normalize_text(&raw);
        let (twice, _) = normalize_text(&once);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn levenshtein_is_symmetric_and_bounded(a in text_strategy(), b in text_strategy()) {
        let r = levenshtein_ratio(&a, &b);
        prop_assert_eq!(r, levenshtein_ratio(&b, &a));
        prop_assert!((0.0..=100.0).contains(&r));
        prop_assert_eq!(levenshtein_ratio(&a, &a), 100.0);
    }

    #[test]
    fn bleu_is_bounded(a in words_strategy(), b in words_strategy()) {
        let params = MatcherParams::default();
        let s = bleu(&a, &b, &params);
        prop_assert!((0.0..=1.0).contains(&s));
        if !a.trim().is_empty() {
            prop_assert!((bleu(&a, &a, &params) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_partitions_glyphs_deterministically((style, doc, seed) in style_doc()) {
        let d = generate_doc(&default_styles()[style], style, doc, seed);
        let params = LayoutParams::default();
        let boxes = analyze_page(&d.page, &params);
        let mut seen = vec![0; d.page.chars.len()];
        for b in &boxes {
            for i in b.glyph_indices() {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(&boxes, &analyze_page(&d.page, &params));
    }

    #[test]
    fn ordering_ignores_input_order((style, doc, seed) in style_doc(), rot in 0usize..50) {
        let d = generate_doc(&default_styles()[style], style, doc, seed);
        let params = LayoutParams::default();
        let ordered = order_boxes(merge_lines(build_lines(&d.page, &params), &params));
        let mut shuffled = ordered.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(&order_boxes(shuffled), &ordered);
        prop_assert_eq!(order_boxes(ordered.clone()), ordered);
    }

    #[test]
    fn layout_ignores_glyph_stream_order((style, doc, seed) in style_doc(), rot in 1usize..500) {
        let d = generate_doc(&default_styles()[style], style, doc, seed);
        let params = LayoutParams::default();
        let texts = |page: &lame_core::Page| -> Vec<String> {
            analyze_page(page, &params).into_iter().map(|b| b.text).collect()
        };
        let mut permuted = d.page.clone();
        let k = rot % permuted.chars.len();
        permuted.chars.rotate_left(k);
        permuted.chars.reverse();
        prop_assert_eq!(texts(&permuted), texts(&d.page));
    }

    #[test]
    fn charstream_round_trips((style, doc, seed) in style_doc()) {
        let d = generate_doc(&default_styles()[style], style, doc, seed);
        let json = to_charstream_json(&d.page);
        let back = validate_charstream(&json).unwrap();
        prop_assert_eq!(&back, &d.page);
        prop_assert_eq!(to_charstream_json(&back), json);
    }

    #[test]
    fn raising_threshold_only_removes_labels((style, doc, seed) in style_doc(), lo in 40.0f64..90.0, step in 0.0f64..10.0) {
        let d = generate_doc(&default_styles()[style], style, doc, seed);
        let layout = LayoutParams::default();
        let boxes = analyze_page(&d.page, &layout);
        let run = |t: f64| {
            let params = MatcherParams { threshold: t, ..MatcherParams::default() };
            label_page("d", "j", (d.page.width, d.page.height), boxes.clone(), &d.record, &params, &layout).unwrap()
        };
        let (low, high) = (run(lo), run(lo + step));
        for (l, h) in low.boxes.iter().zip(&high.boxes) {
            if h.label != Label::O {
                prop_assert_eq!(h.label, l.label);
            }
        }
    }

    #[test]
    fn wordpiece_round_trips(text in "[a-e가나 ]{0,40}") {
        let vocab = build_vocab([text.as_str()], 60).unwrap();
        let tokens = tokenize(&text, &vocab, 10_000);
        prop_assert!(!tokens.iter().any(|t| t == "[UNK]"));
        prop_assert_eq!(detokenize(&tokens), text.split_whitespace().collect::<Vec<_>>().join(" "));
    }

    #[test]
    fn separator_split_recovers_segments(parts in proptest::collection::vec("[ab \\[\\]SEP]{0,12}", 1..8)) {
        let line = parts.iter().map(|p| escape_separator(p)).collect::<Vec<_>>().join(" [SEP] ");
        let back: Vec<String> = split_sequence(&line).iter().map(|s| s.replace("[SEP\u{200B}]", "[SEP]")).collect();
        prop_assert_eq!(back, parts);
    }

    #[test]
    fn micro_f1_equals_accuracy(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..100)) {
        let names = ["a", "b", "c", "d", "e"];
        let golds: Vec<&str> = pairs.iter().map(|p| names[p.0]).collect();
        let preds: Vec<&str> = pairs.iter().map(|p| names[p.1]).collect();
        let report = evaluate(&preds, &golds).unwrap();
        let accuracy = pairs.iter().filter(|p| p.0 == p.1).count() as f64 / pairs.len() as f64;
        prop_assert!((report.micro_f1 - accuracy).abs() < 1e-12);
    }

    #[test]
    fn evaluate_ignores_consistent_renaming(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let (a, b) = (["w", "x", "y", "z"], ["q", "r", "s", "t"]);
        let run = |names: [&str; 4]| {
            let golds: Vec<&str> = pairs.iter().map(|p| names[p.0]).collect();
            let preds: Vec<&str> = pairs.iter().map(|p| names[p.1]).collect();
            evaluate(&preds, &golds).unwrap()
        };
        let (ra, rb) = (run(a), run(b));
        prop_assert_eq!(ra.micro_f1, rb.micro_f1);
        prop_assert!((ra.macro_f1 - rb.macro_f1).abs() < 1e-12);
    }

    #[test]
    fn predictions_follow_label_permutation(
        rows in proptest::collection::vec((proptest::collection::vec(0usize..8, 1..6), 0usize..11), 2..40),
        shift in 1usize..11,
    ) {
        let words = ["deep", "layout", "논문", "결과", "box", "model", "of", "학습"];
        let make = |perm: &dyn Fn(usize) -> usize| -> Vec<FinetuneRow> {
            rows.iter().enumerate().map(|(i, (toks, l))| FinetuneRow {
                text: toks.iter().map(|&t| words[t]).collect::<Vec<_>>().join(" "),
                label: Label::ALL[perm(*l)],
                doc_id: format!("d{i}"),
                journal_id: "j".into(),
                order: i,
                x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0, page_width: 10.0, page_height: 10.0,
            }).collect()
        };
        let sigma = |l: usize| (l + shift) % 11;
        let base = train(&make(&|l| l), FeatureSpec::TEXT).unwrap();
        let moved = train(&make(&sigma), FeatureSpec::TEXT).unwrap();
        for (toks, _) in &rows {
            let text = toks.iter().map(|&t| words[t]).collect::<Vec<_>>().join(" ");
            let p = predict(&base, &text, None).unwrap();
            let q = predict(&moved, &text, None).unwrap();
            let sum: f64 = p.posteriors.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for (l, &post) in p.posteriors.iter().enumerate() {
                prop_assert!((post - q.posteriors[sigma(l)]).abs() < 1e-9);
            }
            // Only a strict winner must move with the permutation; exact
            // ties fall back to the fixed label order.
            let mut sorted = p.posteriors;
            sorted.sort_by(|a, b| b.total_cmp(a));
            if sorted[0] - sorted[1] > 1e-9 {
                prop_assert_eq!(q.label, Label::ALL[sigma(p.label.index())]);
            }
        }
    }
}

#[test]
fn duplicating_rows_keeps_separable_argmax() {
    let rows: Vec<FinetuneRow> =
        [("deep layout", Label::TitleEn), ("논문 결과", Label::AbstractKo), ("kim lee", Label::AuthorNameEn)]
            .iter()
            .enumerate()
            .map(|(i, (t, l))| FinetuneRow {
                text: t.to_string(),
                label: *l,
                doc_id: format!("d{i}"),
                journal_id: "j".into(),
                order: i,
                x0: 0.0,
                y0: 0.0,
                x1: 1.0,
                y1: 1.0,
                page_width: 10.0,
                page_height: 10.0,
            })
            .collect();
    let once = train(&rows, FeatureSpec::TEXT).unwrap();
    let scaled: Vec<FinetuneRow> = rows.iter().flat_map(|r| std::iter::repeat_n(r.clone(), 7)).collect();
    let many = train(&scaled, FeatureSpec::TEXT).unwrap();
    let mut labels = BTreeMap::new();
    for r in &rows {
        let a = predict(&once, &r.text, None).unwrap().label;
        let b = predict(&many, &r.text, None).unwrap().label;
        assert_eq!(a, b);
        labels.insert(r.text.clone(), a);
    }
    assert_eq!(labels["deep layout"], Label::TitleEn);
}
