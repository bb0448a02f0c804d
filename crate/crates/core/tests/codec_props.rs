use std::fs;
use std::path::PathBuf;

mod common;

use proptest::prelude::*;

use common::codec::bundle;
use highway_core::policy::{EgoStateQueue, Mode};
use highway_core::prompt::{bank, build_prompt, encode_answer, parse_answer, AnswerBundle, CodecError};
use highway_core::{Action, DangerLevel, DangerSet};

fn lv(v: u8) -> DangerLevel {
    DangerLevel::Level(v)
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compare against a checked-in file; `GOLDEN_UPDATE=1` rewrites it instead.
fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("GOLDEN_UPDATE").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{} drifted; rerun with GOLDEN_UPDATE=1 if intended", path.display());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn answers_round_trip(b in bundle()) {
        let text = encode_answer(&b);
        prop_assert!(text.ends_with(" <STOP>"));
        prop_assert_eq!(parse_answer(&text), Ok(b));
    }

    #[test]
    fn parse_tolerates_surrounding_whitespace(b in bundle(), pre in "[ \n\t]{0,3}", post in "[ \n\t]{0,3}") {
        let text = format!("{pre}{}{post}", encode_answer(&b));
        prop_assert_eq!(parse_answer(&text), Ok(b));
    }

    #[test]
    fn dropping_an_action_is_rejected(b in bundle(), drop in 0usize..11) {
        let mut short = b.clone();
        short.actions.remove(drop);
        let is_grammar_error = matches!(parse_answer(&encode_answer(&short)), Err(CodecError::Grammar { .. }));
        prop_assert!(is_grammar_error);
    }
}

#[test]
fn worked_example_clause_is_byte_exact() {
    let b = AnswerBundle {
        description: String::new(),
        danger: DangerSet { keep: lv(7), left: lv(1), right: lv(5), faster: lv(9), slower: lv(4) },
        actions: vec![Action::Keep; 11],
    };
    let clause = "<keep> is <7>; <left> is <1>; <right> is <5>; <faster> is <9>; <slower> is <4>.";
    assert_eq!(b.danger.clause(), clause);
    let text = encode_answer(&b);
    assert!(text.contains(clause));
    assert_eq!(parse_answer(&text).unwrap(), b);
}

#[test]
fn all_keep_answer_layout() {
    let b = AnswerBundle {
        description: "Clear road.".into(),
        danger: DangerSet::default(),
        actions: vec![Action::Keep; 11],
    };
    let text = encode_answer(&b);
    let tail = format!("{} <STOP>", ["<keep>"; 11].join(" "));
    assert!(text.ends_with(&tail), "{text}");
    assert!(text.contains("<keep> is <0>; <left> is <0>; <right> is <0>; <faster> is <0>; <slower> is <0>."));
}

#[test]
fn malformed_answers() {
    let ok = encode_answer(&AnswerBundle {
        description: "x".into(),
        danger: DangerSet::default(),
        actions: vec![Action::Keep; 11],
    });
    let no_stop = ok.trim_end_matches("<STOP>");
    assert_eq!(parse_answer(no_stop), Err(CodecError::MissingStop));
    let bad_level = ok.replacen("<keep> is <0>", "<keep> is <12>", 1);
    assert!(matches!(parse_answer(&bad_level), Err(CodecError::Grammar { .. })));
    let bad_action = ok.replacen("<keep> <STOP>", "<brake> <STOP>", 1);
    assert!(matches!(parse_answer(&bad_action), Err(CodecError::Grammar { .. })));
    let trailing = format!("{ok} more");
    assert!(matches!(parse_answer(&trailing), Err(CodecError::Grammar { .. })));
}

fn corpus_bundles() -> Vec<AnswerBundle> {
    use Action::*;
    let seq = |a: &[Action]| a.to_vec();
    vec![
        AnswerBundle {
            description: String::new(),
            danger: DangerSet { keep: lv(7), left: lv(1), right: lv(5), faster: lv(9), slower: lv(4) },
            actions: seq(&[Left, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep]),
        },
        AnswerBundle {
            description: "The road ahead is clear. The left lane is free. No lane on the right.".into(),
            danger: DangerSet { keep: lv(0), left: lv(0), right: DangerLevel::Not, faster: lv(0), slower: lv(0) },
            actions: seq(&[Faster, Faster, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep]),
        },
        AnswerBundle {
            description: "A vehicle 8.5 m ahead is closing at 3.1 m/s.".into(),
            danger: DangerSet { keep: lv(9), left: DangerLevel::Not, right: lv(3), faster: lv(9), slower: lv(6) },
            actions: seq(&[Right, Keep, Keep, Slower, Keep, Keep, Keep, Keep, Keep, Keep, Keep]),
        },
        AnswerBundle {
            description: "Traffic on both sides.".into(),
            danger: DangerSet { keep: lv(2), left: lv(8), right: lv(8), faster: lv(5), slower: lv(2) },
            actions: seq(&[Slower, Slower, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep, Keep]),
        },
    ]
}

#[test]
fn answer_corpus_is_stable() {
    let text: String = corpus_bundles().iter().map(|b| encode_answer(b) + "\n").collect();
    check_golden("answers.txt", &text);
    let stored = fs::read_to_string(golden_path("answers.txt")).unwrap();
    for (line, expected) in stored.lines().zip(corpus_bundles()) {
        let parsed = parse_answer(line).unwrap();
        assert_eq!(parsed, expected);
        assert_eq!(encode_answer(&parsed), line);
    }
}

#[test]
fn prompt_layout_is_stable() {
    let mut q = EgoStateQueue::default();
    for (i, v) in [24.0, 24.5, 25.0].into_iter().enumerate() {
        q.push(v, 2.5 * i as f64, 8.0);
    }
    let text: String = [Mode::Slow, Mode::Normal, Mode::Fast]
        .into_iter()
        .map(|m| build_prompt(m, &q, 7, 12).unwrap().text() + "\n\n")
        .collect();
    check_golden("prompts.txt", &text);
}

#[test]
fn every_prompt_draws_from_the_banks() {
    let mut q = EgoStateQueue::default();
    q.push(25.0, 0.0, 4.0);
    for frame in 0..200 {
        let p = build_prompt(Mode::Normal, &q, 3, frame).unwrap();
        let env = bank::ENVIRONMENT.iter().find(|s| p.system.starts_with(*s)).expect("environment sentence");
        let rest = &p.system[env.len() + 1..];
        let legend = bank::LEGEND.iter().find(|s| rest.starts_with(*s)).expect("legend sentence");
        assert!(bank::NOTICE.contains(&&rest[legend.len() + 1..]));
    }
}
