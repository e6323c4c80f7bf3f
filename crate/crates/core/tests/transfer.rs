mod common;

use num_rational::Rational64;

use common::transfer_setup::setup;
use dizi_core::musicxml::export_musicxml;
use dizi_core::notation::{parse_score, serialize_score, Measure, School, Score, Technique, TechniqueRegistry};
use dizi_core::represent::tokenize;
use dizi_core::synth::{synth_corpus, SynthConfig};
use dizi_core::tagger::{tagged_sequence, train_crf, CrfConfig, RuleSet};
use dizi_core::transfer::*;

fn durations(s: &Score) -> Vec<Rational64> {
    s.measures.iter().map(Measure::duration).collect()
}

#[test]
fn hill_climb_invariants() {
    let (clf, _, pieces) = setup();
    let mut lowered = 0;
    for seed in 0..20u64 {
        let piece = &pieces[(seed as usize * 7) % pieces.len()];
        let cfg = TransferConfig { seed, ..Default::default() };
        let out = melody_transfer(piece, &clf, &cfg).unwrap();
        assert_eq!(out.trace.len(), 60);
        assert_eq!(out.initial_label, piece.school);

        // replay the trace to check every step against the classifier
        let mut state = piece.clone();
        let mut p = out.initial_probability;
        let mut notes = piece.note_count() as isize;
        for step in &out.trace {
            assert_eq!(step.p_before, p);
            let candidate = apply_mutation(&state, &step.mutation, &cfg.range).unwrap();
            assert_eq!(durations(&candidate), durations(&state));
            let pred = clf.predict(&tokenize(&candidate));
            assert_eq!(step.p_after, pred.probability_of(out.initial_label));
            assert_eq!(step.accepted, pred.label == out.initial_label && step.p_after < p);
            if step.accepted {
                assert!(step.p_after < step.p_before);
                assert_eq!(step.predicted, out.initial_label);
                state = candidate;
                p = step.p_after;
                notes += step.mutation.note_delta();
            }
        }
        assert_eq!(state, out.score);
        assert_eq!(notes, out.score.note_count() as isize);
        assert_eq!(out.final_probability, p);
        let accepted: Vec<f64> = out.accepted().map(|s| s.p_after).collect();
        assert!(accepted.windows(2).all(|w| w[1] < w[0]));
        lowered += (out.final_probability < out.initial_probability) as usize;

        let again = melody_transfer(piece, &clf, &cfg).unwrap();
        assert_eq!(again, out);
    }
    assert!(lowered >= 18, "only {lowered}/20 runs lowered p");
}

#[test]
fn zero_iterations_is_identity() {
    let (clf, _, pieces) = setup();
    let cfg = TransferConfig { iterations: 0, ..Default::default() };
    let out = melody_transfer(&pieces[0], &clf, &cfg).unwrap();
    assert_eq!(out.score, pieces[0]);
    assert!(out.trace.is_empty());
    assert_eq!(out.checkpoints.len(), 1);
}

#[test]
fn label_mismatch_is_refused_unless_forced() {
    let (clf, _, pieces) = setup();
    let mut piece = pieces[0].clone();
    piece.school = School::South;
    let err = melody_transfer(&piece, &clf, &TransferConfig::default()).unwrap_err();
    assert!(matches!(err, dizi_core::Error::LabelMismatch { .. }));
    let forced = melody_transfer(&piece, &clf, &TransferConfig { force: true, ..Default::default() }).unwrap();
    assert_eq!(forced.initial_label, School::North);
}

#[test]
fn one_note_piece_stops_early() {
    let (clf, _, _) = setup();
    // a single whole-measure rest admits no mutation
    let piece = parse_score("school: north\ntime: 2/4\n0 - |").unwrap();
    let out = melody_transfer(&piece, &clf, &TransferConfig { force: true, ..Default::default() }).unwrap();
    assert_eq!(out.stopped_at, Some(1));
    assert!(out.trace.is_empty());
    assert!(out.trace_tsv().contains("stopped"));
    assert_eq!(out.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0, 20, 60]);
}

#[test]
fn technique_transfer_only_touches_techniques() {
    let (_, tagger, pieces) = setup();
    let registry = TechniqueRegistry::default();
    for rules in [None, Some(RuleSet::default_rules(&registry))] {
        for piece in pieces.iter().take(10) {
            let out = technique_transfer(piece, &tagger, rules.as_ref()).unwrap();
            assert_eq!(out.measures.len(), piece.measures.len());
            for (a, b) in out.notes().zip(piece.notes()) {
                assert_eq!((a.degree, a.accidental, a.octave_shift, a.duration), (b.degree, b.accidental, b.octave_shift, b.duration));
            }
        }
    }
    let corpus = synth_corpus(&SynthConfig { pieces: 10, measures: 4, seed: 3 });
    let plain: Vec<_> = corpus
        .iter()
        .map(|s| {
            let mut t = tagged_sequence(s);
            t.tags.iter_mut().for_each(|x| *x = Technique::None);
            t
        })
        .collect();
    let none_tagger = train_crf(&plain, &CrfConfig::default()).unwrap();
    let out = technique_transfer(&corpus[0], &none_tagger, None).unwrap();
    assert!(out.notes().all(|n| n.technique.is_none()));
}

#[test]
fn style_transfer_exports_every_checkpoint() {
    let (clf, tagger, pieces) = setup();
    // two windows plus a one-measure remainder
    let mut score = pieces[0].clone();
    score.measures.extend(pieces[2].measures.iter().cloned());
    score.measures.push(pieces[4].measures[0].clone());
    for rules in [None, Some(RuleSet::default_rules(&TechniqueRegistry::default()))] {
        let mut cfg = StyleTransferConfig::new(School::South, 4);
        cfg.rules = rules;
        let out = run_style_transfer(&score, &clf, &tagger, &cfg).unwrap();
        assert_eq!(out.windows.len(), 2);
        assert_eq!(durations(&out.score), durations(&score));
        assert_eq!(out.score.measures[8], {
            let mut m = score.measures[8].clone();
            let tagged = technique_transfer(&score, &tagger, cfg.rules.as_ref()).unwrap();
            for (n, t) in m.notes.iter_mut().zip(&tagged.measures[8].notes) {
                n.technique = t.technique.clone();
            }
            m
        });
        assert_eq!(out.checkpoints.iter().map(|c| c.iteration).collect::<Vec<_>>(), vec![0, 20, 60]);
        for c in &out.checkpoints {
            let parsed = parse_score(&c.jianpu).unwrap();
            assert_eq!(durations(&parsed), durations(&score));
            assert_eq!(serialize_score(&parsed), c.jianpu);
            assert_eq!(export_musicxml(&parsed).unwrap(), c.musicxml);
            roxmltree::Document::parse_with_options(&c.musicxml, roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() }).unwrap();
        }
        assert!(out.checkpoints[2].probability < out.checkpoints[0].probability);
        assert!(out.trace_tsv().lines().count() > 1);
    }
}

#[test]
fn identity_style_transfer_keeps_the_melody() {
    let (clf, _, pieces) = setup();
    let piece = &pieces[0];
    let tagger = train_crf(&[tagged_sequence(piece)], &CrfConfig::default()).unwrap();
    let mut cfg = StyleTransferConfig::new(School::South, 0);
    cfg.transfer.iterations = 0;
    cfg.transfer.checkpoints = vec![0];
    let out = run_style_transfer(piece, &clf, &tagger, &cfg).unwrap();
    let mut expect = technique_transfer(piece, &tagger, None).unwrap();
    expect.school = School::South;
    assert_eq!(out.windows[0].score, *piece);
    assert_eq!(out.score, expect);
}
