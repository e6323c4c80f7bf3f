mod common;

use num_rational::Rational64;
use proptest::prelude::*;
use roxmltree::{Document, ParsingOptions};

use dizi_core::musicxml::{divisions, export_musicxml};

fn parse(xml: &str) -> Document<'_> {
    Document::parse_with_options(xml, ParsingOptions { allow_dtd: true, ..Default::default() }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn structure_matches_the_score(seed in any::<u64>()) {
        let score = common::random_score_seeded(seed);
        let xml = export_musicxml(&score).unwrap();
        let doc = parse(&xml);
        let root = doc.root_element();
        prop_assert_eq!(root.tag_name().name(), "score-partwise");
        let measures: Vec<_> = root.descendants().filter(|n| n.has_tag_name("measure")).collect();
        prop_assert_eq!(measures.len(), score.measures.len());
        let div = divisions(&score);
        for (m, xm) in score.measures.iter().zip(&measures) {
            let notes: Vec<_> = xm.children().filter(|n| n.has_tag_name("note")).collect();
            prop_assert_eq!(notes.len(), m.notes.len());
            let mut total = 0i64;
            for (ev, xn) in m.notes.iter().zip(&notes) {
                let d: i64 = xn.children().find(|c| c.has_tag_name("duration")).unwrap().text().unwrap().parse().unwrap();
                prop_assert_eq!(Rational64::from_integer(d), ev.duration.ratio() * div);
                total += d;
                prop_assert_eq!(ev.is_rest(), xn.children().any(|c| c.has_tag_name("rest")));
                let lyric = xn.descendants().find(|c| c.has_tag_name("text")).and_then(|t| t.text());
                if ev.technique.is_none() {
                    prop_assert!(lyric.is_none());
                } else {
                    prop_assert_eq!(lyric, Some(ev.technique.code()));
                }
            }
            prop_assert_eq!(Rational64::from_integer(total), m.duration() * div);
        }
    }
}
