//! MusicXML 3.1 (partwise) export.
//!
//! Playing techniques have no standard MusicXML element in this repertoire,
//! so each non-`None` technique is written as a verse-1 lyric syllable
//! holding its short code (`tk`, `tr`, ...), placed below the staff.

use std::fmt::Write;

use num_integer::Integer;
use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::notation::{Duration, NoteEvent, Score, SUPPORTED_DENOMINATORS};

pub use crate::pitch::degree_to_pitch;

/// Divisions per quarter note: the LCM of every duration denominator.
pub fn divisions(score: &Score) -> i64 {
    score.notes().fold(1, |acc, n| acc.lcm(&n.duration.denom()))
}

pub fn export_musicxml(score: &Score) -> Result<String> {
    let divisions = divisions(score);
    let mut out = String::with_capacity(256 + 200 * score.note_count());
    let title = escape(if score.title.is_empty() { "Untitled" } else { &score.title });

    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    out.push_str(
        "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" \
         \"http://www.musicxml.org/dtds/partwise.dtd\">\n",
    );
    out.push_str("<score-partwise version=\"3.1\">\n");
    let _ = writeln!(out, "  <work><work-title>{title}</work-title></work>");
    out.push_str("  <part-list>\n");
    let _ = writeln!(out, "    <score-part id=\"P1\"><part-name>{title}</part-name></score-part>");
    out.push_str("  </part-list>\n");
    out.push_str("  <part id=\"P1\">\n");

    let full = score.time.measure_length();
    let pickup = score.measures.len() > 1 && score.measures[0].duration() < full;
    for (i, measure) in score.measures.iter().enumerate() {
        let number = if pickup { i } else { i + 1 };
        if pickup && i == 0 {
            let _ = writeln!(out, "    <measure number=\"0\" implicit=\"yes\">");
        } else {
            let _ = writeln!(out, "    <measure number=\"{number}\">");
        }
        if i == 0 {
            out.push_str("      <attributes>\n");
            let _ = writeln!(out, "        <divisions>{divisions}</divisions>");
            let _ = writeln!(
                out,
                "        <key><fifths>{}</fifths><mode>major</mode></key>",
                score.key.fifths()
            );
            let _ = writeln!(
                out,
                "        <time><beats>{}</beats><beat-type>{}</beat-type></time>",
                score.time.beats, score.time.beat_unit
            );
            out.push_str("        <clef><sign>G</sign><line>2</line></clef>\n");
            out.push_str("      </attributes>\n");
        }
        for note in &measure.notes {
            write_note(&mut out, note, score, divisions)?;
        }
        out.push_str("    </measure>\n");
    }
    out.push_str("  </part>\n");
    out.push_str("</score-partwise>\n");
    Ok(out)
}

fn write_note(out: &mut String, note: &NoteEvent, score: &Score, divisions: i64) -> Result<()> {
    let d = note.duration;
    if !SUPPORTED_DENOMINATORS.contains(&d.denom()) {
        return Err(Error::Unrepresentable(format!("duration {d}")));
    }
    let ticks = d.ratio() * Rational64::from_integer(divisions);
    if !ticks.is_integer() {
        return Err(Error::Unrepresentable(format!("duration {d} at {divisions} divisions")));
    }

    out.push_str("      <note>\n");
    match note.pitch(&score.key) {
        None if note.is_rest() => out.push_str("        <rest/>\n"),
        None => return Err(Error::Unrepresentable(format!("note degree {}", note.degree))),
        Some(p) => {
            let (step, alter) = p.class().step_alter();
            out.push_str("        <pitch>");
            let _ = write!(out, "<step>{step}</step>");
            if alter != 0 {
                let _ = write!(out, "<alter>{alter}</alter>");
            }
            let _ = writeln!(out, "<octave>{}</octave></pitch>", p.octave());
        }
    }
    let _ = writeln!(out, "        <duration>{}</duration>", ticks.numer());
    out.push_str("        <voice>1</voice>\n");
    let tuplet = d.denom() % 3 == 0;
    if let Some((name, dots)) = note_type(d, tuplet) {
        let _ = writeln!(out, "        <type>{name}</type>");
        for _ in 0..dots {
            out.push_str("        <dot/>\n");
        }
    }
    if tuplet {
        out.push_str(
            "        <time-modification><actual-notes>3</actual-notes>\
             <normal-notes>2</normal-notes></time-modification>\n",
        );
    }
    if !note.technique.is_none() {
        let _ = writeln!(
            out,
            "        <lyric number=\"1\" placement=\"below\"><syllabic>single</syllabic>\
             <text>{}</text></lyric>",
            escape(note.technique.code())
        );
    }
    out.push_str("      </note>\n");
    Ok(())
}

/// Written note type and dot count. Triplet durations are named by the
/// undotted value they replace at the 3:2 ratio. `None` when no single
/// written value (with up to two dots) fits.
fn note_type(d: Duration, tuplet: bool) -> Option<(&'static str, usize)> {
    const TYPES: [(i64, i64, &str); 8] = [
        (4, 1, "whole"),
        (2, 1, "half"),
        (1, 1, "quarter"),
        (1, 2, "eighth"),
        (1, 4, "16th"),
        (1, 8, "32nd"),
        (1, 16, "64th"),
        (1, 32, "128th"),
    ];
    let written = if tuplet {
        d.ratio() * Rational64::new(3, 2)
    } else {
        d.ratio()
    };
    for (dots, factor) in [(0, Rational64::new(1, 1)), (1, Rational64::new(3, 2)), (2, Rational64::new(7, 4))] {
        for (n, den, name) in TYPES {
            if written == Rational64::new(n, den) * factor {
                return Some((name, dots));
            }
        }
    }
    None
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::parse_score;

    fn doc(src: &str) -> String {
        export_musicxml(&parse_score(src).unwrap()).unwrap()
    }

    #[test]
    fn do_is_c4_quarter() {
        let xml = doc("key: 1=C\ntime: 1/4\n1");
        assert!(xml.contains("<divisions>1</divisions>"));
        assert!(xml.contains("<pitch><step>C</step><octave>4</octave></pitch>"));
        assert!(xml.contains("<duration>1</duration>"));
        assert!(xml.contains("<type>quarter</type>"));
    }

    #[test]
    fn tonguing_becomes_a_lyric() {
        let xml = doc("time: 1/4\n5!tk");
        assert!(xml.contains("<text>tk</text>"));
        assert!(xml.contains("<lyric number=\"1\" placement=\"below\">"));
    }

    #[test]
    fn rest_has_full_quarter_duration() {
        let xml = doc("time: 2/4\n0/ 1/ 0");
        assert!(xml.contains("<divisions>2</divisions>"));
        assert!(xml.contains("<rest/>\n        <duration>2</duration>"));
    }

    #[test]
    fn triplets_get_time_modification() {
        let xml = doc("time: 1/4\n1{1/3} 2{1/3} 3{1/3}");
        assert!(xml.contains("<divisions>3</divisions>"));
        assert_eq!(xml.matches("<actual-notes>3</actual-notes>").count(), 3);
        assert_eq!(xml.matches("<type>eighth</type>").count(), 3);
    }

    #[test]
    fn sharps_only_spelling_and_key() {
        let xml = doc("key: 1=Bb\ntime: 1/4\n#4");
        // raised fourth of Bb major
        assert!(xml.contains("<step>E</step><octave>5</octave>"), "{xml}");
        assert!(xml.contains("<fifths>-2</fifths>"));
        let xml = doc("key: 1=D\ntime: 1/4\n3");
        assert!(xml.contains("<step>F</step><alter>1</alter><octave>4</octave>"));
    }

    #[test]
    fn pickup_measure_is_implicit() {
        let xml = doc("time: 2/4\n5 | 1 2 | 3 -");
        assert!(xml.contains("<measure number=\"0\" implicit=\"yes\">"));
        assert!(xml.contains("<measure number=\"2\">"));
    }

    #[test]
    fn title_is_escaped() {
        let xml = doc("title: A & B <x>\ntime: 1/4\n1");
        assert!(xml.contains("<part-name>A &amp; B &lt;x&gt;</part-name>"));
    }

    #[test]
    fn note_types() {
        let q = |n, d| Duration::new(n, d).unwrap();
        assert_eq!(note_type(q(3, 2), false), Some(("quarter", 1)));
        assert_eq!(note_type(q(3, 1), false), Some(("half", 1)));
        assert_eq!(note_type(q(2, 3), true), Some(("quarter", 0)));
        assert_eq!(note_type(q(1, 6), true), Some(("16th", 0)));
        assert_eq!(note_type(q(5, 2), false), None);
    }
}
