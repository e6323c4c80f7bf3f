use std::fmt::Write;

use num_rational::Rational64;

use super::{NoteEvent, Score};
use crate::pitch::KeySignature;

const MEASURES_PER_LINE: usize = 4;

/// Canonical `.jp` text for a score. Parsing the output yields an equal
/// score.
pub fn serialize_score(score: &Score) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "title: {}", score.title);
    let _ = writeln!(out, "school: {}", score.school);
    let _ = writeln!(out, "key: {}", key_text(&score.key));
    let _ = writeln!(out, "time: {}", score.time);
    out.push('\n');
    for line in score.measures.chunks(MEASURES_PER_LINE) {
        let parts: Vec<String> = line
            .iter()
            .map(|m| m.notes.iter().map(serialize_note).collect::<Vec<_>>().join(" "))
            .collect();
        out.push_str(&parts.join(" | "));
        out.push_str(" |\n");
    }
    out
}

fn key_text(key: &KeySignature) -> String {
    if key.octave == KeySignature::DEFAULT_OCTAVE {
        format!("1={}", key.tonic)
    } else {
        format!("1={}{}", key.tonic, key.octave)
    }
}

/// One note in canonical form, including any trailing ` -` dashes.
pub fn serialize_note(note: &NoteEvent) -> String {
    let mut s = String::new();
    match note.accidental {
        1 => s.push('#'),
        -1 => s.push('b'),
        _ => {}
    }
    s.push((b'0' + note.degree) as char);
    let mark = if note.octave_shift > 0 { '\'' } else { ',' };
    for _ in 0..note.octave_shift.unsigned_abs() {
        s.push(mark);
    }
    let (marks, dashes) = duration_marks(note.duration.ratio());
    s.push_str(&marks);
    if !note.technique.is_none() {
        s.push('!');
        s.push_str(note.technique.code());
    }
    for _ in 0..dashes {
        s.push_str(" -");
    }
    s
}

/// Chooses `/` and `.` marks, dash count, or an explicit `{p/q}` literal.
fn duration_marks(d: Rational64) -> (String, i64) {
    if d.is_integer() && *d.numer() >= 1 {
        return (String::new(), d.numer() - 1);
    }
    for slashes in 1..=4 {
        let base = Rational64::new(1, 1 << slashes);
        if d == base {
            return ("/".repeat(slashes), 0);
        }
        if d == base * Rational64::new(3, 2) {
            return ("/".repeat(slashes) + ".", 0);
        }
    }
    if d == Rational64::new(3, 2) {
        return (".".into(), 0);
    }
    (format!("{{{}/{}}}", d.numer(), d.denom()), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::{parse_score, Duration, Technique};

    #[test]
    fn third_uses_explicit_literal() {
        let n = NoteEvent::note(1, 0, 0, Duration::new(1, 3).unwrap()).unwrap();
        assert_eq!(serialize_note(&n), "1{1/3}");
    }

    #[test]
    fn tonguing_suffix() {
        let n = NoteEvent::note(5, 0, 0, Duration::QUARTER)
            .unwrap()
            .with_technique(Technique::Tonguing);
        assert_eq!(serialize_note(&n), "5!tk");
    }

    #[test]
    fn duration_forms() {
        let cases = [
            ((2, 1), "3 -"),
            ((3, 1), "3 - -"),
            ((1, 2), "3/"),
            ((3, 4), "3/."),
            ((3, 2), "3."),
            ((1, 16), "3////"),
            ((5, 2), "3{5/2}"),
            ((1, 6), "3{1/6}"),
        ];
        for ((n, d), want) in cases {
            let note = NoteEvent::note(3, 0, 0, Duration::new(n, d).unwrap()).unwrap();
            assert_eq!(serialize_note(&note), want);
        }
        let n = NoteEvent::note(7, -1, -2, Duration::new(1, 2).unwrap()).unwrap();
        assert_eq!(serialize_note(&n), "b7,,/");
    }

    #[test]
    fn round_trip_example() {
        let src = "title: Busy Delivering Harvest\nschool: north\nkey: 1=G\ntime: 2/4\n\n5/ 6/!tk | 1' - | #4{1/3} 3{1/3} 2{1/3} 0 | 1 |\n";
        let s = parse_score(src).unwrap();
        let text = serialize_score(&s);
        assert_eq!(text, src);
        assert_eq!(parse_score(&text).unwrap(), s);
    }
}
