use num_rational::Rational64;

use super::duration::MAX_LITERAL;
use super::{validate_measures, Duration, Measure, NoteEvent, School, Score, Technique, TechniqueRegistry, TimeSignature};
use crate::error::{ParseError, ParseErrorKind};
use crate::pitch::{KeySignature, PitchClass};

type PResult<T> = std::result::Result<T, ParseError>;

fn err(line: usize, column: usize, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        kind,
        message: message.into(),
    }
}

/// Parses a `.jp` score with the built-in technique registry and checks
/// measure lengths.
pub fn parse_score(source: &str) -> PResult<Score> {
    parse_score_with(source, &TechniqueRegistry::default())
}

pub fn parse_score_with(source: &str, registry: &TechniqueRegistry) -> PResult<Score> {
    let (score, starts) = parse_inner(source, registry)?;
    if let Some(d) = validate_measures(&score).into_iter().next() {
        let (line, column) = starts[d.measure];
        return Err(err(line, column, ParseErrorKind::MeasureDuration, d.to_string()));
    }
    Ok(score)
}

/// Like [`parse_score_with`] but leaves measure lengths unchecked, so that
/// [`validate_measures`] can report every offending measure.
pub fn parse_score_unchecked(source: &str, registry: &TechniqueRegistry) -> PResult<Score> {
    parse_inner(source, registry).map(|(s, _)| s)
}

#[derive(Default)]
struct Headers {
    title: Option<String>,
    school: Option<School>,
    key: Option<KeySignature>,
    time: Option<TimeSignature>,
}

fn is_header(line: &str) -> Option<(&str, &str)> {
    let (name, value) = line.split_once(':')?;
    let name = name.trim();
    let mut chars = name.chars();
    let first = chars.next()?;
    if first.is_ascii_alphabetic() && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        Some((name, value))
    } else {
        None
    }
}

fn parse_inner(source: &str, registry: &TechniqueRegistry) -> PResult<(Score, Vec<(usize, usize)>)> {
    let mut headers = Headers::default();
    let mut body = BodyParser::new(registry);
    let mut in_body = false;

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find(';') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some((name, value)) = is_header(line) {
            let column = line.find(name).unwrap_or(0) + 1;
            if in_body {
                return Err(err(line_no, column, ParseErrorKind::Syntax, "header after the score body"));
            }
            parse_header(&mut headers, name, value.trim(), line_no, column)?;
            continue;
        }
        in_body = true;
        body.line(line, line_no)?;
    }

    let (measures, starts) = body.finish()?;
    let score = Score {
        title: headers.title.unwrap_or_default(),
        school: headers.school.unwrap_or(School::Other),
        key: headers.key.unwrap_or_default(),
        time: headers.time.unwrap_or_default(),
        measures,
    };
    Ok((score, starts))
}

fn parse_header(h: &mut Headers, name: &str, value: &str, line: usize, column: usize) -> PResult<()> {
    let dup = || err(line, column, ParseErrorKind::Syntax, format!("duplicate header `{name}`"));
    let bad = |msg: String| err(line, column, ParseErrorKind::Syntax, msg);
    match name {
        "title" => {
            if h.title.replace(value.to_string()).is_some() {
                return Err(dup());
            }
        }
        "school" => {
            let s: School = value.parse().map_err(|_| bad(format!("unknown school `{value}`")))?;
            if h.school.replace(s).is_some() {
                return Err(dup());
            }
        }
        "key" => {
            let k = parse_key(value).ok_or_else(|| bad(format!("bad key `{value}`, expected 1=<pitch class>")))?;
            if h.key.replace(k).is_some() {
                return Err(dup());
            }
        }
        "time" => {
            let t = value
                .split_once('/')
                .and_then(|(b, u)| Some((b.trim().parse().ok()?, u.trim().parse().ok()?)))
                .and_then(|(b, u)| TimeSignature::new(b, u).ok())
                .ok_or_else(|| bad(format!("bad time signature `{value}`")))?;
            if h.time.replace(t).is_some() {
                return Err(dup());
            }
        }
        other => {
            return Err(err(
                line,
                column,
                ParseErrorKind::UnknownHeader,
                format!("unknown header field `{other}`"),
            ))
        }
    }
    Ok(())
}

fn parse_key(value: &str) -> Option<KeySignature> {
    let rest = value.strip_prefix("1=")?.trim();
    let split = rest
        .find(|c: char| c.is_ascii_digit() || c == '-')
        .unwrap_or(rest.len());
    let tonic: PitchClass = rest[..split].parse().ok()?;
    let octave = if split == rest.len() {
        KeySignature::DEFAULT_OCTAVE
    } else {
        let o: i32 = rest[split..].parse().ok()?;
        if !(0..=9).contains(&o) {
            return None;
        }
        o
    };
    Some(KeySignature { tonic, octave })
}

struct BodyParser<'r> {
    registry: &'r TechniqueRegistry,
    measures: Vec<Measure>,
    starts: Vec<(usize, usize)>,
    current: Vec<NoteEvent>,
    current_start: Option<(usize, usize)>,
    // position of the latest barline, for reporting empty measures
    last_bar: Option<(usize, usize)>,
    seen_bar: bool,
}

impl<'r> BodyParser<'r> {
    fn new(registry: &'r TechniqueRegistry) -> Self {
        BodyParser {
            registry,
            measures: Vec::new(),
            starts: Vec::new(),
            current: Vec::new(),
            current_start: None,
            last_bar: None,
            seen_bar: false,
        }
    }

    fn line(&mut self, line: &str, line_no: usize) -> PResult<()> {
        let chars: Vec<(usize, char)> = line.chars().enumerate().collect();
        let mut i = 0;
        while i < chars.len() {
            let (col, c) = chars[i];
            let column = col + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '|' {
                self.barline(line_no, column)?;
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() && !chars[i].1.is_whitespace() && chars[i].1 != '|' {
                i += 1;
            }
            let text: String = chars[start..i].iter().map(|(_, c)| *c).collect();
            if text == "-" {
                self.dash(line_no, column)?;
            } else {
                let note = parse_note(&text, self.registry, line_no, column)?;
                if self.current.is_empty() {
                    self.current_start = Some((line_no, column));
                }
                self.current.push(note);
            }
        }
        Ok(())
    }

    fn dash(&mut self, line: usize, column: usize) -> PResult<()> {
        let prev = self.current.last_mut().ok_or_else(|| {
            err(line, column, ParseErrorKind::Syntax, "`-` with no preceding note in the measure")
        })?;
        let extended = prev.duration.ratio() + Rational64::from_integer(1);
        if *extended.numer() > MAX_LITERAL {
            return Err(err(line, column, ParseErrorKind::Syntax, "note too long"));
        }
        prev.duration = Duration::from_ratio(extended)
            .map_err(|e| err(line, column, ParseErrorKind::Syntax, e.to_string()))?;
        Ok(())
    }

    fn barline(&mut self, line: usize, column: usize) -> PResult<()> {
        if self.current.is_empty() {
            // an opening barline is allowed; anything else is an empty measure
            if self.seen_bar || !self.measures.is_empty() {
                return Err(err(line, column, ParseErrorKind::Syntax, "empty measure"));
            }
        } else {
            self.close();
        }
        self.seen_bar = true;
        self.last_bar = Some((line, column));
        Ok(())
    }

    fn close(&mut self) {
        let notes = std::mem::take(&mut self.current);
        self.measures.push(Measure::new(notes));
        self.starts.push(self.current_start.take().unwrap_or((0, 0)));
    }

    fn finish(mut self) -> PResult<(Vec<Measure>, Vec<(usize, usize)>)> {
        if !self.current.is_empty() {
            self.close();
        }
        if self.measures.is_empty() {
            let (line, column) = self.last_bar.unwrap_or((1, 1));
            return Err(err(line, column, ParseErrorKind::Syntax, "score has no notes"));
        }
        Ok((self.measures, self.starts))
    }
}

/// Parses one note token such as `#4',//.!tr`, `0/`, or `5{1/3}`.
fn parse_note(text: &str, registry: &TechniqueRegistry, line: usize, column: usize) -> PResult<NoteEvent> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let at = |i: usize| column + i;
    let syntax = |i: usize, msg: String| err(line, column + i, ParseErrorKind::Syntax, msg);

    let accidental: i8 = match chars.first() {
        Some('#') => {
            i += 1;
            1
        }
        Some('b') => {
            i += 1;
            -1
        }
        _ => 0,
    };

    let degree = match chars.get(i) {
        Some(c @ '0'..='7') => *c as u8 - b'0',
        Some(c) if c.is_ascii_digit() => {
            return Err(syntax(i, format!("`{text}`: scale degree {c} outside 0..=7")));
        }
        _ => return Err(syntax(i, format!("`{text}`: expected a scale degree 0..=7"))),
    };
    i += 1;

    let mut octave_shift: i32 = 0;
    while let Some(&c) = chars.get(i) {
        let step = match c {
            '\'' => 1,
            ',' => -1,
            _ => break,
        };
        if octave_shift != 0 && octave_shift.signum() != step {
            return Err(syntax(i, format!("`{text}`: mixed octave marks")));
        }
        octave_shift += step;
        if octave_shift.abs() > 2 {
            return Err(syntax(i, format!("`{text}`: more than two octave marks")));
        }
        i += 1;
    }

    let mut duration = Rational64::from_integer(1);
    let mut slashes = 0;
    while chars.get(i) == Some(&'/') {
        slashes += 1;
        if slashes > 4 {
            return Err(syntax(i, format!("`{text}`: too many `/` marks")));
        }
        duration /= 2;
        i += 1;
    }
    let mut dots = 0;
    while chars.get(i) == Some(&'.') {
        dots += 1;
        if dots > 2 {
            return Err(syntax(i, format!("`{text}`: too many dots")));
        }
        duration = duration * Rational64::new(3, 2);
        i += 1;
    }
    if chars.get(i) == Some(&'{') {
        if slashes > 0 || dots > 0 {
            return Err(syntax(i, format!("`{text}`: explicit duration combined with `/` or `.`")));
        }
        let close = chars[i..]
            .iter()
            .position(|&c| c == '}')
            .map(|p| p + i)
            .ok_or_else(|| syntax(i, format!("`{text}`: unterminated `{{`")))?;
        let inner: String = chars[i + 1..close].iter().collect();
        duration = parse_literal(&inner).ok_or_else(|| syntax(i, format!("`{text}`: bad duration `{{{inner}}}`")))?;
        i = close + 1;
    }

    let mut technique = Technique::None;
    if chars.get(i) == Some(&'!') {
        let code: String = chars[i + 1..].iter().collect();
        if code.is_empty() {
            return Err(syntax(i, format!("`{text}`: empty technique code")));
        }
        technique = registry.lookup(&code).ok_or_else(|| {
            err(line, at(i + 1), ParseErrorKind::UnknownTechnique, format!("unknown technique `{code}`"))
        })?;
        i = chars.len();
    }

    if i != chars.len() {
        return Err(syntax(i, format!("`{text}`: unexpected `{}`", chars[i])));
    }

    let duration = Duration::from_ratio(duration).map_err(|e| syntax(0, format!("`{text}`: {e}")))?;
    if degree == 0 && (accidental != 0 || octave_shift != 0 || !technique.is_none()) {
        return Err(syntax(0, format!("`{text}`: a rest takes no accidental, octave mark or technique")));
    }
    Ok(NoteEvent {
        degree,
        accidental,
        octave_shift: octave_shift as i8,
        duration,
        technique,
    })
}

fn parse_literal(inner: &str) -> Option<Rational64> {
    let (n, d) = match inner.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().ok()?, d.trim().parse::<i64>().ok()?),
        None => (inner.trim().parse::<i64>().ok()?, 1),
    };
    if n <= 0 || d <= 0 || n > MAX_LITERAL || d > MAX_LITERAL {
        return None;
    }
    Some(Rational64::new(n, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Duration {
        Duration::new(n, d).unwrap()
    }

    #[test]
    fn four_quarter_notes() {
        let s = parse_score("key: 1=C\n1 2 3 5").unwrap();
        assert_eq!(s.measures.len(), 1);
        let degrees: Vec<u8> = s.notes().map(|n| n.degree).collect();
        assert_eq!(degrees, [1, 2, 3, 5]);
        assert!(s.notes().all(|n| n.duration == Duration::QUARTER));
    }

    #[test]
    fn eighths_and_dash() {
        let s = parse_score("time: 2/4\n5/ 5/ | 6 -").unwrap();
        assert_eq!(s.measures.len(), 2);
        assert_eq!(s.measures[0].notes.len(), 2);
        assert!(s.measures[0].notes.iter().all(|n| n.duration == q(1, 2)));
        assert_eq!(s.measures[1].notes.len(), 1);
        assert_eq!(s.measures[1].notes[0].degree, 6);
        assert_eq!(s.measures[1].notes[0].duration, q(2, 1));
    }

    #[test]
    fn out_of_range_degree() {
        let e = parse_score("1 2\n3 8 5").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!((e.line, e.column), (2, 3));
        assert!(e.message.contains("`8`"), "{}", e.message);
    }

    #[test]
    fn marks_and_suffixes() {
        let s = parse_score("time: 4/4\n#4'/. b7,,{1/3}!tr 0// 5{2/3} 1!tk 2.. | 1").unwrap_err();
        // 3/4 + 1/3 + 1/4 + 2/3 + 1 + 9/4 = 5.25 > 4
        assert_eq!(s.kind, ParseErrorKind::MeasureDuration);

        let s = parse_score_unchecked(
            "#4'/. b7,,{1/3}!tr 0// 5{2/3} 1!tk 2..",
            &TechniqueRegistry::default(),
        )
        .unwrap();
        let n: Vec<&NoteEvent> = s.notes().collect();
        assert_eq!((n[0].accidental, n[0].octave_shift, n[0].duration), (1, 1, q(3, 4)));
        assert_eq!((n[1].accidental, n[1].octave_shift, n[1].duration), (-1, -2, q(1, 3)));
        assert_eq!(n[1].technique, Technique::Trill);
        assert!(n[2].is_rest());
        assert_eq!(n[2].duration, q(1, 4));
        assert_eq!(n[4].technique, Technique::Tonguing);
        assert_eq!(n[5].duration, q(9, 4));
    }

    #[test]
    fn header_errors() {
        let e = parse_score("tempo: 80\n1 2 3 4").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownHeader);
        assert_eq!(e.line, 1);
        let e = parse_score("1 2 3 4\ntitle: late").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        let e = parse_score("key: 1=H\n1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        let e = parse_score("title: a\ntitle: b\n1").unwrap_err();
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn unknown_technique() {
        let e = parse_score("1 2!zz 3 4").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownTechnique);
        assert_eq!((e.line, e.column), (1, 5));

        let mut reg = TechniqueRegistry::default();
        reg.register("zz").unwrap();
        let s = parse_score_with("1 2!zz 3 4", &reg).unwrap();
        assert_eq!(s.measures[0].notes[1].technique.code(), "zz");
    }

    #[test]
    fn structural_errors() {
        for src in ["", "| |", "1 | | 2", "- 1", "1 | - 2", "0!tk", "#0", "1{1/5}", "1/////", "1/{1/2}", "1x", "1{1/3"] {
            assert!(parse_score(src).is_err(), "{src:?} should fail");
        }
    }

    #[test]
    fn barlines_at_the_edges() {
        let s = parse_score("time: 1/4\n| 1 | 2 |\n3 |").unwrap();
        assert_eq!(s.measures.len(), 3);
    }

    #[test]
    fn comments_and_key_octave() {
        let s = parse_score("; a comment\nkey: 1=Bb5 ; trailing\nschool: North\n1 ; body comment").unwrap();
        assert_eq!(s.key.octave, 5);
        assert_eq!(s.key.tonic.name(), "A#");
        assert_eq!(s.school, School::North);
    }
}
