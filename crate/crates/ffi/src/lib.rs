//! C ABI over `dizi-core`. Objects are opaque handles released with their
//! `*_free` function; strings returned to the caller are released with
//! [`dizi_string_free`]. Every call returns a [`DiziStatus`]; on failure
//! [`dizi_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dizi_core::classify::StyleClassifier;
use dizi_core::musicxml::export_musicxml;
use dizi_core::notation::{parse_score, serialize_score, Score, TechniqueRegistry};
use dizi_core::represent::{segment, tokenize, DEFAULT_WINDOW};
use dizi_core::tagger::{CrfModel, RuleSet};
use dizi_core::transfer::technique_transfer;
use dizi_core::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiziStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Model = 4,
    Invalid = 5,
    Panic = 6,
}

/// A parsed score.
pub struct DiziScore(Score);

/// A trained style classifier.
pub struct DiziClassifier(StyleClassifier);

/// A trained technique tagger.
pub struct DiziTagger(CrfModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (DiziStatus, String);

fn status_of(e: &Error) -> DiziStatus {
    match e {
        Error::Parse(_) => DiziStatus::Parse,
        Error::ModelFormat { .. } | Error::DimensionMismatch { .. } => DiziStatus::Model,
        _ => DiziStatus::Invalid,
    }
}

fn fail(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> DiziStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DiziStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DiziStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err((DiziStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (DiziStatus::InvalidUtf8, "string is not UTF-8".into()))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| (DiziStatus::NullPointer, format!("null {what}")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err((DiziStatus::NullPointer, "null output pointer".into()));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| (DiziStatus::Invalid, "string contains NUL".into()))?;
    put(out, c.into_raw())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dizi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dizi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses jianpu text into a new score handle.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_score_parse(src: *const c_char, out: *mut *mut DiziScore) -> DiziStatus {
    guard(|| {
        let score = parse_score(text(src)?).map_err(|e| (DiziStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(DiziScore(score))))
    })
}

/// # Safety
/// `score` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dizi_score_free(score: *mut DiziScore) {
    if !score.is_null() {
        drop(Box::from_raw(score));
    }
}

/// Number of notes and rests.
///
/// # Safety
/// `score` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_score_note_count(score: *const DiziScore, out: *mut usize) -> DiziStatus {
    guard(|| put(out, handle(score, "score")?.0.note_count()))
}

/// Canonical jianpu text.
///
/// # Safety
/// `score` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_score_serialize(score: *const DiziScore, out: *mut *mut c_char) -> DiziStatus {
    guard(|| put_string(out, serialize_score(&handle(score, "score")?.0)))
}

/// MusicXML document.
///
/// # Safety
/// `score` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_score_musicxml(score: *const DiziScore, out: *mut *mut c_char) -> DiziStatus {
    guard(|| {
        let xml = export_musicxml(&handle(score, "score")?.0).map_err(fail)?;
        put_string(out, xml)
    })
}

/// Space-separated note tokens of the whole score.
///
/// # Safety
/// `score` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_score_tokens(score: *const DiziScore, out: *mut *mut c_char) -> DiziStatus {
    guard(|| put_string(out, tokenize(&handle(score, "score")?.0).tokens.join(" ")))
}

/// Loads a classifier from its text format.
///
/// # Safety
/// `model` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_classifier_load(model: *const c_char, out: *mut *mut DiziClassifier) -> DiziStatus {
    guard(|| {
        let c = StyleClassifier::from_text(text(model)?).map_err(fail)?;
        put(out, Box::into_raw(Box::new(DiziClassifier(c))))
    })
}

/// # Safety
/// `classifier` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dizi_classifier_free(classifier: *mut DiziClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Predicted school of a score and its probability. Scores of at least one
/// window are scored as the mean over 4-measure windows, shorter ones whole.
///
/// # Safety
/// Handles must be live; `label` and `probability` must be writable. The
/// label string is released with [`dizi_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dizi_classifier_predict(
    classifier: *const DiziClassifier,
    score: *const DiziScore,
    label: *mut *mut c_char,
    probability: *mut f64,
) -> DiziStatus {
    guard(|| {
        let c = &handle(classifier, "classifier")?.0;
        let s = &handle(score, "score")?.0;
        let mut pieces = segment(s, DEFAULT_WINDOW);
        if pieces.is_empty() {
            pieces.push(tokenize(s));
        }
        let p = c.predict_mean(&pieces).expect("at least one piece");
        if probability.is_null() {
            return Err((DiziStatus::NullPointer, "null output pointer".into()));
        }
        put_string(label, p.label.as_str().to_string())?;
        put(probability, p.probability_of(p.label))
    })
}

/// Loads a tagger from its text format.
///
/// # Safety
/// `model` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_tagger_load(model: *const c_char, out: *mut *mut DiziTagger) -> DiziStatus {
    guard(|| {
        let m = CrfModel::from_text(text(model)?, &TechniqueRegistry::default()).map_err(fail)?;
        put(out, Box::into_raw(Box::new(DiziTagger(m))))
    })
}

/// # Safety
/// `tagger` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dizi_tagger_free(tagger: *mut DiziTagger) {
    if !tagger.is_null() {
        drop(Box::from_raw(tagger));
    }
}

/// A new score with every note's technique replaced by the tagger's
/// decoding; with `use_rules`, the built-in rules constrain decoding.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dizi_tagger_apply(
    tagger: *const DiziTagger,
    score: *const DiziScore,
    use_rules: bool,
    out: *mut *mut DiziScore,
) -> DiziStatus {
    guard(|| {
        let t = &handle(tagger, "tagger")?.0;
        let s = &handle(score, "score")?.0;
        let rules = use_rules.then(|| RuleSet::default_rules(&TechniqueRegistry::default()));
        let tagged = technique_transfer(s, t, rules.as_ref()).map_err(fail)?;
        put(out, Box::into_raw(Box::new(DiziScore(tagged))))
    })
}
