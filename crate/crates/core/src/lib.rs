//! Numbered-notation (jianpu) toolkit for Dizi music: a plain-text score
//! format, MusicXML export, note tokenization, style classification,
//! playing-technique tagging, and classifier-guided style transfer.

pub mod error;
pub mod notation;
pub mod pitch;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub mod features;
pub mod musicxml;
pub mod represent;
pub mod classify;
pub mod optim;
pub mod tagger;
pub mod synth;
pub mod transfer;
pub mod corpus;
