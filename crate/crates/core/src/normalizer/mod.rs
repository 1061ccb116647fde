//! Text normalization: Turkish casing, punctuation and accent removal,
//! deasciification, numerals to words, and context-aware spelling repair.

mod deascii;
mod number;
mod spelling;

pub use deascii::{deasciify, DeasciiTable, DEFAULT_RADIUS, SHIPPED_WORDS};
pub use number::{integer_to_words, number_to_words};
pub use spelling::{correct_spelling, FrequencyDictionary, SpellingConfig, SpellingModel, BACKOFF_ALPHA};

use unicode_general_category::{get_general_category, GeneralCategory};

/// Lowercase with Turkish dotted/dotless i.
pub fn lower_case(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            'I' => out.push('ı'),
            'İ' => out.push('i'),
            _ => out.extend(c.to_lowercase()),
        }
    }
    out
}

/// Uppercase with Turkish dotted/dotless i.
pub fn upper_case(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            'i' => out.push('İ'),
            'ı' => out.push('I'),
            _ => out.extend(c.to_uppercase()),
        }
    }
    out
}

pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Drop every Unicode punctuation character.
pub fn remove_punctuation(text: &str) -> String {
    text.chars().filter(|c| !is_punctuation(*c)).collect()
}

fn strip_accent(c: char) -> char {
    match c {
        'ç' => 'c',
        'ğ' => 'g',
        'ı' => 'i',
        'ö' => 'o',
        'ş' => 's',
        'ü' => 'u',
        'â' => 'a',
        'î' => 'i',
        'û' => 'u',
        'Ç' => 'C',
        'Ğ' => 'G',
        'İ' => 'I',
        'Ö' => 'O',
        'Ş' => 'S',
        'Ü' => 'U',
        'Â' => 'A',
        'Î' => 'I',
        'Û' => 'U',
        _ => c,
    }
}

/// Map Turkish accented letters (and circumflexed vowels) to ASCII.
pub fn remove_accent_marks(text: &str) -> String {
    text.chars().map(strip_accent).collect()
}
