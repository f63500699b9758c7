//! A small synthetic four-column corpus in which every word determines its
//! own POS, chunk and NER label.
//!
//! Sentences follow `NP VP NP [PP NP] .` where an NP is one of
//! `noun [adjective]`, `family-name given-name`, `location`, or the
//! two-word organization `Dai_hoc Bach_Khoa`.

use crate::data::{Sentence, Token};
use crate::rng::Rng;

pub const TOY_SENTENCES: usize = 50;
pub const TOY_TRAIN: usize = 40;

/// `(word, pos, chunk, ner)` for all 30 words.
pub const TOY_LEXICON: [(&str, &str, &str, &str); 30] = [
    ("nha", "N", "B-NP", "O"),
    ("nsach", "N", "B-NP", "O"),
    ("ntruong", "N", "B-NP", "O"),
    ("nban", "N", "B-NP", "O"),
    ("nbut", "N", "B-NP", "O"),
    ("nviec", "N", "B-NP", "O"),
    ("adep", "A", "I-NP", "O"),
    ("atot", "A", "I-NP", "O"),
    ("amoi", "A", "I-NP", "O"),
    ("acu", "A", "I-NP", "O"),
    ("vla", "V", "B-VP", "O"),
    ("vdi", "V", "B-VP", "O"),
    ("vhoc", "V", "B-VP", "O"),
    ("vlam", "V", "B-VP", "O"),
    ("vthay", "V", "B-VP", "O"),
    ("eo", "E", "B-PP", "O"),
    ("etai", "E", "B-PP", "O"),
    ("ecua", "E", "B-PP", "O"),
    ("Nguyen", "Np", "B-NP", "B-PER"),
    ("Tran", "Np", "B-NP", "B-PER"),
    ("Le", "Np", "B-NP", "B-PER"),
    ("Nam", "Np", "I-NP", "I-PER"),
    ("Lan", "Np", "I-NP", "I-PER"),
    ("Hung", "Np", "I-NP", "I-PER"),
    ("Hanoi", "Np", "B-NP", "B-LOC"),
    ("Hue", "Np", "B-NP", "B-LOC"),
    ("Saigon", "Np", "B-NP", "B-LOC"),
    ("Dai_hoc", "N", "B-NP", "B-ORG"),
    ("Bach_Khoa", "Np", "I-NP", "I-ORG"),
    (".", "CH", "O", "O"),
];

fn token(word: &str) -> Token {
    let (w, pos, chunk, ner) = *TOY_LEXICON.iter().find(|e| e.0 == word).expect("toy word");
    Token {
        word: w.to_string(),
        pos: Some(pos.to_string()),
        chunk: Some(chunk.to_string()),
        ner: Some(ner.to_string()),
    }
}

fn pick<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    words[rng.below(words.len())]
}

fn noun_phrase(rng: &mut Rng, out: &mut Vec<Token>) {
    match rng.below(4) {
        0 => {
            out.push(token(pick(rng, &["nha", "nsach", "ntruong", "nban", "nbut", "nviec"])));
            if rng.bernoulli(0.5) {
                out.push(token(pick(rng, &["adep", "atot", "amoi", "acu"])));
            }
        }
        1 => {
            out.push(token(pick(rng, &["Nguyen", "Tran", "Le"])));
            out.push(token(pick(rng, &["Nam", "Lan", "Hung"])));
        }
        2 => out.push(token(pick(rng, &["Hanoi", "Hue", "Saigon"]))),
        _ => {
            out.push(token("Dai_hoc"));
            out.push(token("Bach_Khoa"));
        }
    }
}

/// `(train, dev)`: 40 and 10 sentences, deterministic in `seed`.
pub fn make_toy_corpus(seed: u64) -> (Vec<Sentence>, Vec<Sentence>) {
    let mut rng = Rng::new(seed);
    let mut sentences = Vec::with_capacity(TOY_SENTENCES);
    for _ in 0..TOY_SENTENCES {
        let mut tokens = Vec::new();
        noun_phrase(&mut rng, &mut tokens);
        tokens.push(token(pick(&mut rng, &["vla", "vdi", "vhoc", "vlam", "vthay"])));
        noun_phrase(&mut rng, &mut tokens);
        if rng.bernoulli(0.5) {
            tokens.push(token(pick(&mut rng, &["eo", "etai", "ecua"])));
            noun_phrase(&mut rng, &mut tokens);
        }
        tokens.push(token("."));
        sentences.push(Sentence::new(tokens));
    }
    let dev = sentences.split_off(TOY_TRAIN);
    (sentences, dev)
}
