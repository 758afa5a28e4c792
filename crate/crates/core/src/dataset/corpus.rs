//! Sentence sources: plain-text corpus files and built-in generators.
//!
//! The built-in `en`/`fr`/`de` generators produce grammatical-looking news
//! style sentences from small lexicons with inflection, so that subword
//! training sees realistic morphology. The two `desk` languages are the
//! compact tasks used for end-to-end training on a CPU.

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::text::{preprocess_text, Language};
use crate::error::Result;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub language: Language,
    /// Plain-text file, one sentence per line. `None` selects the built-in
    /// generator for `language`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub max_strokes: usize,
    /// Lexicon of the `synthetic` language.
    #[serde(default)]
    pub lexicon: DeskLanguage,
}

impl CorpusSpec {
    /// Sentences from `path` when set, otherwise `count` generated ones.
    pub fn sentences(&self, count: usize, seed_value: u64) -> Result<Vec<String>> {
        match (&self.path, self.language) {
            (Some(path), language) => read_corpus(path, language),
            (None, Language::Synthetic) => Ok(desk_sentences(self.lexicon, count, seed_value)),
            (None, language) => Ok(builtin_sentences(language, count, seed_value)),
        }
    }
}

/// Reads a UTF-8 corpus, one sentence per line, preprocessing each line and
/// dropping the ones left empty.
pub fn read_corpus(path: &Path, language: Language) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(|l| preprocess_text(l, language)).filter(|l| !l.is_empty()).collect())
}

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().unwrap_or("")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

const EN_DET: &[&str] = &["the", "a", "this", "that", "every", "some", "no", "my", "your", "our", "their", "another"];
const EN_ADJ: &[&str] = &[
    "new", "old", "small", "large", "quiet", "strong", "early", "late", "public", "private", "local", "national",
    "modern", "ancient", "bright", "dark", "simple", "complex", "rapid", "slow", "careful", "famous", "hidden",
    "open", "final", "recent", "major", "minor", "green", "golden", "silent", "global", "political", "economic",
    "social", "digital", "natural", "difficult", "important", "serious",
];
const EN_NOUN: &[&str] = &[
    "government", "minister", "council", "market", "company", "report", "station", "village", "river", "bridge",
    "teacher", "student", "doctor", "garden", "window", "question", "answer", "attention", "election", "agreement",
    "country", "city", "family", "worker", "leader", "player", "season", "morning", "evening", "history", "museum",
    "festival", "budget", "policy", "industry", "engine", "network", "island", "mountain", "harbour", "story",
    "letter", "machine", "decision", "problem", "solution", "meeting", "journey", "voice", "language", "painter",
    "writer", "reader", "farmer", "officer", "hospital", "school", "court", "border", "weather",
];
const EN_VERB: &[&str] = &[
    "open", "close", "visit", "support", "follow", "report", "start", "finish", "develop", "explain", "consider",
    "discover", "return", "answer", "remember", "protect", "collect", "expect", "inform", "invite", "join", "launch",
    "listen", "offer", "plan", "present", "publish", "reach", "record", "reject", "restore", "review", "travel",
    "walk", "watch", "work", "question", "attend", "accept", "design",
];
const EN_ADV: &[&str] = &["today", "again", "quickly", "slowly", "together", "carefully", "yesterday", "soon", "later", "abroad"];
const EN_PREP: &[&str] = &["in", "near", "after", "before", "with", "without", "under", "across", "behind", "beyond"];
const EN_PRON: &[&str] = &["he", "she", "they", "we", "it", "you"];

fn en_past(v: &str) -> String {
    if v.ends_with('e') {
        format!("{v}d")
    } else if v == "plan" {
        "planned".into()
    } else {
        format!("{v}ed")
    }
}

fn en_ing(v: &str) -> String {
    if let Some(stem) = v.strip_suffix('e') {
        format!("{stem}ing")
    } else if v == "plan" {
        "planning".into()
    } else {
        format!("{v}ing")
    }
}

fn en_plural(n: &str) -> String {
    if let Some(stem) = n.strip_suffix('y') {
        if !stem.ends_with(['a', 'e', 'o', 'u']) {
            return format!("{stem}ies");
        }
    }
    if n.ends_with('s') || n.ends_with("ch") {
        format!("{n}es")
    } else {
        format!("{n}s")
    }
}

fn en_sentence<R: Rng>(rng: &mut R) -> String {
    let noun = |rng: &mut R| {
        let n = pick(rng, EN_NOUN);
        if rng.random_bool(0.3) { en_plural(n) } else { n.to_string() }
    };
    match rng.random_range(0..6) {
        0 => format!(
            "{} {} {} {}s {} the {}.",
            capitalize(pick(rng, EN_DET)),
            pick(rng, EN_ADJ),
            pick(rng, EN_NOUN),
            pick(rng, EN_VERB),
            pick(rng, EN_PREP),
            noun(rng)
        ),
        1 => format!("{} {} the {} {}.", capitalize(pick(rng, EN_PRON)), en_past(pick(rng, EN_VERB)), noun(rng), pick(rng, EN_ADV)),
        2 => format!("Is the {} {}?", pick(rng, EN_NOUN), pick(rng, EN_ADJ)),
        3 => format!("It's {} {}.", en_ing(pick(rng, EN_VERB)), noun(rng)),
        4 => format!(
            "The {} {} don't {} the {} {}.",
            pick(rng, EN_ADJ),
            en_plural(pick(rng, EN_NOUN)),
            pick(rng, EN_VERB),
            pick(rng, EN_NOUN),
            pick(rng, EN_ADV)
        ),
        _ => format!("Do you {} {} {}?", pick(rng, EN_VERB), pick(rng, EN_DET), noun(rng)),
    }
}

const FR_DET: &[&str] = &["le", "la", "un", "une", "ce", "cette", "notre", "votre", "chaque"];
const FR_NOUN: &[&str] = &[
    "gouvernement", "ministre", "conseil", "marche", "entreprise", "rapport", "gare", "village", "riviere", "pont",
    "professeur", "etudiant", "medecin", "jardin", "fenetre", "question", "reponse", "attention", "election",
    "accord", "pays", "ville", "famille", "travailleur", "saison", "matin", "soir", "histoire", "musee", "festival",
    "budget", "politique", "industrie", "moteur", "reseau", "ile", "montagne", "port", "lettre", "machine",
    "decision", "probleme", "solution", "reunion", "voyage", "voix", "langue", "peintre", "ecrivain", "lecteur",
];
const FR_ADJ: &[&str] = &[
    "nouveau", "ancien", "petit", "grand", "calme", "fort", "public", "prive", "local", "national", "moderne",
    "simple", "rapide", "lent", "celebre", "ouvert", "final", "recent", "majeur", "vert", "global", "social",
    "naturel", "difficile", "important", "serieux",
];
const FR_VERB: &[&str] = &[
    "ouvr", "ferm", "visit", "soutien", "port", "command", "present", "expliqu", "consider", "retourn", "cherch",
    "proteg", "collect", "attend", "invit", "lanc", "ecout", "propos", "planifi", "publi", "enregistr", "rejet",
    "restaur", "travaill", "regard", "accept", "dessin", "annonc", "demand", "parl",
];
const FR_END: &[&str] = &["e", "es", "ons", "ez", "ent", "ait", "aient", "era", "er", "ez-vous"];
const FR_PRON: &[&str] = &["il", "elle", "on", "nous", "vous", "ils", "elles"];
const FR_ADV: &[&str] = &["aujourd'hui", "encore", "vite", "lentement", "ensemble", "hier", "demain", "bientot"];

fn fr_sentence<R: Rng>(rng: &mut R) -> String {
    let verb = |rng: &mut R| format!("{}{}", pick(rng, FR_VERB), pick(rng, &FR_END[..9]));
    match rng.random_range(0..5) {
        0 => format!(
            "{} {} {} {} {} {}.",
            capitalize(pick(rng, FR_DET)),
            pick(rng, FR_NOUN),
            pick(rng, FR_ADJ),
            verb(rng),
            pick(rng, FR_DET),
            pick(rng, FR_NOUN)
        ),
        1 => format!("Est-ce {} {} ?", pick(rng, &["une", "un", "la", "le"]), pick(rng, FR_NOUN)),
        2 => format!("{} {} {} {}.", capitalize(pick(rng, FR_PRON)), verb(rng), pick(rng, FR_ADV), pick(rng, FR_ADJ)),
        3 => format!("Est-ce que {} {} {} {} ?", pick(rng, FR_PRON), verb(rng), pick(rng, FR_DET), pick(rng, FR_NOUN)),
        _ => format!("C'est {} {} {}.", pick(rng, FR_DET), pick(rng, FR_NOUN), pick(rng, FR_ADJ)),
    }
}

const DE_DET: &[&str] = &["der", "die", "das", "ein", "eine", "kein", "unser", "jeder", "dieser"];
const DE_NOUN: &[&str] = &[
    "Regierung", "Minister", "Rat", "Markt", "Firma", "Bericht", "Bahnhof", "Dorf", "Fluss", "Bruecke", "Lehrer",
    "Student", "Arzt", "Garten", "Fenster", "Frage", "Antwort", "Aufmerksamkeit", "Wahl", "Vertrag", "Land",
    "Stadt", "Familie", "Arbeiter", "Sommer", "Morgen", "Abend", "Geschichte", "Museum", "Haushalt", "Politik",
    "Industrie", "Motor", "Netzwerk", "Insel", "Berg", "Hafen", "Brief", "Maschine", "Entscheidung", "Loesung",
    "Sitzung", "Reise", "Stimme", "Sprache", "Maler", "Freiheit", "Wirtschaft", "Gesellschaft", "Zeitung",
];
const DE_ADJ: &[&str] = &[
    "neu", "alt", "klein", "gross", "ruhig", "stark", "frueh", "spaet", "offen", "modern", "einfach", "schnell",
    "langsam", "bekannt", "wichtig", "schwierig", "gruen", "ernst", "lokal", "sozial",
];
const DE_VERB: &[&str] = &[
    "oeffn", "schliess", "besuch", "unterstuetz", "folg", "bericht", "beginn", "erklaer", "entdeck", "antwort",
    "schuetz", "sammel", "erwart", "lad", "hoer", "biet", "plan", "zeig", "veroeffentlich", "erreich", "reis",
    "arbeit", "schau", "wart", "sag", "frag", "kauf", "lern", "spiel", "such",
];
const DE_END: &[&str] = &["e", "st", "t", "en", "te", "ten", "et"];
const DE_PRON: &[&str] = &["er", "sie", "es", "wir", "ihr", "man"];
const DE_ADV: &[&str] = &["heute", "wieder", "schnell", "langsam", "zusammen", "gestern", "morgen", "bald", "doch", "noch"];

fn de_sentence<R: Rng>(rng: &mut R) -> String {
    let verb = |rng: &mut R| format!("{}{}", pick(rng, DE_VERB), pick(rng, DE_END));
    let adj = |rng: &mut R| format!("{}{}", pick(rng, DE_ADJ), pick(rng, &["e", "en", "er", "es"]));
    match rng.random_range(0..5) {
        0 => format!(
            "{} {} {} {} {} {}.",
            capitalize(pick(rng, DE_DET)),
            adj(rng),
            pick(rng, DE_NOUN),
            verb(rng),
            pick(rng, DE_ADV),
            pick(rng, DE_NOUN)
        ),
        1 => format!("Es ist {} {}.", pick(rng, DE_ADV), pick(rng, DE_NOUN)),
        2 => format!("{} {} {} {}.", capitalize(pick(rng, DE_PRON)), verb(rng), pick(rng, DE_DET), pick(rng, DE_NOUN)),
        3 => format!("Ist {} {} {}?", pick(rng, DE_DET), pick(rng, DE_NOUN), pick(rng, DE_ADJ)),
        _ => format!("{} {} {} {}!", capitalize(pick(rng, DE_ADV)), verb(rng), pick(rng, DE_PRON), adj(rng)),
    }
}

/// The twelve glyph classes of the compact end-to-end task.
pub const DESK_ALPHABET: &str = "acdehilnorst";

const DESK_PRIMARY: &[&str] = &[
    "a", "and", "the", "then", "there", "these", "this", "that", "in", "on", "is", "it", "its", "to", "no", "not",
    "one", "old", "cold", "hot", "red", "sad", "tea", "sea", "rain", "salt", "dish", "hand", "ice", "nice", "ride",
    "tide", "sand", "stone", "tree", "rose", "nose", "hole", "hill", "lion", "coat", "note", "door", "chair",
    "rich", "each", "hear", "near", "dear", "card", "hard", "road", "lead", "cash", "chat", "echo", "hotel",
    "radio", "ocean", "island", "idea", "second", "listen", "silent", "stairs", "direct",
];

const DESK_SECONDARY: &[&str] = &[
    "le", "la", "les", "de", "des", "et", "non", "rien", "sel", "sol", "lit", "nid", "soir", "noir", "soit",
    "chien", "roi", "reine", "sec", "tard", "toit", "train", "ici", "coin", "dent", "dos", "lin", "ail",
    "sans", "son", "ses", "cette", "tete", "taire", "loin", "rond", "riche", "donc", "elle", "ile", "idee",
    "ordre", "sentier", "crete", "sorte", "celeste", "tonne", "chance", "entre", "litre", "annee",
];

/// The compact task languages: same glyph alphabet, disjoint lexicons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeskLanguage {
    #[default]
    Primary,
    Secondary,
}

impl DeskLanguage {
    pub fn lexicon(self) -> &'static [&'static str] {
        match self {
            DeskLanguage::Primary => DESK_PRIMARY,
            DeskLanguage::Secondary => DESK_SECONDARY,
        }
    }
}

/// A sentence of 1–4 lexicon words ending in a period.
pub fn desk_sentence<R: Rng>(language: DeskLanguage, rng: &mut R) -> String {
    let words = rng.random_range(1..=4);
    let lex = language.lexicon();
    let mut s = (0..words).map(|_| pick(rng, lex)).collect::<Vec<_>>().join(" ");
    s.push('.');
    s
}

/// Deterministic built-in corpus of `count` sentences.
pub fn builtin_sentences(language: Language, count: usize, seed_value: u64) -> Vec<String> {
    (0..count)
        .map(|i| {
            let mut rng = seed::rng(&[seed_value, language as u64, i as u64]);
            let raw = match language {
                Language::En => en_sentence(&mut rng),
                Language::Fr => fr_sentence(&mut rng),
                Language::De => de_sentence(&mut rng),
                Language::Synthetic => desk_sentence(DeskLanguage::Primary, &mut rng),
            };
            preprocess_text(&raw, language)
        })
        .collect()
}

pub fn desk_sentences(language: DeskLanguage, count: usize, seed_value: u64) -> Vec<String> {
    (0..count)
        .map(|i| desk_sentence(language, &mut seed::rng(&[seed_value, 0xde5c, language as u64, i as u64])))
        .collect()
}

/// Mixed `en`/`fr`/`de` corpus of `count` sentences, interleaved by language.
pub fn multilingual_sentences(count: usize, seed_value: u64) -> Vec<String> {
    let langs = [Language::En, Language::Fr, Language::De];
    let per = count.div_ceil(3);
    let pools: Vec<Vec<String>> = langs.iter().map(|&l| builtin_sentences(l, per, seed_value)).collect();
    (0..count).map(|i| pools[i % 3][i / 3].clone()).collect()
}
