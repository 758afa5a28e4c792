use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fr,
    De,
    Synthetic,
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "fr" => Ok(Language::Fr),
            "de" => Ok(Language::De),
            "synthetic" => Ok(Language::Synthetic),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

/// Characters for which the built-in glyph bank has letterforms.
pub fn has_glyph(c: char) -> bool {
    c.is_ascii_alphabetic() || ".,?!-'".contains(c)
}

fn substitute(c: char, language: Language) -> Option<&'static str> {
    let german = language == Language::De;
    Some(match c {
        'ß' => "ss",
        'ä' if german => "ae",
        'ö' if german => "oe",
        'ü' if german => "ue",
        'Ä' if german => "Ae",
        'Ö' if german => "Oe",
        'Ü' if german => "Ue",
        'é' | 'è' | 'ê' | 'ë' => "e",
        'É' | 'È' | 'Ê' | 'Ë' => "E",
        'à' | 'â' | 'ä' | 'á' => "a",
        'À' | 'Â' | 'Ä' | 'Á' => "A",
        'î' | 'ï' | 'í' => "i",
        'Î' | 'Ï' | 'Í' => "I",
        'ô' | 'ö' | 'ó' => "o",
        'Ô' | 'Ö' | 'Ó' => "O",
        'ù' | 'û' | 'ü' | 'ú' => "u",
        'Ù' | 'Û' | 'Ü' | 'Ú' => "U",
        'ç' => "c",
        'Ç' => "C",
        'ÿ' => "y",
        'ñ' => "n",
        'œ' => "oe",
        'Œ' => "Oe",
        'æ' => "ae",
        'Æ' => "Ae",
        '’' | '‘' | '`' => "'",
        '–' | '—' => "-",
        _ => return None,
    })
}

/// Maps text onto the glyph alphabet: accents are folded, `ß → ss`,
/// unsupported characters dropped and whitespace collapsed.
pub fn preprocess_text(text: &str, language: Language) -> String {
    let mut mapped = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_whitespace() {
            mapped.push(' ');
        } else if has_glyph(c) {
            mapped.push(c);
        } else if let Some(s) = substitute(c, language) {
            mapped.push_str(s);
        }
    }
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}
