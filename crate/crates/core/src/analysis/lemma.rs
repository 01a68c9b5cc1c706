//! Deterministic English lemmatizer: an irregular-form table, then suffix rules.

const IRREGULAR: &[(&str, &str)] = &[
    ("am", "be"),
    ("are", "be"),
    ("is", "be"),
    ("was", "be"),
    ("were", "be"),
    ("been", "be"),
    ("being", "be"),
    ("has", "have"),
    ("had", "have"),
    ("having", "have"),
    ("did", "do"),
    ("does", "do"),
    ("done", "do"),
    ("went", "go"),
    ("gone", "go"),
    ("goes", "go"),
    ("came", "come"),
    ("saw", "see"),
    ("seen", "see"),
    ("took", "take"),
    ("taken", "take"),
    ("gave", "give"),
    ("given", "give"),
    ("got", "get"),
    ("gotten", "get"),
    ("made", "make"),
    ("said", "say"),
    ("told", "tell"),
    ("knew", "know"),
    ("known", "know"),
    ("thought", "think"),
    ("felt", "feel"),
    ("kept", "keep"),
    ("left", "leave"),
    ("lost", "lose"),
    ("found", "find"),
    ("brought", "bring"),
    ("bought", "buy"),
    ("ran", "run"),
    ("began", "begin"),
    ("begun", "begin"),
    ("ate", "eat"),
    ("eaten", "eat"),
    ("slept", "sleep"),
    ("dug", "dig"),
    ("fought", "fight"),
    ("hid", "hide"),
    ("hidden", "hide"),
    ("stood", "stand"),
    ("sent", "send"),
    ("spoke", "speak"),
    ("spoken", "speak"),
    ("wrote", "write"),
    ("written", "write"),
    ("built", "build"),
    ("rebuilt", "rebuild"),
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("people", "person"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("mice", "mouse"),
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// `run` from `runn`: undo consonant doubling before -ing/-ed.
fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z' | b'f') {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

/// Lowercase, strip non-alphabetic characters, then map to a lemma.
pub fn lemmatize(word: &str) -> String {
    let w: String = word
        .chars()
        .filter(|c| c.is_alphabetic() || *c == '\'')
        .flat_map(char::to_lowercase)
        .collect();
    let w = w.trim_end_matches("'s").trim_matches('\'').to_string();
    if let Some((_, lemma)) = IRREGULAR.iter().find(|(form, _)| *form == w) {
        return lemma.to_string();
    }
    let n = w.len();
    if n <= 3 {
        return w;
    }
    if let Some(stem) = w.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = w.strip_suffix("ied") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if stem.len() >= 3 && stem.bytes().any(is_vowel) {
            return undouble(stem);
        }
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if stem.len() >= 3 && stem.bytes().any(is_vowel) {
            if stem.ends_with('e') {
                return stem.to_string();
            }
            return undouble(stem);
        }
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if w.ends_with(suffix) {
            return w[..n - 2].to_string();
        }
    }
    if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return w[..n - 1].to_string();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        for (w, l) in [
            ("running", "run"),
            ("Running,", "run"),
            ("ran", "run"),
            ("parents", "parent"),
            ("stories", "story"),
            ("worried", "worry"),
            ("hoped", "hop"),
            ("hoping", "hop"),
            ("hauled", "haul"),
            ("churches", "church"),
            ("glass", "glass"),
            ("dug", "dig"),
            ("mother's", "mother"),
            ("was", "be"),
            ("bus", "bus"),
        ] {
            assert_eq!(lemmatize(w), l, "{w}");
        }
    }

    #[test]
    fn idempotent_on_lemmas() {
        for w in ["run", "parent", "story", "church", "dig", "be", "fence"] {
            assert_eq!(lemmatize(&lemmatize(w)), lemmatize(w));
        }
    }
}
