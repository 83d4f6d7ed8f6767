//! Entity-name matching tolerant of typos and common abbreviations.

const ABBREVIATIONS: [(&str, &[&str]); 4] = [
    ("dc", &["datacenter", "datacentre"]),
    ("sg", &["servergroup"]),
    ("lib", &["library"]),
    ("lab", &["laboratory"]),
];

/// Lowercase alphanumeric tokens, splitting letter runs from digit runs.
fn tokens(s: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut digit = false;
    for c in s.chars().flat_map(char::to_lowercase) {
        if !c.is_ascii_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if !cur.is_empty() && c.is_ascii_digit() != digit {
            out.push(std::mem::take(&mut cur));
        }
        digit = c.is_ascii_digit();
        cur.push(c);
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn normalize(s: &str) -> String {
    tokens(s).concat()
}

/// The normalized name plus every spelling with abbreviations expanded.
fn forms(name: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    for t in tokens(name) {
        let alts: Vec<&str> = match ABBREVIATIONS.iter().find(|(a, _)| *a == t) {
            Some((_, full)) => std::iter::once(t.as_str()).chain(full.iter().copied()).collect(),
            None => vec![t.as_str()],
        };
        out = out.iter().flat_map(|p| alts.iter().map(move |a| format!("{p}{a}"))).collect();
    }
    out
}

fn numbers(s: &str) -> Vec<String> {
    tokens(s).into_iter().filter(|t| t.starts_with(|c: char| c.is_ascii_digit())).collect()
}

/// Largest edit distance accepted for a candidate form of this length.
fn tolerance(len: usize) -> usize {
    (len / 3).min(2)
}

/// Edit distance from `text` to the closest spelling of `name`.
pub fn distance(name: &str, text: &str) -> usize {
    let t = normalize(text);
    forms(name).iter().map(|f| strsim::levenshtein(f, &t)).min().unwrap_or(usize::MAX)
}

/// Resolves `text` to one of `names`: an exact case-insensitive match if
/// any, otherwise the unique closest name within the typo tolerance.
pub fn resolve<'a>(names: impl IntoIterator<Item = &'a str>, text: &str) -> Option<&'a str> {
    let names: Vec<&str> = names.into_iter().collect();
    if let Some(n) = names.iter().find(|n| n.eq_ignore_ascii_case(text.trim())) {
        return Some(n);
    }
    let t = normalize(text);
    if t.is_empty() {
        return None;
    }
    let nums = numbers(text);
    let mut best: Option<(usize, &str)> = None;
    let mut tied = false;
    for n in names {
        if numbers(n) != nums {
            continue;
        }
        let Some(d) = forms(n)
            .iter()
            .map(|f| (strsim::levenshtein(f, &t), f.len()))
            .filter(|&(d, len)| d <= tolerance(len))
            .map(|(d, _)| d)
            .min()
        else {
            continue;
        };
        match best {
            Some((b, _)) if d > b => {}
            Some((b, _)) if d == b => tied = true,
            _ => {
                best = Some((d, n));
                tied = false;
            }
        }
    }
    best.filter(|_| !tied).map(|(_, n)| n)
}
