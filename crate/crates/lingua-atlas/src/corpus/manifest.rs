//! The line-oriented manifest format.
//!
//! ```text
//! lingua-atlas-manifest v1
//! L<TAB>id<TAB>name<TAB>lat<TAB>lon<TAB>source=path;source=path...
//! U<TAB>language_id<TAB>relative/wav/path<TAB>train|test
//! ```
//!
//! Classification paths are comma-joined label lists in Ethnologue style
//! (`Cariban, Guianan, Macro-Tupi`). Language lines must precede the
//! utterance lines that reference them; the canonical writer puts all `L`
//! lines first.

use std::collections::{BTreeMap, HashSet};

use super::{
    CorpusError, CorpusManifest, LanguageId, LanguageRecord, Split, TreeSource, UtteranceEntry,
    DEFAULT_SAMPLE_RATE,
};
use crate::familytree::parse_classification;

pub const HEADER: &str = "lingua-atlas-manifest v1";

fn err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse(text: &str) -> Result<CorpusManifest, CorpusError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == HEADER => {}
        Some((_, first)) => {
            return Err(err(1, format!("expected header {HEADER:?}, got {first:?}")))
        }
        None => return Err(err(1, "empty manifest")),
    }

    let mut languages: Vec<LanguageRecord> = Vec::new();
    let mut utterances: Vec<UtteranceEntry> = Vec::new();
    let mut ids: HashSet<LanguageId> = HashSet::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        match fields[0] {
            "L" => {
                if fields.len() != 6 {
                    return Err(err(
                        line_no,
                        format!("L line needs 6 fields, got {}", fields.len()),
                    ));
                }
                let id = LanguageId::new(fields[1]).map_err(|e| err(line_no, e.to_string()))?;
                if !ids.insert(id.clone()) {
                    return Err(err(line_no, format!("duplicate language id {id}")));
                }
                let lat: f64 = fields[3]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad latitude {:?}", fields[3])))?;
                let lon: f64 = fields[4]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad longitude {:?}", fields[4])))?;
                let classifications =
                    parse_classifications(fields[5]).map_err(|m| err(line_no, m))?;
                let record = LanguageRecord {
                    id,
                    name: fields[2].to_owned(),
                    lat,
                    lon,
                    classifications,
                    phonemes: None,
                };
                record.validate().map_err(|e| err(line_no, e.to_string()))?;
                languages.push(record);
            }
            "U" => {
                if fields.len() != 4 {
                    return Err(err(
                        line_no,
                        format!("U line needs 4 fields, got {}", fields.len()),
                    ));
                }
                let language_id =
                    LanguageId::new(fields[1]).map_err(|e| err(line_no, e.to_string()))?;
                if !ids.contains(&language_id) {
                    return Err(err(
                        line_no,
                        format!("utterance references undeclared language id {language_id}"),
                    ));
                }
                let path = fields[2];
                if path.is_empty() || path.starts_with('/') {
                    return Err(err(
                        line_no,
                        format!("wav path must be relative and non-empty, got {path:?}"),
                    ));
                }
                let split = Split::parse(fields[3]).ok_or_else(|| {
                    err(
                        line_no,
                        format!("split must be train|test, got {:?}", fields[3]),
                    )
                })?;
                utterances.push(UtteranceEntry {
                    language_id,
                    path: path.to_owned(),
                    split,
                });
            }
            tag => return Err(err(line_no, format!("unknown line tag {tag:?}"))),
        }
    }

    let manifest = CorpusManifest {
        languages,
        utterances,
        sample_rate: DEFAULT_SAMPLE_RATE,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn parse_classifications(field: &str) -> Result<BTreeMap<TreeSource, Vec<String>>, String> {
    let mut map = BTreeMap::new();
    if field.is_empty() {
        return Ok(map);
    }
    for part in field.split(';') {
        let (source_name, path_str) = part
            .split_once('=')
            .ok_or_else(|| format!("classification entry {part:?} is missing '='"))?;
        let source = TreeSource::parse(source_name)
            .ok_or_else(|| format!("unknown tree source {source_name:?}"))?;
        let path = parse_classification(path_str).map_err(|e| e.to_string())?;
        if map.insert(source, path).is_some() {
            return Err(format!("tree source {source_name} listed twice"));
        }
    }
    Ok(map)
}

pub fn write(manifest: &CorpusManifest) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for lang in &manifest.languages {
        let classifications = lang
            .classifications
            .iter()
            .map(|(source, path)| format!("{}={}", source.name(), path.join(", ")))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "L\t{}\t{}\t{}\t{}\t{}\n",
            lang.id, lang.name, lang.lat, lang.lon, classifications
        ));
    }
    for utt in &manifest.utterances {
        out.push_str(&format!(
            "U\t{}\t{}\t{}\n",
            utt.language_id,
            utt.path,
            utt.split.name()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "lingua-atlas-manifest v1\n\
        L\tAAAAAA\tAlpha\t1.5\t-3.25\tethnologue=Cariban, Guianan;wikipedia=Cariban\n\
        L\tBBBBBB\tBeta\t-10\t20\tethnologue=Otomanguean\n\
        U\tAAAAAA\taudio/AAAAAA/utt000.wav\ttrain\n\
        U\tAAAAAA\taudio/AAAAAA/utt001.wav\ttest\n\
        U\tBBBBBB\taudio/BBBBBB/utt000.wav\ttrain\n\
        U\tBBBBBB\taudio/BBBBBB/utt001.wav\ttest\n";

    #[test]
    fn parses_minimal_manifest() {
        let m = parse(SAMPLE).unwrap();
        assert_eq!(m.languages.len(), 2);
        assert_eq!(m.utterances.len(), 4);
        assert_eq!(
            m.languages[0].classifications[&TreeSource::Ethnologue],
            vec!["Cariban".to_owned(), "Guianan".to_owned()]
        );
    }

    #[test]
    fn round_trips_canonical_form() {
        let m = parse(SAMPLE).unwrap();
        assert_eq!(write(&m), SAMPLE);
        let again = parse(&write(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_undeclared_utterance_id() {
        let bad = format!("{SAMPLE}U\tZZZZZZ\taudio/x.wav\ttrain\n");
        match parse(&bad) {
            Err(CorpusError::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("ZZZZZZ"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_latitude_with_line() {
        let bad = "lingua-atlas-manifest v1\nL\tAAAAAA\tAlpha\t91.0\t0\t\n";
        match parse(bad) {
            Err(CorpusError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("91"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_unknown_tag() {
        assert!(parse("not-a-manifest\n").is_err());
        assert!(parse("lingua-atlas-manifest v1\nX\tfoo\n").is_err());
    }

    #[test]
    fn rejects_duplicate_language_lines() {
        let bad = "lingua-atlas-manifest v1\n\
            L\tAAAAAA\tAlpha\t0\t0\t\n\
            L\tAAAAAA\tAlpha\t0\t0\t\n";
        match parse(bad) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn classification_entries_keep_source_paths_separate() {
        let m = parse(SAMPLE).unwrap();
        let wiki = &m.languages[0].classifications[&TreeSource::Wikipedia];
        assert_eq!(wiki, &vec!["Cariban".to_owned()]);
        assert!(!m.languages[1]
            .classifications
            .contains_key(&TreeSource::Wikipedia));
    }
}
