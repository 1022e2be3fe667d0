//! Presidential-debate speeches used to train topic embeddings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Democrat,
    Republican,
}

impl Party {
    pub fn as_str(self) -> &'static str {
        match self {
            Party::Democrat => "democrat",
            Party::Republican => "republican",
        }
    }

    fn parse(s: &str) -> Option<Party> {
        match s.trim().to_ascii_lowercase().as_str() {
            "democrat" | "democratic" => Some(Party::Democrat),
            "republican" => Some(Party::Republican),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateSpeech {
    pub id: String,
    pub speaker: String,
    pub party: Party,
    pub text: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartyCounts {
    pub democrat: usize,
    pub republican: usize,
}

pub fn party_counts(speeches: &[DebateSpeech]) -> PartyCounts {
    let mut counts = PartyCounts::default();
    for s in speeches {
        match s.party {
            Party::Democrat => counts.democrat += 1,
            Party::Republican => counts.republican += 1,
        }
    }
    counts
}

#[derive(Deserialize)]
struct RawSpeech {
    id: Option<String>,
    speaker: Option<String>,
    party: Option<String>,
    text: Option<String>,
}

pub fn parse_debates(text: &str) -> Result<Vec<DebateSpeech>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSpeech = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        let field = |v: Option<String>, name: &str| {
            v.ok_or_else(|| Error::MalformedRecord {
                line: line_no,
                reason: format!("missing field `{name}`"),
            })
        };
        let id = field(raw.id, "id")?;
        let speaker = field(raw.speaker, "speaker")?;
        let party_str = field(raw.party, "party")?;
        let text = field(raw.text, "text")?;
        let party = Party::parse(&party_str).ok_or(Error::UnknownParty {
            line: line_no,
            party: party_str,
        })?;
        if text.trim().is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                reason: "blank text".into(),
            });
        }
        out.push(DebateSpeech {
            id,
            speaker,
            party,
            text,
        });
    }
    Ok(out)
}

pub fn load_debates(path: &Path) -> Result<Vec<DebateSpeech>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let speeches = parse_debates(&text)?;
    let counts = party_counts(&speeches);
    log::info!(
        "loaded {} speeches ({} democrat, {} republican)",
        speeches.len(),
        counts.democrat,
        counts.republican
    );
    Ok(speeches)
}

pub fn debates_to_jsonl(speeches: &[DebateSpeech]) -> String {
    speeches
        .iter()
        .map(|s| serde_json::to_string(s).expect("speech serializes") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_speech_fixture() {
        let text = r#"{"id":"1","speaker":"A","party":"Democrat","text":"healthcare for all"}
{"id":"2","speaker":"B","party":"republican","text":"secure the border"}
{"id":"3","speaker":"C","party":"DEMOCRAT","text":"climate action"}"#;
        let s = parse_debates(text).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(party_counts(&s), PartyCounts { democrat: 2, republican: 1 });
        assert_eq!(parse_debates(&debates_to_jsonl(&s)).unwrap(), s);
    }

    #[test]
    fn independent_is_unknown_party() {
        let text = r#"{"id":"1","speaker":"A","party":"independent","text":"x"}"#;
        assert!(matches!(
            parse_debates(text),
            Err(Error::UnknownParty { line: 1, party }) if party == "independent"
        ));
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(
            parse_debates(r#"{"id":"1","party":"democrat","text":"x"}"#),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
        assert!(matches!(
            parse_debates("\n{\"id\":\"1\",\"speaker\":\"A\",\"party\":\"democrat\",\"text\":\" \"}"),
            Err(Error::MalformedRecord { line: 2, .. })
        ));
    }
}
