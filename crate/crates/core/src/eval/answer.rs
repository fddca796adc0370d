use serde::{Deserialize, Serialize};

/// Ground-truth label of a yes/no question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    #[serde(alias = "Yes", alias = "YES")]
    Yes,
    #[serde(alias = "No", alias = "NO")]
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryAnswer {
    Yes,
    No,
    Ambiguous,
}

impl BinaryAnswer {
    /// Ambiguous answers count as "no".
    pub fn scored(self) -> Label {
        match self {
            BinaryAnswer::Yes => Label::Yes,
            BinaryAnswer::No | BinaryAnswer::Ambiguous => Label::No,
        }
    }
}

/// Number of leading words inspected for a yes/no.
pub const ANSWER_WINDOW: usize = 5;

/// Looks for "yes" or "no" among the first five whitespace-separated words,
/// case-insensitively and ignoring punctuation. Finding both or neither is
/// ambiguous.
pub fn parse_binary_answer(text: &str) -> BinaryAnswer {
    let mut yes = false;
    let mut no = false;
    for word in text.split_whitespace().take(ANSWER_WINDOW) {
        let word: String = word
            .chars()
            .filter(|c| !c.is_ascii_punctuation())
            .flat_map(char::to_lowercase)
            .collect();
        match word.as_str() {
            "yes" => yes = true,
            "no" => no = true,
            _ => {}
        }
    }
    match (yes, no) {
        (true, false) => BinaryAnswer::Yes,
        (false, true) => BinaryAnswer::No,
        _ => BinaryAnswer::Ambiguous,
    }
}
