use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    Relevance,
    Plausibility,
    ReferenceDirection,
    FactualAgreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionScope {
    /// Asked once per summary slot.
    Slot,
    /// Asked once per review.
    Review,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Benefit,
    Harm,
    NoDifference,
    CannotTell,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Benefit, Direction::Harm, Direction::NoDifference, Direction::CannotTell];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JudgmentValue {
    Ordinal(i64),
    Category(Direction),
}

impl Question {
    pub const ALL: [Question; 4] =
        [Question::Relevance, Question::Plausibility, Question::ReferenceDirection, Question::FactualAgreement];

    pub fn page(self) -> u8 {
        match self {
            Question::Relevance | Question::Plausibility => 1,
            Question::ReferenceDirection | Question::FactualAgreement => 2,
        }
    }

    pub fn scope(self) -> QuestionScope {
        match self {
            Question::ReferenceDirection => QuestionScope::Review,
            _ => QuestionScope::Slot,
        }
    }

    pub fn ordinal_range(self) -> Option<(i64, i64)> {
        match self {
            Question::Relevance => Some((1, 3)),
            Question::Plausibility | Question::FactualAgreement => Some((1, 5)),
            Question::ReferenceDirection => None,
        }
    }

    pub fn on_page(page: u8) -> impl Iterator<Item = Question> {
        Question::ALL.into_iter().filter(move |q| q.page() == page)
    }

    pub fn accepts(self, value: &JudgmentValue) -> bool {
        match (self.ordinal_range(), value) {
            (Some((lo, hi)), JudgmentValue::Ordinal(v)) => (lo..=hi).contains(v),
            (None, JudgmentValue::Category(_)) => true,
            _ => false,
        }
    }

    fn prompt(self) -> &'static str {
        match self {
            Question::Relevance => "How relevant is this summary to the review topic?",
            Question::Plausibility => "How fluent and semantically plausible is this summary?",
            Question::ReferenceDirection => "What direction of effect does the reference summary report?",
            Question::FactualAgreement => "How far does this summary agree with the reference summary's findings?",
        }
    }

    /// The schema shown to annotators.
    pub fn schema(self) -> Value {
        let mut v = json!({
            "id": self,
            "page": self.page(),
            "scope": self.scope(),
            "prompt": self.prompt(),
        });
        match self.ordinal_range() {
            Some((lo, hi)) => {
                v["kind"] = json!("ordinal");
                v["min"] = json!(lo);
                v["max"] = json!(hi);
            }
            None => {
                v["kind"] = json!("categorical");
                v["options"] = json!(Direction::ALL);
            }
        }
        v
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Question::Relevance => "relevance",
            Question::Plausibility => "plausibility",
            Question::ReferenceDirection => "reference_direction",
            Question::FactualAgreement => "factual_agreement",
        })
    }
}

impl std::str::FromStr for Question {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Question::ALL
            .into_iter()
            .find(|q| q.to_string() == s)
            .ok_or_else(|| format!("unknown question {s:?}"))
    }
}

impl fmt::Display for JudgmentValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JudgmentValue::Ordinal(v) => write!(f, "{v}"),
            JudgmentValue::Category(d) => write!(f, "{}", serde_json::to_value(d).unwrap().as_str().unwrap()),
        }
    }
}
