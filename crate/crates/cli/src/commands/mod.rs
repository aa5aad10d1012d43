pub mod annotate;
pub mod corpus;
pub mod eval;
pub mod pipeline;
pub mod report;
pub mod stats;

use serde_json::Value;

/// A command's summary, printable as text or JSON.
pub struct Output {
    pub text: String,
    pub json: Value,
}

impl Output {
    pub fn new(text: impl Into<String>, json: Value) -> Self {
        Output { text: text.into(), json }
    }

    pub fn print(&self, json: bool) {
        if json {
            println!("{}", serde_json::to_string_pretty(&self.json).expect("summary serializes"));
        } else if !self.text.is_empty() {
            println!("{}", self.text.trim_end());
        }
    }
}

/// Mean of `xs`, or NaN when empty.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
