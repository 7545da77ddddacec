use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Conjunction on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TNorm {
    #[default]
    Product,
    Minimum,
    Lukasiewicz,
}

impl TNorm {
    pub const ALL: [TNorm; 3] = [TNorm::Product, TNorm::Minimum, TNorm::Lukasiewicz];

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            TNorm::Product => a * b,
            TNorm::Minimum => a.min(b),
            TNorm::Lukasiewicz => (a - (1.0 - b)).max(0.0),
        }
    }

    /// Left fold with identity 1.
    pub fn fold(self, values: impl IntoIterator<Item = f64>) -> f64 {
        values.into_iter().fold(1.0, |acc, v| self.apply(acc, v))
    }
}

impl fmt::Display for TNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TNorm::Product => "product",
            TNorm::Minimum => "minimum",
            TNorm::Lukasiewicz => "lukasiewicz",
        })
    }
}

impl FromStr for TNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "product" => Ok(TNorm::Product),
            "minimum" | "min" => Ok(TNorm::Minimum),
            "lukasiewicz" => Ok(TNorm::Lukasiewicz),
            other => Err(format!("unknown t-norm `{other}`")),
        }
    }
}
