use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{LlmRole, TokenUsage};

/// USD per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rates {
    #[serde(with = "rust_decimal::serde::str")]
    pub input_per_1k: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub output_per_1k: Decimal,
}

impl Rates {
    pub fn new(input_per_1k: &str, output_per_1k: &str) -> Result<Self, String> {
        let parse = |s: &str| Decimal::from_str(s).map_err(|e| format!("bad rate '{s}': {e}"));
        let r = Rates {
            input_per_1k: parse(input_per_1k)?,
            output_per_1k: parse(output_per_1k)?,
        };
        if r.input_per_1k <= Decimal::ZERO || r.output_per_1k <= Decimal::ZERO {
            return Err("rates must be positive".into());
        }
        Ok(r)
    }

    pub fn cost(&self, usage: TokenUsage) -> Decimal {
        let k = Decimal::from(1000);
        self.input_per_1k * Decimal::from(usage.input_tokens) / k
            + self.output_per_1k * Decimal::from(usage.output_tokens) / k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceTable {
    pub reasoner: Rates,
    pub editor: Rates,
}

impl Default for PriceTable {
    /// DeepSeek list prices: R1 as Reasoner, V3 as Editor.
    fn default() -> Self {
        PriceTable {
            reasoner: Rates::new("0.00055", "0.0022").expect("static rates"),
            editor: Rates::new("0.00021", "0.00082").expect("static rates"),
        }
    }
}

impl PriceTable {
    pub fn rates(&self, role: LlmRole) -> &Rates {
        match role {
            LlmRole::Reasoner => &self.reasoner,
            LlmRole::Editor => &self.editor,
        }
    }
}

/// Exact sum of per-call costs.
pub fn compute_cost<I>(usages: I, prices: &PriceTable) -> Decimal
where
    I: IntoIterator<Item = (LlmRole, TokenUsage)>,
{
    usages
        .into_iter()
        .map(|(role, u)| prices.rates(role).cost(u))
        .sum()
}

/// A dollar amount rendered to six decimal places.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Usd(#[serde(with = "rust_decimal::serde::str")] pub Decimal);

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${:.6}", self.0)
    }
}
