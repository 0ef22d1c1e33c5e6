use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rdstab_core::env::{check_irreducible, EnvironmentChain, SUM_TOLERANCE};
use rdstab_core::kelly::MarketModel;
use serde::{Deserialize, Serialize};

/// Model document as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub states: usize,
    pub transition: Vec<Vec<f64>>,
    pub seed: u64,
    pub market: Option<MarketConfig>,
    /// Initial relative wealth of the rival group.
    #[serde(default = "default_initial")]
    pub initial: f64,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(rename = "K")]
    pub assets: usize,
    pub r: f64,
    pub dividends: Vec<Vec<f64>>,
    pub rival: Vec<Vec<f64>>,
}

/// Parameters of the cocycle, Hoelder, neighbourhood and ladder analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub b: f64,
    pub kappa: f64,
    pub max_k: usize,
    pub t_max: usize,
    pub replicas: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            m: 4,
            b: 1.0,
            kappa: 0.5,
            max_k: 8,
            t_max: 1024,
            replicas: 16,
        }
    }
}

fn default_initial() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    MalformedJson,
    ShapeMismatch,
    InvalidProbability,
    NonStochasticRow,
    ReducibleChain,
    MissingMarket,
    InvalidRate,
    NotInSimplex,
    InvalidInitial,
    InvalidAnalysis,
    Inconsistent,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::MalformedJson => "MALFORMED_JSON",
            Code::ShapeMismatch => "SHAPE_MISMATCH",
            Code::InvalidProbability => "INVALID_PROBABILITY",
            Code::NonStochasticRow => "NON_STOCHASTIC_ROW",
            Code::ReducibleChain => "REDUCIBLE_CHAIN",
            Code::MissingMarket => "MISSING_MARKET",
            Code::InvalidRate => "INVALID_RATE",
            Code::NotInSimplex => "NOT_IN_SIMPLEX",
            Code::InvalidInitial => "INVALID_INITIAL",
            Code::InvalidAnalysis => "INVALID_ANALYSIS",
            Code::Inconsistent => "INCONSISTENT_MODEL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: Code,
    /// 1-based line in the source document.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.code.as_str(), self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

/// A fully constructed model with the document it came from.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ModelConfig,
    pub model: MarketModel,
}

/// Line lookups into the raw document.
struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line_at(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn key_offset(&self, key: &str) -> Option<usize> {
        self.text.find(&format!("\"{key}\""))
    }

    fn key_line(&self, key: &str) -> Option<usize> {
        self.key_offset(key).map(|o| self.line_at(o))
    }

    /// Line of the `row`-th inner array of the nested array under `key`.
    fn row_line(&self, key: &str, row: usize) -> Option<usize> {
        let start = self.key_offset(key)?;
        let mut depth = 0usize;
        let mut seen = 0usize;
        for (i, ch) in self.text[start..].char_indices() {
            match ch {
                '[' => {
                    depth += 1;
                    if depth == 2 {
                        if seen == row {
                            return Some(self.line_at(start + i));
                        }
                        seen += 1;
                    }
                }
                ']' => {
                    if depth <= 1 {
                        break;
                    }
                    depth -= 1;
                }
                _ => {}
            }
        }
        self.key_line(key)
    }
}

pub fn validate_config(path: &Path) -> Result<Validated, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic {
            code: Code::MalformedJson,
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        }]
    })?;
    validate_str(&text)
}

fn simplex_problem(v: &[f64]) -> Option<String> {
    if let Some((k, x)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Some(format!("entry {k} = {x} is negative or not finite"));
    }
    let sum: f64 = v.iter().sum();
    ((sum - 1.0).abs() > SUM_TOLERANCE).then(|| format!("entries sum to {sum}, not 1"))
}

/// Checks every invariant and either builds the model or reports all
/// problems found. Nothing is constructed when any check fails.
pub fn validate_str(text: &str) -> Result<Validated, Vec<Diagnostic>> {
    let config: ModelConfig = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic {
            code: Code::MalformedJson,
            line: Some(e.line()),
            message: e.to_string(),
        }]
    })?;
    let src = Source { text };
    let mut diags = Vec::new();
    let mut push = |code, line, message: String| diags.push(Diagnostic { code, line, message });

    let s = config.states;
    if s == 0 || config.transition.len() != s {
        push(
            Code::ShapeMismatch,
            src.key_line("transition"),
            format!("\"states\" is {s} but \"transition\" has {} rows", config.transition.len()),
        );
    }
    let mut chain_ok = true;
    for (i, row) in config.transition.iter().enumerate() {
        let line = src.row_line("transition", i);
        if row.len() != config.transition.len() {
            push(Code::ShapeMismatch, line, format!("transition row {i} has {} entries, expected {}", row.len(), config.transition.len()));
            chain_ok = false;
            continue;
        }
        if let Some((j, p)) = row.iter().enumerate().find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p))) {
            push(Code::InvalidProbability, line, format!("transition[{i}][{j}] = {p} is not a probability"));
            chain_ok = false;
            continue;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            push(Code::NonStochasticRow, line, format!("transition row {i} sums to {sum}, not 1"));
            chain_ok = false;
        }
    }
    if chain_ok && !config.transition.is_empty() {
        if let Err(e) = check_irreducible(&config.transition) {
            push(Code::ReducibleChain, src.key_line("transition"), e.to_string());
            chain_ok = false;
        }
    }

    if !(config.initial >= 0.0 && config.initial.is_finite()) {
        push(Code::InvalidInitial, src.key_line("initial"), format!("initial wealth {} must be finite and nonnegative", config.initial));
    }
    let a = &config.analysis;
    if a.m == 0 || !(a.b > 0.0) || !(a.kappa > 0.0) || a.max_k == 0 || a.t_max < 2 || a.replicas == 0 {
        push(
            Code::InvalidAnalysis,
            src.key_line("analysis"),
            "analysis needs M >= 1, b > 0, kappa > 0, max_k >= 1, t_max >= 2, replicas >= 1".into(),
        );
    }

    let Some(market) = &config.market else {
        push(Code::MissingMarket, None, "the document has no \"market\" section".into());
        return Err(diags);
    };
    if !(market.r > 0.0 && market.r < 1.0) {
        push(Code::InvalidRate, src.key_line("r"), format!("investment rate {} is outside (0, 1)", market.r));
    }
    if market.assets < 2 {
        push(Code::ShapeMismatch, src.key_line("K"), format!("K = {} but at least 2 assets are needed", market.assets));
    }
    for (key, table) in [("dividends", &market.dividends), ("rival", &market.rival)] {
        if table.len() != s {
            push(Code::ShapeMismatch, src.key_line(key), format!("\"{key}\" has {} rows for {s} states", table.len()));
        }
        for (i, row) in table.iter().enumerate() {
            let line = src.row_line(key, i);
            if row.len() != market.assets {
                push(Code::ShapeMismatch, line, format!("{key} row {i} has {} entries but K = {}", row.len(), market.assets));
            } else if let Some(why) = simplex_problem(row) {
                push(Code::NotInSimplex, line, format!("{key} row {i} is not in the simplex: {why}"));
            }
        }
    }

    if !diags.is_empty() || !chain_ok {
        return Err(diags);
    }
    let built = EnvironmentChain::new(&config.transition)
        .and_then(|c| MarketModel::new(Arc::new(c), market.r, market.dividends.clone(), market.rival.clone()));
    match built {
        Ok(model) => Ok(Validated { config, model }),
        Err(e) => Err(vec![Diagnostic {
            code: Code::Inconsistent,
            line: src.key_line("market"),
            message: e.to_string(),
        }]),
    }
}
