//! Templated explanations of a weighting discrepancy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pomdp::Weighting;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("expected {expected} entries, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{labels} labels for {features} features")]
    Labels { labels: usize, features: usize },
}

/// Sentence templates. `{label}` and `{percent}` are substituted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Templates {
    pub ratio: String,
    /// Used when the algorithm puts zero weight on a feature the user values.
    pub unweighted: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            ratio: "You seem to value the {label} at {percent}% of what the algorithm does.".into(),
            unweighted: "The algorithm does not weight the {label}; you appear to.".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Features with `|ratio − 1|` at or below this are not mentioned.
    pub report_threshold: f64,
    /// Percentages are rounded to the nearest multiple of this.
    pub rounding_grain: f64,
    pub templates: Templates,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { report_threshold: 0.05, rounding_grain: 5.0, templates: Templates::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationStatement {
    /// 1-based, matching the labels.
    pub feature_index: usize,
    pub label: String,
    /// `φ̂_i / φ_a,i`; `None` when `φ_a,i = 0`.
    pub ratio: Option<f64>,
    pub percent: Option<f64>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Explanation {
    pub statements: Vec<ExplanationStatement>,
}

impl Explanation {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn sentences(&self) -> Vec<&str> {
        self.statements.iter().map(|s| s.text.as_str()).collect()
    }
}

fn round_to_grain(percent: f64, grain: f64) -> f64 {
    if grain > 0.0 {
        (percent / grain).round() * grain
    } else {
        percent
    }
}

fn format_percent(p: f64) -> String {
    if p.fract() == 0.0 { format!("{p:.0}") } else { format!("{p}") }
}

/// Statements for each feature whose weight ratio leaves the threshold
/// band, most discrepant first (feature order breaks ties).
pub fn generate_explanation<T: Scalar>(
    phi_a: &Weighting<T>,
    phi_hat: &Weighting<T>,
    labels: &[String],
    config: &ExplainConfig,
) -> Result<Explanation, ExplainError> {
    if phi_a.len() != phi_hat.len() {
        return Err(ExplainError::Dimension { expected: phi_a.len(), actual: phi_hat.len() });
    }
    if labels.len() != phi_a.len() {
        return Err(ExplainError::Labels { labels: labels.len(), features: phi_a.len() });
    }
    let mut ranked: Vec<(f64, ExplanationStatement)> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let (a, h) = (phi_a[i].to_f64_lossy(), phi_hat[i].to_f64_lossy());
        if a == 0.0 {
            if h > 0.0 {
                let text = config.templates.unweighted.replace("{label}", label);
                ranked.push((
                    f64::INFINITY,
                    ExplanationStatement { feature_index: i + 1, label: label.clone(), ratio: None, percent: None, text },
                ));
            }
            continue;
        }
        let ratio = h / a;
        let deviation = (ratio - 1.0).abs();
        if deviation <= config.report_threshold {
            continue;
        }
        let percent = round_to_grain(ratio * 100.0, config.rounding_grain);
        let text = config
            .templates
            .ratio
            .replace("{label}", label)
            .replace("{percent}", &format_percent(percent));
        ranked.push((
            deviation,
            ExplanationStatement { feature_index: i + 1, label: label.clone(), ratio: Some(ratio), percent: Some(percent), text },
        ));
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.feature_index.cmp(&b.1.feature_index)));
    Ok(Explanation { statements: ranked.into_iter().map(|(_, s)| s).collect() })
}
