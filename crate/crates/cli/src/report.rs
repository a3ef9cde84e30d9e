//! JSON document written by `run`.

use riskagg::risk::{RiskDiagnostics, RiskMeasure};
use riskagg::{AggregationSetup64, QueryLedger};
use serde::Serialize;

use crate::config::RunConfig;
use crate::pipeline::{ClassicalOutcome, QuantumOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultEntry {
    pub pipeline: Pipeline,
    pub measure: RiskMeasure,
    pub alpha: f64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_prob_at_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_queries: Option<QueryLedger>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopulaDiagnostics {
    pub c_max: f64,
    pub c_prime_max: f64,
    pub clip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantumDiagnostics {
    /// Truncation half-widths L_i chosen for the run.
    pub windows: Vec<f64>,
    pub var: RiskDiagnostics<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tvar: Option<RiskDiagnostics<f64>>,
    pub total_queries: QueryLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copula: Option<CopulaDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub results: Vec<ResultEntry>,
    pub diagnostics: Diagnostics,
    pub config_echo: RunConfig,
}

impl RunReport {
    pub fn assemble(
        cfg: &RunConfig,
        setup: Option<&AggregationSetup64>,
        quantum: Option<&QuantumOutcome>,
        classical: Option<&ClassicalOutcome>,
    ) -> Self {
        let alpha = cfg.risk.alpha;
        let measure = cfg.risk.measure;
        let mut results = Vec::new();
        if let Some(q) = quantum {
            if measure.wants_var() {
                results.push(ResultEntry {
                    pipeline: Pipeline::Quantum,
                    measure: RiskMeasure::Var,
                    alpha,
                    value: q.var.value,
                    tail_prob_at_value: Some(q.var.tail_prob_at_value),
                    threshold: None,
                    total_queries: Some(q.var.total_queries),
                    samples: None,
                });
            }
            if let Some(t) = &q.tvar {
                results.push(ResultEntry {
                    pipeline: Pipeline::Quantum,
                    measure: RiskMeasure::Tvar,
                    alpha,
                    value: t.value,
                    tail_prob_at_value: Some(t.tail_prob_at_value),
                    threshold: t.threshold,
                    total_queries: Some(t.total_queries),
                    samples: None,
                });
            }
        }
        if let Some(c) = classical {
            let entry = |m, value, threshold| ResultEntry {
                pipeline: Pipeline::Classical,
                measure: m,
                alpha,
                value,
                tail_prob_at_value: None,
                threshold,
                total_queries: None,
                samples: Some(c.samples),
            };
            if measure.wants_var() {
                results.push(entry(RiskMeasure::Var, c.var, None));
            }
            if let Some(t) = c.tvar {
                results.push(entry(RiskMeasure::Tvar, t, Some(c.var)));
            }
        }

        let copula = setup.and_then(|s| {
            let b = s.copula().bounds()?;
            Some(CopulaDiagnostics {
                c_max: b.c_max,
                c_prime_max: b.c_prime_max,
                clip: s.copula().clip(),
            })
        });
        let quantum = quantum.zip(setup).map(|(q, s)| {
            let mut total = q.var.total_queries;
            if let Some(t) = &q.tvar {
                total += t.total_queries;
            }
            QuantumDiagnostics {
                windows: s
                    .marginals()
                    .iter()
                    .map(|m| m.window.half_width())
                    .collect(),
                var: q.var.diagnostics.clone(),
                tvar: q.tvar.as_ref().map(|t| t.diagnostics.clone()),
                total_queries: total,
            }
        });
        Self {
            results,
            diagnostics: Diagnostics {
                seed: cfg.run.seed,
                copula,
                quantum,
                classical_samples: classical.map(|c| c.samples),
            },
            config_echo: cfg.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
