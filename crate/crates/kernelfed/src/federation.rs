//! Single-round federated training: every agent solves its local problem and
//! transmits only its critical samples; the server pools the messages, warm
//! starts from the transmitted multipliers, and solves the pooled problem.
//!
//! Nothing but [`AgentMessage`] values cross the agent/server boundary, so
//! the communication ledger is exactly the sum of message lengths.

use std::sync::Arc;

use rayon::prelude::*;

use crate::datasets::PartitionedDataset;
use crate::error::{Error, Result};
use crate::grid::QuadratureGrid;
use crate::model::{CoefficientField, Hyperparams, LabeledSample};
use crate::solver::{ascend, ascend_with, AscendOptions, SolveResult};

/// What an agent sends to the server: its critical samples and their
/// positive dual values, aligned index for index.
#[derive(Debug, Clone)]
pub struct AgentMessage {
    pub agent_id: usize,
    pub samples: Vec<LabeledSample>,
    pub lambdas: Vec<f64>,
}

impl AgentMessage {
    pub fn new(agent_id: usize, samples: Vec<LabeledSample>, lambdas: Vec<f64>) -> Result<Self> {
        if samples.len() != lambdas.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                got: lambdas.len(),
            });
        }
        if lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("transmitted dual values must be positive"));
        }
        Ok(Self { agent_id, samples, lambdas })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-agent line of the federation report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AgentSummary {
    pub samples: usize,
    pub transmitted: usize,
    pub accuracy: f64,
}

/// Outcome of one federated run.
#[derive(Debug, Clone)]
pub struct FederationReport {
    pub global_model: CoefficientField,
    pub per_agent: Vec<AgentSummary>,
    /// Total samples transmitted agent to server.
    pub communication_cost: usize,
    /// Nonzero cells of the global model.
    pub representation_cost: usize,
    pub server_iters: usize,
    /// Accuracy of the global model on the dataset's test set.
    pub global_accuracy: f64,
}

impl FederationReport {
    /// The metric fields as a single JSON line.
    pub fn to_json_line(&self) -> String {
        #[derive(serde::Serialize)]
        struct Line<'a> {
            communication_cost: usize,
            representation_cost: usize,
            server_iters: usize,
            global_accuracy: f64,
            per_agent: &'a [AgentSummary],
        }
        serde_json::to_string(&Line {
            communication_cost: self.communication_cost,
            representation_cost: self.representation_cost,
            server_iters: self.server_iters,
            global_accuracy: self.global_accuracy,
            per_agent: &self.per_agent,
        })
        .expect("report serialization cannot fail")
    }

    pub const CSV_HEADER: &'static str =
        "communication_cost,representation_cost,server_iters,global_accuracy";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.communication_cost,
            self.representation_cost,
            self.server_iters,
            self.global_accuracy
        )
    }
}

/// Solves the local problem and packs the critical samples with their dual
/// values into a message.
pub fn agent_train(
    samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
    agent_id: usize,
) -> Result<(AgentMessage, SolveResult)> {
    if samples.is_empty() {
        return Err(Error::invalid(format!("agent {agent_id} has no samples")));
    }
    let result = ascend(samples, grid, hp)?;
    let critical = &result.critical_indices;
    let sent: Vec<LabeledSample> = critical.iter().map(|&n| samples[n].clone()).collect();
    let lambdas: Vec<f64> =
        critical.iter().map(|&n| result.dual_state.lambda[n]).collect();
    Ok((AgentMessage::new(agent_id, sent, lambdas)?, result))
}

/// Concatenates the received messages in agent order. The multiplier vector
/// is exactly the transmitted values and seeds the server's ascent.
pub fn pool_messages(messages: &[AgentMessage]) -> (Vec<LabeledSample>, Vec<f64>) {
    let mut samples = Vec::new();
    let mut lambdas = Vec::new();
    for m in messages {
        samples.extend(m.samples.iter().cloned());
        lambdas.extend(m.lambdas.iter().cloned());
    }
    (samples, lambdas)
}

/// Solves the pooled problem over the union of the critical sets, starting
/// from the concatenated transmitted multipliers. Duplicate samples arriving
/// from different agents are kept as distinct constraints.
pub fn server_train(
    messages: &[AgentMessage],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<(CoefficientField, SolveResult)> {
    let (samples, lambda0) = pool_messages(messages);
    if samples.is_empty() {
        return Err(Error::NoCriticalSamples);
    }
    let opts = AscendOptions { lambda0: Some(lambda0), ..Default::default() };
    let result = ascend_with(&samples, grid, hp, &opts)?;
    Ok((result.alpha_star.clone(), result))
}

/// The omniscient baseline: one solve over the pooled raw data.
pub fn centralized_train(
    all_samples: &[LabeledSample],
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<(CoefficientField, SolveResult)> {
    let result = ascend(all_samples, grid, hp)?;
    Ok((result.alpha_star.clone(), result))
}

/// Runs the full round: agents in parallel, then the server once every
/// message has arrived. Deterministic for a fixed dataset.
pub fn run_federation(
    dataset: &PartitionedDataset,
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
) -> Result<FederationReport> {
    run_federation_with(dataset, grid, hp, false).map(|(report, _)| report)
}

/// As [`run_federation`], also returning the server's solve result;
/// optionally records the server's per-iteration trajectory.
pub fn run_federation_with(
    dataset: &PartitionedDataset,
    grid: &Arc<QuadratureGrid>,
    hp: &Hyperparams,
    record_server_trajectory: bool,
) -> Result<(FederationReport, SolveResult)> {
    if dataset.agents.is_empty() {
        return Err(Error::invalid("federation needs at least one agent"));
    }
    for (i, a) in dataset.agents.iter().enumerate() {
        if a.samples.is_empty() {
            return Err(Error::invalid(format!("agent partition {i} is empty")));
        }
    }

    let outcomes: Vec<(AgentMessage, SolveResult)> = dataset
        .agents
        .par_iter()
        .enumerate()
        .map(|(i, a)| agent_train(&a.samples, grid, hp, i))
        .collect::<Result<_>>()?;

    let messages: Vec<AgentMessage> = outcomes.iter().map(|(m, _)| m.clone()).collect();
    let (samples, lambda0) = pool_messages(&messages);
    if samples.is_empty() {
        return Err(Error::NoCriticalSamples);
    }
    let opts = AscendOptions {
        lambda0: Some(lambda0),
        record_trajectory: record_server_trajectory,
        ..Default::default()
    };
    let server_result = ascend_with(&samples, grid, hp, &opts)?;
    let global_model = server_result.alpha_star.clone();

    let per_agent = outcomes
        .iter()
        .zip(dataset.agents.iter())
        .map(|((msg, res), a)| {
            Ok(AgentSummary {
                samples: a.samples.len(),
                transmitted: msg.len(),
                accuracy: res.alpha_star.accuracy(&dataset.test_set)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let communication_cost: usize = messages.iter().map(|m| m.len()).sum();
    let representation_cost = global_model.support_cells();
    let global_accuracy = global_model.accuracy(&dataset.test_set)?;

    let report = FederationReport {
        global_model,
        per_agent,
        communication_cost,
        representation_cost,
        server_iters: server_result.dual_state.iters_run,
        global_accuracy,
    };
    Ok((report, server_result))
}
