//! Per-iteration solver traces.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::linalg::io::fmt_f64;
use crate::loss::{FactorState, LiftedState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub stationarity: f64,
    pub grad_mapping_norm: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    #[default]
    Budget,
    Stationary,
}

/// One block update of the block-coordinate solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMove {
    pub iter: usize,
    pub block: usize,
    /// `‖block_k − block_{k−1}‖_F`
    pub step: f64,
    pub radius: f64,
    /// Objective value after the update.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolverReport {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub moves: Vec<BlockMove>,
    pub flags: Vec<String>,
    pub final_factors: Option<FactorState>,
    pub final_lifted: Option<LiftedState>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl SolverReport {
    pub(crate) fn started() -> Self {
        SolverReport { clock: Some(Instant::now()), ..Default::default() }
    }

    pub(crate) fn push(&mut self, iter: usize, loss: f64, stationarity: f64, grad_mapping_norm: f64) {
        let elapsed_s = self.clock.map(|c| c.elapsed().as_secs_f64()).unwrap_or(0.0);
        self.records.push(IterRecord { iter, loss, stationarity, grad_mapping_norm, elapsed_s });
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    /// Best stationarity measure seen up to each record.
    pub fn best_stationarity(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.stationarity);
                best
            })
            .collect()
    }

    /// `iter,loss,stationarity,grad_mapping_norm,elapsed_s`
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("iter,loss,stationarity,grad_mapping_norm,elapsed_s\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iter,
                fmt_f64(r.loss),
                fmt_f64(r.stationarity),
                fmt_f64(r.grad_mapping_norm),
                fmt_f64(r.elapsed_s)
            ));
        }
        out
    }

    /// Summary document with the caller's configuration and seed attached.
    pub fn to_json(&self, config: serde_json::Value, seed: u64) -> serde_json::Value {
        let last = self.records.last();
        serde_json::json!({
            "config": config,
            "seed": seed,
            "iterations": last.map(|r| r.iter).unwrap_or(0),
            "termination": self.termination,
            "final_loss": last.map(|r| r.loss),
            "final_stationarity": last.map(|r| r.stationarity),
            "final_grad_mapping_norm": last.map(|r| r.grad_mapping_norm),
            "flags": self.flags,
        })
    }
}
