use std::fmt::Write as _;
use std::path::Path;

use dnls_core::lattice::{dst_coefficients, stencil_symbol_analysis, SymbolAnalysis};
use serde::{Deserialize, Serialize};

use super::{write_json, write_text, Experiment, Outcome};
use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::manifest::Check;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilRecord {
    pub n: usize,
    /// `a_0, a_1, …, a_n`
    pub coefficients: Vec<f64>,
    pub analysis: SymbolAnalysis,
}

pub fn stencil_records(orders: &[usize]) -> Result<Vec<StencilRecord>> {
    if orders.is_empty() {
        return Err(RunError::Config("no stencil orders given".into()));
    }
    orders
        .iter()
        .map(|&n| {
            let s = dst_coefficients(n)?;
            Ok(StencilRecord { n, coefficients: s.one_sided().to_vec(), analysis: stencil_symbol_analysis(&s) })
        })
        .collect()
}

#[derive(Default)]
pub struct StencilInfo;

impl Experiment for StencilInfo {
    fn name(&self) -> &'static str {
        "stencil-info"
    }

    fn defaults(&self) -> ExperimentConfig {
        ExperimentConfig { experiment: "stencil-info".into(), ..Default::default() }
    }

    fn run(&self, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
        let orders = match cfg.stencil_order {
            Some(n) => vec![n],
            None => cfg.orders.clone(),
        };
        let records = stencil_records(&orders)?;
        let mut csv = String::from("n,k,a_k\n");
        let mut checks = Vec::new();
        for r in &records {
            for (k, a) in r.coefficients.iter().enumerate() {
                let _ = writeln!(csv, "{},{k},{:.16e}", r.n, a);
            }
            checks.push(Check::within(format!("n={} consistency order", r.n), r.analysis.consistency_order as f64, 2.0 * r.n as f64, 2.0 * r.n as f64));
            checks.push(Check::flag(format!("n={} stable", r.n), r.analysis.stable));
        }
        let files = vec![write_text(out, "stencils.csv", &csv)?, write_json(out, "stencils.json", &records)?];
        Ok(Outcome { summary: serde_json::to_value(&records)?, files, checks })
    }
}
