use serde::{Deserialize, Serialize};

use super::{OpenSetError, Result};
use crate::pbmf::ScenarioDictionary;

/// Influences above this value are flagged for reporting.
pub const INFLUENCE_REPORT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Influence {
    pub scenario: usize,
    pub members: Vec<String>,
    pub influence: f64,
    pub reportable: bool,
}

/// Ranks scenarios by `fused score × class weight`, largest first.
pub fn explain_prediction(
    class_weights: &[f64],
    fused: &[f64],
    dictionary: &ScenarioDictionary,
) -> Result<Vec<Influence>> {
    let k = dictionary.num_scenarios();
    if class_weights.len() != k || fused.len() != k {
        return Err(OpenSetError::Dimension(format!(
            "{} weights and {} scores for {k} scenarios",
            class_weights.len(),
            fused.len()
        )));
    }
    let members = dictionary.binarized().members();
    let mut out: Vec<Influence> = members
        .into_iter()
        .enumerate()
        .map(|(j, members)| {
            let influence = fused[j] * class_weights[j];
            Influence {
                scenario: j,
                members,
                influence,
                reportable: influence > INFLUENCE_REPORT_THRESHOLD,
            }
        })
        .collect();
    out.sort_by(|a, b| b.influence.total_cmp(&a.influence).then(a.scenario.cmp(&b.scenario)));
    Ok(out)
}
