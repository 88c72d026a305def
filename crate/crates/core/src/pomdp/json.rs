use serde::{Deserialize, Serialize};

use super::{ModelError, ModelParts, PomdpModel, SignalKernel};

/// Canonical JSON form of a [`PomdpModel`].
///
/// `transition` is indexed `[action][state][next]`; `signalKernel` is indexed
/// `[action][state][next][signal]` with `signal = observation * |R| + reward`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelJson {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub reward_values: Vec<f64>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub signal_kernel: Vec<Vec<Vec<Vec<f64>>>>,
    pub discount: f64,
    pub initial_belief: Vec<f64>,
    pub reward_scale: f64,
    pub reward_offset: f64,
}

impl ModelJson {
    pub fn from_model(m: &PomdpModel) -> Self {
        let (n, na) = (m.num_states(), m.num_actions());
        ModelJson {
            states: m.states.clone(),
            actions: m.actions.clone(),
            observations: m.observations.clone(),
            reward_values: m.reward_values.clone(),
            transition: (0..na)
                .map(|a| (0..n).map(|s| m.transition_row(s, a).to_vec()).collect())
                .collect(),
            signal_kernel: (0..na)
                .map(|a| {
                    (0..n)
                        .map(|s| (0..n).map(|s2| m.signal_row(s, a, s2).to_vec()).collect())
                        .collect()
                })
                .collect(),
            discount: m.discount,
            initial_belief: m.initial_belief.as_slice().to_vec(),
            reward_scale: m.reward_scale,
            reward_offset: m.reward_offset,
        }
    }

    pub fn into_model(self) -> Result<PomdpModel, ModelError> {
        PomdpModel::new(ModelParts {
            states: self.states,
            actions: self.actions,
            observations: self.observations,
            reward_values: self.reward_values,
            transition: self.transition,
            signal_kernel: SignalKernel::Joint(self.signal_kernel),
            discount: self.discount,
            initial_belief: self.initial_belief,
            reward_scale: self.reward_scale,
            reward_offset: self.reward_offset,
        })
    }
}

impl PomdpModel {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("model json is always serializable")
    }

    pub fn from_json_str(text: &str) -> Result<PomdpModel, ModelError> {
        let json: ModelJson = serde_json::from_str(text)?;
        json.into_model()
    }
}
