use super::{ActionId, AgentSystem, ContextComponent};
use crate::dist::Dist;
use crate::error::{Result, UqError};

impl AgentSystem {
    /// Restricts the action kernel to alternate between thinking and
    /// non-thinking actions.
    ///
    /// After a non-thinking action (and before the first action) each row is
    /// renormalized onto the thinking actions; after a thinking action, onto
    /// the rest. The agent projection gains the last action if it lacked it.
    /// Rows that lose all mass become infeasible; reaching one is an error
    /// naming the context.
    pub fn apply_react_constraint(&self) -> Result<AgentSystem> {
        let tax = self.taxonomy();
        let n_actions = self.dims().actions;
        let thinking: Vec<bool> = (0..n_actions).map(|a| tax.is_thinking(ActionId(a))).collect();
        if !thinking.iter().any(|&t| t) || thinking.iter().all(|&t| t) {
            return Err(UqError::Config(
                "constraint needs both thinking and non-thinking actions in the taxonomy".into(),
            ));
        }

        let dims = *self.dims();
        let old_proj = &self.parts().agent_projection;
        let new_proj = old_proj.with(ContextComponent::LastAction);
        let n_obs = dims.observations;
        let mut kernel = Vec::with_capacity(new_proj.num_keys(&dims) * n_obs);
        for key in 0..new_proj.num_keys(&dims) {
            let parts = new_proj.decode(&dims, key);
            let want_thinking = !parts.last_action.is_some_and(|a| thinking[a.0]);
            let old_key = old_proj.key(&dims, &parts);
            for o in 0..n_obs {
                let row = self.parts().action_kernel[old_key * n_obs + o].as_ref();
                kernel.push(row.and_then(|row| {
                    let masked: Vec<f64> = row
                        .weights()
                        .iter()
                        .enumerate()
                        .map(|(a, &w)| if thinking[a] == want_thinking { w } else { 0.0 })
                        .collect();
                    Dist::from_unnormalized(masked).ok()
                }));
            }
        }
        let mut parts = self.parts().clone();
        parts.name = format!("{}+react", parts.name);
        parts.agent_projection = new_proj;
        parts.action_kernel = kernel;
        AgentSystem::new(parts).map_err(|e| match e {
            UqError::Validation(msg) => UqError::Validation(format!("unnormalizable row under constraint: {msg}")),
            other => other,
        })
    }
}
