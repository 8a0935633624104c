//! Turns a configured [`EvaluatorBinding`] into a live evaluator.

use thiserror::Error;

use crate::engine::{EvaluatorBinding, RunConfig};
use crate::evaluation::{Evaluator, SyntheticEvaluator};
use crate::space::SearchSpace;

#[derive(Debug, Error)]
pub enum BindError {
    #[error("cannot start evaluator {binding}: {reason}")]
    Unavailable { binding: String, reason: String },
}

pub fn connect_evaluator(
    config: &RunConfig,
    space: &SearchSpace,
) -> Result<Box<dyn Evaluator>, BindError> {
    match &config.evaluator {
        EvaluatorBinding::Synthetic => Ok(Box::new(SyntheticEvaluator::new(
            config.resolve_landscape(space),
        ))),
        #[cfg(feature = "remote")]
        remote => {
            use crate::protocol::{RemoteEvaluator, Session, SessionOptions};
            let fail = |reason: String| BindError::Unavailable {
                binding: remote.to_string(),
                reason,
            };
            let session = match remote {
                EvaluatorBinding::Exec(cmd) => Session::spawn(cmd, SessionOptions::default()),
                EvaluatorBinding::Tcp(addr) => Session::connect_tcp(addr, SessionOptions::default()),
                EvaluatorBinding::Synthetic => unreachable!(),
            }
            .map_err(|e| fail(e.to_string()))?;
            let evaluator = RemoteEvaluator::connect(session, config.input_shape)
                .map_err(|e| fail(e.to_string()))?;
            Ok(Box::new(evaluator))
        }
        #[cfg(not(feature = "remote"))]
        remote => Err(BindError::Unavailable {
            binding: remote.to_string(),
            reason: "built without remote evaluator support".into(),
        }),
    }
}
