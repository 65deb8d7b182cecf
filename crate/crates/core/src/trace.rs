use serde::Serialize;

/// Why an iterative solver stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Iterates grew past the divergence threshold.
    Diverged,
    /// A user could not meet its target; carries the user index.
    Infeasible { user: usize },
}

/// Per-iteration record of an iterative solver together with its final iterate.
///
/// `objective_history[0]` is the objective at the starting point, so the
/// history always holds `iterations + 1` entries.
#[derive(Debug, Clone)]
pub struct SolverTrace<S> {
    pub objective_history: Vec<f64>,
    /// Algorithm specific residual per iteration (best-response distance,
    /// fixed-point step, stationarity measure ...). Empty when not tracked.
    pub residual_history: Vec<f64>,
    /// Per-user rates after every iteration, when the solver records them.
    pub rate_history: Vec<Vec<f64>>,
    pub final_state: S,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
}

impl<S> SolverTrace<S> {
    pub(crate) fn new(initial_objective: f64, state: S) -> Self {
        Self {
            objective_history: vec![initial_objective],
            residual_history: Vec::new(),
            rate_history: Vec::new(),
            final_state: state,
            converged: false,
            iterations: 0,
            termination: Termination::MaxIterations,
        }
    }

    pub(crate) fn push(&mut self, objective: f64) {
        self.objective_history.push(objective);
        self.iterations += 1;
    }

    pub(crate) fn finish(mut self, state: S, termination: Termination) -> Self {
        self.converged = termination == Termination::Converged;
        self.termination = termination;
        self.final_state = state;
        self
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("history is never empty")
    }

    /// Largest decrease between consecutive objective values (0 when the
    /// history is nondecreasing).
    pub fn max_objective_drop(&self) -> f64 {
        self.objective_history
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    pub fn map_state<T>(self, f: impl FnOnce(S) -> T) -> SolverTrace<T> {
        SolverTrace {
            objective_history: self.objective_history,
            residual_history: self.residual_history,
            rate_history: self.rate_history,
            final_state: f(self.final_state),
            converged: self.converged,
            iterations: self.iterations,
            termination: self.termination,
        }
    }
}
