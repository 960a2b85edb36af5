//! Solve drivers: direct MILP and the sequential baseline.

use std::time::Instant;

use crate::formulation::{
    build_ind, build_sequential, extract_solution, rapid_design_from, DesignSolution, ExtractError, FormulationError,
    RapidDesign, SubtourCuts,
};
use crate::instance::TransitInstance;
use crate::mip::{solve_milp, MipLimits, SolveStats, Termination};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("could not read a solution from the MILP values: {0}")]
    Extract(#[from] ExtractError),
}

/// Result of one solve: the best solution found (if any) and search stats.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub solution: Option<DesignSolution>,
    pub stats: SolveStats,
}

impl Outcome {
    pub fn objective(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.objective)
    }
}

/// Branch and bound on the full model with lazy subtour elimination.
pub fn solve_direct(inst: &TransitInstance, limits: &MipLimits) -> Result<Outcome, SolveError> {
    let m = build_ind(inst)?;
    let mut cb = SubtourCuts::new(inst, &m);
    let res = solve_milp(&m.model, Some(&mut cb), limits);
    let solution = match &res.x {
        Some(x) => Some(extract_solution(inst, &m, x)?),
        None => None,
    };
    Ok(Outcome {
        solution,
        stats: res.stats,
    })
}

#[derive(Debug, Clone)]
pub struct SequentialOutcome {
    pub stage1: SolveStats,
    pub rapid: Option<RapidDesign>,
    /// Stage 2 with the rapid line fixed; `None` when stage 1 found nothing.
    pub stage2: Option<Outcome>,
}

impl SequentialOutcome {
    pub fn objective(&self) -> Option<f64> {
        self.stage2.as_ref().and_then(|o| o.objective())
    }

    /// Combined stats: times, nodes and cuts of both stages added up.
    pub fn stats(&self) -> SolveStats {
        let mut s = self.stage2.as_ref().map_or(self.stage1.clone(), |o| o.stats.clone());
        if self.stage2.is_some() {
            s.t += self.stage1.t;
            s.nodes += self.stage1.nodes;
            s.n_cuts += self.stage1.n_cuts;
            s.lazy_cuts += self.stage1.lazy_cuts;
            s.user_cuts += self.stage1.user_cuts;
            s.lp_iterations += self.stage1.lp_iterations;
        }
        s
    }
}

/// Rapid line alone first, then the slow line with the rapid line fixed.
/// The time limit, if any, is shared between the stages.
pub fn solve_sequential(inst: &TransitInstance, limits: &MipLimits) -> Result<SequentialOutcome, SolveError> {
    let start = Instant::now();
    let seq = build_sequential(inst)?;
    let mut cb = SubtourCuts::new(inst, &seq.stage1);
    let r1 = solve_milp(&seq.stage1.model, Some(&mut cb), limits);
    let Some(x1) = r1.x.as_ref() else {
        return Ok(SequentialOutcome {
            stage1: r1.stats,
            rapid: None,
            stage2: None,
        });
    };
    let rapid = rapid_design_from(&seq.stage1, inst, x1);
    let m2 = seq.stage2(&rapid)?;
    let mut limits2 = *limits;
    if let Some(t) = limits.time {
        limits2.time = Some((t - start.elapsed().as_secs_f64()).max(0.0));
    }
    let mut cb2 = SubtourCuts::new(inst, &m2);
    let r2 = solve_milp(&m2.model, Some(&mut cb2), &limits2);
    let solution = match &r2.x {
        Some(x) => Some(extract_solution(inst, &m2, x)?),
        None => None,
    };
    Ok(SequentialOutcome {
        stage1: r1.stats,
        rapid: Some(rapid),
        stage2: Some(Outcome {
            solution,
            stats: r2.stats,
        }),
    })
}

/// Exit-code style classification of a finished search.
pub fn found_solution(stats: &SolveStats) -> bool {
    stats.obj_v.is_some() && stats.termination != Termination::Infeasible
}
