//! Static consensus QPs read from TOML or JSON.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use oaadmm::admm::{ConsensusProblem, IterateState, PenaltyVector, QuadraticObjective, SolverConfig};
use serde::{Deserialize, Serialize};

/// `½vᵀPv + qᵀv`, `P` given row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticTerm {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
}

/// `min f(x) + g(z)  s.t.  Ax + Bz = c` with quadratic `f`, `g`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticProblemFile {
    pub f: QuadraticTerm,
    pub g: QuadraticTerm,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    /// One entry per constraint row, or a single entry used for all rows.
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub primal_tolerance: f64,
    #[serde(default = "default_tolerance")]
    pub dual_tolerance: f64,
}

fn default_rho() -> Vec<f64> {
    vec![1.0]
}

fn default_max_iterations() -> usize {
    2000
}

fn default_tolerance() -> f64 {
    1e-6
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 || rows.iter().any(|r| r.len() != n) {
        bail!("{what} must be a non-empty rectangular matrix");
    }
    Ok(DMatrix::from_row_iterator(rows.len(), n, rows.iter().flatten().copied()))
}

impl StaticProblemFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        Ok(parsed)
    }

    pub fn problem(&self) -> Result<ConsensusProblem> {
        let f = QuadraticObjective::new(matrix(&self.f.p, "f.p")?, DVector::from_vec(self.f.q.clone()))?;
        let g = QuadraticObjective::new(matrix(&self.g.p, "g.p")?, DVector::from_vec(self.g.q.clone()))?;
        let c = DVector::from_vec(self.c.clone());
        Ok(ConsensusProblem::new(Arc::new(f), Arc::new(g), matrix(&self.a, "a")?, matrix(&self.b, "b")?, c)?)
    }

    pub fn initial_state(&self, problem: &ConsensusProblem) -> Result<IterateState> {
        let rho = match self.rho.as_slice() {
            [v] => PenaltyVector::uniform(problem.p(), *v)?,
            v => PenaltyVector::new(DVector::from_column_slice(v))?,
        };
        Ok(IterateState::zeros(problem, rho)?)
    }

    pub fn config(&self) -> Result<SolverConfig> {
        Ok(SolverConfig::new(self.max_iterations, self.primal_tolerance, self.dual_tolerance)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        a = [[1.0]]
        b = [[-1.0]]
        c = [0.0]
        [f]
        p = [[2.0]]
        q = [-2.0]
        [g]
        p = [[2.0]]
        q = [2.0]
    "#;

    #[test]
    fn toml_sample_builds_a_problem() {
        let file: StaticProblemFile = toml::from_str(SAMPLE).unwrap();
        let problem = file.problem().unwrap();
        assert_eq!((problem.n(), problem.m(), problem.p()), (1, 1, 1));
        assert_eq!(file.initial_state(&problem).unwrap().rho.values()[0], 1.0);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(matrix(&[vec![1.0, 2.0], vec![3.0]], "a").is_err());
    }
}
