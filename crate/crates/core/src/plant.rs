//! Per-agent systems, the assembled global plant, and the interval /
//! privacy-budget value types.
//!
//! Agent `i` evolves as `x^i' = A^i x^i + Σ_j A^{ij} x^j + W^i w^i` with
//! measurement `y^i = C^i x^i + V^i v^i`; the global plant stacks agent
//! states in index order, with block-diagonal C, W, V and coupling blocks
//! off the diagonal of A. The published aggregate is `z = Γ x`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::matops::Matrix;

#[derive(Debug, Clone, Error)]
pub enum PlantError {
    #[error("interval bound crossing at component {index}: lo {lo} > hi {hi}")]
    BoundCrossing { index: usize, lo: f64, hi: f64 },
    #[error("interval bounds have mismatched lengths {lo} and {hi}")]
    BoundLength { lo: usize, hi: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("agent {agent}: {what} must be {expected}, got {got}")]
    AgentDimension {
        agent: usize,
        what: String,
        expected: String,
        got: String,
    },
    #[error("coupling from agent {from} to agent {to}: expected {expected}, got {got}")]
    CouplingDimension {
        from: usize,
        to: usize,
        expected: String,
        got: String,
    },
    #[error("coupling references unknown agent {to} (only {count} agents)")]
    UnknownAgent { to: usize, count: usize },
    #[error("Gamma must have {expected} columns, got {got}")]
    GammaDimension { expected: usize, got: usize },
    #[error("privacy budget: {0}")]
    Budget(String),
}

/// A pair of equal-length vectors with lo ≤ hi elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalVector {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, PlantError> {
        if lo.len() != hi.len() {
            return Err(PlantError::BoundLength {
                lo: lo.len(),
                hi: hi.len(),
            });
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(PlantError::NonFinite {
                    what: format!("interval component {i}"),
                });
            }
            if l > h {
                return Err(PlantError::BoundCrossing {
                    index: i,
                    lo: l,
                    hi: h,
                });
            }
        }
        Ok(IntervalVector { lo, hi })
    }

    /// Degenerate interval [v, v].
    pub fn point(v: Vec<f64>) -> Self {
        IntervalVector {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Componentwise widths hi - lo.
    pub fn widths(&self) -> Vec<f64> {
        self.hi.iter().zip(&self.lo).map(|(h, l)| h - l).collect()
    }

    /// Largest width.
    pub fn diam(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.len()
            && self
                .lo
                .iter()
                .zip(x)
                .zip(&self.hi)
                .all(|((l, xi), h)| *l - tol <= *xi && *xi <= *h + tol)
    }

    /// Scale both bounds by c ≥ 0.
    pub fn scale(&self, c: f64) -> IntervalVector {
        assert!(c >= 0.0, "interval scaling must be nonnegative");
        IntervalVector {
            lo: self.lo.iter().map(|l| c * l).collect(),
            hi: self.hi.iter().map(|h| c * h).collect(),
        }
    }

    /// Stack two intervals.
    pub fn concat(&self, other: &IntervalVector) -> IntervalVector {
        IntervalVector {
            lo: crate::matops::vecops::concat(&self.lo, &other.lo),
            hi: crate::matops::vecops::concat(&self.hi, &other.hi),
        }
    }
}

/// Adjacency-and-closeness parameters (ε, δ, ρ) of the guaranteed-privacy
/// requirement. The target bound is e^{-ε}·δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, rho: f64) -> Result<Self, PlantError> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(PlantError::Budget(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(PlantError::Budget(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(PlantError::Budget(format!("rho must be > 0, got {rho}")));
        }
        Ok(PrivacyBudget {
            epsilon,
            delta,
            rho,
        })
    }

    /// e^{-ε}·δ, the right-hand side of the privacy constraint.
    pub fn target_bound(&self) -> f64 {
        (-self.epsilon).exp() * self.delta
    }
}

/// One agent's local system plus its couplings to other agents.
#[derive(Debug, Clone)]
pub struct AgentBlock {
    pub a: Matrix,
    /// Coupling matrices A^{ij}, keyed by the other agent's index.
    pub couplings: BTreeMap<usize, Matrix>,
    pub w: Matrix,
    pub c: Matrix,
    pub v: Matrix,
    pub x0: IntervalVector,
    pub w_bounds: IntervalVector,
    pub v_bounds: IntervalVector,
}

impl AgentBlock {
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    fn validate(&self, index: usize) -> Result<(), PlantError> {
        let n = self.a.rows();
        let dim_err = |what: &str, expected: String, got: String| PlantError::AgentDimension {
            agent: index,
            what: what.to_string(),
            expected,
            got,
        };
        if !self.a.is_square() {
            return Err(dim_err(
                "A",
                "square".into(),
                format!("{}x{}", self.a.rows(), self.a.cols()),
            ));
        }
        if self.w.rows() != n {
            return Err(dim_err("W rows", n.to_string(), self.w.rows().to_string()));
        }
        if self.c.cols() != n {
            return Err(dim_err("C cols", n.to_string(), self.c.cols().to_string()));
        }
        if self.v.rows() != self.c.rows() {
            return Err(dim_err(
                "V rows",
                self.c.rows().to_string(),
                self.v.rows().to_string(),
            ));
        }
        if self.x0.len() != n {
            return Err(dim_err(
                "x0 length",
                n.to_string(),
                self.x0.len().to_string(),
            ));
        }
        if self.w_bounds.len() != self.w.cols() {
            return Err(dim_err(
                "w bounds length",
                self.w.cols().to_string(),
                self.w_bounds.len().to_string(),
            ));
        }
        if self.v_bounds.len() != self.v.cols() {
            return Err(dim_err(
                "v bounds length",
                self.v.cols().to_string(),
                self.v_bounds.len().to_string(),
            ));
        }
        Ok(())
    }
}

/// The assembled global LTI plant with interval-bounded uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: Matrix,
    pub c: Matrix,
    pub w: Matrix,
    pub v: Matrix,
    pub gamma: Matrix,
    pub x0: IntervalVector,
    pub w_bounds: IntervalVector,
    pub v_bounds: IntervalVector,
    /// Per-agent output dimensions, in agent order; a single block of size
    /// m when agent structure is unknown.
    pub output_blocks: Vec<usize>,
}

impl PlantModel {
    /// State dimension n.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Output dimension m.
    pub fn m(&self) -> usize {
        self.c.rows()
    }

    /// Process noise dimension.
    pub fn n_w(&self) -> usize {
        self.w.cols()
    }

    /// Measurement noise dimension.
    pub fn n_v(&self) -> usize {
        self.v.cols()
    }

    /// Published-aggregate dimension (rows of Γ).
    pub fn z_dim(&self) -> usize {
        self.gamma.rows()
    }

    /// Noise widths δ_w.
    pub fn delta_w(&self) -> Vec<f64> {
        self.w_bounds.widths()
    }

    /// Noise widths δ_v.
    pub fn delta_v(&self) -> Vec<f64> {
        self.v_bounds.widths()
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let n = self.n();
        let check = |cond: bool, what: &str, expected: String, got: String| {
            if cond {
                Ok(())
            } else {
                Err(PlantError::AgentDimension {
                    agent: 0,
                    what: what.to_string(),
                    expected,
                    got,
                })
            }
        };
        check(
            self.a.is_square(),
            "global A",
            "square".into(),
            format!("{}x{}", self.a.rows(), self.a.cols()),
        )?;
        check(
            self.c.cols() == n,
            "global C cols",
            n.to_string(),
            self.c.cols().to_string(),
        )?;
        check(
            self.w.rows() == n,
            "global W rows",
            n.to_string(),
            self.w.rows().to_string(),
        )?;
        check(
            self.v.rows() == self.c.rows(),
            "global V rows",
            self.c.rows().to_string(),
            self.v.rows().to_string(),
        )?;
        check(
            self.x0.len() == n,
            "x0 length",
            n.to_string(),
            self.x0.len().to_string(),
        )?;
        check(
            self.w_bounds.len() == self.w.cols(),
            "w bounds length",
            self.w.cols().to_string(),
            self.w_bounds.len().to_string(),
        )?;
        check(
            self.v_bounds.len() == self.v.cols(),
            "v bounds length",
            self.v.cols().to_string(),
            self.v_bounds.len().to_string(),
        )?;
        if self.gamma.cols() != n {
            return Err(PlantError::GammaDimension {
                expected: n,
                got: self.gamma.cols(),
            });
        }
        check(
            self.output_blocks.iter().sum::<usize>() == self.m(),
            "output_blocks sum",
            self.m().to_string(),
            self.output_blocks.iter().sum::<usize>().to_string(),
        )?;
        Ok(())
    }
}

/// Stack agent blocks into the global plant: block-diagonal C, W, V;
/// A carries agent blocks on the diagonal and couplings off it; bounds
/// are concatenated in agent order.
pub fn assemble_global(agents: &[AgentBlock], gamma: Matrix) -> Result<PlantModel, PlantError> {
    assert!(
        !agents.is_empty(),
        "assemble_global needs at least one agent"
    );
    for (i, agent) in agents.iter().enumerate() {
        agent.validate(i)?;
    }
    let state_dims: Vec<usize> = agents.iter().map(|a| a.state_dim()).collect();
    let state_offsets: Vec<usize> = state_dims
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let n: usize = state_dims.iter().sum();

    let mut a = Matrix::zeros(n, n);
    for (i, agent) in agents.iter().enumerate() {
        for r in 0..agent.state_dim() {
            for c in 0..agent.state_dim() {
                a[(state_offsets[i] + r, state_offsets[i] + c)] = agent.a[(r, c)];
            }
        }
        for (&j, coupling) in &agent.couplings {
            if j >= agents.len() {
                return Err(PlantError::UnknownAgent {
                    to: j,
                    count: agents.len(),
                });
            }
            if j == i {
                return Err(PlantError::CouplingDimension {
                    from: i,
                    to: j,
                    expected: "a distinct agent".into(),
                    got: "self-coupling".into(),
                });
            }
            if coupling.rows() != agent.state_dim() || coupling.cols() != state_dims[j] {
                return Err(PlantError::CouplingDimension {
                    from: i,
                    to: j,
                    expected: format!("{}x{}", agent.state_dim(), state_dims[j]),
                    got: format!("{}x{}", coupling.rows(), coupling.cols()),
                });
            }
            for r in 0..coupling.rows() {
                for c in 0..coupling.cols() {
                    a[(state_offsets[i] + r, state_offsets[j] + c)] = coupling[(r, c)];
                }
            }
        }
    }

    let block_diag = |pick: &dyn Fn(&AgentBlock) -> &Matrix| -> Matrix {
        let rows: usize = agents.iter().map(|a| pick(a).rows()).sum();
        let cols: usize = agents.iter().map(|a| pick(a).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut ro = 0;
        let mut co = 0;
        for agent in agents {
            let b = pick(agent);
            for r in 0..b.rows() {
                for c in 0..b.cols() {
                    out[(ro + r, co + c)] = b[(r, c)];
                }
            }
            ro += b.rows();
            co += b.cols();
        }
        out
    };

    let stack = |pick: &dyn Fn(&AgentBlock) -> &IntervalVector| -> IntervalVector {
        agents[1..]
            .iter()
            .fold(pick(&agents[0]).clone(), |acc, ag| acc.concat(pick(ag)))
    };

    let plant = PlantModel {
        a,
        c: block_diag(&|ag| &ag.c),
        w: block_diag(&|ag| &ag.w),
        v: block_diag(&|ag| &ag.v),
        gamma,
        x0: stack(&|ag| &ag.x0),
        w_bounds: stack(&|ag| &ag.w_bounds),
        v_bounds: stack(&|ag| &ag.v_bounds),
        output_blocks: agents.iter().map(|a| a.output_dim()).collect(),
    };
    plant.validate()?;
    Ok(plant)
}

/// The five-firm market plant: ring influence with strength a, row 3
/// additionally coupled to agent 5, identity C/W/V, Γ the row of ones.
pub fn market5_plant() -> PlantModel {
    let a = 0.16;
    let d = 1.0 - a;
    let a_mat = Matrix::from_rows(&[
        vec![d, a, 0.0, 0.0, 0.0],
        vec![0.0, d, a, 0.0, 0.0],
        vec![0.0, 0.0, d, a, a],
        vec![0.0, 0.0, 0.0, d, a],
        vec![a, 0.0, 0.0, 0.0, d],
    ]);
    PlantModel {
        a: a_mat,
        c: Matrix::identity(5),
        w: Matrix::identity(5),
        v: Matrix::identity(5),
        gamma: Matrix::row_vector(&[1.0; 5]),
        x0: IntervalVector::new(vec![185.0; 5], vec![215.0; 5]).unwrap(),
        w_bounds: IntervalVector::new(vec![-0.5; 5], vec![0.5; 5]).unwrap(),
        v_bounds: IntervalVector::new(vec![0.0; 5], vec![1.0; 5]).unwrap(),
        output_blocks: vec![1; 5],
    }
}
