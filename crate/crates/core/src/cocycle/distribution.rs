//! Lagrangian distributions `x ↦ α(x)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::hamflow::PhasePoint;
use crate::symplin::{Frame, LagrangianFrame};

type Evaluator = dyn Fn(&PhasePoint) -> Result<LagrangianFrame> + Send + Sync;

#[derive(Clone)]
pub enum LagrangianDistribution {
    /// `{dq = 0}`, constant in canonical charts.
    Vertical,
    /// Constant graph `{(S η, η)}` of a symmetric `n × n` matrix `S`; `S = 0` is vertical.
    Graph(DMatrix<f64>),
    /// Arbitrary evaluator; assumed to vary with the base point.
    Custom { name: String, eval: Arc<Evaluator> },
}

impl fmt::Debug for LagrangianDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Vertical => write!(f, "Vertical"),
            Self::Graph(s) => f.debug_tuple("Graph").field(s).finish(),
            Self::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

impl LagrangianDistribution {
    pub fn graph(s: DMatrix<f64>) -> Result<Self> {
        if !s.is_square() || s.nrows() == 0 {
            return invalid("graph matrix must be square and nonempty");
        }
        if (&s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
            return invalid("graph matrix must be symmetric for the graph to be Lagrangian");
        }
        Ok(Self::Graph(s))
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&PhasePoint) -> Result<LagrangianFrame> + Send + Sync + 'static,
    ) -> Self {
        Self::Custom { name: name.into(), eval: Arc::new(eval) }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Vertical => "vertical",
            Self::Graph(_) => "graph",
            Self::Custom { name, .. } => name,
        }
    }

    /// True when `α(x)` does not depend on `x` in canonical coordinates.
    pub fn locally_constant(&self) -> bool {
        !matches!(self, Self::Custom { .. })
    }

    pub fn at(&self, x: &PhasePoint) -> Result<LagrangianFrame> {
        let n = x.dof();
        match self {
            Self::Vertical => Ok(LagrangianFrame::vertical(n)),
            Self::Graph(s) => {
                if s.nrows() != n {
                    return invalid(format!("graph matrix is {}×{}, expected {n}×{n}", s.nrows(), s.ncols()));
                }
                let mut m = DMatrix::zeros(2 * n, n);
                m.view_mut((0, 0), (n, n)).copy_from(s);
                m.view_mut((n, 0), (n, n)).fill_with_identity();
                LagrangianFrame::new(Frame::orthonormalize(&m)?)
            }
            Self::Custom { eval, .. } => {
                let f = eval(x)?;
                if f.half_dim() != n {
                    return invalid("custom distribution returned a frame of the wrong dimension");
                }
                Ok(f)
            }
        }
    }
}
