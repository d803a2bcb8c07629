use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse number {0:?}")]
pub struct ParseNumberError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseNumberError),

    #[error("invalid input: {0}")]
    Schema(String),

    #[error("market needs at least {required} buyers, got {got}")]
    TooFewBuyers { required: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("buyer {0} has no positive utility")]
    ZeroUtilityRow(usize),

    #[error("buyer {0} has nonpositive money")]
    NonpositiveMoney(usize),

    #[error("negative entry at ({0}, {1})")]
    NegativeEntry(usize, usize),

    #[error("strategy row of buyer {0} sums to zero")]
    ZeroStrategyRow(usize),

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("price of good {good} collapsed to {price:e}")]
    PriceCollapse { good: usize, price: f64 },

    #[error("allocation polytope is infeasible for the given outcome")]
    InfeasiblePolytope,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),

    #[error("perturbation step size is not positive (cap {0:e})")]
    DegenerateAlphaCap(f64),

    #[error("cycles through buyer {buyer} persist after {iterations} conflict-removal rounds")]
    IterationOverrun { buyer: usize, iterations: usize },

    #[error("tolerance {0:e} is too small for the numerical resolution")]
    ToleranceTooSmall(f64),

    #[error("search grid of {0} points exceeds the budget")]
    SearchBudgetExceeded(u128),

    #[error("two-buyer operation requires exactly 2 buyers, got {0}")]
    NotTwoBuyers(usize),

    #[error("payoff point does not lie on the NE payoff curve")]
    PointOffCurve,

    #[error("exchange ratio interval empty for goods {0} and {1}")]
    RatioIntervalEmpty(usize, usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid tolerance configuration: {0}")]
    Tolerance(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
