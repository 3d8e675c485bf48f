use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain the operation is defined on.
    #[error("input out of domain: {0}")]
    InputDomain(String),

    /// Exact enumeration would visit more outcomes than allowed.
    #[error("enumeration needs {outcomes} outcomes, budget is {budget}; use Monte Carlo instead")]
    OutcomeBudget { outcomes: u128, budget: u64 },

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimated error {error_estimate:e})")]
    Quadrature { error_estimate: f64, subdivisions: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::InputDomain(msg.into())
    }

    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}
