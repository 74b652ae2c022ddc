//! Option pricing under a stochastic-variance mixture: the log-price is Black-Scholes given
//! its integrated variance, and the variance is the terminal value of a CEV process.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod asymptotics;
pub mod bsm;
pub mod cev_dist;
pub mod mc_oracle;
pub mod mgf;
pub mod mixture;
pub mod pricer;
pub mod quadrature;
pub mod specfun;

pub use asymptotics::{AsymptoticsError, AtmSkewConvexity, LargeTimePrice, LdpSpeedRate, SmallTimeConstants, SmallTimeRegime};
pub use bsm::{BsError, BsPartials, BsQuote};
pub use cev_dist::{BoundaryBehaviour, CevConstants, CevModel, DistError, Moment, ModelError, Regime};
pub use mc_oracle::{McError, McEstimate, Sampler};
pub use mgf::{LeeWings, MgfDomain, MgfError};
pub use mixture::{LogIntegral, QuadratureConfig};
pub use pricer::{PriceDetail, PricingError, SkewConvexity, SmilePoint};
pub use specfun::SpecfunError;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Bs(#[from] BsError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Asymptotics(#[from] AsymptoticsError),
    #[error(transparent)]
    Mgf(#[from] MgfError),
    #[error(transparent)]
    Mc(#[from] McError),
}

impl Error {
    /// True for failures of the numerical method rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Pricing(PricingError::ToleranceNotMet { .. })
                | Error::Asymptotics(AsymptoticsError::Divergent(_))
                | Error::Bs(BsError::AboveCap { .. } | BsError::NoArbitrage { .. })
        )
    }
}
