//! Random variate generation and log densities for every distribution family
//! the generative model uses.

pub mod dist;
pub mod rng;
pub mod special;

pub use dist::{
    Bernoulli, Beta, Categorical, Dirichlet, Gamma, GammaMixture, HalfNormal, Moments, NegBinomial, Normal, Poisson,
    TruncatedNormal, Uniform, Weibull,
};
pub use rng::Rng;
