use super::mcmc::PosteriorEnsemble;
use super::space::Params;
use crate::error::{Error, Result};
use crate::kernel::Rng;

/// Draw `n` outputs, each from `generator` applied to a uniformly chosen
/// posterior draw.
pub fn posterior_predictive<T, G>(n: usize, ensemble: &PosteriorEnsemble, rng: &mut Rng, mut generator: G) -> Result<Vec<T>>
where
    G: FnMut(&Params, &mut Rng) -> Result<T>,
{
    if ensemble.is_empty() {
        return Err(Error::TooFewDraws { needed: 1, got: 0 });
    }
    (0..n)
        .map(|_| {
            let i = rng.below(ensemble.len());
            generator(&ensemble.draw(i), rng)
        })
        .collect()
}
