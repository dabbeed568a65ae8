use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::NetError;

/// How link delays are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelayModel {
    Constant { delay: f64 },
    /// Log-normal with the given arithmetic mean; `sigma` is the shape of the
    /// underlying normal.
    Lognormal { mean: f64, sigma: f64 },
    /// Nodes sit at uniform random points of the unit cube; a link costs
    /// `base + scale * distance`.
    LatentPosition { dimensions: usize, base: f64, scale: f64 },
}

impl DelayModel {
    pub fn validate(&self) -> Result<(), NetError> {
        let ok = match *self {
            DelayModel::Constant { delay } => delay > 0.0,
            DelayModel::Lognormal { mean, sigma } => mean > 0.0 && sigma >= 0.0 && sigma.is_finite(),
            DelayModel::LatentPosition { dimensions, base, scale } => {
                dimensions > 0 && base >= 0.0 && scale >= 0.0 && base + scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(NetError::BadDelayModel(format!("{self:?}")))
        }
    }

    pub fn needs_positions(&self) -> bool {
        matches!(self, DelayModel::LatentPosition { .. })
    }

    /// Mean link delay where it is known in closed form.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            DelayModel::Constant { delay } => Some(delay),
            DelayModel::Lognormal { mean, .. } => Some(mean),
            DelayModel::LatentPosition { .. } => None,
        }
    }
}

/// Random coordinates in the unit cube for the latent-position model.
pub fn latent_positions<R: Rng + ?Sized>(n: usize, dimensions: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dimensions).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Draws link delays; holds node positions when the model needs them.
#[derive(Debug, Clone)]
pub struct DelaySampler<'a> {
    model: &'a DelayModel,
    lognormal: Option<LogNormal<f64>>,
    positions: Option<&'a [Vec<f64>]>,
}

impl<'a> DelaySampler<'a> {
    pub fn new(model: &'a DelayModel, positions: Option<&'a [Vec<f64>]>) -> Result<Self, NetError> {
        model.validate()?;
        if model.needs_positions() && positions.is_none() {
            return Err(NetError::MissingPositions);
        }
        let lognormal = match *model {
            DelayModel::Lognormal { mean, sigma } => Some(
                LogNormal::new(mean.ln() - sigma * sigma / 2.0, sigma)
                    .map_err(|e| NetError::BadDelayModel(e.to_string()))?,
            ),
            _ => None,
        };
        Ok(DelaySampler { model, lognormal, positions })
    }

    /// Delay of the link between global nodes `a` and `b`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, a: u32, b: u32) -> f64 {
        match *self.model {
            DelayModel::Constant { delay } => delay,
            DelayModel::Lognormal { .. } => self.lognormal.expect("built in new").sample(rng),
            DelayModel::LatentPosition { base, scale, .. } => {
                let pos = self.positions.expect("checked in new");
                let (pa, pb) = (&pos[a as usize], &pos[b as usize]);
                let dist = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                base + scale * dist
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lognormal_mean_matches_configuration() {
        let model = DelayModel::Lognormal { mean: 0.1, sigma: 0.5 };
        let s = DelaySampler::new(&model, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mean = (0..n).map(|_| s.sample(&mut rng, 0, 1)).sum::<f64>() / n as f64;
        assert!((mean - 0.1).abs() < 0.001, "{mean}");
    }

    #[test]
    fn latent_position_needs_positions() {
        let model = DelayModel::LatentPosition { dimensions: 2, base: 0.01, scale: 0.1 };
        assert!(matches!(DelaySampler::new(&model, None), Err(NetError::MissingPositions)));
        let pos = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        let s = DelaySampler::new(&model, Some(&pos)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((s.sample(&mut rng, 0, 1) - 0.51).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_delay() {
        assert!(DelayModel::Constant { delay: 0.0 }.validate().is_err());
    }
}
