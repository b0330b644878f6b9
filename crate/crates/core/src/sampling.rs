//! Seeded sampling of rational points with pole resampling.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::Point;
use crate::scalar::CRational;

/// How sample points are drawn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub seed: u64,
    pub trials: usize,
    /// Numerators are drawn from `-max_numerator..=max_numerator`.
    pub max_numerator: u32,
    /// Denominators are drawn from `1..=max_denominator`.
    pub max_denominator: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            seed: 20_240_601,
            trials: 10,
            max_numerator: 97,
            max_denominator: 97,
        }
    }
}

impl SamplingConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplingConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn bounded(mut self, max_numerator: u32, max_denominator: u32) -> Self {
        self.max_numerator = max_numerator;
        self.max_denominator = max_denominator;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SamplingError {
    #[error("gave up after {attempts} attempts: only {found} of {wanted} sample points avoided poles")]
    Exhausted {
        attempts: usize,
        found: usize,
        wanted: usize,
    },
    #[error("sampling needs at least one trial")]
    NoTrials,
}

/// Deterministic stream of exact rational points.
pub struct PointStream {
    rng: ChaCha8Rng,
    n: usize,
    max_num: i64,
    max_den: i64,
}

impl PointStream {
    pub fn new(n: usize, cfg: &SamplingConfig) -> Self {
        PointStream {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            n,
            max_num: cfg.max_numerator.max(1) as i64,
            max_den: cfg.max_denominator.max(1) as i64,
        }
    }

    pub fn next_rational(&mut self) -> CRational {
        let num = self.rng.random_range(-self.max_num..=self.max_num);
        let den = self.rng.random_range(1..=self.max_den);
        CRational::real(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn next_coords(&mut self) -> Vec<CRational> {
        (0..self.n).map(|_| self.next_rational()).collect()
    }

    /// Exact point, or its floating image when `exact` is false.
    pub fn next_point(&mut self, exact: bool) -> Point {
        let coords = self.next_coords();
        if exact {
            Point::Exact(coords)
        } else {
            Point::Float(coords.iter().map(CRational::to_complex).collect())
        }
    }
}

/// Outcome of [`sample_points`].
#[derive(Clone, Debug)]
pub struct Samples<T> {
    pub results: Vec<(Point, T)>,
    /// Points discarded because `probe` hit a pole.
    pub resamples: usize,
}

/// Evaluates `probe` at `cfg.trials` points that avoid poles.
///
/// `probe` returns `Ok(None)` to request a resample. Points are drawn in
/// batches and evaluated in parallel; the kept points are always the first
/// successful ones in stream order, so the result only depends on the seed.
/// Gives up after `10 × trials` draws.
pub fn sample_points<T, E, F>(
    n: usize,
    cfg: &SamplingConfig,
    exact: bool,
    probe: F,
) -> Result<Samples<T>, E>
where
    T: Send,
    E: Send + From<SamplingError>,
    F: Fn(&Point) -> Result<Option<T>, E> + Sync,
{
    if cfg.trials == 0 {
        return Err(SamplingError::NoTrials.into());
    }
    let mut stream = PointStream::new(n, cfg);
    let limit = 10 * cfg.trials;
    let mut drawn = 0;
    let mut results = Vec::with_capacity(cfg.trials);
    while results.len() < cfg.trials {
        if drawn >= limit {
            return Err(SamplingError::Exhausted {
                attempts: drawn,
                found: results.len(),
                wanted: cfg.trials,
            }
            .into());
        }
        let batch = (cfg.trials - results.len()).min(limit - drawn);
        let points: Vec<Point> = (0..batch).map(|_| stream.next_point(exact)).collect();
        drawn += batch;
        let evaluated: Vec<Result<Option<T>, E>> = points.par_iter().map(&probe).collect();
        for (p, r) in points.into_iter().zip(evaluated) {
            if let Some(v) = r? {
                if results.len() < cfg.trials {
                    results.push((p, v));
                }
            }
        }
    }
    Ok(Samples {
        results,
        resamples: drawn - cfg.trials,
    })
}
