//! Random variate generation for the Gibbs kernels.
//!
//! Every sampler takes a generic `Rng`, so the same code runs on the seeded
//! [`RngHandle`] used by chains and on any other generator in tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Seeded generator for one chain or replication.
///
/// Identical `(seed, stream_id)` pairs produce bit-identical sequences;
/// distinct stream ids give independent ChaCha streams for the same seed.
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Uniform draw on the open-closed interval (0, 1].
#[inline]
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Gamma(shape, rate) with density proportional to `x^(shape-1) exp(-rate x)`.
///
/// Marsaglia–Tsang squeeze for shape >= 1; shapes below one use the
/// `Gamma(shape + 1) * U^(1/shape)` boost.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    check_positive("gamma rate", rate)?;
    Ok(standard_gamma(shape, rng) / rate)
}

fn standard_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let boost = open_uniform(rng).powf(1.0 / shape);
        return standard_gamma(shape + 1.0, rng) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = standard_normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = open_uniform(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Inverse-Gamma(shape, rate): the reciprocal of a Gamma(shape, rate) draw.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    Ok(1.0 / sample_gamma(shape, rate, rng)?)
}

/// Inverse-Gaussian(mean, shape) via the Michael–Schucany–Haas transformation.
///
/// The smaller root is computed in rationalized form so that very large
/// means (tiny coefficient norms in the Gibbs sweep) do not cancel to zero.
pub fn sample_inv_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> Result<f64> {
    check_positive("inverse-Gaussian mean", mean)?;
    check_positive("inverse-Gaussian shape", shape)?;
    let nu = standard_normal(rng);
    let y = nu * nu;
    let w = mean * y / (2.0 * shape);
    let x = mean / (1.0 + w + (w * w + 2.0 * w).sqrt());
    let u = rng.random::<f64>();
    if u <= mean / (mean + x) {
        Ok(x)
    } else {
        Ok(mean * mean / x)
    }
}

/// Beta(a, b) as a ratio of independent Gamma draws.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    check_positive("beta a", a)?;
    check_positive("beta b", b)?;
    loop {
        let x = standard_gamma(a, rng);
        let y = standard_gamma(b, rng);
        let total = x + y;
        if total > 0.0 {
            let draw = x / total;
            // Keep the draw strictly inside (0, 1) for the spike probability.
            if draw > 0.0 && draw < 1.0 {
                return Ok(draw);
            }
        }
    }
}

/// Multivariate normal draw `mean + factor * z` with `z` standard normal.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = mean.len();
    if factor.nrows() != n || factor.ncols() != n {
        return Err(Error::Shape(format!(
            "covariance factor is {}x{}, mean has length {n}",
            factor.nrows(),
            factor.ncols()
        )));
    }
    if factor.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite entry in covariance factor"));
    }
    let z = DVector::from_fn(n, |_, _| standard_normal(rng));
    Ok(mean + factor * z)
}
