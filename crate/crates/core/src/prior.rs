//! Prior hierarchy shared by both samplers.
//!
//! ```text
//! theta_j | tau_j^2, sigma^2 ~ N(0, sigma^2 tau_j^2 I_{g_j})   (slab)
//! tau_j^2                    ~ Gamma((g_j + 1) / 2, lambda_j^2 / 2)
//! sigma^2                    ~ Inv-Gamma(a1, b1)
//! pi0                        ~ Beta(c, d)                      (spike-and-slab only)
//! ```

use statrs::function::gamma::ln_gamma;

/// Shape and rate of the Gamma prior on `tau_j^2`.
pub fn tau2_prior(group_size: usize, lambda2: f64) -> (f64, f64) {
    ((group_size as f64 + 1.0) / 2.0, lambda2 / 2.0)
}

pub fn log_tau2_prior_density(tau2: f64, group_size: usize, lambda2: f64) -> f64 {
    let (shape, rate) = tau2_prior(group_size, lambda2);
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * tau2.ln() - rate * tau2
}

/// Log density of the normal slab `N(0, sigma^2 tau^2 I)` at `theta`.
pub fn log_slab_density(theta: &[f64], sigma2: f64, tau2: f64) -> f64 {
    let g = theta.len() as f64;
    let var = sigma2 * tau2;
    let sq: f64 = theta.iter().map(|v| v * v).sum();
    -0.5 * g * (2.0 * std::f64::consts::PI * var).ln() - sq / (2.0 * var)
}

/// Log of the normalized Multi-Laplace density obtained by integrating
/// `tau^2` out of the slab:
/// `(lambda/sigma)^g (2 pi)^((1-g)/2) 2^(-(g+1)/2) / Gamma((g+1)/2) exp(-lambda ||theta|| / sigma)`.
pub fn log_multi_laplace_density(theta: &[f64], sigma: f64, lambda: f64) -> f64 {
    let g = theta.len() as f64;
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    g * (lambda / sigma).ln() + 0.5 * (1.0 - g) * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * (g + 1.0) * 2f64.ln()
        - ln_gamma(0.5 * (g + 1.0))
        - lambda * norm / sigma
}

/// Default Beta prior for `pi0`: `c = kbar G^v` with `kbar = v = 1 + 1/G`, `d = 1`.
pub fn default_beta_prior(n_groups: usize) -> (f64, f64) {
    let g = n_groups.max(1) as f64;
    let kv = 1.0 + 1.0 / g;
    (kv * g.powf(kv), 1.0)
}
