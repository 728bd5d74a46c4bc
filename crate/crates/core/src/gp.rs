//! Gaussian-process machinery: Matérn-5/2 kernel, map-prior posterior,
//! UCB acquisition, heteroscedastic observation noise, and the multiplicative
//! local-penalisation factor used by the decentralised optimiser.
//!
//! The model regresses the *residual* between measured performance and a
//! prior mean supplied per query point, so the posterior mean is
//! `prior(x) + k' K^{-1} (f - P)` and the variance `k(x,x) - k' K^{-1} k`,
//! with per-sample noise on the diagonal of `K`. The kernel has unit signal
//! variance; overall scale is absorbed by the prior.

use thiserror::Error;

use crate::grid::GridShape;
use crate::scalar::{real, Scalar};

#[derive(Debug, Error)]
pub enum GpError {
    #[error(
        "kernel matrix not positive definite after jitter escalation \
         (t = {size}, max jitter = {max_jitter:.1e}, diagonal in [{diag_min:.3e}, {diag_max:.3e}])"
    )]
    NotPositiveDefinite {
        size: usize,
        max_jitter: f64,
        diag_min: f64,
        diag_max: f64,
    },
    #[error("invalid kernel configuration: {0}")]
    InvalidConfig(String),
}

/// Hyperparameters shared by every model in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig<F> {
    /// Matérn length-scale, in descriptor-space units.
    pub rho: F,
    /// Fixed observation-noise variance used by the centralised optimiser.
    pub noise_var: F,
    /// UCB exploration weight.
    pub alpha: F,
}

impl<F: Scalar> Default for KernelConfig<F> {
    fn default() -> Self {
        Self {
            rho: real(0.1),
            noise_var: real(0.01),
            alpha: real(0.9),
        }
    }
}

impl<F: Scalar> KernelConfig<F> {
    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.rho > F::zero()) {
            return Err(GpError::InvalidConfig(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.noise_var >= F::zero()) {
            return Err(GpError::InvalidConfig(format!(
                "noise_var must be >= 0, got {}",
                self.noise_var
            )));
        }
        if !(self.alpha >= F::zero()) {
            return Err(GpError::InvalidConfig(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[inline]
fn euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut s = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

/// Matérn kernel with ν = 5/2 and unit signal variance:
/// `(1 + √5 d/ρ + 5d²/(3ρ²)) exp(−√5 d/ρ)` with `d = ‖xi − xj‖₂`.
pub fn matern52<F: Scalar>(xi: &[F], xj: &[F], rho: F) -> F {
    let a = real::<F>(5.0).sqrt() * euclidean(xi, xj) / rho;
    (F::one() + a + a * a / real(3.0)) * (-a).exp()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
struct CholeskyFactor<F> {
    l: Vec<F>,
    n: usize,
}

impl<F: Scalar> CholeskyFactor<F> {
    /// Plain LL' decomposition; `None` if a non-positive pivot appears.
    fn decompose(a: &[F], n: usize) -> Option<Self> {
        let mut l = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > F::zero()) {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { l, n })
    }

    /// Solve `L L' x = b`.
    fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

/// Gaussian process over behaviour descriptors with a per-query prior mean.
///
/// Stores samples `x_{1:t}`, observations `f_{1:t}`, the prior values
/// `P_{1:t}` at the samples, and per-sample noise variances.
#[derive(Debug, Clone)]
pub struct GpModel<F> {
    config: KernelConfig<F>,
    xs: Vec<Vec<F>>,
    fs: Vec<F>,
    priors: Vec<F>,
    noises: Vec<F>,
}

impl<F: Scalar> GpModel<F> {
    pub fn new(config: KernelConfig<F>) -> Result<Self, GpError> {
        config.validate()?;
        Ok(Self {
            config,
            xs: Vec::new(),
            fs: Vec::new(),
            priors: Vec::new(),
            noises: Vec::new(),
        })
    }

    pub fn config(&self) -> &KernelConfig<F> {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn samples(&self) -> &[Vec<F>] {
        &self.xs
    }

    pub fn observations(&self) -> &[F] {
        &self.fs
    }

    pub fn priors(&self) -> &[F] {
        &self.priors
    }

    pub fn noises(&self) -> &[F] {
        &self.noises
    }

    /// Add an observation `f` at `x` with prior mean `prior` and noise
    /// variance `noise` on the corresponding diagonal entry of `K`.
    pub fn push(&mut self, x: Vec<F>, f: F, prior: F, noise: F) {
        debug_assert!(noise >= F::zero());
        self.xs.push(x);
        self.fs.push(f);
        self.priors.push(prior);
        self.noises.push(noise);
    }

    /// Factorise the current kernel matrix. Queries go through the returned
    /// [`GpPosterior`]; refit after each `push`.
    pub fn fit(&self) -> Result<GpPosterior<'_, F>, GpError> {
        let t = self.len();
        if t == 0 {
            return Ok(GpPosterior {
                model: self,
                chol: None,
                weights: Vec::new(),
            });
        }
        let mut k = vec![F::zero(); t * t];
        for i in 0..t {
            for j in 0..t {
                k[i * t + j] = matern52(&self.xs[i], &self.xs[j], self.config.rho);
            }
            k[i * t + i] += self.noises[i];
        }
        let chol = self.decompose_with_jitter(&mut k, t)?;
        let resid: Vec<F> = self
            .fs
            .iter()
            .zip(&self.priors)
            .map(|(&f, &p)| f - p)
            .collect();
        let weights = chol.solve(&resid);
        Ok(GpPosterior {
            model: self,
            chol: Some(chol),
            weights,
        })
    }

    /// Posterior mean and variance at `x`, given the prior mean at `x`.
    /// Convenience wrapper that factorises per call; use [`GpModel::fit`]
    /// when scanning many candidates.
    pub fn posterior(&self, x: &[F], prior_x: F) -> Result<(F, F), GpError> {
        Ok(self.fit()?.posterior(x, prior_x))
    }

    fn decompose_with_jitter(&self, k: &mut [F], t: usize) -> Result<CholeskyFactor<F>, GpError> {
        if let Some(c) = CholeskyFactor::decompose(k, t) {
            return Ok(c);
        }
        // jitter escalation 1e-10 -> 1e-6
        let mut jitter = 1e-10f64;
        while jitter <= 1e-6 {
            let mut kj = k.to_vec();
            for i in 0..t {
                kj[i * t + i] += real::<F>(jitter);
            }
            if let Some(c) = CholeskyFactor::decompose(&kj, t) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        let mut diag_min = f64::INFINITY;
        let mut diag_max = f64::NEG_INFINITY;
        for i in 0..t {
            let d = k[i * t + i].to_f64().unwrap_or(f64::NAN);
            diag_min = diag_min.min(d);
            diag_max = diag_max.max(d);
        }
        Err(GpError::NotPositiveDefinite {
            size: t,
            max_jitter: 1e-6,
            diag_min,
            diag_max,
        })
    }

    /// Debug dump of the model state (samples, observations, priors, noise).
    pub fn dump(&self) -> String {
        let mut out = String::from("t\tx\tf\tprior\tnoise\n");
        for i in 0..self.len() {
            let x: Vec<String> = self.xs[i].iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                i,
                x.join(","),
                self.fs[i],
                self.priors[i],
                self.noises[i]
            ));
        }
        out
    }
}

/// Factorised model ready for posterior queries.
pub struct GpPosterior<'a, F> {
    model: &'a GpModel<F>,
    chol: Option<CholeskyFactor<F>>,
    /// `K^{-1} (f_{1:t} - P_{1:t})`
    weights: Vec<F>,
}

impl<F: Scalar> GpPosterior<'_, F> {
    /// Posterior mean and variance at `x` given the prior mean there.
    ///
    /// With no observations this is the prior belief:
    /// mean `prior_x`, variance `k(x,x) + noise_var`.
    pub fn posterior(&self, x: &[F], prior_x: F) -> (F, F) {
        let Some(chol) = &self.chol else {
            return (prior_x, F::one() + self.model.config.noise_var);
        };
        let t = self.model.len();
        let mut kvec = Vec::with_capacity(t);
        for xi in &self.model.xs {
            kvec.push(matern52(x, xi, self.model.config.rho));
        }
        let mut mean = prior_x;
        for i in 0..t {
            mean += kvec[i] * self.weights[i];
        }
        let v = chol.solve(&kvec);
        let mut var = F::one();
        for i in 0..t {
            var -= kvec[i] * v[i];
        }
        (mean, var.max(F::zero()))
    }
}

/// A map bin offered to the acquisition step.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a, F> {
    pub bin: usize,
    pub x: &'a [F],
    /// Prior mean at this bin.
    pub prior: F,
}

/// UCB acquisition: argmax over candidates of `mean + alpha * std`.
/// Ties break towards the lowest bin index. Returns `None` when the
/// candidate set is empty (search space exhausted).
pub fn ucb<F: Scalar>(
    posterior: &GpPosterior<'_, F>,
    candidates: &[Candidate<'_, F>],
    alpha: F,
) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for c in candidates {
        let (mean, var) = posterior.posterior(c.x, c.prior);
        let score = mean + alpha * var.sqrt();
        best = match best {
            None => Some((c.bin, score)),
            Some((bb, bs)) => {
                if score > bs || (score == bs && c.bin < bb) {
                    Some((c.bin, score))
                } else {
                    Some((bb, bs))
                }
            }
        };
    }
    best.map(|(bin, _)| bin)
}

/// A descriptor currently under evaluation by some worker.
#[derive(Debug, Clone, PartialEq)]
pub struct BusySample<F> {
    pub bin: usize,
    pub x: Vec<F>,
}

/// State backing the local-penalisation factor.
#[derive(Debug, Clone)]
pub struct PenalisationState<F> {
    /// Lipschitz estimate for the behaviour space, fitness per descriptor unit.
    pub lipschitz: F,
    /// Running estimate of the maximum of `f`.
    pub max_estimate: F,
    /// Samples currently being evaluated.
    pub busy: Vec<BusySample<F>>,
}

impl<F: Scalar> PenalisationState<F> {
    pub fn new(lipschitz: F, max_estimate: F) -> Self {
        Self {
            lipschitz,
            max_estimate,
            busy: Vec::new(),
        }
    }

    pub fn observe(&mut self, f: F) {
        if f > self.max_estimate {
            self.max_estimate = f;
        }
    }
}

/// Penalty factor for one busy sample:
/// `φ = ½ erfc(−z)`, `z = (L‖x − x̃‖ − M + μ(x)) / (√2 σ(x))`.
/// `μ`/`σ` are the posterior mean and standard deviation at the candidate.
/// At `σ = 0` the limit by sign of the numerator is used.
fn phi<F: Scalar>(state: &PenalisationState<F>, mean_x: F, std_x: F, x: &[F], busy: &BusySample<F>) -> F {
    let num = state.lipschitz * euclidean(x, &busy.x) - state.max_estimate + mean_x;
    if std_x == F::zero() {
        return if num > F::zero() {
            F::one()
        } else if num < F::zero() {
            F::zero()
        } else {
            real(0.5)
        };
    }
    let z = num / (real::<F>(2.0).sqrt() * std_x);
    real::<F>(0.5) * Scalar::erfc(-z)
}

/// Multiplicative penalty over all busy samples; 1 when none are busy.
pub fn local_penalty<F: Scalar>(
    state: &PenalisationState<F>,
    mean_x: F,
    std_x: F,
    x: &[F],
) -> F {
    let mut m = F::one();
    for b in &state.busy {
        m = m * phi(state, mean_x, std_x, x, b);
    }
    m
}

/// Penalised UCB: argmax of `[mean + alpha*std] * Π φ` over candidates.
/// Ties break towards the lowest bin index.
pub fn ucb_penalised<F: Scalar>(
    posterior: &GpPosterior<'_, F>,
    state: &PenalisationState<F>,
    candidates: &[Candidate<'_, F>],
    alpha: F,
) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for c in candidates {
        let (mean, var) = posterior.posterior(c.x, c.prior);
        let std = var.sqrt();
        let score = (mean + alpha * std) * local_penalty(state, mean, std, c.x);
        best = match best {
            None => Some((c.bin, score)),
            Some((bb, bs)) => {
                if score > bs || (score == bs && c.bin < bb) {
                    Some((c.bin, score))
                } else {
                    Some((bb, bs))
                }
            }
        };
    }
    best.map(|(bin, _)| bin)
}

/// Lower bound applied to the Lipschitz estimate.
pub const LIPSCHITZ_FLOOR: f64 = 1e-6;

/// One map bin feeding the Lipschitz estimate.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzPoint<'a, F> {
    pub bin: usize,
    pub x: &'a [F],
    pub fitness: F,
}

/// Largest finite-difference slope `|Δfitness| / ‖Δdescriptor‖` over pairs of
/// axis-adjacent non-empty bins, floored at [`LIPSCHITZ_FLOOR`]. Pairs whose
/// descriptors coincide are skipped.
pub fn estimate_lipschitz<F: Scalar>(points: &[LipschitzPoint<'_, F>], grid: &GridShape) -> F {
    let floor = real::<F>(LIPSCHITZ_FLOOR);
    let mut by_bin = std::collections::BTreeMap::new();
    for p in points {
        by_bin.insert(p.bin, p);
    }
    let mut best = floor;
    for (&bin, p) in &by_bin {
        for nb in grid.axis_neighbors(bin) {
            if nb <= bin {
                continue; // each unordered pair once
            }
            if let Some(q) = by_bin.get(&nb) {
                let dist = euclidean(p.x, q.x);
                if dist > F::zero() {
                    let slope = (p.fitness - q.fitness).abs() / dist;
                    if slope > best {
                        best = slope;
                    }
                }
            }
        }
    }
    best
}
