//! Learning a diagonal GMM by simplifying a kernel density estimator under
//! the softmin-relaxed transport KL objective, plus the EM and PCA helpers
//! used by the experiments.

mod em;
mod init;
mod objective;
mod pca;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use em::{fit_em, fit_em_with, EmConfig, EmFit};
pub use objective::{
    scrot_kl_objective, scrot_kl_objective_with_coupling, softmin_weights, GradientMode,
    ObjectiveEval,
};
pub use pca::{pca_fit_transform, Pca};

use crate::error::{Error, Result};
use crate::estimators::{kl_eval_bound, mc_kl, McConfig};
use crate::mixture::{Component, Kde, Mixture};
use crate::points::Points;
use crate::rng::{derive_seed, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Number of GMM components.
    pub components: usize,
    /// Softmin sharpness.
    pub lambda: f64,
    /// KDE bandwidth (kernel variance).
    pub bandwidth: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub variance_floor: f64,
    pub gradient: GradientMode,
    pub seed: u64,
    /// Monte Carlo settings for the per-epoch test evaluation.
    pub eval: McConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            components: 10,
            lambda: 0.005,
            bandwidth: 1e-6,
            batch_size: 256,
            epochs: 100,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            variance_floor: 1e-8,
            gradient: GradientMode::StopGradient,
            seed: 0,
            eval: McConfig::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::param("components", "must be at least 1"));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("bandwidth", self.bandwidth),
            ("learning_rate", self.learning_rate),
            ("variance_floor", self.variance_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} is not positive")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        self.eval.validate()
    }
}

/// Per-epoch trajectory entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch objective over the epoch.
    pub objective: f64,
    /// Objective on the full test KDE, when one is given.
    pub test_objective: Option<f64>,
    /// Entropy-bound KL estimate against the test KDE.
    pub kl_eval: Option<f64>,
    /// Monte Carlo `KL(test KDE : gmm)` and its standard error.
    pub test_kl: Option<f64>,
    pub test_kl_stderr: Option<f64>,
}

/// GMM parameters together with the training trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnState {
    pub gmm: Mixture,
    pub trajectory: Vec<EpochRecord>,
    pub epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &LearnConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * grad[k];
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.adam_epsilon);
        }
    }
}

/// Trainable parameters: means and log standard deviations, row-major
/// `m x d` each, and the current mixture weights.
struct Model {
    m: usize,
    d: usize,
    mean: Vec<f64>,
    log_sigma: Vec<f64>,
    weights: Vec<f64>,
    floor: f64,
}

impl Model {
    fn mixture(&self) -> Result<Mixture> {
        let comps = (0..self.m)
            .map(|j| {
                let mu = self.mean[j * self.d..(j + 1) * self.d].to_vec();
                let var = self.log_sigma[j * self.d..(j + 1) * self.d]
                    .iter()
                    .map(|ls| (2.0 * ls).exp().max(self.floor))
                    .collect();
                Component::gaussian_diag(mu, var)
            })
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(self.weights.clone(), comps)
    }

    fn clamp(&mut self) {
        let lo = 0.5 * self.floor.ln();
        self.log_sigma.iter_mut().for_each(|ls| *ls = ls.max(lo));
    }
}

fn kernels(data: &Points, idx: &[usize], eps: f64) -> Result<Vec<Component>> {
    idx.iter()
        .map(|&i| Component::gaussian_diag(data.row(i).to_vec(), vec![eps; data.dim()]))
        .collect()
}

/// Column masses of the softmin coupling over the whole data set, scaled
/// to sum to one.
fn column_mass(all: &[Component], gmm: &Mixture, lambda: f64) -> Result<Vec<f64>> {
    let w = softmin_weights(all, gmm, lambda)?;
    let cols = w.col_sums();
    let total: f64 = cols.iter().sum();
    Ok(cols.iter().map(|c| c / total).collect())
}

/// Fits a GMM to `data`; see [`fit_scrot_observed`].
pub fn fit_scrot(data: &Points, cfg: &LearnConfig) -> Result<LearnState> {
    fit_scrot_observed(data, None, cfg, |_| {})
}

/// Minibatch training of the GMM against the KDE of `data`.
///
/// Each minibatch recomputes the softmin coupling from the current
/// parameters and takes one Adam step on `(mu_j, log sigma_j)`. After each
/// epoch the mixture weights are set to the coupling's column masses over
/// the training set. With a `test` KDE every epoch also records the test
/// objective, the entropy-bound KL estimate and a Monte Carlo KL. The
/// observer sees the state after every epoch.
pub fn fit_scrot_observed(
    data: &Points,
    test: Option<&Kde>,
    cfg: &LearnConfig,
    mut observer: impl FnMut(&LearnState),
) -> Result<LearnState> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("no training data".into()));
    }
    if let Some(t) = test {
        if t.points().dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: t.points().dim(),
            });
        }
    }
    let (m, d) = (cfg.components, data.dim());
    let mut rng = seeded(derive_seed(cfg.seed, &[0]));
    let seeds = init::farthest_points(data, m, &mut rng)?;
    let data_var = data.variance();
    let mut model = Model {
        m,
        d,
        mean: seeds.iter().flat_map(|&i| data.row(i).to_vec()).collect(),
        log_sigma: (0..m)
            .flat_map(|_| data_var.iter().map(|v| 0.5 * v.max(cfg.variance_floor).ln()))
            .collect(),
        weights: vec![1.0 / m as f64; m],
        floor: cfg.variance_floor,
    };
    let all_idx: Vec<usize> = (0..data.len()).collect();
    let all_kernels = kernels(data, &all_idx, cfg.bandwidth)?;
    let mut adam_mean = Adam::new(m * d);
    let mut adam_sigma = Adam::new(m * d);
    let mut state = LearnState {
        gmm: model.mixture()?,
        trajectory: Vec::new(),
        epoch: 0,
    };
    let mut order = all_idx.clone();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = kernels(data, chunk, cfg.bandwidth)?;
            let gmm = model.mixture()?;
            let e = scrot_kl_objective(&batch, &gmm, cfg.lambda, cfg.gradient)?;
            let finite = e.value.is_finite()
                && e.grad_mean.iter().chain(e.grad_log_sigma.iter()).all(|g| g.is_finite());
            if !finite {
                return Err(Error::TrainingDiverged {
                    epoch,
                    last_state: Box::new(state),
                });
            }
            total += e.value;
            batches += 1;
            adam_mean.step(&mut model.mean, e.grad_mean.as_slice(), cfg);
            adam_sigma.step(&mut model.log_sigma, e.grad_log_sigma.as_slice(), cfg);
            model.clamp();
        }
        let unweighted = model.mixture()?;
        model.weights = column_mass(&all_kernels, &unweighted, cfg.lambda)?;
        let gmm = model.mixture()?;
        let mut record = EpochRecord {
            epoch,
            objective: total / batches as f64,
            test_objective: None,
            kl_eval: None,
            test_kl: None,
            test_kl_stderr: None,
        };
        if let Some(t) = test {
            let eval = McConfig {
                seed: derive_seed(cfg.eval.seed, &[epoch as u64]),
                ..cfg.eval
            };
            let obj = scrot_kl_objective(t.kernels(), &gmm, cfg.lambda, GradientMode::StopGradient)?;
            let kl = mc_kl(t, &gmm, &eval)?;
            record.test_objective = Some(obj.value);
            record.kl_eval = Some(kl_eval_bound(t, &gmm, &eval)?.estimate);
            record.test_kl = Some(kl.estimate);
            record.test_kl_stderr = Some(kl.stderr);
        }
        if !record.objective.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                last_state: Box::new(state),
            });
        }
        state.gmm = gmm;
        state.trajectory.push(record);
        state.epoch = epoch;
        observer(&state);
    }
    Ok(state)
}
