//! Censorship-aware expectation-maximization.
//!
//! The learner alternates two steps. The E-step imputes a soft pseudo-label
//! for every example: the observed label where the example was tested
//! (exact, no forward pass), the current model probability otherwise. The
//! M-step refits the outcome model on the loss
//!
//! ```text
//! bce(q, y_hat) + q * bce(y_obs, y_hat * t_hat)
//! ```
//!
//! whose second term is the causal regularizer: for untested examples it
//! pushes `y_hat` down by an amount that grows with the estimated testing
//! propensity `t_hat`, counterbalancing the censorship; for tested examples
//! its optimum coincides with the label. The propensity model is pretrained
//! once on `(x, a) -> t` and frozen, with optional temperature scaling of
//! its logits.
//!
//! Convergence is patience-based early stopping on the validation M-step
//! loss; the best-validation model is returned.

use crate::error::{Error, Result};
use crate::nnet::{
    batch_loss, batch_probs, train_with_loss, BatchLoss, Features, MStepLoss, Network,
    TrainConfig, ValSet, WeightedBce,
};
use crate::rng::{mix, tag};
use crate::scalar::{clamp_prob, sigmoid, Scalar};
use crate::synthgen::{Dataset, LabeledExample};

pub use crate::nnet::m_step_loss;

/// How the outcome model is initialized before the first E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EStepInit {
    /// Pretrain on tested examples (the default).
    TestedOnly,
    /// Seeded random initialization, no pretraining.
    Random,
}

/// EM loop controls plus the inner training configuration shared by the
/// outcome and propensity models.
#[derive(Debug, Clone)]
pub struct EmConfig<S> {
    pub max_iters: usize,
    /// EM iterations without validation improvement before stopping.
    pub patience: usize,
    /// Initialize each M-step from the previous iterate.
    pub warm_start: bool,
    /// Softmax temperature for propensity inference; 1 leaves the model
    /// probabilities untouched.
    pub temperature: S,
    pub init: EStepInit,
    /// Hidden layer sizes of both models.
    pub hidden: Vec<usize>,
    /// Adam epochs per M-step. Pretraining and the propensity model use
    /// the full `train.epochs` budget; M-steps train incrementally from
    /// the warm start, so convergence happens across EM iterations rather
    /// than inside each one.
    pub m_step_epochs: usize,
    pub train: TrainConfig<S>,
}

impl<S: Scalar> Default for EmConfig<S> {
    fn default() -> Self {
        EmConfig {
            max_iters: 50,
            patience: 3,
            warm_start: true,
            temperature: S::one(),
            init: EStepInit::TestedOnly,
            hidden: vec![64, 64],
            m_step_epochs: 50,
            train: TrainConfig::default(),
        }
    }
}

impl<S: Scalar> EmConfig<S> {
    fn dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Frozen testing-propensity model with temperature-scaled inference.
#[derive(Debug, Clone)]
pub struct PropensityModel<S> {
    net: Network<S>,
    temperature: S,
}

impl<S: Scalar> PropensityModel<S> {
    pub fn new(net: Network<S>, temperature: S) -> Self {
        assert!(temperature > S::zero(), "temperature must be positive");
        PropensityModel { net, temperature }
    }

    pub fn network(&self) -> &Network<S> {
        &self.net
    }

    /// `t_hat = sigmoid(z / temperature)` for the model logit `z`, clamped
    /// inside `(0, 1)`.
    pub fn predict_one(&self, x: &[S]) -> Result<S> {
        Ok(clamp_prob(sigmoid(self.net.logit(x)? / self.temperature)))
    }

    pub fn predict(&self, inputs: &Features<S>) -> Result<Vec<S>> {
        if self.temperature == S::one() {
            return self.net.predict(inputs);
        }
        (0..inputs.len())
            .map(|i| self.predict_one(inputs.row(i)))
            .collect()
    }
}

/// Pretrain the propensity model `(x, a) -> t` on the training split and
/// freeze it. Errors if the split has single-class testing decisions.
pub fn fit_propensity<S: Scalar>(
    train: &Dataset<S>,
    val: &Dataset<S>,
    cfg: &EmConfig<S>,
) -> Result<PropensityModel<S>> {
    let t_train = train.t_labels();
    let n_tested = t_train.iter().filter(|&&t| t > S::zero()).count();
    if n_tested == 0 {
        return Err(Error::SingleClassPropensity(0));
    }
    if n_tested == train.len() {
        return Err(Error::SingleClassPropensity(1));
    }
    let feats = train.features_with_group();
    let loss = WeightedBce::new(t_train, None);
    let val_feats = val.features_with_group();
    let val_loss = WeightedBce::new(val.t_labels(), None);
    let init = Network::new(
        &cfg.dims(feats.dim()),
        mix(cfg.train.seed, &[tag("propensity")]),
    );
    let out = train_with_loss(
        &init,
        &feats,
        &loss,
        &cfg.train,
        Some(ValSet {
            inputs: &val_feats,
            loss: &val_loss,
        }),
    )?;
    Ok(PropensityModel::new(out.network, cfg.temperature))
}

/// E-step posterior for one example: the observed label when tested, the
/// model probability otherwise.
pub fn e_step<S: Scalar>(f_theta: &Network<S>, example: &LabeledExample<S>) -> Result<S> {
    if example.t {
        Ok(if example.y_obs { S::one() } else { S::zero() })
    } else {
        f_theta.forward(&example.x)
    }
}

/// What stands in for the testing propensity inside the M-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Regularizer {
    /// Learned propensity scores (the full method).
    Propensity,
    /// The raw binary testing indicator.
    HardT,
    /// No regularizer: plain cross-entropy against the pseudo-labels.
    None,
}

/// Fitted EM learner with diagnostics.
#[derive(Debug, Clone)]
pub struct DcemFit<S> {
    pub network: Network<S>,
    pub propensity: Option<PropensityModel<S>>,
    /// EM iterations executed.
    pub n_iters: usize,
    /// Iteration whose validation loss was best (1-based).
    pub best_iter: usize,
    /// Validation M-step loss per iteration.
    pub val_loss_history: Vec<S>,
    /// Tested examples whose pseudo-label ever differed from the observed
    /// label, across every E-step; must stay zero.
    pub estep_violations: usize,
    /// Pseudo-labels from the first E-step, for ablation comparisons.
    pub first_estep_q: Vec<S>,
}

/// Fit the censorship-aware EM learner.
///
/// Pretrains the outcome model on tested examples (or starts from a seeded
/// random network), pretrains and freezes the propensity model, then
/// alternates E- and M-steps until the validation M-step loss fails to
/// improve for `patience` iterations or `max_iters` is reached. Returns the
/// best-validation model.
pub fn fit_dcem<S: Scalar>(
    train: &Dataset<S>,
    val: &Dataset<S>,
    cfg: &EmConfig<S>,
) -> Result<DcemFit<S>> {
    fit_em(train, val, cfg, Regularizer::Propensity, cfg.max_iters)
}

/// Train the outcome model on the tested subset (the standard E-step
/// initialization).
pub(crate) fn pretrain_outcome<S: Scalar>(
    train: &Dataset<S>,
    val: &Dataset<S>,
    cfg: &EmConfig<S>,
) -> Result<Network<S>> {
    let tested = train.tested_indices();
    if tested.is_empty() {
        return Err(Error::EmptyInput("no tested examples in training split"));
    }
    let feats = train.features();
    let dims = cfg.dims(feats.dim());
    let pretrain_seed = mix(cfg.train.seed, &[tag("pretrain")]);
    let sub_feats = feats.select(&tested);
    let sub_targets: Vec<S> = tested
        .iter()
        .map(|&i| {
            if train.examples[i].y_obs {
                S::one()
            } else {
                S::zero()
            }
        })
        .collect();
    let loss = WeightedBce::new(sub_targets, None);
    let val_tested = val.tested_indices();
    let val_feats = val.features().select(&val_tested);
    let val_targets: Vec<S> = val_tested
        .iter()
        .map(|&i| {
            if val.examples[i].y_obs {
                S::one()
            } else {
                S::zero()
            }
        })
        .collect();
    let val_loss = WeightedBce::new(val_targets, None);
    let val_set = if val_feats.is_empty() {
        None
    } else {
        Some(ValSet {
            inputs: &val_feats,
            loss: &val_loss,
        })
    };
    Ok(
        train_with_loss(&Network::new(&dims, pretrain_seed), &sub_feats, &loss, &cfg.train, val_set)?
            .network,
    )
}

pub(crate) fn fit_em<S: Scalar>(
    train: &Dataset<S>,
    val: &Dataset<S>,
    cfg: &EmConfig<S>,
    reg: Regularizer,
    max_iters: usize,
) -> Result<DcemFit<S>> {
    let tested = train.tested_indices();
    if tested.is_empty() {
        return Err(Error::EmptyInput("no tested examples in training split"));
    }
    let feats = train.features();
    let dims = cfg.dims(feats.dim());
    let pretrain_seed = mix(cfg.train.seed, &[tag("pretrain")]);

    let mut f_theta = match cfg.init {
        EStepInit::Random => Network::new(&dims, pretrain_seed),
        EStepInit::TestedOnly => pretrain_outcome(train, val, cfg)?,
    };

    let (propensity, t_hat_train, t_hat_val) = match reg {
        Regularizer::Propensity => {
            let g = fit_propensity(train, val, cfg)?;
            let th_train = g.predict(&train.features_with_group())?;
            let th_val = g.predict(&val.features_with_group())?;
            (Some(g), th_train, th_val)
        }
        Regularizer::HardT => (None, train.t_labels(), val.t_labels()),
        Regularizer::None => (
            None,
            vec![S::zero(); train.len()],
            vec![S::zero(); val.len()],
        ),
    };

    let y_obs_train = train.y_obs();
    let y_obs_val = val.y_obs();
    let untested: Vec<usize> = (0..train.len()).filter(|&i| !train.examples[i].t).collect();
    let untested_feats = feats.select(&untested);
    let val_untested: Vec<usize> = (0..val.len()).filter(|&i| !val.examples[i].t).collect();
    let val_feats = val.features();
    let val_untested_feats = val_feats.select(&val_untested);

    let mut violations = 0usize;
    let mut history: Vec<S> = Vec::new();
    let mut best: Option<(S, Network<S>, usize)> = None;
    let mut bad = 0usize;
    let mut n_iters = 0usize;
    let mut first_q: Vec<S> = Vec::new();

    for iter in 1..=max_iters {
        // E-step with the current model, on the training and validation
        // splits alike; tested examples short-circuit to the observed
        // label.
        let mut q = y_obs_train.clone();
        let imputed = batch_probs(&f_theta, &untested_feats);
        for (k, &i) in untested.iter().enumerate() {
            q[i] = imputed[k];
        }
        for &i in &tested {
            if q[i] != y_obs_train[i] {
                violations += 1;
            }
        }
        if iter == 1 {
            first_q = q.clone();
        }
        let mut q_val = y_obs_val.clone();
        let val_imputed = batch_probs(&f_theta, &val_untested_feats);
        for (k, &i) in val_untested.iter().enumerate() {
            q_val[i] = val_imputed[k];
        }
        for (i, e) in val.examples.iter().enumerate() {
            if e.t && q_val[i] != y_obs_val[i] {
                violations += 1;
            }
        }

        // M-step on all examples.
        let init = if cfg.warm_start {
            f_theta.clone()
        } else {
            Network::new(&dims, mix(cfg.train.seed, &[tag("mstep-init"), iter as u64]))
        };
        let loss: Box<dyn BatchLoss<S>> = match reg {
            Regularizer::None => Box::new(WeightedBce::new(q, None)),
            _ => Box::new(MStepLoss::new(q, y_obs_train.clone(), t_hat_train.clone())),
        };
        let m_cfg = TrainConfig {
            epochs: cfg.m_step_epochs,
            seed: mix(cfg.train.seed, &[tag("mstep"), iter as u64]),
            ..cfg.train.clone()
        };
        f_theta = train_with_loss(&init, &feats, loss.as_ref(), &m_cfg, None)?.network;
        n_iters = iter;

        // Monitored quantity: this M-step's own objective on the held-out
        // split, at the pseudo-labels the M-step was fit against.
        let val_loss: Box<dyn BatchLoss<S>> = match reg {
            Regularizer::None => Box::new(WeightedBce::new(q_val, None)),
            _ => Box::new(MStepLoss::new(q_val, y_obs_val.clone(), t_hat_val.clone())),
        };
        let vl = batch_loss(&f_theta, &val_feats, val_loss.as_ref());
        if vl.is_nan() {
            return Err(Error::NanLoss { epoch: iter });
        }
        history.push(vl);

        match &best {
            Some((bv, _, _)) if vl >= *bv => {
                bad += 1;
                if bad >= cfg.patience {
                    break;
                }
            }
            _ => {
                best = Some((vl, f_theta.clone(), iter));
                bad = 0;
            }
        }
    }

    let (network, best_iter) = match best {
        Some((_, net, it)) => (net, it),
        None => (f_theta, n_iters),
    };
    Ok(DcemFit {
        network,
        propensity,
        n_iters,
        best_iter,
        val_loss_history: history,
        estep_violations: violations,
        first_estep_q: first_q,
    })
}
