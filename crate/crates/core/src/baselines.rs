//! Reference learners for the censored-label setting.
//!
//! All methods share the [`crate::nnet`] engine and the training defaults,
//! so comparisons isolate the labeling strategy: what subset is trained on,
//! what stands in for the label, and whether censorship is modeled.

use crate::dcem::{e_step, fit_em, fit_propensity, pretrain_outcome, EmConfig, PropensityModel, Regularizer};
use crate::error::{Error, Result};
use crate::nnet::{train_with_loss, Network, ValSet, WeightedBce};
use crate::rng::{mix, tag};
use crate::scalar::Scalar;
use crate::synthgen::Dataset;

/// Propensity clip for inverse-propensity weights.
pub const IPW_CLIP: f64 = 0.05;

/// Baseline method tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Train on the observed proxy label over all examples.
    YObs,
    /// Train on tested examples only.
    TestedOnly,
    /// Tested examples only, with the group appended to the features.
    TestedOnlyGroup,
    /// Group 0 only, proxy-label targets.
    GroupOnly0,
    /// Group 1 only, proxy-label targets.
    GroupOnly1,
    /// Train on the hidden ground truth (evaluation ceiling).
    Oracle,
    /// Pretrain on tested, impute pseudo-labels once, refit without the
    /// causal regularizer.
    ImputationOnly,
    /// Full EM loop with the causal regularizer removed.
    NoCausalReg,
    /// Full EM loop with the raw testing indicator in place of the
    /// propensity.
    HardT,
    /// Tested-only training with inverse-propensity example weights.
    IpwTested,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::YObs,
        Method::TestedOnly,
        Method::TestedOnlyGroup,
        Method::GroupOnly0,
        Method::GroupOnly1,
        Method::Oracle,
        Method::ImputationOnly,
        Method::NoCausalReg,
        Method::HardT,
        Method::IpwTested,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::YObs => "y_obs",
            Method::TestedOnly => "tested_only",
            Method::TestedOnlyGroup => "tested_only_group",
            Method::GroupOnly0 => "group_only_0",
            Method::GroupOnly1 => "group_only_1",
            Method::Oracle => "oracle",
            Method::ImputationOnly => "imputation_only",
            Method::NoCausalReg => "no_causal_reg",
            Method::HardT => "hard_t",
            Method::IpwTested => "ipw_tested",
        }
    }

    pub fn from_tag(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.tag() == s)
    }
}

/// Inverse-propensity weight `1 / max(t_hat, clip)` for a tested example.
pub fn ipw_weight<S: Scalar>(t: bool, t_hat: S, clip: S) -> S {
    debug_assert!(t, "weights are defined on tested examples only");
    debug_assert!(clip > S::zero() && clip < S::from_f64_lossy(0.5));
    S::one() / t_hat.max(clip)
}

/// A fitted baseline with enough bookkeeping to score and audit it.
#[derive(Debug, Clone)]
pub struct BaselineFit<S> {
    pub network: Network<S>,
    /// Whether scoring must append the group to the features.
    pub uses_group_feature: bool,
    /// EM iterations run (zero for single-fit methods).
    pub n_em_iters: usize,
    pub estep_violations: usize,
    /// Training-set indices the fit actually consumed.
    pub train_indices: Vec<usize>,
    pub propensity: Option<PropensityModel<S>>,
}

impl<S: Scalar> BaselineFit<S> {
    /// Score a dataset with the fitted model.
    pub fn score(&self, data: &Dataset<S>) -> Result<Vec<S>> {
        let feats = if self.uses_group_feature {
            data.features_with_group()
        } else {
            data.features()
        };
        self.network.predict(&feats)
    }
}

fn check_binary_targets<S: Scalar>(targets: &[S]) -> Result<()> {
    let any_pos = targets.iter().any(|t| *t > S::zero());
    let any_neg = targets.iter().any(|t| *t == S::zero());
    if any_pos && any_neg {
        Ok(())
    } else {
        Err(Error::SingleClassLabels)
    }
}

struct PlainFitSpec<S> {
    indices: Vec<usize>,
    with_group: bool,
    targets: Vec<S>,
    weights: Option<Vec<S>>,
    val_indices: Vec<usize>,
    val_targets: Vec<S>,
    val_weights: Option<Vec<S>>,
}

fn fit_plain<S: Scalar>(
    method: Method,
    spec: PlainFitSpec<S>,
    train: &Dataset<S>,
    val: &Dataset<S>,
    cfg: &EmConfig<S>,
    propensity: Option<PropensityModel<S>>,
) -> Result<BaselineFit<S>> {
    if spec.indices.is_empty() {
        return Err(Error::EmptyMethodSubset(spec_label(method)));
    }
    check_binary_targets(&spec.targets)?;
    let base = if spec.with_group {
        train.features_with_group()
    } else {
        train.features()
    };
    let feats = base.select(&spec.indices);
    let val_base = if spec.with_group {
        val.features_with_group()
    } else {
        val.features()
    };
    let val_feats = val_base.select(&spec.val_indices);
    let loss = WeightedBce::new(spec.targets, spec.weights);
    let val_loss = WeightedBce::new(spec.val_targets, spec.val_weights);
    let val_set = if val_feats.is_empty() {
        None
    } else {
        Some(ValSet {
            inputs: &val_feats,
            loss: &val_loss,
        })
    };
    let mut dims = Vec::with_capacity(cfg.hidden.len() + 2);
    dims.push(feats.dim());
    dims.extend_from_slice(&cfg.hidden);
    dims.push(1);
    let init = Network::new(&dims, mix(cfg.train.seed, &[tag("fit")]));
    let out = train_with_loss(&init, &feats, &loss, &cfg.train, val_set)?;
    Ok(BaselineFit {
        network: out.network,
        uses_group_feature: spec.with_group,
        n_em_iters: 0,
        estep_violations: 0,
        train_indices: spec.indices,
        propensity,
    })
}

fn spec_label(method: Method) -> String {
    method.tag().to_string()
}

/// Fit one baseline. EM-style ablations run the shared EM loop with the
/// regularizer swapped out; the rest are single cross-entropy fits on a
/// method-specific subset and target.
pub fn fit_baseline<S: Scalar>(
    method: Method,
    train: &Dataset<S>,
    val: &Dataset<S>,
    cfg: &EmConfig<S>,
) -> Result<BaselineFit<S>> {
    let all: Vec<usize> = (0..train.len()).collect();
    let val_all: Vec<usize> = (0..val.len()).collect();
    match method {
        Method::YObs => fit_plain(
            method,
            PlainFitSpec {
                indices: all,
                with_group: false,
                targets: train.y_obs(),
                weights: None,
                val_indices: val_all,
                val_targets: val.y_obs(),
                val_weights: None,
            },
            train,
            val,
            cfg,
            None,
        ),
        Method::Oracle => fit_plain(
            method,
            PlainFitSpec {
                indices: all,
                with_group: false,
                targets: train.y_true(),
                weights: None,
                val_indices: val_all,
                val_targets: val.y_true(),
                val_weights: None,
            },
            train,
            val,
            cfg,
            None,
        ),
        Method::TestedOnly | Method::TestedOnlyGroup => {
            let idx = train.tested_indices();
            let vidx = val.tested_indices();
            let targets = idx
                .iter()
                .map(|&i| {
                    if train.examples[i].y_obs {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect();
            let val_targets = vidx
                .iter()
                .map(|&i| if val.examples[i].y_obs { S::one() } else { S::zero() })
                .collect();
            fit_plain(
                method,
                PlainFitSpec {
                    indices: idx,
                    with_group: method == Method::TestedOnlyGroup,
                    targets,
                    weights: None,
                    val_indices: vidx,
                    val_targets,
                    val_weights: None,
                },
                train,
                val,
                cfg,
                None,
            )
        }
        Method::GroupOnly0 | Method::GroupOnly1 => {
            let group = method == Method::GroupOnly1;
            let idx = train.group_indices(group);
            let vidx = val.group_indices(group);
            let targets = idx
                .iter()
                .map(|&i| {
                    if train.examples[i].y_obs {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect();
            let val_targets = vidx
                .iter()
                .map(|&i| if val.examples[i].y_obs { S::one() } else { S::zero() })
                .collect();
            fit_plain(
                method,
                PlainFitSpec {
                    indices: idx,
                    with_group: false,
                    targets,
                    weights: None,
                    val_indices: vidx,
                    val_targets,
                    val_weights: None,
                },
                train,
                val,
                cfg,
                None,
            )
        }
        Method::IpwTested => {
            let g = fit_propensity(train, val, cfg)?;
            let clip = S::from_f64_lossy(IPW_CLIP);
            let idx = train.tested_indices();
            let vidx = val.tested_indices();
            let t_hat = g.predict(&train.features_with_group())?;
            let t_hat_val = g.predict(&val.features_with_group())?;
            let weights: Vec<S> = idx.iter().map(|&i| ipw_weight(true, t_hat[i], clip)).collect();
            let val_weights: Vec<S> = vidx
                .iter()
                .map(|&i| ipw_weight(true, t_hat_val[i], clip))
                .collect();
            let targets = idx
                .iter()
                .map(|&i| {
                    if train.examples[i].y_obs {
                        S::one()
                    } else {
                        S::zero()
                    }
                })
                .collect();
            let val_targets = vidx
                .iter()
                .map(|&i| if val.examples[i].y_obs { S::one() } else { S::zero() })
                .collect();
            fit_plain(
                method,
                PlainFitSpec {
                    indices: idx,
                    with_group: false,
                    targets,
                    weights: Some(weights),
                    val_indices: vidx,
                    val_targets,
                    val_weights: Some(val_weights),
                },
                train,
                val,
                cfg,
                Some(g),
            )
        }
        Method::ImputationOnly => {
            // pretrain on tested examples, impute pseudo-labels once, then
            // distill with one full cross-entropy fit on every example
            let pre = pretrain_outcome(train, val, cfg)?;
            let impute = |ds: &Dataset<S>| -> Result<(Vec<S>, usize)> {
                let mut violations = 0;
                let mut q = Vec::with_capacity(ds.len());
                for e in &ds.examples {
                    let v = e_step(&pre, e)?;
                    if e.t && v != (if e.y_obs { S::one() } else { S::zero() }) {
                        violations += 1;
                    }
                    q.push(v);
                }
                Ok((q, violations))
            };
            let (q, viol_train) = impute(train)?;
            let (q_val, viol_val) = impute(val)?;
            let feats = train.features();
            let val_feats = val.features();
            let loss = WeightedBce::new(q, None);
            let val_loss = WeightedBce::new(q_val, None);
            let mut dims = Vec::with_capacity(cfg.hidden.len() + 2);
            dims.push(feats.dim());
            dims.extend_from_slice(&cfg.hidden);
            dims.push(1);
            let init = Network::new(&dims, mix(cfg.train.seed, &[tag("fit")]));
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
            Ok(BaselineFit {
                network: out.network,
                uses_group_feature: false,
                n_em_iters: 1,
                estep_violations: viol_train + viol_val,
                train_indices: (0..train.len()).collect(),
                propensity: None,
            })
        }
        Method::NoCausalReg | Method::HardT => {
            let reg = if method == Method::NoCausalReg {
                Regularizer::None
            } else {
                Regularizer::HardT
            };
            let fit = fit_em(train, val, cfg, reg, cfg.max_iters)?;
            Ok(BaselineFit {
                network: fit.network,
                uses_group_feature: false,
                n_em_iters: fit.n_iters,
                estep_violations: fit.estep_violations,
                train_indices: (0..train.len()).collect(),
                propensity: fit.propensity,
            })
        }
    }
}
