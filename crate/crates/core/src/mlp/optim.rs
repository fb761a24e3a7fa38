//! First-order update rules for network training. All six rules operate on
//! a flat parameter vector and use the moment coefficients published with
//! each method.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerRule {
    RAdam,
    Adam,
    NAdam,
    Adamax,
    RmsProp,
    Sgd,
}

impl OptimizerRule {
    pub const ALL: [OptimizerRule; 6] = [
        OptimizerRule::RAdam,
        OptimizerRule::Adam,
        OptimizerRule::NAdam,
        OptimizerRule::Adamax,
        OptimizerRule::RmsProp,
        OptimizerRule::Sgd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerRule::RAdam => "radam",
            OptimizerRule::Adam => "adam",
            OptimizerRule::NAdam => "nadam",
            OptimizerRule::Adamax => "adamax",
            OptimizerRule::RmsProp => "rmsprop",
            OptimizerRule::Sgd => "sgd",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.name() == name.to_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown optimizer rule `{name}`")))
    }
}

/// Per-parameter moment buffers for one training run.
#[derive(Debug, Clone)]
pub struct OptimizerState<F> {
    rule: OptimizerRule,
    m: Vec<F>,
    v: Vec<F>,
    step: usize,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
const RMS_RHO: f64 = 0.9;

impl<F: Scalar> OptimizerState<F> {
    pub fn new(rule: OptimizerRule, n_params: usize) -> Self {
        OptimizerState {
            rule,
            m: vec![F::zero(); n_params],
            v: vec![F::zero(); n_params],
            step: 0,
        }
    }

    pub fn rule(&self) -> OptimizerRule {
        self.rule
    }

    /// Applies one update in place. `lr` may change between calls (plateau
    /// halving); the moment buffers persist.
    pub fn step(&mut self, params: &mut [F], grads: &[F], lr: F) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let b1 = F::c(BETA1);
        let b2 = F::c(BETA2);
        let eps = F::c(EPS);
        match self.rule {
            OptimizerRule::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p = *p - lr * g;
                }
            }
            OptimizerRule::RmsProp => {
                let rho = F::c(RMS_RHO);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.v[i] = rho * self.v[i] + (F::one() - rho) * g * g;
                    params[i] = params[i] - lr * g / (self.v[i].sqrt() + eps);
                }
            }
            OptimizerRule::Adam => {
                let bc1 = F::one() - b1.powi(t);
                let bc2 = F::one() - b2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (F::one() - b2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerRule::Adamax => {
                let bc1 = F::one() - b1.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
                    // Infinity-norm second moment.
                    self.v[i] = (b2 * self.v[i]).max(g.abs());
                    params[i] = params[i] - lr / bc1 * self.m[i] / (self.v[i] + eps);
                }
            }
            OptimizerRule::NAdam => {
                // Constant-schedule Nesterov Adam: the look-ahead blends the
                // bias-corrected momentum with the current gradient.
                let bc1 = F::one() - b1.powi(t);
                let bc1_next = F::one() - b1.powi(t + 1);
                let bc2 = F::one() - b2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (F::one() - b2) * g * g;
                    let v_hat = self.v[i] / bc2;
                    let m_bar = b1 * self.m[i] / bc1_next + (F::one() - b1) * g / bc1;
                    params[i] = params[i] - lr * m_bar / (v_hat.sqrt() + eps);
                }
            }
            OptimizerRule::RAdam => {
                let bc1 = F::one() - b1.powi(t);
                let bc2 = F::one() - b2.powi(t);
                let rho_inf = F::c(2.0 / (1.0 - BETA2) - 1.0);
                let t_f = F::from_i32(t).unwrap();
                let rho_t = rho_inf - F::c(2.0) * t_f * b2.powi(t) / bc2;
                let rectified = rho_t > F::c(4.0);
                let r_t = if rectified {
                    (((rho_t - F::c(4.0)) * (rho_t - F::c(2.0)) * rho_inf)
                        / ((rho_inf - F::c(4.0)) * (rho_inf - F::c(2.0)) * rho_t))
                        .sqrt()
                } else {
                    F::one()
                };
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = b1 * self.m[i] + (F::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (F::one() - b2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    if rectified {
                        let v_hat = (self.v[i] / bc2).sqrt();
                        params[i] = params[i] - lr * r_t * m_hat / (v_hat + eps);
                    } else {
                        // Variance not yet tractable: un-adapted momentum step.
                        params[i] = params[i] - lr * m_hat;
                    }
                }
            }
        }
    }
}
