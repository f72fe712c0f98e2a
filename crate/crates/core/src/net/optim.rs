use ndarray::{Array1, Zip};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp { rho: f64 },
    Adadelta { rho: f64 },
    Adam { beta1: f64, beta2: f64 },
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::RmsProp { .. } => "rmsprop",
            OptimizerKind::Adadelta { .. } => "adadelta",
            OptimizerKind::Adam { .. } => "adam",
        }
    }

    /// Parses a name into the kind with its usual default constants.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "sgd" => OptimizerKind::Sgd,
            "rmsprop" => OptimizerKind::RmsProp { rho: 0.9 },
            "adadelta" => OptimizerKind::Adadelta { rho: 0.95 },
            "adam" => OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
            },
            other => return Err(Error::config(format!("unknown optimizer {other:?}"))),
        })
    }

    fn n_slots(&self) -> usize {
        match self {
            OptimizerKind::Sgd => 0,
            OptimizerKind::RmsProp { .. } => 1,
            OptimizerKind::Adadelta { .. } | OptimizerKind::Adam { .. } => 2,
        }
    }
}

const EPSILON: f64 = 1e-7;

/// First-order optimizer over a flat parameter vector. The learning rate
/// follows `rate / (1 + decay * t)` where `t` counts completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub rate: f64,
    pub decay: f64,
    steps: u64,
    slots: Vec<Array1<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, rate: f64, decay: f64, n_params: usize) -> Self {
        Self {
            kind,
            rate,
            decay,
            steps: 0,
            slots: (0..kind.n_slots()).map(|_| Array1::zeros(n_params)).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn slots(&self) -> &[Array1<f64>] {
        &self.slots
    }

    /// Restores accumulator state saved from another optimizer of the same kind.
    pub fn restore(&mut self, steps: u64, slots: Vec<Array1<f64>>) -> Result<()> {
        if slots.len() != self.slots.len() || slots.iter().zip(&self.slots).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::config("optimizer state does not match parameter layout"));
        }
        self.steps = steps;
        self.slots = slots;
        Ok(())
    }

    pub fn step(&mut self, params: &mut Array1<f64>, grad: &Array1<f64>) {
        let lr = self.rate / (1.0 + self.decay * self.steps as f64);
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => params.scaled_add(-lr, grad),
            OptimizerKind::RmsProp { rho } => {
                Zip::from(params)
                    .and(grad)
                    .and(&mut self.slots[0])
                    .for_each(|p, &g, acc| {
                        *acc = rho * *acc + (1.0 - rho) * g * g;
                        *p -= lr * g / (acc.sqrt() + EPSILON);
                    });
            }
            OptimizerKind::Adadelta { rho } => {
                let (acc, rest) = self.slots.split_at_mut(1);
                Zip::from(params)
                    .and(grad)
                    .and(&mut acc[0])
                    .and(&mut rest[0])
                    .for_each(|p, &g, acc, delta_acc| {
                        *acc = rho * *acc + (1.0 - rho) * g * g;
                        let update = g * (*delta_acc + EPSILON).sqrt() / (*acc + EPSILON).sqrt();
                        *delta_acc = rho * *delta_acc + (1.0 - rho) * update * update;
                        *p -= lr * update;
                    });
            }
            OptimizerKind::Adam { beta1, beta2 } => {
                let t = self.steps as f64;
                let lr_t = lr * (1.0 - beta2.powf(t)).sqrt() / (1.0 - beta1.powf(t));
                let (m, rest) = self.slots.split_at_mut(1);
                Zip::from(params)
                    .and(grad)
                    .and(&mut m[0])
                    .and(&mut rest[0])
                    .for_each(|p, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr_t * *m / (v.sqrt() + EPSILON);
                    });
            }
        }
    }
}
