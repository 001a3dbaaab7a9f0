use serde::{Deserialize, Serialize};

/// Update rule for one parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerKind {
    /// Plain gradient descent.
    #[default]
    Sgd,
    Momentum {
        beta: f64,
    },
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    /// Apply one update; `params` and `grads` must line up slot by slot.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), grads.len(), "parameter/gradient slot mismatch");
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        self.steps += 1;
        let lr = self.lr;
        for (slot, (p, g)) in params.into_iter().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len());
            match self.kind {
                OptimizerKind::Sgd => {
                    for (w, d) in p.iter_mut().zip(g) {
                        *w -= lr * d;
                    }
                }
                OptimizerKind::Momentum { beta } => {
                    let v = &mut self.first[slot];
                    for ((w, d), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                        *vi = beta * *vi + d;
                        *w -= lr * *vi;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let t = self.steps as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
                    for (((w, d), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * d;
                        *vi = beta2 * *vi + (1.0 - beta2) * d * d;
                        *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut w = vec![1.0, 2.0];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        opt.step(vec![&mut w], vec![&[2.0, -2.0]]);
        assert_eq!(w, [0.0, 3.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut w = vec![1.0];
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.01);
        opt.step(vec![&mut w], vec![&[123.0]]);
        assert!((w[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn momentum_accumulates() {
        let mut w = vec![0.0];
        let mut opt = Optimizer::new(OptimizerKind::Momentum { beta: 0.5 }, 1.0);
        opt.step(vec![&mut w], vec![&[1.0]]);
        opt.step(vec![&mut w], vec![&[1.0]]);
        assert_eq!(w[0], -2.5);
    }
}
