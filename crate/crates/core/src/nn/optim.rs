use super::{Param, Parameters};

/// SGD with classical momentum and L2 weight decay:
/// `v = momentum * v + (g + wd * w); w -= lr * v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, model: &mut dyn Parameters, lr: f64) {
        let (momentum, wd) = (self.momentum, self.weight_decay);
        let velocity = &mut self.velocity;
        let mut i = 0;
        model.visit_params_mut(&mut |p: &mut Param| {
            if velocity.len() <= i {
                velocity.push(vec![0.0; p.len()]);
            }
            let v = &mut velocity[i];
            for ((w, g), v) in p.value.iter_mut().zip(&p.grad).zip(v.iter_mut()) {
                *v = momentum * *v + (g + wd * *w);
                *w -= lr * *v;
            }
            i += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct One(Param);

    impl Parameters for One {
        fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
            f(&self.0)
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
            f(&mut self.0)
        }
    }

    #[test]
    fn momentum_accumulates() {
        let mut m = One(Param::filled(&[1], 1.0));
        m.0.grad = vec![1.0];
        let mut opt = Sgd::new(0.9, 0.0);
        opt.step(&mut m, 0.1);
        assert!((m.0.value[0] - 0.9).abs() < 1e-15);
        opt.step(&mut m, 0.1);
        // v = 0.9 * 1 + 1 = 1.9
        assert!((m.0.value[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_frozen() {
        let mut m = One(Param::filled(&[2], 3.0));
        m.0.grad = vec![5.0, -5.0];
        let mut opt = Sgd::new(0.9, 5e-4);
        opt.step(&mut m, 0.0);
        assert_eq!(m.0.value, vec![3.0, 3.0]);
    }
}
