use super::{Param, ParamFn, Parameterized, Scalar};
use crate::error::{Error, Result};

/// One momentum-SGD step on flat slices: `v = momentum * v + g; w -= lr * v`.
pub fn sgd_update<T: Scalar>(w: &mut [T], g: &[T], v: &mut [T], lr: f64, momentum: f64) -> Result<()> {
    if w.len() != g.len() || w.len() != v.len() {
        return Err(Error::shape("sgd_update", w.len(), (g.len(), v.len())));
    }
    let (lr, mu) = (T::of(lr), T::of(momentum));
    for ((w, &g), v) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *v = mu * *v + g;
        *w -= lr * *v;
    }
    Ok(())
}

/// Momentum SGD holding one velocity buffer per parameter, in visit order.
#[derive(Debug, Clone)]
pub struct Sgd<T: Scalar> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) || !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("sgd: lr {lr} must be >= 0 and momentum {momentum} in [0, 1)")));
        }
        Ok(Sgd {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn step(&mut self, model: &mut dyn Parameterized<T>) -> Result<()> {
        let (lr, mu) = (self.lr, self.momentum);
        let velocity = &mut self.velocity;
        let mut i = 0;
        let mut err = None;
        model.visit_params(&mut ParamFn(|_: &str, p: &mut Param<T>| {
                if velocity.len() == i {
                    velocity.push(vec![T::zero(); p.value.numel()]);
                }
                let r = sgd_update(p.value.data_mut(), p.grad.data(), &mut velocity[i], lr, mu);
                if let (Err(e), None) = (r, &err) {
                    err = Some(e);
                }
                i += 1;
            }));
        err.map_or(Ok(()), Err)
    }
}
