use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::{cross_entropy, FertConfig, FertNet, Mode, Sgd};
use crate::radar::ImageKind;
use crate::sim::split_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub e_respd_window: usize,
    /// Disables temporal integration (window 1).
    pub ablation: bool,
    pub net: FertConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
            e_respd_window: 200,
            ablation: false,
            net: FertConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn window(&self) -> usize {
        if self.ablation {
            1
        } else {
            self.e_respd_window
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.e_respd_window == 0 || self.batch_size < 2 {
            return Err(Error::Config(format!(
                "epochs ({}) and window ({}) must be >= 1, batch_size ({}) >= 2",
                self.epochs, self.e_respd_window, self.batch_size
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("lr {} must be >= 0, momentum {} in [0, 1)", self.lr, self.momentum)));
        }
        self.net.validate()
    }

    /// Seed used for weight initialization.
    pub fn init_seed(&self) -> u64 {
        split_seed(self.seed, 0x1_0000_0001)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Loss of every optimizer step, in order.
    pub losses: Vec<f64>,
    pub steps_per_epoch: usize,
    pub epoch_mean_loss: Vec<f64>,
}

/// Splits a shuffled index list into mini-batches. A trailing batch of one
/// sample is merged into its predecessor since batch statistics need two.
pub fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().expect("len > 1") = &order[start..];
    }
    out
}

/// Trains `net` in place with momentum SGD on shuffled mini-batches.
pub fn train(net: &mut FertNet<f32>, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Config(format!("training needs >= 2 samples, got {}", data.len())));
    }
    if data.image_size != net.config().image_size {
        return Err(Error::Config(format!(
            "dataset images are {0}x{0}, network expects {1}x{1}",
            data.image_size,
            net.config().image_size
        )));
    }
    let mut opt = Sgd::new(cfg.lr, cfg.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, 0x2_0000_0002));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::new();
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let mut steps_per_epoch = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let plan = batches(&order, cfg.batch_size);
        steps_per_epoch = plan.len();
        let mut sum = 0.0;
        for (b, idx) in plan.iter().enumerate() {
            let (x, labels) = data.batch(idx)?;
            net.zero_grad();
            let logits = net.forward([&x[0], &x[1], &x[2], &x[3]], Mode::Train)?;
            let diag = |what: String| {
                Error::Numeric(format!("{what} at epoch {epoch}, batch {b} (lr = {})", cfg.lr))
            };
            for (t, kind) in x.iter().zip(ImageKind::ALL) {
                t.check_finite(kind.name()).map_err(|e| diag(e.to_string()))?;
            }
            logits.check_finite("logits").map_err(|e| diag(e.to_string()))?;
            let (loss, grad) = cross_entropy(&logits, &labels).map_err(|e| match e {
                Error::Numeric(m) => diag(m),
                other => other,
            })?;
            net.backward(&grad)?;
            opt.step(net)?;
            losses.push(loss);
            sum += loss;
        }
        epoch_mean_loss.push(sum / plan.len() as f64);
    }
    Ok(TrainOutcome {
        losses,
        steps_per_epoch,
        epoch_mean_loss,
    })
}

/// Fresh network initialized from `cfg.seed`, trained on `data`.
pub fn fit(data: &Dataset, cfg: &TrainConfig) -> Result<(FertNet<f32>, TrainOutcome)> {
    cfg.validate()?;
    let mut net = FertNet::new(&cfg.net, cfg.init_seed())?;
    let outcome = train(&mut net, data, cfg)?;
    Ok((net, outcome))
}
