//! Small convolutional classifier: two valid stride-1 convolutions, a hidden
//! dense layer and a two-way softmax head, trained with plain mini-batch SGD.

mod checkpoint;
mod layers;
mod model;
mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use layers::{conv2d_forward, cross_entropy, dense_forward, relu, softmax, Conv2d, Dense, PROB_FLOOR};
pub use model::{BatchOutcome, CnnModel, ForwardTrace, Gradients, Layer, INIT_BIAS, INIT_WEIGHT_STD};
pub use tensor::{Real, Tensor};
pub use train::{dataset_tensor, evaluate, train, EpochRow, TrainReport, LAST_EPOCHS_AVERAGED};

use crate::{Error, Result};

/// Element type used during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" | "32" => Ok(Precision::F32),
            "f64" | "64" => Ok(Precision::F64),
            other => Err(Error::Argument(format!("unknown precision `{other}` (expected f32 or f64)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnConfig {
    pub conv1_filters: usize,
    pub conv1_size: usize,
    pub conv2_filters: usize,
    pub conv2_size: usize,
    pub fc_units: usize,
    pub classes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            conv1_filters: 32,
            conv1_size: 2,
            conv2_filters: 64,
            conv2_size: 3,
            fc_units: 512,
            classes: 2,
            learning_rate: 0.001,
            batch_size: 100,
            epochs: 200,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("conv1_filters", self.conv1_filters),
            ("conv1_size", self.conv1_size),
            ("conv2_filters", self.conv2_filters),
            ("conv2_size", self.conv2_size),
            ("fc_units", self.fc_units),
            ("classes", self.classes),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let cfg = CnnConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!((cfg.conv1_filters, cfg.conv2_filters, cfg.fc_units), (32, 64, 512));
        assert!(CnnConfig { fc_units: 0, ..cfg.clone() }.validate().is_err());
        assert!(CnnConfig { learning_rate: 0.0, ..cfg.clone() }.validate().is_err());
        assert!(CnnConfig { learning_rate: f64::NAN, ..cfg }.validate().is_err());
        assert_eq!("f64".parse::<Precision>().unwrap(), Precision::F64);
        assert!("f16".parse::<Precision>().is_err());
    }
}
