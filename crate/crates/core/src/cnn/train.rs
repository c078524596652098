use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use super::model::CnnModel;
use super::tensor::{Real, Tensor};
use super::CnnConfig;
use crate::imaging::Dataset;
use crate::{Error, Result};

/// Number of trailing epochs whose validation accuracy forms the headline.
pub const LAST_EPOCHS_AVERAGED: usize = 10;

const EVAL_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRow {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    pub wall_seconds: f64,
}

impl TrainReport {
    /// Mean validation accuracy over the last ten epochs (or all, if fewer).
    pub fn headline_accuracy(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        let tail = &self.rows[self.rows.len().saturating_sub(LAST_EPOCHS_AVERAGED)..];
        Some(tail.iter().map(|r| r.val_acc).sum::<f64>() / tail.len() as f64)
    }

    pub fn final_val_acc(&self) -> Option<f64> {
        self.rows.last().map(|r| r.val_acc)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
        for r in &self.rows {
            writeln!(out, "{},{:.8},{:.6},{:.6}", r.epoch, r.train_loss, r.train_acc, r.val_acc).expect("string write");
        }
        out
    }
}

/// Images as a `[B, H, W, 3]` tensor scaled to `[0, 1]`, plus labels.
pub fn dataset_tensor<T: Real>(d: &Dataset) -> Result<(Tensor<T>, Vec<usize>)> {
    let (h, w) = d.image_dims().unwrap_or((0, 0));
    let scale = 1.0 / 255.0;
    let mut data = Vec::with_capacity(d.len() * h * w * 3);
    for im in &d.images {
        data.extend(im.rgb_bytes().into_iter().map(|b| T::from_f64(b as f64 * scale)));
    }
    let labels = d.images.iter().map(|im| im.label as usize).collect();
    Ok((Tensor::new(vec![d.len(), h, w, 3], data)?, labels))
}

fn gather<T: Real>(x: &Tensor<T>, indices: &[usize]) -> Tensor<T> {
    let per = x.len() / x.shape()[0].max(1);
    let mut data = Vec::with_capacity(indices.len() * per);
    for &i in indices {
        data.extend_from_slice(&x.data()[i * per..(i + 1) * per]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = indices.len();
    Tensor::new(shape, data).expect("gathered shape")
}

fn check_input<T: Real>(model: &CnnModel<T>, d: &Dataset) -> Result<()> {
    if let Some((h, w)) = d.image_dims() {
        let [mh, mw, mc] = model.input_shape();
        if (h, w, 3) != (mh, mw, mc) {
            return Err(Error::Shape(format!("{h}x{w}x3 images, model expects {mh}x{mw}x{mc}")));
        }
    }
    Ok(())
}

fn accuracy_on<T: Real>(model: &CnnModel<T>, x: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let mut correct = 0usize;
    let all: Vec<usize> = (0..labels.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let predictions = model.predict(&gather(x, chunk))?;
        correct += chunk.iter().zip(predictions).filter(|(&i, p)| labels[i] == *p).count();
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Fraction of images whose most probable class is their label.
pub fn evaluate<T: Real>(model: &CnnModel<T>, d: &Dataset) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty dataset".into()));
    }
    check_input(model, d)?;
    let (x, labels) = dataset_tensor::<T>(d)?;
    accuracy_on(model, &x, &labels)
}

/// Initializes a model from `rng` and runs `cfg.epochs` epochs of
/// mini-batch SGD, reshuffling the training set each epoch.
pub fn train<T: Real, R: Rng + ?Sized>(
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &CnnConfig,
    rng: &mut R,
) -> Result<(CnnModel<T>, TrainReport)> {
    cfg.validate()?;
    let Some((h, w)) = train_set.image_dims() else {
        return Err(Error::Argument("training set is empty".into()));
    };
    if val_set.is_empty() {
        return Err(Error::Argument("validation set is empty".into()));
    }
    let mut model = CnnModel::<T>::initialize(cfg, [h, w, 3], rng)?;
    check_input(&model, val_set)?;
    let (x_train, y_train) = dataset_tensor::<T>(train_set)?;
    let (x_val, y_val) = dataset_tensor::<T>(val_set)?;

    let start = Instant::now();
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let labels: Vec<usize> = batch.iter().map(|&i| y_train[i]).collect();
            let (grads, outcome) = model.backward(&gather(&x_train, batch), &labels)?;
            loss_sum += outcome.losses.iter().sum::<f64>();
            correct += outcome.predictions.iter().zip(&labels).filter(|(p, y)| p == y).count();
            model.sgd_step(&grads, cfg.learning_rate)?;
        }
        let n = order.len() as f64;
        report.rows.push(EpochRow {
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_acc: accuracy_on(&model, &x_val, &y_val)?,
        });
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((model, report))
}
