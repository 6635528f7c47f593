use rayon::prelude::*;

use super::config::{TrainConfig, TrainData};
use super::metrics::MetricsRecord;
use crate::data::{Batches, Dataset};
use crate::engine::{lr_schedule, softmax_cross_entropy, Adam, AdamConfig, Network, ParamStore};
use crate::error::{Error, Result};

const EVAL_CHUNK: usize = 1000;
/// Keeps batch order independent of the RNG streams used for initialization.
const BATCH_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub metrics: Vec<MetricsRecord>,
    /// Network at the epoch with the highest test accuracy.
    pub best: Network,
    pub best_epoch: usize,
    pub best_test_acc: f64,
    pub best_sparsity: f64,
    pub last: Network,
}

impl RunResult {
    pub fn final_sparsity(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.sparsity)
    }

    pub fn final_test_acc(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.test_acc)
    }
}

/// All repeats of one configuration, ordered by run index.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub runs: Vec<RunResult>,
}

impl TrainOutcome {
    pub fn metrics(&self) -> impl Iterator<Item = &MetricsRecord> {
        self.runs.iter().flat_map(|r| r.metrics.iter())
    }

    /// Run with the highest best-epoch test accuracy (earliest on ties).
    pub fn best_run(&self) -> &RunResult {
        let mut best = &self.runs[0];
        for r in &self.runs[1..] {
            if r.best_test_acc > best.best_test_acc {
                best = r;
            }
        }
        best
    }
}

/// Fraction of weights that are exactly zero. For bit-plane layers that is
/// every weight whose magnitude bits are all 0.
pub fn sparsity(net: &Network) -> f64 {
    let (mut zeros, mut total) = (0usize, 0usize);
    for p in net.params().iter().flatten() {
        match p {
            ParamStore::Bits(t) => zeros += t.zero_count(),
            ParamStore::Float { values, .. } => zeros += values.iter().filter(|&&v| v == 0.0).count(),
        }
        total += p.len();
    }
    if total == 0 {
        0.0
    } else {
        zeros as f64 / total as f64
    }
}

/// Classification accuracy over a dataset, evaluated in `f32`.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<f64> {
    evaluate_with(net, data, |net, x| net.predict::<f32>(x))
}

/// Accuracy with a caller-supplied classifier over `f32` batches.
pub fn evaluate_with(
    net: &Network,
    data: &Dataset,
    classify: impl Fn(&Network, &crate::engine::Tensor<f32>) -> Result<Vec<usize>>,
) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.gather::<f32>(chunk, 1.0);
        let pred = classify(net, &x)?;
        correct += pred.iter().zip(&y).filter(|(&p, &l)| p == l as usize).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Predicted class of every sample, evaluated in `f64`.
pub fn predictions_f64(net: &Network, data: &Dataset) -> Result<Vec<usize>> {
    let weights = net.weights::<f64>();
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, _) = data.gather::<f64>(chunk, 1.0);
        out.extend(net.logits_with(&weights, &x)?.argmax_rows());
    }
    Ok(out)
}

/// Fresh network for a config and seed.
pub fn build_network(config: &TrainConfig, seed: u64) -> Result<Network> {
    let arch = &config.architecture;
    Network::init(&arch.input_shape(), arch.layers(), &config.weight_mode(), seed)
}

/// Trains one repeat. `initial` replaces the freshly initialized network
/// (used to train a carrier that already holds a payload).
pub fn train_run(
    config: &TrainConfig,
    run: usize,
    data: &TrainData,
    initial: Option<Network>,
    observer: &mut dyn FnMut(&MetricsRecord),
) -> Result<RunResult> {
    config.validate()?;
    let seed = config.run_seed(run);
    let mut net = match initial {
        Some(net) => net,
        None => build_network(config, seed)?,
    };
    let in_shape = data.train.dims();
    if net.input_shape() != in_shape {
        return Err(Error::shape(net.input_shape(), &in_shape));
    }
    let mut adam = Adam::new(&net, AdamConfig::default());
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best = (net.clone(), 0usize, f64::NEG_INFINITY, 0.0f64);

    for epoch in 0..config.epochs {
        let lr = lr_schedule(epoch, config.base_lr, &config.milestones);
        let (mut loss_sum, mut correct, mut seen) = (0.0f64, 0usize, 0usize);
        let batches = Batches::new(
            data.train.len(),
            config.batch_size,
            seed ^ BATCH_SEED_MIX,
            epoch as u64,
        );
        for batch in batches {
            let (x, y) = data.train.gather::<f32>(&batch, 1.0);
            let (logits, cache) = net.forward(&x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
            correct += logits
                .argmax_rows()
                .iter()
                .zip(&y)
                .filter(|(&p, &l)| p == l as usize)
                .count();
            loss_sum += loss * y.len() as f64;
            seen += y.len();
            let grads = net.backward(&cache, &grad)?;
            adam.step(&mut net, &grads, lr)?;
        }
        let test_acc = evaluate(&net, &data.test)?;
        let record = MetricsRecord {
            run,
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            train_acc: correct as f64 / seen.max(1) as f64,
            test_acc,
            sparsity: sparsity(&net),
            lr,
        };
        if !record.train_loss.is_finite() {
            return Err(Error::Numeric(format!("training loss diverged at epoch {epoch}")));
        }
        observer(&record);
        if test_acc > best.2 {
            best = (net.clone(), epoch, test_acc, record.sparsity);
        }
        metrics.push(record);
    }

    Ok(RunResult {
        run,
        seed,
        metrics,
        best: best.0,
        best_epoch: best.1,
        best_test_acc: best.2,
        best_sparsity: best.3,
        last: net,
    })
}

/// Runs every repeat of `config`, `config.jobs` at a time. Each run is
/// single-threaded, so results do not depend on the job count.
pub fn train(
    config: &TrainConfig,
    data: &TrainData,
    observer: &(dyn Fn(&MetricsRecord) + Sync),
) -> Result<TrainOutcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunResult> = pool.install(|| {
        (0..config.repeats)
            .into_par_iter()
            .map(|run| train_run(config, run, data, None, &mut |m| observer(m)))
            .collect::<Result<_>>()
    })?;
    Ok(TrainOutcome { runs })
}
