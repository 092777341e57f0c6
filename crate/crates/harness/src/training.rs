//! Training-set generation and detector training.

use std::io::Write;
use std::path::Path;

use ftn_core::channel::{ebn0_to_sigma2, FtnLink};
use ftn_core::detector::{make_dataset, Axes, DetectorNets, DlDetector, SlidingWindowDataset, Window};
use ftn_core::neural::{evaluate_loss, train_with_progress, Mlp};
use ftn_core::{Complex, Constellation64};
use rand::Rng;

use crate::config::RunConfig;
use crate::streams::{stream, Purpose};
use crate::{HarnessError, Result};

/// Symbols per simulated training burst.
const TRAIN_BURST: usize = 16_384;

/// Uniformly drawn constellation points.
pub fn random_symbols(c: &Constellation64, n: usize, rng: &mut impl Rng) -> Vec<Complex<f64>> {
    let m = c.points().len();
    (0..n).map(|_| c.points()[rng.random_range(0..m)]).collect()
}

/// Sliding-window pairs from `symbols` transmitted symbols at `eb_n0_db`.
pub fn generate_dataset(
    cfg: &RunConfig,
    eb_n0_db: f64,
    symbols: usize,
    purposes: (Purpose, Purpose),
) -> Result<SlidingWindowDataset<f64>> {
    let c = cfg.constellation();
    let link = FtnLink::<f64>::new(cfg.ftn, cfg.isi_half_len, cfg.channel_model)?;
    let sigma2 = ebn0_to_sigma2(eb_n0_db, c.order_bits(), 1.0, cfg.ftn.symbol_energy)?;
    let axes = Axes::of(&c);
    let mut data: Option<SlidingWindowDataset<f64>> = None;
    let mut done = 0;
    let mut burst = 0u64;
    while done < symbols {
        let n = (symbols - done).min(TRAIN_BURST).max(cfg.window.len);
        let x = random_symbols(&c, n, &mut stream(cfg.seed, purposes.0, 0, burst));
        let y = link.transmit(&x, sigma2, &mut stream(cfg.seed, purposes.1, 0, burst));
        let part = make_dataset(&x, &y, cfg.window, axes)?;
        match data.as_mut() {
            Some(d) => d.append(&part)?,
            None => data = Some(part),
        }
        done += n;
        burst += 1;
    }
    data.ok_or(HarnessError::Core(ftn_core::Error::EmptyDataset))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Trained network rounded to the persisted precision.
    pub net: Mlp<f32>,
    pub loss_trace: Vec<f64>,
    /// Loss of `net` on a held-out set drawn from separate streams.
    pub validation_loss: f64,
    pub train_eb_n0_db: f64,
}

/// Generates data, trains in double precision and rounds the result to `f32`.
pub fn train_detector(cfg: &RunConfig, progress: impl FnMut(usize, f64)) -> Result<TrainOutcome> {
    let eb_n0 = cfg.training_eb_n0_db();
    log::info!(
        "training: tau={} beta={} r={} Eb/N0={eb_n0:.3} dB, {} symbols",
        cfg.ftn.tau,
        cfg.ftn.beta,
        cfg.order_bits,
        cfg.train.symbols_total
    );
    let data = generate_dataset(
        cfg,
        eb_n0,
        cfg.train.symbols_total,
        (Purpose::TrainSymbols, Purpose::TrainNoise),
    )?;
    let net = Mlp::<f64>::detector(cfg.window.len, cfg.window.step, cfg.train.seed)?;
    let trained = train_with_progress(net, &data, &cfg.train, progress)?;
    drop(data);
    let net = trained.net.cast::<f32>();
    let validation_loss = validation_loss(cfg, &net)?;
    Ok(TrainOutcome {
        net,
        loss_trace: trained.loss_trace,
        validation_loss,
        train_eb_n0_db: eb_n0,
    })
}

/// Held-out loss of a persisted-precision network.
pub fn validation_loss(cfg: &RunConfig, net: &Mlp<f32>) -> Result<f64> {
    let symbols = (cfg.train.symbols_total / 10).max(4 * cfg.window.len);
    let data = generate_dataset(
        cfg,
        cfg.training_eb_n0_db(),
        symbols,
        (Purpose::ValidSymbols, Purpose::ValidNoise),
    )?;
    Ok(evaluate_loss(
        &net.cast::<f64>(),
        data.inputs.view(),
        data.labels.view(),
    )?)
}

/// Wraps one network shared across both axes.
pub fn detector_from(net: Mlp<f32>, window: Window) -> Result<DlDetector<f32>> {
    Ok(DlDetector::new(DetectorNets::Single(net), window)?)
}

/// Writes `epoch,loss` rows.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut text = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        text.push_str(&format!("{},{l:e}\n", i + 1));
    }
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}
