//! AWGN injection, SNR bookkeeping and the two end-to-end link models.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::modem::Constellation;
use crate::numeric::{q_function, Real};
use crate::waveform::{build_isi_taps, design_srrc, matched_filter_downsample, shape, FtnConfig, IsiTaps, Pulse};

/// Deterministic random stream used by every stochastic operation.
pub type RngStream = ChaCha8Rng;

/// Opens stream `stream` of the generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Noise variance per complex sample for a given `E_b/N_0`.
pub fn ebn0_to_sigma2(eb_n0_db: f64, r: usize, code_rate: f64, symbol_energy: f64) -> Result<f64> {
    if r == 0 {
        return Err(Error::Domain("bits per symbol must be at least 1".into()));
    }
    if !(code_rate > 0.0 && code_rate <= 1.0) {
        return Err(Error::Domain(format!("code rate {code_rate} not in (0, 1]")));
    }
    if !(symbol_energy > 0.0) || !eb_n0_db.is_finite() {
        return Err(Error::Domain("symbol energy must be positive and Eb/N0 finite".into()));
    }
    Ok(symbol_energy / (r as f64 * code_rate * 10f64.powf(eb_n0_db / 10.0)))
}

/// One operating point of a BER sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub eb_n0_db: f64,
    pub sigma2: f64,
}

impl SnrPoint {
    pub fn new(eb_n0_db: f64, r: usize, code_rate: f64, symbol_energy: f64) -> Result<Self> {
        Ok(Self {
            eb_n0_db,
            sigma2: ebn0_to_sigma2(eb_n0_db, r, code_rate, symbol_energy)?,
        })
    }
}

/// Draws circular complex Gaussian noise of total variance `sigma2`.
pub fn complex_noise<T: Real>(n: usize, sigma2: f64, rng: &mut RngStream) -> Vec<Complex<T>> {
    let s = (sigma2 / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(T::lit(re * s), T::lit(im * s))
        })
        .collect()
}

/// Adds i.i.d. circular complex Gaussian noise with total variance `sigma2`.
pub fn add_awgn<T: Real>(waveform: &[Complex<T>], sigma2: f64, rng_seed: u64) -> Vec<Complex<T>> {
    let mut rng = rng_stream(rng_seed, 0);
    add_awgn_with(waveform, sigma2, &mut rng)
}

pub fn add_awgn_with<T: Real>(waveform: &[Complex<T>], sigma2: f64, rng: &mut RngStream) -> Vec<Complex<T>> {
    assert!(sigma2 >= 0.0, "noise variance must be non-negative");
    if sigma2 == 0.0 {
        return waveform.to_vec();
    }
    let noise = complex_noise::<T>(waveform.len(), sigma2, rng);
    waveform.iter().zip(noise).map(|(&w, n)| w + n).collect()
}

/// Exact bit error rate of Gray square QAM on a Nyquist AWGN channel.
pub fn theoretical_ber(c: &Constellation<f64>, eb_n0_db: f64) -> f64 {
    let r = c.order_bits();
    let sigma2 = ebn0_to_sigma2(eb_n0_db, r, 1.0, 1.0).expect("valid Eb/N0");
    // Per real axis the noise standard deviation is sqrt(sigma2 / 2).
    let sd = (sigma2 / 2.0).sqrt();
    let axis = c.axis();
    let mut sorted: Vec<(f64, usize)> = axis.levels.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let bounds: Vec<f64> = sorted.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
    let mut errors = 0.0;
    for &(a, tx) in &sorted {
        for (k, &(_, rx)) in sorted.iter().enumerate() {
            if rx == tx {
                continue;
            }
            let lo = if k == 0 { f64::NEG_INFINITY } else { bounds[k - 1] };
            let hi = if k == sorted.len() - 1 {
                f64::INFINITY
            } else {
                bounds[k]
            };
            let p = q_function((lo - a) / sd) - q_function((hi - a) / sd);
            errors += p * (tx ^ rx).count_ones() as f64;
        }
    }
    errors / (sorted.len() * axis.bits) as f64
}

/// `E_b/N_0` (dB) at which Nyquist AWGN transmission reaches `target_ber`.
pub fn ebn0_for_ber(c: &Constellation<f64>, target_ber: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if theoretical_ber(c, mid) > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// How the received matched-filter samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelModel {
    /// Oversampled pulse train, white noise, matched filter.
    #[default]
    Waveform,
    /// Symbol-spaced convolution with the ISI taps plus pulse-filtered noise.
    SymbolRate,
}

/// A configured FTN link producing matched-filter samples `y_n`.
#[derive(Debug, Clone)]
pub struct FtnLink<T> {
    pub cfg: FtnConfig,
    pub pulse: Pulse<T>,
    pub taps: IsiTaps<T>,
    pub model: ChannelModel,
}

impl<T: Real> FtnLink<T> {
    pub fn new(cfg: FtnConfig, isi_half_len: usize, model: ChannelModel) -> Result<Self> {
        Ok(Self {
            pulse: design_srrc(&cfg)?,
            taps: build_isi_taps(&cfg, isi_half_len)?,
            cfg,
            model,
        })
    }

    /// Transmits a burst and returns one matched-filter sample per symbol.
    ///
    /// Both models draw the same white noise from `rng`, so with equal
    /// streams they differ only in the deterministic signal term.
    pub fn transmit(&self, symbols: &[Complex<T>], sigma2: f64, rng: &mut RngStream) -> Vec<Complex<T>> {
        let n = symbols.len();
        if n == 0 {
            return Vec::new();
        }
        match self.model {
            ChannelModel::Waveform => {
                let tx = shape(symbols, &self.pulse, &self.cfg);
                let rx = add_awgn_with(&tx, sigma2, rng);
                matched_filter_downsample(&rx, &self.pulse, &self.cfg, n).expect("waveform sized by shape")
            }
            ChannelModel::SymbolRate => {
                let amp = T::lit(self.cfg.symbol_energy.sqrt());
                let mut y = self.taps.convolve_same(symbols);
                for v in &mut y {
                    *v *= amp;
                }
                if sigma2 > 0.0 {
                    let len = (n - 1) * self.cfg.oversampling + self.pulse.len();
                    let white = complex_noise::<T>(len, sigma2, rng);
                    let colored = matched_filter_downsample(&white, &self.pulse, &self.cfg, n)
                        .expect("noise sized for the burst");
                    for (v, w) in y.iter_mut().zip(colored) {
                        *v += w;
                    }
                }
                y
            }
        }
    }
}
