//! Square-root raised cosine pulses, FTN pulse-train synthesis, matched
//! filtering and the symbol-spaced ISI model.
//!
//! Time is measured in units of the Nyquist interval `T_N`. Symbols are sent
//! every `tau` and the waveform is sampled `oversampling` times per symbol.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::numeric::{sinc, Real};

/// Physical-layer parameters of the FTN link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtnConfig {
    /// Acceleration factor, `0 < tau <= 1`.
    pub tau: f64,
    /// SRRC roll-off, `0 <= beta <= 1`.
    pub beta: f64,
    /// One-sided pulse span in symbol intervals.
    pub span_symbols: usize,
    /// Samples per symbol interval (even, at least 4).
    pub oversampling: usize,
    /// Average symbol energy `E_s`.
    pub symbol_energy: f64,
}

impl Default for FtnConfig {
    fn default() -> Self {
        Self {
            tau: 0.8,
            beta: 0.5,
            span_symbols: 16,
            oversampling: 8,
            symbol_energy: 1.0,
        }
    }
}

impl FtnConfig {
    pub fn new(tau: f64, beta: f64, span_symbols: usize, oversampling: usize, symbol_energy: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            beta,
            span_symbols,
            oversampling,
            symbol_energy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default link with the given acceleration factor and roll-off.
    pub fn with_tau_beta(tau: f64, beta: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            beta,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(invalid("tau", format!("{} not in (0, 1]", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta", format!("{} not in [0, 1]", self.beta)));
        }
        if self.span_symbols < 8 {
            return Err(invalid(
                "span_symbols",
                format!("{} is below the minimum of 8", self.span_symbols),
            ));
        }
        if self.oversampling < 4 || !self.oversampling.is_multiple_of(2) {
            return Err(invalid(
                "oversampling",
                format!("{} must be even and at least 4", self.oversampling),
            ));
        }
        if !(self.symbol_energy > 0.0 && self.symbol_energy.is_finite()) {
            return Err(invalid(
                "symbol_energy",
                format!("{} must be positive", self.symbol_energy),
            ));
        }
        Ok(())
    }

    /// Waveform sample spacing in units of `T_N`.
    pub fn sample_spacing(&self) -> f64 {
        self.tau / self.oversampling as f64
    }
}

/// Sampled, unit-energy SRRC impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse<T> {
    pub taps: Vec<T>,
    /// Index of the center tap.
    pub delay: usize,
}

impl<T: Real> Pulse<T> {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> T {
        self.taps.iter().map(|&h| h * h).sum()
    }
}

/// Closed-form SRRC impulse response for unit `T_N`, before normalization.
///
/// The removable singularities at `t = 0` and `|t| = 1/(4 beta)` are replaced
/// by their limits.
pub fn srrc_value<T: Real>(beta: T, t: T) -> T {
    let one = T::one();
    let pi = T::PI();
    let four = T::lit(4.0);
    let eps = T::lit(1e-9);
    if t.abs() < eps {
        return one - beta + four * beta / pi;
    }
    if beta == T::zero() {
        return sinc(t);
    }
    let quarter = one / (four * beta);
    if (t.abs() - quarter).abs() < eps * quarter.max(one) {
        let a = pi / (four * beta);
        let two_over_pi = T::lit(2.0) / pi;
        return beta / T::SQRT_2() * ((one + two_over_pi) * a.sin() + (one - two_over_pi) * a.cos());
    }
    let num = (pi * t * (one - beta)).sin() + four * beta * t * (pi * t * (one + beta)).cos();
    let den = pi * t * (one - (four * beta * t) * (four * beta * t));
    num / den
}

/// Builds the SRRC pulse sampled every `tau / oversampling`, truncated to
/// `±span_symbols` symbol intervals and normalized to unit energy.
pub fn design_srrc<T: Real>(cfg: &FtnConfig) -> Result<Pulse<T>> {
    cfg.validate()?;
    let delay = cfg.span_symbols * cfg.oversampling;
    let dt = cfg.sample_spacing();
    let beta = T::lit(cfg.beta);
    // Evaluate on the positive half and mirror so the taps are exactly even.
    let half: Vec<T> = (0..=delay).map(|i| srrc_value(beta, T::lit(i as f64 * dt))).collect();
    let mut taps = Vec::with_capacity(2 * delay + 1);
    taps.extend(half.iter().skip(1).rev().copied());
    taps.extend(half.iter().copied());
    let energy: T = taps.iter().map(|&h| h * h).sum();
    let scale = energy.sqrt().recip();
    for h in &mut taps {
        *h *= scale;
    }
    Ok(Pulse { taps, delay })
}

/// Raised-cosine autocorrelation of the SRRC, normalized to `g(0) = 1`.
/// `t` is in units of `T_N`.
pub fn raised_cosine_autocorr<T: Real>(cfg: &FtnConfig, t: T) -> T {
    let beta = T::lit(cfg.beta);
    let one = T::one();
    let two = T::lit(2.0);
    if beta == T::zero() {
        return sinc(t);
    }
    let singular = one / (two * beta);
    if (t.abs() - singular).abs() < T::lit(1e-9) * singular.max(one) {
        return T::FRAC_PI_4() * sinc(singular);
    }
    let bt = two * beta * t;
    sinc(t) * (T::PI() * beta * t).cos() / (one - bt * bt)
}

/// Symbol-spaced ISI vector `g[k] = g((k - K) tau)` for `k = 0..=2K`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiTaps<T> {
    pub taps: Vec<T>,
    pub center: usize,
}

impl<T: Real> IsiTaps<T> {
    /// The ISI-free channel.
    pub fn impulse(k: usize) -> Self {
        let mut taps = vec![T::zero(); 2 * k + 1];
        taps[k] = T::one();
        Self { taps, center: k }
    }

    /// Tap at signed offset `j` from the center; zero outside the support.
    #[inline]
    pub fn at(&self, j: isize) -> T {
        let idx = self.center as isize + j;
        if idx < 0 || idx as usize >= self.taps.len() {
            T::zero()
        } else {
            self.taps[idx as usize]
        }
    }

    /// Energy of the off-center taps.
    pub fn off_center_energy(&self) -> T {
        self.taps
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.center)
            .map(|(_, &g)| g * g)
            .sum()
    }

    /// Same-length, center-aligned convolution `(x * g)[n] = sum_j g[j] x[n - j]`.
    pub fn convolve_same(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = x.len();
        let k = self.center as isize;
        (0..n as isize)
            .map(|i| {
                let lo = (i - k).max(0);
                let hi = (i + k).min(n as isize - 1);
                let mut acc = Complex::new(T::zero(), T::zero());
                for src in lo..=hi {
                    acc += x[src as usize] * self.at(i - src);
                }
                acc
            })
            .collect()
    }
}

/// Samples the raised cosine at the symbol grid to build `2K + 1` taps.
pub fn build_isi_taps<T: Real>(cfg: &FtnConfig, k: usize) -> Result<IsiTaps<T>> {
    if k == 0 {
        return Err(Error::Domain("ISI half-length K must be at least 1".into()));
    }
    // Evaluate one side and mirror so the vector is palindromic bit for bit.
    let side: Vec<T> = (0..=k)
        .map(|j| raised_cosine_autocorr(cfg, T::lit(j as f64 * cfg.tau)))
        .collect();
    let mut taps = Vec::with_capacity(2 * k + 1);
    taps.extend(side.iter().skip(1).rev().copied());
    taps.extend(side.iter().copied());
    Ok(IsiTaps { taps, center: k })
}

/// Upsamples by `oversampling`, filters with `pulse` and scales by `sqrt(E_s)`.
///
/// Output length is `(N - 1) * oversampling + pulse.len()`.
pub fn shape<T: Real>(symbols: &[Complex<T>], pulse: &Pulse<T>, cfg: &FtnConfig) -> Vec<Complex<T>> {
    if symbols.is_empty() {
        return Vec::new();
    }
    let os = cfg.oversampling;
    let amp = T::lit(cfg.symbol_energy.sqrt());
    let mut out = vec![Complex::new(T::zero(), T::zero()); (symbols.len() - 1) * os + pulse.len()];
    for (i, &x) in symbols.iter().enumerate() {
        let xs = x * amp;
        let base = i * os;
        for (o, &h) in out[base..base + pulse.len()].iter_mut().zip(&pulse.taps) {
            *o += xs * h;
        }
    }
    out
}

/// Matched filter followed by symbol-rate sampling with exact group-delay
/// compensation. Returns exactly `n_symbols` samples.
pub fn matched_filter_downsample<T: Real>(
    waveform: &[Complex<T>],
    pulse: &Pulse<T>,
    cfg: &FtnConfig,
    n_symbols: usize,
) -> Result<Vec<Complex<T>>> {
    let os = cfg.oversampling;
    if n_symbols == 0 {
        return Ok(Vec::new());
    }
    let needed = (n_symbols - 1) * os + pulse.len();
    if waveform.len() < needed {
        return Err(Error::LengthMismatch {
            expected: needed,
            actual: waveform.len(),
        });
    }
    Ok((0..n_symbols)
        .map(|n| {
            let seg = &waveform[n * os..n * os + pulse.len()];
            seg.iter()
                .zip(&pulse.taps)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (&w, &h)| acc + w * h)
        })
        .collect())
}
