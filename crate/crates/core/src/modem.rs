//! Gray-labelled square QAM: mapping, nearest-point decisions and bit LLRs.
//!
//! Labels are integers whose most significant bit is the first bit of the
//! symbol in the bit stream. For two-dimensional constellations the first
//! half of the label drives the in-phase axis and the second half the
//! quadrature axis, each as a Gray-coded PAM.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, Real};

/// Gray-coded PAM alphabet on one real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Pam<T> {
    /// Amplitude for each per-axis label.
    pub levels: Vec<T>,
    /// Bits carried by this axis.
    pub bits: usize,
}

impl<T: Real> Pam<T> {
    fn gray(bits: usize, scale: T) -> Self {
        let m = 1usize << bits;
        let mut levels = vec![T::zero(); m];
        // Level index i counts down from the most positive amplitude.
        for i in 0..m {
            let label = i ^ (i >> 1);
            levels[label] = T::lit((m as f64 - 1.0) - 2.0 * i as f64) * scale;
        }
        Self { levels, bits }
    }

    pub fn size(&self) -> usize {
        self.levels.len()
    }

    /// Nearest level; equidistant candidates resolve to the smaller label.
    pub fn decide(&self, v: T) -> usize {
        let mut best = 0;
        let mut best_d = (v - self.levels[0]).abs();
        for (label, &a) in self.levels.iter().enumerate().skip(1) {
            let d = (v - a).abs();
            if d < best_d {
                best = label;
                best_d = d;
            }
        }
        best
    }
}

/// Square Gray QAM with unit mean energy (BPSK when `order_bits == 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    order_bits: usize,
    axis: Pam<T>,
    points: Vec<Complex<T>>,
}

impl<T: Real> Constellation<T> {
    /// `order_bits` must be 1 (BPSK) or even (QPSK, 16QAM, 64QAM, ...).
    pub fn new(order_bits: usize) -> Result<Self> {
        if order_bits == 0 || (order_bits > 1 && !order_bits.is_multiple_of(2)) || order_bits > 12 {
            return Err(Error::Domain(format!(
                "unsupported modulation order of {order_bits} bits per symbol"
            )));
        }
        let (axis, points) = if order_bits == 1 {
            let axis = Pam::gray(1, T::one());
            let points = axis.levels.iter().map(|&a| Complex::new(a, T::zero())).collect();
            (axis, points)
        } else {
            let half = order_bits / 2;
            let ma = (1usize << half) as f64;
            let scale = T::lit((1.5 / (ma * ma - 1.0)).sqrt());
            let axis = Pam::gray(half, scale);
            let mut points = Vec::with_capacity(1 << order_bits);
            for label in 0..(1usize << order_bits) {
                let i_lab = label >> half;
                let q_lab = label & ((1 << half) - 1);
                points.push(Complex::new(axis.levels[i_lab], axis.levels[q_lab]));
            }
            (axis, points)
        };
        Ok(Self {
            order_bits,
            axis,
            points,
        })
    }

    pub fn bpsk() -> Self {
        Self::new(1).unwrap()
    }

    pub fn qpsk() -> Self {
        Self::new(2).unwrap()
    }

    pub fn qam16() -> Self {
        Self::new(4).unwrap()
    }

    pub fn qam64() -> Self {
        Self::new(6).unwrap()
    }

    /// Bits per symbol `r`.
    pub fn order_bits(&self) -> usize {
        self.order_bits
    }

    /// True when the quadrature axis carries data.
    pub fn is_complex(&self) -> bool {
        self.order_bits > 1
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    /// Per-axis PAM alphabet.
    pub fn axis(&self) -> &Pam<T> {
        &self.axis
    }

    pub fn bits_of(&self, label: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.order_bits).map(move |i| ((label >> (self.order_bits - 1 - i)) & 1) as u8)
    }

    /// Label of the nearest point.
    pub fn decide_label(&self, y: Complex<T>) -> usize {
        if self.is_complex() {
            (self.axis.decide(y.re) << self.axis.bits) | self.axis.decide(y.im)
        } else {
            self.axis.decide(y.re)
        }
    }
}

/// Maps a bit stream onto constellation points, `r` bits per symbol.
pub fn map_bits<T: Real>(bits: &[u8], c: &Constellation<T>) -> Result<Vec<Complex<T>>> {
    let r = c.order_bits();
    if !bits.len().is_multiple_of(r) {
        return Err(Error::LengthMismatch {
            expected: bits.len().div_ceil(r) * r,
            actual: bits.len(),
        });
    }
    Ok(bits
        .chunks_exact(r)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            c.points[label]
        })
        .collect())
}

/// Nearest constellation point for every symbol (unit-energy scale).
pub fn hard_decision<T: Real>(symbols: &[Complex<T>], c: &Constellation<T>) -> Vec<Complex<T>> {
    symbols.iter().map(|&y| c.points[c.decide_label(y)]).collect()
}

/// Bits of the nearest constellation point for every symbol.
pub fn hard_bits<T: Real>(symbols: &[Complex<T>], c: &Constellation<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * c.order_bits());
    for &y in symbols {
        out.extend(c.bits_of(c.decide_label(y)));
    }
    out
}

/// How bit likelihoods are combined across constellation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DemapMode {
    /// Exact log-sum for `r <= 2`, max-log above.
    #[default]
    Auto,
    Exact,
    MaxLog,
}

/// Bit LLRs `ln P(b = 0 | y) / P(b = 1 | y)` for `y = sqrt(E_s) x + n`.
///
/// `noise_var` is the noise variance per real dimension, i.e. half the total
/// variance of circular complex noise.
pub fn demap_llr<T: Real>(symbols: &[Complex<T>], c: &Constellation<T>, noise_var: T, symbol_energy: T) -> Vec<T> {
    demap_llr_with(symbols, c, noise_var, symbol_energy, DemapMode::Auto)
}

pub fn demap_llr_with<T: Real>(
    symbols: &[Complex<T>],
    c: &Constellation<T>,
    noise_var: T,
    symbol_energy: T,
    mode: DemapMode,
) -> Vec<T> {
    let exact = match mode {
        DemapMode::Auto => c.order_bits() <= 2,
        DemapMode::Exact => true,
        DemapMode::MaxLog => false,
    };
    let amp = symbol_energy.sqrt().to_f64_lossless();
    let inv = 1.0 / (2.0 * noise_var.to_f64_lossless());
    let axis = c.axis();
    let levels: Vec<f64> = axis.levels.iter().map(|a| a.to_f64_lossless() * amp).collect();
    let mut out = Vec::with_capacity(symbols.len() * c.order_bits());
    let mut metrics = vec![0.0; levels.len()];
    let mut push_axis = |v: f64, out: &mut Vec<T>| {
        for (m, &a) in metrics.iter_mut().zip(&levels) {
            *m = -(v - a) * (v - a) * inv;
        }
        for bit in 0..axis.bits {
            let shift = axis.bits - 1 - bit;
            let (mut zero, mut one) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (label, &m) in metrics.iter().enumerate() {
                let slot = if (label >> shift) & 1 == 0 { &mut zero } else { &mut one };
                *slot = if exact { log_sum_exp(*slot, m) } else { slot.max(m) };
            }
            out.push(T::lit(zero - one));
        }
    };
    for y in symbols {
        push_axis(y.re.to_f64_lossless(), &mut out);
        if c.is_complex() {
            push_axis(y.im.to_f64_lossless(), &mut out);
        }
    }
    out
}

/// Hard bit decision from an LLR: bit 0 when the LLR is non-negative.
#[inline]
pub fn llr_to_bit<T: Real>(llr: T) -> u8 {
    u8::from(llr < T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn bpsk_and_qpsk_conventions() {
        let b = Constellation::<f64>::bpsk();
        let s = map_bits(&[0, 1], &b).unwrap();
        assert_eq!(s, vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]);
        let q = Constellation::<f64>::qpsk();
        let s = map_bits(&[0, 0], &q).unwrap();
        assert!((s[0] - Complex::new(H, H)).norm() < 1e-15);
        let s = map_bits(&[1, 0], &q).unwrap();
        assert!((s[0] - Complex::new(-H, H)).norm() < 1e-15);
        assert!(map_bits(&[0, 1, 1], &q).is_err());
    }

    #[test]
    fn unit_mean_energy() {
        for r in [1, 2, 4, 6] {
            let c = Constellation::<f64>::new(r).unwrap();
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points().len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "r={r}");
        }
        assert!(Constellation::<f64>::new(3).is_err());
    }

    #[test]
    fn gray_neighbors_differ_in_one_bit() {
        for r in [2, 4, 6] {
            let c = Constellation::<f64>::new(r).unwrap();
            let axis = c.axis();
            let mut order: Vec<usize> = (0..axis.size()).collect();
            order.sort_by(|&a, &b| axis.levels[a].partial_cmp(&axis.levels[b]).unwrap());
            for w in order.windows(2) {
                assert_eq!((w[0] ^ w[1]).count_ones(), 1);
            }
        }
    }

    #[test]
    fn pam4_labels() {
        let c = Constellation::<f64>::qam16();
        let s = c.axis().levels[0] / c.axis().levels[1];
        // 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3
        assert!((s - 3.0).abs() < 1e-12);
        assert!(c.axis().levels[3] < 0.0 && c.axis().levels[3] > c.axis().levels[2]);
    }

    #[test]
    fn hard_decision_nearest_and_ties() {
        let q = Constellation::<f64>::qpsk();
        let d = hard_decision(&[Complex::new(0.9, 0.8)], &q);
        assert!((d[0] - Complex::new(H, H)).norm() < 1e-15);
        let d = hard_decision(&[Complex::new(0.0, 0.5)], &q);
        assert!((d[0] - Complex::new(H, H)).norm() < 1e-15);
        let d = hard_decision(&[Complex::new(-0.2, 0.0)], &q);
        assert!((d[0] - Complex::new(-H, H)).norm() < 1e-15);
    }

    #[test]
    fn hard_decision_idempotent_on_points() {
        for r in [1, 2, 4, 6] {
            let c = Constellation::<f64>::new(r).unwrap();
            assert_eq!(hard_decision(c.points(), &c), c.points().to_vec());
        }
    }

    #[test]
    fn bpsk_llr_closed_form() {
        let b = Constellation::<f64>::bpsk();
        let l = demap_llr(&[Complex::new(1.0, 0.0)], &b, 1.0, 1.0);
        assert!((l[0] - 2.0).abs() < 1e-12);
        let l = demap_llr(&[Complex::new(0.3, 0.0)], &b, 0.5, 4.0);
        assert!((l[0] - 2.0 * 2.0 * 0.3 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_input_gives_zero_llrs() {
        for r in [1, 2, 4, 6] {
            let c = Constellation::<f64>::new(r).unwrap();
            let l = demap_llr(&[Complex::new(0.0, 0.0)], &c, 0.3, 1.0);
            assert_eq!(l.len(), r);
            // Only the sign bits are symmetric about zero for r >= 4.
            assert!(l[0].abs() < 1e-12);
            if r > 1 {
                assert!(l[r / 2].abs() < 1e-12);
            }
            if r <= 2 {
                assert!(l.iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    /// Exhaustive Bayes over every point of the 2-D constellation.
    fn brute_force_llr(y: Complex<f64>, c: &Constellation<f64>, noise_var: f64, es: f64) -> Vec<f64> {
        let r = c.order_bits();
        (0..r)
            .map(|bit| {
                let (mut p0, mut p1) = (0.0, 0.0);
                for (label, &x) in c.points().iter().enumerate() {
                    let d = y - x * es.sqrt();
                    let lik = (-d.norm_sqr() / (2.0 * noise_var)).exp();
                    if (label >> (r - 1 - bit)) & 1 == 0 {
                        p0 += lik;
                    } else {
                        p1 += lik;
                    }
                }
                (p0 / p1).ln()
            })
            .collect()
    }

    #[test]
    fn qpsk_llr_matches_exhaustive_bayes() {
        let q = Constellation::<f64>::qpsk();
        let y = Complex::new(0.3, -0.7);
        let got = demap_llr(&[y], &q, 0.5, 1.0);
        let want = brute_force_llr(y, &q, 0.5, 1.0);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }

    #[test]
    fn exact_mode_matches_bayes_for_16qam() {
        let c = Constellation::<f64>::qam16();
        for &y in &[
            Complex::new(0.2, -0.9),
            Complex::new(-1.1, 0.05),
            Complex::new(0.6, 0.6),
        ] {
            let got = demap_llr_with(&[y], &c, 0.2, 1.0, DemapMode::Exact);
            let want = brute_force_llr(y, &c, 0.2, 1.0);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn llr_sign_agrees_with_hard_decision() {
        for r in [1, 2, 4, 6] {
            let c = Constellation::<f64>::new(r).unwrap();
            for i in -20..=20 {
                for j in -20..=20 {
                    let y = Complex::new(i as f64 * 0.071, j as f64 * 0.063);
                    let llr = demap_llr(&[y], &c, 0.1, 1.0);
                    let hard = hard_bits(&[y], &c);
                    let soft: Vec<u8> = llr.iter().map(|&l| llr_to_bit(l)).collect();
                    assert_eq!(soft, hard, "r={r} y={y}");
                }
            }
        }
    }
}
