//! Polar codes with belief-propagation decoding, and the coded receive
//! chain that buffers detector LLRs into code blocks.
//!
//! Bit indices are 0-based. The encoder applies `F^{(x)n}` in natural order
//! (no bit reversal); the decoder runs on the matching butterfly graph with
//! layer 0 on the message side and layer `n` on the channel side.

use num_complex::Complex;

use crate::detector::DlDetector;
use crate::error::{Error, Result};
use crate::modem::Constellation;
use crate::numeric::Real;
use crate::waveform::IsiTaps;

/// Scaling of the min-sum kernel.
pub const MIN_SUM_SCALE: f64 = 0.9375;

/// Saturation level of BP messages; frozen bits use it as their prior.
pub const MESSAGE_SATURATION: f64 = 1e30;

/// A polar code: block length `N = 2^n` and information set `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCode {
    stages: usize,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
}

impl PolarCode {
    /// Code with an explicit (0-based) information set.
    pub fn from_info_set(block_length: usize, info_set: &[usize]) -> Result<Self> {
        if !block_length.is_power_of_two() || block_length < 2 {
            return Err(Error::NotPowerOfTwo(block_length));
        }
        let mut sorted = info_set.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != info_set.len() || sorted.iter().any(|&i| i >= block_length) {
            return Err(Error::InvalidCode(format!(
                "information set must hold distinct indices below {block_length}"
            )));
        }
        if sorted.is_empty() {
            return Err(Error::InvalidCode("information set is empty".into()));
        }
        let mut frozen = vec![true; block_length];
        for &i in &sorted {
            frozen[i] = false;
        }
        Ok(Self {
            stages: block_length.trailing_zeros() as usize,
            info_set: sorted,
            frozen,
        })
    }

    pub fn block_length(&self) -> usize {
        self.frozen.len()
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn info_count(&self) -> usize {
        self.info_set.len()
    }

    pub fn rate(&self) -> f64 {
        self.info_count() as f64 / self.block_length() as f64
    }

    /// Sorted information indices.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    /// Sorted frozen indices.
    pub fn frozen_set(&self) -> Vec<usize> {
        (0..self.block_length()).filter(|&i| self.frozen[i]).collect()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }
}

/// Bhattacharyya parameters of the synthetic channels, initialized with
/// `z = exp(-10^(design_snr_db / 10))`.
///
/// For index `i` the bits of `i` are applied from the most significant one:
/// a 0 bit maps `z -> 2z - z^2`, a 1 bit maps `z -> z^2`.
pub fn bhattacharyya_parameters(block_length: usize, design_snr_db: f64) -> Result<Vec<f64>> {
    if !block_length.is_power_of_two() || block_length < 2 {
        return Err(Error::NotPowerOfTwo(block_length));
    }
    let stages = block_length.trailing_zeros();
    let z0 = (-(10f64.powf(design_snr_db / 10.0))).exp();
    Ok((0..block_length)
        .map(|i| {
            (0..stages)
                .rev()
                .fold(z0, |z, b| if (i >> b) & 1 == 1 { z * z } else { 2.0 * z - z * z })
        })
        .collect())
}

/// Indices of the `k` smallest reliabilities scores; ties go to the higher index.
pub fn select_info_set(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)));
    let mut info: Vec<usize> = order.into_iter().take(k).collect();
    info.sort_unstable();
    info
}

/// Picks the `info_count` most reliable synthetic channels.
pub fn construct_polar(block_length: usize, info_count: usize, design_snr_db: f64) -> Result<PolarCode> {
    if info_count == 0 || info_count >= block_length {
        return Err(Error::InvalidCode(format!(
            "need 0 < K < N, got K = {info_count}, N = {block_length}"
        )));
    }
    let z = bhattacharyya_parameters(block_length, design_snr_db)?;
    PolarCode::from_info_set(block_length, &select_info_set(&z, info_count))
}

/// In-place polar transform `v <- v F^{(x)n}` over GF(2).
pub fn polar_transform(v: &mut [u8]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut step = 1;
    while step < n {
        for block in (0..n).step_by(2 * step) {
            for p in block..block + step {
                v[p] ^= v[p + step];
            }
        }
        step *= 2;
    }
}

/// Encodes `K` information bits into an `N`-bit codeword.
pub fn polar_encode(info: &[u8], code: &PolarCode) -> Result<Vec<u8>> {
    if info.len() != code.info_count() {
        return Err(Error::LengthMismatch {
            expected: code.info_count(),
            actual: info.len(),
        });
    }
    let mut u = vec![0u8; code.block_length()];
    for (&i, &b) in code.info_set.iter().zip(info) {
        u[i] = b & 1;
    }
    polar_transform(&mut u);
    Ok(u)
}

/// Check-node kernel `0.9375 sign(x) sign(y) min(|x|, |y|)`.
#[inline]
pub fn min_sum_g<T: Real>(x: T, y: T) -> T {
    let mag = x.abs().min(y.abs()) * T::lit(MIN_SUM_SCALE);
    if (x < T::zero()) != (y < T::zero()) {
        -mag
    } else {
        mag
    }
}

/// Exact check-node combination `2 atanh(tanh(x/2) tanh(y/2))`.
#[inline]
pub fn box_plus<T: Real>(x: T, y: T) -> T {
    let mag = x.abs().min(y.abs());
    let signed = if (x < T::zero()) != (y < T::zero()) { -mag } else { mag };
    let corr = (-(x + y).abs()).exp().ln_1p() - (-(x - y).abs()).exp().ln_1p();
    signed + corr
}

/// Check-node update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BpKernel {
    #[default]
    ScaledMinSum,
    BoxPlus,
}

impl BpKernel {
    #[inline]
    fn apply<T: Real>(self, x: T, y: T) -> T {
        match self {
            BpKernel::ScaledMinSum => min_sum_g(x, y),
            BpKernel::BoxPlus => box_plus(x, y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BpConfig {
    pub max_iter: usize,
    pub kernel: BpKernel,
    /// Stop once the message-side decisions re-encode to the channel-side ones.
    pub early_stop: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            kernel: BpKernel::ScaledMinSum,
            early_stop: true,
        }
    }
}

/// Leftward (`l`) and rightward (`r`) messages, `(n + 1) x N` each.
#[derive(Debug, Clone, PartialEq)]
pub struct BpState<T> {
    pub l: Vec<Vec<T>>,
    pub r: Vec<Vec<T>>,
    pub iterations: usize,
}

impl<T: Real> BpState<T> {
    fn new(llrs: &[T], code: &PolarCode) -> Self {
        let n = code.block_length();
        let sat = T::lit(MESSAGE_SATURATION);
        let mut l = vec![vec![T::zero(); n]; code.stages + 1];
        let mut r = vec![vec![T::zero(); n]; code.stages + 1];
        for (dst, &v) in l[code.stages].iter_mut().zip(llrs) {
            *dst = v.max(-sat).min(sat);
        }
        for (j, dst) in r[0].iter_mut().enumerate() {
            if code.frozen[j] {
                *dst = sat;
            }
        }
        Self { l, r, iterations: 0 }
    }

    /// One right-to-left sweep followed by one left-to-right sweep.
    fn iterate(&mut self, kernel: BpKernel) {
        let stages = self.l.len() - 1;
        let n = self.l[0].len();
        let sat = T::lit(MESSAGE_SATURATION);
        let clip = |v: T| v.max(-sat).min(sat);
        for s in (0..stages).rev() {
            let step = 1 << s;
            let (left, right) = self.l.split_at_mut(s + 1);
            let (ls, lr) = (&mut left[s], &right[0]);
            let rs = &self.r[s];
            for block in (0..n).step_by(2 * step) {
                for p in block..block + step {
                    let q = p + step;
                    ls[p] = clip(kernel.apply(lr[p], lr[q] + rs[q]));
                    ls[q] = clip(kernel.apply(rs[p], lr[p]) + lr[q]);
                }
            }
        }
        for s in 0..stages {
            let step = 1 << s;
            let (left, right) = self.r.split_at_mut(s + 1);
            let (rs, rr) = (&left[s], &mut right[0]);
            let lr = &self.l[s + 1];
            for block in (0..n).step_by(2 * step) {
                for p in block..block + step {
                    let q = p + step;
                    rr[p] = clip(kernel.apply(rs[p], lr[q] + rs[q]));
                    rr[q] = clip(kernel.apply(rs[p], lr[p]) + rs[q]);
                }
            }
        }
        self.iterations += 1;
    }

    fn beliefs(&self, layer: usize) -> Vec<T> {
        self.l[layer].iter().zip(&self.r[layer]).map(|(&a, &b)| a + b).collect()
    }
}

/// Decoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct BpOutput<T> {
    /// Decisions at the information positions.
    pub info_bits: Vec<u8>,
    /// Decisions for every message position (frozen ones are 0).
    pub message_bits: Vec<u8>,
    /// Message-side beliefs as LLRs `ln P(0) / P(1)`.
    pub beliefs: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> BpOutput<T> {
    /// Sigmoid-squashed soft outputs `P(bit = 1)` in `[0, 1]`.
    pub fn soft_bits(&self) -> Vec<T> {
        self.beliefs.iter().map(|&b| T::one() / (T::one() + b.exp())).collect()
    }
}

#[inline]
fn decide<T: Real>(belief: T) -> u8 {
    u8::from(belief < T::zero())
}

/// Scaled min-sum BP decoding with the default schedule and early stopping.
pub fn bp_decode<T: Real>(llrs: &[T], code: &PolarCode, max_iter: usize) -> Result<BpOutput<T>> {
    let cfg = BpConfig {
        max_iter,
        ..BpConfig::default()
    };
    Ok(bp_decode_with(llrs, code, &cfg)?.0)
}

/// BP decoding with an explicit configuration; also returns the final messages.
pub fn bp_decode_with<T: Real>(llrs: &[T], code: &PolarCode, cfg: &BpConfig) -> Result<(BpOutput<T>, BpState<T>)> {
    if llrs.len() != code.block_length() {
        return Err(Error::LengthMismatch {
            expected: code.block_length(),
            actual: llrs.len(),
        });
    }
    if cfg.max_iter == 0 {
        return Err(Error::Domain("BP needs at least one iteration".into()));
    }
    let mut state = BpState::new(llrs, code);
    let mut message_bits = vec![0u8; code.block_length()];
    loop {
        state.iterate(cfg.kernel);
        let beliefs = state.beliefs(0);
        for (j, (m, &b)) in message_bits.iter_mut().zip(&beliefs).enumerate() {
            *m = if code.frozen[j] { 0 } else { decide(b) };
        }
        let done = state.iterations >= cfg.max_iter;
        let converged = cfg.early_stop && {
            let mut x = message_bits.clone();
            polar_transform(&mut x);
            x.iter()
                .zip(state.beliefs(code.stages))
                .all(|(&xb, cb)| xb == decide(cb))
        };
        if done || converged {
            let info_bits = code.info_set.iter().map(|&i| message_bits[i]).collect();
            let out = BpOutput {
                info_bits,
                message_bits,
                beliefs,
                iterations: state.iterations,
            };
            return Ok((out, state));
        }
    }
}

/// Information bits recovered from an LLR stream, block by block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDecode {
    pub info_bits: Vec<u8>,
    pub blocks: usize,
    /// Trailing LLRs that did not fill a code block.
    pub discarded_llrs: usize,
}

/// Cuts an LLR stream into `N`-sized blocks and BP-decodes each one.
///
/// This is the hand-off point between any soft detector and the decoder.
pub fn decode_llr_stream<T: Real>(llrs: &[T], code: &PolarCode, cfg: &BpConfig) -> Result<BlockDecode> {
    let n = code.block_length();
    let blocks = llrs.len() / n;
    let mut info_bits = Vec::with_capacity(blocks * code.info_count());
    for block in llrs.chunks_exact(n) {
        info_bits.extend(bp_decode_with(block, code, cfg)?.0.info_bits);
    }
    Ok(BlockDecode {
        info_bits,
        blocks,
        discarded_llrs: llrs.len() - blocks * n,
    })
}

/// Symbols consumed per code block: `N / r`.
pub fn symbols_per_block<T: Real>(code: &PolarCode, c: &Constellation<T>) -> usize {
    code.block_length().div_ceil(c.order_bits())
}

/// Detection, SIC, demapping, block buffering and BP decoding.
#[allow(clippy::too_many_arguments)]
pub fn joint_receive<T: Real>(
    detector: &DlDetector<T>,
    y: &[Complex<T>],
    taps: &IsiTaps<T>,
    c: &Constellation<T>,
    sigma2: f64,
    symbol_energy: f64,
    code: &PolarCode,
    max_iter: usize,
) -> Result<BlockDecode> {
    let det = detector.detect_and_demap(y, taps, c, sigma2, symbol_energy)?;
    let cfg = BpConfig {
        max_iter,
        ..BpConfig::default()
    };
    decode_llr_stream(&det.llrs, code, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_bit_code_picks_better_channel() {
        let code = construct_polar(2, 1, 0.0).unwrap();
        assert_eq!(code.info_set(), &[1]);
        assert_eq!(code.frozen_set(), vec![0]);
    }

    #[test]
    fn construction_rejects_bad_sizes() {
        assert!(construct_polar(6, 3, 0.0).is_err());
        assert!(construct_polar(8, 0, 0.0).is_err());
        assert!(construct_polar(8, 8, 0.0).is_err());
        assert!(PolarCode::from_info_set(8, &[1, 1]).is_err());
        assert!(PolarCode::from_info_set(8, &[9]).is_err());
    }

    #[test]
    fn selection_is_rank_based() {
        let z = bhattacharyya_parameters(64, 1.0).unwrap();
        let logz: Vec<f64> = z.iter().map(|v| v.ln()).collect();
        let cubed: Vec<f64> = z.iter().map(|v| v.powi(3) + 2.0).collect();
        for k in [1, 16, 32, 63] {
            assert_eq!(select_info_set(&z, k), select_info_set(&logz, k));
            assert_eq!(select_info_set(&z, k), select_info_set(&cubed, k));
        }
    }

    #[test]
    fn zero_info_encodes_to_zero() {
        let code = construct_polar(64, 32, 0.0).unwrap();
        assert_eq!(polar_encode(&[0; 32], &code).unwrap(), vec![0; 64]);
        assert!(polar_encode(&[0; 31], &code).is_err());
    }

    #[test]
    fn rate_three_quarter_n4_by_hand() {
        let code = PolarCode::from_info_set(4, &[1, 2, 3]).unwrap();
        // Rows of F^(x)2: u1 -> 1100, u2 -> 1010, u3 -> 1111.
        let rows = [[1, 1, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]];
        for bits in 0..8u8 {
            let info = [bits >> 2 & 1, bits >> 1 & 1, bits & 1];
            let mut want = [0u8; 4];
            for (row, &b) in rows.iter().zip(&info) {
                for (w, &r) in want.iter_mut().zip(row) {
                    *w ^= r * b;
                }
            }
            assert_eq!(polar_encode(&info, &code).unwrap(), want.to_vec());
        }
    }

    #[test]
    fn kernel_constant() {
        assert_eq!(min_sum_g(2.0_f64, -3.0), -1.875);
        assert_eq!(min_sum_g(-2.0_f64, -3.0), 1.875);
        assert_eq!(min_sum_g(0.0_f64, -3.0), 0.0);
    }

    #[test]
    fn box_plus_matches_tanh_rule() {
        for &(x, y) in &[(0.3, -1.2), (2.0, 3.5), (-0.01, -4.0), (7.0, 0.5)] {
            let want = 2.0 * ((x / 2.0_f64).tanh() * (y / 2.0_f64).tanh()).atanh();
            assert!((box_plus(x, y) - want).abs() < 1e-12);
        }
        assert!(box_plus(1e30_f64, -2.0).is_finite());
    }

    #[test]
    fn zero_channel_keeps_leftward_messages_zero() {
        let code = construct_polar(16, 8, 0.0).unwrap();
        let cfg = BpConfig {
            max_iter: 1,
            kernel: BpKernel::ScaledMinSum,
            early_stop: false,
        };
        let (out, state) = bp_decode_with(&[0.0_f64; 16], &code, &cfg).unwrap();
        assert!(state.l.iter().all(|layer| layer.iter().all(|&v| v == 0.0)));
        assert_eq!(out.iterations, 1);
        assert!(out.message_bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn noiseless_loopback_small() {
        let code = construct_polar(64, 32, 1.0).unwrap();
        for seed in 0..20u32 {
            let info: Vec<u8> = (0..32).map(|i| ((i * 31 + seed * 17) % 7 % 2) as u8).collect();
            let cw = polar_encode(&info, &code).unwrap();
            let llrs: Vec<f64> = cw.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
            let out = bp_decode(&llrs, &code, 50).unwrap();
            assert_eq!(out.info_bits, info);
            assert!(out.iterations <= 2, "early stop after {} iterations", out.iterations);
        }
    }

    #[test]
    fn soft_bits_are_probabilities() {
        let code = construct_polar(8, 4, 0.0).unwrap();
        let out = bp_decode(&[1.0, -0.5, 2.0, 0.1, -3.0, 0.7, -0.2, 1.5_f64], &code, 10).unwrap();
        for (&p, &b) in out.soft_bits().iter().zip(&out.beliefs) {
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(p > 0.5, b < 0.0);
        }
    }

    #[test]
    fn stream_decoding_discards_partial_block() {
        let code = construct_polar(8, 4, 0.0).unwrap();
        let llrs = vec![5.0_f64; 8 * 3 + 5];
        let out = decode_llr_stream(&llrs, &code, &BpConfig::default()).unwrap();
        assert_eq!(out.blocks, 3);
        assert_eq!(out.discarded_llrs, 5);
        assert_eq!(out.info_bits, vec![0; 12]);
        assert_eq!(
            symbols_per_block(&construct_polar(1024, 512, 0.0).unwrap(), &Constellation::<f64>::qpsk()),
            512
        );
    }
}
