//! Classical reference detectors: a whitened-model BCJR equalizer and a
//! one-tap MMSE frequency-domain equalizer, plus per-symbol operation counts.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::detector::Window;
use crate::error::{Error, Result};
use crate::modem::{demap_llr, Constellation};
use crate::neural::HIDDEN_WIDTHS;
use crate::numeric::{log_sum_exp, Real};
use crate::waveform::IsiTaps;

/// Largest trellis accepted by default.
pub const DEFAULT_STATE_BUDGET: usize = 4096;

/// FFT length used for spectral factorization.
const FACTOR_FFT_LEN: usize = 4096;

/// Spectrum values below this fraction of `g[0]` count as zeros.
const SPECTRUM_FLOOR: f64 = 1e-9;

/// Default trellis memory for a constellation.
pub fn default_memory<T: Real>(c: &Constellation<T>) -> usize {
    match c.order_bits() {
        1 => 6,
        2 => 4,
        _ => {
            let a = c.axis().size();
            let mut nu = 1;
            while a.pow(nu as u32 + 1) <= DEFAULT_STATE_BUDGET {
                nu += 1;
            }
            nu
        }
    }
}

/// Minimum-phase causal factor `f[0..=nu]` with `f * reverse(f) ~ g`.
///
/// Computed with the real cepstrum of the folded spectrum, then truncated
/// and rescaled so that `sum f^2 = g[0]`.
pub fn whiten_factorize<T: Real>(taps: &IsiTaps<T>, nu: usize) -> Result<Vec<T>> {
    if nu == 0 {
        return Err(Error::Domain("whitening filter needs nu >= 1".into()));
    }
    let n = FACTOR_FFT_LEN.max((2 * taps.taps.len()).next_power_of_two());
    let g0 = taps.taps[taps.center].to_f64_lossless();
    let mut buf = circular_taps(taps, n)?;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(&mut buf);
    let min = buf.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if min <= SPECTRUM_FLOOR * g0 {
        return Err(Error::Factorization(format!(
            "spectrum minimum {min:.3e} is below tolerance"
        )));
    }
    for v in buf.iter_mut() {
        *v = Complex::new(v.re.ln(), 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    // Fold the cepstrum onto its causal part.
    let mut cep = vec![Complex::new(0.0, 0.0); n];
    cep[0] = buf[0] * (0.5 * scale);
    for k in 1..n / 2 {
        cep[k] = buf[k] * scale;
    }
    cep[n / 2] = buf[n / 2] * (0.5 * scale);
    fwd.process(&mut cep);
    for v in cep.iter_mut() {
        *v = v.exp();
    }
    inv.process(&mut cep);
    let mut f: Vec<f64> = cep.iter().take(nu + 1).map(|v| v.re * scale).collect();
    let energy: f64 = f.iter().map(|v| v * v).sum();
    let norm = (g0 / energy).sqrt();
    for v in f.iter_mut() {
        *v *= norm;
    }
    Ok(f.into_iter().map(T::lit).collect())
}

/// `g` laid out circularly on `n` points (index `j mod n` holds `g[j]`).
fn circular_taps<T: Real>(taps: &IsiTaps<T>, n: usize) -> Result<Vec<Complex<f64>>> {
    if taps.taps.len() > n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: taps.taps.len(),
        });
    }
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let k = taps.center as isize;
    for (i, &g) in taps.taps.iter().enumerate() {
        let j = (i as isize - k).rem_euclid(n as isize) as usize;
        buf[j] += Complex::new(g.to_f64_lossless(), 0.0);
    }
    Ok(buf)
}

/// Banded Cholesky factor of the symmetric Toeplitz matrix built from `g`.
///
/// `cols[j][k]` holds `L[j + k, j]` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCholesky {
    cols: Vec<Vec<f64>>,
    band: usize,
}

impl BandedCholesky {
    pub fn factor<T: Real>(taps: &IsiTaps<T>, n: usize) -> Result<Self> {
        let band = taps.center;
        let g: Vec<f64> = (0..=band).map(|j| taps.at(j as isize).to_f64_lossless()).collect();
        let floor = SPECTRUM_FLOOR * g[0];
        let mut cols = vec![vec![0.0; band + 1]; n];
        let at = |cols: &Vec<Vec<f64>>, i: usize, p: usize| -> f64 {
            if i >= p && i - p <= band {
                cols[p][i - p]
            } else {
                0.0
            }
        };
        for j in 0..n {
            let lo = j.saturating_sub(band);
            let mut d = g[0];
            for p in lo..j {
                let v = at(&cols, j, p);
                d -= v * v;
            }
            if d <= floor {
                return Err(Error::Factorization(format!(
                    "Toeplitz matrix is not positive definite at row {j}"
                )));
            }
            let d = d.sqrt();
            cols[j][0] = d;
            for k in 1..=band {
                let i = j + k;
                if i >= n {
                    break;
                }
                let mut s = g[k];
                for p in i.saturating_sub(band)..j {
                    s -= at(&cols, i, p) * at(&cols, j, p);
                }
                cols[j][k] = s / d;
            }
        }
        Ok(Self { cols, band })
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// `L[i, j]`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j && i - j <= self.band {
            self.cols[j][i - j]
        } else {
            0.0
        }
    }

    /// Forward substitution `L z = y`.
    pub fn solve_lower(&self, y: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut z: Vec<Complex<f64>> = Vec::with_capacity(y.len());
        for i in 0..y.len() {
            let mut acc = y[i];
            for p in i.saturating_sub(self.band)..i {
                acc -= z[p] * self.get(i, p);
            }
            z.push(acc / self.cols[i][0]);
        }
        z
    }
}

/// Trellis over one real axis: `|A|^nu` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    pub memory: usize,
    /// Per-axis amplitudes indexed by per-axis label.
    pub alphabet: Vec<f64>,
    pub states: usize,
}

impl Trellis {
    pub fn new(alphabet: Vec<f64>, memory: usize, budget: usize) -> Result<Self> {
        let a = alphabet.len();
        let states = (0..memory).try_fold(1usize, |s, _| s.checked_mul(a));
        match states {
            Some(s) if s <= budget => Ok(Self {
                memory,
                alphabet,
                states: s,
            }),
            _ => Err(Error::StateBudgetExceeded {
                states: states.unwrap_or(usize::MAX),
                budget,
            }),
        }
    }

    /// Label of the symbol `k` steps back (1-based) held in `state`.
    #[inline]
    fn digit(&self, state: usize, k: usize) -> usize {
        (state / self.alphabet.len().pow(k as u32 - 1)) % self.alphabet.len()
    }

    #[inline]
    fn next(&self, state: usize, label: usize) -> usize {
        (state * self.alphabet.len() + label) % self.states
    }

    /// Log-domain forward-backward over `v[m] = sum_k h[m][k] a[m-k] + w`.
    ///
    /// Returns per-position posteriors over the alphabet, rows summing to 1.
    pub fn posteriors(&self, v: &[f64], h: &[Vec<f64>], noise_var: f64) -> Array2<f64> {
        let (n, a, s) = (v.len(), self.alphabet.len(), self.states);
        let inv = 1.0 / (2.0 * noise_var);
        let mut gamma = vec![0.0; s * a];
        let mut alpha = Array2::<f64>::zeros((n + 1, s));
        let mut gammas = Vec::with_capacity(n);
        for m in 0..n {
            let hm = &h[m];
            for st in 0..s {
                let mut isi = 0.0;
                for k in 1..=self.memory.min(hm.len() - 1) {
                    isi += hm[k] * self.alphabet[self.digit(st, k)];
                }
                for (lab, &amp) in self.alphabet.iter().enumerate() {
                    let e = v[m] - hm[0] * amp - isi;
                    gamma[st * a + lab] = -e * e * inv;
                }
            }
            let mut next = vec![f64::NEG_INFINITY; s];
            for st in 0..s {
                let base = alpha[[m, st]];
                for lab in 0..a {
                    let ns = self.next(st, lab);
                    next[ns] = log_sum_exp(next[ns], base + gamma[st * a + lab]);
                }
            }
            let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (st, val) in next.into_iter().enumerate() {
                alpha[[m + 1, st]] = val - top;
            }
            gammas.push(gamma.clone());
        }
        let mut beta = vec![0.0; s];
        let mut post = Array2::<f64>::zeros((n, a));
        for m in (0..n).rev() {
            let g = &gammas[m];
            let mut app = vec![f64::NEG_INFINITY; a];
            let mut prev = vec![f64::NEG_INFINITY; s];
            for st in 0..s {
                for lab in 0..a {
                    let ns = self.next(st, lab);
                    let t = g[st * a + lab] + beta[ns];
                    app[lab] = log_sum_exp(app[lab], alpha[[m, st]] + t);
                    prev[st] = log_sum_exp(prev[st], t);
                }
            }
            let top = app.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = app.iter().map(|&x| (x - top).exp()).sum();
            for lab in 0..a {
                post[[m, lab]] = (app[lab] - top).exp() / total;
            }
            let top = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            beta = prev.into_iter().map(|x| x - top).collect();
        }
        post
    }
}

/// Output of [`map_detect`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput<T> {
    /// Maximum a posteriori symbol decisions (unit-energy scale).
    pub symbols: Vec<Complex<T>>,
    /// Bit LLRs in mapping order.
    pub llrs: Vec<T>,
    /// Per-axis posteriors, `N x |A|` each; the second entry exists for complex constellations.
    pub posteriors: Vec<Array2<f64>>,
}

/// BCJR equalizer on the Forney-whitened model with memory `nu`.
pub fn map_detect<T: Real>(
    y: &[Complex<T>],
    taps: &IsiTaps<T>,
    c: &Constellation<T>,
    sigma2: f64,
    symbol_energy: f64,
    nu: usize,
) -> Result<MapOutput<T>> {
    map_detect_with_budget(y, taps, c, sigma2, symbol_energy, nu, DEFAULT_STATE_BUDGET)
}

pub fn map_detect_with_budget<T: Real>(
    y: &[Complex<T>],
    taps: &IsiTaps<T>,
    c: &Constellation<T>,
    sigma2: f64,
    symbol_energy: f64,
    nu: usize,
    budget: usize,
) -> Result<MapOutput<T>> {
    if !(sigma2 > 0.0) || !(symbol_energy > 0.0) {
        return Err(Error::Domain("sigma2 and symbol energy must be positive".into()));
    }
    let alphabet: Vec<f64> = c.axis().levels.iter().map(|l| l.to_f64_lossless()).collect();
    let trellis = Trellis::new(alphabet, nu, budget)?;
    let n = y.len();
    if n == 0 {
        return Ok(MapOutput {
            symbols: Vec::new(),
            llrs: Vec::new(),
            posteriors: Vec::new(),
        });
    }
    let chol = BandedCholesky::factor(taps, n)?;
    let yd: Vec<Complex<f64>> = y
        .iter()
        .map(|v| Complex::new(v.re.to_f64_lossless(), v.im.to_f64_lossless()))
        .collect();
    let z = chol.solve_lower(&yd);
    // z[i] = sqrt(Es) sum_k L[i+k, i] x[i+k] + w; run in reversed time.
    let amp = symbol_energy.sqrt();
    let h: Vec<Vec<f64>> = (0..n)
        .map(|m| {
            let i = n - 1 - m;
            (0..=nu).map(|k| amp * chol.get(i + k, i)).collect()
        })
        .collect();
    let axes = if c.is_complex() { 2 } else { 1 };
    let mut posteriors = Vec::with_capacity(axes);
    for axis in 0..axes {
        let v: Vec<f64> = z.iter().rev().map(|s| if axis == 0 { s.re } else { s.im }).collect();
        let p = trellis.posteriors(&v, &h, sigma2 / 2.0);
        let mut fwd = Array2::zeros(p.raw_dim());
        for m in 0..n {
            fwd.row_mut(n - 1 - m).assign(&p.row(m));
        }
        posteriors.push(fwd);
    }
    let axis_bits = c.axis().bits;
    let mut llrs = Vec::with_capacity(n * c.order_bits());
    let mut symbols = Vec::with_capacity(n);
    for i in 0..n {
        let mut point = [0.0; 2];
        for (ax, p) in posteriors.iter().enumerate() {
            let row = p.row(i);
            let best = (0..row.len()).fold(0, |b, l| if row[l] > row[b] { l } else { b });
            point[ax] = trellis.alphabet[best];
            for bit in 0..axis_bits {
                let shift = axis_bits - 1 - bit;
                let (mut zero, mut one) = (0.0, 0.0);
                for (lab, &pr) in row.iter().enumerate() {
                    if (lab >> shift) & 1 == 0 {
                        zero += pr;
                    } else {
                        one += pr;
                    }
                }
                let llr = (zero.max(f64::MIN_POSITIVE)).ln() - (one.max(f64::MIN_POSITIVE)).ln();
                llrs.push(T::lit(llr));
            }
        }
        symbols.push(Complex::new(T::lit(point[0]), T::lit(point[1])));
    }
    Ok(MapOutput {
        symbols,
        llrs,
        posteriors,
    })
}

/// One-tap MMSE equalizer over a cyclic block, `W = G* / (|G|^2 + sigma2 / E_s)`.
///
/// The output keeps the `sqrt(E_s)` scale of the input.
pub fn mmse_fde<T: Real>(
    y_block: &[Complex<T>],
    taps: &IsiTaps<T>,
    sigma2: f64,
    symbol_energy: f64,
) -> Result<Vec<Complex<T>>> {
    let n = y_block.len();
    let weights = fde_weights(taps, n, sigma2, symbol_energy)?.weights;
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = y_block
        .iter()
        .map(|v| Complex::new(v.re.to_f64_lossless(), v.im.to_f64_lossless()))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (b, w) in buf.iter_mut().zip(&weights) {
        *b *= w;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf
        .into_iter()
        .map(|v| Complex::new(T::lit(v.re * scale), T::lit(v.im * scale)))
        .collect())
}

/// Per-bin equalizer weights with the resulting bias and distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct FdeWeights {
    pub weights: Vec<Complex<f64>>,
    /// Mean of `W G`: the equalized symbol is `bias * sqrt(E_s) x + e`.
    pub bias: f64,
    /// Total variance of `e` (residual ISI plus colored noise).
    pub distortion: f64,
}

pub fn fde_weights<T: Real>(taps: &IsiTaps<T>, n: usize, sigma2: f64, symbol_energy: f64) -> Result<FdeWeights> {
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    if !(sigma2 >= 0.0) || !(symbol_energy > 0.0) {
        return Err(Error::Domain(
            "sigma2 must be non-negative and symbol energy positive".into(),
        ));
    }
    let mut g = circular_taps(taps, n)?;
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut g);
    let rho = sigma2 / symbol_energy;
    let weights: Vec<Complex<f64>> = g
        .iter()
        .map(|&gk| {
            let den = gk.norm_sqr() + rho;
            if den == 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                gk.conj() / den
            }
        })
        .collect();
    let nf = n as f64;
    let bias = weights.iter().zip(&g).map(|(w, gk)| (w * gk).re).sum::<f64>() / nf;
    let isi = weights
        .iter()
        .zip(&g)
        .map(|(w, gk)| (w * gk - bias).norm_sqr())
        .sum::<f64>()
        / nf;
    // The noise after matched filtering has the same spectrum as the taps.
    let noise = weights
        .iter()
        .zip(&g)
        .map(|(w, gk)| w.norm_sqr() * gk.re.max(0.0))
        .sum::<f64>()
        / nf;
    Ok(FdeWeights {
        weights,
        bias,
        distortion: symbol_energy * isi + sigma2 * noise,
    })
}

/// Equalizes one cyclic block and converts the result into bit LLRs by
/// treating the residual distortion as Gaussian.
pub fn fde_demap<T: Real>(
    y_block: &[Complex<T>],
    taps: &IsiTaps<T>,
    c: &Constellation<T>,
    sigma2: f64,
    symbol_energy: f64,
) -> Result<Vec<T>> {
    let stats = fde_weights(taps, y_block.len(), sigma2, symbol_energy)?;
    if !(stats.bias > 0.0) {
        return Err(Error::Domain("equalizer has no signal gain".into()));
    }
    let eq = mmse_fde(y_block, taps, sigma2, symbol_energy)?;
    let unbias = T::lit(1.0 / stats.bias);
    let scaled: Vec<Complex<T>> = eq.into_iter().map(|v| v * unbias).collect();
    let var = (stats.distortion / (stats.bias * stats.bias)).max(1e-300);
    Ok(demap_llr(&scaled, c, T::lit(var / 2.0), T::lit(symbol_energy)))
}

/// Detection schemes with an operation count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fde,
    Dl,
    Map,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Fde, Scheme::Dl, Scheme::Map];

    /// Published reference counts `(additions, multiplications)`.
    pub fn published_counts(self) -> (u64, u64) {
        match self {
            Scheme::Fde => (8194, 8196),
            Scheme::Dl => (9720, 9720),
            Scheme::Map => (12770, 3980),
        }
    }

    pub fn parallelizable(self) -> bool {
        !matches!(self, Scheme::Map)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Fde => "FDE",
            Scheme::Dl => "DL",
            Scheme::Map => "MAP",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FDE" => Ok(Scheme::Fde),
            "DL" => Ok(Scheme::Dl),
            "MAP" => Ok(Scheme::Map),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

/// Parameters the operation counts depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityParams {
    pub window: Window,
    pub hidden: Vec<usize>,
    pub fft_len: usize,
    /// Per-axis alphabet size and trellis memory.
    pub alphabet: usize,
    pub memory: usize,
}

impl Default for ComplexityParams {
    fn default() -> Self {
        Self {
            window: Window::default(),
            hidden: HIDDEN_WIDTHS.to_vec(),
            fft_len: 1024,
            alphabet: 2,
            memory: 4,
        }
    }
}

/// Real operations per detected symbol (per axis for DL and MAP).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub scheme: Scheme,
    pub additions: u64,
    pub multiplications: u64,
    pub parallelizable: bool,
    pub published_additions: u64,
    pub published_multiplications: u64,
}

pub fn complexity_report(scheme: Scheme, params: &ComplexityParams) -> Result<ComplexityReport> {
    let (additions, multiplications) = match scheme {
        Scheme::Dl => {
            let mut widths = vec![params.window.len];
            widths.extend(&params.hidden);
            widths.push(params.window.step);
            let macs: usize = widths.windows(2).map(|w| w[0] * w[1]).sum();
            let per = (macs / params.window.step) as u64;
            (per, per)
        }
        Scheme::Fde => {
            if !params.fft_len.is_power_of_two() {
                return Err(Error::NotPowerOfTwo(params.fft_len));
            }
            // Radix-2 FFT and IFFT plus one complex weight per bin, spread over
            // the block. Complex multiply = 4 real mul + 2 add.
            let lg = params.fft_len.trailing_zeros() as u64;
            let cmul = lg + 1;
            let cadd = 2 * lg;
            (2 * cmul + 2 * cadd, 4 * cmul)
        }
        Scheme::Map => {
            let states = (0..params.memory)
                .try_fold(1u64, |s, _| s.checked_mul(params.alphabet as u64))
                .ok_or(Error::StateBudgetExceeded {
                    states: usize::MAX,
                    budget: DEFAULT_STATE_BUDGET,
                })?;
            let branches = states * params.alphabet as u64;
            let nu = params.memory as u64;
            // Branch metric: nu + 1 tap products, one square; forward, backward
            // and posterior passes each add one metric per branch.
            (branches * (nu + 1 + 3), branches * (nu + 2))
        }
    };
    let (pa, pm) = scheme.published_counts();
    Ok(ComplexityReport {
        scheme,
        additions,
        multiplications,
        parallelizable: scheme.parallelizable(),
        published_additions: pa,
        published_multiplications: pm,
    })
}
