//! Sliding-window neural detection and successive interference cancellation.
//!
//! A window of `L` received values on one axis is mapped to estimates of its
//! middle `m` symbols; the window then advances by `m`. Edges are
//! zero-padded.

use ndarray::Array2;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::modem::{demap_llr, hard_decision, Constellation};
use crate::neural::Mlp;
use crate::numeric::Real;
use crate::waveform::IsiTaps;

/// Sliding-window geometry: `len` inputs, `step` outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub len: usize,
    pub step: usize,
}

impl Default for Window {
    fn default() -> Self {
        Self { len: 32, step: 8 }
    }
}

impl Window {
    pub fn new(len: usize, step: usize) -> Result<Self> {
        if step == 0 || len <= step {
            return Err(crate::error::invalid(
                "window",
                format!("need L > m >= 1, got L={len}, m={step}"),
            ));
        }
        if !(len - step).is_multiple_of(2) {
            return Err(crate::error::invalid(
                "window",
                format!("L - m = {} must be even", len - step),
            ));
        }
        Ok(Self { len, step })
    }

    /// Symbols on each side of the estimated block.
    pub fn margin(&self) -> usize {
        (self.len - self.step) / 2
    }

    /// Windows needed to cover `n` symbols.
    pub fn count(&self, n: usize) -> usize {
        n.div_ceil(self.step)
    }

    /// Copies window `k` of `values` into `row`, zero-padding outside.
    fn fill(&self, values: &[f64], k: usize, row: &mut [f64]) {
        let start = (k * self.step) as isize - self.margin() as isize;
        for (j, r) in row.iter_mut().enumerate() {
            let idx = start + j as isize;
            *r = if idx >= 0 && (idx as usize) < values.len() {
                values[idx as usize]
            } else {
                0.0
            };
        }
    }
}

/// Which real axes carry data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    Real,
    Both,
}

impl Axes {
    pub fn of<T: Real>(c: &Constellation<T>) -> Self {
        if c.is_complex() {
            Axes::Both
        } else {
            Axes::Real
        }
    }
}

/// Training pairs: rows of `L` received values and the `m` transmitted
/// values at their center. Real and imaginary rows alternate per window.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindowDataset<T> {
    pub inputs: Array2<T>,
    pub labels: Array2<T>,
    pub window: Window,
}

impl<T: Real> SlidingWindowDataset<T> {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Stacks the rows of another dataset with the same window.
    pub fn append(&mut self, other: &Self) -> Result<()> {
        if other.window != self.window {
            return Err(Error::ShapeMismatch("datasets use different windows".into()));
        }
        self.inputs
            .append(ndarray::Axis(0), other.inputs.view())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        self.labels
            .append(ndarray::Axis(0), other.labels.view())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(())
    }
}

fn split_axes<T: Real>(v: &[Complex<T>]) -> (Vec<f64>, Vec<f64>) {
    v.iter()
        .map(|c| (c.re.to_f64_lossless(), c.im.to_f64_lossless()))
        .unzip()
}

/// Slices `(x, y)` into sliding-window training pairs.
///
/// Only windows whose `m` labels lie inside the burst are emitted.
pub fn make_dataset<T: Real>(
    x: &[Complex<T>],
    y: &[Complex<T>],
    window: Window,
    axes: Axes,
) -> Result<SlidingWindowDataset<T>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if y.len() < window.len {
        return Err(Error::LengthMismatch {
            expected: window.len,
            actual: y.len(),
        });
    }
    let windows = y.len() / window.step;
    let per = if axes == Axes::Both { 2 } else { 1 };
    let (xr, xi) = split_axes(x);
    let (yr, yi) = split_axes(y);
    let mut inputs = Array2::zeros((windows * per, window.len));
    let mut labels = Array2::zeros((windows * per, window.step));
    let mut row = vec![0.0; window.len];
    for k in 0..windows {
        let axis_pairs: [(&[f64], &[f64]); 2] = [(&yr, &xr), (&yi, &xi)];
        for (a, (yv, xv)) in axis_pairs.iter().take(per).enumerate() {
            let r = k * per + a;
            window.fill(yv, k, &mut row);
            for (dst, &v) in inputs.row_mut(r).iter_mut().zip(&row) {
                *dst = T::lit(v);
            }
            for (j, dst) in labels.row_mut(r).iter_mut().enumerate() {
                *dst = T::lit(xv[k * window.step + j]);
            }
        }
    }
    Ok(SlidingWindowDataset { inputs, labels, window })
}

/// Detector networks: one net (BPSK, or shared across both axes) or one per axis.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorNets<T> {
    Single(Mlp<T>),
    Split { real: Mlp<T>, imag: Mlp<T> },
}

impl<T: Real> DetectorNets<T> {
    fn for_axis(&self, imag: bool) -> &Mlp<T> {
        match self {
            DetectorNets::Single(net) => net,
            DetectorNets::Split { real, imag: im } => {
                if imag {
                    im
                } else {
                    real
                }
            }
        }
    }
}

/// Trained sliding-window detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DlDetector<T> {
    pub nets: DetectorNets<T>,
    pub window: Window,
}

const INFER_CHUNK: usize = 8192;

impl<T: Real> DlDetector<T> {
    pub fn new(nets: DetectorNets<T>, window: Window) -> Result<Self> {
        let check = |net: &Mlp<T>| {
            if net.input_len() != window.len || net.output_len() != window.step {
                Err(Error::ShapeMismatch(format!(
                    "network is {} -> {}, window is L={} m={}",
                    net.input_len(),
                    net.output_len(),
                    window.len,
                    window.step
                )))
            } else {
                Ok(())
            }
        };
        match &nets {
            DetectorNets::Single(n) => check(n)?,
            DetectorNets::Split { real, imag } => {
                check(real)?;
                check(imag)?;
            }
        }
        Ok(Self { nets, window })
    }

    /// Soft symbol estimates `s2`, one per received sample.
    pub fn detect(&self, y: &[Complex<T>], axes: Axes) -> Result<Vec<Complex<T>>> {
        let n = y.len();
        let mut out = vec![Complex::new(T::zero(), T::zero()); n];
        if n == 0 {
            return Ok(out);
        }
        let (yr, yi) = split_axes(y);
        let windows = self.window.count(n);
        let step = self.window.step;
        let mut row = vec![0.0; self.window.len];
        let axis_list: &[bool] = if axes == Axes::Both { &[false, true] } else { &[false] };
        for &imag in axis_list {
            let values = if imag { &yi } else { &yr };
            let net = self.nets.for_axis(imag);
            for start in (0..windows).step_by(INFER_CHUNK) {
                let end = (start + INFER_CHUNK).min(windows);
                let mut batch = Array2::zeros((end - start, self.window.len));
                for k in start..end {
                    self.window.fill(values, k, &mut row);
                    for (dst, &v) in batch.row_mut(k - start).iter_mut().zip(&row) {
                        *dst = T::lit(v);
                    }
                }
                let est = net.forward_batch(batch.view())?;
                for k in start..end {
                    for j in 0..step {
                        let idx = k * step + j;
                        if idx >= n {
                            break;
                        }
                        let v = est[[k - start, j]];
                        if imag {
                            out[idx].im = v;
                        } else {
                            out[idx].re = v;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Detection, SIC reconstruction and demapping in one pass.
    pub fn detect_and_demap(
        &self,
        y: &[Complex<T>],
        taps: &IsiTaps<T>,
        c: &Constellation<T>,
        sigma2: f64,
        symbol_energy: f64,
    ) -> Result<DetectionResult<T>> {
        let s2 = self.detect(y, Axes::of(c))?;
        let y_tilde = sic_reconstruct(y, &s2, taps, c, symbol_energy)?;
        let llrs = demap_llr(&y_tilde, c, T::lit(sigma2 / 2.0), T::lit(symbol_energy));
        Ok(DetectionResult {
            s1: y.to_vec(),
            s2,
            y_tilde,
            llrs,
        })
    }
}

/// Received symbols, soft detections, SIC output and bit LLRs.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult<T> {
    pub s1: Vec<Complex<T>>,
    pub s2: Vec<Complex<T>>,
    pub y_tilde: Vec<Complex<T>>,
    pub llrs: Vec<T>,
}

/// Removes the interference re-synthesized from hard decisions on `s2`:
/// `y~ = s1 - (sqrt(E_s) D(s2) * g - sqrt(E_s) D(s2))`.
pub fn sic_reconstruct<T: Real>(
    s1: &[Complex<T>],
    s2: &[Complex<T>],
    taps: &IsiTaps<T>,
    c: &Constellation<T>,
    symbol_energy: f64,
) -> Result<Vec<Complex<T>>> {
    if s1.len() != s2.len() {
        return Err(Error::LengthMismatch {
            expected: s1.len(),
            actual: s2.len(),
        });
    }
    let amp = T::lit(symbol_energy.sqrt());
    let decided: Vec<Complex<T>> = hard_decision(s2, c).into_iter().map(|d| d * amp).collect();
    let resynth = taps.convolve_same(&decided);
    Ok(s1
        .iter()
        .zip(resynth.iter().zip(&decided))
        .map(|(&y, (&r, &d))| y - (r - d))
        .collect())
}
