//! Monte-Carlo BER campaigns.
//!
//! Each SNR point streams independent bursts through the selected receiver
//! chain until the stop rule fires. A burst is `guard` random symbols, the
//! counted data symbols, then `guard` more random symbols, so filter and
//! window transients never enter the counts. Bursts draw their bits and
//! noise from streams keyed by `(seed, point, burst)`.

use std::sync::Arc;
use std::time::Instant;

use ftn_core::baselines::{default_memory, fde_demap, map_detect};
use ftn_core::channel::{ebn0_to_sigma2, FtnLink};
use ftn_core::coding::{construct_polar, decode_llr_stream, polar_encode, BpConfig, PolarCode};
use ftn_core::detector::{sic_reconstruct, Axes, DlDetector};
use ftn_core::modem::{demap_llr, hard_bits, llr_to_bit, map_bits};
use ftn_core::waveform::{build_isi_taps, FtnConfig};
use ftn_core::{Complex, Constellation64, IsiTaps64};
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::scenario::Scenario;
use crate::streams::{stream, Purpose};
use crate::training::random_symbols;
use crate::{HarnessError, Result};

/// z value of a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl StopRule {
    pub fn done(&self, errors: u64, bits: u64) -> bool {
        errors >= self.min_errors || bits >= self.max_bits
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub scenario: Scenario,
    pub config: RunConfig,
    pub detector: Option<Arc<DlDetector<f32>>>,
}

impl Campaign {
    pub fn new(config: RunConfig, scenario: Scenario) -> Self {
        Self {
            scenario,
            config,
            detector: None,
        }
    }

    pub fn with_detector(mut self, detector: Arc<DlDetector<f32>>) -> Self {
        self.detector = Some(detector);
        self
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            min_errors: self.config.min_errors,
            max_bits: self.config.max_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub eb_n0_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    /// Half-width of the 95% normal-approximation binomial interval.
    pub ci_half_width: f64,
    /// The bit cap ended the point before `min_errors` was reached.
    pub cap_hit: bool,
    pub bursts: u64,
    /// LLRs left over after the last full code block (always 0 with whole-codeword bursts).
    pub discarded_llrs: u64,
}

impl BerPoint {
    pub fn from_counts(eb_n0_db: f64, bits: u64, errors: u64, rule: StopRule) -> Self {
        let ber = if bits == 0 { 0.0 } else { errors as f64 / bits as f64 };
        Self {
            eb_n0_db,
            bits,
            errors,
            ber,
            ci_half_width: binomial_half_width(ber, bits),
            cap_hit: errors < rule.min_errors,
            bursts: 0,
            discarded_llrs: 0,
        }
    }

    /// No errors observed: the BER is only bounded from above.
    pub fn is_lower_bound(&self) -> bool {
        self.errors == 0
    }
}

pub fn binomial_half_width(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub scenario: Scenario,
    pub tau: f64,
    pub beta: f64,
    pub order_bits: usize,
    /// Digest of the configuration and scenario.
    pub run_id: String,
    pub wall_time_s: f64,
    /// Fraction of transmitted symbols spent on cyclic prefixes (FDE only).
    pub cp_overhead: Option<f64>,
    pub points: Vec<BerPoint>,
}

impl BerReport {
    /// Smallest Eb/N0 reaching `target` by log-linear interpolation between
    /// measured points; `None` if the curve never gets there.
    pub fn required_eb_n0(&self, target: f64) -> Option<f64> {
        crossing(&self.points, target)
    }
}

pub fn crossing(points: &[BerPoint], target: f64) -> Option<f64> {
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.ber >= target && b.ber <= target {
            if b.ber <= 0.0 || a.ber == b.ber {
                return Some(b.eb_n0_db);
            }
            let (la, lb, lt) = (a.ber.ln(), b.ber.ln(), target.ln());
            return Some(a.eb_n0_db + (la - lt) / (la - lb) * (b.eb_n0_db - a.eb_n0_db));
        }
    }
    match points.first() {
        Some(p) if p.ber <= target => Some(p.eb_n0_db),
        _ => None,
    }
}

pub fn run_id(cfg: &RunConfig, scenario: Scenario) -> String {
    let digest = Sha256::digest(format!("{scenario}|{cfg:?}").as_bytes());
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every SNR point of the campaign.
pub fn run_campaign(c: &Campaign) -> Result<BerReport> {
    let start = Instant::now();
    let chain = Chain::new(c)?;
    let rule = c.stop_rule();
    let points = c
        .config
        .snr_list
        .par_iter()
        .enumerate()
        .map(|(i, &db)| chain.run_point(i, db, rule))
        .collect::<Result<Vec<_>>>()?;
    let cp_overhead = c.scenario.is_fde().then(|| {
        let cp = 2 * c.config.isi_half_len;
        cp as f64 / (cp + c.config.fde_block) as f64
    });
    Ok(BerReport {
        scenario: c.scenario,
        tau: chain.link.cfg.tau,
        beta: c.config.ftn.beta,
        order_bits: c.config.order_bits,
        run_id: run_id(&c.config, c.scenario),
        wall_time_s: start.elapsed().as_secs_f64(),
        cp_overhead,
        points,
    })
}

/// A configured receiver chain.
struct Chain<'a> {
    scenario: Scenario,
    cfg: &'a RunConfig,
    c: Constellation64,
    link: FtnLink<f64>,
    taps: IsiTaps64,
    code: Option<PolarCode>,
    detector: Option<&'a DlDetector<f32>>,
    guard: usize,
    memory: usize,
}

impl<'a> Chain<'a> {
    fn new(campaign: &'a Campaign) -> Result<Self> {
        let cfg = &campaign.config;
        let scenario = campaign.scenario;
        cfg.validate()?;
        let ftn = if scenario.is_nyquist() {
            FtnConfig { tau: 1.0, ..cfg.ftn }
        } else {
            cfg.ftn
        };
        let detector = if scenario.needs_detector() {
            let det = campaign
                .detector
                .as_deref()
                .ok_or(HarnessError::MissingWeights(scenario))?;
            Some(det)
        } else {
            None
        };
        let c = cfg.constellation();
        let code = if scenario.is_coded() {
            Some(construct_polar(cfg.polar_n, cfg.polar_k, cfg.polar_design_snr_db)?)
        } else {
            None
        };
        let memory = cfg.map_memory.unwrap_or_else(|| default_memory(&c));
        let guard = cfg.ftn.span_symbols.max(cfg.isi_half_len).max(cfg.window.margin());
        Ok(Self {
            scenario,
            cfg,
            link: FtnLink::new(ftn, cfg.isi_half_len, cfg.channel_model)?,
            taps: build_isi_taps(&ftn, cfg.isi_half_len)?,
            c,
            code,
            detector,
            guard,
            memory,
        })
    }

    fn code_rate(&self) -> f64 {
        self.code.as_ref().map_or(1.0, |c| c.rate())
    }

    fn run_point(&self, index: usize, eb_n0_db: f64, rule: StopRule) -> Result<BerPoint> {
        let sigma2 = ebn0_to_sigma2(
            eb_n0_db,
            self.c.order_bits(),
            self.code_rate(),
            self.cfg.ftn.symbol_energy,
        )?;
        let (mut bits, mut errors, mut discarded, mut burst) = (0u64, 0u64, 0u64, 0u64);
        while !rule.done(errors, bits) {
            let out = self.run_burst(index, burst, sigma2)?;
            bits += out.bits;
            errors += out.errors;
            discarded += out.discarded;
            burst += 1;
        }
        if discarded > 0 {
            log::warn!("{}: {discarded} trailing LLRs did not fill a code block", self.scenario);
        }
        log::debug!(
            "{} @ {eb_n0_db} dB: {errors} errors in {bits} bits, {burst} bursts",
            self.scenario
        );
        let mut p = BerPoint::from_counts(eb_n0_db, bits, errors, rule);
        p.bursts = burst;
        p.discarded_llrs = discarded;
        Ok(p)
    }

    fn run_burst(&self, point: usize, burst: u64, sigma2: f64) -> Result<BurstCount> {
        let r = self.c.order_bits();
        let mut rng = stream(self.cfg.seed, Purpose::TestBits, point, burst);
        let (info, coded) = match &self.code {
            Some(code) => {
                let mut info = Vec::with_capacity(self.cfg.codewords_per_block * code.info_count());
                let mut coded = Vec::with_capacity(self.cfg.codewords_per_block * code.block_length());
                for _ in 0..self.cfg.codewords_per_block {
                    let u: Vec<u8> = (0..code.info_count()).map(|_| rng.random::<bool>() as u8).collect();
                    coded.extend(polar_encode(&u, code)?);
                    info.extend(u);
                }
                (info, coded)
            }
            None => {
                let bits: Vec<u8> = (0..self.cfg.block_symbols * r)
                    .map(|_| rng.random::<bool>() as u8)
                    .collect();
                (bits.clone(), bits)
            }
        };
        let data = map_bits(&coded, &self.c)?;
        let (tx, layout) = self.frame(&data, &mut rng);
        let y = self.link.transmit(
            &tx,
            sigma2,
            &mut stream(self.cfg.seed, Purpose::TestNoise, point, burst),
        );
        let decisions = match &self.code {
            None => self.hard_output(&y, &layout, data.len(), sigma2)?,
            Some(code) => {
                let llrs = self.soft_output(&y, &layout, data.len(), sigma2)?;
                let cfg = BpConfig {
                    max_iter: self.cfg.bp_iterations,
                    kernel: self.cfg.bp_kernel.unwrap_or_else(|| self.scenario.bp_kernel()),
                    early_stop: true,
                };
                let dec = decode_llr_stream(&llrs, code, &cfg)?;
                let errors = count_errors(&dec.info_bits, &info);
                if errors > 0 {
                    log::debug!("point {point} burst {burst}: {errors} decoded bit errors");
                }
                return Ok(BurstCount {
                    bits: info.len() as u64,
                    errors,
                    discarded: dec.discarded_llrs as u64,
                });
            }
        };
        Ok(BurstCount {
            bits: info.len() as u64,
            errors: count_errors(&decisions, &info),
            discarded: 0,
        })
    }

    /// Builds the transmitted burst around `data`.
    fn frame(&self, data: &[Complex<f64>], rng: &mut impl Rng) -> (Vec<Complex<f64>>, Layout) {
        let g = self.guard;
        let mut tx = random_symbols(&self.c, g, rng);
        let layout = if self.scenario.is_fde() {
            let nf = self.cfg.fde_block;
            let cp = 2 * self.cfg.isi_half_len;
            let frames = data.len().div_ceil(nf);
            let mut padded = data.to_vec();
            padded.extend(random_symbols(&self.c, frames * nf - data.len(), rng));
            for f in padded.chunks_exact(nf) {
                tx.extend_from_slice(&f[nf - cp..]);
                tx.extend_from_slice(f);
            }
            Layout::Frames { start: g, frames }
        } else {
            tx.extend_from_slice(data);
            Layout::Contiguous { start: g }
        };
        tx.extend(random_symbols(&self.c, g, rng));
        (tx, layout)
    }

    fn detect(&self, y: &[Complex<f64>]) -> Result<Vec<Complex<f64>>> {
        let det = self.detector.ok_or(HarnessError::MissingWeights(self.scenario))?;
        let y32: Vec<Complex<f32>> = y.iter().map(|v| Complex::new(v.re as f32, v.im as f32)).collect();
        let s2 = det.detect(&y32, Axes::of(&self.c))?;
        Ok(s2.into_iter().map(|v| Complex::new(v.re as f64, v.im as f64)).collect())
    }

    fn hard_output(&self, y: &[Complex<f64>], layout: &Layout, n: usize, sigma2: f64) -> Result<Vec<u8>> {
        if self.scenario == Scenario::UncodedDl {
            let start = layout.start();
            let s2 = self.detect(y)?;
            return Ok(hard_bits(&s2[start..start + n], &self.c));
        }
        Ok(self
            .soft_output(y, layout, n, sigma2)?
            .into_iter()
            .map(llr_to_bit)
            .collect())
    }

    /// Bit LLRs of the `n` data symbols.
    fn soft_output(&self, y: &[Complex<f64>], layout: &Layout, n: usize, sigma2: f64) -> Result<Vec<f64>> {
        let r = self.c.order_bits();
        let es = self.cfg.ftn.symbol_energy;
        let start = layout.start();
        let per_axis = sigma2 / 2.0;
        let llrs = match self.scenario {
            Scenario::NyquistReference | Scenario::CodedNyquistPolar => {
                demap_llr(&y[start..start + n], &self.c, per_axis, es)
            }
            Scenario::UncodedDl | Scenario::CodedDlSic | Scenario::CodedJointPolar => {
                let s2 = self.detect(y)?;
                let y_tilde = sic_reconstruct(y, &s2, &self.taps, &self.c, es)?;
                demap_llr(&y_tilde[start..start + n], &self.c, per_axis, es)
            }
            Scenario::UncodedMap | Scenario::CodedMapPolar => {
                let out = map_detect(y, &self.taps, &self.c, sigma2, es, self.memory)?;
                out.llrs[start * r..(start + n) * r].to_vec()
            }
            Scenario::UncodedFde | Scenario::CodedFdePolar => {
                let Layout::Frames { start, frames } = *layout else {
                    unreachable!("FDE bursts are framed")
                };
                let nf = self.cfg.fde_block;
                let k = self.cfg.isi_half_len;
                let cp = 2 * k;
                let mut out = Vec::with_capacity(frames * nf * r);
                for f in 0..frames {
                    // The window opens K symbols into the prefix; window
                    // position j then carries data symbol (j - K) mod N_f.
                    let w0 = start + f * (nf + cp) + k;
                    let eq = fde_demap(&y[w0..w0 + nf], &self.taps, &self.c, sigma2, es)?;
                    for sym in 0..nf {
                        let j = (sym + k) % nf;
                        out.extend_from_slice(&eq[j * r..(j + 1) * r]);
                    }
                }
                out.truncate(n * r);
                out
            }
        };
        Ok(llrs)
    }
}

enum Layout {
    Contiguous { start: usize },
    Frames { start: usize, frames: usize },
}

impl Layout {
    fn start(&self) -> usize {
        match *self {
            Layout::Contiguous { start } | Layout::Frames { start, .. } => start,
        }
    }
}

struct BurstCount {
    bits: u64,
    errors: u64,
    discarded: u64,
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(db: f64, ber: f64) -> BerPoint {
        BerPoint {
            eb_n0_db: db,
            bits: 1000,
            errors: (ber * 1000.0) as u64,
            ber,
            ci_half_width: 0.0,
            cap_hit: false,
            bursts: 1,
            discarded_llrs: 0,
        }
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let pts = [pt(4.0, 1e-2), pt(6.0, 1e-4)];
        assert!((crossing(&pts, 1e-3).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(crossing(&pts, 1e-6), None);
        assert_eq!(crossing(&pts, 0.5), Some(4.0));
    }

    #[test]
    fn interval_and_stop_rule() {
        let rule = StopRule {
            min_errors: 200,
            max_bits: 1000,
        };
        let p = BerPoint::from_counts(5.0, 1000, 10, rule);
        assert!(p.cap_hit);
        assert!((p.ci_half_width - Z95 * (0.01f64 * 0.99 / 1000.0).sqrt()).abs() < 1e-15);
        assert!(BerPoint::from_counts(5.0, 1000, 0, rule).is_lower_bound());
        assert!(rule.done(200, 10) && rule.done(0, 1000) && !rule.done(199, 999));
    }

    #[test]
    fn dl_scenarios_need_weights() {
        let c = Campaign::new(RunConfig::default(), Scenario::UncodedDl);
        assert!(matches!(run_campaign(&c), Err(HarnessError::MissingWeights(_))));
    }
}
