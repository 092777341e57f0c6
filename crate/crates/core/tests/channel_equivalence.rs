//! Waveform-level versus symbol-rate channel models, and the noise colour
//! after matched filtering.

use ftn_core::channel::{rng_stream, ChannelModel, FtnLink};
use ftn_core::modem::{map_bits, Constellation};
use ftn_core::waveform::FtnConfig;
use ftn_core::Complex;

fn link(tau: f64, span: usize, k: usize, model: ChannelModel) -> FtnLink<f64> {
    link_beta(tau, 0.5, span, k, model)
}

fn link_beta(tau: f64, beta: f64, span: usize, k: usize, model: ChannelModel) -> FtnLink<f64> {
    let cfg = FtnConfig::new(tau, beta, span, 8, 1.0).unwrap();
    FtnLink::new(cfg, k, model).unwrap()
}

fn bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = rng_stream(seed, 9);
    (0..n).map(|_| rand::Rng::random::<bool>(&mut rng) as u8).collect()
}

#[test]
fn noiseless_models_agree_with_long_span() {
    for &beta in &[0.3, 0.5] {
        for &(tau, span, k) in &[(0.8, 256, 160), (0.7, 256, 180), (0.6, 256, 210), (1.0, 256, 200)] {
            let c = Constellation::<f64>::qpsk();
            let x = map_bits(&bits(2 * 600, 1), &c).unwrap();
            let wave = link_beta(tau, beta, span, k, ChannelModel::Waveform);
            let sym = link_beta(tau, beta, span, k, ChannelModel::SymbolRate);
            let a = wave.transmit(&x, 0.0, &mut rng_stream(0, 0));
            let b = sym.transmit(&x, 0.0, &mut rng_stream(0, 0));
            let worst = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(worst < 1e-4, "tau {tau}, beta {beta}: worst sample gap {worst:.2e}");
        }
    }
}

#[test]
fn default_span_gap_is_small_but_visible() {
    let c = Constellation::<f64>::qpsk();
    let x = map_bits(&bits(2 * 400, 2), &c).unwrap();
    let a = link(0.8, 16, 16, ChannelModel::Waveform).transmit(&x, 0.0, &mut rng_stream(0, 0));
    let b = link(0.8, 16, 16, ChannelModel::SymbolRate).transmit(&x, 0.0, &mut rng_stream(0, 0));
    let worst = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn matched_filter_noise_is_coloured_by_taps() {
    let l = link(0.8, 32, 8, ChannelModel::Waveform);
    let zeros = vec![Complex::new(0.0, 0.0); 200_000];
    let sigma2 = 0.5;
    let n = l.transmit(&zeros, sigma2, &mut rng_stream(77, 3));
    let count = n.len() - 20;
    for lag in 0..5isize {
        let acc: Complex<f64> = (0..count).map(|i| n[i + lag as usize] * n[i].conj()).sum();
        let est = acc.re / count as f64;
        let want = sigma2 * l.taps.at(lag);
        // Standard error of the estimate is about sigma2 / sqrt(count).
        assert!(
            (est - want).abs() < 5.0 * sigma2 / (count as f64).sqrt() + 2e-3,
            "lag {lag}: {est} vs {want}"
        );
    }
}
