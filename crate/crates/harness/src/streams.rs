//! RNG stream ids. Every random draw comes from `rng_stream(seed, id)` with
//! an id built here, so training, validation and test traffic never share a
//! stream.

use ftn_core::channel::{rng_stream, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    TestBits = 0x01,
    TestNoise = 0x02,
    TrainSymbols = 0x10,
    TrainNoise = 0x11,
    ValidSymbols = 0x12,
    ValidNoise = 0x13,
}

/// `purpose` in the top byte, point index in the next 16 bits, block index below.
pub fn stream_id(purpose: Purpose, point: usize, block: u64) -> u64 {
    ((purpose as u64) << 56) | ((point as u64 & 0xffff) << 40) | (block & 0xff_ffff_ffff)
}

pub fn stream(seed: u64, purpose: Purpose, point: usize, block: u64) -> RngStream {
    let id = stream_id(purpose, point, block);
    log::trace!("rng stream seed={seed} id={id:#018x}");
    rng_stream(seed, id)
}
