//! Philox4x32-10 counter-based generator.
//!
//! Every random number is a pure function of `(key, counter)`, so any index
//! range can be generated by any worker without advancing shared state.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;
const ROUNDS: usize = 10;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

#[inline]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Raw Philox4x32-10 block function.
pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for r in 0..ROUNDS {
        if r > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        ctr = round(ctr, key);
    }
    ctr
}

/// Keyed generator addressing values by `(stream, index, lane)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: [seed as u32, (seed >> 32) as u32] }
    }

    /// 64 random bits for one counter position.
    #[inline]
    pub fn bits(&self, stream: u32, index: u64, lane: u32) -> u64 {
        let out = philox4x32([index as u32, (index >> 32) as u32, lane, stream], self.key);
        (out[0] as u64) << 32 | out[1] as u64
    }

    /// Uniform in the open interval (0, 1) with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, stream: u32, index: u64, lane: u32) -> f64 {
        ((self.bits(stream, index, lane) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn normal(&self, stream: u32, index: u64, lane: u32) -> f64 {
        super::normal::inverse_cdf(self.uniform(stream, index, lane))
    }
}
