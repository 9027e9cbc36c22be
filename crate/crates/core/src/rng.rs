//! Counter-based pseudo-randomness for the pulse simulator.
//!
//! Every pulse gets an independent generator keyed by `(seed, pulse_index)`,
//! so simulation results cannot depend on how pulses are partitioned across
//! workers. The stream is splitmix64; not cryptographic, and it does not
//! need to be.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub(crate) struct PulseRng {
    state: u64,
}

impl PulseRng {
    pub(crate) fn for_pulse(seed: u64, pulse_index: u64) -> Self {
        let key = mix(seed ^ GOLDEN).wrapping_add(pulse_index.wrapping_mul(GOLDEN));
        Self { state: mix(key) }
    }

    #[inline]
    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of mantissa.
    #[inline]
    pub(crate) fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub(crate) fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fair coin.
    #[inline]
    pub(crate) fn coin(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}
