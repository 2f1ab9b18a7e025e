//! SplitMix64 (Steele, Lea and Flood). Constants are fixed here so that
//! simulations are bit-identical on every platform.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;
/// Odd multiplier spreading trial indices before they meet the seed.
const TRIAL_SPREAD: u64 = 0xD1B5_4A32_D192_ED03;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent stream for trial `t` of a run seeded with `seed`:
    /// state = mix(mix(seed) ^ (t + 1) * TRIAL_SPREAD).
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        SplitMix64::new(mix(mix(seed) ^ trial.wrapping_add(1).wrapping_mul(TRIAL_SPREAD)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// True with probability `p`; `p >= 1` always, `p <= 0` never.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_vectors() {
        let mut r = SplitMix64::new(1234567);
        let got: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            [
                6457827717110365317,
                3203168211198807973,
                9817491932198370423,
                4593380528125082431,
                16408922859458223821
            ]
        );
        let mut z = SplitMix64::new(0);
        assert_eq!(z.next_u64(), 16294208416658607535);
    }

    #[test]
    fn unit_interval() {
        let mut r = SplitMix64::new(9);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
        assert!(!SplitMix64::new(1).bernoulli(0.0));
        assert!(SplitMix64::new(1).bernoulli(1.0));
    }

    #[test]
    fn trial_streams_differ() {
        let a = SplitMix64::for_trial(42, 0).next_u64();
        let b = SplitMix64::for_trial(42, 1).next_u64();
        let c = SplitMix64::for_trial(43, 0).next_u64();
        assert!(a != b && a != c && b != c);
        assert_eq!(SplitMix64::for_trial(42, 7), SplitMix64::for_trial(42, 7));
    }
}
