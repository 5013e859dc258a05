//! Partitioned random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 stream identified by
//! `(seed, domain, index)`. Domains occupy disjoint high bits of the 64-bit
//! ChaCha stream id, so evaluation paths can never reuse the streams that
//! built scenario sets, path pools or training batches, whatever the
//! indices involved.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Consumers of randomness. The discriminant is stored in the top byte of
/// the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    DpScenarios = 1,
    PathPool = 2,
    MctsSearch = 3,
    NnInit = 4,
    NnTrain = 5,
    NnValidation = 6,
    Evaluation = 7,
    Misc = 8,
}

const INDEX_BITS: u32 = 56;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

/// Stream id for `(domain, index)`. Panics if `index` does not fit in
/// 56 bits.
pub fn stream_id(domain: Domain, index: u64) -> u64 {
    assert!(index <= INDEX_MASK, "stream index {index} overflows 56 bits");
    ((domain as u64) << INDEX_BITS) | index
}

/// Domain encoded in a stream id.
pub fn domain_of(stream: u64) -> u8 {
    (stream >> INDEX_BITS) as u8
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, index));
    rng
}

/// Packs small coordinates (time step, grid index, ...) into a stream index.
/// Each coordinate gets 24 bits; at most two coordinates.
pub fn index2(a: usize, b: usize) -> u64 {
    assert!(a < (1 << 24) && b < (1 << 24));
    ((a as u64) << 24) | b as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_coordinates_same_sequence() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = stream(7, Domain::Evaluation, 3);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = stream(7, Domain::Evaluation, 3);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn domains_do_not_collide() {
        let mut a = stream(7, Domain::Evaluation, 0);
        let mut b = stream(7, Domain::NnTrain, 0);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
        assert_ne!(
            stream_id(Domain::Evaluation, INDEX_MASK),
            stream_id(Domain::NnTrain, INDEX_MASK)
        );
        assert_eq!(domain_of(stream_id(Domain::PathPool, 99)), Domain::PathPool as u8);
    }
}
