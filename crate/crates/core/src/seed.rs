//! Seed derivation.
//!
//! Every random stream in the crate hangs off a tree rooted at the experiment
//! seed:
//!
//! ```text
//! experiment seed ─┬─ trial t ─┬─ stage 1 (shared multiset S) ─ coordinate i, segment s
//!                  │           ├─ tester budgets ─ block j, level l, repetition r, attempt a
//!                  │           └─ stage 2 ─ coordinate i
//!                  └─ trial t+1 ...
//! ```
//!
//! A child seed is a SplitMix64 finalisation of the parent mixed with a label,
//! so siblings are decorrelated and any node can be recomputed from its path
//! without replaying the streams before it. Leaves seed a ChaCha8 generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the seed derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    pub const fn new(value: u64) -> Self {
        Seed(value)
    }

    pub fn child(self, label: u64) -> Seed {
        Seed(splitmix(
            self.0
                .wrapping_add(GOLDEN)
                .rotate_left(17)
                ^ splitmix(label.wrapping_add(GOLDEN)),
        ))
    }

    /// Derives a child from a path of labels.
    pub fn path(self, labels: &[u64]) -> Seed {
        labels.iter().fold(self, |s, &l| s.child(l))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Labels for the fixed branches of the tree.
pub(crate) mod label {
    pub const TRIAL: u64 = 0x7472_6961_6c00_0000;
    pub const STAGE1: u64 = 0x7374_6731;
    pub const STAGE2: u64 = 0x7374_6732;
    pub const BUDGETS: u64 = 0x6275_6467;
    pub const COLUMN: u64 = 0x636f_6c00;
    pub const REPEAT: u64 = 0x7265_7074;
    pub const POOL: u64 = 0x706f_6f6c;
}

impl Seed {
    pub fn trial(self, index: u64) -> Seed {
        self.child(label::TRIAL).child(index)
    }
}
