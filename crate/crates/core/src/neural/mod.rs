//! Dense and recurrent building blocks with reverse-mode gradients.

mod gradcheck;
mod graph;
mod layers;
mod loss;
mod optim;
pub mod persist;
mod tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use graph::{sigmoid, softmax, Graph, Var, BCE_CLAMP};
pub use layers::{bigru_forward, dense, gru_forward, gru_step, Activation, Dense, GruParams};
pub use loss::{binary_cross_entropy, softmax_cross_entropy};
pub use optim::{adam_update, epoch_lr, AdamState, TrainConfig};
pub use tensor::{Gradients, Init, ParamId, ParamStore, Tensor};

/// The generator behind every seeded initialization in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}
