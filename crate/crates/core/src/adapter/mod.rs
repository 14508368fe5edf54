//! The adaptation function `a = ReLU(W·d)` and its training under the
//! bidirectional temperature-scaled cross-entropy over the pair similarity
//! matrix. Gradients are derived by hand; [`gradient_check`] compares them
//! with central finite differences.

mod gradcheck;
mod loss;
mod model;
mod similarity;
mod train;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{directed_loss, loss, LossOutput};
pub use model::AdaptationModel;
pub use similarity::similarity_matrix;
pub use train::{
    loss_and_gradient, train, CheckpointPolicy, EpochRecord, Optimizer, Step, TrainConfig,
    TrainTrace,
};
