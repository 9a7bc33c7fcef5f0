//! The five-layer CNN: layer chain, explicit forward/backward passes,
//! cost-driven SGD training, checkpoints and gradient checking.

mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{
    check_model, gradient_check, relative_error, CheckSpec, GradCheckReport, FD_STEP, GRADCHECK_TOLERANCE,
};
pub use layer::{five_layer_specs, LayerSpec};
pub use loss::{cross_entropy, softmax, PROB_FLOOR};
pub use model::{
    argmax, build_paper_network, chain_shapes, fused_softmax_ce_grad, layer_shapes, stack, BatchCache, Gradients,
    Mode, NetworkModel, Params, SampleCache, DEFAULT_INPUT,
};
pub use optim::{lr_schedule, sgd_step};
pub use train::{evaluate, train, train_with_progress, EpochRecord, TrainConfig, TrainCurves, TrainOutcome};
