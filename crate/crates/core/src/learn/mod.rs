//! Tensors, reverse-mode gradients, the GCN and FastGTN models, and training.

mod checkpoint;
mod gradcheck;
mod model;
mod params;
mod tape;
mod tensor;
mod train;

pub use gradcheck::{check_gradients, GradCheck};
pub use checkpoint::{ModelCheckpoint, NamedTensor, CHECKPOINT_FORMAT_VERSION};
pub use model::{
    explicit_gtn_forward, gt_layer, Batch, ChannelAgg, GcnConfig, GtnConfig, ModelConfig, ModelKind, GTN_EDGE_KINDS,
};
pub use params::{Adam, ParamSet};
pub use tape::{softmax, Tape, Var};
pub use tensor::{Csr, Matrix, SparseOp};
pub use train::{pack, split_nodes, train, Confusion, EpochRecord, NodeRef, Split, SplitSpec, TrainReport};
pub(crate) use train::stable_hash;
