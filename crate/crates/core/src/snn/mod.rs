//! Poisson rate encoding, LIF dynamics and the three-layer spiking classifier.

mod encoder;
mod lif;
mod net;
mod weights;

pub use encoder::{encode_seeded, poisson_encode, EncoderConfig, SpikeTensor};
pub use lif::{lif_step, LifState, ResetMode};
pub use net::{
    classify, count_synops, fast_sigmoid_grad, max_synops, ForwardOutput, Layer, LayerSpikes,
    Raster, SpikingNet, DEFAULT_BETAS, DEFAULT_DIMS, SURROGATE_SLOPE, V_THRESHOLD,
};
pub use weights::{
    decode_weights, encode_weights, read_weights_file, sidecar_path, write_weights_file,
    TrainingSidecar, WEIGHTS_MAGIC, WEIGHTS_VERSION,
};
