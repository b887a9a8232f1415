mod checkpoint;
mod config;
mod model;
mod params;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use config::VitConfig;
pub use model::{
    attention_block, build_graph, embed, embed_patches, encoder_block, encoder_layer, feed_forward, forward,
    mhsa, patch_input, DropMasks, ForwardArtifacts, Graph, LayerVars, ParamVars,
};
pub use params::{init_params, LayerParams, VitParams, INIT_STD};

#[cfg(test)]
mod tests;
