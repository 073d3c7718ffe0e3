//! The bidirectional GRU frame tagger.

mod features;
mod labels;
pub(crate) mod model;

pub use features::{
    capitalization_class, distance_bucket, featurize, tree_distance, FeatureView, Vocab, Vocabularies, CAP_CLASSES,
    DISTANCE_BUCKETS, NUM_FEATURES, TREE_DISTANCE_CAP, UNK,
};
pub use labels::LabelInventory;
pub use model::{frame_nll, loss_frame, BiGru, Forward, ForwardCache, ParserModel, TaggerConfig};
