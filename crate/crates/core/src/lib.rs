//! Coupled generative-adversarial image translation between two appearance
//! domains, and place recognition in the discriminators' feature spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: a small differentiable numeric core (convolutions, batch
//!   normalisation, activations, losses, Adam, gradient checking).
//! - [`nets`]: the encoder-decoder generator with additive skip connections
//!   and the discriminator with a fully connected feature layer.
//! - [`training`]: the coupled training loop with adversarial and cyclic
//!   reconstruction losses, loss logs and checkpoints.
//! - [`features`]: discriminator feature extraction, unit normalisation,
//!   sequence stacking and cosine distance.
//! - [`placerec`]: distance matrices, nearest-neighbour retrieval,
//!   precision-recall evaluation and sequence-length sweeps.
//! - [`data`]: image loading, the train/test split, the synthetic paired
//!   domain generator, Canny edges and seeded batch iteration.

pub mod data;
pub mod features;
pub mod nets;
pub mod placerec;
pub mod tensor;
pub mod training;

pub use data::{DatasetSplit, ImageRecord, SynthConfig};
pub use features::{FeatureVector, SequenceFeature};
pub use nets::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
pub use placerec::{DistanceMatrix, GroundTruth, PrCurve};
pub use tensor::{Real, Tensor};
pub use training::{LossRecord, TrainerState, TrainingConfig};

