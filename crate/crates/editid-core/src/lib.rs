//! Core library for a training-free, editability-preserving identity
//! customization pipeline and its evaluation metrics.
//!
//! The pipeline has three stages layered over a flow-matching Euler
//! sampler:
//!
//! 1. **Feature extraction** ([`extract`]): detect and align the face, then
//!    pull a global identity feature and a five-slot local feature stack
//!    from a multi-layer vision encoder.
//! 2. **Feature fusion** ([`fusion`]): shift-strategy slot materialization,
//!    a three-layer ID embedding network, five per-slot mapping networks,
//!    and a single-query attention producing the edit feature.
//! 3. **Dynamic ID integration** ([`integrate`]): block selection over the
//!    dual/single-stream backbone, perceiver-style cross-attention, query
//!    reweighting, residual fusion, and strength scheduling, injected into
//!    the sampler through step hooks.
//!
//! All model calls go through the backend traits in [`backends`]; the
//! bundled toy implementations are deterministic seeded projections so the
//! whole pipeline runs at desk scale without pretrained weights. The
//! [`metrics`] module scores generated images with the full eleven-metric
//! benchmark suite.

pub mod backends;
pub mod extract;
pub mod fusion;
pub mod image;
pub mod integrate;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod selection;
