//! Small fully-connected networks with hand-written backpropagation, the
//! Adam optimizer, the adversarial losses and the EWC machinery used by the
//! continual variant.

mod adam;
mod loss;
mod mlp;
mod snapshot;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{
    d_loss, ewc_penalty, fisher_diag, g_loss_ewc, g_loss_non_saturating, g_loss_saturating,
    log_d_gradient, EwcState, LossGrad, LOG_CLAMP,
};
pub use mlp::{Activation, Arch, Backward, Layer, Mlp, Trace};
pub use snapshot::{NetworkSnapshot, Role, SnapshotIds};
