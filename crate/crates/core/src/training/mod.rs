//! Conditional paths, the flow-matching and bracket losses, and the training loop.

mod adam;
mod conditional;
mod config;
mod losses;
mod train;

pub use adam::{clip_grad_norm, Adam};
pub use conditional::{cond_fields, cond_mu, sample_conditional_x, ConditionalPath};
pub use config::{DataSource, TrainConfig};
pub use losses::{fm_loss, loss_and_grad, pi_loss, LossBreakdown, LossWorkspace, PiMode, Sample};
pub use train::{draw_batch, train, train_cfm, train_with_observer, write_history_csv, TrainOutput};
