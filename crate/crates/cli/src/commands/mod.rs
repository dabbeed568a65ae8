mod analytic;
mod scenario;
mod simulate;
mod sweep;

pub use analytic::analytic;
pub use scenario::scenario;
pub use simulate::{in_pool, simulate};
pub use sweep::sweep;
