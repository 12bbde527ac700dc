pub mod closed;
pub mod cluster;
pub mod dynamics;
pub mod error;
pub mod format;
pub mod model;
pub mod oracle;
pub mod product_form;
pub mod rate;
pub mod sim;

pub use error::{Error, Result};
pub use model::{ClassId, Macrostate, PandsQueue, State, SwappingGraph};
pub use rate::{
    delta_mu, mu, validate_rate_function, MultiServer, RateFunction, RateModel, RateTable,
};
