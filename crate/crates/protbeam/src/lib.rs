//! File formats, the remote model client, and the `protbeam` command line
//! built on `protbeam-core`.

pub mod cli;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod memo;
pub mod objectives;
pub mod providers;
pub mod remote;
pub mod wire;

pub use error::{AppError, AppResult};
pub use exec::Rayon;
pub use memo::MemoizedProvider;
pub use remote::{RemoteConfig, RemoteProvider};
