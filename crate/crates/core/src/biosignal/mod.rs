//! Accelerometer streams → second-level signals → fixed windows → NBP
//! (next-behaviour prediction) examples with templated queries and responses.

mod prompt;
mod stream;
mod summary;
mod window;

pub use prompt::{build_query, build_response, QueryFamily, TemplateBank, DEFAULT_TEMPLATES};
pub use stream::{SensorStream, StreamSample};
pub use summary::{fmt4, summarize_ts};
pub use window::{aggregate_to_seconds, segment_nbp, NbpExample, NbpRecord, NbpWindow, TsWindow};
