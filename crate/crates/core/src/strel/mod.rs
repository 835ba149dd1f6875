mod formula;
mod monitor;
mod parser;

pub use formula::{Comparison, Formula, Interval, Scalar, Term};
pub use monitor::{Monitor, MonitorError, Verdict};
pub use parser::{parse, parse_template, ParseError};
