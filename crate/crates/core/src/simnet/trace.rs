//! Tab-separated event trace.

use std::fmt::Write;

use crate::model::{Message, NodeId};

#[derive(Clone, Debug, Default)]
pub struct Trace {
    buf: String,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn header(&mut self, fields: &str) {
        let _ = writeln!(self.buf, "# run {fields}");
    }

    pub fn line(&mut self, at: f64, event: &str, src: NodeId, dst: NodeId, kind: &str, detail: &str) {
        let _ = writeln!(self.buf, "{at:.6}\t{event}\t{src}\t{dst}\t{kind}\t{detail}");
    }

    pub fn message(&mut self, at: f64, event: &str, msg: &Message, extra: &str) {
        let mut detail = msg.fields();
        if !extra.is_empty() {
            detail.push(' ');
            detail.push_str(extra);
        }
        self.line(at, event, msg.src, msg.dst, msg.kind().name(), &detail);
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}
