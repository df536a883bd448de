use std::fmt;

use super::{Result, RuntimeError, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Fact,
    Interrupt,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceKind::Fact => "fact",
            TraceKind::Interrupt => "interrupt",
        })
    }
}

/// One external event: `tick kind key value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub tick: Tick,
    pub kind: TraceKind,
    pub key: String,
    pub value: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.tick, self.kind, self.key, self.value)
    }
}

/// Parses a line-delimited trace. Blank lines and lines starting with `#`
/// are skipped. The value is the rest of the line after the key and may
/// contain spaces. Ticks must be nondecreasing.
pub fn parse_trace(text: &str) -> Result<Vec<TraceEvent>> {
    let mut events: Vec<TraceEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let bad = |reason: String| RuntimeError::MalformedTrace { line, reason };
        let mut rest = trimmed;
        let mut field = || -> Option<&str> {
            let s = rest.trim_start();
            let end = s.find(char::is_whitespace).unwrap_or(s.len());
            let (head, tail) = s.split_at(end);
            rest = tail;
            (!head.is_empty()).then_some(head)
        };
        let (Some(tick), Some(kind), Some(key)) = (field(), field(), field()) else {
            return Err(bad("expected `tick kind key value`".into()));
        };
        let value = rest.trim();
        if value.is_empty() {
            return Err(bad("missing value".into()));
        }
        let tick: Tick = tick
            .parse()
            .map_err(|_| bad(format!("tick `{tick}` is not a nonnegative integer")))?;
        let kind = match kind {
            "fact" => TraceKind::Fact,
            "interrupt" => TraceKind::Interrupt,
            other => return Err(bad(format!("unknown kind `{other}`"))),
        };
        if let Some(prev) = events.last() {
            if tick < prev.tick {
                return Err(bad(format!("tick {tick} goes back from {}", prev.tick)));
            }
        }
        events.push(TraceEvent {
            tick,
            kind,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(events)
}
