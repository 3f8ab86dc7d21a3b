//! Sink configuration: one `<callee> <forward|backward>` entry per line,
//! `#` starts a comment.

use std::path::Path;

use slicegraph_core::slicer::{Direction, SinkConfig};

use super::{numbered_lines, read_text};
use crate::error::{ParseError, Result};

pub fn parse_sinks(text: &str, path: &Path) -> Result<SinkConfig, ParseError> {
    let mut cfg = SinkConfig::empty();
    for (n, raw) in numbered_lines(text) {
        let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [callee, direction] = fields[..] else {
            return Err(ParseError::new(path, n, format!("expected `<callee> <forward|backward>`, got {line:?}")));
        };
        let direction: Direction = direction.parse().map_err(|e: String| ParseError::new(path, n, e))?;
        if cfg.direction(callee).is_some() {
            return Err(ParseError::new(path, n, format!("sink {callee} listed twice")));
        }
        cfg.insert(callee, direction);
    }
    Ok(cfg)
}

pub fn read_sinks(path: &Path) -> Result<SinkConfig> {
    Ok(parse_sinks(&read_text(path)?, path)?)
}

pub fn write_sinks(cfg: &SinkConfig) -> String {
    cfg.iter().map(|(callee, dir)| format!("{callee} {dir}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let text = "# sinks\nstrcpy backward\n\n  recv   forward # network input\n";
        let cfg = parse_sinks(text, Path::new("s")).unwrap();
        assert_eq!(cfg.len(), 2);
        assert_eq!(cfg.direction("recv"), Some(Direction::Forward));
        assert_eq!(cfg.direction("strcpy"), Some(Direction::Backward));
    }

    #[test]
    fn bad_lines() {
        let e = parse_sinks("strcpy sideways\n", Path::new("s")).unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_sinks("ok backward\nstrcpy\n", Path::new("s")).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_sinks("a forward\na backward\n", Path::new("s")).is_err());
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = SinkConfig::default();
        assert_eq!(parse_sinks(&write_sinks(&cfg), Path::new("s")).unwrap(), cfg);
    }
}
