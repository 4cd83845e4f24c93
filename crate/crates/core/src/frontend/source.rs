use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// A 1-based line/column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Byte range plus the resolved start/end positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub start_pos: Position,
    pub end_pos: Position,
}

impl Span {
    pub fn join(self, other: Span) -> Span {
        let (start, start_pos) = if self.start <= other.start { (self.start, self.start_pos) } else { (other.start, other.start_pos) };
        let (end, end_pos) = if self.end >= other.end { (self.end, self.end_pos) } else { (other.end, other.end_pos) };
        Span { start, end, start_pos, end_pos }
    }

    pub fn line(&self) -> u32 {
        self.start_pos.line
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.start_pos)
    }
}

/// Source text with its origin label and a line-start table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    origin: String,
    text: Arc<str>,
    line_starts: Vec<usize>,
}

impl SourceUnit {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        let text: String = text.into();
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        SourceUnit { origin: origin.into(), text: text.into(), line_starts }
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn line_count(&self) -> usize {
        if self.text.ends_with('\n') {
            self.line_starts.len() - 1
        } else {
            self.line_starts.len()
        }
    }

    /// Maps a byte offset to a 1-based position. Offsets past the end clamp
    /// to the end of the text; offsets inside a multi-byte character resolve
    /// to that character.
    pub fn position(&self, offset: usize) -> Position {
        let offset = offset.min(self.text.len());
        let line_idx = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let line_start = self.line_starts[line_idx];
        let mut col_end = offset;
        while !self.text.is_char_boundary(col_end) {
            col_end -= 1;
        }
        let column = self.text[line_start..col_end].chars().count() as u32 + 1;
        Position { line: line_idx as u32 + 1, column }
    }

    pub fn span(&self, start: usize, end: usize) -> Span {
        Span { start, end, start_pos: self.position(start), end_pos: self.position(end) }
    }

    /// Text of a 1-based line without its terminator.
    pub fn line_text(&self, line: usize) -> Option<&str> {
        if line == 0 || line > self.line_count() {
            return None;
        }
        let start = self.line_starts[line - 1];
        let end = self.line_starts.get(line).map(|e| e - 1).unwrap_or(self.text.len());
        Some(self.text[start..end].trim_end_matches('\r'))
    }

    pub fn lines(&self) -> impl Iterator<Item = (usize, &str)> {
        (1..=self.line_count()).map(move |n| (n, self.line_text(n).unwrap_or("")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based() {
        let src = SourceUnit::new("t", "ab\ncd\n\nx");
        assert_eq!(src.position(0), Position { line: 1, column: 1 });
        assert_eq!(src.position(1), Position { line: 1, column: 2 });
        assert_eq!(src.position(3), Position { line: 2, column: 1 });
        assert_eq!(src.position(6), Position { line: 3, column: 1 });
        assert_eq!(src.position(7), Position { line: 4, column: 1 });
        assert_eq!(src.position(100), Position { line: 4, column: 2 });
        assert_eq!(src.line_count(), 4);
        assert_eq!(src.line_text(2), Some("cd"));
        assert_eq!(src.line_text(3), Some(""));
    }

    #[test]
    fn lookup_is_total_over_multibyte_text() {
        let src = SourceUnit::new("t", "(* ä *)\nX");
        for off in 0..=src.text().len() + 3 {
            let p = src.position(off);
            assert!(p.line >= 1 && p.column >= 1);
        }
        assert_eq!(src.position(4), Position { line: 1, column: 4 });
    }
}
