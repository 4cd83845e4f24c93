//! Locating the CSV table inside a free-form LLM reply.

use plctest_core::testspec::{NAME_COLUMN, STATE_COLUMN};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no CSV table starting with a `{NAME_COLUMN},{STATE_COLUMN}` header was found in the response")]
pub struct NoCsvFound;

/// Returns the CSV table of `raw` with prose, fences and blank lines removed.
///
/// The first fenced block holding a header wins. Without one, the longest
/// header-led run of rows anywhere in the text is taken. A row is a line of
/// at least two fields whose second field is an integer state number.
pub fn extract_csv(raw: &str) -> Result<String, NoCsvFound> {
    let lines: Vec<&str> = raw.lines().map(str::trim_end).collect();
    let table = fenced_blocks(&lines)
        .into_iter()
        .find_map(|block| block.iter().position(|l| is_header(l)).map(|i| run(&block[i..])))
        .or_else(|| {
            (0..lines.len())
                .filter(|&i| is_header(lines[i]))
                .map(|i| run(&lines[i..]))
                // first of the longest
                .fold(None, |best: Option<Vec<&str>>, r| match best {
                    Some(b) if b.len() >= r.len() => Some(b),
                    _ => Some(r),
                })
        })
        .ok_or(NoCsvFound)?;
    let mut out = table.join("\n");
    out.push('\n');
    Ok(out)
}

fn fenced_blocks<'a>(lines: &'a [&'a str]) -> Vec<&'a [&'a str]> {
    let mut blocks = Vec::new();
    let mut open = None;
    for (i, l) in lines.iter().enumerate() {
        if l.trim_start().starts_with("```") {
            match open.take() {
                None => open = Some(i + 1),
                Some(start) => blocks.push(&lines[start..i]),
            }
        }
    }
    // an unterminated fence runs to the end
    if let Some(start) = open {
        blocks.push(&lines[start..]);
    }
    blocks
}

/// Header line followed by its rows; blank lines are skipped, anything else ends the run.
fn run<'a>(lines: &[&'a str]) -> Vec<&'a str> {
    let mut out = vec![lines[0].trim_start_matches('\u{feff}')];
    for l in &lines[1..] {
        if l.trim().is_empty() {
            continue;
        }
        if !is_row(l) {
            break;
        }
        out.push(l);
    }
    out
}

fn fields(line: &str) -> Option<csv::StringRecord> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(line.as_bytes());
    reader.records().next()?.ok()
}

fn is_header(line: &str) -> bool {
    let line = line.trim_start_matches('\u{feff}');
    fields(line)
        .is_some_and(|r| r.len() >= 2 && r[0].trim().eq_ignore_ascii_case(NAME_COLUMN) && r[1].trim().eq_ignore_ascii_case(STATE_COLUMN))
}

fn is_row(line: &str) -> bool {
    fields(line).is_some_and(|r| r.len() >= 2 && r[1].trim().parse::<i64>().is_ok())
}
