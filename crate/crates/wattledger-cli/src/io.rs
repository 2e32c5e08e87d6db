//! Path conventions: `-` means standard input or standard output, so
//! commands compose in pipelines without temp files.

use std::io::{Read, Write};

use anyhow::Context;

pub fn read_input(path: &str) -> anyhow::Result<String> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .context("reading standard input")?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

pub fn write_output(path: &str, bytes: &[u8]) -> anyhow::Result<()> {
    if path == "-" {
        std::io::stdout().write_all(bytes).context("writing standard output")?;
        Ok(())
    } else {
        std::fs::write(path, bytes).with_context(|| format!("writing {path}"))
    }
}

/// Pretty-printed JSON with a trailing newline, the shape every `--out`
/// file uses.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).context("serializing result")?;
    bytes.push(b'\n');
    Ok(bytes)
}
