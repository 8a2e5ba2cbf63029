//! 16-bit binary portable graymap (P5, maxval 65535, big-endian samples).

use std::io::Write;

use crate::error::{invalid, Result};

pub fn write_pgm16<W: Write>(w: &mut W, width: usize, height: usize, data: &[u16], comments: &[String]) -> Result<()> {
    if data.len() != width * height || width == 0 || height == 0 {
        return invalid(format!("PGM data has {} samples for {width}x{height}", data.len()));
    }
    writeln!(w, "P5")?;
    for c in comments {
        writeln!(w, "# {}", c.replace('\n', " "))?;
    }
    writeln!(w, "{width} {height}")?;
    writeln!(w, "65535")?;
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_be_bytes()).collect();
    w.write_all(&bytes)?;
    Ok(())
}
