//! Interchange formats: `HMAP` text heightmaps, binary PPM (P6) for RGB and
//! binary PBM (P4) for unknown masks.
//!
//! ```text
//! HMAP <width> <height> <resolution_mm>
//! <height × width whitespace-separated decimal mm values, row-major>
//! ```

use std::io::{BufRead, Write};

use super::{Heightmap, RgbMap, UnknownMask};
use crate::{Error, Result};

impl Heightmap {
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "HMAP {} {} {}", self.width, self.height, self.resolution)?;
        for y in 0..self.height {
            let mut line = String::with_capacity(self.width * 4);
            for (i, v) in self.row(y).iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing HMAP header"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "HMAP" {
            return Err(Error::parse(1, format!("bad header {header:?}")));
        }
        let width: usize = fields[1].parse().map_err(|_| Error::parse(1, "bad width"))?;
        let height: usize = fields[2].parse().map_err(|_| Error::parse(1, "bad height"))?;
        let resolution: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(1, "bad resolution"))?;
        let mut data = Vec::with_capacity(width * height);
        for (i, line) in lines.enumerate() {
            let line = line?;
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(i + 2, format!("bad value {tok:?}")))?;
                data.push(v);
            }
        }
        Heightmap::from_data(width, height, resolution, data)
    }
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c as char);
    }
    if tok.is_empty() {
        return Err(Error::Format("truncated netpbm header".into()));
    }
    Ok(tok)
}

fn header_usize<R: BufRead>(r: &mut R, what: &str) -> Result<usize> {
    let t = header_token(r)?;
    t.parse()
        .map_err(|_| Error::Format(format!("bad {what} {t:?} in netpbm header")))
}

impl RgbMap {
    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().flatten().copied().collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_ppm<R: BufRead>(mut r: R) -> Result<Self> {
        if header_token(&mut r)? != "P6" {
            return Err(Error::Format("expected P6 magic".into()));
        }
        let width = header_usize(&mut r, "width")?;
        let height = header_usize(&mut r, "height")?;
        let maxval = header_usize(&mut r, "maxval")?;
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported maxval {maxval}")));
        }
        let mut bytes = vec![0u8; width * height * 3];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        RgbMap::from_data(width, height, data)
    }
}

impl UnknownMask {
    /// P4 bitmap, 1 (black) = unknown.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P4\n{} {}\n", self.width, self.height)?;
        let stride = self.width.div_ceil(8);
        let mut row = vec![0u8; stride];
        for y in 0..self.height {
            row.fill(0);
            for x in 0..self.width {
                if self.get(x, y) {
                    row[x / 8] |= 0x80 >> (x % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn read_pbm<R: BufRead>(mut r: R) -> Result<Self> {
        if header_token(&mut r)? != "P4" {
            return Err(Error::Format("expected P4 magic".into()));
        }
        let width = header_usize(&mut r, "width")?;
        let height = header_usize(&mut r, "height")?;
        let stride = width.div_ceil(8);
        let mut bytes = vec![0u8; stride * height];
        r.read_exact(&mut bytes)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(bytes[y * stride + x / 8] & (0x80 >> (x % 8)) != 0);
            }
        }
        UnknownMask::from_data(width, height, data)
    }
}
