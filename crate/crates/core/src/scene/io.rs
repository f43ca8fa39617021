//! Scene files: one line of JSON header, then the binary slab section.
//!
//! Binary section (little-endian), cells in row-major order (`iz` outer,
//! `ix` inner): `u16` slab count, then per slab `f32 y_min`, `f32 y_max`,
//! `u16 instance`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Aabb2, Instance, Scene, SceneBuilder, Slab};
use crate::error::{Error, Result};

const FORMAT: &str = "embnav-scene";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    cell_size: f64,
    nx: usize,
    nz: usize,
    seed: u64,
    bounds: Aabb2,
    instances: Vec<Instance>,
}

pub fn write_scene<W: Write>(scene: &Scene, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        cell_size: scene.cell_size,
        nx: scene.nx,
        nz: scene.nz,
        seed: scene.seed,
        bounds: scene.bounds(),
        instances: scene.instances.clone(),
    };
    let value = serde_json::to_value(&header)?;
    serde_json::to_writer(&mut out, &value)?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(scene.nx * scene.nz * 2 + scene.slabs.len() * 10);
    for i in 0..scene.nx * scene.nz {
        let slabs = scene.slabs_at(i);
        buf.extend_from_slice(&(slabs.len() as u16).to_le_bytes());
        for s in slabs {
            buf.extend_from_slice(&s.y_min.to_le_bytes());
            buf.extend_from_slice(&s.y_max.to_le_bytes());
            buf.extend_from_slice(&s.instance.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

fn parse_err(location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        location,
        message: message.into(),
    }
}

pub fn read_scene<R: Read>(input: R) -> Result<Scene> {
    let mut reader = BufReader::new(input);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(parse_err("line 1".into(), "missing header line terminator"));
    }
    let header_len = line.len() as u64;
    let header: Header = serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| {
        parse_err(format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(parse_err(
            "line 1".into(),
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if pos + n > body.len() {
            return Err(parse_err(
                format!("byte offset {}", header_len + pos as u64),
                format!("truncated slab section while reading {what}"),
            ));
        }
        let s = &body[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let cells = header.nx.checked_mul(header.nz).ok_or_else(|| parse_err("line 1".into(), "grid too large"))?;
    let mut builder = SceneBuilder::new(header.cell_size, header.nx, header.nz, header.seed);
    for i in 0..cells {
        let count = u16::from_le_bytes(take(2, "slab count")?.try_into().unwrap());
        for _ in 0..count {
            let y_min = f32::from_le_bytes(take(4, "y_min")?.try_into().unwrap());
            let y_max = f32::from_le_bytes(take(4, "y_max")?.try_into().unwrap());
            let instance = u16::from_le_bytes(take(2, "instance")?.try_into().unwrap());
            builder.cells[i].push(Slab { y_min, y_max, instance });
        }
    }
    if pos != body.len() {
        return Err(parse_err(
            format!("byte offset {}", header_len + pos as u64),
            "trailing bytes after slab section",
        ));
    }
    builder.fixed_instances = Some(header.instances);
    let scene = builder.finish_keep_instances();
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_scene(scene, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    read_scene(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, SceneParams};

    #[test]
    fn round_trip_is_exact() {
        let s = generate_scene(11, &SceneParams::default()).unwrap();
        let mut buf = Vec::new();
        write_scene(&s, &mut buf).unwrap();
        let back = read_scene(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.slab_volume(), s.slab_volume());
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let s = generate_scene(2, &SceneParams::default()).unwrap();
        let mut buf = Vec::new();
        write_scene(&s, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_scene(&buf[..]), Err(Error::Parse { .. })));
        let header_only = buf.iter().position(|&b| b == b'\n').unwrap();
        assert!(matches!(read_scene(&buf[..header_only / 2]), Err(Error::Parse { .. })));
    }

    #[test]
    fn inverted_slab_names_the_cell() {
        let mut b = SceneBuilder::new(0.1, 3, 2, 0);
        let id = b.add_instance("vase");
        b.add_cells(id, 1..2, 1..2, 0.0, 0.5);
        let s = b.build();
        let mut buf = Vec::new();
        write_scene(&s, &mut buf).unwrap();
        // Swap y_min/y_max of the only slab: header, then cells 0..4 (2 bytes each), then cell (1,1).
        let nl = buf.iter().position(|&c| c == b'\n').unwrap() + 1;
        let slab = nl + 4 * 2 + 2;
        let (lo, hi) = (buf[slab..slab + 4].to_vec(), buf[slab + 4..slab + 8].to_vec());
        buf[slab..slab + 4].copy_from_slice(&hi);
        buf[slab + 4..slab + 8].copy_from_slice(&lo);
        match read_scene(&buf[..]) {
            Err(Error::Validation { what, .. }) => assert!(what.contains("(1, 1)"), "{what}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }
}
