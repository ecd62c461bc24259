//! Text file formats: JSON documents, CSV tables, plain PGM images and
//! JSON-lines logs. Floats are written in shortest round-trip form, so every
//! writer is byte-deterministic and every reader recovers the exact values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use eit_core::inverse::ReconstructionImage;
use eit_core::{MeasurementFrame, Mesh, Protocol};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{io_err, Error, Result};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    write_json(path, mesh)
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    read_json(path)
}

fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .trim_start_matches('#')
        .split(',')
        .filter_map(|kv| kv.trim().split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn first_line<R: BufRead>(r: &mut R, what: &'static str) -> Result<String> {
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::Format {
        what,
        detail: e.to_string(),
    })?;
    if !line.starts_with('#') {
        return Err(Error::Format {
            what,
            detail: "missing '#' header line".into(),
        });
    }
    Ok(line.trim_end().to_owned())
}

fn parse_header<T: std::str::FromStr>(header: &str, key: &str, what: &'static str) -> Result<T> {
    header_field(header, key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format {
            what,
            detail: format!("header lacks a valid '{key}'"),
        })
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRow {
    pattern: usize,
    drive_plus: usize,
    drive_minus: usize,
    meas_plus: usize,
    meas_minus: usize,
    voltage: f64,
}

/// One row per pattern after a `# protocol_id=…,drive_current=…` line.
pub fn write_frame_csv<W: Write>(
    w: W,
    frame: &MeasurementFrame,
    protocol: &Protocol,
) -> Result<()> {
    if frame.protocol_id != protocol.id() || frame.len() != protocol.len() {
        return Err(Error::Format {
            what: "frame",
            detail: "frame does not belong to the protocol".into(),
        });
    }
    let mut w = w;
    writeln!(
        w,
        "# protocol_id={:016x},drive_current={}",
        frame.protocol_id, frame.drive_current
    )?;
    let mut out = csv::Writer::from_writer(w);
    for (i, (p, v)) in protocol.patterns.iter().zip(&frame.voltages).enumerate() {
        out.serialize(FrameRow {
            pattern: i,
            drive_plus: p.drive_plus,
            drive_minus: p.drive_minus,
            meas_plus: p.meas_plus,
            meas_minus: p.meas_minus,
            voltage: *v,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_frame_csv<R: Read>(r: R) -> Result<MeasurementFrame> {
    let mut r = BufReader::new(r);
    let header = first_line(&mut r, "frame")?;
    let protocol_id = header_field(&header, "protocol_id")
        .and_then(|v| u64::from_str_radix(v, 16).ok())
        .ok_or_else(|| Error::Format {
            what: "frame",
            detail: "header lacks a valid 'protocol_id'".into(),
        })?;
    let drive_current = parse_header(&header, "drive_current", "frame")?;
    let mut voltages = Vec::new();
    for (i, row) in csv::Reader::from_reader(r)
        .deserialize::<FrameRow>()
        .enumerate()
    {
        let row = row?;
        if row.pattern != i {
            return Err(Error::Format {
                what: "frame",
                detail: format!("pattern {} out of order at row {i}", row.pattern),
            });
        }
        voltages.push(row.voltage);
    }
    Ok(MeasurementFrame {
        voltages,
        protocol_id,
        drive_current,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageRow {
    element: usize,
    centroid_x: f64,
    centroid_y: f64,
    value: f64,
}

/// Per-element values with centroids after a `# mesh_id=…,…` line.
pub fn write_image_csv<W: Write>(w: W, image: &ReconstructionImage, mesh: &Mesh) -> Result<()> {
    if image.values.len() != mesh.element_count() {
        return Err(Error::Format {
            what: "image",
            detail: "image does not belong to the mesh".into(),
        });
    }
    let mut w = w;
    writeln!(
        w,
        "# mesh_id={:016x},postprocessed={},peak={}",
        image.mesh_id, image.postprocessed, image.peak
    )?;
    let mut out = csv::Writer::from_writer(w);
    for (k, v) in image.values.iter().enumerate() {
        let c = mesh.centroid(k);
        out.serialize(ImageRow {
            element: k,
            centroid_x: c[0],
            centroid_y: c[1],
            value: *v,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_image_csv<R: Read>(r: R) -> Result<ReconstructionImage> {
    let mut r = BufReader::new(r);
    let header = first_line(&mut r, "image")?;
    let mesh_id = header_field(&header, "mesh_id")
        .and_then(|v| u64::from_str_radix(v, 16).ok())
        .ok_or_else(|| Error::Format {
            what: "image",
            detail: "header lacks a valid 'mesh_id'".into(),
        })?;
    let postprocessed = parse_header(&header, "postprocessed", "image")?;
    let peak = parse_header(&header, "peak", "image")?;
    let values = csv::Reader::from_reader(r)
        .deserialize::<ImageRow>()
        .map(|row| row.map(|r| r.value))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ReconstructionImage {
        values,
        mesh_id,
        postprocessed,
        peak,
    })
}

/// Plain (P2) greymap of a grid of values in [0, 1], first row at the top.
pub fn write_pgm<W: Write>(w: W, grid: &[Vec<f64>]) -> Result<()> {
    const MAXVAL: f64 = 255.0;
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    if grid.iter().any(|r| r.len() != cols) {
        return Err(Error::Format {
            what: "pgm",
            detail: "ragged grid".into(),
        });
    }
    let mut w = w;
    let mut body = format!("P2\n{cols} {rows}\n{}\n", MAXVAL as u32);
    for row in grid {
        // Plain PGM asks for lines of at most 70 characters.
        let mut line = String::new();
        for v in row {
            let level = (v.clamp(0.0, 1.0) * MAXVAL).round() as u32;
            let token = level.to_string();
            if !line.is_empty() && line.len() + 1 + token.len() > 70 {
                body.push_str(&line);
                body.push('\n');
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&token);
        }
        body.push_str(&line);
        body.push('\n');
    }
    w.write_all(body.as_bytes())?;
    Ok(())
}

/// Parses a plain greymap into rows of raw grey levels plus the maxval.
pub fn read_pgm<R: Read>(mut r: R) -> Result<(Vec<Vec<u32>>, u32)> {
    let bad = |detail: &str| Error::Format {
        what: "pgm",
        detail: detail.into(),
    };
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|e| bad(&e.to_string()))?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("not a plain PGM"));
    }
    let mut num = || -> Result<u32> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("truncated or non-numeric data"))
    };
    let (cols, rows, maxval) = (num()? as usize, num()? as usize, num()?);
    let mut grid = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row = (0..cols).map(|_| num()).collect::<Result<Vec<_>>>()?;
        if row.iter().any(|&v| v > maxval) {
            return Err(bad("grey level above maxval"));
        }
        grid.push(row);
    }
    Ok((grid, maxval))
}

/// One JSON document per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON-lines, skipping blank lines; errors name the line number.
pub fn read_json_lines<R: Read, T: DeserializeOwned>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::Format {
            what: "json-lines",
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            what: "json-lines",
            detail: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use eit_core::forward::simulate_frame;
    use eit_core::mesh::{build_mesh, uniform_field};
    use eit_core::protocol::generate_adjacent_protocol;

    #[test]
    fn frame_csv_round_trip_is_exact() {
        let m = build_mesh(100.0, 16, 16, 3.0).unwrap();
        let p = generate_adjacent_protocol(16, true).unwrap();
        let f = simulate_frame(&m, &uniform_field(&m, 1.0).unwrap(), &p, 1e-3).unwrap();
        let mut buf = Vec::new();
        write_frame_csv(&mut buf, &f, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# protocol_id="));
        assert_eq!(
            text.lines().nth(1),
            Some("pattern,drive_plus,drive_minus,meas_plus,meas_minus,voltage")
        );
        assert_eq!(text.lines().count(), 2 + 104);
        assert_eq!(read_frame_csv(buf.as_slice()).unwrap(), f);

        let other = generate_adjacent_protocol(16, false).unwrap();
        assert!(write_frame_csv(Vec::new(), &f, &other).is_err());
        assert!(read_frame_csv("pattern,voltage\n".as_bytes()).is_err());
    }

    #[test]
    fn image_csv_round_trip_is_exact() {
        let m = build_mesh(100.0, 8, 16, 3.0).unwrap();
        let values: Vec<f64> = (0..m.element_count())
            .map(|k| (k as f64).sin() / 3.0)
            .collect();
        let img = eit_core::inverse::postprocess(&ReconstructionImage::raw(values, m.id()));
        let mut buf = Vec::new();
        write_image_csv(&mut buf, &img, &m).unwrap();
        assert_eq!(read_image_csv(buf.as_slice()).unwrap(), img);
    }

    #[test]
    fn pgm_layout_and_round_trip() {
        let grid: Vec<Vec<f64>> = (0..40)
            .map(|r| (0..40).map(|c| ((r * 40 + c) % 7) as f64 / 6.0).collect())
            .collect();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &grid).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("P2\n40 40\n255\n"));
        assert!(text.lines().all(|l| l.len() <= 70));
        let (back, maxval) = read_pgm(buf.as_slice()).unwrap();
        assert_eq!(maxval, 255);
        for (r, row) in back.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_eq!(*v, (grid[r][c] * 255.0).round() as u32);
            }
        }
        assert!(write_pgm(Vec::new(), &[vec![0.0], vec![]]).is_err());
        assert!(read_pgm("P5\n1 1\n255\n0".as_bytes()).is_err());
        assert!(read_pgm("P2\n2 1\n255\n0".as_bytes()).is_err());
    }

    #[test]
    fn pgm_clamps_out_of_range_values() {
        let mut buf = Vec::new();
        write_pgm(&mut buf, &[vec![-1.0, 0.5, 2.0]]).unwrap();
        assert_eq!(read_pgm(buf.as_slice()).unwrap().0, vec![vec![0, 128, 255]]);
    }

    #[test]
    fn json_lines_report_the_bad_line() {
        let mut buf = Vec::new();
        write_json_lines(&mut buf, &[1u32, 2, 3]).unwrap();
        assert_eq!(
            read_json_lines::<_, u32>(buf.as_slice()).unwrap(),
            vec![1, 2, 3]
        );
        let e = read_json_lines::<_, u32>("1\n\nx\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }
}
