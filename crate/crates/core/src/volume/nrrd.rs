//! Reader and writer for a strict NRRD subset: 3D, raw encoding,
//! little-endian, sample types float32 / int16 / uint16, inline data only.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Matrix3;

use super::Volume3D;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SampleType {
    Float32,
    Int16,
    Uint16,
}

impl SampleType {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "float" | "float32" => Some(SampleType::Float32),
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
                Some(SampleType::Int16)
            }
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => Some(SampleType::Uint16),
            _ => None,
        }
    }

    fn size(self) -> usize {
        match self {
            SampleType::Float32 => 4,
            SampleType::Int16 | SampleType::Uint16 => 2,
        }
    }
}

#[derive(Default)]
struct Header {
    sample_type: Option<SampleType>,
    dimension: Option<usize>,
    sizes: Option<[usize; 3]>,
    directions: Option<[Vec3; 3]>,
    spacings: Option<[f64; 3]>,
    origin: Option<Vec3>,
    encoding_seen: bool,
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let file = File::open(path.as_ref())?;
    read_nrrd(BufReader::new(file))
}

pub fn save_volume(volume: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_nrrd(volume, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_nrrd<R: BufRead>(mut reader: R) -> Result<Volume3D> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if !line.starts_with("NRRD000") {
        return Err(Error::format(
            "magic",
            format!("expected NRRD magic, found {:?}", line.trim_end()),
        ));
    }

    let mut header = Header::default();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "header ended before the blank separator line",
            )));
        }
        let text = line.trim_end_matches(['\n', '\r']);
        if text.is_empty() {
            break;
        }
        if text.starts_with('#') || text.contains(":=") {
            continue;
        }
        let Some((key, value)) = text.split_once(": ") else {
            return Err(Error::format(text, "malformed header line"));
        };
        parse_field(&mut header, key.trim(), value.trim())?;
    }

    let sample_type = header
        .sample_type
        .ok_or_else(|| Error::format("type", "missing required field"))?;
    match header.dimension {
        Some(3) => {}
        Some(d) => {
            return Err(Error::format(
                "dimension",
                format!("only 3D volumes are supported, got {d}"),
            ))
        }
        None => return Err(Error::format("dimension", "missing required field")),
    }
    let dims = header
        .sizes
        .ok_or_else(|| Error::format("sizes", "missing required field"))?;
    if !header.encoding_seen {
        return Err(Error::format("encoding", "missing required field"));
    }

    let (spacing, directions) = match (header.directions, header.spacings) {
        (Some(cols), _) => geometry_from_directions(cols)?,
        (None, Some(sp)) => (sp, Matrix3::identity()),
        (None, None) => ([1.0; 3], Matrix3::identity()),
    };
    let origin = header.origin.unwrap_or_else(Vec3::zeros);

    let count = dims[0] * dims[1] * dims[2];
    let expected = count * sample_type.size();
    let mut payload = Vec::with_capacity(expected);
    reader.take(expected as u64).read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(Error::Io(io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("truncated data: expected {expected} bytes, found {}", payload.len()),
        )));
    }

    let data: Vec<f32> = match sample_type {
        SampleType::Float32 => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
        SampleType::Int16 => payload
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32)
            .collect(),
        SampleType::Uint16 => payload
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]) as f32)
            .collect(),
    };
    Volume3D::new(dims, spacing, origin, directions, data)
}

fn parse_field(header: &mut Header, key: &str, value: &str) -> Result<()> {
    match key {
        "type" => {
            let t = SampleType::parse(value)
                .ok_or_else(|| Error::format("type", format!("unsupported sample type {value:?}")))?;
            header.sample_type = Some(t);
        }
        "dimension" => {
            let d = value
                .parse()
                .map_err(|_| Error::format("dimension", format!("not an integer: {value:?}")))?;
            header.dimension = Some(d);
        }
        "sizes" => {
            let v: Vec<usize> = value
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format("sizes", format!("not a list of integers: {value:?}")))?;
            if v.len() != 3 {
                return Err(Error::format("sizes", format!("expected 3 sizes, got {}", v.len())));
            }
            header.sizes = Some([v[0], v[1], v[2]]);
        }
        "encoding" => {
            if value != "raw" {
                return Err(Error::format(
                    "encoding",
                    format!("only raw encoding is supported, got {value:?}"),
                ));
            }
            header.encoding_seen = true;
        }
        "endian" => {
            if value != "little" {
                return Err(Error::format(
                    "endian",
                    format!("only little-endian data is supported, got {value:?}"),
                ));
            }
        }
        "space dimension" => {
            if value != "3" {
                return Err(Error::format("space dimension", format!("expected 3, got {value:?}")));
            }
        }
        "space directions" => {
            let vecs = parse_vectors(value, "space directions")?;
            if vecs.len() != 3 {
                return Err(Error::format(
                    "space directions",
                    format!("expected 3 vectors, got {}", vecs.len()),
                ));
            }
            header.directions = Some([vecs[0], vecs[1], vecs[2]]);
        }
        "space origin" => {
            let vecs = parse_vectors(value, "space origin")?;
            if vecs.len() != 1 {
                return Err(Error::format("space origin", "expected a single vector"));
            }
            header.origin = Some(vecs[0]);
        }
        "spacings" => {
            let v: Vec<f64> = value
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format("spacings", format!("not a list of numbers: {value:?}")))?;
            if v.len() != 3 {
                return Err(Error::format("spacings", "expected 3 values"));
            }
            header.spacings = Some([v[0], v[1], v[2]]);
        }
        "data file" | "datafile" => {
            return Err(Error::format(key, "detached data files are not supported"));
        }
        // informational fields carry no geometry
        "space" | "kinds" | "content" | "units" | "space units" | "labels" | "measurement frame" => {}
        other => log::debug!("ignoring NRRD field {other:?}"),
    }
    Ok(())
}

fn parse_vectors(value: &str, field: &str) -> Result<Vec<Vec3>> {
    let mut out = Vec::new();
    for token in value.split_whitespace() {
        if token == "none" {
            return Err(Error::format(field, "non-spatial axes are not supported"));
        }
        let inner = token
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::format(field, format!("malformed vector {token:?}")))?;
        let comps: Vec<f64> = inner
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(field, format!("malformed vector {token:?}")))?;
        if comps.len() != 3 {
            return Err(Error::format(field, format!("expected 3 components in {token:?}")));
        }
        out.push(Vec3::new(comps[0], comps[1], comps[2]));
    }
    Ok(out)
}

/// Split scaled axis vectors into spacings and unit directions, cleaning up
/// small deviations from orthonormality left by text round-off.
fn geometry_from_directions(cols: [Vec3; 3]) -> Result<([f64; 3], Matrix3<f64>)> {
    let spacing = [cols[0].norm(), cols[1].norm(), cols[2].norm()];
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::format("space directions", "zero-length axis vector"));
    }
    let raw = Matrix3::from_columns(&[cols[0] / spacing[0], cols[1] / spacing[1], cols[2] / spacing[2]]);
    let gram = raw.transpose() * raw;
    if (gram - Matrix3::identity()).abs().max() > 1e-6 {
        return Err(Error::format("space directions", "axis vectors are not orthogonal"));
    }
    // Gram-Schmidt
    let e0 = raw.column(0).normalize();
    let c1 = raw.column(1).into_owned();
    let e1 = (c1 - e0 * e0.dot(&c1)).normalize();
    let c2 = raw.column(2).into_owned();
    let e2 = (c2 - e0 * e0.dot(&c2) - e1 * e1.dot(&c2)).normalize();
    Ok((spacing, Matrix3::from_columns(&[e0, e1, e2])))
}

/// Write `volume` as float32 raw NRRD.
pub fn write_nrrd<W: Write>(volume: &Volume3D, w: &mut W) -> Result<()> {
    let [nx, ny, nz] = volume.dims();
    let sp = volume.spacing();
    let d = volume.directions();
    let axis = |a: usize| {
        let v = d.column(a) * sp[a];
        format!("({},{},{})", v[0], v[1], v[2])
    };
    let o = volume.origin();
    writeln!(w, "NRRD0004")?;
    writeln!(w, "# Complete NRRD file format specification at:")?;
    writeln!(w, "# http://teem.sourceforge.net/nrrd/format.html")?;
    writeln!(w, "type: float")?;
    writeln!(w, "dimension: 3")?;
    writeln!(w, "space dimension: 3")?;
    writeln!(w, "sizes: {nx} {ny} {nz}")?;
    writeln!(w, "space directions: {} {} {}", axis(0), axis(1), axis(2))?;
    writeln!(w, "kinds: domain domain domain")?;
    writeln!(w, "endian: little")?;
    writeln!(w, "encoding: raw")?;
    writeln!(w, "space origin: ({},{},{})", o.x, o.y, o.z)?;
    writeln!(w)?;
    let mut bytes = Vec::with_capacity(volume.data().len() * 4);
    for v in volume.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn header(fields: &str) -> Vec<u8> {
        format!("NRRD0004\n{fields}\n").into_bytes()
    }

    #[test]
    fn reads_zero_volume() {
        let mut bytes = header("type: float\ndimension: 3\nsizes: 4 4 4\nspace directions: (1,0,0) (0,1,0) (0,0,1)\nendian: little\nencoding: raw\nspace origin: (0,0,0)\n");
        bytes.extend(std::iter::repeat_n(0u8, 64 * 4));
        let v = read_nrrd(Cursor::new(bytes)).unwrap();
        assert_eq!(v.dims(), [4, 4, 4]);
        assert_eq!(v.data().len(), 64);
        assert!(v.data().iter().all(|&x| x == 0.0));
        assert_eq!(v.spacing(), [1.0; 3]);
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let mut bytes = header("type: float\ndimension: 3\nsizes: 10 10 10\nencoding: raw\nendian: little\n");
        bytes.extend(std::iter::repeat_n(0u8, 999 * 4));
        match read_nrrd(Cursor::new(bytes)) {
            Err(Error::Io(e)) => assert_eq!(e.kind(), io::ErrorKind::UnexpectedEof),
            other => panic!("expected truncated-data error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_fields_name_the_offender() {
        let cases = [
            ("type: float\ndimension: 3\nsizes: 1 1 1\nencoding: gzip\n", "encoding"),
            ("type: double\ndimension: 3\nsizes: 1 1 1\nencoding: raw\n", "type"),
            ("type: float\ndimension: 2\nsizes: 1 1\nencoding: raw\n", "sizes"),
            ("type: float\ndimension: 4\nsizes: 1 1 1\nencoding: raw\n", "dimension"),
            (
                "type: float\ndimension: 3\nsizes: 1 1 1\nencoding: raw\nendian: big\n",
                "endian",
            ),
            (
                "type: float\ndimension: 3\nsizes: 1 1 1\nencoding: raw\ndata file: x.raw\n",
                "data file",
            ),
        ];
        for (fields, expected) in cases {
            match read_nrrd(Cursor::new(header(fields))) {
                Err(Error::Format { field, .. }) => assert_eq!(field, expected, "{fields}"),
                other => panic!("expected format error for {expected}, got {other:?}"),
            }
        }
    }

    #[test]
    fn reads_int16_and_uint16() {
        let mut bytes = header("type: short\ndimension: 3\nsizes: 2 1 1\nencoding: raw\nendian: little\n");
        bytes.extend_from_slice(&(-5i16).to_le_bytes());
        bytes.extend_from_slice(&300i16.to_le_bytes());
        let v = read_nrrd(Cursor::new(bytes)).unwrap();
        assert_eq!(v.data(), &[-5.0, 300.0]);

        let mut bytes = header("type: uint16\ndimension: 3\nsizes: 1 1 2\nencoding: raw\nendian: little\n");
        bytes.extend_from_slice(&65535u16.to_le_bytes());
        bytes.extend_from_slice(&7u16.to_le_bytes());
        let v = read_nrrd(Cursor::new(bytes)).unwrap();
        assert_eq!(v.data(), &[65535.0, 7.0]);
    }

    #[test]
    fn write_read_roundtrip_is_exact() {
        let rot = *nalgebra::Rotation3::from_euler_angles(0.1, 0.2, -0.4).matrix();
        let data: Vec<f32> = (0..60).map(|i| (i as f32).sin() * 1e3 + 0.1).collect();
        let v = Volume3D::new([3, 4, 5], [0.5, 0.5, 1.0], Vec3::new(-12.5, 3.25, 7.0), rot, data).unwrap();
        let mut buf = Vec::new();
        write_nrrd(&v, &mut buf).unwrap();
        let back = read_nrrd(Cursor::new(buf)).unwrap();
        assert_eq!(back.dims(), v.dims());
        assert_eq!(
            back.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        for a in 0..3 {
            assert!((back.spacing()[a] - v.spacing()[a]).abs() < 1e-12);
        }
        assert!((back.directions() - v.directions()).abs().max() < 1e-12);
        assert_eq!(back.origin(), v.origin());
    }
}
