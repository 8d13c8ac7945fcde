//! PLY reader and writer for colored vertex clouds.
//!
//! Supported: `ascii 1.0` and `binary_little_endian 1.0`, a `vertex` element
//! with scalar `x`, `y`, `z` and optional `red`/`green`/`blue` (or `r`/`g`/`b`)
//! properties. Unknown scalar vertex properties are skipped. Elements declared
//! before `vertex` are skipped if they carry only scalar properties; anything
//! after the vertex block is never read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::cloud::{PointCloud, Rgb};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    // `None` marks a list property.
    ty: Option<ScalarType>,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

impl Element {
    fn row_size(&self) -> Option<usize> {
        self.properties
            .iter()
            .map(|p| p.ty.map(ScalarType::size))
            .sum()
    }
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

/// Column positions of the properties this crate understands.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
}

impl VertexLayout {
    fn resolve(vertex: &Element) -> Result<Self> {
        let find = |names: &[&str]| {
            vertex
                .properties
                .iter()
                .position(|p| names.contains(&p.name.as_str()))
        };
        let coord = |n: &str| {
            find(&[n]).ok_or_else(|| {
                Error::MalformedHeader(format!("vertex element lacks property '{n}'"))
            })
        };
        let xyz = [coord("x")?, coord("y")?, coord("z")?];
        let rgb = match (
            find(&["red", "r"]),
            find(&["green", "g"]),
            find(&["blue", "b"]),
        ) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        for &i in xyz.iter().chain(rgb.iter().flatten()) {
            if vertex.properties[i].ty.is_none() {
                return Err(Error::UnsupportedFormat(format!(
                    "list property '{}' in vertex element",
                    vertex.properties[i].name
                )));
            }
        }
        Ok(Self { xyz, rgb })
    }
}

fn read_header_line<R: BufRead>(reader: &mut R, buf: &mut Vec<u8>) -> Result<Option<String>> {
    buf.clear();
    let n = reader.read_until(b'\n', buf)?;
    if n == 0 {
        return Ok(None);
    }
    let line = std::str::from_utf8(buf)
        .map_err(|_| Error::MalformedHeader("non-UTF-8 header line".into()))?;
    Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
}

fn parse_header<R: BufRead>(reader: &mut R) -> Result<Header> {
    let mut buf = Vec::new();
    match read_header_line(reader, &mut buf)? {
        Some(l) if l.trim() == "ply" => {}
        _ => return Err(Error::MalformedHeader("missing 'ply' magic".into())),
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = read_header_line(reader, &mut buf)?
            .ok_or_else(|| Error::MalformedHeader("missing 'end_header'".into()))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] => continue,
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(Error::UnsupportedFormat(format!("version {version}")));
                }
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::UnsupportedFormat("binary_big_endian".into()))
                    }
                    other => return Err(Error::UnsupportedFormat(other.to_string())),
                });
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| {
                    Error::MalformedHeader(format!("bad count for element '{name}'"))
                })?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => {
                let el = elements.last_mut().ok_or_else(|| {
                    Error::MalformedHeader("property before any element".into())
                })?;
                el.properties.push(Property {
                    name: name.to_string(),
                    ty: None,
                });
            }
            ["property", ty, name] => {
                let ty = ScalarType::parse(ty).ok_or_else(|| {
                    Error::MalformedHeader(format!("unknown property type '{ty}'"))
                })?;
                let el = elements.last_mut().ok_or_else(|| {
                    Error::MalformedHeader("property before any element".into())
                })?;
                el.properties.push(Property {
                    name: name.to_string(),
                    ty: Some(ty),
                });
            }
            _ => return Err(Error::MalformedHeader(format!("unrecognized line '{line}'"))),
        }
    }

    let format = format.ok_or_else(|| Error::MalformedHeader("missing 'format' line".into()))?;
    Ok(Header { format, elements })
}

fn to_color(v: f64, what: &str) -> Result<u8> {
    if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::InvalidValue(format!("{what} value {v} is not an integer in 0..=255")))
    }
}

struct VertexSink {
    layout: VertexLayout,
    positions: Vec<[f32; 3]>,
    colors: Option<Vec<Rgb>>,
}

impl VertexSink {
    fn new(layout: VertexLayout, count: usize) -> Self {
        let colors = layout.rgb.map(|_| Vec::with_capacity(count));
        Self {
            layout,
            positions: Vec::with_capacity(count),
            colors,
        }
    }

    fn push(&mut self, value: impl Fn(usize) -> f64) -> Result<()> {
        let [x, y, z] = self.layout.xyz;
        self.positions
            .push([value(x) as f32, value(y) as f32, value(z) as f32]);
        if let (Some([r, g, b]), Some(colors)) = (self.layout.rgb, self.colors.as_mut()) {
            colors.push([
                to_color(value(r), "red")?,
                to_color(value(g), "green")?,
                to_color(value(b), "blue")?,
            ]);
        }
        Ok(())
    }
}

fn read_ascii_body<R: BufRead>(reader: &mut R, header: &Header) -> Result<PointCloud> {
    let mut lines = reader.lines();
    let mut next_row = || -> Result<Option<String>> {
        for line in lines.by_ref() {
            let line = line?;
            if !line.trim().is_empty() {
                return Ok(Some(line));
            }
        }
        Ok(None)
    };

    for el in &header.elements {
        if el.name != "vertex" {
            for found in 0..el.count {
                if next_row()?.is_none() {
                    return Err(Error::CountMismatch {
                        declared: el.count,
                        found,
                    });
                }
            }
            continue;
        }

        let layout = VertexLayout::resolve(el)?;
        let mut sink = VertexSink::new(layout, el.count);
        let mut values = Vec::with_capacity(el.properties.len());
        for found in 0..el.count {
            let line = next_row()?.ok_or(Error::CountMismatch {
                declared: el.count,
                found,
            })?;
            values.clear();
            for tok in line.split_whitespace().take(el.properties.len()) {
                values.push(tok.parse::<f64>().map_err(|_| {
                    Error::InvalidValue(format!("vertex {found}: cannot parse '{tok}'"))
                })?);
            }
            if values.len() < el.properties.len() {
                return Err(Error::InvalidValue(format!(
                    "vertex {found}: expected {} fields, got {}",
                    el.properties.len(),
                    values.len()
                )));
            }
            sink.push(|i| values[i])?;
        }
        return finish(sink);
    }
    Err(Error::MalformedHeader("no 'vertex' element".into()))
}

fn read_binary_body<R: Read>(reader: &mut R, header: &Header) -> Result<PointCloud> {
    for el in &header.elements {
        let row_size = el.row_size().ok_or_else(|| {
            Error::UnsupportedFormat(format!("list property in binary element '{}'", el.name))
        })?;
        if el.name != "vertex" {
            let skip = (row_size * el.count) as u64;
            let copied = std::io::copy(&mut reader.by_ref().take(skip), &mut std::io::sink())?;
            if copied < skip {
                return Err(Error::CountMismatch {
                    declared: el.count,
                    found: copied as usize / row_size.max(1),
                });
            }
            continue;
        }

        let layout = VertexLayout::resolve(el)?;
        let mut offsets = Vec::with_capacity(el.properties.len());
        let mut off = 0;
        for p in &el.properties {
            offsets.push(off);
            off += p.ty.map(ScalarType::size).unwrap_or(0);
        }
        let mut sink = VertexSink::new(layout, el.count);
        let mut row = vec![0u8; row_size];
        for found in 0..el.count {
            if let Err(e) = reader.read_exact(&mut row) {
                return Err(if e.kind() == ErrorKind::UnexpectedEof {
                    Error::CountMismatch {
                        declared: el.count,
                        found,
                    }
                } else {
                    e.into()
                });
            }
            sink.push(|i| el.properties[i].ty.unwrap().decode_le(&row[offsets[i]..]))?;
        }
        return finish(sink);
    }
    Err(Error::MalformedHeader("no 'vertex' element".into()))
}

fn finish(sink: VertexSink) -> Result<PointCloud> {
    if sink.positions.is_empty() {
        return Err(Error::EmptyCloud);
    }
    PointCloud::new(sink.positions, sink.colors)
}

/// Parses a PLY stream. Clouds without color properties load as colorless.
pub fn read_ply_from<R: BufRead>(mut reader: R) -> Result<PointCloud> {
    let header = parse_header(&mut reader)?;
    match header.format {
        PlyFormat::Ascii => read_ascii_body(&mut reader, &header),
        PlyFormat::BinaryLittleEndian => read_binary_body(&mut reader, &header),
    }
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let file = File::open(path)?;
    read_ply_from(BufReader::new(file))
}

pub fn write_ply_to<W: Write>(cloud: &PointCloud, format: PlyFormat, mut out: W) -> Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(out, "ply")?;
    writeln!(out, "format {fmt} 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(out, "property float {axis}")?;
    }
    if cloud.has_color() {
        for ch in ["red", "green", "blue"] {
            writeln!(out, "property uchar {ch}")?;
        }
    }
    writeln!(out, "end_header")?;

    let colors = cloud.colors();
    for (i, p) in cloud.positions().iter().enumerate() {
        match format {
            PlyFormat::Ascii => {
                write!(out, "{} {} {}", p[0], p[1], p[2])?;
                if let Some(c) = colors {
                    write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(out)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in p {
                    out.write_all(&v.to_le_bytes())?;
                }
                if let Some(c) = colors {
                    out.write_all(&c[i])?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
    let file = File::create(path)?;
    write_ply_to(cloud, format, BufWriter::new(file))
}
