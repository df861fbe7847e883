//! Stanford PLY meshes.
//!
//! Vertices carry `double` coordinates, `float` red/green/blue albedo and an
//! optional `float` quality used for error maps. The reader accepts ASCII and
//! both binary byte orders, any scalar property types, polygon faces (fan
//! triangulated) and skips elements it does not know.

use std::path::Path;

use pmvir_core::mesh::TriMesh;
use pmvir_core::Vec3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyMesh {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub albedo: Option<Vec<[f64; 3]>>,
    pub quality: Option<Vec<f64>>,
}

impl PlyMesh {
    pub fn from_mesh(mesh: &TriMesh) -> Self {
        PlyMesh {
            positions: mesh.positions.clone(),
            faces: mesh.faces().to_vec(),
            albedo: Some(mesh.albedo.clone()),
            quality: None,
        }
    }

    /// Builds a validated mesh; missing albedo defaults to white.
    pub fn into_mesh(self) -> pmvir_core::Result<TriMesh> {
        match self.albedo {
            Some(a) => TriMesh::with_albedo(self.positions, self.faces, a),
            None => TriMesh::new(self.positions, self.faces),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Scalar(Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: Kind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_start: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or("header is not terminated by end_header")?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| "header is not ASCII")?
            .trim_end_matches('\r')
            .trim();
        pos += end + 1;
        if line == "end_header" {
            break;
        }
        lines.push(line.to_string());
    }
    if lines.first().map(String::as_str) != Some("ply") {
        return Err("missing ply magic".into());
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in &lines[1..] {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", fmt, _version] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLittleEndian,
                    "binary_big_endian" => Encoding::BinaryBigEndian,
                    f => return Err(format!("unknown format {f}")),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| format!("bad element count {count}"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let kind = Kind::List(
                    Scalar::parse(count).ok_or(format!("unknown type {count}"))?,
                    Scalar::parse(item).ok_or(format!("unknown type {item}"))?,
                );
                let el = elements.last_mut().ok_or("property before element")?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            ["property", ty, name] => {
                let kind = Kind::Scalar(Scalar::parse(ty).ok_or(format!("unknown type {ty}"))?);
                let el = elements.last_mut().ok_or("property before element")?;
                el.props.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            _ => return Err(format!("unrecognized header line {line:?}")),
        }
    }
    Ok(Header {
        encoding: encoding.ok_or("missing format line")?,
        elements,
        body_start: pos,
    })
}

/// Sequential value source over an ASCII or binary body.
enum Body<'a> {
    Ascii(std::str::SplitAsciiWhitespace<'a>),
    Binary { bytes: &'a [u8], pos: usize, little: bool },
}

impl Body<'_> {
    fn next(&mut self, s: Scalar) -> std::result::Result<f64, String> {
        match self {
            Body::Ascii(words) => {
                let w = words.next().ok_or("unexpected end of data")?;
                let bad = |_| format!("bad number {w:?}");
                // keep ASCII and binary reads of a float property identical
                match s {
                    Scalar::F32 => w.parse::<f32>().map(f64::from).map_err(bad),
                    _ => w.parse::<f64>().map_err(bad),
                }
            }
            Body::Binary { bytes, pos, little } => {
                let n = s.size();
                let raw = bytes.get(*pos..*pos + n).ok_or("unexpected end of data")?;
                *pos += n;
                let mut b = [0u8; 8];
                b[..n].copy_from_slice(raw);
                if !*little {
                    b[..n].reverse();
                }
                Ok(match s {
                    Scalar::I8 => b[0] as i8 as f64,
                    Scalar::U8 => b[0] as f64,
                    Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
                    Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
                    Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    Scalar::F64 => f64::from_le_bytes(b),
                })
            }
        }
    }

    fn finished(&mut self) -> bool {
        match self {
            Body::Ascii(words) => words.next().is_none(),
            Body::Binary { bytes, pos, .. } => *pos == bytes.len(),
        }
    }
}

fn list_len(v: f64) -> std::result::Result<usize, String> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(format!("bad list length {v}"))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<PlyMesh, String> {
    let header = parse_header(bytes)?;
    let data = &bytes[header.body_start..];
    let mut body = match header.encoding {
        Encoding::Ascii => Body::Ascii(std::str::from_utf8(data).map_err(|_| "ASCII body is not UTF-8")?.split_ascii_whitespace()),
        Encoding::BinaryLittleEndian => Body::Binary { bytes: data, pos: 0, little: true },
        Encoding::BinaryBigEndian => Body::Binary { bytes: data, pos: 0, little: false },
    };
    let mut mesh = PlyMesh::default();
    let mut seen_vertex = false;
    for el in &header.elements {
        match el.name.as_str() {
            "vertex" => {
                seen_vertex = true;
                let slot = |n: &str| el.props.iter().position(|p| p.name == n);
                let xyz = [slot("x"), slot("y"), slot("z")];
                if xyz.iter().any(Option::is_none) {
                    return Err("vertex element lacks x, y or z".into());
                }
                let rgb = ["red", "green", "blue"].map(|n| slot(n).or_else(|| slot(&format!("diffuse_{n}"))));
                let has_rgb = rgb.iter().all(Option::is_some);
                let quality = slot("quality");
                let mut albedo = Vec::new();
                let mut qual = Vec::new();
                let mut vals = vec![0.0; el.props.len()];
                for _ in 0..el.count {
                    for (i, p) in el.props.iter().enumerate() {
                        vals[i] = match p.kind {
                            Kind::Scalar(s) => body.next(s)?,
                            Kind::List(c, item) => {
                                for _ in 0..list_len(body.next(c)?)? {
                                    body.next(item)?;
                                }
                                0.0
                            }
                        };
                    }
                    let at = |i: Option<usize>| vals[i.expect("checked above")];
                    mesh.positions.push(Vec3::new(at(xyz[0]), at(xyz[1]), at(xyz[2])));
                    if has_rgb {
                        albedo.push(rgb.map(|i| {
                            let p = &el.props[i.expect("checked above")];
                            // 8-bit colors are display values in [0, 255]
                            match p.kind {
                                Kind::Scalar(Scalar::U8) => at(i) / 255.0,
                                _ => at(i),
                            }
                        }));
                    }
                    if quality.is_some() {
                        qual.push(at(quality));
                    }
                }
                mesh.albedo = has_rgb.then_some(albedo);
                mesh.quality = quality.map(|_| qual);
            }
            "face" => {
                let idx = el
                    .props
                    .iter()
                    .position(|p| p.name == "vertex_indices" || p.name == "vertex_index")
                    .ok_or("face element lacks vertex_indices")?;
                for _ in 0..el.count {
                    for (i, p) in el.props.iter().enumerate() {
                        match p.kind {
                            Kind::Scalar(s) => {
                                body.next(s)?;
                            }
                            Kind::List(c, item) => {
                                let n = list_len(body.next(c)?)?;
                                let mut poly = Vec::with_capacity(n);
                                for _ in 0..n {
                                    let v = body.next(item)?;
                                    if !item.is_integer() && v.fract() != 0.0 || v < 0.0 {
                                        return Err(format!("bad vertex index {v}"));
                                    }
                                    poly.push(v as usize);
                                }
                                if i == idx {
                                    if n < 3 {
                                        return Err(format!("face with {n} vertices"));
                                    }
                                    for k in 1..n - 1 {
                                        mesh.faces.push([poly[0], poly[k], poly[k + 1]]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => {
                for _ in 0..el.count {
                    for p in &el.props {
                        match p.kind {
                            Kind::Scalar(s) => {
                                body.next(s)?;
                            }
                            Kind::List(c, item) => {
                                for _ in 0..list_len(body.next(c)?)? {
                                    body.next(item)?;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if !seen_vertex {
        return Err("no vertex element".into());
    }
    if !body.finished() {
        return Err("trailing data after the last element".into());
    }
    Ok(mesh)
}

pub fn encode(mesh: &PlyMesh, encoding: Encoding) -> std::result::Result<Vec<u8>, String> {
    let n = mesh.positions.len();
    if mesh.albedo.as_ref().is_some_and(|a| a.len() != n) || mesh.quality.as_ref().is_some_and(|q| q.len() != n) {
        return Err("per-vertex attribute count differs from vertex count".into());
    }
    if let Some(f) = mesh.faces.iter().flatten().find(|&&i| i >= n || i > i32::MAX as usize) {
        return Err(format!("face index {f} out of range"));
    }
    let format = match encoding {
        Encoding::Ascii => "ascii",
        Encoding::BinaryLittleEndian => "binary_little_endian",
        Encoding::BinaryBigEndian => "binary_big_endian",
    };
    let mut h = format!("ply\nformat {format} 1.0\nelement vertex {n}\n");
    h += "property double x\nproperty double y\nproperty double z\n";
    if mesh.albedo.is_some() {
        h += "property float red\nproperty float green\nproperty float blue\n";
    }
    if mesh.quality.is_some() {
        h += "property float quality\n";
    }
    h += &format!("element face {}\nproperty list uchar int vertex_indices\nend_header\n", mesh.faces.len());
    let mut out = h.into_bytes();
    match encoding {
        Encoding::Ascii => {
            use std::fmt::Write;
            let mut s = String::new();
            for (i, p) in mesh.positions.iter().enumerate() {
                let _ = write!(s, "{:?} {:?} {:?}", p.x, p.y, p.z);
                if let Some(a) = &mesh.albedo {
                    let c = a[i].map(|v| v as f32);
                    let _ = write!(s, " {:?} {:?} {:?}", c[0], c[1], c[2]);
                }
                if let Some(q) = &mesh.quality {
                    let _ = write!(s, " {:?}", q[i] as f32);
                }
                s.push('\n');
            }
            for f in &mesh.faces {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend_from_slice(s.as_bytes());
        }
        Encoding::BinaryLittleEndian | Encoding::BinaryBigEndian => {
            let little = encoding == Encoding::BinaryLittleEndian;
            let put = |b: &mut Vec<u8>, bytes: &[u8]| {
                if little {
                    b.extend_from_slice(bytes);
                } else {
                    b.extend(bytes.iter().rev());
                }
            };
            for (i, p) in mesh.positions.iter().enumerate() {
                for v in [p.x, p.y, p.z] {
                    put(&mut out, &v.to_le_bytes());
                }
                if let Some(a) = &mesh.albedo {
                    for v in a[i] {
                        put(&mut out, &(v as f32).to_le_bytes());
                    }
                }
                if let Some(q) = &mesh.quality {
                    put(&mut out, &(q[i] as f32).to_le_bytes());
                }
            }
            for f in &mesh.faces {
                out.push(3);
                for &v in f {
                    put(&mut out, &(v as i32).to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<PlyMesh> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write(path: &Path, mesh: &PlyMesh, encoding: Encoding) -> Result<()> {
    let bytes = encode(mesh, encoding).map_err(|m| Error::format(path, m))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a mesh and validates its topology.
pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    read(path)?.into_mesh().map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_mesh(path: &Path, mesh: &TriMesh, encoding: Encoding) -> Result<()> {
    write(path, &PlyMesh::from_mesh(mesh), encoding)
}
