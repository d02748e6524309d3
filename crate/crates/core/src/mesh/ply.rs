use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Scalar> {
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

    fn read(self, b: &[u8], big: bool) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if big { <$t>::from_be_bytes(arr) } else { <$t>::from_le_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => rd!(i16, 2),
            Scalar::U16 => rd!(u16, 2),
            Scalar::I32 => rd!(i32, 4),
            Scalar::U32 => rd!(u32, 4),
            Scalar::F32 => rd!(f32, 4),
            Scalar::F64 => rd!(f64, 8),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

/// Value source for the body: whitespace tokens (ASCII) or a byte cursor.
enum Body<'a> {
    Ascii {
        tokens: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
    },
    Binary {
        data: &'a [u8],
        pos: usize,
        big: bool,
    },
}

impl Body<'_> {
    fn next(&mut self, ty: Scalar) -> Option<f64> {
        match self {
            Body::Ascii { tokens } => tokens.next()?.parse().ok(),
            Body::Binary { data, pos, big } => {
                let n = ty.size();
                if *pos + n > data.len() {
                    return None;
                }
                let v = ty.read(&data[*pos..], *big);
                *pos += n;
                Some(v)
            }
        }
    }
}

pub fn parse(path: &Path, bytes: &[u8]) -> Result<TriMesh> {
    let end_marker = b"end_header";
    let header_end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .ok_or_else(|| Error::format(path, 1, "missing end_header"))?;
    let mut body_start = header_end + end_marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| Error::format(path, 1, e.to_string()))?;

    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (ln, line) in header.lines().enumerate() {
        let line_no = ln + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] if line_no == 1 => {}
            _ if line_no == 1 => return Err(Error::format(path, 1, "not a PLY file")),
            ["format", fmt, _] => {
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => Encoding::BinaryBe,
                    f => return Err(Error::format(path, line_no, format!("unknown format '{f}'"))),
                })
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::format(path, line_no, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(Error::format(path, line_no, "bad list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, line_no, "property before element"))?
                    .props
                    .push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| Error::format(path, line_no, format!("bad type '{ty}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(path, line_no, "property before element"))?
                    .props
                    .push(Property::Scalar(name.to_string(), ty));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(Error::format(path, line_no, format!("unrecognized header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format(path, 2, "missing format line"))?;
    let mut body = match encoding {
        Encoding::Ascii => Body::Ascii {
            tokens: std::str::from_utf8(&bytes[body_start..])
                .map_err(|e| Error::format(path, 0, e.to_string()))?
                .split_whitespace()
                .peekable(),
        },
        e => Body::Binary {
            data: &bytes[body_start..],
            pos: 0,
            big: e == Encoding::BinaryBe,
        },
    };

    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for item in 0..el.count {
            let truncated = || Error::format(path, 0, format!("truncated data in {} {item}", el.name));
            let mut xyz = [0.0; 3];
            let mut uv = [f64::NAN; 2];
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = body.next(*ty).ok_or_else(truncated)?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            "s" | "u" | "texture_u" => uv[0] = v,
                            "t" | "v" | "texture_v" => uv[1] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = body.next(*ct).ok_or_else(truncated)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(body.next(*it).ok_or_else(truncated)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(Error::format(path, 0, format!("face {item} has {n} vertices")));
                            }
                            if idx.iter().any(|&i| i < 0.0) {
                                return Err(Error::format(path, 0, format!("face {item} has a negative index")));
                            }
                            for k in 1..n - 1 {
                                faces.push([idx[0] as u32, idx[k] as u32, idx[k + 1] as u32]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                uvs.push(uv);
            }
        }
    }

    let uvs = if !uvs.is_empty() && uvs.iter().all(|uv| uv.iter().all(|c| c.is_finite())) {
        Some(uvs)
    } else {
        None
    };
    Ok(TriMesh {
        vertices,
        faces,
        part_labels: None,
        uvs,
    })
}

pub fn write(mesh: &TriMesh) -> Vec<u8> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n",
        mesh.vertices.len()
    );
    if mesh.uvs.is_some() {
        header.push_str("property double s\nproperty double t\n");
    }
    header.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.faces.len()
    ));
    let mut out = header.into_bytes();
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(uvs) = &mesh.uvs {
            out.extend_from_slice(&uvs[i][0].to_le_bytes());
            out.extend_from_slice(&uvs[i][1].to_le_bytes());
        }
    }
    for f in &mesh.faces {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}
