//! Float rasters and their PNG / PFM containers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImageKind {
    Color,
    Normal,
    Silhouette,
    Pose,
}

impl ImageKind {
    pub fn channels(self) -> usize {
        match self {
            ImageKind::Silhouette => 1,
            _ => 3,
        }
    }
}

/// Row-major `height × width × channels` float raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub kind: ImageKind,
}

impl ImagePlane {
    pub fn zeros(width: usize, height: usize, kind: ImageKind) -> Self {
        let channels = kind.channels();
        ImagePlane {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
            kind,
        }
    }

    pub fn from_data(width: usize, height: usize, kind: ImageKind, data: Vec<f64>) -> Result<Self> {
        let img = ImagePlane {
            width,
            height,
            channels: kind.channels(),
            data,
            kind,
        };
        img.check_shape()?;
        Ok(img)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 {
            return Err(Error::validation("image", "dimensions must be positive"));
        }
        if self.data.len() != self.width * self.height * self.channels {
            return Err(Error::validation(
                "image",
                format!(
                    "{} samples for {}x{}x{}",
                    self.data.len(),
                    self.width,
                    self.height,
                    self.channels
                ),
            ));
        }
        if self.channels != self.kind.channels() {
            return Err(Error::validation(
                "image",
                format!("{:?} image needs {} channels, has {}", self.kind, self.kind.channels(), self.channels),
            ));
        }
        Ok(())
    }

    /// Checks hard invariants and returns soft warnings (non-unit normals).
    pub fn validate(&self) -> Result<Vec<String>> {
        self.check_shape()?;
        let mut warnings = Vec::new();
        match self.kind {
            ImageKind::Silhouette => {
                if let Some(i) = self.data.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::validation(
                        "silhouette",
                        format!("pixel {} has non-binary value {}", i, self.data[i]),
                    ));
                }
            }
            ImageKind::Normal => {
                let bad = (0..self.width * self.height)
                    .filter(|&p| {
                        let px = &self.data[p * 3..p * 3 + 3];
                        px.iter().any(|&v| v != 0.0) && (decode_normal(px).norm() - 1.0).abs() > 1e-3
                    })
                    .count();
                if bad > 0 {
                    warnings.push(format!("{bad} foreground normal pixels are not unit length"));
                }
            }
            _ => {}
        }
        Ok(warnings)
    }

    /// Non-unit normals inside `mask` (tolerance 1e-3).
    pub fn non_unit_normals(&self, mask: &ImagePlane) -> usize {
        (0..self.width * self.height)
            .filter(|&p| mask.data[p] == 1.0 && (decode_normal(&self.data[p * 3..p * 3 + 3]).norm() - 1.0).abs() > 1e-3)
            .count()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn same_shape(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn flip_horizontal(&self) -> ImagePlane {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.pixel_mut(self.width - 1 - x, y).copy_from_slice(self.pixel(x, y));
            }
        }
        out
    }
}

/// Encoded RGB in [0,1] -> world-space vector.
#[inline]
pub fn decode_normal(rgb: &[f64]) -> Vec3 {
    Vec3::new(rgb[0] * 2.0 - 1.0, rgb[1] * 2.0 - 1.0, rgb[2] * 2.0 - 1.0)
}

#[inline]
pub fn encode_normal(n: &Vec3) -> [f64; 3] {
    [(n.x + 1.0) * 0.5, (n.y + 1.0) * 0.5, (n.z + 1.0) * 0.5]
}

fn ext(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads a PNG (8-bit, mapped to [0,1]) or PFM image and checks it against `kind`.
pub fn load_image(path: impl AsRef<Path>, kind: ImageKind) -> Result<ImagePlane> {
    let path = path.as_ref();
    let img = match ext(path).as_str() {
        "png" => load_png(path, kind)?,
        "pfm" => load_pfm(path, kind)?,
        e => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                msg: format!("extension '{e}'"),
            })
        }
    };
    for w in img.validate()? {
        log::warn!("{}: {w}", path.display());
    }
    Ok(img)
}

pub fn save_image(img: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.check_shape()?;
    match ext(path).as_str() {
        "png" => save_png(img, path),
        "pfm" => save_pfm(img, path),
        e => Err(Error::UnsupportedImage {
            path: path.into(),
            msg: format!("extension '{e}'"),
        }),
    }
}

fn mismatch(path: &Path, kind: ImageKind, channels: usize) -> Error {
    Error::UnsupportedImage {
        path: path.into(),
        msg: format!("{channels}-channel image cannot hold a {kind:?} plane"),
    }
}

fn load_png(path: &Path, kind: ImageKind) -> Result<ImagePlane> {
    let dynimg = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::UnsupportedImage {
            path: path.into(),
            msg: e.to_string(),
        })?;
    let (width, height) = (dynimg.width() as usize, dynimg.height() as usize);
    let (channels, raw): (usize, Vec<u8>) = match dynimg {
        image::DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        image::DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                msg: format!("unsupported bit depth / layout {:?}", other.color()),
            })
        }
    };
    if channels != kind.channels() {
        return Err(mismatch(path, kind, channels));
    }
    Ok(ImagePlane {
        width,
        height,
        channels,
        data: raw.into_iter().map(|b| b as f64 / 255.0).collect(),
        kind,
    })
}

fn save_png(img: &ImagePlane, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let color = match img.channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                msg: format!("{c} channels"),
            })
        }
    };
    image::save_buffer(path, &bytes, img.width as u32, img.height as u32, color).map_err(|e| Error::UnsupportedImage {
        path: path.into(),
        msg: e.to_string(),
    })
}

pub fn load_pfm(path: &Path, kind: ImageKind) -> Result<ImagePlane> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // Three whitespace-terminated header tokens after the magic, then one separator byte.
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, 1, "truncated PFM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let channels = match tokens[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        m => return Err(Error::format(path, 1, format!("bad PFM magic '{m}'"))),
    };
    let parse = |t: &str, line| -> Result<f64> { t.parse().map_err(|_| Error::format(path, line, format!("bad number '{t}'"))) };
    let width = parse(&tokens[1], 2)? as usize;
    let height = parse(&tokens[2], 2)? as usize;
    let scale = parse(&tokens[3], 3)?;
    if channels != kind.channels() {
        return Err(mismatch(path, kind, channels));
    }
    let n = width * height * channels;
    if bytes.len() < pos + n * 4 {
        return Err(Error::format(path, 4, "truncated PFM data"));
    }
    let body = &bytes[pos..];
    let mut data = vec![0.0; n];
    let row = width * channels;
    for y in 0..height {
        // PFM stores the bottom row first.
        let src = (height - 1 - y) * row;
        for i in 0..row {
            let b: [u8; 4] = body[(src + i) * 4..(src + i) * 4 + 4].try_into().unwrap();
            let v = if scale < 0.0 { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            data[y * row + i] = v as f64;
        }
    }
    Ok(ImagePlane {
        width,
        height,
        channels,
        data,
        kind,
    })
}

fn save_pfm(img: &ImagePlane, path: &Path) -> Result<()> {
    let magic = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::UnsupportedImage {
                path: path.into(),
                msg: format!("PFM holds 1 or 3 channels, not {c}"),
            })
        }
    };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for y in (0..img.height).rev() {
        for v in &img.data[y * row..(y + 1) * row] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
