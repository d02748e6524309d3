use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageKind, ImagePlane};

/// Minimum texel gap between charts and between a chart and the atlas edge.
pub const GUTTER: usize = 2;

/// Texel rectangle `[x0, x1) × [y0, y1)`, rows counted from the top of the atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl ChartBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    /// Texels strictly between the two boxes along the separating axis (0 if they overlap).
    pub fn gap(&self, other: &ChartBox) -> usize {
        [
            other.x0.saturating_sub(self.x1),
            self.x0.saturating_sub(other.x1),
            other.y0.saturating_sub(self.y1),
            self.y0.saturating_sub(other.y1),
        ]
        .into_iter()
        .max()
        .unwrap()
    }

    pub fn contains_texel(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// UV rectangle `(u0, v0, u1, v1)` of the box in an atlas of `size` texels.
    pub fn uv_rect(&self, size: usize) -> (f64, f64, f64, f64) {
        let s = size as f64;
        (self.x0 as f64 / s, 1.0 - self.y1 as f64 / s, self.x1 as f64 / s, 1.0 - self.y0 as f64 / s)
    }

    pub fn contains_uv(&self, size: usize, u: f64, v: f64) -> bool {
        let (u0, v0, u1, v1) = self.uv_rect(size);
        u >= u0 && u <= u1 && v >= v0 && v <= v1
    }
}

/// Square RGB texture with per-part chart rectangles. Texel `(x, y)` covers
/// u ∈ [x/S, (x+1)/S] and v ∈ [1 − (y+1)/S, 1 − y/S].
#[derive(Debug, Clone, PartialEq)]
pub struct TextureAtlas {
    pub size: usize,
    pub channels: usize,
    pub texels: Vec<f64>,
    pub chart_boxes: Vec<ChartBox>,
}

impl TextureAtlas {
    pub fn filled(size: usize, value: f64, chart_boxes: Vec<ChartBox>) -> Self {
        TextureAtlas {
            size,
            channels: 3,
            texels: vec![value; size * size * 3],
            chart_boxes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.channels != 3 || self.texels.len() != self.size * self.size * 3 {
            return Err(Error::validation(
                "atlas",
                format!("{} texels for size {} with {} channels", self.texels.len(), self.size, self.channels),
            ));
        }
        if let Some(i) = self.texels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation("atlas", format!("texel value {} at {i} outside [0,1]", self.texels[i])));
        }
        for (i, b) in self.chart_boxes.iter().enumerate() {
            if b.x0 >= b.x1 || b.y0 >= b.y1 || b.x1 > self.size || b.y1 > self.size {
                return Err(Error::validation("atlas", format!("chart {i} box {b:?} is empty or out of range")));
            }
            for (j, o) in self.chart_boxes.iter().enumerate().skip(i + 1) {
                if b.gap(o) < GUTTER {
                    return Err(Error::validation("atlas", format!("charts {i} and {j} closer than {GUTTER} texels")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.size + x) * 3
    }

    pub fn texel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y);
        &self.texels[i..i + 3]
    }

    pub fn clamp(&mut self) {
        for t in &mut self.texels {
            *t = t.clamp(0.0, 1.0);
        }
    }

    /// Bilinear taps `(texel index, weight)` at `(u, v)`, clamped to the atlas edge.
    pub fn taps(&self, u: f64, v: f64) -> [(usize, f64); 4] {
        let s = self.size as f64;
        let x = u * s - 0.5;
        let y = (1.0 - v) * s - 0.5;
        let (xf, yf) = (x.floor(), y.floor());
        let (tx, ty) = (x - xf, y - yf);
        let last = self.size as i64 - 1;
        let cx = |i: i64| i.clamp(0, last) as usize;
        let (x0, x1) = (cx(xf as i64), cx(xf as i64 + 1));
        let (y0, y1) = (cx(yf as i64), cx(yf as i64 + 1));
        [
            (y0 * self.size + x0, (1.0 - tx) * (1.0 - ty)),
            (y0 * self.size + x1, tx * (1.0 - ty)),
            (y1 * self.size + x0, (1.0 - tx) * ty),
            (y1 * self.size + x1, tx * ty),
        ]
    }

    pub fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (t, w) in self.taps(u, v) {
            for c in 0..3 {
                out[c] += w * self.texels[t * 3 + c];
            }
        }
        out
    }

    pub fn to_image(&self) -> ImagePlane {
        ImagePlane::from_data(self.size, self.size, ImageKind::Color, self.texels.clone()).expect("atlas shape")
    }

    pub fn from_image(img: &ImagePlane, chart_boxes: Vec<ChartBox>) -> Result<Self> {
        if img.width != img.height || img.channels != 3 {
            return Err(Error::ShapeMismatch(format!(
                "atlas image must be square RGB, got {}x{}x{}",
                img.width, img.height, img.channels
            )));
        }
        let a = TextureAtlas {
            size: img.width,
            channels: 3,
            texels: img.data.clone(),
            chart_boxes,
        };
        a.validate()?;
        Ok(a)
    }

    /// Per-channel population variance over all texels.
    pub fn variance(&self) -> f64 {
        let n = (self.size * self.size) as f64;
        (0..3)
            .map(|c| {
                let mean = self.texels.iter().skip(c).step_by(3).sum::<f64>() / n;
                self.texels.iter().skip(c).step_by(3).map(|v| (v - mean).powi(2)).sum::<f64>() / n
            })
            .sum::<f64>()
            / 3.0
    }
}
