//! Domain-colouring of `arg Σ` as binary PPM.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use shakhov::rootfind::SearchRect;
use shakhov::spectral::{ModelParams, SpectralFunction, WaveContext};

pub const MIN_SIDE: usize = 16;
pub const MAX_SIDE: usize = 8192;

#[derive(Clone, Copy, Debug)]
pub struct ArgPlotSpec {
    pub rect: SearchRect,
    pub width: usize,
    pub height: usize,
}

impl ArgPlotSpec {
    pub fn new(rect: SearchRect, width: usize, height: usize) -> Result<Self, String> {
        for (n, v) in [("width", width), ("height", height)] {
            if !(MIN_SIDE..=MAX_SIDE).contains(&v) {
                return Err(format!("{n} {v} outside [{MIN_SIDE}, {MAX_SIDE}]"));
            }
        }
        if !(rect.re_max > rect.re_min && rect.im_max > rect.im_min) {
            return Err("empty rectangle".into());
        }
        Ok(ArgPlotSpec { rect, width, height })
    }

    pub fn dx(&self) -> f64 {
        (self.rect.re_max - self.rect.re_min) / self.width as f64
    }

    pub fn dy(&self) -> f64 {
        (self.rect.im_max - self.rect.im_min) / self.height as f64
    }

    /// Centre of pixel `(col, row)`; row 0 is the top.
    pub fn pixel_center(&self, col: usize, row: usize) -> Complex64 {
        Complex64::new(
            self.rect.re_min + (col as f64 + 0.5) * self.dx(),
            self.rect.im_max - (row as f64 + 0.5) * self.dy(),
        )
    }

    /// Pixel containing `z`, if inside the rectangle.
    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let c = ((z.re - self.rect.re_min) / self.dx()).floor();
        let r = ((self.rect.im_max - z.im) / self.dy()).floor();
        (c >= 0.0 && r >= 0.0 && (c as usize) < self.width && (r as usize) < self.height)
            .then(|| (c as usize, r as usize))
    }
}

/// HSV with full saturation and value.
pub fn hue_rgb(h: f64) -> [u8; 3] {
    let h6 = (h - h.floor()) * 6.0;
    let i = h6.floor() as u32 % 6;
    let f = h6 - h6.floor();
    let (r, g, b) = match i {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    };
    [(r * 255.0_f64).round() as u8, (g * 255.0_f64).round() as u8, (b * 255.0_f64).round() as u8]
}

/// Inverse of `hue_rgb` on its image, in `[0, 1)`.
pub fn rgb_hue([r, g, b]: [u8; 3]) -> Option<f64> {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max - min <= 0.0 {
        return None;
    }
    let d = max - min;
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    Some(h / 6.0)
}

pub fn hue_of(sigma: Complex64) -> f64 {
    (sigma.arg() + PI) / (2.0 * PI)
}

/// Complete PPM file.
pub fn render_argument_plot(spec: &ArgPlotSpec, params: &ModelParams, wave: &WaveContext) -> Vec<u8> {
    let sf = SpectralFunction::new(params, wave);
    let line = params.essential_line();
    let half = 0.5 * spec.dx();
    let rows: Vec<Vec<u8>> = (0..spec.height)
        .into_par_iter()
        .map(|row| {
            let mut px = Vec::with_capacity(3 * spec.width);
            for col in 0..spec.width {
                let z = spec.pixel_center(col, row);
                let rgb = if (z.re - line).abs() < half {
                    [0, 0, 0]
                } else {
                    match sf.sigma(z) {
                        Ok(s) if s.is_finite() => hue_rgb(hue_of(s)),
                        _ => [0, 0, 0],
                    }
                };
                px.extend_from_slice(&rgb);
            }
            px
        })
        .collect();
    let mut out = format!("P6\n{} {}\n255\n", spec.width, spec.height).into_bytes();
    for r in rows {
        out.extend(r);
    }
    out
}

pub fn write_argument_plot(
    spec: &ArgPlotSpec,
    params: &ModelParams,
    wave: &WaveContext,
    path: &Path,
) -> std::io::Result<()> {
    std::fs::write(path, render_argument_plot(spec, params, wave))
}

/// Parsed binary PPM.
#[derive(Clone, Debug, PartialEq)]
pub struct Ppm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Ppm {
    pub fn rgb(&self, col: usize, row: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Parse the `P6` layout written above (single-space/newline separators,
/// maxval 255); `None` on any deviation.
pub fn parse_ppm(bytes: &[u8]) -> Option<Ppm> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
    }
    if fields[0] != "P6" || fields[3] != "255" || pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return None;
    }
    let width: usize = fields[1].parse().ok()?;
    let height: usize = fields[2].parse().ok()?;
    let pixels = bytes[pos + 1..].to_vec();
    (pixels.len() == 3 * width * height).then_some(Ppm { width, height, pixels })
}

/// Net number of hue cycles around the square ring of pixels at Chebyshev
/// distance `radius` from `(col, row)`, walked counter-clockwise in the
/// complex plane; `None` if the ring leaves the image or hits a black pixel.
pub fn hue_winding(img: &Ppm, col: usize, row: usize, radius: usize) -> Option<i64> {
    let (c, r, d) = (col as i64, row as i64, radius as i64);
    if c - d < 0 || r - d < 0 || c + d >= img.width as i64 || r + d >= img.height as i64 || d == 0 {
        return None;
    }
    // counter-clockwise with rows growing downward: right edge goes up
    let mut ring = Vec::new();
    for i in -d..d {
        ring.push((c + d, r - i));
    }
    for i in -d..d {
        ring.push((c - i, r - d));
    }
    for i in -d..d {
        ring.push((c - d, r + i));
    }
    for i in -d..d {
        ring.push((c + i, r + d));
    }
    let hues: Vec<f64> =
        ring.iter().map(|&(x, y)| rgb_hue(img.rgb(x as usize, y as usize))).collect::<Option<_>>()?;
    let mut total = 0.0;
    for i in 0..hues.len() {
        let mut dh = hues[(i + 1) % hues.len()] - hues[i];
        dh -= dh.round();
        total += dh;
    }
    Some(total.round() as i64)
}
