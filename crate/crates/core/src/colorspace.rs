//! RGB to alternate color spaces, thermal stacking and flattening.
//!
//! Every output channel is affinely rescaled to `[0, 1]` so the covariance
//! based detectors see comparable channel ranges. sRGB primaries with a D65
//! white point are assumed for XYZ/LAB/LUV; YUV uses the BT.601 weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, SampleMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    Hls,
    Hsv,
    Lab,
    Luv,
    Xyz,
    Yuv,
}

impl ColorSpace {
    pub const ALL: [ColorSpace; 7] = [
        ColorSpace::Rgb,
        ColorSpace::Hls,
        ColorSpace::Hsv,
        ColorSpace::Lab,
        ColorSpace::Luv,
        ColorSpace::Xyz,
        ColorSpace::Yuv,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ColorSpace::Rgb => "rgb",
            ColorSpace::Hls => "hls",
            ColorSpace::Hsv => "hsv",
            ColorSpace::Lab => "lab",
            ColorSpace::Luv => "luv",
            ColorSpace::Xyz => "xyz",
            ColorSpace::Yuv => "yuv",
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token().to_ascii_uppercase())
    }
}

impl FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ColorSpace::ALL
            .into_iter()
            .find(|c| c.token().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownToken {
                token: s.to_string(),
                expected: "rgb|hls|hsv|lab|luv|xyz|yuv",
            })
    }
}

/// A base color space, optionally with the thermal plane as extra channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColorSpaceId {
    pub base: ColorSpace,
    pub thermal: bool,
}

impl ColorSpaceId {
    pub fn new(base: ColorSpace, thermal: bool) -> Self {
        Self { base, thermal }
    }

    /// CLI token, e.g. `hsv-t`.
    pub fn token(&self) -> String {
        if self.thermal {
            format!("{}-t", self.base.token())
        } else {
            self.base.token().to_string()
        }
    }
}

impl fmt::Display for ColorSpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.thermal {
            write!(f, "{}-T", self.base)
        } else {
            write!(f, "{}", self.base)
        }
    }
}

impl FromStr for ColorSpaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.strip_suffix("-t") {
            Some(base) => Ok(ColorSpaceId::new(base.parse()?, true)),
            None => Ok(ColorSpaceId::new(lower.parse()?, false)),
        }
    }
}

// sRGB -> XYZ (D65), IEC 61966-2-1.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn white() -> [f64; 3] {
    let mut w = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        w[i] = row.iter().sum();
    }
    w
}

const LAB_EPS: f64 = 216.0 / 24389.0; // (6/29)^3
const LAB_KAPPA_INV: f64 = 108.0 / 841.0; // 3 (6/29)^2

const AB_OFFSET: f64 = 128.0;
const AB_SPAN: f64 = 255.0;
const LUV_U_MIN: f64 = -134.0;
const LUV_U_SPAN: f64 = 354.0;
const LUV_V_MIN: f64 = -140.0;
const LUV_V_SPAN: f64 = 262.0;

const YUV_WR: f64 = 0.299;
const YUV_WB: f64 = 0.114;
const YUV_WG: f64 = 1.0 - YUV_WR - YUV_WB;
const YUV_U_MAX: f64 = 0.436;
const YUV_V_MAX: f64 = 0.615;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPS {
        t.cbrt()
    } else {
        t / LAB_KAPPA_INV + 4.0 / 29.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    if f > 6.0 / 29.0 {
        f * f * f
    } else {
        LAB_KAPPA_INV * (f - 4.0 / 29.0)
    }
}

/// Hue in `[0, 1)` with the achromatic convention hue = 0.
fn hue(r: f64, g: f64, b: f64, max: f64, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let h = if max == r {
        let h = (g - b) / delta;
        if h < 0.0 {
            h + 6.0
        } else {
            h
        }
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let h = h / 6.0;
    if h >= 1.0 {
        h - 1.0
    } else {
        h
    }
}

fn to_xyz(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut xyz = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        xyz[i] = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
    }
    xyz
}

fn from_xyz(xyz: [f64; 3]) -> [f64; 3] {
    let inv = invert3(&RGB_TO_XYZ);
    let mut lin = [0.0; 3];
    for (i, row) in inv.iter().enumerate() {
        lin[i] = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
    }
    lin.map(linear_to_srgb)
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let c = |a: usize, b: usize, c: usize, d: usize| m[a][b] * m[c][d];
    [
        [
            (c(1, 1, 2, 2) - c(1, 2, 2, 1)) / det,
            (c(0, 2, 2, 1) - c(0, 1, 2, 2)) / det,
            (c(0, 1, 1, 2) - c(0, 2, 1, 1)) / det,
        ],
        [
            (c(1, 2, 2, 0) - c(1, 0, 2, 2)) / det,
            (c(0, 0, 2, 2) - c(0, 2, 2, 0)) / det,
            (c(0, 2, 1, 0) - c(0, 0, 1, 2)) / det,
        ],
        [
            (c(1, 0, 2, 1) - c(1, 1, 2, 0)) / det,
            (c(0, 1, 2, 0) - c(0, 0, 2, 1)) / det,
            (c(0, 0, 1, 1) - c(0, 1, 1, 0)) / det,
        ],
    ]
}

fn uv_prime(xyz: [f64; 3]) -> Option<(f64, f64)> {
    let d = xyz[0] + 15.0 * xyz[1] + 3.0 * xyz[2];
    (d > 0.0).then(|| (4.0 * xyz[0] / d, 9.0 * xyz[1] / d))
}

/// Converts one RGB triple (components in `[0, 1]`) to the rescaled target space.
pub fn convert_pixel(rgb: [f64; 3], target: ColorSpace) -> [f64; 3] {
    let [r, g, b] = rgb;
    match target {
        ColorSpace::Rgb => rgb,
        ColorSpace::Hsv => {
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let delta = max - min;
            let s = if max > 0.0 { delta / max } else { 0.0 };
            [hue(r, g, b, max, delta), s, max]
        }
        ColorSpace::Hls => {
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let delta = max - min;
            let l = 0.5 * (max + min);
            let s = if delta <= 0.0 {
                0.0
            } else {
                delta / (1.0 - (2.0 * l - 1.0).abs())
            };
            [hue(r, g, b, max, delta), l, s]
        }
        ColorSpace::Xyz => {
            let w = white();
            let xyz = to_xyz(rgb);
            [xyz[0] / w[0], xyz[1] / w[1], xyz[2] / w[2]]
        }
        ColorSpace::Lab => {
            let w = white();
            let xyz = to_xyz(rgb);
            let fx = lab_f(xyz[0] / w[0]);
            let fy = lab_f(xyz[1] / w[1]);
            let fz = lab_f(xyz[2] / w[2]);
            let l = 116.0 * fy - 16.0;
            let a = 500.0 * (fx - fy);
            let bb = 200.0 * (fy - fz);
            [l / 100.0, (a + AB_OFFSET) / AB_SPAN, (bb + AB_OFFSET) / AB_SPAN]
        }
        ColorSpace::Luv => {
            let w = white();
            let xyz = to_xyz(rgb);
            let l = 116.0 * lab_f(xyz[1] / w[1]) - 16.0;
            let (un, vn) = uv_prime(w).expect("white point is non-black");
            let (u, v) = match uv_prime(xyz) {
                Some((up, vp)) => (13.0 * l * (up - un), 13.0 * l * (vp - vn)),
                None => (0.0, 0.0),
            };
            [l / 100.0, (u - LUV_U_MIN) / LUV_U_SPAN, (v - LUV_V_MIN) / LUV_V_SPAN]
        }
        ColorSpace::Yuv => {
            let y = YUV_WR * r + YUV_WG * g + YUV_WB * b;
            let u = YUV_U_MAX * (b - y) / (1.0 - YUV_WB);
            let v = YUV_V_MAX * (r - y) / (1.0 - YUV_WR);
            [
                y,
                (u + YUV_U_MAX) / (2.0 * YUV_U_MAX),
                (v + YUV_V_MAX) / (2.0 * YUV_V_MAX),
            ]
        }
    }
}

fn hue_to_rgb(h: f64, chroma: f64, m: f64) -> [f64; 3] {
    let hp = h * 6.0;
    let x = chroma * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Inverse of [`convert_pixel`].
pub fn to_rgb_pixel(value: [f64; 3], source: ColorSpace) -> [f64; 3] {
    match source {
        ColorSpace::Rgb => value,
        ColorSpace::Hsv => {
            let [h, s, v] = value;
            let chroma = v * s;
            hue_to_rgb(h, chroma, v - chroma)
        }
        ColorSpace::Hls => {
            let [h, l, s] = value;
            let chroma = (1.0 - (2.0 * l - 1.0).abs()) * s;
            hue_to_rgb(h, chroma, l - 0.5 * chroma)
        }
        ColorSpace::Xyz => {
            let w = white();
            from_xyz([value[0] * w[0], value[1] * w[1], value[2] * w[2]])
        }
        ColorSpace::Lab => {
            let w = white();
            let l = value[0] * 100.0;
            let a = value[1] * AB_SPAN - AB_OFFSET;
            let b = value[2] * AB_SPAN - AB_OFFSET;
            let fy = (l + 16.0) / 116.0;
            let fx = fy + a / 500.0;
            let fz = fy - b / 200.0;
            from_xyz([w[0] * lab_f_inv(fx), w[1] * lab_f_inv(fy), w[2] * lab_f_inv(fz)])
        }
        ColorSpace::Luv => {
            let w = white();
            let l = value[0] * 100.0;
            if l <= 0.0 {
                return from_xyz([0.0; 3]);
            }
            let u = value[1] * LUV_U_SPAN + LUV_U_MIN;
            let v = value[2] * LUV_V_SPAN + LUV_V_MIN;
            let (un, vn) = uv_prime(w).expect("white point is non-black");
            let up = u / (13.0 * l) + un;
            let vp = v / (13.0 * l) + vn;
            let y = w[1] * lab_f_inv((l + 16.0) / 116.0);
            let x = y * 9.0 * up / (4.0 * vp);
            let z = y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp);
            from_xyz([x, y, z])
        }
        ColorSpace::Yuv => {
            let y = value[0];
            let u = value[1] * 2.0 * YUV_U_MAX - YUV_U_MAX;
            let v = value[2] * 2.0 * YUV_V_MAX - YUV_V_MAX;
            let r = y + v * (1.0 - YUV_WR) / YUV_V_MAX;
            let b = y + u * (1.0 - YUV_WB) / YUV_U_MAX;
            let g = (y - YUV_WR * r - YUV_WB * b) / YUV_WG;
            [r, g, b]
        }
    }
}

fn map_pixels(image: &ImageTensor, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<ImageTensor> {
    if image.channels() != 3 {
        return Err(Error::ChannelCount {
            expected: 3,
            found: image.channels(),
        });
    }
    let data = image.pixels().flat_map(|p| f([p[0], p[1], p[2]])).collect();
    ImageTensor::new(image.height(), image.width(), 3, data)
}

/// Converts a 3-channel RGB image into `target`, rescaled to `[0, 1]`.
pub fn convert(rgb: &ImageTensor, target: ColorSpace) -> Result<ImageTensor> {
    if target == ColorSpace::Rgb && rgb.channels() == 3 {
        return Ok(rgb.clone());
    }
    map_pixels(rgb, |p| convert_pixel(p, target))
}

/// Maps a converted image back to RGB.
pub fn to_rgb(image: &ImageTensor, source: ColorSpace) -> Result<ImageTensor> {
    map_pixels(image, |p| to_rgb_pixel(p, source))
}

/// Appends a single-channel thermal plane as the last channel.
pub fn stack_thermal(color: &ImageTensor, thermal: &ImageTensor) -> Result<ImageTensor> {
    if thermal.channels() != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            found: thermal.channels(),
        });
    }
    if !color.same_dims(thermal) {
        return Err(Error::DimensionMismatch {
            entry: "thermal".into(),
            expected_height: color.height(),
            expected_width: color.width(),
            height: thermal.height(),
            width: thermal.width(),
        });
    }
    let n = color.channels();
    let mut data = Vec::with_capacity(color.pixel_count() * (n + 1));
    for (p, t) in color.pixels().zip(thermal.data()) {
        data.extend_from_slice(p);
        data.push(*t);
    }
    ImageTensor::new(color.height(), color.width(), n + 1, data)
}

/// Converts `rgb` into `space`, stacking `thermal` when the space asks for it.
pub fn prepare_input(rgb: &ImageTensor, thermal: Option<&ImageTensor>, space: ColorSpaceId) -> Result<ImageTensor> {
    let color = convert(rgb, space.base)?;
    if !space.thermal {
        return Ok(color);
    }
    let thermal = thermal
        .ok_or_else(|| Error::InvalidArgument(format!("{space} requested but the scene has no thermal views")))?;
    stack_thermal(&color, thermal)
}

/// Row `k` of the result is pixel `(k / width, k % width)`.
pub fn flatten(image: &ImageTensor) -> SampleMatrix {
    SampleMatrix::new(image.pixel_count(), image.channels(), image.data().to_vec())
        .expect("image buffer is rows x channels")
}

pub fn unflatten(samples: &SampleMatrix, height: usize, width: usize) -> Result<ImageTensor> {
    if samples.rows() != height * width {
        return Err(Error::InvalidArgument(format!(
            "{} rows cannot form a {height}x{width} image",
            samples.rows()
        )));
    }
    ImageTensor::new(height, width, samples.cols(), samples.values().to_vec())
}
