//! Scene manifests: loading image stacks with their labels, and writing them
//! back out so synthetic and captured scenes share one on-disk format.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::integrate;
use crate::labels::{check_rects, rasterize_labels, LabelMask, Rect};
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Forest,
    Open,
    Synthetic,
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Forest => "forest",
            SceneKind::Open => "open",
            SceneKind::Synthetic => "synthetic",
        })
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forest" => Ok(SceneKind::Forest),
            "open" => Ok(SceneKind::Open),
            "synthetic" => Ok(SceneKind::Synthetic),
            _ => Err(Error::UnknownToken {
                token: s.to_string(),
                expected: "forest|open|synthetic",
            }),
        }
    }
}

/// How 8/16-bit thermal rasters are mapped to `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalNormalization {
    /// Divide by the container maximum (255 or 65535).
    #[default]
    FullRange,
    /// Stretch the scene's thermal min..max to 0..1, shared across all views.
    SceneMinMax,
}

/// A stack of focal-plane aligned views plus their target labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub kind: SceneKind,
    /// 3-channel RGB views.
    pub single_views: Vec<ImageTensor>,
    /// Single-channel thermal views; empty or one per RGB view.
    pub thermal_views: Vec<ImageTensor>,
    pub labels: Vec<Rect>,
}

impl Scene {
    /// Validates the stack invariants and builds the scene.
    pub fn new(
        id: impl Into<String>,
        kind: SceneKind,
        single_views: Vec<ImageTensor>,
        thermal_views: Vec<ImageTensor>,
        labels: Vec<Rect>,
    ) -> Result<Self> {
        let first = single_views.first().ok_or(Error::EmptyScene)?;
        let (height, width) = (first.height(), first.width());
        for (i, v) in single_views.iter().enumerate() {
            if v.channels() != 3 {
                return Err(Error::ChannelCount {
                    expected: 3,
                    found: v.channels(),
                });
            }
            check_dims(&format!("views[{i}].rgb"), v, height, width)?;
        }
        if !thermal_views.is_empty() && thermal_views.len() != single_views.len() {
            return Err(Error::InvalidArgument(format!(
                "{} thermal views for {} rgb views",
                thermal_views.len(),
                single_views.len()
            )));
        }
        for (i, t) in thermal_views.iter().enumerate() {
            if t.channels() != 1 {
                return Err(Error::ChannelCount {
                    expected: 1,
                    found: t.channels(),
                });
            }
            check_dims(&format!("views[{i}].thermal"), t, height, width)?;
        }
        check_rects(&labels, height, width)?;
        Ok(Self {
            id: id.into(),
            kind,
            single_views,
            thermal_views,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.single_views[0].height()
    }

    pub fn width(&self) -> usize {
        self.single_views[0].width()
    }

    pub fn has_thermal(&self) -> bool {
        !self.thermal_views.is_empty()
    }

    /// Index of the view used as the "single image" baseline.
    pub fn middle_index(&self) -> usize {
        self.single_views.len() / 2
    }

    pub fn integral_rgb(&self) -> ImageTensor {
        integrate(&self.single_views).expect("scene invariants guarantee a non-empty aligned stack")
    }

    pub fn integral_thermal(&self) -> Option<ImageTensor> {
        if self.thermal_views.is_empty() {
            None
        } else {
            Some(integrate(&self.thermal_views).expect("scene invariants guarantee an aligned stack"))
        }
    }

    pub fn label_mask(&self) -> LabelMask {
        rasterize_labels(&self.labels, self.height(), self.width()).expect("scene labels are validated on construction")
    }
}

fn check_dims(entry: &str, img: &ImageTensor, height: usize, width: usize) -> Result<()> {
    if img.height() != height || img.width() != width {
        return Err(Error::DimensionMismatch {
            entry: entry.to_string(),
            expected_height: height,
            expected_width: width,
            height: img.height(),
            width: img.width(),
        });
    }
    Ok(())
}

/// On-disk scene description. Raster paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub kind: SceneKind,
    pub views: Vec<ManifestView>,
    #[serde(default)]
    pub labels: Vec<Rect>,
    #[serde(default)]
    pub thermal_normalization: ThermalNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub rgb: PathBuf,
    #[serde(default)]
    pub thermal: Option<PathBuf>,
}

/// Reads a JSON manifest and every raster it references.
pub fn load_scene(manifest_path: impl AsRef<Path>) -> Result<Scene> {
    let manifest_path = manifest_path.as_ref();
    if !manifest_path.exists() {
        return Err(Error::MissingFile {
            path: manifest_path.to_path_buf(),
        });
    }
    let text = fs::read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if manifest.views.is_empty() {
        return Err(Error::EmptyScene);
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let with_thermal = manifest.views.iter().filter(|v| v.thermal.is_some()).count();
    if with_thermal != 0 && with_thermal != manifest.views.len() {
        return Err(Error::Manifest {
            path: manifest_path.to_path_buf(),
            reason: format!(
                "{with_thermal} of {} views have thermal rasters; need all or none",
                manifest.views.len()
            ),
        });
    }

    let mut single_views = Vec::with_capacity(manifest.views.len());
    let mut thermal_raw = Vec::new();
    for view in &manifest.views {
        single_views.push(read_rgb(&base.join(&view.rgb))?);
        if let Some(t) = &view.thermal {
            thermal_raw.push(read_gray(&base.join(t))?);
        }
    }
    let mut thermal_views: Vec<ImageTensor> = thermal_raw.into_iter().map(|(img, _)| img).collect();
    if manifest.thermal_normalization == ThermalNormalization::SceneMinMax {
        stretch_min_max(&mut thermal_views);
    }
    Scene::new(manifest.id, manifest.kind, single_views, thermal_views, manifest.labels)
}

fn open_raster(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    image::open(path).map_err(|e| Error::Raster {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn read_rgb(path: &Path) -> Result<ImageTensor> {
    let img = open_raster(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageRgb8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageRgba8(_) => img.to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageRgb16(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().flat_map(|v| [v as f64 / 255.0; 3]).collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .flat_map(|v| [v as f64 / 65535.0; 3])
            .collect(),
        other => {
            return Err(Error::Raster {
                path: path.to_path_buf(),
                reason: format!("unsupported pixel format {:?}", other.color()),
            })
        }
    };
    ImageTensor::new(h, w, 3, data)
}

fn read_gray(path: &Path) -> Result<(ImageTensor, u32)> {
    let img = open_raster(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, depth): (Vec<f64>, u32) = match img {
        DynamicImage::ImageLuma8(buf) => (buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(), 8),
        DynamicImage::ImageLuma16(buf) => (buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(), 16),
        other => {
            return Err(Error::Raster {
                path: path.to_path_buf(),
                reason: format!("thermal raster must be 8/16-bit grayscale, got {:?}", other.color()),
            })
        }
    };
    Ok((ImageTensor::new(h, w, 1, data)?, depth))
}

fn stretch_min_max(views: &mut [ImageTensor]) {
    let (lo, hi) = views
        .iter()
        .flat_map(|v| v.data().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    for v in views.iter_mut() {
        for s in v.data_mut() {
            *s = if span > 0.0 { (*s - lo) / span } else { 0.0 };
        }
    }
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Writes the scene as 8-bit RGB and 16-bit thermal PNGs plus `manifest.json`
/// inside `dir`, returning the manifest path.
pub fn write_scene(scene: &Scene, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (h, w) = (scene.height() as u32, scene.width() as u32);
    let mut views = Vec::with_capacity(scene.single_views.len());
    for (i, rgb) in scene.single_views.iter().enumerate() {
        let rgb_name = PathBuf::from(format!("view_{i:03}_rgb.png"));
        let raw: Vec<u8> = rgb.data().iter().map(|&v| quantize(v, 255.0) as u8).collect();
        let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(w, h, raw).expect("sized buffer");
        save(&DynamicImage::ImageRgb8(buf), &dir.join(&rgb_name))?;

        let thermal = match scene.thermal_views.get(i) {
            Some(t) => {
                let name = PathBuf::from(format!("view_{i:03}_thermal.png"));
                let raw: Vec<u16> = t.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect();
                let buf: ImageBuffer<Luma<u16>, _> = ImageBuffer::from_raw(w, h, raw).expect("sized buffer");
                save(&DynamicImage::ImageLuma16(buf), &dir.join(&name))?;
                Some(name)
            }
            None => None,
        };
        views.push(ManifestView { rgb: rgb_name, thermal });
    }
    let manifest = Manifest {
        id: scene.id.clone(),
        kind: scene.kind,
        views,
        labels: scene.labels.clone(),
        thermal_normalization: ThermalNormalization::FullRange,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json)?;
    Ok(path)
}

fn save(img: &DynamicImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Raster {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(h: usize, w: usize, c: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, c, |y, x, k| ((y * w + x + k) % 256) as f64 / 255.0)
    }

    #[test]
    fn scene_requires_views() {
        let err = Scene::new("s", SceneKind::Open, vec![], vec![], vec![]).unwrap_err();
        assert!(matches!(err, Error::EmptyScene));
    }

    #[test]
    fn scene_rejects_mismatched_views() {
        let err = Scene::new(
            "s",
            SceneKind::Open,
            vec![gradient(4, 4, 3), gradient(4, 5, 3)],
            vec![],
            vec![],
        )
        .unwrap_err();
        match err {
            Error::DimensionMismatch { entry, .. } => assert_eq!(entry, "views[1].rgb"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn write_then_load_round_trips_8_bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let scene = Scene::new(
            "rt",
            SceneKind::Forest,
            vec![gradient(6, 5, 3), gradient(6, 5, 3)],
            vec![gradient(6, 5, 1), gradient(6, 5, 1)],
            vec![Rect::new(1, 1, 2, 3)],
        )
        .unwrap();
        let path = write_scene(&scene, dir.path()).unwrap();
        let loaded = load_scene(&path).unwrap();
        assert_eq!(loaded.id, "rt");
        assert_eq!(loaded.kind, SceneKind::Forest);
        assert_eq!(loaded.labels, scene.labels);
        // Already-normalized 8-bit values survive the trip exactly.
        for (a, b) in loaded.single_views.iter().zip(&scene.single_views) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        for (a, b) in loaded.thermal_views.iter().zip(&scene.thermal_views) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 0.5 / 65535.0 + 1e-12);
            }
        }
        // Loading again is idempotent.
        assert_eq!(load_scene(&path).unwrap(), loaded);
    }

    #[test]
    fn scene_min_max_stretches_thermal() {
        let mut views = vec![
            ImageTensor::new(1, 2, 1, vec![0.2, 0.4]).unwrap(),
            ImageTensor::new(1, 2, 1, vec![0.3, 0.6]).unwrap(),
        ];
        stretch_min_max(&mut views);
        assert!((views[0].data()[0] - 0.0).abs() < 1e-12);
        assert!((views[1].data()[1] - 1.0).abs() < 1e-12);
        assert!((views[0].data()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn manifest_errors_name_the_entry() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = r#"{"id":"x","kind":"open","views":[]}"#;
        let p = dir.path().join("m.json");
        fs::write(&p, manifest).unwrap();
        assert!(matches!(load_scene(&p).unwrap_err(), Error::EmptyScene));

        let manifest = r#"{"id":"x","kind":"open","views":[{"rgb":"nope.png","thermal":null}]}"#;
        fs::write(&p, manifest).unwrap();
        match load_scene(&p).unwrap_err() {
            Error::MissingFile { path } => assert!(path.ends_with("nope.png")),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            load_scene(dir.path().join("absent.json")).unwrap_err(),
            Error::MissingFile { .. }
        ));
    }
}
