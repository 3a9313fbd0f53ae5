//! Seeded synthetic forest scenes.
//!
//! The ground (texture, targets, thermal signature) is identical in every view,
//! as if registered to the focal plane. A canopy layer of anti-aliased disks
//! floats above it and is shifted by a random offset per view, so averaging the
//! views defocuses the canopy while targets stay sharp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Rect;
use crate::scene::{Scene, SceneKind};
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub n_views: usize,
    /// Fraction of each view covered by canopy, in `[0, 1]`.
    pub occluder_density: f64,
    /// Largest per-view canopy shift in pixels (each axis).
    pub occluder_disparity: usize,
    pub n_targets: usize,
    /// Target rectangle width; height is 60% of it.
    pub target_size: usize,
    /// Thermal level of target pixels; the ground sits near 0.1.
    pub target_thermal_contrast: f64,
    /// Per-view sensor noise standard deviation.
    pub background_noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            n_views: 20,
            occluder_density: 0.6,
            occluder_disparity: 24,
            n_targets: 3,
            target_size: 10,
            target_thermal_contrast: 0.6,
            background_noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..=1.0).contains(&self.occluder_density) {
            return bad("occluder_density must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.target_thermal_contrast) {
            return bad("target_thermal_contrast must lie in [0, 1]");
        }
        if self.n_views == 0 {
            return bad("n_views must be at least 1");
        }
        if self.height == 0 || self.width == 0 {
            return bad("image dimensions must be positive");
        }
        if self.target_size == 0 && self.n_targets > 0 {
            return bad("target_size must be positive");
        }
        if self.target_size > self.width || self.target_height() > self.height {
            return bad("targets do not fit in the frame");
        }
        if !(self.background_noise_sigma >= 0.0) {
            return bad("background_noise_sigma must be non-negative");
        }
        Ok(())
    }

    fn target_height(&self) -> usize {
        ((self.target_size as f64 * 0.6).round() as usize).max(1)
    }
}

/// A synthetic scene plus per-view canopy coverage, for visibility analysis.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub scene: Scene,
    /// Canopy opacity in `[0, 1]` per view, row-major `height × width`.
    pub occlusion: Vec<Vec<f64>>,
}

impl SynthOutput {
    /// Fraction of labeled-target pixels whose canopy opacity is below 0.5 in view `v`.
    pub fn target_visibility(&self, v: usize) -> f64 {
        let mask = self.scene.label_mask();
        let occ = &self.occlusion[v];
        let total = mask.positive_count();
        if total == 0 {
            return 1.0;
        }
        let visible = mask.positive().iter().zip(occ).filter(|(&p, &a)| p && a < 0.5).count();
        visible as f64 / total as f64
    }

    /// Fraction of labeled-target pixels visible in at least one view, i.e.
    /// contributing target signal to the integral image.
    pub fn integral_visibility(&self) -> f64 {
        let mask = self.scene.label_mask();
        let total = mask.positive_count();
        if total == 0 {
            return 1.0;
        }
        let visible = mask
            .positive()
            .iter()
            .enumerate()
            .filter(|&(i, &p)| p && self.occlusion.iter().any(|occ| occ[i] < 0.5))
            .count();
        visible as f64 / total as f64
    }
}

const GROUND_BROWN: [f64; 3] = [0.38, 0.30, 0.20];
const GROUND_GREEN: [f64; 3] = [0.27, 0.33, 0.17];
const CANOPY_GREEN: [f64; 3] = [0.16, 0.34, 0.12];
const CANOPY_BROWN: [f64; 3] = [0.32, 0.26, 0.16];
const TARGET_BASE: [f64; 3] = [0.46, 0.33, 0.26];
const GROUND_THERMAL: f64 = 0.1;
const CANOPY_THERMAL: f64 = 0.2;

pub fn synth_scene(config: &SynthConfig) -> Result<Scene> {
    synth_scene_detailed(config).map(|o| o.scene)
}

pub fn synth_scene_detailed(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (h, w) = (config.height, config.width);

    let (ground, ground_thermal) = ground_layer(&mut rng, h, w);
    let labels = place_targets(&mut rng, config)?;
    let (ground, ground_thermal) = paint_targets(&mut rng, config, &labels, ground, ground_thermal);

    let margin = config.occluder_disparity;
    let canopy = Canopy::generate(&mut rng, h + 2 * margin, w + 2 * margin, config.occluder_density);

    let mut single_views = Vec::with_capacity(config.n_views);
    let mut thermal_views = Vec::with_capacity(config.n_views);
    let mut occlusion = Vec::with_capacity(config.n_views);
    let sigma = config.background_noise_sigma;
    for _ in 0..config.n_views {
        let dx = rng.gen_range(-(margin as i64)..=margin as i64);
        let dy = rng.gen_range(-(margin as i64)..=margin as i64);
        let mut rgb = Vec::with_capacity(h * w * 3);
        let mut thermal = Vec::with_capacity(h * w);
        let mut occ = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let cy = (y as i64 + margin as i64 + dy) as usize;
                let cx = (x as i64 + margin as i64 + dx) as usize;
                let ci = cy * canopy.width + cx;
                let a = canopy.alpha[ci];
                let gi = y * w + x;
                for c in 0..3 {
                    let v = a * canopy.color[ci * 3 + c] + (1.0 - a) * ground[gi * 3 + c];
                    rgb.push((v + sigma * gauss(&mut rng)).clamp(0.0, 1.0));
                }
                let t = if a >= 0.5 {
                    canopy.thermal[ci]
                } else {
                    ground_thermal[gi]
                };
                thermal.push((t + sigma * gauss(&mut rng)).clamp(0.0, 1.0));
                occ.push(a);
            }
        }
        single_views.push(ImageTensor::new(h, w, 3, rgb)?);
        thermal_views.push(ImageTensor::new(h, w, 1, thermal)?);
        occlusion.push(occ);
    }

    let scene = Scene::new(
        format!("synth-{}", config.seed),
        SceneKind::Synthetic,
        single_views,
        thermal_views,
        labels,
    )?;
    Ok(SynthOutput { scene, occlusion })
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Bilinearly interpolated lattice noise in `[0, 1]`.
fn value_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, cell: usize) -> Vec<f64> {
    let gh = h / cell + 2;
    let gw = w / cell + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.gen()).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f64 / cell as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let l = |yy: usize, xx: usize| lattice[yy * gw + xx];
            let top = l(y0, x0) * (1.0 - tx) + l(y0, x0 + 1) * tx;
            let bot = l(y0 + 1, x0) * (1.0 - tx) + l(y0 + 1, x0 + 1) * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

fn ground_layer(rng: &mut ChaCha8Rng, h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mix = value_noise(rng, h, w, 16);
    let shade = value_noise(rng, h, w, 5);
    let heat = value_noise(rng, h, w, 24);
    let mut rgb = Vec::with_capacity(h * w * 3);
    let mut thermal = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let m = mix[i];
        let s = 0.85 + 0.3 * shade[i];
        for c in 0..3 {
            let base = GROUND_BROWN[c] * (1.0 - m) + GROUND_GREEN[c] * m;
            rgb.push((base * s + 0.02 * gauss(rng)).clamp(0.0, 1.0));
        }
        thermal.push(GROUND_THERMAL + 0.06 * (heat[i] - 0.5));
    }
    (rgb, thermal)
}

fn place_targets(rng: &mut ChaCha8Rng, config: &SynthConfig) -> Result<Vec<Rect>> {
    let tw = config.target_size;
    let th = config.target_height();
    let mut rects: Vec<Rect> = Vec::with_capacity(config.n_targets);
    const MAX_TRIES: usize = 10_000;
    let mut tries = 0;
    while rects.len() < config.n_targets {
        if tries == MAX_TRIES {
            return Err(Error::Infeasible(format!(
                "placed {} of {} targets after {MAX_TRIES} attempts",
                rects.len(),
                config.n_targets
            )));
        }
        tries += 1;
        let x = rng.gen_range(0..=config.width - tw);
        let y = rng.gen_range(0..=config.height - th);
        let r = Rect::new(x, y, tw, th);
        // Keep a gap of one target width between targets.
        let grown = Rect::new(x.saturating_sub(tw), y.saturating_sub(tw), 3 * tw, th + 2 * tw);
        if rects.iter().all(|o| !grown.intersects(o)) {
            rects.push(r);
        }
    }
    Ok(rects)
}

fn paint_targets(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    rects: &[Rect],
    mut rgb: Vec<f64>,
    mut thermal: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let w = config.width;
    for r in rects {
        let jitter: [f64; 3] = std::array::from_fn(|_| 0.05 * (rng.gen::<f64>() - 0.5));
        let (cx, cy) = (r.x as f64 + r.w as f64 / 2.0, r.y as f64 + r.h as f64 / 2.0);
        let (rx, ry) = (r.w as f64 / 2.0, r.h as f64 / 2.0);
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                let nx = (x as f64 + 0.5 - cx) / rx;
                let ny = (y as f64 + 0.5 - cy) / ry;
                // The body is an ellipse inside its label rectangle.
                if nx * nx + ny * ny > 1.0 {
                    continue;
                }
                let i = y * w + x;
                for c in 0..3 {
                    rgb[i * 3 + c] = (TARGET_BASE[c] + jitter[c] + 0.03 * gauss(rng)).clamp(0.0, 1.0);
                }
                thermal[i] = config.target_thermal_contrast + 0.03 * gauss(rng);
            }
        }
    }
    (rgb, thermal)
}

struct Canopy {
    width: usize,
    alpha: Vec<f64>,
    color: Vec<f64>,
    thermal: Vec<f64>,
}

impl Canopy {
    fn generate(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Canopy {
        let mut alpha = vec![0.0; h * w];
        let mut color = vec![0.0; h * w * 3];
        let mut thermal = vec![GROUND_THERMAL; h * w];
        let mut covered = 0usize;
        let target = (density * (h * w) as f64).ceil() as usize;
        let r_max = (h.min(w) as f64 / 12.0).max(3.0);
        let mut disks = 0;
        while covered < target && disks < 100_000 {
            disks += 1;
            let radius = rng.gen_range(r_max * 0.4..=r_max);
            let cx = rng.gen_range(0.0..w as f64);
            let cy = rng.gen_range(0.0..h as f64);
            let mix: f64 = rng.gen::<f64>().powi(2);
            let shade = rng.gen_range(0.75..1.2);
            let c: [f64; 3] = std::array::from_fn(|k| {
                ((CANOPY_GREEN[k] * (1.0 - mix) + CANOPY_BROWN[k] * mix) * shade).clamp(0.0, 1.0)
            });
            let t = CANOPY_THERMAL + 0.05 * (rng.gen::<f64>() - 0.5);
            let y0 = (cy - radius - 1.0).floor().max(0.0) as usize;
            let y1 = ((cy + radius + 1.0).ceil() as usize).min(h);
            let x0 = (cx - radius - 1.0).floor().max(0.0) as usize;
            let x1 = ((cx + radius + 1.0).ceil() as usize).min(w);
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
                    let a = (radius + 0.5 - d).clamp(0.0, 1.0);
                    if a <= 0.0 {
                        continue;
                    }
                    let i = y * w + x;
                    let before = alpha[i];
                    let after = a + before * (1.0 - a);
                    for k in 0..3 {
                        let prev = color[i * 3 + k] * before;
                        color[i * 3 + k] = (a * c[k] + prev * (1.0 - a)) / after;
                    }
                    if a >= 0.5 {
                        thermal[i] = t;
                    }
                    if before < 0.5 && after >= 0.5 {
                        covered += 1;
                    }
                    alpha[i] = after;
                }
            }
        }
        Canopy {
            width: w,
            alpha,
            color,
            thermal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            height: 64,
            width: 64,
            n_views: 5,
            occluder_disparity: 8,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = synth_scene(&small(3)).unwrap();
        let b = synth_scene(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = synth_scene(&small(4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_and_labels() {
        let cfg = small(1);
        let s = synth_scene(&cfg).unwrap();
        assert_eq!(s.single_views.len(), 5);
        assert_eq!(s.thermal_views.len(), 5);
        assert_eq!(s.labels.len(), cfg.n_targets);
        for v in s.single_views.iter().chain(&s.thermal_views) {
            assert!(v.data().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn no_canopy_leaves_targets_visible() {
        let cfg = SynthConfig {
            occluder_density: 0.0,
            n_views: 1,
            ..small(9)
        };
        let out = synth_scene_detailed(&cfg).unwrap();
        assert!(out.occlusion[0].iter().all(|&a| a == 0.0));
        assert_eq!(out.target_visibility(0), 1.0);
        // Thermal shows the targets at their configured level.
        let mask = out.scene.label_mask();
        let t = &out.scene.thermal_views[0];
        let hot = mask
            .positive()
            .iter()
            .zip(t.data())
            .filter(|(&p, &v)| p && v > 0.4)
            .count();
        assert!(hot > 0);
    }

    #[test]
    fn canopy_density_is_reached() {
        let cfg = SynthConfig {
            occluder_density: 0.6,
            ..small(2)
        };
        let out = synth_scene_detailed(&cfg).unwrap();
        let covered: f64 =
            out.occlusion[0].iter().filter(|&&a| a >= 0.5).count() as f64 / out.occlusion[0].len() as f64;
        assert!((covered - 0.6).abs() < 0.2, "{covered}");
    }

    #[test]
    fn infeasible_placement_errors() {
        let cfg = SynthConfig {
            n_targets: 50,
            target_size: 20,
            ..small(0)
        };
        assert!(matches!(synth_scene(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn invalid_config() {
        assert!(synth_scene(&SynthConfig {
            occluder_density: 1.5,
            ..small(0)
        })
        .is_err());
        assert!(synth_scene(&SynthConfig { n_views: 0, ..small(0) }).is_err());
    }
}
