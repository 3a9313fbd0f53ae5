use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use msad::{ColorSpace, ColorSpaceId, DetectorConfig, EvalConfig, Method, Scene};
use serde::{Deserialize, Serialize};

/// Which thermal variants of each color space to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermalAxis {
    On,
    Off,
    Both,
}

impl ThermalAxis {
    pub fn flags(self) -> &'static [bool] {
        match self {
            ThermalAxis::Off => &[false],
            ThermalAxis::On => &[true],
            ThermalAxis::Both => &[false, true],
        }
    }
}

impl FromStr for ThermalAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "on" => Ok(ThermalAxis::On),
            "off" => Ok(ThermalAxis::Off),
            "both" => Ok(ThermalAxis::Both),
            _ => Err(format!("unknown thermal setting {s:?} (on|off|both)")),
        }
    }
}

/// Whether detectors see the integral image or the middle single view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Single,
    Integral,
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputKind::Single => "single",
            InputKind::Integral => "integral",
        })
    }
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(InputKind::Single),
            "integral" => Ok(InputKind::Integral),
            _ => Err(format!("unknown input kind {s:?} (single|integral)")),
        }
    }
}

/// Warm-up calls followed by timed calls whose median is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingProtocol {
    pub warmup: usize,
    pub repeats: usize,
}

impl Default for TimingProtocol {
    fn default() -> Self {
        Self { warmup: 1, repeats: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct RunPlan {
    pub scenes: Vec<Scene>,
    pub methods: Vec<Method>,
    pub colorspaces: Vec<ColorSpace>,
    pub thermal: ThermalAxis,
    pub inputs: Vec<InputKind>,
    pub detector: DetectorConfig,
    pub eval: EvalConfig,
    pub timing: TimingProtocol,
    /// Directory for per-cell PR curve CSVs, if wanted.
    pub curves_dir: Option<PathBuf>,
    /// Concurrent cells; 1 runs cells in order on the calling thread.
    pub jobs: usize,
    pub seed: u64,
}

impl RunPlan {
    pub fn new(scenes: Vec<Scene>) -> Self {
        Self {
            scenes,
            methods: Method::ALL.to_vec(),
            colorspaces: ColorSpace::ALL.to_vec(),
            thermal: ThermalAxis::Both,
            inputs: vec![InputKind::Integral],
            detector: DetectorConfig::default(),
            eval: EvalConfig::default(),
            timing: TimingProtocol::default(),
            curves_dir: None,
            jobs: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.scenes.is_empty() {
            return Err("plan has no scenes".into());
        }
        if self.methods.is_empty() || self.colorspaces.is_empty() || self.inputs.is_empty() {
            return Err("plan axes must be non-empty".into());
        }
        if self.timing.repeats == 0 {
            return Err("timing needs at least one repeat".into());
        }
        if !(self.eval.beta > 0.0) {
            return Err(format!("beta must be > 0, got {}", self.eval.beta));
        }
        self.detector.validate().map_err(|e| e.to_string())
    }

    /// Every matrix cell in a fixed order; a cell's position is its index.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for scene in 0..self.scenes.len() {
            for &input in &self.inputs {
                for &base in &self.colorspaces {
                    for &thermal in self.thermal.flags() {
                        for &method in &self.methods {
                            cells.push(Cell {
                                index: cells.len(),
                                scene,
                                input,
                                space: ColorSpaceId::new(base, thermal),
                                method,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub index: usize,
    pub scene: usize,
    pub input: InputKind,
    pub space: ColorSpaceId,
    pub method: Method,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Detector seed for a cell, fixed by the plan seed and the cell's position.
pub fn cell_seed(plan_seed: u64, index: usize) -> u64 {
    splitmix64(plan_seed ^ splitmix64(index as u64))
}
