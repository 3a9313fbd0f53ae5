use std::fs;

use log::{info, warn};
use msad::colorspace::prepare_input;
use msad::metrics::{auprc, best_threshold_on_curve, pr_curve, write_curve_csv};
use msad::{ImageTensor, Scene};
use rayon::prelude::*;

use crate::plan::{cell_seed, Cell, InputKind, RunPlan};
use crate::report::EvalRecord;
use crate::timing::time_scoring;

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub cell: Cell,
    pub scene_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct MatrixResult {
    /// Successful cells in matrix order.
    pub records: Vec<EvalRecord>,
    pub failures: Vec<CellFailure>,
}

/// RGB and thermal planes a scene contributes for one input kind.
struct SceneInput {
    rgb: ImageTensor,
    thermal: Option<ImageTensor>,
}

fn scene_input(scene: &Scene, kind: InputKind) -> SceneInput {
    match kind {
        InputKind::Integral => SceneInput {
            rgb: scene.integral_rgb(),
            thermal: scene.integral_thermal(),
        },
        InputKind::Single => {
            let mid = scene.middle_index();
            SceneInput {
                rgb: scene.single_views[mid].clone(),
                thermal: scene.thermal_views.get(mid).cloned(),
            }
        }
    }
}

fn run_cell(plan: &RunPlan, scene: &Scene, input: &SceneInput, cell: &Cell) -> Result<EvalRecord, String> {
    let image = prepare_input(&input.rgb, input.thermal.as_ref(), cell.space).map_err(|e| e.to_string())?;
    let mut cfg = plan.detector.clone();
    cfg.seed = cell_seed(plan.seed, cell.index);
    let (runtime_ms, scores) = time_scoring(cell.method, &image, &cfg, plan.timing).map_err(|e| e.to_string())?;
    let curve = pr_curve(&scores, &scene.label_mask()).map_err(|e| e.to_string())?;
    let (threshold, fbeta) = best_threshold_on_curve(&curve, &plan.eval);
    if let Some(dir) = &plan.curves_dir {
        let name = format!(
            "{}_{}_{}_{}.csv",
            scene.id,
            cell.input,
            cell.method.token(),
            cell.space.token()
        );
        let file = fs::File::create(dir.join(name)).map_err(|e| e.to_string())?;
        write_curve_csv(&curve, file).map_err(|e| e.to_string())?;
    }
    Ok(EvalRecord {
        scene_id: scene.id.clone(),
        kind: scene.kind,
        input: cell.input,
        method: cell.method,
        colorspace: cell.space.base,
        thermal: cell.space.thermal,
        auprc: auprc(&curve),
        best_fbeta: fbeta,
        best_threshold: threshold,
        runtime_ms: runtime_ms.max(f64::MIN_POSITIVE),
    })
}

/// Evaluates every cell of the plan. Failing cells are collected and the run
/// continues. Results do not depend on `jobs`: each cell's detector seed comes
/// from the plan seed and the cell's index.
pub fn run_matrix(plan: &RunPlan) -> Result<MatrixResult, String> {
    plan.validate()?;
    if let Some(dir) = &plan.curves_dir {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    let pool = if plan.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(plan.jobs)
                .build()
                .map_err(|e| e.to_string())?,
        )
    } else {
        None
    };

    let cells = plan.cells();
    let mut result = MatrixResult::default();
    for (si, scene) in plan.scenes.iter().enumerate() {
        for &kind in &plan.inputs {
            let input = scene_input(scene, kind);
            let todo: Vec<&Cell> = cells.iter().filter(|c| c.scene == si && c.input == kind).collect();
            let run = |cell: &&Cell| {
                let out = run_cell(plan, scene, &input, cell);
                match &out {
                    Ok(r) => info!(
                        "{} {} {} {}: auprc {:.4} in {:.1} ms",
                        r.scene_id,
                        r.input,
                        r.method,
                        r.space_label(),
                        r.auprc,
                        r.runtime_ms
                    ),
                    Err(e) => warn!("{} cell {}: {e}", scene.id, cell.index),
                }
                out
            };
            let outcomes: Vec<_> = match &pool {
                Some(pool) => pool.install(|| todo.par_iter().map(run).collect()),
                None => todo.iter().map(run).collect(),
            };
            for (cell, out) in todo.into_iter().zip(outcomes) {
                match out {
                    Ok(r) => result.records.push(r),
                    Err(error) => result.failures.push(CellFailure {
                        cell: *cell,
                        scene_id: scene.id.clone(),
                        error,
                    }),
                }
            }
        }
    }
    Ok(result)
}
