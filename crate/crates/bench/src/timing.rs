use std::time::Instant;

use msad::{detect, DetectorConfig, ImageTensor, Method, Result, ScoreMap};

use crate::plan::TimingProtocol;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs `f` `warmup` times untimed, then `repeats` times timed, returning the
/// median wall-clock in milliseconds and the last result.
pub fn time_median<T>(protocol: TimingProtocol, mut f: impl FnMut() -> T) -> (f64, T) {
    for _ in 0..protocol.warmup {
        f();
    }
    let repeats = protocol.repeats.max(1);
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let out = f();
        times.push(start.elapsed().as_secs_f64() * 1e3);
        last = Some(out);
    }
    (median(times), last.expect("at least one repeat"))
}

/// Median scoring time of `method` on an already prepared image. Only the
/// detector call is timed.
pub fn time_scoring(
    method: Method,
    image: &ImageTensor,
    cfg: &DetectorConfig,
    protocol: TimingProtocol,
) -> Result<(f64, ScoreMap)> {
    let mut runs = Vec::new();
    for _ in 0..protocol.warmup {
        detect(method, image, cfg)?;
    }
    let mut scores = None;
    for _ in 0..protocol.repeats.max(1) {
        let d = detect(method, image, cfg)?;
        runs.push(d.elapsed.as_secs_f64() * 1e3);
        scores = Some(d.scores);
    }
    Ok((median(runs), scores.expect("at least one repeat")))
}
