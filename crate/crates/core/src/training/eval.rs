use super::metrics::{path_pose_error, FrameErrors, Metrics, MetricsTable, DEFAULT_HORIZONS};
use super::synth::{Dataset, Sample, Split};
use super::trainer::Batch;
use super::TrainError;
use crate::autodiff::Graph;
use crate::body::Pose;
use crate::nets::{DistanceInputs, Model};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split: Split,
    pub table: MetricsTable,
}

/// Repeat-the-last-pose predictions scored against the future.
pub fn freeze_baseline(data: &Dataset, samples: &[&Sample], history: usize) -> Result<Vec<FrameErrors>, TrainError> {
    samples
        .iter()
        .map(|s| {
            let last = &s.motion.frames[history - 1];
            let future = &s.motion.frames[history..];
            path_pose_error(&data.skeleton, &vec![last.clone(); future.len()], future)
        })
        .collect()
}

/// Runs the trained pipeline over a split. Rows: `ours` and `ours w/gt` for
/// the full model, `motion-only` otherwise, plus the `freeze` baseline.
pub fn evaluate(model: &Model, data: &Dataset, split: Split, batch_size: usize) -> Result<EvalReport, TrainError> {
    let samples = data.split(split);
    if samples.is_empty() {
        return Err(TrainError::EmptySplit(split.name().into()));
    }
    let cfg = &model.config;
    let mut predicted = Vec::new();
    let mut with_gt = Vec::new();
    for chunk in samples.chunks(batch_size.max(1)) {
        let batch = Batch::assemble(data, chunk, cfg.history, model.is_full())?;
        let run = |gt: bool| -> Result<Vec<Vec<Pose>>, TrainError> {
            let mut g = Graph::new();
            let p = model.params.bind(&mut g, |_| false);
            let f = model.encode(&mut g, &p, batch.scene.as_ref(), &batch.history)?;
            let distances = if !model.is_full() {
                None
            } else if gt {
                Some(DistanceInputs { d: g.constant(batch.d_all.clone()), b: g.constant(batch.b_all.clone()) })
            } else {
                let (d, b) = model.predict_distances(&mut g, &p, &f, &batch.d_hist, &batch.b_hist)?;
                Some(DistanceInputs { d, b })
            };
            let poses = model.forecast(&mut g, &p, &f, batch.history.last().expect("history"), distances)?;
            (0..batch.size)
                .map(|i| poses.iter().map(|&v| Ok(Pose::from_vector(g.value(v).row(i))?)).collect())
                .collect()
        };
        let score = |sequences: Vec<Vec<Pose>>, into: &mut Vec<FrameErrors>| -> Result<(), TrainError> {
            for (s, pred) in chunk.iter().zip(sequences) {
                into.push(path_pose_error(&data.skeleton, &pred, &s.motion.frames[cfg.history..])?);
            }
            Ok(())
        };
        score(run(false)?, &mut predicted)?;
        if model.is_full() {
            score(run(true)?, &mut with_gt)?;
        }
    }
    let fps = data.config.fps;
    let horizons: Vec<usize> = DEFAULT_HORIZONS.iter().copied().filter(|&h| h <= cfg.horizon).collect();
    let mut table = MetricsTable::default();
    if model.is_full() {
        table.rows.push(("ours".into(), Metrics::aggregate(&predicted, &horizons, fps)?));
        table.rows.push(("ours w/gt".into(), Metrics::aggregate(&with_gt, &horizons, fps)?));
    } else {
        table.rows.push(("motion-only".into(), Metrics::aggregate(&predicted, &horizons, fps)?));
    }
    table.rows.push(("freeze".into(), Metrics::aggregate(&freeze_baseline(data, &samples, cfg.history)?, &horizons, fps)?));
    Ok(EvalReport { split, table })
}
