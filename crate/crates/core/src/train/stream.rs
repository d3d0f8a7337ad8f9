use std::sync::mpsc::{sync_channel, TrySendError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{Classifier, LatencyStats, Prediction};
use crate::error::Result;
use crate::radar::AdcCube;

/// Depth of the producer-to-consumer hand-off queue.
pub const QUEUE_DEPTH: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct StreamReport {
    pub frames: usize,
    /// Per-frame processing time (pipeline plus inference), milliseconds.
    pub latency_ms: LatencyStats,
    /// Frames whose processing overran the frame period, plus frames the
    /// producer found the queue full for.
    pub deadline_misses: usize,
    pub queue_overflows: usize,
}

/// Replays `frames` through `classifier`, calling `on_prediction` for every
/// emitted window.
///
/// With `pacing` set, a producer thread releases one frame per period into a
/// bounded queue. A full queue is counted as a miss and the producer then
/// blocks, so the prediction sequence never depends on timing.
pub fn replay(
    classifier: &mut Classifier,
    frames: &[AdcCube],
    frame_period: Duration,
    pacing: bool,
    mut on_prediction: impl FnMut(&Prediction),
) -> Result<StreamReport> {
    let mut latencies = Vec::with_capacity(frames.len());
    let mut step = |frame: &AdcCube| -> Result<()> {
        let t = Instant::now();
        let out = classifier.push_frame(frame)?;
        latencies.push(t.elapsed().as_secs_f64() * 1e3);
        if let Some(p) = out {
            on_prediction(&p);
        }
        Ok(())
    };

    let mut overflows = 0;
    if pacing {
        let (tx, rx) = sync_channel::<&AdcCube>(QUEUE_DEPTH);
        thread::scope(|s| -> Result<()> {
            let producer = s.spawn(move || {
                let start = Instant::now();
                let mut full = 0;
                for (k, f) in frames.iter().enumerate() {
                    let due = start + frame_period * k as u32;
                    if let Some(wait) = due.checked_duration_since(Instant::now()) {
                        thread::sleep(wait);
                    }
                    match tx.try_send(f) {
                        Ok(()) => {}
                        Err(TrySendError::Full(f)) => {
                            full += 1;
                            if tx.send(f).is_err() {
                                break;
                            }
                        }
                        Err(TrySendError::Disconnected(_)) => break,
                    }
                }
                full
            });
            let mut result = Ok(());
            for f in rx.iter() {
                if let Err(e) = step(f) {
                    result = Err(e);
                    break;
                }
            }
            drop(rx);
            overflows = producer.join().expect("producer thread panicked");
            result
        })?;
    } else {
        for f in frames {
            step(f)?;
        }
    }

    let budget = frame_period.as_secs_f64() * 1e3;
    let overruns = latencies.iter().filter(|&&ms| ms > budget).count();
    Ok(StreamReport {
        frames: latencies.len(),
        latency_ms: LatencyStats::from_samples(&latencies),
        deadline_misses: overruns + overflows,
        queue_overflows: overflows,
    })
}
