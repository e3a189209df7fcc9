use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// One constant request held for `duration_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestSegment {
    pub start_step: usize,
    pub duration_steps: usize,
    /// Relative heat-pump input fraction.
    pub value: f64,
}

impl RequestSegment {
    pub fn end_step(&self) -> usize {
        self.start_step + self.duration_steps
    }
}

/// Disjoint request segments in increasing order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RequestSchedule {
    pub segments: Vec<RequestSegment>,
}

impl RequestSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Checks ordering, disjointness, and that every segment ends by `horizon`.
    pub fn validate(&self, horizon: usize) -> Result<(), SimError> {
        let mut prev_end = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration_steps == 0 || !seg.value.is_finite() {
                return Err(SimError::InvalidSchedule(format!("segment {i} is empty or non-finite")));
            }
            if seg.start_step < prev_end {
                return Err(SimError::InvalidSchedule(format!("segment {i} overlaps its predecessor")));
            }
            if seg.end_step() > horizon {
                return Err(SimError::InvalidSchedule(format!(
                    "segment {i} ends at step {} beyond horizon {horizon}",
                    seg.end_step()
                )));
            }
            prev_end = seg.end_step();
        }
        Ok(())
    }

    /// Request value at every step of a horizon (0 outside segments).
    pub fn per_step(&self, horizon: usize) -> Vec<f64> {
        let mut out = vec![0.0; horizon];
        for seg in &self.segments {
            for r in out.iter_mut().take(seg.end_step().min(horizon)).skip(seg.start_step) {
                *r = seg.value;
            }
        }
        out
    }

    /// Shifts every segment by `offset` steps.
    pub fn shifted(&self, offset: usize) -> RequestSchedule {
        RequestSchedule {
            segments: self
                .segments
                .iter()
                .map(|s| RequestSegment { start_step: s.start_step + offset, ..*s })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignPattern {
    Alternating,
    Random,
}

/// Durations are in hours and drawn uniformly; magnitudes in input fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub request_hours: [f64; 2],
    pub free_hours: [f64; 2],
    pub magnitude: [f64; 2],
    pub signs: SignPattern,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { request_hours: [1.0, 4.0], free_hours: [4.0, 15.0], magnitude: [0.1, 0.4], signs: SignPattern::Random }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<(), String> {
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ordered(self.request_hours) || self.request_hours[0] <= 0.0 {
            return Err("request_hours must be an ordered positive range".into());
        }
        if !ordered(self.free_hours) || self.free_hours[0] <= 0.0 {
            return Err("free_hours must be an ordered positive range".into());
        }
        if !ordered(self.magnitude) || self.magnitude[0] <= 0.0 {
            return Err("magnitude must be an ordered positive range".into());
        }
        Ok(())
    }
}

/// Alternating request-free and request segments over `horizon` steps.
///
/// Each cycle starts with a request-free period, so every request is
/// preceded and followed by a recovery window. Segments that would run past
/// the horizon are dropped.
pub fn generate_training_schedule(
    seed: u64,
    horizon: usize,
    timestep: u32,
    params: &ScheduleParams,
) -> RequestSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_hour = 60.0 / f64::from(timestep.max(1));
    let draw_steps = |rng: &mut ChaCha8Rng, range: [f64; 2]| -> usize {
        let lo = (range[0] * per_hour).round() as usize;
        let hi = (range[1] * per_hour).round() as usize;
        rng.gen_range(lo..=hi.max(lo))
    };

    let mut segments = Vec::new();
    let mut cursor = 0usize;
    let mut positive = rng.gen_bool(0.5);
    loop {
        cursor += draw_steps(&mut rng, params.free_hours);
        let duration = draw_steps(&mut rng, params.request_hours).max(1);
        let magnitude = rng.gen_range(params.magnitude[0]..=params.magnitude[1]);
        positive = match params.signs {
            SignPattern::Alternating => !positive,
            SignPattern::Random => rng.gen_bool(0.5),
        };
        if cursor + duration > horizon {
            break;
        }
        segments.push(RequestSegment {
            start_step: cursor,
            duration_steps: duration,
            value: if positive { magnitude } else { -magnitude },
        });
        cursor += duration;
    }
    RequestSchedule { segments }
}
