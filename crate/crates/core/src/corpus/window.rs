use std::ops::Range;

use super::{AffectSample, CorpusError, GazeSample, TranscriptSentence, VideoBundle};

/// Everything a video holds inside `[t0, t1)`.
#[derive(Debug, Clone)]
pub struct WindowView<'a> {
    pub t0: f64,
    pub t1: f64,
    /// Frames whose time `i / fps` lies in the window.
    pub frames: Range<usize>,
    pub audio_affect: &'a [AffectSample],
    pub gaze_affect: &'a [AffectSample],
    pub gaze: &'a [GazeSample],
    pub sentences: Vec<&'a TranscriptSentence>,
}

/// Smallest frame index `i` with `i / fps >= t`, capped at `n`.
fn first_frame_at_or_after(t: f64, fps: f64, n: usize) -> usize {
    if t <= 0.0 {
        return 0;
    }
    let mut i = (t * fps).ceil().max(0.0) as usize;
    // ceil() can land one off in either direction after the multiply.
    while i > 0 && (i - 1) as f64 / fps >= t {
        i -= 1;
    }
    while i < n && (i as f64 / fps) < t {
        i += 1;
    }
    i.min(n)
}

/// Frames of an `n`-frame series at `fps` inside `[t0, t1)`; clipped, never fails.
pub fn frame_range(t0: f64, t1: f64, fps: f64, n: usize) -> Range<usize> {
    let lo = first_frame_at_or_after(t0, fps, n);
    let hi = first_frame_at_or_after(t1, fps, n);
    lo..hi.max(lo)
}

pub fn slice_window(bundle: &VideoBundle, t0: f64, t1: f64) -> Result<WindowView<'_>, CorpusError> {
    let duration = bundle.duration();
    if !(t0.is_finite() && t1.is_finite()) || t0 < 0.0 || t0 >= t1 || t1 > duration {
        return Err(CorpusError::InvalidWindow { t0, t1, duration });
    }
    Ok(WindowView {
        t0,
        t1,
        frames: frame_range(t0, t1, bundle.fps, bundle.au.len()),
        audio_affect: bundle.audio_affect.window(t0, t1),
        gaze_affect: bundle
            .gaze_affect
            .as_ref()
            .map(|t| t.window(t0, t1))
            .unwrap_or(&[]),
        gaze: bundle.gaze.as_ref().map(|g| g.window(t0, t1)).unwrap_or(&[]),
        sentences: bundle
            .transcript
            .iter()
            .filter(|s| s.overlaps(t0, t1))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_range_is_half_open() {
        assert_eq!(frame_range(0.0, 1.0, 10.0, 100), 0..10);
        assert_eq!(frame_range(1.0, 2.0, 10.0, 100), 10..20);
        assert_eq!(frame_range(0.05, 0.1, 10.0, 100), 1..1);
        assert_eq!(frame_range(9.5, 20.0, 10.0, 100), 95..100);
    }

    #[test]
    fn frame_range_exact_at_awkward_rates() {
        let fps = 29.97;
        let n = 3000;
        for k in 0..200 {
            let t = k as f64 * 0.37;
            let r = frame_range(0.0, t, fps, n);
            for i in 0..n {
                assert_eq!(r.contains(&i), (i as f64 / fps) < t, "t={t} i={i}");
            }
        }
    }
}
