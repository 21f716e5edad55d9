/// One emitted sample: the anchor timestamp and the measurement picked from
/// every stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub timestamp: f64,
    /// Measurement timestamp per stream, in input stream order
    pub members: Vec<f64>,
}

/// Half the period of the fastest stream, from its median spacing.
pub fn default_tolerance(streams: &[Vec<f64>]) -> Option<f64> {
    streams.iter().filter_map(|s| median_spacing(s)).reduce(f64::min).map(|p| 0.5 * p)
}

fn median_spacing(stream: &[f64]) -> Option<f64> {
    let mut t = stream.to_vec();
    t.sort_by(f64::total_cmp);
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

/// Stream with the fewest measurements; ties go to the lower index.
pub fn slowest_stream(streams: &[Vec<f64>]) -> Option<usize> {
    (0..streams.len()).min_by_key(|&i| streams[i].len())
}

/// Sample timestamps at which every stream has a measurement within
/// `tolerance`. Candidates are the anchor stream's timestamps in increasing
/// order; each measurement joins at most one sample, and the earliest unused
/// measurement inside the window is taken.
pub fn align_samples(streams: &[Vec<f64>], tolerance: f64, anchor: Option<usize>) -> Vec<f64> {
    align_samples_detailed(streams, tolerance, anchor).into_iter().map(|s| s.timestamp).collect()
}

pub fn align_samples_detailed(streams: &[Vec<f64>], tolerance: f64, anchor: Option<usize>) -> Vec<AlignedSample> {
    if streams.is_empty() || !(tolerance > 0.0) {
        return Vec::new();
    }
    let Some(anchor) = anchor.or_else(|| slowest_stream(streams)).filter(|&a| a < streams.len()) else {
        return Vec::new();
    };
    let sorted: Vec<Vec<f64>> = streams
        .iter()
        .map(|s| {
            let mut s: Vec<f64> = s.iter().copied().filter(|t| t.is_finite()).collect();
            s.sort_by(f64::total_cmp);
            s
        })
        .collect();
    // next unused index per stream; since anchors increase, used measurements
    // always form a prefix of what lies before the window
    let mut next = vec![0usize; sorted.len()];
    let mut out = Vec::new();
    for &t in &sorted[anchor] {
        let mut members = vec![0.0; sorted.len()];
        let mut picks = vec![0usize; sorted.len()];
        let mut ok = true;
        for (i, s) in sorted.iter().enumerate() {
            if i == anchor {
                continue;
            }
            let lo = s[next[i]..].partition_point(|&m| m < t - tolerance) + next[i];
            if lo < s.len() && s[lo] <= t + tolerance {
                members[i] = s[lo];
                picks[i] = lo;
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            members[anchor] = t;
            for (i, &p) in picks.iter().enumerate() {
                if i != anchor {
                    next[i] = p + 1;
                }
            }
            out.push(AlignedSample { timestamp: t, members });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticks(rate: f64, n: usize, shift: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 / rate + shift).collect()
    }

    #[test]
    fn aligned_streams_give_one_sample_per_tick() {
        let s = vec![ticks(10.0, 50, 0.0), ticks(10.0, 50, 0.0), ticks(10.0, 50, 0.0)];
        let out = align_samples(&s, 0.01, None);
        assert_eq!(out, ticks(10.0, 50, 0.0));
    }

    #[test]
    fn missing_frame_drops_that_sample() {
        let mut s = vec![ticks(10.0, 20, 0.0), ticks(10.0, 20, 0.002), ticks(20.0, 40, 0.0)];
        s[1].remove(7);
        let out = align_samples(&s, 0.01, Some(0));
        assert_eq!(out.len(), 19);
        assert!(!out.iter().any(|&t| (t - 0.7).abs() < 1e-9));
    }

    #[test]
    fn measurement_used_once() {
        // two anchors share a single partner measurement
        let s = vec![vec![0.0, 0.01], vec![0.005]];
        assert_eq!(align_samples(&s, 0.006, Some(0)), vec![0.0]);
    }

    #[test]
    fn defaults() {
        let s = vec![ticks(10.0, 10, 0.0), ticks(40.0, 40, 0.0)];
        assert_eq!(slowest_stream(&s), Some(0));
        assert!((default_tolerance(&s).unwrap() - 0.0125).abs() < 1e-12);
        assert!(align_samples(&[], 0.1, None).is_empty());
    }
}
