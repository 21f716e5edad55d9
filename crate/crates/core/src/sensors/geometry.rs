//! Small planar and spatial helpers for the rig.

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

/// Rotation matrix for intrinsic Z-Y-X (yaw, pitch, roll) angles.
pub fn rotation_rpy(roll: f64, pitch: f64, yaw: f64) -> [[f64; 3]; 3] {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

/// `R^T (p - t)`: a vehicle-frame point expressed in the sensor frame.
pub fn to_sensor_frame(rot: &[[f64; 3]; 3], translation: &Point3, p: &Point3) -> Point3 {
    let d = [p[0] - translation[0], p[1] - translation[1], p[2] - translation[2]];
    [
        rot[0][0] * d[0] + rot[1][0] * d[1] + rot[2][0] * d[2],
        rot[0][1] * d[0] + rot[1][1] * d[1] + rot[2][1] * d[2],
        rot[0][2] * d[0] + rot[1][2] * d[1] + rot[2][2] * d[2],
    ]
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

pub fn polygon_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * acc.abs()
}

fn on_segment(p: &Point2, a: &Point2, b: &Point2) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Simple polygon: at least three vertices, non-zero area, and no two
/// non-adjacent edges touching.
pub fn is_simple_polygon(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 || poly.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return false;
    }
    if polygon_area(poly) <= 1e-12 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(&a, &b, &c, &d) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: &Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Parameter intervals `[t0, t1]` of the segment `a -> b` that lie inside the polygon.
pub fn segment_inside_intervals(a: &Point2, b: &Point2, poly: &[Point2]) -> Vec<(f64, f64)> {
    if poly.len() < 3 {
        return Vec::new();
    }
    let dir = [b[0] - a[0], b[1] - a[1]];
    let mut ts = vec![0.0, 1.0];
    let n = poly.len();
    for i in 0..n {
        let c = poly[i];
        let d = poly[(i + 1) % n];
        let e = [d[0] - c[0], d[1] - c[1]];
        let denom = dir[0] * e[1] - dir[1] * e[0];
        if denom.abs() < 1e-15 {
            continue;
        }
        let w = [c[0] - a[0], c[1] - a[1]];
        let t = (w[0] * e[1] - w[1] * e[0]) / denom;
        let u = (w[0] * dir[1] - w[1] * dir[0]) / denom;
        if (0.0..=1.0).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    ts.windows(2)
        .filter(|w| w[1] - w[0] > 1e-12)
        .filter(|w| {
            let m = 0.5 * (w[0] + w[1]);
            point_in_polygon(&[a[0] + m * dir[0], a[1] + m * dir[1]], poly)
        })
        .map(|w| (w[0], w[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point2> {
        vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]
    }

    #[test]
    fn rotation_is_orthonormal() {
        let r = rotation_rpy(0.3, -0.2, 1.1);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn yaw_only_frame_change() {
        let r = rotation_rpy(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let p = to_sensor_frame(&r, &[1.0, 0.0, 0.0], &[1.0, 3.0, 0.5]);
        assert!((p[0] - 3.0).abs() < 1e-12 && p[1].abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simple_polygons() {
        assert!(is_simple_polygon(&square()));
        let bowtie = vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]];
        assert!(!is_simple_polygon(&bowtie));
        assert!(!is_simple_polygon(&[[0.0, 0.0], [1.0, 1.0]]));
        assert!(!is_simple_polygon(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]));
    }

    #[test]
    fn inside_intervals() {
        let sq = square();
        let iv = segment_inside_intervals(&[-1.0, 1.0], &[3.0, 1.0], &sq);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 0.25).abs() < 1e-12 && (iv[0].1 - 0.75).abs() < 1e-12);
        assert!(segment_inside_intervals(&[-1.0, 3.0], &[3.0, 3.0], &sq).is_empty());
        let from_inside = segment_inside_intervals(&[1.0, 1.0], &[5.0, 1.0], &sq);
        assert_eq!(from_inside.len(), 1);
        assert_eq!(from_inside[0].0, 0.0);
        // leaving outward from an edge is not inside
        assert!(segment_inside_intervals(&[2.0, 1.0], &[5.0, 1.0], &sq).is_empty());
    }
}
