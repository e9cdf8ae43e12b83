use super::PointCloud;

/// True iff every tracer lies strictly inside `B(center, radius)`.
pub fn containment(cloud: &PointCloud, radius: f64, center: &[f64]) -> bool {
    let r2 = radius * radius;
    cloud.points().all(|p| dist2(p, center) < r2)
}

/// Largest pairwise distance.
pub fn diameter(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            best = best.max(dist2(cloud.point(i), cloud.point(j)));
        }
    }
    best.sqrt()
}

/// Length of the polyline through the tracers in order; `closed` adds the
/// segment from the last tracer back to the first.
pub fn curve_length(cloud: &PointCloud, closed: bool) -> f64 {
    let n = cloud.len();
    let mut total: f64 = (1..n).map(|i| cloud.distance(i - 1, i)).sum();
    if closed && n > 2 {
        total += cloud.distance(n - 1, 0);
    }
    total
}

/// Winding number of the closed planar polygon around the origin is non-zero.
pub fn encloses_origin(cloud: &PointCloud) -> bool {
    debug_assert_eq!(cloud.dim(), 2);
    let n = cloud.len();
    let mut winding = 0i64;
    for i in 0..n {
        let a = cloud.point(i);
        let b = cloud.point((i + 1) % n);
        let cross = a[0] * b[1] - a[1] * b[0];
        if a[1] <= 0.0 {
            if b[1] > 0.0 && cross > 0.0 {
                winding += 1;
            }
        } else if b[1] <= 0.0 && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// The segment `[a, b]` stays at distance at least `radius` from the origin.
pub fn segment_clear_of_ball(a: &[f64], b: &[f64], radius: f64) -> bool {
    let ab: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        (-a.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let closest: f64 = a.iter().zip(&ab).map(|(x, y)| (x + t * y).powi(2)).sum();
    closest >= radius * radius
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
