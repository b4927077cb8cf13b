//! Convex hulls of small 3D point sets with boundary-inclusive containment.
//!
//! Point sets whose affine hull is lower-dimensional (a point, a segment, a
//! planar polygon) are kept in that dimension instead of being inflated.

use std::collections::HashSet;

pub type Point3 = [f64; 3];

/// Points closer than this to a line or plane count as lying on it.
const FLAT_EPS: f64 = 1e-12;

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[derive(Debug, Clone, Copy)]
struct Plane {
    normal: Point3,
    offset: f64,
}

impl Plane {
    /// Unit-normal plane through `a, b, c`, or `None` if they are collinear.
    fn through(a: Point3, b: Point3, c: Point3) -> Option<Plane> {
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        if len == 0.0 {
            return None;
        }
        let normal = scale(n, 1.0 / len);
        Some(Plane { normal, offset: dot(normal, a) })
    }

    fn distance(&self, p: Point3) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Empty,
    Point(Point3),
    Segment(Point3, Point3),
    Polygon { origin: Point3, u: Point3, v: Point3, normal: Point3, ring: Vec<[f64; 2]> },
    Polytope { planes: Vec<Plane> },
}

#[derive(Debug, Clone)]
pub struct ConvexHull {
    shape: Shape,
}

fn farthest_from(points: &[Point3], f: impl Fn(Point3) -> f64) -> (usize, f64) {
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| (i, f(p)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

impl ConvexHull {
    pub fn new(points: &[Point3]) -> Self {
        if points.is_empty() {
            return ConvexHull { shape: Shape::Empty };
        }
        let p0 = points[0];
        let (i1, d1) = farthest_from(points, |p| norm(sub(p, p0)));
        if d1 <= FLAT_EPS {
            return ConvexHull { shape: Shape::Point(p0) };
        }
        let p1 = points[i1];
        let dir = scale(sub(p1, p0), 1.0 / d1);
        let (i2, d2) = farthest_from(points, |p| norm(cross(sub(p, p0), dir)));
        if d2 <= FLAT_EPS {
            let ts: Vec<f64> = points.iter().map(|&p| dot(sub(p, p0), dir)).collect();
            let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return ConvexHull { shape: Shape::Segment(add_scaled(p0, dir, lo), add_scaled(p0, dir, hi)) };
        }
        let p2 = points[i2];
        let plane = Plane::through(p0, p1, p2).expect("non-collinear by construction");
        let (i3, d3) = farthest_from(points, |p| plane.distance(p).abs());
        if d3 <= FLAT_EPS {
            return ConvexHull { shape: polygon(points, p0, dir, plane.normal) };
        }
        ConvexHull { shape: Shape::Polytope { planes: polytope(points, [0, i1, i2, i3]) } }
    }

    /// Affine dimension of the hull, or `None` when empty.
    pub fn dimension(&self) -> Option<usize> {
        match self.shape {
            Shape::Empty => None,
            Shape::Point(_) => Some(0),
            Shape::Segment(..) => Some(1),
            Shape::Polygon { .. } => Some(2),
            Shape::Polytope { .. } => Some(3),
        }
    }

    pub fn facet_count(&self) -> usize {
        match &self.shape {
            Shape::Polytope { planes } => planes.len(),
            Shape::Polygon { ring, .. } => ring.len(),
            _ => 0,
        }
    }

    /// Boundary-inclusive containment with absolute tolerance `tol`.
    pub fn contains(&self, p: Point3, tol: f64) -> bool {
        match &self.shape {
            Shape::Empty => false,
            Shape::Point(q) => norm(sub(p, *q)) <= tol,
            Shape::Segment(a, b) => {
                let ab = sub(*b, *a);
                let t = (dot(sub(p, *a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
                norm(sub(p, add_scaled(*a, ab, t))) <= tol
            }
            Shape::Polygon { origin, u, v, normal, ring } => {
                let d = sub(p, *origin);
                if dot(d, *normal).abs() > tol {
                    return false;
                }
                let q = [dot(d, *u), dot(d, *v)];
                ring.iter().zip(ring.iter().cycle().skip(1)).all(|(a, b)| {
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    // left of every counter-clockwise edge
                    (e[0] * (q[1] - a[1]) - e[1] * (q[0] - a[0])) / len >= -tol
                })
            }
            Shape::Polytope { planes } => planes.iter().all(|pl| pl.distance(p) <= tol),
        }
    }
}

fn add_scaled(a: Point3, d: Point3, t: f64) -> Point3 {
    [a[0] + d[0] * t, a[1] + d[1] * t, a[2] + d[2] * t]
}

fn polygon(points: &[Point3], origin: Point3, u: Point3, normal: Point3) -> Shape {
    let v = cross(normal, u);
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .map(|&p| {
            let d = sub(p, origin);
            [dot(d, u), dot(d, v)]
        })
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    Shape::Polygon { origin, u, v, normal, ring: monotone_chain(&pts) }
}

fn turn(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull of lexicographically sorted points.
fn monotone_chain(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if pts.len() < 3 {
        return pts.to_vec();
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    plane: Plane,
    alive: bool,
}

/// Incremental hull seeded with a non-degenerate tetrahedron.
fn polytope(points: &[Point3], seed: [usize; 4]) -> Vec<Plane> {
    let interior = scale(
        seed.iter().fold([0.0; 3], |acc, &i| [acc[0] + points[i][0], acc[1] + points[i][1], acc[2] + points[i][2]]),
        0.25,
    );
    let make_face = |a: usize, b: usize, c: usize| -> Option<Face> {
        let mut v = [a, b, c];
        let mut plane = Plane::through(points[a], points[b], points[c])?;
        if plane.distance(interior) > 0.0 {
            v.swap(1, 2);
            plane = Plane { normal: scale(plane.normal, -1.0), offset: -plane.offset };
        }
        Some(Face { v, plane, alive: true })
    };
    let [a, b, c, d] = seed;
    let mut faces: Vec<Face> =
        [(a, b, c), (a, b, d), (a, c, d), (b, c, d)].iter().filter_map(|&(x, y, z)| make_face(x, y, z)).collect();

    for (i, &p) in points.iter().enumerate() {
        if seed.contains(&i) {
            continue;
        }
        let visible: Vec<usize> =
            (0..faces.len()).filter(|&f| faces[f].alive && faces[f].plane.distance(p) > FLAT_EPS).collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for &f in &visible {
            let [x, y, z] = faces[f].v;
            edges.extend([(x, y), (y, z), (z, x)]);
            faces[f].alive = false;
        }
        let mut horizon: Vec<(usize, usize)> = edges.iter().filter(|&&(x, y)| !edges.contains(&(y, x))).copied().collect();
        horizon.sort_unstable();
        for (x, y) in horizon {
            if let Some(face) = make_face(x, y, i) {
                faces.push(face);
            }
        }
    }
    faces.into_iter().filter(|f| f.alive).map(|f| f.plane).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn cube() -> Vec<Point3> {
        let mut v = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    v.push([x, y, z]);
                }
            }
        }
        v
    }

    #[test]
    fn cube_containment() {
        let mut pts = cube();
        pts.push([0.5, 0.5, 0.5]);
        pts.push([0.2, 0.9, 0.1]);
        let h = ConvexHull::new(&pts);
        assert_eq!(h.dimension(), Some(3));
        assert!(h.contains([0.5, 0.5, 0.5], TOL));
        assert!(h.contains([1.0, 1.0, 1.0], TOL));
        assert!(h.contains([1.0, 0.5, 0.5], TOL));
        assert!(!h.contains([1.0 + 1e-6, 0.5, 0.5], TOL));
        assert!(!h.contains([-0.1, 0.5, 0.5], TOL));
        for p in &pts {
            assert!(h.contains(*p, TOL));
        }
    }

    #[test]
    fn degenerate_shapes() {
        assert_eq!(ConvexHull::new(&[]).dimension(), None);
        assert!(!ConvexHull::new(&[]).contains([0.0; 3], TOL));

        let pt = ConvexHull::new(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]);
        assert_eq!(pt.dimension(), Some(0));
        assert!(pt.contains([1.0, 2.0, 3.0], TOL));
        assert!(!pt.contains([1.0, 2.0, 3.1], TOL));

        let seg = ConvexHull::new(&[[0.0, 0.0, 0.0], [2.0, 2.0, 2.0], [1.0, 1.0, 1.0]]);
        assert_eq!(seg.dimension(), Some(1));
        assert!(seg.contains([0.5, 0.5, 0.5], TOL));
        assert!(!seg.contains([2.5, 2.5, 2.5], TOL));
        assert!(!seg.contains([0.5, 0.5, 0.6], TOL));

        let tri = ConvexHull::new(&[[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.2, 0.2, 1.0]]);
        assert_eq!(tri.dimension(), Some(2));
        assert!(tri.contains([0.25, 0.25, 1.0], TOL));
        assert!(tri.contains([0.5, 0.5, 1.0], TOL));
        assert!(!tri.contains([0.6, 0.6, 1.0], TOL));
        assert!(!tri.contains([0.25, 0.25, 1.001], TOL));
    }

    /// Brute-force oracle: p is in the hull of a full-dimensional set iff it
    /// is on the inner side of every supporting plane through three points.
    fn brute_contains(points: &[Point3], p: Point3) -> bool {
        let n = points.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let Some(pl) = Plane::through(points[i], points[j], points[k]) else { continue };
                    let ds: Vec<f64> = points.iter().map(|&q| pl.distance(q)).collect();
                    let below = ds.iter().all(|&d| d <= 1e-12);
                    let above = ds.iter().all(|&d| d >= -1e-12);
                    if below && pl.distance(p) > TOL {
                        return false;
                    }
                    if above && pl.distance(p) < -TOL {
                        return false;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let pts: Vec<Point3> = (0..12).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let h = ConvexHull::new(&pts);
            for _ in 0..200 {
                let q: Point3 = [rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2)];
                assert_eq!(h.contains(q, TOL), brute_contains(&pts, q), "{q:?}");
            }
        }
    }
}
