use nalgebra::Vector3;

use super::icosahedron::jessen_nodes;

/// Supporting plane of the convex hull: points `x` inside satisfy
/// `normal·x <= offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct HullFacet {
    pub nodes: [usize; 3],
    pub normal: Vector3<f64>,
    pub offset: f64,
}

/// Brute-force convex hull facets of a small point set (every triple whose
/// plane supports all points). Triangles are ordered counter-clockwise
/// seen from outside. Coplanar groups may yield overlapping triangles.
pub fn convex_hull_facets(points: &[Vector3<f64>]) -> Vec<HullFacet> {
    let n = points.len();
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-10 * scale;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let cross = (points[j] - points[i]).cross(&(points[k] - points[i]));
                if cross.norm() < 1e-12 * scale * scale {
                    continue;
                }
                let normal = cross.normalize();
                let offset = normal.dot(&points[i]);
                let (mut above, mut below) = (false, false);
                for p in points {
                    let s = normal.dot(p) - offset;
                    above |= s > tol;
                    below |= s < -tol;
                }
                match (above, below) {
                    (false, true) => out.push(HullFacet { nodes: [i, j, k], normal, offset }),
                    (true, false) => out.push(HullFacet {
                        nodes: [i, k, j],
                        normal: -normal,
                        offset: -offset,
                    }),
                    _ => {}
                }
            }
        }
    }
    out
}

/// Signed distance from `p` to the hull boundary, positive inside.
/// Exact for interior points, a lower bound on the distance outside.
pub fn point_hull_margin(p: &Vector3<f64>, facets: &[HullFacet]) -> f64 {
    facets
        .iter()
        .map(|f| f.offset - f.normal.dot(p))
        .fold(f64::INFINITY, f64::min)
}

const RIM_SAMPLES: usize = 1440;

/// Smallest rod length whose node hull contains all four propeller disks
/// with at least `clearance` margin.
///
/// Disks lie in the plane of the e_x rods, centered at the quadcopter nodes.
/// The hull margin is concave in the sample point, so the disk rim is
/// a sufficient sample set; the rim is sampled densely and L is found by
/// bisection.
pub fn min_enclosing_rod_length(prop_diameter: f64, quad_offset: f64, clearance: f64) -> f64 {
    if !(prop_diameter > 0.0) {
        return 0.0;
    }
    let radius = prop_diameter / 2.0;
    let unit = jessen_nodes(1.0);
    let facets = convex_hull_facets(&unit);
    let rim: Vec<(f64, f64)> = (0..RIM_SAMPLES)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / RIM_SAMPLES as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    // Scale-free test: at rod length L, compare in unit coordinates.
    let fits = |l: f64| {
        let r = radius / l;
        let c = clearance / l;
        [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)]
            .iter()
            .all(|&(sx, sy)| {
                let center = Vector3::new(sx * quad_offset, sy * 0.25, 0.0);
                rim.iter().all(|&(cx, cy)| {
                    let p = center + Vector3::new(r * cx, r * cy, 0.0);
                    point_hull_margin(&p, &facets) >= c
                })
            })
    };
    let mut hi = prop_diameter.max(clearance).max(1e-12);
    while !fits(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jessen_hull_has_twenty_facets() {
        let f = convex_hull_facets(&jessen_nodes(1.0));
        assert_eq!(f.len(), 20);
    }

    #[test]
    fn cube_margin() {
        let pts: Vec<_> = (0..8)
            .map(|i| {
                Vector3::new(
                    if i & 1 == 0 { -1.0 } else { 1.0 },
                    if i & 2 == 0 { -1.0 } else { 1.0 },
                    if i & 4 == 0 { -1.0 } else { 1.0 },
                )
            })
            .collect();
        let f = convex_hull_facets(&pts);
        assert_relative_eq!(point_hull_margin(&Vector3::zeros(), &f), 1.0, epsilon = 1e-12);
        assert_relative_eq!(point_hull_margin(&Vector3::new(0.5, 0.0, 0.0), &f), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn enclosing_length_scales_linearly() {
        let a = min_enclosing_rod_length(0.063, 0.25, 0.0);
        let b = min_enclosing_rod_length(0.126, 0.25, 0.0);
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-9);
        assert!(min_enclosing_rod_length(1e-9, 0.25, 0.0) < 1e-7);
    }
}
