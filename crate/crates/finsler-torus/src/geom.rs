//! Plane vectors as `[f64; 2]` and a few helpers.

pub type V2 = [f64; 2];

#[inline]
pub fn add(a: V2, b: V2) -> V2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: V2) -> V2 {
    [s * a[0], s * a[1]]
}

#[inline]
pub fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: V2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: V2, b: V2) -> f64 {
    norm(sub(a, b))
}

/// Counter-clockwise rotation by a right angle.
#[inline]
pub fn perp(a: V2) -> V2 {
    [-a[1], a[0]]
}

#[inline]
pub fn cross(a: V2, b: V2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn unit(theta: f64) -> V2 {
    [theta.cos(), theta.sin()]
}

#[inline]
pub fn lerp(a: V2, b: V2, s: f64) -> V2 {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

pub fn is_finite(a: V2) -> bool {
    a[0].is_finite() && a[1].is_finite()
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Wrap an angle difference into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = a.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r -= tau;
    }
    r
}

/// Distance between two points on the flat torus R^2 / (p1 Z x p2 Z).
pub fn torus_dist(a: V2, b: V2, period: V2) -> f64 {
    let mut d = sub(a, b);
    for k in 0..2 {
        if period[k].is_finite() {
            d[k] -= period[k] * (d[k] / period[k]).round();
        }
    }
    norm(d)
}

/// Segment-to-point distance.
pub fn seg_point_dist(a: V2, b: V2, p: V2) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    if l2 == 0.0 {
        return dist(a, p);
    }
    let s = (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0);
    dist(lerp(a, b, s), p)
}

/// Proper crossing of segments `ab` and `cd`, ignoring contacts within `tol`.
pub fn segments_cross(a: V2, b: V2, c: V2, d: V2, tol: f64) -> bool {
    let d1 = cross(sub(b, a), sub(c, a));
    let d2 = cross(sub(b, a), sub(d, a));
    let d3 = cross(sub(d, c), sub(a, c));
    let d4 = cross(sub(d, c), sub(b, c));
    let s1 = tol * norm(sub(b, a)).max(1e-300);
    let s2 = tol * norm(sub(d, c)).max(1e-300);
    ((d1 > s1 && d2 < -s1) || (d1 < -s1 && d2 > s1))
        && ((d3 > s2 && d4 < -s2) || (d3 < -s2 && d4 > s2))
}

/// Neumaier-compensated sum.
pub fn ksum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in it {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Gauss-Legendre nodes and weights on [0, 1], 8 points.
pub const GL8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        (0.5 - 0.5 * X[3], 0.5 * W[3]),
        (0.5 - 0.5 * X[2], 0.5 * W[2]),
        (0.5 - 0.5 * X[1], 0.5 * W[1]),
        (0.5 - 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[1], 0.5 * W[1]),
        (0.5 + 0.5 * X[2], 0.5 * W[2]),
        (0.5 + 0.5 * X[3], 0.5 * W[3]),
    ]
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl8_integrates_degree_15_exactly() {
        let s: f64 = GL8.iter().map(|&(x, w)| w * x.powi(15)).sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
        let w: f64 = GL8.iter().map(|&(_, w)| w).sum();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crossing_detects_x_but_not_touch() {
        assert!(segments_cross([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0], 1e-12));
        assert!(!segments_cross([0.0, 0.0], [1.0, 0.0], [0.5, 0.0], [0.5, 1.0], 1e-12));
        assert!(!segments_cross([0.0, 0.0], [1.0, 0.0], [0.0, 0.1], [1.0, 0.1], 1e-12));
    }

    #[test]
    fn gcd_and_wrap() {
        assert_eq!(gcd(-6, 4), 2);
        assert_eq!(gcd(0, 5), 5);
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
    }
}
