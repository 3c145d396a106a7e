//! Mather's alpha and beta functions, their unit levels `H_F` and `G_F`,
//! flats and corners of beta at rational directions.
//!
//! `beta(h) = |h|_st^2 / 2`. Rational classes come from the graph engine;
//! irrational directions use the linear interpolant of the stable norm on the
//! cone spanned by two Farey neighbours. Corner detection needs one-sided
//! slopes accurate to a few 1e-3, beyond graph resolution, so it uses
//! continuous periodic minimizers with Richardson extrapolation instead.

use crate::actiongraph::ActionGraph;
use crate::error::{Error, Result};
use crate::geom::{self, V2};
use crate::minimizers::periodic_minimizer;
use crate::par;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Debug, Serialize)]
pub struct BetaEntry {
    pub z: [i64; 2],
    pub h: V2,
    pub beta: f64,
    pub left_slope: f64,
    pub right_slope: f64,
}

/// beta sampled along `G_F` at the primitive classes with `max(|p|,|q|) <= q`.
#[derive(Clone, Debug, Serialize)]
pub struct BetaTable {
    pub entries: Vec<BetaEntry>,
    pub q: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaTable {
    pub entries: Vec<(V2, f64)>,
    /// Polyline through `H_F = {alpha = 1/2}`, one vertex per direction.
    pub level: Vec<V2>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CornerReport {
    pub z: [i64; 2],
    pub q: usize,
    pub norm: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    pub corner: bool,
    /// End points of the flat `[eta-, eta+]` of `H_F` dual to `z`.
    pub flat: [V2; 2],
}

pub const CORNER_TOL: f64 = 5e-3;

/// Two primitive classes bracketing a direction, or the class itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bracket {
    Exact([i64; 2]),
    /// `h = a z1 + b z2` with `a, b >= 0`.
    Between { z1: [i64; 2], z2: [i64; 2], a: f64, b: f64 },
}

fn zf(z: [i64; 2]) -> V2 {
    [z[0] as f64, z[1] as f64]
}

/// Stern-Brocot descent to the Farey neighbours of order `q` around `h`.
pub fn farey_bracket(h: V2, q: usize) -> Bracket {
    let sx = if h[0] < 0.0 { -1 } else { 1 };
    let sy = if h[1] < 0.0 { -1 } else { 1 };
    let hp = [h[0].abs(), h[1].abs()];
    let back = |z: [i64; 2]| [sx * z[0], sy * z[1]];
    let par_tol = 1e-12 * geom::norm(hp);
    if hp[1] <= par_tol * 1e-3 {
        return Bracket::Exact(back([1, 0]));
    }
    if hp[0] <= par_tol * 1e-3 {
        return Bracket::Exact(back([0, 1]));
    }
    let (mut l, mut r) = ([1i64, 0i64], [0i64, 1i64]);
    loop {
        let m = [l[0] + r[0], l[1] + r[1]];
        if m[0].max(m[1]) as usize > q {
            break;
        }
        let c = geom::cross(zf(m), hp);
        if c.abs() <= par_tol * geom::norm(zf(m)) {
            return Bracket::Exact(back(m));
        }
        if c > 0.0 {
            l = m;
        } else {
            r = m;
        }
    }
    // hp = a l + b r
    let (lf, rf) = (zf(l), zf(r));
    let det = geom::cross(lf, rf);
    let a = geom::cross(hp, rf) / det;
    let b = geom::cross(lf, hp) / det;
    Bracket::Between { z1: back(l), z2: back(r), a, b }
}

/// Stable norm of `h` at graph resolution.
pub fn stable_norm_real(g: &ActionGraph, h: V2, q: usize) -> f64 {
    match farey_bracket(h, q) {
        Bracket::Exact(z) => geom::norm(h) / geom::norm(zf(z)) * g.stable_norm(z, 1),
        Bracket::Between { z1, z2, a, b } => a * g.stable_norm(z1, 1) + b * g.stable_norm(z2, 1),
    }
}

/// `beta(h)`; rational directions are exact at graph resolution, others use
/// Farey neighbours of order 64.
pub fn beta(g: &ActionGraph, h: V2) -> f64 {
    if geom::norm(h) == 0.0 {
        return 0.0;
    }
    let n = stable_norm_real(g, h, 64);
    0.5 * n * n
}

pub fn alpha(g: &ActionGraph, eta: V2) -> f64 {
    g.critical_alpha(eta)
}

/// The level `H_F` from one critical value per direction and homogeneity.
pub fn alpha_level(g: &ActionGraph, directions: usize) -> Result<AlphaTable> {
    if directions < 16 {
        return Err(Error::Invalid("alpha_level needs at least 16 directions".into()));
    }
    let entries: Vec<(V2, f64)> = par::map_range(directions, |i| {
        let e = geom::unit(2.0 * std::f64::consts::PI * i as f64 / directions as f64);
        (e, g.critical_alpha(e))
    });
    let level = entries.iter().map(|(e, a)| geom::scale(1.0 / (2.0 * a).sqrt(), *e)).collect();
    Ok(AlphaTable { entries, level })
}

/// Primitive classes with `max(|p|,|q|) <= q`, counterclockwise from `(1,0)`.
pub fn farey_classes(q: usize) -> Vec<[i64; 2]> {
    let q = q as i64;
    let mut v = Vec::new();
    for a in -q..=q {
        for b in -q..=q {
            if (a, b) != (0, 0) && geom::gcd(a, b) == 1 {
                v.push([a, b]);
            }
        }
    }
    let ang = |z: &[i64; 2]| (z[1] as f64).atan2(z[0] as f64).rem_euclid(2.0 * std::f64::consts::PI);
    v.sort_by(|a, b| ang(a).total_cmp(&ang(b)));
    v
}

/// The linear functional matching `n1` on `z1` and `n2` on `z2`.
fn cone_functional(z1: [i64; 2], n1: f64, z2: [i64; 2], n2: f64) -> V2 {
    let det = (z1[0] * z2[1] - z1[1] * z2[0]) as f64;
    [(n1 * z2[1] as f64 - n2 * z1[1] as f64) / det, (n2 * z1[0] as f64 - n1 * z2[0] as f64) / det]
}

/// Graph-resolution beta table along `G_F`. The slopes are secants between
/// Farey neighbours of order `q`.
pub fn beta_table(g: &ActionGraph, q: usize) -> Result<BetaTable> {
    if q < 1 {
        return Err(Error::Invalid("beta_table needs q >= 1".into()));
    }
    let zs = farey_classes(q);
    let norms: Vec<f64> = par::map_slice(&zs, |z| g.stable_norm(*z, 1));
    let n = zs.len();
    let ells: Vec<V2> = (0..n).map(|i| cone_functional(zs[i], norms[i], zs[(i + 1) % n], norms[(i + 1) % n])).collect();
    let entries = (0..n)
        .map(|i| {
            let v = geom::scale(1.0 / geom::norm(zf(zs[i])), geom::perp(zf(zs[i])));
            BetaEntry {
                z: zs[i],
                h: geom::scale(1.0 / norms[i], zf(zs[i])),
                beta: 0.5,
                left_slope: geom::dot(ells[(i + n - 1) % n], v),
                right_slope: geom::dot(ells[i], v),
            }
        })
        .collect();
    Ok(BetaTable { entries, q })
}

impl BetaTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "p,q,h1,h2,beta,left_slope,right_slope")?;
        for e in &self.entries {
            writeln!(w, "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", e.z[0], e.z[1], e.h[0], e.h[1], e.beta, e.left_slope, e.right_slope)?;
        }
        Ok(())
    }

    /// Smallest `right - left` over the table; convexity makes it `>= 0`.
    pub fn min_convexity(&self) -> f64 {
        self.entries.iter().map(|e| e.right_slope - e.left_slope).fold(f64::INFINITY, f64::min)
    }
}

impl AlphaTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "theta,eta1,eta2,alpha,r")?;
        for ((e, a), p) in self.entries.iter().zip(&self.level) {
            writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", e[1].atan2(e[0]), e[0], e[1], a, geom::norm(*p))?;
        }
        Ok(())
    }
}

/// Farey neighbours `(left, right)` of the primitive `z` with components at
/// most `q`: `det(z, right) = 1`, `det(z, left) = -1`, closest in angle.
pub fn farey_neighbours(z: [i64; 2], q: usize) -> Result<([i64; 2], [i64; 2])> {
    if geom::gcd(z[0], z[1]) != 1 {
        return Err(Error::Invalid(format!("class {z:?} is not primitive")));
    }
    let q = q as i64;
    if q < 2 * z[0].abs().max(z[1].abs()) {
        return Err(Error::Invalid("neighbour order must be at least twice the class size".into()));
    }
    // solve z0 b - z1 a = 1
    let (g, x, y) = ext_gcd(z[0], -z[1]);
    debug_assert_eq!(g.abs(), 1);
    let w0 = [y * g, x * g];
    let fit = |w0: [i64; 2]| {
        // largest k with |w0 + k z| inside the box
        let mut best = None;
        for k in -4 * q..=4 * q {
            let w = [w0[0] + k * z[0], w0[1] + k * z[1]];
            if w[0].abs().max(w[1].abs()) <= q {
                let c = geom::dot(zf(w), zf(z)) / geom::norm(zf(w));
                if best.map_or(true, |(bc, _)| c > bc) {
                    best = Some((c, w));
                }
            }
        }
        best.map(|b| b.1)
    };
    let r = fit(w0).ok_or_else(|| Error::Invalid("no right neighbour".into()))?;
    let l = fit([-w0[0], -w0[1]]).ok_or_else(|| Error::Invalid("no left neighbour".into()))?;
    Ok((l, r))
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Length of the periodic minimizer of class `z`, Richardson-extrapolated
/// from `n` and `2n` nodes with `n = nodes_per_period * max(|p|,|q|)`.
pub fn continuous_norm(g: &ActionGraph, z: [i64; 2], nodes_per_period: usize) -> Result<f64> {
    let n = nodes_per_period * z[0].abs().max(z[1].abs()) as usize;
    let a = periodic_minimizer(g.metric(), z, n.max(8), g)?;
    let b = periodic_minimizer(g.metric(), z, 2 * n.max(8), g)?;
    Ok((4.0 * b.length - a.length) / 3.0)
}

/// One-sided slopes of beta along `G_F` at `z / |z|_st`, from Farey
/// neighbours of orders `q / 2` and `q`, extrapolated to zero angle.
pub fn beta_corner(g: &ActionGraph, z: [i64; 2], q: usize) -> Result<CornerReport> {
    let nz = continuous_norm(g, z, 16)?;
    let v = geom::scale(1.0 / geom::norm(zf(z)), geom::perp(zf(z)));
    let (l1, r1) = farey_neighbours(z, q / 2)?;
    let (l2, r2) = farey_neighbours(z, q)?;
    let classes = [l1, r1, l2, r2];
    let norms = par::map_slice(&classes, |w| continuous_norm(g, *w, 16));
    let mut ells = [[0.0; 2]; 4];
    for (i, n) in norms.into_iter().enumerate() {
        ells[i] = cone_functional(z, nz, classes[i], n?);
    }
    let angle = |w: [i64; 2]| geom::cross(zf(z), zf(w)).abs().atan2(geom::dot(zf(z), zf(w)));
    // linear extrapolation of the functional in the neighbour angle
    let extrap = |e1: V2, w1: [i64; 2], e2: V2, w2: [i64; 2]| {
        let (p1, p2) = (angle(w1), angle(w2));
        [(p1 * e2[0] - p2 * e1[0]) / (p1 - p2), (p1 * e2[1] - p2 * e1[1]) / (p1 - p2)]
    };
    let el = extrap(ells[0], l1, ells[2], l2);
    let er = extrap(ells[1], r1, ells[3], r2);
    let left_slope = geom::dot(el, v);
    let right_slope = geom::dot(er, v);
    Ok(CornerReport { z, q, norm: nz, left_slope, right_slope, corner: right_slope - left_slope > CORNER_TOL, flat: [el, er] })
}

/// Covectors on `H_F` supporting the stable-norm ball at `z`, from the left
/// and from the right. They agree when beta has no corner at `z`; either one
/// calibrates the minimizers of class `z`, so `<eta, z> = |z|_st`.
pub fn support_eta(g: &ActionGraph, z: [i64; 2], q: usize) -> Result<[V2; 2]> {
    Ok(beta_corner(g, z, q)?.flat)
}

/// Angular interval of directions `eta` whose maximising graph cycle has the
/// direction of `z`, scanned at `directions` angles.
pub fn flat_interval(g: &ActionGraph, z: [i64; 2], directions: usize) -> Option<(f64, f64)> {
    let zv = zf(z);
    let hits: Vec<Option<f64>> = par::map_range(directions, |i| {
        let th = 2.0 * std::f64::consts::PI * i as f64 / directions as f64;
        let c = g.critical_cycle(geom::unit(th));
        let d = c.displacement;
        let aligned = geom::cross(d, zv).abs() <= 1e-9 * geom::norm(d) && geom::dot(d, zv) > 0.0;
        aligned.then_some(th)
    });
    let step = 2.0 * std::f64::consts::PI / directions as f64;
    let th_z = zv[1].atan2(zv[0]);
    // unwrap angles around the direction of z
    let found: Vec<f64> = hits.into_iter().flatten().map(|t| th_z + geom::wrap_angle(t - th_z)).collect();
    if found.is_empty() {
        return None;
    }
    let lo = found.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = found.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((lo - 0.5 * step, hi + 0.5 * step))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn farey_exact_and_between() {
        assert_eq!(farey_bracket([2.0, 1.0], 4), Bracket::Exact([2, 1]));
        assert_eq!(farey_bracket([-3.0, 0.0], 4), Bracket::Exact([-1, 0]));
        match farey_bracket([1.0, 0.5f64.sqrt() - 0.2], 5) {
            Bracket::Between { z1, z2, a, b } => {
                assert!(a > 0.0 && b > 0.0);
                assert_eq!((z1[0] * z2[1] - z1[1] * z2[0]).abs(), 1);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn neighbours_are_unimodular() {
        for z in [[1, 0], [1, 1], [2, 1], [-1, 3]] {
            let (l, r) = farey_neighbours(z, 8).unwrap();
            assert_eq!(z[0] * r[1] - z[1] * r[0], 1);
            assert_eq!(z[0] * l[1] - z[1] * l[0], -1);
        }
        assert_eq!(farey_neighbours([1, 0], 8).unwrap(), ([8, -1], [8, 1]));
    }

    #[test]
    fn cone_functional_matches() {
        let e = cone_functional([1, 0], 2.0, [3, 1], 5.0);
        assert!((e[0] - 2.0).abs() < 1e-15 && (3.0 * e[0] + e[1] - 5.0).abs() < 1e-14);
    }
}
