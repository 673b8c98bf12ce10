//! Phase-portrait sampling for planar subsystems: seed-grid
//! trajectories, Newton-located stationary points and eigenvector-shot
//! separatrices.

use num::complex::Complex64;

use super::{integrate, DynamicsError, IntegrateOptions, Trajectory};
use crate::classify::VectorFieldSpec;
use crate::expr::{JetPoint, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPoint {
    /// Coordinates in the two active variables.
    pub location: [f64; 2],
    pub eigenvalues: [Complex64; 2],
}

#[derive(Debug, Clone)]
pub struct Portrait {
    pub trajectories: Vec<Trajectory>,
    pub stationary: Vec<StationaryPoint>,
    /// Jet-coordinate slots of the two active variables.
    pub slots: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct PortraitOptions {
    /// `(xmin, xmax, ymin, ymax)` in the two active coordinates.
    pub window: (f64, f64, f64, f64),
    /// Seed grid resolution per axis.
    pub seeds: usize,
    pub tol: f64,
    pub tmax: f64,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        PortraitOptions {
            window: (-1.0, 1.0, -1.0, 1.0),
            seeds: 5,
            tol: 1e-9,
            tmax: 5.0,
        }
    }
}

fn slot(v: Var) -> usize {
    match v {
        Var::X => 0,
        Var::U(k) => k as usize + 1,
    }
}

fn embed(slots: [usize; 2], s: [f64; 2]) -> JetPoint<f64> {
    let mut coords = vec![0.0; slots[0].max(slots[1]) + 1];
    coords[slots[0]] = s[0];
    coords[slots[1]] = s[1];
    JetPoint::new(coords)
}

fn eval2(field: &VectorFieldSpec, slots: [usize; 2], s: [f64; 2]) -> Option<[f64; 2]> {
    let v = field.eval_at::<f64>(&embed(slots, s)).ok()?;
    Some([v[0], v[1]])
}

fn jac2(field: &VectorFieldSpec, slots: [usize; 2], s: [f64; 2]) -> Option<[[f64; 2]; 2]> {
    let m = field.jacobian::<f64>(&embed(slots, s)).ok()?;
    Some([[*m.get(0, 0), *m.get(0, 1)], [*m.get(1, 0), *m.get(1, 1)]])
}

fn eig2(j: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [
            Complex64::new(0.5 * (tr + s), 0.0),
            Complex64::new(0.5 * (tr - s), 0.0),
        ]
    } else {
        let s = 0.5 * (-disc).sqrt();
        [Complex64::new(0.5 * tr, s), Complex64::new(0.5 * tr, -s)]
    }
}

/// Real eigenvector of a 2x2 matrix for a real eigenvalue.
fn eigvec2(j: [[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let r1 = [j[0][0] - lambda, j[0][1]];
    let r2 = [j[1][0], j[1][1] - lambda];
    let v = if r1[0].abs().max(r1[1].abs()) >= r2[0].abs().max(r2[1].abs()) {
        [-r1[1], r1[0]]
    } else {
        [-r2[1], r2[0]]
    };
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n < 1e-300 {
        [1.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

fn newton_stationary(
    field: &VectorFieldSpec,
    slots: [usize; 2],
    start: [f64; 2],
    scale: f64,
) -> Option<[f64; 2]> {
    let mut s = start;
    for _ in 0..80 {
        let f = eval2(field, slots, s)?;
        if f[0].abs().max(f[1].abs()) < 1e-13 * scale {
            return Some(s);
        }
        let j = jac2(field, slots, s)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let dy = (f[1] * j[0][0] - f[0] * j[1][0]) / det;
        s = [s[0] - dx, s[1] - dy];
        if !s[0].is_finite() || !s[1].is_finite() {
            return None;
        }
    }
    let f = eval2(field, slots, s)?;
    (f[0].abs().max(f[1].abs()) < 1e-10 * scale).then_some(s)
}

/// Samples the flow of a planar field over a window: grid seeds
/// integrated in both time directions, Newton-detected stationary
/// points, and separatrix shots along real eigenvectors.
pub fn portrait(
    field: &VectorFieldSpec,
    opts: &PortraitOptions,
) -> Result<Portrait, DynamicsError> {
    assert_eq!(field.dim(), 2, "portrait needs a planar field");
    let slots = [slot(field.vars[0]), slot(field.vars[1])];
    let (x0, x1, y0, y1) = opts.window;
    let scale = 1.0 + x0.abs().max(x1.abs()).max(y0.abs()).max(y1.abs());

    // stationary points from a Newton sweep over the seed grid
    let n = opts.seeds.max(2);
    let mut stationary: Vec<StationaryPoint> = Vec::new();
    let margin = 1e-6 * scale;
    for i in 0..=n {
        for j in 0..=n {
            let seed = [
                x0 + (x1 - x0) * i as f64 / n as f64,
                y0 + (y1 - y0) * j as f64 / n as f64,
            ];
            let Some(p) = newton_stationary(field, slots, seed, scale) else {
                continue;
            };
            if p[0] < x0 - margin || p[0] > x1 + margin || p[1] < y0 - margin || p[1] > y1 + margin
            {
                continue;
            }
            if stationary
                .iter()
                .any(|s| (s.location[0] - p[0]).hypot(s.location[1] - p[1]) < 1e-5 * scale)
            {
                continue;
            }
            let Some(jm) = jac2(field, slots, p) else { continue };
            stationary.push(StationaryPoint {
                location: p,
                eigenvalues: eig2(jm),
            });
        }
    }

    let mut trajectories = Vec::new();
    let mut run = |start: [f64; 2], tmax: f64| {
        let o = IntegrateOptions {
            tmax,
            tol: opts.tol,
            x_window: if slots.contains(&0) {
                Some((x0 - 0.1 * scale, x1 + 0.1 * scale))
            } else {
                None
            },
            ..IntegrateOptions::default()
        };
        if let Ok(t) = integrate(field, &embed(slots, start), &o) {
            trajectories.push(t);
        }
    };

    // separatrix shots: offset along each real eigenvector, integrated
    // in the direction the eigenvalue expands
    let eps = 1e-6 * scale;
    for sp in stationary.clone() {
        let jm = match jac2(field, slots, sp.location) {
            Some(j) => j,
            None => continue,
        };
        for ev in sp.eigenvalues {
            if ev.im.abs() > 1e-9 || ev.re.abs() < 1e-9 {
                continue;
            }
            let v = eigvec2(jm, ev.re);
            let dir = if ev.re > 0.0 { opts.tmax } else { -opts.tmax };
            for side in [1.0, -1.0] {
                run(
                    [
                        sp.location[0] + side * eps * v[0],
                        sp.location[1] + side * eps * v[1],
                    ],
                    dir,
                );
            }
        }
    }

    for i in 0..n {
        for j in 0..n {
            let seed = [
                x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64,
                y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64,
            ];
            run(seed, opts.tmax);
            run(seed, -opts.tmax);
        }
    }

    Ok(Portrait {
        trajectories,
        stationary,
        slots,
    })
}
