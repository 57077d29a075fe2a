//! Point samplers for the individual cluster shapes.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Isotropic normal spot. With `sigma_max`, each cluster draws its width
    /// uniformly from `[sigma, sigma_max]`.
    Gaussian {
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_max: Option<f64>,
    },
    /// Anisotropic normal spot with a random orientation.
    Ellipse { sigma_major: f64, aspect: f64 },
    /// Points on a circular arc of random start angle with normal radial noise.
    Arc {
        radius: f64,
        radial_sigma: f64,
        arc_span: f64,
    },
    /// Ring of triangular corners sharing the ring center as apex. Each corner
    /// is a fine cluster, the whole ring a coarse one.
    Npc {
        corner_radius: f64,
        corners: usize,
        spread_divisor: f64,
    },
}

impl Shape {
    pub fn npc() -> Self {
        Shape::Npc {
            corner_radius: 50.0,
            corners: 8,
            spread_divisor: 1.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")))
            }
        };
        match *self {
            Shape::Gaussian { sigma, sigma_max } => {
                pos("sigma", sigma)?;
                if let Some(m) = sigma_max {
                    if !(m >= sigma && m.is_finite()) {
                        return Err(Error::InvalidConfig(format!("sigma_max {m} below sigma {sigma}")));
                    }
                }
                Ok(())
            }
            Shape::Ellipse { sigma_major, aspect } => {
                pos("sigma_major", sigma_major)?;
                pos("aspect", aspect)
            }
            Shape::Arc {
                radius,
                radial_sigma,
                arc_span,
            } => {
                pos("radius", radius)?;
                pos("radial_sigma", radial_sigma)?;
                pos("arc_span", arc_span)
            }
            Shape::Npc {
                corner_radius,
                corners,
                spread_divisor,
            } => {
                pos("corner_radius", corner_radius)?;
                pos("spread_divisor", spread_divisor)?;
                if corners < 2 {
                    return Err(Error::InvalidConfig("npc needs at least 2 corners".into()));
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Samples `n` points of one cluster centered at `c`.
pub(crate) fn sample_blob<R: Rng>(shape: &Shape, c: [f64; 2], n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    match *shape {
        Shape::Gaussian { sigma, sigma_max } => {
            let s = match sigma_max {
                Some(m) if m > sigma => rng.random_range(sigma..=m),
                _ => sigma,
            };
            (0..n).map(|_| [c[0] + s * normal(rng), c[1] + s * normal(rng)]).collect()
        }
        Shape::Ellipse { sigma_major, aspect } => {
            let theta = rng.random_range(0.0..PI);
            let (sn, cs) = theta.sin_cos();
            let minor = sigma_major / aspect;
            (0..n)
                .map(|_| {
                    let a = sigma_major * normal(rng);
                    let b = minor * normal(rng);
                    [c[0] + cs * a - sn * b, c[1] + sn * a + cs * b]
                })
                .collect()
        }
        Shape::Arc {
            radius,
            radial_sigma,
            arc_span,
        } => {
            let start = rng.random_range(0.0..2.0 * PI);
            (0..n)
                .map(|_| {
                    let phi = start + rng.random_range(0.0..arc_span);
                    let r = radius + radial_sigma * normal(rng);
                    [c[0] + r * phi.cos(), c[1] + r * phi.sin()]
                })
                .collect()
        }
        Shape::Npc { .. } => unreachable!("npc clusters are sampled per corner"),
    }
}

/// Corner geometry of a ring: apex at the ring center, height `2 r` along the
/// corner axis, base subtending `2 pi / corners` at the apex. Localizations
/// spread around the point at distance `r` on the axis.
pub(crate) struct Corner {
    pub center: [f64; 2],
    tri: [[f64; 2]; 3],
}

impl Corner {
    pub fn new(ring_center: [f64; 2], axis_angle: f64, r: f64, corners: usize) -> Self {
        let (sn, cs) = axis_angle.sin_cos();
        let h = 2.0 * r;
        let half = h * (PI / corners as f64).tan();
        let apex = ring_center;
        let base_mid = [apex[0] + h * cs, apex[1] + h * sn];
        let b1 = [base_mid[0] - half * sn, base_mid[1] + half * cs];
        let b2 = [base_mid[0] + half * sn, base_mid[1] - half * cs];
        Self {
            center: [apex[0] + r * cs, apex[1] + r * sn],
            tri: [apex, b1, b2],
        }
    }

    /// Distance from the spot center to the triangle boundary along `theta`.
    pub fn reach(&self, theta: f64) -> f64 {
        let d = [theta.cos(), theta.sin()];
        let p = self.center;
        let mut best = f64::INFINITY;
        for k in 0..3 {
            let a = self.tri[k];
            let b = self.tri[(k + 1) % 3];
            let e = [b[0] - a[0], b[1] - a[1]];
            let denom = d[0] * e[1] - d[1] * e[0];
            if denom.abs() < 1e-15 {
                continue;
            }
            let w = [a[0] - p[0], a[1] - p[1]];
            let t = (w[0] * e[1] - w[1] * e[0]) / denom;
            let s = (w[0] * d[1] - w[1] * d[0]) / denom;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                best = best.min(t);
            }
        }
        best
    }

    pub fn sample<R: Rng>(&self, n: usize, divisor: f64, rng: &mut R) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| {
                let theta = rng.random_range(0.0..2.0 * PI);
                let rho = normal(rng).abs() * self.reach(theta) / divisor;
                [self.center[0] + rho * theta.cos(), self.center[1] + rho * theta.sin()]
            })
            .collect()
    }
}
