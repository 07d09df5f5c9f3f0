//! Obstacles: the smooth concave cap family used by the experiments and a
//! constant obstacle for trivial and manufactured instances.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Configuration form of an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleParams {
    /// `h0 - kappa |x|^2` on `|x| <= rho`, blended to a negative constant
    /// over `rho <= |x| <= rho + blend_width`.
    Cap {
        h0: f64,
        kappa: f64,
        rho: f64,
        blend_width: f64,
    },
    Constant {
        value: f64,
    },
}

impl ObstacleParams {
    pub fn build(&self, n: usize, x_box: f64) -> Result<ObstacleSpec> {
        match *self {
            ObstacleParams::Cap {
                h0,
                kappa,
                rho,
                blend_width,
            } => make_cap_obstacle(n, x_box, h0, kappa, rho, blend_width),
            ObstacleParams::Constant { value } => Ok(ObstacleSpec::constant(n, value)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Cap {
        h0: f64,
        kappa: f64,
        rho: f64,
        blend_width: f64,
        outer: f64,
    },
    Constant(f64),
}

/// An obstacle with analytic evaluators for `φ, ∇φ, Δφ, ∇Δφ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleSpec {
    pub n: usize,
    shape: Shape,
    /// Hölder exponent of the third derivatives.
    pub gamma: f64,
    /// Concavity constant: `Δφ <= -c0` on `{φ > 0}`.
    pub c0: f64,
    /// Radius of a ball containing `{φ > 0}`.
    pub support_radius: f64,
}

/// Builds the cap obstacle `h0 - κ|x|²` smoothly blended to a negative constant.
pub fn make_cap_obstacle(
    n: usize,
    x_box: f64,
    h0: f64,
    kappa: f64,
    rho: f64,
    blend_width: f64,
) -> Result<ObstacleSpec> {
    if !(n == 1 || n == 2) {
        return invalid(format!("dimension n = {n} not supported"));
    }
    if !(h0 > 0.0) {
        return invalid("cap height must be positive, otherwise {φ > 0} is empty");
    }
    if !(kappa > 0.0 && rho > 0.0 && blend_width > 0.0) {
        return invalid("cap curvature, radius and blend width must be positive");
    }
    let root = (h0 / kappa).sqrt();
    if root >= rho {
        return invalid(format!(
            "positive set radius {root} reaches the blend region at {rho}"
        ));
    }
    if root >= x_box {
        return invalid(format!("positive set radius {root} escapes the box {x_box}"));
    }
    Ok(ObstacleSpec {
        n,
        shape: Shape::Cap {
            h0,
            kappa,
            rho,
            blend_width,
            outer: h0 - kappa * rho * rho,
        },
        gamma: 1.0,
        c0: 2.0 * n as f64 * kappa,
        support_radius: root,
    })
}

impl ObstacleSpec {
    pub fn constant(n: usize, value: f64) -> Self {
        ObstacleSpec {
            n,
            shape: Shape::Constant(value),
            gamma: 1.0,
            c0: 0.0,
            support_radius: 0.0,
        }
    }

    pub fn params(&self) -> ObstacleParams {
        match self.shape {
            Shape::Cap {
                h0,
                kappa,
                rho,
                blend_width,
                ..
            } => ObstacleParams::Cap {
                h0,
                kappa,
                rho,
                blend_width,
            },
            Shape::Constant(value) => ObstacleParams::Constant { value },
        }
    }

    /// `sup φ⁺`.
    pub fn positive_max(&self) -> f64 {
        match self.shape {
            Shape::Cap { h0, .. } => h0,
            Shape::Constant(v) => v.max(0.0),
        }
    }

    pub fn eval_phi(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Constant(v) => v,
            Shape::Cap { .. } => self.radial(norm(x, self.n))[0],
        }
    }

    pub fn eval_grad_phi(&self, x: &[f64]) -> [f64; 2] {
        match self.shape {
            Shape::Constant(_) => [0.0; 2],
            Shape::Cap { kappa, rho, .. } => {
                let r = norm(x, self.n);
                let mut g = [0.0; 2];
                if r <= rho {
                    for k in 0..self.n {
                        g[k] = -2.0 * kappa * x[k];
                    }
                } else {
                    let f = self.radial(r);
                    for k in 0..self.n {
                        g[k] = f[1] * x[k] / r;
                    }
                }
                g
            }
        }
    }

    pub fn eval_lap_phi(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Constant(_) => 0.0,
            Shape::Cap { kappa, rho, .. } => {
                let r = norm(x, self.n);
                if r <= rho {
                    -2.0 * self.n as f64 * kappa
                } else {
                    let f = self.radial(r);
                    f[2] + (self.n as f64 - 1.0) * f[1] / r
                }
            }
        }
    }

    pub fn eval_grad_lap_phi(&self, x: &[f64]) -> [f64; 2] {
        match self.shape {
            Shape::Constant(_) => [0.0; 2],
            Shape::Cap { rho, .. } => {
                let r = norm(x, self.n);
                let mut g = [0.0; 2];
                if r > rho {
                    let f = self.radial(r);
                    let m = self.n as f64 - 1.0;
                    let dl = f[3] + m * (f[2] / r - f[1] / (r * r));
                    for k in 0..self.n {
                        g[k] = dl * x[k] / r;
                    }
                }
                g
            }
        }
    }

    /// Radial profile `F(r)` and its first three derivatives.
    fn radial(&self, r: f64) -> [f64; 4] {
        match self.shape {
            Shape::Constant(v) => [v, 0.0, 0.0, 0.0],
            Shape::Cap {
                h0,
                kappa,
                rho,
                blend_width,
                outer,
            } => {
                let cap = Jet::new(h0 - kappa * r * r, -2.0 * kappa * r, -2.0 * kappa, 0.0);
                if r <= rho {
                    return cap.0;
                }
                if r >= rho + blend_width {
                    return [outer, 0.0, 0.0, 0.0];
                }
                let t_in = Jet::new((rho + blend_width - r) / blend_width, -1.0 / blend_width, 0.0, 0.0);
                let t_out = Jet::new((r - rho) / blend_width, 1.0 / blend_width, 0.0, 0.0);
                let p = bump(t_in);
                let q = bump(t_out);
                let chi = p.mul(&p.add(&q).recip());
                let blended = chi.mul(&cap).add(&Jet::constant(1.0).sub(&chi).scale(outer));
                blended.0
            }
        }
    }

    /// Samples the obstacle on a lattice and checks the local-problem
    /// hypotheses: `{φ > 0}` is nonempty, lies inside `[-x_box, x_box]^n`
    /// away from the edge, and `Δφ <= -c0` there.
    pub fn check_local_hypotheses(&self, x_box: f64, per_axis: usize) -> Result<()> {
        let mut positive = 0usize;
        let pts = lattice(self.n, x_box, per_axis);
        for x in &pts {
            let phi = self.eval_phi(x);
            if phi > 0.0 {
                positive += 1;
                let edge = (0..self.n).any(|k| (x_box - x[k].abs()) < 1e-9 * x_box);
                if edge {
                    return invalid("{φ > 0} touches the box edge");
                }
                if self.eval_lap_phi(x) > -self.c0 + 1e-12 {
                    return invalid(format!("Δφ > -c0 at {x:?}"));
                }
            }
        }
        if positive == 0 {
            return invalid("{φ > 0} is empty");
        }
        Ok(())
    }
}

fn lattice(n: usize, x_box: f64, m: usize) -> Vec<[f64; 2]> {
    let c = |i: usize| -x_box + 2.0 * x_box * i as f64 / (m - 1) as f64;
    let mut out = Vec::new();
    if n == 1 {
        for i in 0..m {
            out.push([c(i), 0.0]);
        }
    } else {
        for i in 0..m {
            for k in 0..m {
                out.push([c(i), c(k)]);
            }
        }
    }
    out
}

fn norm(x: &[f64], n: usize) -> f64 {
    x.iter().take(n).map(|v| v * v).sum::<f64>().sqrt()
}

/// `exp(-1/t)` for `t > 0`, zero otherwise, as a third-order jet.
fn bump(t: Jet) -> Jet {
    let t0 = t.0[0];
    if t0 <= 0.0 {
        return Jet::constant(0.0);
    }
    let g = t.compose([-1.0 / t0, 1.0 / (t0 * t0), -2.0 / t0.powi(3), 6.0 / t0.powi(4)]);
    let e = (g.0[0]).exp();
    g.compose([e, e, e, e])
}

/// Value and first three derivatives of a scalar function of one variable.
#[derive(Debug, Clone, Copy)]
struct Jet([f64; 4]);

impl Jet {
    fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Jet([v, d1, d2, d3])
    }

    fn constant(v: f64) -> Self {
        Jet([v, 0.0, 0.0, 0.0])
    }

    fn add(&self, o: &Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }

    fn sub(&self, o: &Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }

    fn scale(&self, c: f64) -> Jet {
        Jet(self.0.map(|v| v * c))
    }

    fn mul(&self, o: &Jet) -> Jet {
        let [f0, f1, f2, f3] = self.0;
        let [g0, g1, g2, g3] = o.0;
        Jet([
            f0 * g0,
            f1 * g0 + f0 * g1,
            f2 * g0 + 2.0 * f1 * g1 + f0 * g2,
            f3 * g0 + 3.0 * f2 * g1 + 3.0 * f1 * g2 + f0 * g3,
        ])
    }

    /// `h ∘ self` given the derivatives of `h` at `self.0[0]`.
    fn compose(&self, h: [f64; 4]) -> Jet {
        let [_, f1, f2, f3] = self.0;
        Jet([
            h[0],
            h[1] * f1,
            h[2] * f1 * f1 + h[1] * f2,
            h[3] * f1.powi(3) + 3.0 * h[2] * f1 * f2 + h[1] * f3,
        ])
    }

    fn recip(&self) -> Jet {
        let x = self.0[0];
        self.compose([1.0 / x, -1.0 / (x * x), 2.0 / x.powi(3), -6.0 / x.powi(4)])
    }
}
