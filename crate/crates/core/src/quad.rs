//! Small quadrature toolkit: Gauss-Legendre rules and exact moments of the
//! power weights `t^a` that appear in the extension problem.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// `∫_{y0}^{y1} t^p dt` for `0 <= y0 <= y1` and `p > -1`.
pub fn power_integral(y0: f64, y1: f64, p: f64) -> f64 {
    debug_assert!(y0 >= 0.0 && y1 >= y0 && p > -1.0);
    (y1.powf(p + 1.0) - y0.powf(p + 1.0)) / (p + 1.0)
}

/// Moments `m_k = ∫_{y0}^{y1} t^a τ^k dt`, `τ = (t - y0)/(y1 - y0)`, `k = 0, 1, 2`.
///
/// Cells touching the singular/degenerate plane use the closed form; cells
/// well away from it use Gauss-Legendre, which avoids the cancellation of
/// the closed form when the cell is thin compared with its height.
pub fn linear_weight_moments(y0: f64, y1: f64, a: f64) -> [f64; 3] {
    let w = y1 - y0;
    if w <= 0.0 {
        return [0.0; 3];
    }
    if y0 <= 2.0 * w {
        let i0 = power_integral(y0, y1, a);
        let i1 = power_integral(y0, y1, a + 1.0);
        let i2 = power_integral(y0, y1, a + 2.0);
        // t = y0 + w τ  =>  τ = (t - y0)/w
        let m1 = (i1 - y0 * i0) / w;
        let m2 = (i2 - 2.0 * y0 * i1 + y0 * y0 * i0) / (w * w);
        [i0, m1, m2]
    } else {
        let gl = gl6();
        let mut m = [0.0; 3];
        let half = 0.5 * w;
        for (x, wt) in gl.0.iter().zip(gl.1.iter()) {
            let tau = 0.5 * (1.0 + x);
            let t = y0 + w * tau;
            let base = wt * half * t.powf(a);
            m[0] += base;
            m[1] += base * tau;
            m[2] += base * tau * tau;
        }
        m
    }
}

fn gl6() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let g = GaussLegendre::new(6);
        (g.nodes, g.weights)
    })
}

/// `∫_{θ0}^{θ1} sin^a θ dθ` for a cell inside `[0, π]`.
///
/// Cells adjacent to a pole are integrated after the substitution
/// `τ = θ^{1+a}` which removes the endpoint singularity of `θ^a`.
pub fn sin_power_cell(theta0: f64, theta1: f64, a: f64) -> f64 {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let gl = RULE.get_or_init(|| GaussLegendre::new(12));
    let width = theta1 - theta0;
    if theta0 <= 1e-14 * PI.max(width) {
        return pole_cell(width, a, gl);
    }
    if (PI - theta1) <= 1e-14 * PI.max(width) {
        return pole_cell(width, a, gl);
    }
    gl.integrate(theta0, theta1, |t| t.sin().powf(a))
}

fn pole_cell(width: f64, a: f64, gl: &GaussLegendre) -> f64 {
    let e = 1.0 + a;
    let top = width.powf(e);
    gl.integrate(0.0, top, |tau| {
        let theta = tau.powf(1.0 / e);
        if theta == 0.0 {
            1.0
        } else {
            (theta.sin() / theta).powf(a)
        }
    }) / e
}
