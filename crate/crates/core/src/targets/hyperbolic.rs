//! Hyperboloid model of the curvature −1 plane.

/// Minkowski product `−x₀y₀ + x₁y₁ + x₂y₂`.
pub fn minkowski(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Lifts `(x₁, x₂)` to the upper sheet.
pub fn renormalize(x: [f64; 3]) -> [f64; 3] {
    [(1.0 + x[1] * x[1] + x[2] * x[2]).sqrt(), x[1], x[2]]
}

pub fn from_polar(r: f64, theta: f64) -> [f64; 3] {
    renormalize([0.0, r.sinh() * theta.cos(), r.sinh() * theta.sin()])
}

/// Point of the hyperboloid corresponding to `z` in the Poincaré disk.
pub fn from_poincare(z: [f64; 2]) -> [f64; 3] {
    let s = 1.0 - z[0] * z[0] - z[1] * z[1];
    renormalize([0.0, 2.0 * z[0] / s, 2.0 * z[1] / s])
}

pub fn to_poincare(x: &[f64; 3]) -> [f64; 2] {
    [x[1] / (1.0 + x[0]), x[2] / (1.0 + x[0])]
}

/// `2 asinh(½ |p − q|_L)`, which stays accurate for nearby points where
/// `arccosh(−⟨p, q⟩)` loses half its digits.
pub fn distance(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let chord2 = minkowski(&d, &d).max(0.0);
    2.0 * (0.5 * chord2.sqrt()).asinh()
}

pub fn interpolate(p: &[f64; 3], q: &[f64; 3], t: f64) -> [f64; 3] {
    if t == 0.0 {
        return *p;
    }
    if t == 1.0 {
        return *q;
    }
    let d = distance(p, q);
    let (a, b) = if d < 1e-9 {
        (1.0 - t, t)
    } else {
        let s = d.sinh();
        (((1.0 - t) * d).sinh() / s, (t * d).sinh() / s)
    };
    renormalize([0.0, a * p[1] + b * q[1], a * p[2] + b * q[2]])
}

/// Tangent vector at `p` pointing to `q` with Minkowski length `d(p, q)`.
pub fn log_map(p: &[f64; 3], q: &[f64; 3]) -> [f64; 3] {
    let d = distance(p, q);
    let c = minkowski(p, q);
    let k = if d < 1e-9 { 1.0 } else { d / d.sinh() };
    [
        k * (q[0] + c * p[0]),
        k * (q[1] + c * p[1]),
        k * (q[2] + c * p[2]),
    ]
}

pub fn exp_map(p: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    let n = minkowski(v, v).max(0.0).sqrt();
    if n == 0.0 {
        return *p;
    }
    let (c, s) = (n.cosh(), n.sinh() / n);
    renormalize([
        c * p[0] + s * v[0],
        c * p[1] + s * v[1],
        c * p[2] + s * v[2],
    ])
}

/// Minkowski norm of a tangent vector.
pub fn tangent_norm(v: &[f64; 3]) -> f64 {
    minkowski(v, v).max(0.0).sqrt()
}
