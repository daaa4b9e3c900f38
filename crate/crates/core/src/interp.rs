//! Dense output on a macro interval `[t_n, t_n + h]`, parametrized by the
//! offset `zeta` from `t_n`.

use crate::trbdf2::{StepResult, TrBdf2Coefficients};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error("offset {zeta} outside [0, {h}]")]
    OffsetOutOfRange { zeta: f64, h: f64 },
    #[error("interior node {h_lambda} must lie strictly inside (0, {h})")]
    DegenerateNodes { h_lambda: f64, h: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

fn check_offset(zeta: f64, h: f64) -> Result<(), InterpError> {
    if !(h > 0.0) || !(0.0..=h).contains(&zeta) {
        return Err(InterpError::OffsetOutOfRange { zeta, h });
    }
    Ok(())
}

fn check_dims(n: usize, others: &[&[f64]]) -> Result<(), InterpError> {
    for o in others {
        if o.len() != n {
            return Err(InterpError::DimensionMismatch {
                expected: n,
                actual: o.len(),
            });
        }
    }
    Ok(())
}

pub fn linear_interp(u_n: &[f64], u_next: &[f64], h: f64, zeta: f64) -> Result<Vec<f64>, InterpError> {
    check_offset(zeta, h)?;
    check_dims(u_n.len(), &[u_next])?;
    let a = zeta / h;
    let b = (h - zeta) / h;
    Ok(u_n.iter().zip(u_next).map(|(p, q)| a * q + b * p).collect())
}

/// Lagrange parabola through `(0, u_n)`, `(h_lambda, u_lambda)`, `(h, u_next)`.
pub fn quadratic_lagrange(
    u_n: &[f64],
    u_lambda: &[f64],
    u_next: &[f64],
    h_lambda: f64,
    h: f64,
    zeta: f64,
) -> Result<Vec<f64>, InterpError> {
    check_offset(zeta, h)?;
    if !(h_lambda > 0.0 && h_lambda < h) {
        return Err(InterpError::DegenerateNodes { h_lambda, h });
    }
    check_dims(u_n.len(), &[u_lambda, u_next])?;
    let l0 = (zeta - h_lambda) * (zeta - h) / (h_lambda * h);
    let l1 = zeta * (zeta - h) / (h_lambda * (h_lambda - h));
    let l2 = zeta * (zeta - h_lambda) / (h * (h - h_lambda));
    Ok((0..u_n.len())
        .map(|i| l0 * u_n[i] + l1 * u_lambda[i] + l2 * u_next[i])
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteData {
    pub u_n: Vec<f64>,
    pub u_gamma: Vec<f64>,
    pub u_next: Vec<f64>,
    pub z_n: Vec<f64>,
    pub z_gamma: Vec<f64>,
    pub z_next: Vec<f64>,
    pub h: f64,
    pub gamma: f64,
}

impl HermiteData {
    pub fn from_step(r: &StepResult) -> Self {
        Self {
            u_n: r.u_n.clone(),
            u_gamma: r.u_gamma.clone(),
            u_next: r.u_next.clone(),
            z_n: r.z_n.clone(),
            z_gamma: r.z_gamma.clone(),
            z_next: r.z_next.clone(),
            h: r.h,
            gamma: TrBdf2Coefficients::new().gamma,
        }
    }

    pub fn dim(&self) -> usize {
        self.u_n.len()
    }

    /// Value of component `i` at offset `zeta`; the offset is not checked.
    pub fn component(&self, i: usize, zeta: f64) -> f64 {
        let g = self.gamma;
        let (a0, a1, a2, a3, beta) = if zeta <= g * self.h {
            let a1 = g * self.z_n[i];
            (
                self.u_n[i],
                a1,
                self.u_gamma[i] - self.u_n[i] - a1,
                g * (self.z_gamma[i] - self.z_n[i]),
                zeta / (g * self.h),
            )
        } else {
            let a1 = (1.0 - g) * self.z_gamma[i];
            (
                self.u_gamma[i],
                a1,
                self.u_next[i] - self.u_gamma[i] - a1,
                (1.0 - g) * (self.z_next[i] - self.z_gamma[i]),
                (zeta - g * self.h) / ((1.0 - g) * self.h),
            )
        };
        (((a3 - 2.0 * a2) * beta + (3.0 * a2 - a3)) * beta + a1) * beta + a0
    }
}

pub fn hermite_cubic(d: &HermiteData, zeta: f64) -> Result<Vec<f64>, InterpError> {
    check_offset(zeta, d.h)?;
    let n = d.dim();
    check_dims(n, &[&d.u_gamma, &d.u_next, &d.z_n, &d.z_gamma, &d.z_next])?;
    Ok((0..n).map(|i| d.component(i, zeta)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 2.0 - std::f64::consts::SQRT_2;

    /// Hermite data sampled from a scalar function with derivative.
    fn sampled(y: impl Fn(f64) -> f64, dy: impl Fn(f64) -> f64, h: f64) -> HermiteData {
        HermiteData {
            u_n: vec![y(0.0)],
            u_gamma: vec![y(G * h)],
            u_next: vec![y(h)],
            z_n: vec![h * dy(0.0)],
            z_gamma: vec![h * dy(G * h)],
            z_next: vec![h * dy(h)],
            h,
            gamma: G,
        }
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_interp(&[1.0], &[3.0], 2.0, 0.0).unwrap(), vec![1.0]);
        assert_eq!(linear_interp(&[1.0], &[3.0], 2.0, 2.0).unwrap(), vec![3.0]);
        assert_eq!(linear_interp(&[0.0], &[2.0], 1.0, 0.5).unwrap(), vec![1.0]);
        assert!(matches!(
            linear_interp(&[0.0], &[2.0], 1.0, 1.5),
            Err(InterpError::OffsetOutOfRange { .. })
        ));
        assert!(linear_interp(&[0.0], &[2.0], 1.0, -1e-12).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let (a, b, c) = ([1.0], [5.0], [-2.0]);
        for (zeta, want) in [(0.0, 1.0), (0.3, 5.0), (1.0, -2.0)] {
            assert!((quadratic_lagrange(&a, &b, &c, 0.3, 1.0, zeta).unwrap()[0] - want).abs() < 1e-15);
        }
        let q = |t: f64| t * t;
        let got = quadratic_lagrange(&[q(0.0)], &[q(0.3)], &[q(1.0)], 0.3, 1.0, 0.77).unwrap();
        assert!((got[0] - q(0.77)).abs() < 1e-14);
        for zeta in [0.0, 0.1, 0.5, 0.99] {
            let v = quadratic_lagrange(&[4.0], &[4.0], &[4.0], 0.3, 1.0, zeta).unwrap();
            assert!((v[0] - 4.0).abs() < 1e-14);
        }
        assert!(matches!(
            quadratic_lagrange(&a, &b, &c, 1.0, 1.0, 0.5),
            Err(InterpError::DegenerateNodes { .. })
        ));
        assert!(matches!(
            quadratic_lagrange(&a, &b, &c, 0.0, 1.0, 0.5),
            Err(InterpError::DegenerateNodes { .. })
        ));
    }

    #[test]
    fn hermite_knots() {
        let d = sampled(|t| t.sin() + 2.0, |t| t.cos(), 0.5);
        assert_eq!(hermite_cubic(&d, 0.0).unwrap(), d.u_n);
        assert!((hermite_cubic(&d, G * 0.5).unwrap()[0] - d.u_gamma[0]).abs() < 1e-15);
        assert!((hermite_cubic(&d, 0.5).unwrap()[0] - d.u_next[0]).abs() < 1e-15);
        assert!(hermite_cubic(&d, 0.5000001).is_err());
    }

    #[test]
    fn hermite_slopes_and_c1_join() {
        let h = 0.8;
        let d = sampled(|t| (1.3 * t).exp(), |t| 1.3 * (1.3 * t).exp(), h);
        let e = 1e-6 * h;
        let val = |z: f64| d.component(0, z);
        let right = (val(e) - val(0.0)) / e;
        assert!((right - d.z_n[0] / h).abs() < 1e-4);
        let left = (val(h) - val(h - e)) / e;
        assert!((left - d.z_next[0] / h).abs() < 1e-4);
        let k = G * h;
        let from_left = (val(k) - val(k - e)) / e;
        let from_right = (val(k + e) - val(k)) / e;
        assert!((from_left - d.z_gamma[0] / h).abs() < 1e-4);
        assert!((from_right - d.z_gamma[0] / h).abs() < 1e-4);
    }

    #[test]
    fn hermite_reproduces_cubics_per_branch() {
        let h = 0.6;
        let k = G * h;
        // separate cubics on each branch that share value and slope at the knot
        let c1 = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t;
        let d1 = |t: f64| -2.0 + t + 9.0 * t * t;
        let c2 = |t: f64| {
            let s = t - k;
            c1(k) + d1(k) * s - 1.7 * s * s + 0.4 * s * s * s
        };
        let d2 = |t: f64| {
            let s = t - k;
            d1(k) - 3.4 * s + 1.2 * s * s
        };
        let d = HermiteData {
            u_n: vec![c1(0.0)],
            u_gamma: vec![c1(k)],
            u_next: vec![c2(h)],
            z_n: vec![h * d1(0.0)],
            z_gamma: vec![h * d1(k)],
            z_next: vec![h * d2(h)],
            h,
            gamma: G,
        };
        for i in 0..=50 {
            let zeta = h * i as f64 / 50.0;
            let want = if zeta <= k { c1(zeta) } else { c2(zeta) };
            assert!((d.component(0, zeta) - want).abs() < 1e-12, "zeta {zeta}");
        }
    }

    fn max_error(kind: &str, h: f64) -> f64 {
        let y = |t: f64| (2.0 * t).sin() + t.cos();
        let dy = |t: f64| 2.0 * (2.0 * t).cos() - t.sin();
        let d = sampled(y, dy, h);
        (0..=200)
            .map(|i| {
                let zeta = h * i as f64 / 200.0;
                let v = match kind {
                    "linear" => linear_interp(&d.u_n, &d.u_next, h, zeta).unwrap()[0],
                    "quadratic" => quadratic_lagrange(&d.u_n, &d.u_gamma, &d.u_next, G * h, h, zeta).unwrap()[0],
                    _ => hermite_cubic(&d, zeta).unwrap()[0],
                };
                (v - y(zeta)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn convergence_rates() {
        for (kind, order) in [("linear", 2.0), ("quadratic", 3.0), ("hermite", 4.0)] {
            let ratio = max_error(kind, 0.02) / max_error(kind, 0.01);
            let want = 2f64.powf(order);
            assert!((ratio / want - 1.0).abs() <= 0.25, "{kind}: ratio {ratio}");
        }
    }

    proptest::proptest! {
        #[test]
        fn affine_equivariance(c in -5.0f64..5.0, b in -5.0f64..5.0, frac in 0.0f64..=1.0,
                               v in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let h = 0.4;
            let zeta = frac * h;
            let d = HermiteData {
                u_n: vec![v[0]], u_gamma: vec![v[1]], u_next: vec![v[2]],
                z_n: vec![v[3]], z_gamma: vec![v[4]], z_next: vec![v[5]], h, gamma: G,
            };
            // constant shift leaves derivatives untouched
            let t = HermiteData {
                u_n: vec![c * v[0] + b], u_gamma: vec![c * v[1] + b], u_next: vec![c * v[2] + b],
                z_n: vec![c * v[3]], z_gamma: vec![c * v[4]], z_next: vec![c * v[5]], h, gamma: G,
            };
            let tol = 1e-12 * (1.0 + c.abs()) * 10.0;
            proptest::prop_assert!((hermite_cubic(&t, zeta).unwrap()[0] - (c * hermite_cubic(&d, zeta).unwrap()[0] + b)).abs() < tol);
            let lin_t = linear_interp(&t.u_n, &t.u_next, h, zeta).unwrap()[0];
            let lin = linear_interp(&d.u_n, &d.u_next, h, zeta).unwrap()[0];
            proptest::prop_assert!((lin_t - (c * lin + b)).abs() < tol);
            let q_t = quadratic_lagrange(&t.u_n, &t.u_gamma, &t.u_next, G * h, h, zeta).unwrap()[0];
            let q = quadratic_lagrange(&d.u_n, &d.u_gamma, &d.u_next, G * h, h, zeta).unwrap()[0];
            proptest::prop_assert!((q_t - (c * q + b)).abs() < tol);
        }
    }
}
