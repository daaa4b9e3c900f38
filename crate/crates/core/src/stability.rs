//! Linear stability of the multirate scheme.
//!
//! For `y' = A y` with a constant macro step `h` and one refinement into two
//! half steps, the multirate update is a linear map `u^{n+1} = R_mr u^n`.
//! This module assembles `R_mr` for a given active partition and sweeps its
//! norms over a range of step sizes.

use std::str::FromStr;

use crate::linalg::{lu_factor, matrix_norm, spectral_radius, DenseMatrix, LinalgError, NormKind};
use crate::multirate::InterpolantKind;
use crate::problem::ActivePartition;
use crate::trbdf2::TrBdf2Coefficients;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StabilityError {
    #[error("singular matrix while assembling the amplification matrix")]
    SingularMatrix,
    #[error("unknown model system '{0}'")]
    UnknownSystem(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for StabilityError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::SingularMatrix { .. } => StabilityError::SingularMatrix,
            other => StabilityError::Linalg(other),
        }
    }
}

/// `R(Z) = D(Z)^{-1} N(Z)` with scalar polynomial coefficients in ascending
/// powers of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMatrixMethod {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

fn matrix_polynomial(coeffs: &[f64], z: &DenseMatrix) -> DenseMatrix {
    // Horner in matrix form
    let n = z.rows();
    let mut acc = DenseMatrix::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = acc.matmul(z).add_identity(c);
    }
    acc
}

impl RationalMatrixMethod {
    pub fn trbdf2() -> Self {
        let g = TrBdf2Coefficients::new().gamma;
        Self {
            numerator: vec![2.0 * (2.0 - g), 1.0 + (1.0 - g) * (1.0 - g)],
            denominator: vec![2.0 * (2.0 - g), g * g - 2.0, (1.0 - g) * g],
        }
    }

    pub fn numerator_at(&self, z: &DenseMatrix) -> DenseMatrix {
        matrix_polynomial(&self.numerator, z)
    }

    pub fn denominator_at(&self, z: &DenseMatrix) -> DenseMatrix {
        matrix_polynomial(&self.denominator, z)
    }

    pub fn amplification(&self, z: &DenseMatrix) -> Result<DenseMatrix, StabilityError> {
        Ok(lu_factor(&self.denominator_at(z))?.solve_matrix(&self.numerator_at(z))?)
    }
}

fn check_square(a: &DenseMatrix) -> Result<(), StabilityError> {
    if !a.is_square() {
        return Err(StabilityError::InvalidInput(format!(
            "system matrix must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

/// `R(hA)` of TR-BDF2.
pub fn single_rate_amplification(a: &DenseMatrix, h: f64) -> Result<DenseMatrix, StabilityError> {
    check_square(a)?;
    RationalMatrixMethod::trbdf2().amplification(&a.scaled(h))
}

/// Interpolation operator to the macro midpoint, `Q_{1/2}`.
pub fn interpolation_matrix(a: &DenseMatrix, h: f64, kind: InterpolantKind) -> Result<DenseMatrix, StabilityError> {
    check_square(a)?;
    let n = a.rows();
    let z = a.scaled(h);
    let id = DenseMatrix::identity(n);
    match kind {
        InterpolantKind::Linear => Ok(id.add_scaled(&single_rate_amplification(a, h)?, 1.0).scaled(0.5)),
        InterpolantKind::Hermite => {
            let g = TrBdf2Coefficients::new().gamma;
            let beta = 1.0 / (2.0 * g);
            let lhs = id.add_scaled(&z, -g / 2.0);
            let rhs = id.add_scaled(&z, g / 2.0);
            let r_g = lu_factor(&lhs)?.solve_matrix(&rhs)?;
            let rg_minus_i = r_g.add_identity(-1.0);
            // R_g - I - g Z
            let s = rg_minus_i.add_scaled(&z, -g);
            let gz_rg = z.matmul(&rg_minus_i).scaled(g);
            let f = s.scaled(3.0).add_scaled(&gz_rg, -1.0);
            let gm = gz_rg.add_scaled(&s, -2.0);
            Ok(id
                .add_scaled(&z, beta * g)
                .add_scaled(&f, beta * beta)
                .add_scaled(&gm, beta * beta * beta))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySetup {
    pub a: DenseMatrix,
    pub h: f64,
    pub partition: ActivePartition,
    pub kind: InterpolantKind,
}

/// Writes `block` into the rows `rows` of `out`.
fn set_rows(out: &mut DenseMatrix, rows: &[usize], block: &DenseMatrix) {
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(r).copy_from_slice(block.row(k));
    }
}

/// Amplification matrix of one macro step with a single two-half-step
/// refinement of the active components.
pub fn multirate_amplification(setup: &StabilitySetup) -> Result<DenseMatrix, StabilityError> {
    let a = &setup.a;
    check_square(a)?;
    let m = a.rows();
    if setup.partition.dim() != m {
        return Err(StabilityError::InvalidInput(format!(
            "partition dimension {} does not match system size {m}",
            setup.partition.dim()
        )));
    }
    let method = RationalMatrixMethod::trbdf2();
    let z = a.scaled(setup.h);
    let r = method.amplification(&z)?;
    let act = setup.partition.indices();
    if act.is_empty() {
        return Ok(r);
    }
    let lat = setup.partition.complement();
    let all: Vec<usize> = (0..m).collect();
    let half = z.scaled(0.5);
    let d_half = method.denominator_at(&half);
    let n_half = method.numerator_at(&half);
    let q = interpolation_matrix(a, setup.h, setup.kind)?;

    let lu_pp = lu_factor(&d_half.select(act, act))?;
    let n_act = n_half.select(act, &all);

    // first half step of the active block, latent values from Q
    let mut rhs1 = n_act.clone();
    if !lat.is_empty() {
        let d_pl = d_half.select(act, &lat);
        rhs1 = rhs1.add_scaled(&d_pl.matmul(&q.select(&lat, &all)), -1.0);
    }
    let x1 = lu_pp.solve_matrix(&rhs1)?;
    let mut w1 = q.clone();
    set_rows(&mut w1, act, &x1);

    // second half step, latent values from the macro solution
    let mut rhs2 = n_act.matmul(&w1);
    if !lat.is_empty() {
        let d_pl = d_half.select(act, &lat);
        rhs2 = rhs2.add_scaled(&d_pl.matmul(&r.select(&lat, &all)), -1.0);
    }
    let x2 = lu_pp.solve_matrix(&rhs2)?;
    let mut out = r;
    set_rows(&mut out, act, &x2);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSet {
    pub norm1: f64,
    pub norm2: f64,
    pub norminf: f64,
    pub spectral_radius: f64,
}

impl NormSet {
    pub fn of(m: &DenseMatrix) -> Result<Self, StabilityError> {
        Ok(Self {
            norm1: matrix_norm(m, NormKind::One)?,
            norm2: matrix_norm(m, NormKind::Two)?,
            norminf: matrix_norm(m, NormKind::Inf)?,
            spectral_radius: spectral_radius(m)?,
        })
    }

    pub fn max_l_norm(&self) -> f64 {
        self.norm1.max(self.norm2).max(self.norminf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationRow {
    pub rescaled_h: f64,
    pub h: f64,
    pub kind: InterpolantKind,
    pub multirate: NormSet,
    pub single_rate: NormSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationReport {
    /// `max |lambda(A)|` used to rescale the step axis (1 when A = 0).
    pub scale: f64,
    pub active: Vec<usize>,
    pub rows: Vec<AmplificationRow>,
}

impl AmplificationReport {
    pub fn rows_of(&self, kind: InterpolantKind) -> impl Iterator<Item = &AmplificationRow> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Rescaled step grid used by the sweeps: 60 points on `[1e-3, 100]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 100.0, 60)
}

/// Sweeps the amplification norms over rescaled steps `h max|lambda(A)|`.
pub fn norm_sweep(
    a: &DenseMatrix,
    partition: &ActivePartition,
    kinds: &[InterpolantKind],
    rescaled_grid: &[f64],
) -> Result<AmplificationReport, StabilityError> {
    check_square(a)?;
    if rescaled_grid.is_empty() || rescaled_grid.iter().any(|&r| !(r > 0.0)) || rescaled_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StabilityError::InvalidInput("grid must be positive and increasing".into()));
    }
    let rho = spectral_radius(a)?;
    let scale = if rho > 0.0 { rho } else { 1.0 };
    let mut rows = Vec::with_capacity(rescaled_grid.len() * kinds.len());
    for &r in rescaled_grid {
        let h = r / scale;
        let single = NormSet::of(&single_rate_amplification(a, h)?)?;
        for &kind in kinds {
            let setup = StabilitySetup {
                a: a.clone(),
                h,
                partition: partition.clone(),
                kind,
            };
            rows.push(AmplificationRow {
                rescaled_h: r,
                h,
                kind,
                multirate: NormSet::of(&multirate_amplification(&setup)?)?,
                single_rate: single,
            });
        }
    }
    Ok(AmplificationReport {
        scale,
        active: partition.indices().to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSystem {
    Sys1,
    Sys2,
    Sys2NoFriction,
    Heat40,
    AdvDiff40,
    Adv40,
}

impl ModelSystem {
    pub const ALL: [ModelSystem; 6] = [
        Self::Sys1,
        Self::Sys2,
        Self::Sys2NoFriction,
        Self::Heat40,
        Self::AdvDiff40,
        Self::Adv40,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sys1 => "sys1",
            Self::Sys2 => "sys2",
            Self::Sys2NoFriction => "sys2_nofriction",
            Self::Heat40 => "heat40",
            Self::AdvDiff40 => "advdiff40",
            Self::Adv40 => "adv40",
        }
    }
}

impl FromStr for ModelSystem {
    type Err = StabilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StabilityError::UnknownSystem(s.to_string()))
    }
}

/// Two coupled masses: positions and velocities `(x1, v1, x2, v2)`.
pub fn two_mass_system(m1: f64, m2: f64, k1: f64, k2: f64, gamma1: f64, gamma2: f64) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(1, 0)] = -(k1 + k2) / m1;
    a[(1, 1)] = -gamma1 / m1;
    a[(1, 2)] = k2 / m1;
    a[(2, 3)] = 1.0;
    a[(3, 0)] = k2 / m2;
    a[(3, 2)] = -k2 / m2;
    a[(3, 3)] = -gamma2 / m2;
    a
}

const CELLS_40: usize = 40;

fn slow_fast(ratio: f64) -> Vec<f64> {
    (0..CELLS_40).map(|i| if i < CELLS_40 / 2 { 1.0 } else { ratio }).collect()
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Finite-volume operator on 40 unit cells with per-cell coefficient scale
/// `s`: centred advective flux `v (y_L + y_R) / 2` minus diffusive flux
/// `k (y_R - y_L)`, face coefficients from the harmonic mean of the two cells.
/// Non-periodic ends see a zero ghost value.
fn finite_volume_40(s: &[f64], velocity: f64, diffusivity: f64, periodic: bool) -> DenseMatrix {
    let n = CELLS_40;
    let mut a = DenseMatrix::zeros(n, n);
    let faces: Vec<(Option<usize>, Option<usize>)> = if periodic {
        (0..n).map(|l| (Some(l), Some((l + 1) % n))).collect()
    } else {
        let mut f = vec![(None, Some(0))];
        f.extend((0..n - 1).map(|l| (Some(l), Some(l + 1))));
        f.push((Some(n - 1), None));
        f
    };
    for (left, right) in faces {
        let scale = match (left, right) {
            (Some(l), Some(r)) => harmonic(s[l], s[r]),
            (Some(c), None) | (None, Some(c)) => s[c],
            (None, None) => unreachable!(),
        };
        let v = velocity * scale;
        let k = diffusivity * scale;
        // flux = cl * y_L + cr * y_R
        let mut terms = Vec::with_capacity(2);
        if let Some(l) = left {
            terms.push((l, v / 2.0 + k));
        }
        if let Some(r) = right {
            terms.push((r, v / 2.0 - k));
        }
        for (j, c) in terms {
            if let Some(l) = left {
                a[(l, j)] -= c;
            }
            if let Some(r) = right {
                a[(r, j)] += c;
            }
        }
    }
    a
}

/// System matrix and default active partition of a named model system.
pub fn model_system(system: ModelSystem) -> (DenseMatrix, ActivePartition) {
    let fast_half = || ActivePartition::new((CELLS_40 / 2..CELLS_40).collect(), CELLS_40).expect("valid range");
    match system {
        ModelSystem::Sys1 => (
            DenseMatrix::from_rows(&[vec![-1.0, 1.0], vec![-1000.0, -1000.0]]).expect("finite"),
            ActivePartition::new(vec![1], 2).expect("valid"),
        ),
        ModelSystem::Sys2 => (
            two_mass_system(1.0, 1.0, 1.0, 1e6, 0.0, 100.0),
            ActivePartition::new(vec![2, 3], 4).expect("valid"),
        ),
        ModelSystem::Sys2NoFriction => (
            two_mass_system(1.0, 1.0, 1.0, 1e6, 0.0, 0.0),
            ActivePartition::new(vec![2, 3], 4).expect("valid"),
        ),
        ModelSystem::Heat40 => (finite_volume_40(&slow_fast(1e6), 0.0, 1.0, false), fast_half()),
        ModelSystem::AdvDiff40 => (finite_volume_40(&slow_fast(1e4), 0.5, 1.0, false), fast_half()),
        ModelSystem::Adv40 => (finite_volume_40(&slow_fast(1e4), 0.5, 0.0, true), fast_half()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigenvalues;
    use crate::trbdf2::stability_function;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const KINDS: [InterpolantKind; 2] = [InterpolantKind::Linear, InterpolantKind::Hermite];

    fn r_scalar(z: f64) -> f64 {
        stability_function(Complex64::new(z, 0.0)).unwrap().re
    }

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![v]]).unwrap()
    }

    #[test]
    fn single_rate_examples() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        assert!(single_rate_amplification(&a, 0.0).unwrap().max_abs_diff(&DenseMatrix::identity(2)) < 1e-15);
        let r = single_rate_amplification(&scalar(-1.0), 1.0).unwrap();
        assert!((r[(0, 0)] - r_scalar(-1.0)).abs() <= 1e-13);
        let d = DenseMatrix::from_diagonal(&[-1.0, -30.0, 2.0]);
        let r = single_rate_amplification(&d, 0.1).unwrap();
        for (i, l) in [-1.0, -30.0, 2.0].iter().enumerate() {
            for j in 0..3 {
                let want = if i == j { r_scalar(0.1 * l) } else { 0.0 };
                assert!((r[(i, j)] - want).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let a = DenseMatrix::from_rows(&[vec![-2.0, 1.0], vec![0.3, -7.0]]).unwrap();
        for kind in KINDS {
            let q = interpolation_matrix(&a, 0.0, kind).unwrap();
            assert!(q.max_abs_diff(&DenseMatrix::identity(2)) < 1e-15);
        }
        let q = interpolation_matrix(&scalar(-3.0), 0.2, InterpolantKind::Linear).unwrap();
        assert!((q[(0, 0)] - (1.0 + r_scalar(-0.6)) / 2.0).abs() < 1e-15);
        let err = |z: f64| {
            let q = interpolation_matrix(&scalar(z), 1.0, InterpolantKind::Hermite).unwrap();
            (q[(0, 0)] - (z / 2.0).exp()).abs()
        };
        for z in [0.1, 0.05, -0.1, -0.05] {
            assert!(err(z) <= 0.05 * z.abs().powi(3), "z={z}: {}", err(z));
        }
    }

    #[test]
    fn hermite_q_matches_scalar_interpolant_of_a_step() {
        use crate::interp::HermiteData;
        use crate::problem::{ActivePartition as Part, EvalCounters, OdeProblem};
        use crate::trbdf2::{step, NewtonConfig};
        let lambda = -4.0;
        let h = 0.3;
        let p = OdeProblem::linear("s", scalar(lambda));
        let mut c = EvalCounters::default();
        let cfg = NewtonConfig {
            tolerance: 1e-14,
            ..NewtonConfig::default()
        };
        let r = step(&p, 0.0, &[1.0], h, &Part::full(1), &[1.0], None, &cfg, &mut c).unwrap();
        let mid = HermiteData::from_step(&r).component(0, h / 2.0);
        let q = interpolation_matrix(&scalar(lambda), h, InterpolantKind::Hermite).unwrap();
        assert!((q[(0, 0)] - mid).abs() < 1e-12, "{} vs {mid}", q[(0, 0)]);
    }

    /// Literal evaluation with explicit embedding and projection matrices.
    fn stabmat_literal(a: &DenseMatrix, h: f64, part: &ActivePartition, kind: InterpolantKind) -> DenseMatrix {
        let m = a.rows();
        let act = part.indices();
        let lat = part.complement();
        let emb = DenseMatrix::from_fn(m, act.len(), |i, j| if act[j] == i { 1.0 } else { 0.0 });
        let proj = emb.transpose();
        let emb_perp = DenseMatrix::from_fn(m, lat.len(), |i, j| if lat[j] == i { 1.0 } else { 0.0 });
        let proj_perp = emb_perp.transpose();
        let pi_perp = DenseMatrix::identity(m).add_scaled(&emb.matmul(&proj), -1.0);
        let method = RationalMatrixMethod::trbdf2();
        let z = a.scaled(h);
        let r = method.amplification(&z).unwrap();
        let q = interpolation_matrix(a, h, kind).unwrap();
        let dh = method.denominator_at(&z.scaled(0.5));
        let nh = method.numerator_at(&z.scaled(0.5));
        let d_pp = proj.matmul(&dh).matmul(&emb);
        let d_pl = proj.matmul(&dh).matmul(&emb_perp);
        let n_pp = proj.matmul(&nh).matmul(&emb);
        let n_pl = proj.matmul(&nh).matmul(&emb_perp);
        let inv = lu_factor(&d_pp).unwrap().solve_matrix(&DenseMatrix::identity(act.len())).unwrap();
        let pq = proj_perp.matmul(&q);
        let bracket = proj.matmul(&nh).add_scaled(&d_pl.matmul(&pq), -1.0);
        let inner = inv
            .matmul(&n_pp)
            .matmul(&inv)
            .matmul(&bracket)
            .add_scaled(&inv.matmul(&n_pl).matmul(&pq), 1.0)
            .add_scaled(&inv.matmul(&d_pl).matmul(&proj_perp).matmul(&r), -1.0);
        emb.matmul(&inner).add_scaled(&pi_perp.matmul(&r), 1.0)
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if i == j {
                v - 2.0
            } else {
                v
            }
        })
    }

    #[test]
    fn block_assembly_matches_literal_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = random_system(&mut rng, 4);
            let mask: Vec<usize> = (0..4).filter(|_| rng.gen_bool(0.5)).collect();
            if mask.is_empty() {
                continue;
            }
            let part = ActivePartition::new(mask, 4).unwrap();
            let h = rng.gen_range(0.05..3.0);
            for kind in KINDS {
                let block = multirate_amplification(&StabilitySetup {
                    a: a.clone(),
                    h,
                    partition: part.clone(),
                    kind,
                })
                .unwrap();
                let lit = stabmat_literal(&a, h, &part, kind);
                assert!(block.max_abs_diff(&lit) < 1e-12, "{}", block.max_abs_diff(&lit));
            }
        }
    }

    #[test]
    fn scalar_reductions() {
        let a = scalar(-5.0);
        for kind in KINDS {
            let latent = multirate_amplification(&StabilitySetup {
                a: a.clone(),
                h: 0.4,
                partition: ActivePartition::empty(1),
                kind,
            })
            .unwrap();
            assert_eq!(latent[(0, 0)], single_rate_amplification(&a, 0.4).unwrap()[(0, 0)]);
            let active = multirate_amplification(&StabilitySetup {
                a: a.clone(),
                h: 0.4,
                partition: ActivePartition::full(1),
                kind,
            })
            .unwrap();
            assert!((active[(0, 0)] - r_scalar(-1.0).powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_matrix_sweep_is_identity() {
        let rep = norm_sweep(&DenseMatrix::zeros(3, 3), &ActivePartition::new(vec![1], 3).unwrap(), &KINDS, &default_grid()).unwrap();
        assert_eq!(rep.rows.len(), 120);
        for r in &rep.rows {
            for v in [r.multirate.norm1, r.multirate.norm2, r.multirate.norminf, r.multirate.spectral_radius] {
                assert!((v - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 60);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[59] - 100.0).abs() < 1e-12);
        assert!(norm_sweep(&scalar(-1.0), &ActivePartition::full(1), &KINDS, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn model_system_properties() {
        let (s1, p1) = model_system(ModelSystem::Sys1);
        assert_eq!(p1.indices(), &[1]);
        let tr: f64 = s1[(0, 0)] + s1[(1, 1)];
        let det = s1[(0, 0)] * s1[(1, 1)] - s1[(0, 1)] * s1[(1, 0)];
        let disc = tr * tr - 4.0 * det;
        // real distinct roots (tr ± sqrt(disc)) / 2, both negative
        assert!(disc > 0.0 && (tr + disc.sqrt()) / 2.0 < 0.0);
        for ev in eigenvalues(&s1).unwrap() {
            assert!(ev.re < 0.0);
        }

        let (s2, _) = model_system(ModelSystem::Sys2NoFriction);
        // characteristic polynomial of the undamped pair: l^4 + (k1+2k2) l^2 + k1 k2 = 0
        let (k1, k2) = (1.0f64, 1e6f64);
        let b = k1 + 2.0 * k2;
        let c = k1 * k2;
        let roots_sq = [(-b + (b * b - 4.0 * c).sqrt()) / 2.0, (-b - (b * b - 4.0 * c).sqrt()) / 2.0];
        assert!(roots_sq.iter().all(|&r| r < 0.0));
        let mut freqs: Vec<f64> = eigenvalues(&s2).unwrap().iter().map(|z| z.im.abs()).collect();
        freqs.sort_by(f64::total_cmp);
        for ev in eigenvalues(&s2).unwrap() {
            assert!(ev.re.abs() <= 1e-6 * ev.norm());
        }
        let mut want: Vec<f64> = roots_sq.iter().flat_map(|r| [(-r).sqrt(), (-r).sqrt()]).collect();
        want.sort_by(f64::total_cmp);
        for (x, y) in freqs.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-6 * y);
        }

        let (heat, part) = model_system(ModelSystem::Heat40);
        assert_eq!(part.complement(), (0..20).collect::<Vec<_>>());
        for i in 1..39 {
            if i == 19 || i == 20 {
                continue;
            }
            let sum: f64 = heat.row(i).iter().sum();
            assert!(sum.abs() < 1e-9 * heat[(i, i)].abs());
        }
        let (adv, _) = model_system(ModelSystem::Adv40);
        // conservative form: every column sums to zero
        for j in 0..40 {
            assert!((0..40).map(|i| adv[(i, j)]).sum::<f64>().abs() < 1e-9);
        }
        assert!(matches!("sys9".parse::<ModelSystem>(), Err(StabilityError::UnknownSystem(_))));
        assert_eq!("advdiff40".parse::<ModelSystem>().unwrap(), ModelSystem::AdvDiff40);
    }
}
