//! ODE problem definition, Jacobian access and frozen-component subsystems.

use std::fmt;
use std::sync::Arc;

use crate::linalg::DenseMatrix;

/// Right-hand side writing `f(t, y)` into the output slice.
pub type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Jacobian writing `df/dy (t, y)` into a zeroed `m x m` matrix.
pub type JacobianFn = dyn Fn(f64, &[f64], &mut DenseMatrix) + Send + Sync;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("non-finite value in component {component} of {what}")]
    NonFiniteOutput { what: &'static str, component: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

#[derive(Clone)]
pub struct OdeProblem {
    name: String,
    dim: usize,
    rhs: Arc<RhsFn>,
    jacobian: Option<Arc<JacobianFn>>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(dim >= 1, "problem dimension must be positive");
        Self {
            name: name.into(),
            dim,
            rhs: Arc::new(rhs),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &[f64], &mut DenseMatrix) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// `y' = A y` with the exact Jacobian attached.
    pub fn linear(name: impl Into<String>, a: DenseMatrix) -> Self {
        assert!(a.is_square());
        let a = Arc::new(a);
        let a_rhs = Arc::clone(&a);
        Self::new(name, a.rows(), move |_, y, out| {
            out.copy_from_slice(&a_rhs.mul_vec(y));
        })
        .with_jacobian(move |_, _, jac| {
            *jac = (*a).clone();
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }
}

/// Sorted set of active component indices out of `dim`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivePartition {
    dim: usize,
    active: Vec<usize>,
}

impl ActivePartition {
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self, ProblemError> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(ProblemError::InvalidPartition(format!(
                "indices not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(ProblemError::InvalidPartition(format!(
                    "index {last} out of range for dimension {dim}"
                )));
            }
        }
        Ok(Self { dim, active: indices })
    }

    /// Builds a partition from any iterator of indices, sorting and deduplicating.
    pub fn from_unsorted(indices: impl IntoIterator<Item = usize>, dim: usize) -> Result<Self, ProblemError> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self::new(v, dim)
    }

    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            active: (0..dim).collect(),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, active: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.active.len() == self.dim
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    pub fn complement(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim - self.active.len());
        let mut it = self.active.iter().peekable();
        for i in 0..self.dim {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    /// Boolean membership mask of length `dim`.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for &i in &self.active {
            m[i] = true;
        }
        m
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&i| full[i]).collect()
    }

    pub fn scatter(&self, sub: &[f64], full: &mut [f64]) {
        for (&i, &v) in self.active.iter().zip(sub) {
            full[i] = v;
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = self.active.clone();
        v.extend_from_slice(&other.active);
        v.sort_unstable();
        v.dedup();
        Self { dim: self.dim, active: v }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            active: self.active.iter().copied().filter(|&i| other.contains(i)).collect(),
        }
    }
}

/// Evaluation counters owned by one integration run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    /// Scalar component evaluations: `m` per full call, `|active|` per subsystem call.
    pub scalar_rhs: u64,
    pub rhs_calls: u64,
    pub jacobian_calls: u64,
}

fn check_finite(v: &[f64], what: &'static str) -> Result<(), ProblemError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(ProblemError::NonFiniteOutput { what, component }),
        None => Ok(()),
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<(), ProblemError> {
    if expected != actual {
        return Err(ProblemError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub fn eval_rhs(
    p: &OdeProblem,
    t: f64,
    y: &[f64],
    counters: &mut EvalCounters,
) -> Result<Vec<f64>, ProblemError> {
    check_dim(p.dim, y.len())?;
    let mut out = vec![0.0; p.dim];
    (p.rhs)(t, y, &mut out);
    counters.scalar_rhs += p.dim as u64;
    counters.rhs_calls += 1;
    check_finite(&out, "rhs")?;
    Ok(out)
}

pub fn eval_jacobian(
    p: &OdeProblem,
    t: f64,
    y: &[f64],
    counters: &mut EvalCounters,
) -> Result<DenseMatrix, ProblemError> {
    check_dim(p.dim, y.len())?;
    counters.jacobian_calls += 1;
    let mut jac = DenseMatrix::zeros(p.dim, p.dim);
    match &p.jacobian {
        Some(j) => {
            j(t, y, &mut jac);
            if let Some(k) = jac.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(ProblemError::NonFiniteOutput {
                    what: "jacobian",
                    component: k,
                });
            }
        }
        None => {
            let f0 = eval_rhs(p, t, y, counters)?;
            let sqrt_eps = f64::EPSILON.sqrt();
            let mut yp = y.to_vec();
            for j in 0..p.dim {
                let inc = sqrt_eps * y[j].abs().max(1.0);
                yp[j] = y[j] + inc;
                let step = yp[j] - y[j];
                let f1 = eval_rhs(p, t, &yp, counters)?;
                for i in 0..p.dim {
                    jac[(i, j)] = (f1[i] - f0[i]) / step;
                }
                yp[j] = y[j];
            }
        }
    }
    Ok(jac)
}

/// Active components of `f(t, x ⊕ frozen)`.
pub fn eval_subsystem_rhs(
    p: &OdeProblem,
    t: f64,
    x: &[f64],
    frozen: &[f64],
    part: &ActivePartition,
    counters: &mut EvalCounters,
) -> Result<Vec<f64>, ProblemError> {
    check_dim(p.dim, frozen.len())?;
    check_dim(part.len(), x.len())?;
    if part.is_empty() {
        return Ok(Vec::new());
    }
    let mut y = frozen.to_vec();
    part.scatter(x, &mut y);
    let mut out = vec![0.0; p.dim];
    (p.rhs)(t, &y, &mut out);
    counters.scalar_rhs += part.len() as u64;
    counters.rhs_calls += 1;
    let sub = part.gather(&out);
    check_finite(&sub, "rhs")?;
    Ok(sub)
}

pub fn subsystem_jacobian(
    p: &OdeProblem,
    t: f64,
    y: &[f64],
    part: &ActivePartition,
    counters: &mut EvalCounters,
) -> Result<DenseMatrix, ProblemError> {
    let full = eval_jacobian(p, t, y, counters)?;
    if part.is_full() {
        return Ok(full);
    }
    Ok(full.select(part.indices(), part.indices()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn no_jacobian(p: &OdeProblem) -> OdeProblem {
        let rhs = Arc::clone(&p.rhs);
        OdeProblem::new(p.name.clone(), p.dim, move |t, y, out| rhs(t, y, out))
    }

    #[test]
    fn linear_rhs_and_counter() {
        let p = OdeProblem::linear("diag", DenseMatrix::from_diagonal(&[-1.0, -2.0]));
        let mut c = EvalCounters::default();
        assert_eq!(eval_rhs(&p, 3.0, &[1.0, 1.0], &mut c).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(c.scalar_rhs, 2);
        assert!(matches!(
            eval_rhs(&p, 0.0, &[1.0], &mut c),
            Err(ProblemError::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn non_finite_rhs_is_reported() {
        let p = OdeProblem::new("blow", 2, |_, y, out| {
            out[0] = y[0];
            out[1] = 1.0 / y[1];
        });
        let mut c = EvalCounters::default();
        assert!(matches!(
            eval_rhs(&p, 0.0, &[1.0, 0.0], &mut c),
            Err(ProblemError::NonFiniteOutput { component: 1, .. })
        ));
    }

    #[test]
    fn analytic_and_fd_jacobians_of_linear_problem() {
        let a = mat(&[vec![-1.0, 2.0, 0.5], vec![0.0, -300.0, 7.0], vec![4.0, 0.0, -1000.0]]);
        let p = OdeProblem::linear("lin", a.clone());
        let mut c = EvalCounters::default();
        let y = [0.3, -2.0, 5.0];
        assert_eq!(eval_jacobian(&p, 0.0, &y, &mut c).unwrap(), a);
        let fd = eval_jacobian(&no_jacobian(&p), 0.0, &y, &mut c).unwrap();
        assert!(fd.max_abs_diff(&a) <= 5e-6);
    }

    #[test]
    fn fd_jacobian_of_square() {
        let p = OdeProblem::new("sq", 1, |_, y, out| out[0] = y[0] * y[0]);
        let mut c = EvalCounters::default();
        let j = eval_jacobian(&p, 0.0, &[3.0], &mut c).unwrap();
        assert!((j[(0, 0)] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn subsystem_full_and_empty() {
        let a = mat(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 10.0]]);
        let p = OdeProblem::linear("lin", a);
        let mut c = EvalCounters::default();
        let y = [1.0, -1.0, 0.5];
        let full = ActivePartition::full(3);
        assert_eq!(
            eval_subsystem_rhs(&p, 0.0, &y, &y, &full, &mut c).unwrap(),
            eval_rhs(&p, 0.0, &y, &mut c).unwrap()
        );
        let empty = ActivePartition::empty(3);
        assert!(eval_subsystem_rhs(&p, 0.0, &[], &y, &empty, &mut c).unwrap().is_empty());
    }

    #[test]
    fn subsystem_matches_hand_reduction() {
        let a = mat(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 10.0]]);
        let p = OdeProblem::linear("lin", a);
        let part = ActivePartition::new(vec![0, 2], 3).unwrap();
        let frozen = [100.0, -0.5, 100.0];
        let x = [2.0, 3.0];
        let mut c = EvalCounters::default();
        let got = eval_subsystem_rhs(&p, 0.0, &x, &frozen, &part, &mut c).unwrap();
        // reduced system: [1 3; 7 10] x + [2; 8] * (-0.5)
        let oracle = [1.0 * 2.0 + 3.0 * 3.0 + 2.0 * -0.5, 7.0 * 2.0 + 10.0 * 3.0 + 8.0 * -0.5];
        assert_eq!(got, oracle);
        assert_eq!(c.scalar_rhs, 2);
    }

    #[test]
    fn subsystem_jacobian_is_submatrix() {
        let a = DenseMatrix::from_fn(4, 4, |i, j| (4 * i + j) as f64 + 1.0);
        let p = OdeProblem::linear("lin", a.clone());
        let mut c = EvalCounters::default();
        let y = [0.0; 4];
        let full = subsystem_jacobian(&p, 0.0, &y, &ActivePartition::full(4), &mut c).unwrap();
        assert_eq!(full, a);
        let part = ActivePartition::new(vec![0, 3], 4).unwrap();
        let sub = subsystem_jacobian(&p, 0.0, &y, &part, &mut c).unwrap();
        assert_eq!(sub, mat(&[vec![1.0, 4.0], vec![13.0, 16.0]]));
        let d = OdeProblem::linear("d", DenseMatrix::from_diagonal(&[-1.0, -7.0, -9.0]));
        let one = ActivePartition::new(vec![1], 3).unwrap();
        let sub = subsystem_jacobian(&d, 0.0, &[0.0; 3], &one, &mut c).unwrap();
        assert_eq!(sub.as_slice(), &[-7.0]);
    }

    #[test]
    fn partition_validation_and_complement() {
        assert!(ActivePartition::new(vec![2, 1], 3).is_err());
        assert!(ActivePartition::new(vec![1, 1], 3).is_err());
        assert!(ActivePartition::new(vec![3], 3).is_err());
        let p = ActivePartition::new(vec![0, 2, 5], 7).unwrap();
        assert_eq!(p.complement(), vec![1, 3, 4, 6]);
        assert!(ActivePartition::empty(3).complement() == vec![0, 1, 2]);
        assert!(ActivePartition::full(3).complement().is_empty());
    }

    proptest::proptest! {
        #[test]
        fn scatter_gather_round_trip(mask in proptest::collection::vec(proptest::bool::ANY, 1..20),
                                     seed in -100.0f64..100.0) {
            let dim = mask.len();
            let part = ActivePartition::new((0..dim).filter(|&i| mask[i]).collect(), dim).unwrap();
            let sub: Vec<f64> = (0..part.len()).map(|k| seed + k as f64 * 0.37).collect();
            let mut full = vec![f64::NAN; dim];
            part.scatter(&sub, &mut full);
            proptest::prop_assert_eq!(part.gather(&full), sub);
            let mut all = part.indices().to_vec();
            all.extend(part.complement());
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (0..dim).collect::<Vec<_>>());
        }

        #[test]
        fn full_subsystem_equals_rhs(y in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let p = OdeProblem::new("nl", 3, |t, y, out| {
                out[0] = -y[0] * y[1] + t.sin();
                out[1] = y[0] * y[0] - y[2];
                out[2] = (y[1] * 0.1).exp() - y[2];
            });
            let mut c = EvalCounters::default();
            let full = eval_rhs(&p, 0.4, &y, &mut c).unwrap();
            let sub = eval_subsystem_rhs(&p, 0.4, &y, &y, &ActivePartition::full(3), &mut c).unwrap();
            proptest::prop_assert_eq!(full, sub);
        }
    }
}
