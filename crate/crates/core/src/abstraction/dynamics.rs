//! Sampled-data semantics: hold the input for `τ` and integrate.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::AbstractionError;
use crate::geometry::AxisBox;

/// RK4 sub-steps per sampling period.
pub const RK4_SUBSTEPS: usize = 8;
/// Accuracy target of the integrator on affine benchmark dynamics, met
/// when `‖A‖∞ τ ≤ 0.25` and states are of order ten.
pub const TOL_INT: f64 = 1e-8;

/// `f(x, u, dx)` writes `ẋ` into `dx`.
pub type VectorField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Dynamics {
    /// `ẋ = u`.
    SingleIntegrator { dim: usize },
    /// `ẋ = Ax + Bu`.
    Affine { a: DMatrix<f64>, b: DMatrix<f64> },
    /// User-registered vector field.
    Custom { name: String, state_dim: usize, input_dim: usize, field: VectorField },
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::SingleIntegrator { dim } => write!(f, "SingleIntegrator({dim})"),
            Dynamics::Affine { a, b } => write!(f, "Affine({}x{}, {}x{})", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
            Dynamics::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Dynamics {
    pub fn state_dim(&self) -> usize {
        match self {
            Dynamics::SingleIntegrator { dim } => *dim,
            Dynamics::Affine { a, .. } => a.nrows(),
            Dynamics::Custom { state_dim, .. } => *state_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Dynamics::SingleIntegrator { dim } => *dim,
            Dynamics::Affine { b, .. } => b.ncols(),
            Dynamics::Custom { input_dim, .. } => *input_dim,
        }
    }

    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        match self {
            Dynamics::SingleIntegrator { .. } => dx.copy_from_slice(u),
            Dynamics::Affine { a, b } => {
                for r in 0..a.nrows() {
                    let mut s = 0.0;
                    for c in 0..a.ncols() {
                        s += a[(r, c)] * x[c];
                    }
                    for c in 0..b.ncols() {
                        s += b[(r, c)] * u[c];
                    }
                    dx[r] = s;
                }
            }
            Dynamics::Custom { field, .. } => field(x, u, dx),
        }
    }

    /// A Lipschitz constant in the infinity norm where one is known.
    pub fn default_lipschitz(&self) -> Option<f64> {
        match self {
            Dynamics::SingleIntegrator { .. } => Some(0.0),
            Dynamics::Affine { a, .. } => Some((0..a.nrows()).map(|r| a.row(r).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)),
            Dynamics::Custom { .. } => None,
        }
    }
}

/// Named vector fields with declared Lipschitz constants.
#[derive(Clone, Default)]
pub struct DynamicsRegistry {
    entries: BTreeMap<String, (Dynamics, f64)>,
}

impl DynamicsRegistry {
    pub fn register(&mut self, name: &str, state_dim: usize, input_dim: usize, lipschitz: f64, field: VectorField) {
        let dynamics = Dynamics::Custom { name: name.to_string(), state_dim, input_dim, field };
        self.entries.insert(name.to_string(), (dynamics, lipschitz));
    }

    pub fn get(&self, name: &str) -> Result<(Dynamics, f64), AbstractionError> {
        self.entries.get(name).cloned().ok_or_else(|| AbstractionError::UnknownDynamics(name.to_string()))
    }
}

/// `T_τ(Σ)`.
#[derive(Clone, Debug)]
pub struct SampledSystem {
    pub dynamics: Dynamics,
    pub tau: f64,
    pub lipschitz: f64,
    pub state_box: AxisBox,
    pub input_box: AxisBox,
}

impl SampledSystem {
    pub fn new(dynamics: Dynamics, tau: f64, lipschitz: f64, state_box: AxisBox, input_box: AxisBox) -> Result<Self, AbstractionError> {
        if !(tau > 0.0) {
            return Err(AbstractionError::Config(format!("tau must be positive, got {tau}")));
        }
        if !(lipschitz >= 0.0) {
            return Err(AbstractionError::Config(format!("lipschitz must be nonnegative, got {lipschitz}")));
        }
        if dynamics.state_dim() != state_box.dim() || dynamics.input_dim() != input_box.dim() {
            return Err(AbstractionError::Config("dynamics and boxes disagree on dimension".into()));
        }
        Ok(Self { dynamics, tau, lipschitz, state_box, input_box })
    }

    /// Growth factor `e^{Lτ}`.
    pub fn growth(&self) -> f64 {
        (self.lipschitz * self.tau).exp()
    }

    /// Flow at time `τ` from `x` under constant `u`, fixed-step RK4.
    pub fn integrate(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let n = x.len();
        let h = self.tau / RK4_SUBSTEPS as f64;
        let mut s = x.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for _ in 0..RK4_SUBSTEPS {
            self.dynamics.eval(&s, u, &mut k1);
            for i in 0..n {
                tmp[i] = s[i] + 0.5 * h * k1[i];
            }
            self.dynamics.eval(&tmp, u, &mut k2);
            for i in 0..n {
                tmp[i] = s[i] + 0.5 * h * k2[i];
            }
            self.dynamics.eval(&tmp, u, &mut k3);
            for i in 0..n {
                tmp[i] = s[i] + h * k3[i];
            }
            self.dynamics.eval(&tmp, u, &mut k4);
            for i in 0..n {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s
    }

    pub fn integrate2(&self, x: [f64; 2], u: &[f64]) -> [f64; 2] {
        if let Dynamics::SingleIntegrator { .. } = self.dynamics {
            // RK4 is exact here; skip the sub-steps.
            return [x[0] + self.tau * u[0], x[1] + self.tau * u[1]];
        }
        let v = self.integrate(&x, u);
        [v[0], v[1]]
    }
}

/// Closed-form affine flow via the augmented matrix exponential.
pub fn affine_flow(a: &DMatrix<f64>, b: &DMatrix<f64>, tau: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    let bu = b * DVector::from_column_slice(u);
    m.view_mut((0, n), (n, 1)).copy_from(&bu);
    let e = (m * tau).exp();
    let mut xa = DVector::zeros(n + 1);
    xa.rows_mut(0, n).copy_from(&DVector::from_column_slice(x));
    xa[n] = 1.0;
    (e * xa).rows(0, n).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boxes(n: usize) -> (AxisBox, AxisBox) {
        (AxisBox::new(vec![-10.0; n], vec![10.0; n]).unwrap(), AxisBox::new(vec![-2.0; n], vec![2.0; n]).unwrap())
    }

    #[test]
    fn single_integrator_moves_by_tau_u() {
        let (x, u) = boxes(2);
        let sys = SampledSystem::new(Dynamics::SingleIntegrator { dim: 2 }, 0.5, 0.0, x, u).unwrap();
        assert_eq!(sys.integrate(&[0.0, 0.0], &[1.0, 0.0]), vec![0.5, 0.0]);
        assert_eq!(sys.integrate(&[3.0, -1.0], &[0.0, 0.0]), vec![3.0, -1.0]);
        assert_eq!(sys.integrate2([0.0, 0.0], &[1.0, 0.0]), [0.5, 0.0]);
    }

    #[test]
    fn rk4_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.25..0.25));
            let b = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let (xb, ub) = boxes(2);
            let sys = SampledSystem::new(Dynamics::Affine { a: a.clone(), b: b.clone() }, 0.5, 1.0, xb, ub).unwrap();
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let u = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let got = sys.integrate(&x, &u);
            let want = affine_flow(&a, &b, 0.5, &x, &u);
            for k in 0..2 {
                assert!((got[k] - want[k]).abs() <= TOL_INT, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn unknown_dynamics_is_an_error() {
        let reg = DynamicsRegistry::default();
        assert!(matches!(reg.get("pendulum"), Err(AbstractionError::UnknownDynamics(_))));
    }

    #[test]
    fn custom_field_is_integrated() {
        let mut reg = DynamicsRegistry::default();
        reg.register("drift", 2, 2, 0.0, Arc::new(|_x, u, dx| {
            dx[0] = u[0] + 1.0;
            dx[1] = u[1];
        }));
        let (d, l) = reg.get("drift").unwrap();
        let (xb, ub) = boxes(2);
        let sys = SampledSystem::new(d, 0.5, l, xb, ub).unwrap();
        let y = sys.integrate(&[0.0, 0.0], &[0.0, 0.0]);
        assert!((y[0] - 0.5).abs() < 1e-12);
    }
}
