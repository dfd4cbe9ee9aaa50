//! Executable VCCM control laws: control-path integration, feedforward and
//! the virtual target generator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geodesic::{energy, solve_geodesic, GeodesicError, GeodesicOptions, Metric, Path};
use crate::quadrature::{GL_NODES, GL_WEIGHTS};
use crate::model::{SchedulingMap, System, VirtualModel};
use crate::symdyn::{CompiledField, EvalError, FieldError, VarGroup, VectorField};
use crate::synthesis::Certificate;

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("feedforward: {0}")]
    Feedforward(String),
}

/// Reference values at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefSample {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub x_dot: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Energy of the path used; a straight path when the gain is path independent.
    pub geodesic_energy: f64,
    pub geodesic_gradient: f64,
    pub geodesic_converged: bool,
    /// ψ left the scheduling box somewhere along the path.
    pub saturated: bool,
    pub feedforward_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub u: Vec<f64>,
    /// Derivative of the controller's internal state.
    pub state_dot: Vec<f64>,
    pub diag: Diagnostics,
}

/// A feedback law with optional continuous internal state.
pub trait Controller: Send + Sync {
    fn name(&self) -> &str;

    fn state_dim(&self) -> usize {
        0
    }

    fn initial_state(&self, _x0: &[f64], _r0: &RefSample) -> Vec<f64> {
        Vec::new()
    }

    fn output(&self, t: f64, x: &[f64], state: &[f64], r: &RefSample) -> Result<ControlOutput, ControlError>;
}

/// u = u*.
pub struct OpenLoop;

impl Controller for OpenLoop {
    fn name(&self) -> &str {
        "open-loop"
    }
    fn output(&self, _: f64, _: &[f64], _: &[f64], r: &RefSample) -> Result<ControlOutput, ControlError> {
        Ok(ControlOutput {
            u: r.u.clone(),
            state_dot: Vec::new(),
            diag: Diagnostics {
                geodesic_converged: true,
                ..Default::default()
            },
        })
    }
}

/// ν(1) for dν/ds = K(c(s), x, ν)·∂_s c, ν(0) = μ*, RK4 with `steps` per segment.
pub fn integrate_control_path<K>(k: K, path: &Path, x: &DVector<f64>, mu_star: &DVector<f64>, steps: usize) -> DVector<f64>
where
    K: Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> DMatrix<f64>,
{
    let steps = steps.max(1);
    let n = path.segments();
    let h = 1.0 / (n * steps) as f64;
    let mut nu = mu_star.clone();
    for i in 0..n {
        let tangent = path.tangent(i);
        let (a, b) = (&path.nodes()[i], &path.nodes()[i + 1]);
        let at = |local: f64| a * (1.0 - local) + b * local;
        let rhs = |local: f64, nu: &DVector<f64>| k(&at(local), x, nu) * &tangent;
        for j in 0..steps {
            let l0 = j as f64 / steps as f64;
            let dl = 1.0 / steps as f64;
            let k1 = rhs(l0, &nu);
            let k2 = rhs(l0 + 0.5 * dl, &(&nu + &k1 * (0.5 * h)));
            let k3 = rhs(l0 + 0.5 * dl, &(&nu + &k2 * (0.5 * h)));
            let k4 = rhs(l0 + dl, &(&nu + &k3 * h));
            nu += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    nu
}

/// μ* + ∫ K(c(s), x) c'(s) ds by Gauss–Legendre panels on each path segment.
pub fn quadrature_control_path<K>(k: K, path: &Path, x: &DVector<f64>, mu_star: &DVector<f64>, panels: usize) -> DVector<f64>
where
    K: Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64>,
{
    let panels = panels.max(1);
    let mut nu = mu_star.clone();
    for i in 0..path.segments() {
        let (a, b) = (&path.nodes()[i], &path.nodes()[i + 1]);
        let delta = b - a;
        let h = 1.0 / panels as f64;
        for j in 0..panels {
            let mid = (j as f64 + 0.5) * h;
            for (z, wgt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let l = mid + 0.5 * h * z;
                nu += k(&(a * (1.0 - l) + b * l), x) * &delta * (0.5 * h * wgt);
            }
        }
    }
    nu
}

/// μ minimizing |f̂(χ, x, μ, w) − ẋ*|, with the attained residual.
pub fn feedforward(
    virt: &VirtualModel,
    chi: &[f64],
    x: &[f64],
    w: &[f64],
    x_dot: &[f64],
) -> Result<(Vec<f64>, f64), ControlError> {
    let m = virt.dims.m;
    let zero = vec![0.0; m];
    let f0 = DVector::from_vec(virt.f(chi, x, &zero, w)?);
    let mut b = DMatrix::zeros(f0.len(), m);
    for j in 0..m {
        let mut e = zero.clone();
        e[j] = 1.0;
        let fj = DVector::from_vec(virt.f(chi, x, &e, w)?);
        b.set_column(j, &(fj - &f0));
    }
    let target = DVector::from_column_slice(x_dot) - &f0;
    let svd = b.clone().svd(true, true);
    let mu = svd
        .solve(&target, 1e-12)
        .map_err(|e| ControlError::Feedforward(e.to_string()))?;
    let residual = (&b * &mu - target).amax();
    Ok((mu.iter().copied().collect(), residual))
}

/// Samples (x*, u*, w*, x) in the box and reports the largest feedforward residual of
/// f̂(x*, x, μ, w*) = f̂(x*, x*, u*, w*).
pub fn exact_feedforward_residual(sys: &System, samples: usize, seed: u64) -> Result<f64, ControlError> {
    let d = sys.dims;
    let [lo, hi] = sys.sample_box;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(lo..=hi)).collect() };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (xs, us, ws, x) = (draw(d.n), draw(d.m), draw(d.p), draw(d.n));
        let Ok(xdot) = sys.virt.f(&xs, &xs, &us, &ws) else { continue };
        if xdot.iter().any(|v| !v.is_finite()) {
            continue;
        }
        if let Ok((_, r)) = feedforward(&sys.virt, &xs, &x, &ws, &xdot) {
            if r.is_finite() {
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

pub const FEEDFORWARD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedforwardChoice {
    /// Exact solve when it exists at sampled points, else virtual target generator.
    #[default]
    Auto,
    /// χ* = x*, μ* from the least-squares solve.
    LinearSolve,
    /// χ* integrated by the virtual target generator.
    Vtr,
    /// μ* from expressions in chi (= x*), x, w and t.
    Expression(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealizationOptions {
    pub geodesic: GeodesicOptions,
    /// Gauss–Legendre panels for the gain integral along a straight path.
    pub path_steps: usize,
    pub feedforward: FeedforwardChoice,
    pub a2_samples: usize,
    pub seed: u64,
}

impl Default for RealizationOptions {
    fn default() -> Self {
        Self {
            geodesic: GeodesicOptions::default(),
            path_steps: 16,
            feedforward: FeedforwardChoice::Auto,
            a2_samples: 256,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedforwardMode {
    LinearSolve,
    Vtr,
    Expression,
}

/// Metric W(σ)⁻¹ with σ = sat(ψ(χ, x, w)).
pub struct ScheduledMetric<'a> {
    pub cert: &'a Certificate,
    pub sched: &'a SchedulingMap,
    pub w: &'a [f64],
}

impl ScheduledMetric<'_> {
    fn sigma(&self, chi: &DVector<f64>, x: &DVector<f64>) -> (Vec<f64>, bool) {
        match self.sched.eval(chi.as_slice(), x.as_slice(), self.w) {
            Ok(s) => self.sched.saturate(&s),
            Err(_) => (self.sched.lo.clone(), true),
        }
    }
}

impl Metric for ScheduledMetric<'_> {
    fn eval(&self, chi: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        self.cert.metric_at(&self.sigma(chi, x).0)
    }
    fn constant_in_chi(&self) -> bool {
        self.cert.metric_is_constant() || !self.sched.depends_on_chi()
    }
}

/// The VCCM true realization: feedforward, geodesic and control-path integral.
pub struct VccmController {
    name: String,
    virt: VirtualModel,
    sched: SchedulingMap,
    cert: Certificate,
    opts: RealizationOptions,
    mode: FeedforwardMode,
    user: Option<CompiledField>,
    a2_residual: f64,
    gain_path_independent: bool,
}

impl VccmController {
    pub fn new(sys: &System, cert: Certificate, opts: RealizationOptions) -> Result<Self, ControlError> {
        if cert.basis.n != sys.dims.n || cert.basis.m != sys.dims.m || cert.basis.w.n_vars != sys.sched.len() {
            return Err(ControlError::Dimension("certificate does not match the system".into()));
        }
        let a2_residual = exact_feedforward_residual(sys, opts.a2_samples, opts.seed)?;
        let (mode, user) = match &opts.feedforward {
            FeedforwardChoice::Auto if a2_residual <= FEEDFORWARD_TOL => (FeedforwardMode::LinearSolve, None),
            FeedforwardChoice::Auto | FeedforwardChoice::Vtr => (FeedforwardMode::Vtr, None),
            FeedforwardChoice::LinearSolve => (FeedforwardMode::LinearSolve, None),
            FeedforwardChoice::Expression(exprs) => {
                if exprs.len() != sys.dims.m {
                    return Err(ControlError::Dimension(format!("{} feedforward expressions for {} inputs", exprs.len(), sys.dims.m)));
                }
                let groups = vec![
                    VarGroup::indexed("chi", sys.dims.n),
                    VarGroup::indexed("x", sys.dims.n),
                    VarGroup::indexed("w", sys.dims.p),
                    VarGroup::scalar("t"),
                ];
                let field = VectorField::parse(exprs, groups)?;
                (FeedforwardMode::Expression, Some(field.compile()?))
            }
        };
        let gain_path_independent = cert.gain_is_constant() || !sys.sched.depends_on_chi();
        Ok(Self {
            gain_path_independent,
            name: "vccm".into(),
            virt: sys.virt.clone(),
            sched: sys.sched.clone(),
            cert,
            opts,
            mode,
            user,
            a2_residual,
        })
    }

    pub fn mode(&self) -> FeedforwardMode {
        self.mode
    }

    /// Largest sampled residual of the exact feedforward solve.
    pub fn a2_residual(&self) -> f64 {
        self.a2_residual
    }

    pub fn certificate(&self) -> &Certificate {
        &self.cert
    }

    /// (χ*, μ*, χ̇*, residual) for the current mode.
    fn target(&self, t: f64, x: &[f64], state: &[f64], r: &RefSample) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64), ControlError> {
        match self.mode {
            FeedforwardMode::LinearSolve => {
                let (mu, res) = feedforward(&self.virt, &r.x, x, &r.w, &r.x_dot)?;
                Ok((r.x.clone(), mu, Vec::new(), res))
            }
            FeedforwardMode::Expression => {
                let field = self.user.as_ref().expect("compiled with the mode");
                let mu = field.eval_groups(&[&r.x, x, &r.w, &[t]])?;
                Ok((r.x.clone(), mu, Vec::new(), 0.0))
            }
            FeedforwardMode::Vtr => {
                let (mu, res) = feedforward(&self.virt, state, x, &r.w, &r.x_dot)?;
                let chi_dot = self.virt.f(state, x, &mu, &r.w)?;
                Ok((state.to_vec(), mu, chi_dot, res))
            }
        }
    }
}

impl Controller for VccmController {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        match self.mode {
            FeedforwardMode::Vtr => self.virt.dims.n,
            _ => 0,
        }
    }

    fn initial_state(&self, _x0: &[f64], r0: &RefSample) -> Vec<f64> {
        match self.mode {
            FeedforwardMode::Vtr => r0.x.clone(),
            _ => Vec::new(),
        }
    }

    fn output(&self, t: f64, x: &[f64], state: &[f64], r: &RefSample) -> Result<ControlOutput, ControlError> {
        let (chi_star, mu_star, state_dot, residual) = self.target(t, x, state, r)?;
        let metric = ScheduledMetric {
            cert: &self.cert,
            sched: &self.sched,
            w: &r.w,
        };
        let xv = DVector::from_column_slice(x);
        let chi_v = DVector::from_vec(chi_star);
        let mu_v = DVector::from_vec(mu_star);
        if self.gain_path_independent && !metric.constant_in_chi() {
            // any path gives the same control; the straight one is reported
            let path = Path::straight(&chi_v, &xv, self.opts.geodesic.segments.max(1))?;
            let (s, saturated) = metric.sigma(&chi_v, &xv);
            let u = &mu_v + self.cert.gain_at(&s) * (&xv - &chi_v);
            return Ok(ControlOutput {
                u: u.iter().copied().collect(),
                state_dot,
                diag: Diagnostics {
                    geodesic_energy: energy(&metric, &path, &xv),
                    geodesic_gradient: 0.0,
                    geodesic_converged: true,
                    saturated,
                    feedforward_residual: residual,
                },
            });
        }
        let geo = solve_geodesic(&metric, &xv, &chi_v, &xv, &self.opts.geodesic)?;
        if self.gain_path_independent {
            let (s, saturated) = metric.sigma(&chi_v, &xv);
            let u = &mu_v + self.cert.gain_at(&s) * (&xv - &chi_v);
            return Ok(ControlOutput {
                u: u.iter().copied().collect(),
                state_dot,
                diag: Diagnostics {
                    geodesic_energy: geo.energy,
                    geodesic_gradient: geo.gradient_norm,
                    geodesic_converged: geo.converged,
                    saturated,
                    feedforward_residual: residual,
                },
            });
        }
        let saturated = std::cell::Cell::new(false);
        let gain = |c: &DVector<f64>, x: &DVector<f64>| {
            let (s, sat) = metric.sigma(c, x);
            if sat {
                saturated.set(true);
            }
            self.cert.gain_at(&s)
        };
        let u = if metric.constant_in_chi() {
            let line = Path::straight(&chi_v, &xv, 1)?;
            quadrature_control_path(gain, &line, &xv, &mu_v, self.opts.path_steps)
        } else {
            quadrature_control_path(gain, &geo.path, &xv, &mu_v, 1)
        };
        Ok(ControlOutput {
            u: u.iter().copied().collect(),
            state_dot,
            diag: Diagnostics {
                geodesic_energy: geo.energy,
                geodesic_gradient: geo.gradient_norm,
                geodesic_converged: geo.converged,
                saturated: saturated.get(),
                feedforward_residual: residual,
            },
        })
    }
}

/// One RK4 step of the controller state with x held; `reference` gives the
/// reference at stage times.
pub fn vtr_step(
    ctrl: &dyn Controller,
    t: f64,
    x: &[f64],
    state: &[f64],
    reference: &dyn Fn(f64) -> Result<RefSample, ControlError>,
    dt: f64,
) -> Result<Vec<f64>, ControlError> {
    if ctrl.state_dim() == 0 {
        return Ok(Vec::new());
    }
    let f = |tt: f64, z: &[f64]| -> Result<DVector<f64>, ControlError> {
        let r = reference(tt)?;
        Ok(DVector::from_vec(ctrl.output(tt, x, z, &r)?.state_dot))
    };
    let z = DVector::from_column_slice(state);
    let k1 = f(t, z.as_slice())?;
    let k2 = f(t + 0.5 * dt, (&z + &k1 * (0.5 * dt)).as_slice())?;
    let k3 = f(t + 0.5 * dt, (&z + &k2 * (0.5 * dt)).as_slice())?;
    let k4 = f(t + dt, (&z + &k3 * dt).as_slice())?;
    Ok((z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)).iter().copied().collect())
}
