//! Plants, virtual systems, scheduling maps and target behaviours.

mod registry;
mod spec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::symdyn::{
    diff, fold, parse, CompiledField, CompiledMatrix, EvalError, Expr,
    FieldError, ParseError, VarEnv, VarGroup, VectorField,
};

pub use registry::{registry, registry_names, system_by_name};
pub use spec::{LpvSpec, SystemSpec, TargetSpec};

/// Name of the equilibrium-family parameter in family expressions.
pub const FAMILY_PARAM: &str = "p";
/// Name of the time variable in trajectory expressions.
pub const TIME_VAR: &str = "t";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{what}: {source}")]
    Field {
        what: String,
        #[source]
        source: FieldError,
    },
    #[error("{what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: ParseError,
    },
    #[error("{what}: expected {expected} entries, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("scheduling map: {0}")]
    Scheduling(String),
    #[error("invalid box: {0}")]
    Box(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// State, input, disturbance and performance-output dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
}

fn field(what: &str, texts: &[String], groups: Vec<VarGroup>, len: usize) -> Result<VectorField, ModelError> {
    if texts.len() != len {
        return Err(ModelError::Dimension {
            what: what.into(),
            expected: len,
            found: texts.len(),
        });
    }
    let f = VectorField::parse(texts, groups).map_err(|source| ModelError::Field {
        what: what.into(),
        source,
    })?;
    // parsing keeps literal structure; fold once so that derived Jacobians
    // and scheduling patterns share the same canonical form
    VectorField::new(f.entries().iter().map(fold).collect(), f.groups().to_vec()).map_err(|source| {
        ModelError::Field {
            what: what.into(),
            source,
        }
    })
}

fn compile(what: &str, f: &VectorField) -> Result<CompiledField, ModelError> {
    f.compile().map_err(|source| ModelError::Field {
        what: what.into(),
        source,
    })
}

pub fn plant_groups(d: Dims) -> Vec<VarGroup> {
    vec![
        VarGroup::indexed("x", d.n),
        VarGroup::indexed("u", d.m),
        VarGroup::indexed("w", d.p),
    ]
}

fn virtual_groups(d: Dims) -> Vec<VarGroup> {
    vec![
        VarGroup::indexed("chi", d.n),
        VarGroup::indexed("x", d.n),
        VarGroup::indexed("mu", d.m),
        VarGroup::indexed("w", d.p),
    ]
}

fn schedule_groups(d: Dims) -> Vec<VarGroup> {
    vec![
        VarGroup::indexed("chi", d.n),
        VarGroup::indexed("x", d.n),
        VarGroup::indexed("w", d.p),
    ]
}

/// ẋ = f(x, u, w), z = h(x, u, w).
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub dims: Dims,
    pub f: VectorField,
    pub h: VectorField,
    fc: CompiledField,
    hc: CompiledField,
}

impl PlantModel {
    pub fn new(dims: Dims, f: &[String], h: &[String]) -> Result<Self, ModelError> {
        let f = field("f", f, plant_groups(dims), dims.n)?;
        let h = field("h", h, plant_groups(dims), dims.q)?;
        Ok(Self {
            dims,
            fc: compile("f", &f)?,
            hc: compile("h", &h)?,
            f,
            h,
        })
    }

    pub fn f(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.fc.eval_groups(&[x, u, w])
    }

    pub fn h(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.hc.eval_groups(&[x, u, w])
    }

    /// ∂f/∂u as expressions over (x, u, w).
    pub fn input_jacobian(&self) -> Vec<Vec<Expr>> {
        self.f.jacobian("u").expect("plant declares u")
    }
}

/// χ̇ = f̂(χ, x, μ, w), ζ = ĥ(χ, x, μ, w).
#[derive(Debug, Clone)]
pub struct VirtualModel {
    pub dims: Dims,
    pub fhat: VectorField,
    pub hhat: VectorField,
    fc: CompiledField,
    hc: CompiledField,
}

impl VirtualModel {
    pub fn new(dims: Dims, fhat: &[String], hhat: &[String]) -> Result<Self, ModelError> {
        let fhat = field("fhat", fhat, virtual_groups(dims), dims.n)?;
        let hhat = field("hhat", hhat, virtual_groups(dims), dims.q)?;
        Self::from_fields(dims, fhat, hhat)
    }

    pub fn from_fields(dims: Dims, fhat: VectorField, hhat: VectorField) -> Result<Self, ModelError> {
        Ok(Self {
            dims,
            fc: compile("fhat", &fhat)?,
            hc: compile("hhat", &hhat)?,
            fhat,
            hhat,
        })
    }

    pub fn f(&self, chi: &[f64], x: &[f64], mu: &[f64], w: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.fc.eval_groups(&[chi, x, mu, w])
    }

    pub fn h(&self, chi: &[f64], x: &[f64], mu: &[f64], w: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.hc.eval_groups(&[chi, x, mu, w])
    }

    /// The six Jacobians of the differential dynamics.
    pub fn linearize(&self) -> DiffDynamics {
        let jac = |f: &VectorField, g: &str| f.jacobian(g).expect("virtual groups are fixed");
        DiffDynamics {
            dims: self.dims,
            a: jac(&self.fhat, "chi"),
            b: jac(&self.fhat, "mu"),
            bw: jac(&self.fhat, "w"),
            c: jac(&self.hhat, "chi"),
            d: jac(&self.hhat, "mu"),
            dw: jac(&self.hhat, "w"),
        }
    }

    /// Whether f̂ is affine in μ (∂f̂/∂μ free of μ).
    pub fn affine_in_mu(&self) -> bool {
        let mu = VarGroup::indexed("mu", self.dims.m);
        self.linearize()
            .b
            .iter()
            .flatten()
            .all(|e| mu.vars.iter().all(|v| !e.depends_on(v)))
    }
}

/// Jacobian matrices of the virtual system over σ = (χ, x, μ, w).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffDynamics {
    pub dims: Dims,
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Vec<Expr>>,
    pub bw: Vec<Vec<Expr>>,
    pub c: Vec<Vec<Expr>>,
    pub d: Vec<Vec<Expr>>,
    pub dw: Vec<Vec<Expr>>,
}

/// Numeric values of the six Jacobians at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bw: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dw: DMatrix<f64>,
}

impl DiffDynamics {
    fn all(&self) -> [(&'static str, &Vec<Vec<Expr>>, usize); 6] {
        let d = self.dims;
        [
            ("A", &self.a, d.n),
            ("B", &self.b, d.m),
            ("B_w", &self.bw, d.p),
            ("C", &self.c, d.n),
            ("D", &self.d, d.m),
            ("D_w", &self.dw, d.p),
        ]
    }

    /// Evaluates at (χ, x, μ, w).
    pub fn eval(&self, chi: &[f64], x: &[f64], mu: &[f64], w: &[f64]) -> Result<Matrices, EvalError> {
        let names = VectorField::new(vec![], virtual_groups(self.dims))
            .expect("groups are distinct")
            .input_names();
        let slots: Vec<f64> = [chi, x, mu, w].concat();
        let mats = self
            .all()
            .map(|(_, m, cols)| CompiledMatrix::new(m, cols, &names).and_then(|c| c.eval(&slots)));
        let [a, b, bw, c, d, dw] = mats;
        Ok(Matrices {
            a: a?,
            b: b?,
            bw: bw?,
            c: c?,
            d: d?,
            dw: dw?,
        })
    }

    /// Rewrites every entry in the scheduling variables by replacing the
    /// subtrees ψ_i with s_i. Fails if any other variable survives.
    pub fn schedule(&self, map: &SchedulingMap) -> Result<ScheduledDynamics, ModelError> {
        let patterns: Vec<(Expr, Expr)> = map
            .psi
            .iter()
            .zip(&map.vars)
            .map(|(p, s)| (p.clone(), Expr::var(s.clone())))
            .collect();
        let rewrite = |name: &str, m: &Vec<Vec<Expr>>| -> Result<Vec<Vec<Expr>>, ModelError> {
            m.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, e)| {
                            let r = fold(&e.replace_subtrees(&patterns));
                            if let Some(v) = r.variables().into_iter().find(|v| !map.vars.contains(v)) {
                                return Err(ModelError::Scheduling(format!(
                                    "{name}[{i},{j}] = {e} depends on `{v}`, which is not covered by the scheduling map"
                                )));
                            }
                            Ok(r)
                        })
                        .collect()
                })
                .collect()
        };
        let sd = ScheduledDynamics::new(
            self.dims,
            map.vars.clone(),
            [
                rewrite("A", &self.a)?,
                rewrite("B", &self.b)?,
                rewrite("B_w", &self.bw)?,
                rewrite("C", &self.c)?,
                rewrite("D", &self.d)?,
                rewrite("D_w", &self.dw)?,
            ],
        )?;
        sd.verify_against(self, map)?;
        Ok(sd)
    }
}

/// Differential dynamics expressed over scheduling variables only.
#[derive(Debug, Clone)]
pub struct ScheduledDynamics {
    pub dims: Dims,
    pub vars: Vec<String>,
    pub exprs: [Vec<Vec<Expr>>; 6],
    compiled: [CompiledMatrix; 6],
}

impl ScheduledDynamics {
    pub fn new(dims: Dims, vars: Vec<String>, exprs: [Vec<Vec<Expr>>; 6]) -> Result<Self, ModelError> {
        let cols = [dims.n, dims.m, dims.p, dims.n, dims.m, dims.p];
        let rows = [dims.n, dims.n, dims.n, dims.q, dims.q, dims.q];
        for (k, m) in exprs.iter().enumerate() {
            if m.len() != rows[k] || m.iter().any(|r| r.len() != cols[k]) {
                return Err(ModelError::Dimension {
                    what: format!("scheduled matrix {k}"),
                    expected: rows[k] * cols[k],
                    found: m.iter().map(Vec::len).sum(),
                });
            }
        }
        let mut compiled = Vec::with_capacity(6);
        for (k, m) in exprs.iter().enumerate() {
            compiled.push(CompiledMatrix::new(m, cols[k], &vars)?);
        }
        let compiled: [CompiledMatrix; 6] = compiled.try_into().expect("six matrices");
        Ok(Self {
            dims,
            vars,
            exprs,
            compiled,
        })
    }

    pub fn n_sigma(&self) -> usize {
        self.vars.len()
    }

    pub fn eval(&self, s: &[f64]) -> Result<Matrices, EvalError> {
        let [a, b, bw, c, d, dw] = &self.compiled;
        Ok(Matrices {
            a: a.eval(s)?,
            b: b.eval(s)?,
            bw: bw.eval(s)?,
            c: c.eval(s)?,
            d: d.eval(s)?,
            dw: dw.eval(s)?,
        })
    }

    /// Replaces the performance channel by ζ = χ (C = I, D = 0, D_w = 0).
    pub fn with_identity_output(&self) -> Self {
        let d = self.dims;
        let mut exprs = self.exprs.clone();
        exprs[3] = (0..d.n)
            .map(|i| (0..d.n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        exprs[4] = vec![vec![Expr::zero(); d.m]; d.n];
        exprs[5] = vec![vec![Expr::zero(); d.p]; d.n];
        Self::new(Dims { q: d.n, ..d }, self.vars.clone(), exprs).expect("identity output is well formed")
    }

    fn verify_against(&self, dd: &DiffDynamics, map: &SchedulingMap) -> Result<(), ModelError> {
        let d = self.dims;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut checked = 0;
        for _ in 0..64 {
            let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-2.0..2.0)).collect() };
            let (chi, x, mu, w) = (draw(d.n), draw(d.n), draw(d.m), draw(d.p));
            let (Ok(orig), Ok(s)) = (dd.eval(&chi, &x, &mu, &w), map.eval(&chi, &x, &w)) else {
                continue;
            };
            let Ok(sched) = self.eval(&s) else { continue };
            let pairs = [
                (&orig.a, &sched.a),
                (&orig.b, &sched.b),
                (&orig.bw, &sched.bw),
                (&orig.c, &sched.c),
                (&orig.d, &sched.d),
                (&orig.dw, &sched.dw),
            ];
            for (o, s) in pairs {
                let err = (o - s).amax();
                if err > 1e-9 * (1.0 + o.amax()) {
                    return Err(ModelError::Scheduling(format!(
                        "rewritten Jacobian differs from the original by {err:.3e}"
                    )));
                }
            }
            checked += 1;
        }
        if checked == 0 {
            return Err(ModelError::Scheduling("no sample point could be evaluated".into()));
        }
        Ok(())
    }
}

/// σ = ψ(χ, x, w) with values in a box 𝒫 and optional rate bounds.
#[derive(Debug, Clone)]
pub struct SchedulingMap {
    pub psi: Vec<Expr>,
    pub vars: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub rate: Option<Vec<[f64; 2]>>,
    compiled: CompiledField,
}

impl SchedulingMap {
    pub fn new(
        dims: Dims,
        psi: &[String],
        bounds: &[[f64; 2]],
        rate: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, ModelError> {
        let f = field("psi", psi, schedule_groups(dims), psi.len())?;
        if bounds.len() != psi.len() {
            return Err(ModelError::Dimension {
                what: "scheduling box".into(),
                expected: psi.len(),
                found: bounds.len(),
            });
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(ModelError::Box(format!("scheduling coordinate {i}: {lo} >= {hi}")));
            }
        }
        if let Some(r) = &rate {
            if r.len() != psi.len() || r.iter().any(|[lo, hi]| lo > hi) {
                return Err(ModelError::Box("rate bounds must match the scheduling map".into()));
            }
        }
        Ok(Self {
            psi: f.entries().to_vec(),
            vars: (1..=psi.len()).map(|i| format!("s{i}")).collect(),
            lo: bounds.iter().map(|b| b[0]).collect(),
            hi: bounds.iter().map(|b| b[1]).collect(),
            rate,
            compiled: compile("psi", &f)?,
        })
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn eval(&self, chi: &[f64], x: &[f64], w: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.compiled.eval_groups(&[chi, x, w])
    }

    /// Projects onto 𝒫; the flag reports whether any coordinate moved.
    pub fn saturate(&self, s: &[f64]) -> (Vec<f64>, bool) {
        let mut clipped = false;
        let out = s
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| {
                let c = v.clamp(lo, hi);
                clipped |= c != v;
                c
            })
            .collect();
        (out, clipped)
    }

    /// Whether ψ depends on χ (then metrics and gains vary along paths).
    pub fn depends_on_chi(&self) -> bool {
        self.psi.iter().any(|e| e.variables().iter().any(|v| v.starts_with("chi")))
    }
}

/// p ↦ (x_e(p), u_e(p), w_e(p)) with p in `range`.
#[derive(Debug, Clone)]
pub struct EquilibriumFamily {
    pub range: [f64; 2],
    pub x_e: Vec<Expr>,
    pub u_e: Vec<Expr>,
    pub w_e: Vec<Expr>,
    compiled: CompiledField,
    derivative: CompiledField,
    dims: Dims,
}

/// Point of an equilibrium family or trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RefPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

impl EquilibriumFamily {
    pub fn new(dims: Dims, range: [f64; 2], x_e: &[String], u_e: &[String], w_e: &[String]) -> Result<Self, ModelError> {
        if !(range[0] < range[1]) {
            return Err(ModelError::Box(format!("family range {range:?}")));
        }
        let g = || vec![VarGroup::scalar(FAMILY_PARAM)];
        let x_e = field("x_e", x_e, g(), dims.n)?.entries().to_vec();
        let u_e = field("u_e", u_e, g(), dims.m)?.entries().to_vec();
        let w_e = field("w_e", w_e, g(), dims.p)?.entries().to_vec();
        let all: Vec<Expr> = x_e.iter().chain(&u_e).chain(&w_e).cloned().collect();
        let d_all: Vec<Expr> = all.iter().map(|e| diff(e, FAMILY_PARAM)).collect();
        let compiled = compile("family", &VectorField::new(all, g()).expect("declared"))?;
        let derivative = compile("family'", &VectorField::new(d_all, g()).expect("declared"))?;
        Ok(Self {
            range,
            x_e,
            u_e,
            w_e,
            compiled,
            derivative,
            dims,
        })
    }

    fn split(&self, v: Vec<f64>) -> RefPoint {
        let (n, m) = (self.dims.n, self.dims.m);
        RefPoint {
            x: v[..n].to_vec(),
            u: v[n..n + m].to_vec(),
            w: v[n + m..].to_vec(),
        }
    }

    pub fn at(&self, p: f64) -> Result<RefPoint, EvalError> {
        Ok(self.split(self.compiled.eval(&[p])?))
    }

    /// (∂x_e/∂p, ∂u_e/∂p, ∂w_e/∂p).
    pub fn derivative_at(&self, p: f64) -> Result<RefPoint, EvalError> {
        Ok(self.split(self.derivative.eval(&[p])?))
    }

    /// max_i |f(x_e(p_i), u_e(p_i), w_e(p_i))| over `points` uniform p_i.
    pub fn residual(&self, plant: &PlantModel, points: usize) -> Result<f64, EvalError> {
        let mut worst: f64 = 0.0;
        for i in 0..points {
            let p = self.range[0] + (self.range[1] - self.range[0]) * i as f64 / (points.max(2) - 1) as f64;
            let r = self.at(p)?;
            let f = plant.f(&r.x, &r.u, &r.w)?;
            worst = worst.max(f.iter().fold(0.0, |a, v| a.max(v.abs())));
        }
        Ok(worst)
    }
}

/// Reference trajectory t ↦ (x*(t), u*(t), w*(t)).
#[derive(Debug, Clone)]
pub struct TrajectoryTarget {
    pub x_star: Vec<Expr>,
    pub u_star: Vec<Expr>,
    pub w_star: Vec<Expr>,
    pub x_dot: Vec<Expr>,
    compiled: CompiledField,
    dims: Dims,
}

impl TrajectoryTarget {
    pub fn new(dims: Dims, x_star: &[String], u_star: &[String], w_star: &[String]) -> Result<Self, ModelError> {
        let g = || vec![VarGroup::scalar(TIME_VAR)];
        let x_star = field("x_star", x_star, g(), dims.n)?.entries().to_vec();
        let u_star = field("u_star", u_star, g(), dims.m)?.entries().to_vec();
        let w_star = field("w_star", w_star, g(), dims.p)?.entries().to_vec();
        Ok(Self::from_exprs(dims, x_star, u_star, w_star))
    }

    pub fn from_exprs(dims: Dims, x_star: Vec<Expr>, u_star: Vec<Expr>, w_star: Vec<Expr>) -> Self {
        let x_dot: Vec<Expr> = x_star.iter().map(|e| diff(e, TIME_VAR)).collect();
        let all: Vec<Expr> = x_star.iter().chain(&u_star).chain(&w_star).chain(&x_dot).cloned().collect();
        let compiled = VectorField::new(all, vec![VarGroup::scalar(TIME_VAR)])
            .and_then(|f| f.compile())
            .expect("trajectory expressions only use t");
        Self {
            x_star,
            u_star,
            w_star,
            x_dot,
            compiled,
            dims,
        }
    }

    /// (x*, u*, w*) and ẋ* at time t.
    pub fn at(&self, t: f64) -> Result<(RefPoint, Vec<f64>), EvalError> {
        let v = self.compiled.eval(&[t])?;
        let (n, m, p) = (self.dims.n, self.dims.m, self.dims.p);
        Ok((
            RefPoint {
                x: v[..n].to_vec(),
                u: v[n..n + m].to_vec(),
                w: v[n + m..n + m + p].to_vec(),
            },
            v[n + m + p..].to_vec(),
        ))
    }

    /// max |ẋ* − f(x*, u*, w*)| over the given times.
    pub fn residual(&self, plant: &PlantModel, times: &[f64]) -> Result<f64, EvalError> {
        let mut worst: f64 = 0.0;
        for &t in times {
            let (r, xd) = self.at(t)?;
            let f = plant.f(&r.x, &r.u, &r.w)?;
            for (a, b) in xd.iter().zip(&f) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone)]
pub enum TargetBehavior {
    Equilibrium(EquilibriumFamily),
    Trajectory(TrajectoryTarget),
}

/// Optional family-parametrized gain schedule used by the LPV baselines.
#[derive(Debug, Clone)]
pub struct LpvData {
    /// K(p), m×n, over the family parameter.
    pub gain: Vec<Vec<Expr>>,
    /// p as measured from exogenous signals, over (x, w).
    pub exogenous: Expr,
    /// p recovered from the state through the equilibrium relation, over (x, w).
    pub state: Expr,
}

/// A plant together with its virtual embedding, scheduling map and target.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub description: String,
    pub dims: Dims,
    pub plant: PlantModel,
    pub virt: VirtualModel,
    pub sched: SchedulingMap,
    pub target: TargetBehavior,
    pub sample_box: [f64; 2],
    pub lpv: Option<LpvData>,
}

impl System {
    pub fn family(&self) -> Option<&EquilibriumFamily> {
        match &self.target {
            TargetBehavior::Equilibrium(f) => Some(f),
            TargetBehavior::Trajectory(_) => None,
        }
    }

    pub fn linearize(&self) -> DiffDynamics {
        self.virt.linearize()
    }

    pub fn scheduled(&self) -> Result<ScheduledDynamics, ModelError> {
        self.virt.linearize().schedule(&self.sched)
    }

    /// Parses an expression over the plant variables (x, u, w).
    pub fn parse_plant_expr(&self, text: &str) -> Result<Expr, ModelError> {
        let env = VarEnv::new(plant_groups(self.dims).into_iter().flat_map(|g| g.vars));
        parse(text, &env).map(|e| fold(&e)).map_err(|source| ModelError::Parse {
            what: text.into(),
            source,
        })
    }
}

/// Outcome of [`check_embedding`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    pub samples: usize,
    pub evaluated: usize,
    pub max_residual: f64,
    /// (x, u, w) at the worst sample.
    pub worst_point: Option<Vec<f64>>,
    pub passed: bool,
}

pub const EMBEDDING_TOL: f64 = 1e-9;

/// Samples (x, u, w) uniformly in the box and compares f̂(x,x,u,w) with
/// f(x,u,w) and ĥ(x,x,u,w) with h(x,u,w).
pub fn check_embedding(sys: &System, samples: usize, seed: u64, bounds: Option<[f64; 2]>) -> EmbeddingReport {
    let [lo, hi] = bounds.unwrap_or(sys.sample_box);
    let d = sys.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples.max(1))
        .map(|_| (0..d.n + d.m + d.p).map(|_| rng.random_range(lo..=hi)).collect())
        .collect();
    let results: Vec<Option<f64>> = points
        .par_iter()
        .map(|pt| {
            let (x, rest) = pt.split_at(d.n);
            let (u, w) = rest.split_at(d.m);
            let f = sys.plant.f(x, u, w).ok()?;
            let h = sys.plant.h(x, u, w).ok()?;
            let fh = sys.virt.f(x, x, u, w).ok()?;
            let hh = sys.virt.h(x, x, u, w).ok()?;
            let r = f
                .iter()
                .zip(&fh)
                .chain(h.iter().zip(&hh))
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            Some(r)
        })
        .collect();
    let mut worst: Option<(usize, f64)> = None;
    let mut evaluated = 0;
    for (i, r) in results.iter().enumerate() {
        if let Some(r) = *r {
            evaluated += 1;
            if worst.is_none_or(|(_, w)| r > w || r.is_nan()) {
                worst = Some((i, r));
            }
        }
    }
    let max_residual = worst.map_or(0.0, |(_, r)| r);
    EmbeddingReport {
        samples: points.len(),
        evaluated,
        max_residual,
        worst_point: worst.map(|(i, _)| points[i].clone()),
        passed: evaluated > 0 && max_residual <= EMBEDDING_TOL,
    }
}

/// Central-difference Jacobian of f̂ with respect to one group, for checks.
pub fn fd_jacobian(
    v: &VirtualModel,
    group: &str,
    chi: &[f64],
    x: &[f64],
    mu: &[f64],
    w: &[f64],
    h: f64,
) -> Result<DMatrix<f64>, EvalError> {
    let mut args = [chi.to_vec(), x.to_vec(), mu.to_vec(), w.to_vec()];
    let k = ["chi", "x", "mu", "w"].iter().position(|g| *g == group).expect("known group");
    let cols = args[k].len();
    let mut out = DMatrix::zeros(v.dims.n, cols);
    for j in 0..cols {
        let orig = args[k][j];
        args[k][j] = orig + h;
        let fp = v.f(&args[0], &args[1], &args[2], &args[3])?;
        args[k][j] = orig - h;
        let fm = v.f(&args[0], &args[1], &args[2], &args[3])?;
        args[k][j] = orig;
        for i in 0..v.dims.n {
            out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(out)
}
