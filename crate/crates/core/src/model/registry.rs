use super::spec::{LpvSpec, SystemSpec, TargetSpec};
use super::{Dims, ModelError, System};

fn s(items: &[&str]) -> Vec<String> {
    items.iter().map(|t| t.to_string()).collect()
}

fn ex2() -> SystemSpec {
    SystemSpec {
        name: "ex2".into(),
        description: "x' = A(x)x + Bu with A = [0 1/4; cos x1 -1], B = [1; 0]; needs a virtual target generator".into(),
        dims: Dims { n: 2, m: 1, p: 1, q: 2 },
        f: s(&["x2/4 + u1", "cos(x1)*x1 - x2"]),
        h: s(&["x1", "x2"]),
        fhat: s(&["chi2/4 + mu1", "cos(x1)*chi1 - chi2"]),
        hhat: s(&["chi1", "chi2"]),
        psi: s(&["cos(x1)"]),
        sched_box: vec![[-1.0, 1.0]],
        rate_bounds: None,
        sample_box: [-3.0, 3.0],
        target: TargetSpec::Equilibrium {
            range: [-2.0, 2.0],
            x_e: s(&["p", "cos(p)*p"]),
            u_e: s(&["-cos(p)*p/4"]),
            w_e: None,
        },
        lpv: None,
    }
}

fn ex3() -> SystemSpec {
    SystemSpec {
        name: "ex3-skew".into(),
        description: "x' = A(x)x + Bu with skew-symmetric part A = [-1 sin x2; -sin x2 -1], B = [1; 0]".into(),
        dims: Dims { n: 2, m: 1, p: 1, q: 2 },
        f: s(&["-x1 + sin(x2)*x2 + u1", "-sin(x2)*x1 - x2"]),
        h: s(&["x1", "x2"]),
        fhat: s(&["-chi1 + sin(x2)*chi2 + mu1", "-sin(x2)*chi1 - chi2"]),
        hhat: s(&["chi1", "chi2"]),
        psi: s(&["sin(x2)"]),
        sched_box: vec![[-1.0, 1.0]],
        rate_bounds: None,
        sample_box: [-3.0, 3.0],
        target: TargetSpec::Equilibrium {
            range: [-1.0, 1.0],
            x_e: s(&["p", "0"]),
            u_e: s(&["p"]),
            w_e: None,
        },
        lpv: None,
    }
}

fn gs_furnace() -> SystemSpec {
    SystemSpec {
        name: "gs-furnace".into(),
        description: "x1' = -x1 - x2 + r, x2' = 1 - exp(-x2) + u with measured reference r = w1".into(),
        dims: Dims { n: 2, m: 1, p: 1, q: 2 },
        f: s(&["-x1 - x2 + w1", "1 - exp(-x2) + u1"]),
        h: s(&["x1", "x2"]),
        fhat: s(&["-chi1 - chi2 + w1", "1 - exp(-chi2) + mu1"]),
        hhat: s(&["chi1", "chi2"]),
        psi: s(&["exp(-chi2)"]),
        sched_box: vec![[0.1, 10.0]],
        rate_bounds: None,
        sample_box: [-3.0, 3.0],
        target: TargetSpec::Equilibrium {
            range: [-1.0, 2.0],
            x_e: s(&["0", "p"]),
            u_e: s(&["exp(-p) - 1"]),
            w_e: Some(s(&["p"])),
        },
        lpv: Some(LpvSpec {
            gain: vec![s(&["1", "-3 - exp(-p)"])],
            exogenous: "w1".into(),
            state: "x2".into(),
        }),
    }
}

fn scalar_cubic() -> SystemSpec {
    SystemSpec {
        name: "scalar-cubic".into(),
        description: "x' = -x + x^3 + u embedded as chi' = -(1 - s)chi + mu with s = x^2 in [0, 4]".into(),
        dims: Dims { n: 1, m: 1, p: 1, q: 2 },
        f: s(&["-x1 + x1^3 + u1"]),
        h: s(&["x1", "0.1*u1"]),
        fhat: s(&["-(1 - x1^2)*chi1 + mu1"]),
        hhat: s(&["chi1", "0.1*mu1"]),
        psi: s(&["x1^2"]),
        sched_box: vec![[0.0, 4.0]],
        rate_bounds: None,
        sample_box: [-3.0, 3.0],
        target: TargetSpec::Equilibrium {
            range: [-2.0, 2.0],
            x_e: s(&["p"]),
            u_e: s(&["p - p^3"]),
            w_e: None,
        },
        lpv: None,
    }
}

/// Built-in system specifications in listing order.
pub fn registry() -> Vec<SystemSpec> {
    vec![ex2(), ex3(), gs_furnace(), scalar_cubic()]
}

pub fn registry_names() -> Vec<String> {
    registry().into_iter().map(|s| s.name).collect()
}

pub fn system_by_name(name: &str) -> Result<System, ModelError> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ModelError::UnknownSystem(name.to_string()))?
        .build()
}
