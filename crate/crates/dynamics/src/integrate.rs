//! Time integrators: explicit Euler, classic RK4, the fourth-order
//! separable symplectic scheme, and the second-order Strang-split scheme
//! for nonseparable Hamiltonians on the extended phase space, plus rollout
//! and convergence-order estimation.

use crate::state::StateOps;
use crate::DynamicsError;
use numkit::{finite_difference_jacobian, Tensor};

/// Canonical coordinates. `q` and `p` must have equal length.
#[derive(Debug, Clone)]
pub struct PhaseState<S> {
    pub q: S,
    pub p: S,
}

/// Augmented coordinates for the nonseparable integrator. Initialized with
/// x = q, y = p; the auxiliary pair shadows the primary one.
#[derive(Debug, Clone)]
pub struct ExtendedPhaseState<S> {
    pub q: S,
    pub p: S,
    pub x: S,
    pub y: S,
}

impl<S: Clone> ExtendedPhaseState<S> {
    pub fn from_phase(q: S, p: S) -> Self {
        ExtendedPhaseState { x: q.clone(), y: p.clone(), q, p }
    }
}

/// Position/momentum sub-step fractions of the fourth-order scheme.
/// Computed from the closed forms at start-up rather than hard-coded.
#[derive(Debug, Clone, Copy)]
pub struct SplitCoefficients {
    pub c: [f64; 4],
    pub d: [f64; 4],
}

impl SplitCoefficients {
    pub fn forest_ruth() -> Self {
        let cbrt2 = 2.0_f64.cbrt();
        let denom = 2.0 - cbrt2;
        let c1 = 1.0 / (2.0 * denom);
        let c2 = (1.0 - cbrt2) / (2.0 * denom);
        let d1 = 1.0 / denom;
        let d2 = -cbrt2 / denom;
        SplitCoefficients {
            c: [c1, c2, c2, c1],
            d: [d1, d2, d1, 0.0],
        }
    }

    /// Σc = Σd = 1 within 1e-12 and d₄ = 0.
    pub fn validate(&self) -> bool {
        let sc: f64 = self.c.iter().sum();
        let sd: f64 = self.d.iter().sum();
        (sc - 1.0).abs() < 1e-12 && (sd - 1.0).abs() < 1e-12 && self.d[3] == 0.0
    }
}

/// Binding coefficient and step for the nonseparable scheme.
#[derive(Debug, Clone, Copy)]
pub struct TaoConfig {
    pub omega: f64,
    pub dt: f64,
}

impl TaoConfig {
    pub fn new(omega: f64, dt: f64) -> Self {
        assert!(omega > 0.0 && dt >= 0.0, "TaoConfig: omega > 0, dt >= 0 required");
        TaoConfig { omega, dt }
    }
}

fn check_finite<S: StateOps>(s: &S, op: &'static str) -> Result<(), DynamicsError> {
    if s.all_finite() {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite { op })
    }
}

/// y + f(y)·dt.
pub fn euler_step<S: StateOps>(
    f: &dyn Fn(&S) -> S,
    y: &S,
    dt: f64,
) -> Result<S, DynamicsError> {
    let dy = f(y);
    check_finite(&dy, "euler_step")?;
    Ok(y.add_scaled(dt, &dy))
}

/// Classic four-stage Runge--Kutta update.
pub fn rk4_step<S: StateOps>(
    f: &dyn Fn(&S) -> S,
    y: &S,
    dt: f64,
) -> Result<S, DynamicsError> {
    let k1 = f(y);
    let k2 = f(&y.add_scaled(dt / 2.0, &k1));
    let k3 = f(&y.add_scaled(dt / 2.0, &k2));
    let k4 = f(&y.add_scaled(dt, &k3));
    check_finite(&k4, "rk4_step")?;
    let out = y
        .add_scaled(dt / 6.0, &k1)
        .add_scaled(dt / 3.0, &k2)
        .add_scaled(dt / 3.0, &k3)
        .add_scaled(dt / 6.0, &k4);
    check_finite(&out, "rk4_step")?;
    Ok(out)
}

/// One fourth-order symplectic step for a separable system. `tp` supplies
/// the kinetic gradient field (a function of p), `vq` the potential gradient
/// field (a function of q). Per sub-step j the position moves first by
/// c_j·tp(p)·dt, then the momentum by −d_j·vq(q)·dt at the updated q.
pub fn forest_ruth_step<S: StateOps>(
    tp: &dyn Fn(&S) -> S,
    vq: &dyn Fn(&S) -> S,
    state: &PhaseState<S>,
    dt: f64,
) -> Result<PhaseState<S>, DynamicsError> {
    let coeff = SplitCoefficients::forest_ruth();
    let mut q = state.q.clone();
    let mut p = state.p.clone();
    for j in 0..4 {
        q = q.add_scaled(coeff.c[j] * dt, &tp(&p));
        if coeff.d[j] != 0.0 {
            p = p.add_scaled(-coeff.d[j] * dt, &vq(&q));
        }
    }
    check_finite(&q, "forest_ruth_step")?;
    check_finite(&p, "forest_ruth_step")?;
    Ok(PhaseState { q, p })
}

/// Gradients of the Hamiltonian at a point pair: `hgrads(a, b)` returns
/// (∂H/∂a, ∂H/∂b) evaluated at (a, b).
pub type HGrads<'a, S> = &'a dyn Fn(&S, &S) -> (S, S);

fn phi1<S: StateOps>(h: HGrads<S>, s: &ExtendedPhaseState<S>, delta: f64) -> ExtendedPhaseState<S> {
    let (gq, gy) = h(&s.q, &s.y);
    ExtendedPhaseState {
        q: s.q.clone(),
        p: s.p.add_scaled(-delta, &gq),
        x: s.x.add_scaled(delta, &gy),
        y: s.y.clone(),
    }
}

fn phi2<S: StateOps>(h: HGrads<S>, s: &ExtendedPhaseState<S>, delta: f64) -> ExtendedPhaseState<S> {
    let (gx, gp) = h(&s.x, &s.p);
    ExtendedPhaseState {
        q: s.q.add_scaled(delta, &gp),
        p: s.p.clone(),
        x: s.x.clone(),
        y: s.y.add_scaled(-delta, &gx),
    }
}

fn phi3<S: StateOps>(s: &ExtendedPhaseState<S>, omega: f64, delta: f64) -> ExtendedPhaseState<S> {
    let (cos, sin) = {
        let a = 2.0 * omega * delta;
        (a.cos(), a.sin())
    };
    // halves of the sum and difference coordinates
    let sq = s.q.lincomb(0.5, 0.5, &s.x);
    let sp = s.p.lincomb(0.5, 0.5, &s.y);
    let dq = s.q.lincomb(0.5, -0.5, &s.x);
    let dp = s.p.lincomb(0.5, -0.5, &s.y);
    // rotated difference block
    let rq = dq.lincomb(cos, sin, &dp);
    let rp = dp.lincomb(cos, -sin, &dq);
    ExtendedPhaseState {
        q: sq.add_scaled(1.0, &rq),
        p: sp.add_scaled(1.0, &rp),
        x: sq.add_scaled(-1.0, &rq),
        y: sp.add_scaled(-1.0, &rp),
    }
}

/// One Strang-composed step φ₁^{dt/2}∘φ₂^{dt/2}∘φ₃^{dt}∘φ₂^{dt/2}∘φ₁^{dt/2}
/// on the extended phase space. Second order; every sub-map preserves the
/// extended symplectic two-form.
pub fn tao_strang_step<S: StateOps>(
    hgrads: HGrads<S>,
    state: &ExtendedPhaseState<S>,
    cfg: &TaoConfig,
) -> Result<ExtendedPhaseState<S>, DynamicsError> {
    let half = cfg.dt / 2.0;
    let s = phi1(hgrads, state, half);
    let s = phi2(hgrads, &s, half);
    let s = phi3(&s, cfg.omega, cfg.dt);
    let s = phi2(hgrads, &s, half);
    let s = phi1(hgrads, &s, half);
    check_finite(&s.q, "tao_strang_step")?;
    check_finite(&s.p, "tao_strang_step")?;
    Ok(s)
}

/// Exposed for the symplectomorphism checks: the three sub-maps individually.
pub fn tao_submap<S: StateOps>(
    which: usize,
    hgrads: HGrads<S>,
    state: &ExtendedPhaseState<S>,
    cfg: &TaoConfig,
) -> ExtendedPhaseState<S> {
    match which {
        0 => phi1(hgrads, state, cfg.dt),
        1 => phi2(hgrads, state, cfg.dt),
        2 => phi3(state, cfg.omega, cfg.dt),
        _ => panic!("tao_submap: index out of range"),
    }
}

/// Number of steps n = floor((t − t0)/dt), with a 1e-9 relative slack so
/// spans that are exact multiples of dt in real arithmetic stay exact.
pub fn step_count(t0: f64, t: f64, dt: f64) -> usize {
    assert!(dt > 0.0 && t >= t0, "step_count: need t >= t0 and dt > 0");
    let raw = (t - t0) / dt;
    (raw + 1e-9 * raw.max(1.0)).floor() as usize
}

/// Run `step` n times from `s0`; returns the n+1 states including `s0`.
pub fn rollout<St, F>(step: F, s0: St, t0: f64, t: f64, dt: f64) -> Result<Vec<St>, DynamicsError>
where
    St: Clone,
    F: Fn(&St) -> Result<St, DynamicsError>,
{
    let n = step_count(t0, t, dt);
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    for _ in 0..n {
        let next = step(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// Result of a convergence study: either an exact scheme on this problem
/// (zero error somewhere on the ladder) or the log-log slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderEstimate {
    Exact,
    Slope(f64),
}

/// Least-squares slope of log(error) against log(dt).
pub fn estimate_order(dts: &[f64], errors: &[f64]) -> OrderEstimate {
    assert!(dts.len() >= 4, "estimate_order: need at least 4 rungs");
    assert_eq!(dts.len(), errors.len());
    if errors.iter().any(|&e| e == 0.0) {
        return OrderEstimate::Exact;
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    OrderEstimate::Slope(num / den)
}

/// Max-entry residual of JᵀΩJ − Ω for the finite-difference Jacobian of a
/// phase-space map given as a flat vector function. The state layout is
/// (q₁..q_N, p₁..p_N) blocks repeated (so 2N for plain phase space, 4N for
/// the extended space with form dq∧dp + dx∧dy).
pub fn symplectic_residual(map: &dyn Fn(&[f64]) -> Vec<f64>, z0: &[f64], h: f64) -> f64 {
    let dim = z0.len();
    assert!(dim % 2 == 0);
    let jac = finite_difference_jacobian(map, z0, h);
    let omega = canonical_form(dim);
    // JᵀΩJ
    let jt = jac.transpose();
    let m = jt.matmul(&omega).unwrap().matmul(&jac).unwrap();
    let mut resid = 0.0_f64;
    for i in 0..dim {
        for j in 0..dim {
            resid = resid.max((m.at(i, j) - omega.at(i, j)).abs());
        }
    }
    resid
}

/// Block-diagonal canonical form: for each (q-block, p-block) pair of size n,
/// Ω maps (dq, dp) with +I on the q→p side. dim must be a multiple of 2; a
/// dim of 4n is treated as two stacked canonical pairs (q,p,x,y layout with
/// equal block sizes).
pub fn canonical_form(dim: usize) -> Tensor {
    let pairs = if dim % 4 == 0 { 2 } else { 1 };
    let block = dim / (2 * pairs);
    let mut omega = Tensor::zeros(&[dim, dim]);
    for pair in 0..pairs {
        let base = pair * 2 * block;
        for i in 0..block {
            omega.set(base + i, base + block + i, 1.0);
            omega.set(base + block + i, base + i, -1.0);
        }
    }
    omega
}

/// Trajectory CSV: header `t,q_1..q_N,p_1..p_N[,H]`, one row per state,
/// floats with 17 significant digits.
pub fn trajectory_csv(
    traj: &[PhaseState<Tensor>],
    t0: f64,
    dt: f64,
    energy: Option<&dyn Fn(&PhaseState<Tensor>) -> f64>,
) -> String {
    let n = traj.first().map(|s| s.q.len()).unwrap_or(0);
    let mut head = String::from("t");
    for i in 1..=n {
        head.push_str(&format!(",q_{i}"));
    }
    for i in 1..=n {
        head.push_str(&format!(",p_{i}"));
    }
    if energy.is_some() {
        head.push_str(",H");
    }
    let mut out = head;
    out.push('\n');
    for (k, s) in traj.iter().enumerate() {
        out.push_str(&fmt17(t0 + k as f64 * dt));
        for v in s.q.data() {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        for v in s.p.data() {
            out.push(',');
            out.push_str(&fmt17(*v));
        }
        if let Some(e) = energy {
            out.push(',');
            out.push_str(&fmt17(e(s)));
        }
        out.push('\n');
    }
    out
}

/// 17-significant-digit decimal float formatting used by every CSV writer.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_state(v: Vec<f64>) -> Tensor {
        Tensor::vector(v)
    }

    #[test]
    fn forest_ruth_coefficients_match_closed_forms() {
        let c = SplitCoefficients::forest_ruth();
        assert!(c.validate());
        let tol = 1e-9;
        assert!((c.c[0] - 0.6756035959798289).abs() < tol);
        assert!((c.c[3] - 0.6756035959798289).abs() < tol);
        assert!((c.c[1] - -0.17560359597982883).abs() < tol);
        assert!((c.d[0] - 1.3512071919596578).abs() < tol);
        assert!((c.d[1] - -1.7024143839193153).abs() < tol);
        assert!((c.d[2] - 1.3512071919596578).abs() < tol);
        assert_eq!(c.d[3], 0.0);
    }

    #[test]
    fn euler_zero_field_is_identity() {
        let y = vec_state(vec![1.0, -2.0]);
        let out = euler_step(&|s: &Tensor| s.map(|_| 0.0), &y, 0.1).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn euler_exponential_single_step() {
        let y = vec_state(vec![1.0]);
        let out = euler_step(&|s: &Tensor| s.clone(), &y, 0.1).unwrap();
        assert!((out.data()[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn rk4_zero_field_is_identity() {
        let y = vec_state(vec![0.5]);
        let out = rk4_step(&|s: &Tensor| s.map(|_| 0.0), &y, 0.3).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn rk4_exponential_matches_hand_stages() {
        // dy/dt = y, y0 = 1, dt = 0.1: k1..k4 hand-evaluated.
        let y = vec_state(vec![1.0]);
        let out = rk4_step(&|s: &Tensor| s.clone(), &y, 0.1).unwrap();
        let expected = 1.0 + (0.1 + 2.0 * 0.105 + 2.0 * 0.10525 + 0.1105250) / 6.0;
        assert!((out.data()[0] - expected).abs() < 1e-12);
        assert!((out.data()[0] - 0.1_f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn forest_ruth_zero_fields_identity() {
        let s = PhaseState { q: vec_state(vec![1.0]), p: vec_state(vec![2.0]) };
        let zero = |v: &Tensor| v.map(|_| 0.0);
        let out = forest_ruth_step(&zero, &zero, &s, 0.5).unwrap();
        assert_eq!(out.q, s.q);
        assert_eq!(out.p, s.p);
    }

    #[test]
    fn forest_ruth_reversibility() {
        let tp = |p: &Tensor| p.clone();
        let vq = |q: &Tensor| q.clone();
        let s0 = PhaseState { q: vec_state(vec![0.7]), p: vec_state(vec![-0.4]) };
        let fwd = forest_ruth_step(&tp, &vq, &s0, 0.1).unwrap();
        let back = forest_ruth_step(&tp, &vq, &fwd, -0.1).unwrap();
        assert!((back.q.data()[0] - s0.q.data()[0]).abs() < 1e-10);
        assert!((back.p.data()[0] - s0.p.data()[0]).abs() < 1e-10);
    }

    #[test]
    fn forest_ruth_energy_bounded_where_rk4_drifts() {
        // spring H = (q² + p²)/2, dt = 0.1, 10^4 steps
        let tp = |p: &Tensor| p.clone();
        let vq = |q: &Tensor| q.clone();
        let mut s = PhaseState { q: vec_state(vec![1.0]), p: vec_state(vec![0.0]) };
        let energy = |s: &PhaseState<Tensor>| {
            0.5 * (s.q.data()[0] * s.q.data()[0] + s.p.data()[0] * s.p.data()[0])
        };
        let e0 = energy(&s);
        let mut max_dev = 0.0_f64;
        for _ in 0..10_000 {
            s = forest_ruth_step(&tp, &vq, &s, 0.1).unwrap();
            max_dev = max_dev.max((energy(&s) - e0).abs());
        }
        assert!(max_dev < 1e-5, "symplectic energy deviation {max_dev}");

        // RK4 on the same problem drifts monotonically downward in energy.
        let field = |z: &Tensor| {
            Tensor::vector(vec![z.data()[1], -z.data()[0]])
        };
        let mut z = vec_state(vec![1.0, 0.0]);
        let mut last = 0.5;
        let mut rk4_drift = 0.0_f64;
        for _ in 0..10_000 {
            z = rk4_step(&field, &z, 0.1).unwrap();
            let e = 0.5 * (z.data()[0] * z.data()[0] + z.data()[1] * z.data()[1]);
            assert!(e <= last + 1e-12, "rk4 energy not monotone");
            last = e;
            rk4_drift = (e - 0.5).abs();
        }
        assert!(rk4_drift > max_dev * 10.0, "rk4 drift {rk4_drift} vs FR {max_dev}");
    }

    #[test]
    fn tao_zero_dt_is_identity() {
        let h = |a: &Tensor, b: &Tensor| (a.clone(), b.clone());
        let s = ExtendedPhaseState::from_phase(vec_state(vec![1.3]), vec_state(vec![-0.2]));
        let out = tao_strang_step(&h, &s, &TaoConfig::new(10.0, 0.0)).unwrap();
        assert_eq!(out.q, s.q);
        assert_eq!(out.p, s.p);
        assert_eq!(out.x, s.x);
        assert_eq!(out.y, s.y);
    }

    #[test]
    fn tao_phi3_quarter_rotation_hand_value() {
        // 2ωδ = π/2: (q,p,x,y) = (1,0,0,0) maps to (0.5, -0.5, 0.5, 0.5).
        let omega = 1.0;
        let delta = std::f64::consts::FRAC_PI_4; // 2ωδ = π/2
        let s = ExtendedPhaseState {
            q: vec_state(vec![1.0]),
            p: vec_state(vec![0.0]),
            x: vec_state(vec![0.0]),
            y: vec_state(vec![0.0]),
        };
        let out = phi3(&s, omega, delta);
        assert!((out.q.data()[0] - 0.5).abs() < 1e-15);
        assert!((out.p.data()[0] + 0.5).abs() < 1e-15);
        assert!((out.x.data()[0] - 0.5).abs() < 1e-15);
        assert!((out.y.data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tao_aux_tracks_primary_on_spring() {
        // separable spring; ω = 10, dt = 0.01, t ∈ [0, 10]
        let h = |a: &Tensor, b: &Tensor| (a.clone(), b.clone());
        let cfg = TaoConfig::new(10.0, 0.01);
        let mut s = ExtendedPhaseState::from_phase(vec_state(vec![1.0]), vec_state(vec![0.0]));
        let mut max_dev = 0.0_f64;
        for _ in 0..1000 {
            s = tao_strang_step(&h, &s, &cfg).unwrap();
            let dev = (s.x.data()[0] - s.q.data()[0]).abs() + (s.y.data()[0] - s.p.data()[0]).abs();
            max_dev = max_dev.max(dev);
        }
        assert!(max_dev < 1e-3, "aux deviation {max_dev}");
    }

    #[test]
    fn tao_aux_deviation_shrinks_with_omega() {
        let h = |a: &Tensor, b: &Tensor| {
            // nonseparable test H = (q²+1)(p²+1)/2: ∂H/∂q = q(p²+1), ∂H/∂p = p(q²+1)
            let (q, p) = (a.data()[0], b.data()[0]);
            (
                Tensor::vector(vec![q * (p * p + 1.0)]),
                Tensor::vector(vec![p * (q * q + 1.0)]),
            )
        };
        let mut devs = Vec::new();
        for &omega in &[1.0, 10.0, 100.0] {
            let cfg = TaoConfig::new(omega, 0.005);
            let mut s = ExtendedPhaseState::from_phase(vec_state(vec![1.0]), vec_state(vec![0.5]));
            let mut max_dev = 0.0_f64;
            for _ in 0..4000 {
                s = tao_strang_step(&h, &s, &cfg).unwrap();
                let dev =
                    (s.x.data()[0] - s.q.data()[0]).abs() + (s.y.data()[0] - s.p.data()[0]).abs();
                max_dev = max_dev.max(dev);
            }
            devs.push(max_dev);
        }
        // binding tightens the bound up to a plateau: larger ω never loses to
        // ω = 1, and the plateau between 10 and 100 stays within 10%
        assert!(devs[1] < devs[0] && devs[2] < devs[0], "deviations {devs:?}");
        assert!(devs[2] <= devs[1] * 1.1, "deviations {devs:?}");
    }

    #[test]
    fn rollout_counts_and_composition() {
        let step = |y: &Tensor| euler_step(&|s: &Tensor| s.clone(), y, 0.1);
        let y0 = vec_state(vec![1.0]);
        let traj = rollout(step, y0.clone(), 0.0, 0.0, 0.1).unwrap();
        assert_eq!(traj.len(), 1);

        let traj2 = rollout(step, y0.clone(), 0.0, 0.2, 0.1).unwrap();
        let one = step(&y0).unwrap();
        let two = step(&one).unwrap();
        assert_eq!(traj2.len(), 3);
        assert_eq!(traj2[2], two);
    }

    #[test]
    fn rollout_pendulum_span_has_6284_states() {
        let n = step_count(0.0, 20.0 * std::f64::consts::PI, 0.01);
        assert_eq!(n, 6283);
        // trajectory includes s0: n + 1 states
        let step = |y: &Tensor| Ok(y.clone());
        let traj = rollout(step, vec_state(vec![0.0]), 0.0, 20.0 * std::f64::consts::PI, 0.01)
            .unwrap();
        assert_eq!(traj.len(), 6284);
    }

    #[test]
    fn step_count_handles_inexact_ratios() {
        assert_eq!(step_count(0.0, 0.04, 0.02), 2);
        assert_eq!(step_count(0.0, 0.06, 0.001), 60);
        assert_eq!(step_count(0.0, 1.2, 0.005), 240);
    }

    #[test]
    fn estimate_order_exact_scheme_reported() {
        let dts = [0.1, 0.05, 0.025, 0.0125];
        let errs = [0.0, 0.0, 0.0, 0.0];
        assert_eq!(estimate_order(&dts, &errs), OrderEstimate::Exact);
    }

    #[test]
    fn euler_first_order_on_exponential() {
        let dts = [0.02, 0.01, 0.005, 0.0025];
        let mut errs = Vec::new();
        for &dt in &dts {
            let step = |y: &Tensor| euler_step(&|s: &Tensor| s.clone(), y, dt);
            let traj = rollout(step, vec_state(vec![1.0]), 0.0, 1.0, dt).unwrap();
            errs.push((traj.last().unwrap().data()[0] - 1.0_f64.exp()).abs());
        }
        match estimate_order(&dts, &errs) {
            OrderEstimate::Slope(s) => assert!((s - 1.0).abs() < 0.3, "slope {s}"),
            OrderEstimate::Exact => panic!("euler is not exact here"),
        }
    }

    #[test]
    fn rk4_fourth_order_on_harmonic_oscillator() {
        let dts = [0.2, 0.1, 0.05, 0.025];
        let field = |z: &Tensor| Tensor::vector(vec![z.data()[1], -z.data()[0]]);
        let mut errs = Vec::new();
        for &dt in &dts {
            let step = |y: &Tensor| rk4_step(&field, y, dt);
            let traj = rollout(step, vec_state(vec![1.0, 0.0]), 0.0, 1.0, dt).unwrap();
            let end = traj.last().unwrap();
            let (qe, pe) = (1.0_f64.cos(), -(1.0_f64.sin()));
            let err = ((end.data()[0] - qe).powi(2) + (end.data()[1] - pe).powi(2)).sqrt();
            errs.push(err);
        }
        match estimate_order(&dts, &errs) {
            OrderEstimate::Slope(s) => assert!((s - 4.0).abs() < 0.3, "slope {s}"),
            OrderEstimate::Exact => panic!("rk4 is not exact here"),
        }
    }

    #[test]
    fn forest_ruth_fourth_order_on_spring() {
        let dts = [0.4, 0.2, 0.1, 0.05];
        let tp = |p: &Tensor| p.clone();
        let vq = |q: &Tensor| q.clone();
        let mut errs = Vec::new();
        for &dt in &dts {
            let step = |s: &PhaseState<Tensor>| forest_ruth_step(&tp, &vq, s, dt);
            let s0 = PhaseState { q: vec_state(vec![1.0]), p: vec_state(vec![0.0]) };
            let traj = rollout(step, s0, 0.0, 2.0, dt).unwrap();
            let end = traj.last().unwrap();
            let (qe, pe) = (2.0_f64.cos(), -(2.0_f64.sin()));
            let err = ((end.q.data()[0] - qe).powi(2) + (end.p.data()[0] - pe).powi(2)).sqrt();
            errs.push(err);
        }
        match estimate_order(&dts, &errs) {
            OrderEstimate::Slope(s) => assert!((s - 4.0).abs() < 0.3, "slope {s}"),
            OrderEstimate::Exact => panic!("FR is not exact here"),
        }
    }

    #[test]
    fn tao_second_order_on_spring() {
        let dts = [0.04, 0.02, 0.01, 0.005];
        let h = |a: &Tensor, b: &Tensor| (a.clone(), b.clone());
        let mut errs = Vec::new();
        for &dt in &dts {
            let cfg = TaoConfig::new(10.0, dt);
            let step = |s: &ExtendedPhaseState<Tensor>| tao_strang_step(&h, s, &cfg);
            let s0 = ExtendedPhaseState::from_phase(vec_state(vec![1.0]), vec_state(vec![0.0]));
            let traj = rollout(step, s0, 0.0, 1.0, dt).unwrap();
            let end = traj.last().unwrap();
            let (qe, pe) = (1.0_f64.cos(), -(1.0_f64.sin()));
            let err = ((end.q.data()[0] - qe).powi(2) + (end.p.data()[0] - pe).powi(2)).sqrt();
            errs.push(err);
        }
        match estimate_order(&dts, &errs) {
            OrderEstimate::Slope(s) => assert!((s - 2.0).abs() < 0.3, "slope {s}"),
            OrderEstimate::Exact => panic!("tao is not exact here"),
        }
    }

    #[test]
    fn forest_ruth_step_is_symplectic_and_area_preserving() {
        // pendulum fields: Tp(p) = p, Vq(q) = sin q — symmetric Jacobians
        let map = |z: &[f64]| {
            let s = PhaseState {
                q: Tensor::vector(vec![z[0]]),
                p: Tensor::vector(vec![z[1]]),
            };
            let out = forest_ruth_step(
                &|p: &Tensor| p.clone(),
                &|q: &Tensor| q.map(f64::sin),
                &s,
                0.1,
            )
            .unwrap();
            vec![out.q.data()[0], out.p.data()[0]]
        };
        let resid = symplectic_residual(&map, &[0.4, 0.8], 1e-5);
        assert!(resid < 1e-6, "residual {resid}");
    }

    #[test]
    fn tao_submaps_are_symplectic_on_extended_space() {
        let h = |a: &Tensor, b: &Tensor| {
            let (q, p) = (a.data()[0], b.data()[0]);
            (
                Tensor::vector(vec![q * (p * p + 1.0)]),
                Tensor::vector(vec![p * (q * q + 1.0)]),
            )
        };
        let cfg = TaoConfig::new(10.0, 0.1);
        for which in 0..3 {
            let map = |z: &[f64]| {
                let s = ExtendedPhaseState {
                    q: Tensor::vector(vec![z[0]]),
                    p: Tensor::vector(vec![z[1]]),
                    x: Tensor::vector(vec![z[2]]),
                    y: Tensor::vector(vec![z[3]]),
                };
                let out = tao_submap(which, &h, &s, &cfg);
                vec![
                    out.q.data()[0],
                    out.p.data()[0],
                    out.x.data()[0],
                    out.y.data()[0],
                ]
            };
            let resid = symplectic_residual(&map, &[0.3, -0.2, 0.25, -0.15], 1e-5);
            assert!(resid < 1e-6, "submap {which} residual {resid}");
        }
    }

    #[test]
    fn two_form_area_preserved_to_fourth_order() {
        // area of a small parallelogram of perturbed ICs preserved to O(dt⁴·area)
        let tp = |p: &Tensor| p.clone();
        let vq = |q: &Tensor| q.map(f64::sin);
        let dt = 0.1;
        let step = |q0: f64, p0: f64| {
            let s = PhaseState { q: Tensor::vector(vec![q0]), p: Tensor::vector(vec![p0]) };
            let out = forest_ruth_step(&tp, &vq, &s, dt).unwrap();
            (out.q.data()[0], out.p.data()[0])
        };
        let eps = 1e-4;
        let (q0, p0) = (0.9, -0.3);
        let a = step(q0, p0);
        let b = step(q0 + eps, p0);
        let c = step(q0, p0 + eps);
        let area = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
        // relative area change bounded by the linearization error O(eps), far
        // below any secular dt-scale effect
        assert!(((area - eps * eps) / (eps * eps)).abs() < 1e-3);
    }

    #[test]
    fn trajectory_csv_layout() {
        let traj = vec![
            PhaseState { q: vec_state(vec![0.0]), p: vec_state(vec![1.0]) },
            PhaseState { q: vec_state(vec![0.1]), p: vec_state(vec![0.9]) },
        ];
        let csv = trajectory_csv(&traj, 0.0, 0.5, None);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,q_1,p_1");
        assert!(lines.next().unwrap().starts_with("0.0000000000000000e0,"));
    }
}
