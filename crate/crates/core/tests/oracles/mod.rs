//! Independent oracles for the property suites.
//!
//! Nothing here calls into the inverse dynamics, mass matrix or Jacobian
//! code under test: kinematics are rebuilt from link angles, Jacobians come
//! from forward-mode dual numbers, and Christoffel terms from central
//! differences of the oracle mass matrix.

#![allow(dead_code)]

use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stairgait_core::nalgebra::{DMatrix, DVector, SMatrix};

use stairgait_core::dynamics::{
    angular_momentum_about, contact_forces, impact_velocity_jump, inverse_dynamics, kinetic_energy,
    mass_matrix, potential_energy, simulate, split_torques, ExtendedState, Passive,
    SimulationOptions,
};
use stairgait_core::gait::{embed, BoundaryConditions, FreeParams};
use stairgait_core::model::{com, swing_foot, RelabelMap, RobotModel, State, Vec2, Vec5};
use stairgait_core::optimizer::{
    fd_jacobian, minimize, qp_solve, Evaluation, FnProblem, SqpOptions, SqpStatus,
};

pub type Mat5 = SMatrix<f64, 5, 5>;

/// Outcome of one property suite.
#[derive(Debug, Clone)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }

    /// Conjunction; details are joined.
    fn and(self, other: Check) -> Check {
        Check::new(
            self.passed && other.passed,
            format!("{}; {}", self.detail, other.detail),
        )
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec5(r: &mut ChaCha8Rng, lo: [f64; 5], hi: [f64; 5]) -> Vec5 {
    Vec5::from_fn(|i, _| r.random_range(lo[i]..=hi[i]))
}

/// Configurations spanning the walking range and well beyond it.
pub fn random_configuration(r: &mut ChaCha8Rng) -> Vec5 {
    random_vec5(r, [-0.8, -1.5, -1.5, -1.5, -1.5], [0.8, 1.5, 1.5, 1.5, 1.5])
}

pub fn random_velocity(r: &mut ChaCha8Rng, scale: f64) -> Vec5 {
    random_vec5(r, [-scale; 5], [scale; 5])
}

// Forward-mode dual numbers.

#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: 0.0 }
    }
    fn sin(self) -> Self {
        Self {
            v: self.v.sin(),
            d: self.d * self.v.cos(),
        }
    }
    fn cos(self) -> Self {
        Self {
            v: self.v.cos(),
            d: -self.d * self.v.sin(),
        }
    }
    fn scale(self, k: f64) -> Self {
        Self {
            v: self.v * k,
            d: self.d * k,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

type P2 = (Dual, Dual);

/// Absolute link angles from `+y`, counter-clockwise.
fn angles(q: &[Dual; 5]) -> [Dual; 5] {
    let pi = Dual::constant(std::f64::consts::PI);
    [
        q[0] + q[1] - q[2],
        q[0] + q[1],
        q[0],
        q[0] + q[3] + pi,
        q[0] + q[3] - q[4] + pi,
    ]
}

fn along(p: P2, phi: Dual, len: f64) -> P2 {
    (p.0 - phi.sin().scale(len), p.1 + phi.cos().scale(len))
}

/// Link COM positions, swing-foot position and link angles with the stance
/// foot at the origin. COM offsets are anatomical: measured from the knee on
/// shins, from the hip on thighs and torso.
fn geometry(model: &RobotModel, q: &[Dual; 5]) -> ([P2; 5], P2, [Dual; 5]) {
    let phi = angles(q);
    let l = |i: usize| model.links[i].length;
    let c = |i: usize| model.links[i].com_offset;
    let foot = (Dual::constant(0.0), Dual::constant(0.0));
    let knee = along(foot, phi[0], l(0));
    let hip = along(knee, phi[1], l(1));
    let swing_knee = along(hip, phi[3], l(3));
    let swing_foot = along(swing_knee, phi[4], l(4));
    let coms = [
        along(knee, phi[0], -c(0)),
        along(hip, phi[1], -c(1)),
        along(hip, phi[2], c(2)),
        along(hip, phi[3], c(3)),
        along(swing_knee, phi[4], c(4)),
    ];
    (coms, swing_foot, phi)
}

fn seeded(q: &Vec5, dir: &Vec5) -> [Dual; 5] {
    std::array::from_fn(|i| Dual { v: q[i], d: dir[i] })
}

/// Per-link COM positions and the swing foot, no derivatives.
pub fn positions(model: &RobotModel, q: &Vec5) -> ([Vec2; 5], Vec2) {
    let (coms, foot, _) = geometry(model, &seeded(q, &Vec5::zeros()));
    (
        coms.map(|p| Vec2::new(p.0.v, p.1.v)),
        Vec2::new(foot.0.v, foot.1.v),
    )
}

/// COM Jacobians (2×5 each), swing-foot Jacobian and link angle rows.
pub struct Jacobians {
    pub com: [SMatrix<f64, 2, 5>; 5],
    pub foot: SMatrix<f64, 2, 5>,
    pub angle: SMatrix<f64, 5, 5>,
}

pub fn jacobians(model: &RobotModel, q: &Vec5) -> Jacobians {
    let mut j = Jacobians {
        com: [SMatrix::zeros(); 5],
        foot: SMatrix::zeros(),
        angle: SMatrix::zeros(),
    };
    for k in 0..5 {
        let (coms, foot, phi) = geometry(model, &seeded(q, &Vec5::ith(k, 1.0)));
        for i in 0..5 {
            j.com[i][(0, k)] = coms[i].0.d;
            j.com[i][(1, k)] = coms[i].1.d;
            j.angle[(i, k)] = phi[i].d;
        }
        j.foot[(0, k)] = foot.0.d;
        j.foot[(1, k)] = foot.1.d;
    }
    j
}

/// `Σ m Jᵀ J + I sᵀ s`.
pub fn oracle_mass_matrix(model: &RobotModel, q: &Vec5) -> Mat5 {
    let j = jacobians(model, q);
    let mut m = Mat5::zeros();
    for i in 0..5 {
        let link = &model.links[i];
        let s = j.angle.row(i);
        m += j.com[i].transpose() * j.com[i] * link.mass
            + s.transpose() * s * link.inertia_about_com;
    }
    m
}

pub fn oracle_potential(model: &RobotModel, q: &Vec5) -> f64 {
    let (coms, _) = positions(model, q);
    (0..5)
        .map(|i| model.links[i].mass * model.gravity * coms[i].y)
        .sum()
}

fn oracle_gravity(model: &RobotModel, q: &Vec5) -> Vec5 {
    let mut g = Vec5::zeros();
    for k in 0..5 {
        let (coms, _, _) = geometry(model, &seeded(q, &Vec5::ith(k, 1.0)));
        g[k] = (0..5)
            .map(|i| model.links[i].mass * model.gravity * coms[i].1.d)
            .sum();
    }
    g
}

/// Euler–Lagrange generalized forces `M q̈ + Ṁ q̇ − ½ ∂(q̇ᵀ M q̇)/∂q + ∂V/∂q`,
/// with the mass-matrix derivatives by central differences.
pub fn euler_lagrange(model: &RobotModel, q: &Vec5, qd: &Vec5, qdd: &Vec5) -> Vec5 {
    let h = 1e-5;
    let dm: [Mat5; 5] = std::array::from_fn(|k| {
        let e = Vec5::ith(k, h);
        (oracle_mass_matrix(model, &(q + e)) - oracle_mass_matrix(model, &(q - e))) / (2.0 * h)
    });
    let mut mdot = Mat5::zeros();
    let mut quad = Vec5::zeros();
    for k in 0..5 {
        mdot += dm[k] * qd[k];
        quad[k] = 0.5 * qd.dot(&(dm[k] * qd));
    }
    oracle_mass_matrix(model, q) * qdd + mdot * qd - quad + oracle_gravity(model, q)
}

/// Kinetic energy of the floating model with the stance foot moving at `foot_vel`.
pub fn floating_kinetic_energy(model: &RobotModel, q: &Vec5, qd: &Vec5, foot_vel: &Vec2) -> f64 {
    let j = jacobians(model, q);
    (0..5)
        .map(|i| {
            let link = &model.links[i];
            let v = foot_vel + j.com[i] * qd;
            let w = (j.angle.row(i) * qd)[0];
            0.5 * link.mass * v.norm_squared() + 0.5 * link.inertia_about_com * w * w
        })
        .sum()
}

/// Angular momentum of the floating model about `point`, stance foot at `foot`.
pub fn floating_angular_momentum(
    model: &RobotModel,
    q: &Vec5,
    qd: &Vec5,
    foot: &Vec2,
    foot_vel: &Vec2,
    point: &Vec2,
) -> f64 {
    let j = jacobians(model, q);
    let (coms, _) = positions(model, q);
    (0..5)
        .map(|i| {
            let link = &model.links[i];
            let r = coms[i] + foot - point;
            let v = (foot_vel + j.com[i] * qd) * link.mass;
            r.x * v.y - r.y * v.x + link.inertia_about_com * (j.angle.row(i) * qd)[0]
        })
        .sum()
}

/// Five-point central differences, exact for polynomials up to degree 4 (first
/// derivative) and 5 (second derivative).
pub fn five_point<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> (f64, f64) {
    let (m2, m1, z, p1, p2) = (f(t - 2.0 * h), f(t - h), f(t), f(t + h), f(t + 2.0 * h));
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
    (d1, d2)
}

// Property suites. Each returns the worst measured error alongside the verdict.

/// Inverse dynamics against the Euler–Lagrange oracle, absolute error.
pub fn inverse_dynamics_suite(samples: usize, seed: u64, tol: f64) -> Check {
    let model = RobotModel::rabbit();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let q = random_configuration(&mut r);
        let qd = random_velocity(&mut r, 3.0);
        let qdd = random_velocity(&mut r, 20.0);
        let got = inverse_dynamics(&model, &q, &qd, &qdd);
        let want = euler_lagrange(&model, &q, &qd, &qdd);
        worst = worst.max((got - want).amax());
    }
    Check::new(
        worst <= tol,
        format!("max |τ − τ_EL| = {worst:.2e} N·m over {samples} states"),
    )
}

/// Symmetry and positive definiteness of the mass matrix, plus agreement
/// with the oracle mass matrix.
pub fn mass_matrix_suite(samples: usize, seed: u64, tol: f64) -> Check {
    let model = RobotModel::rabbit();
    let mut r = rng(seed);
    let (mut asym, mut min_eig, mut diff) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let q = random_configuration(&mut r);
        let m = mass_matrix(&model, &q);
        asym = asym.max((m - m.transpose()).amax());
        let sym = (m + m.transpose()) * 0.5;
        min_eig = min_eig.min(sym.symmetric_eigenvalues().min());
        diff = diff.max((m - oracle_mass_matrix(&model, &q)).amax());
    }
    Check::new(
        asym <= tol && min_eig > 0.0 && diff <= 1e-9,
        format!(
            "max asymmetry {asym:.2e}, min eigenvalue {min_eig:.3e}, max |M − M_oracle| {diff:.2e}"
        ),
    )
}

/// Relative energy drift of passive pinned motion over `duration` seconds,
/// for several random initial states.
pub fn energy_suite(trials: usize, seed: u64, duration: f64, tol: f64) -> Check {
    let model = RobotModel::rabbit();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x0 = State::new(random_configuration(&mut r), random_velocity(&mut r, 1.0));
        let energy = |s: &State| {
            floating_kinetic_energy(&model, &s.q, &s.qd, &Vec2::zeros())
                + oracle_potential(&model, &s.q)
        };
        let e0 = energy(&x0);
        let traj = match simulate(&model, &x0, &Passive, &SimulationOptions::until(duration)) {
            Ok(t) => t,
            Err(e) => return Check::new(false, format!("simulation failed: {e}")),
        };
        if (traj.final_time() - duration).abs() > 1e-12 {
            return Check::new(false, format!("stopped at t = {}", traj.final_time()));
        }
        for s in &traj.states {
            worst = worst.max((energy(s) - e0).abs() / e0.abs());
        }
    }
    Check::new(
        worst <= tol,
        format!("max relative energy drift {worst:.2e} over {duration} s, {trials} runs"),
    )
}

/// Plastic impact: kinetic energy loss, angular momentum about the impact
/// point, sticking contact and the zero-velocity fixed point.
pub fn impact_suite(samples: usize, seed: u64, momentum_tol: f64) -> Check {
    let model = RobotModel::rabbit();
    let map = RelabelMap::leg_swap();
    let mut r = rng(seed);
    let (mut ke_gain, mut h_err, mut stick, mut relabel_err) =
        (f64::NEG_INFINITY, 0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..samples {
        let pre = State::new(random_configuration(&mut r), random_velocity(&mut r, 3.0));
        let Ok(res) = impact_velocity_jump(&model, &pre, &map) else {
            failures += 1;
            continue;
        };
        let post = &res.extended_post;
        let ke_minus = floating_kinetic_energy(&model, &pre.q, &pre.qd, &Vec2::zeros());
        let ke_plus = floating_kinetic_energy(&model, &post.q(), &post.qd(), &post.foot_velocity());
        ke_gain = ke_gain.max((ke_plus - ke_minus) / ke_minus);

        let (_, impact_point) = positions(&model, &pre.q);
        let h_minus = floating_angular_momentum(
            &model,
            &pre.q,
            &pre.qd,
            &Vec2::zeros(),
            &Vec2::zeros(),
            &impact_point,
        );
        let h_plus = floating_angular_momentum(
            &model,
            &post.q(),
            &post.qd(),
            &Vec2::zeros(),
            &post.foot_velocity(),
            &impact_point,
        );
        h_err = h_err.max((h_plus - h_minus).abs() / h_minus.abs().max(1.0));

        let j = jacobians(&model, &pre.q);
        let v_swing = post.foot_velocity() + j.foot * post.qd();
        stick = stick.max(v_swing.amax());

        // The relabeled pinned state pivots on the old swing foot, which is at rest.
        let ke_relabeled =
            floating_kinetic_energy(&model, &res.post.q, &res.post.qd, &Vec2::zeros());
        relabel_err = relabel_err.max((ke_relabeled - ke_plus).abs() / ke_plus.max(1e-12));
    }

    let mut fixed = true;
    for _ in 0..10 {
        let pre = State::at_rest(random_configuration(&mut r));
        match impact_velocity_jump(&model, &pre, &map) {
            Ok(res) => {
                fixed &= res.extended_post.qd_e.iter().all(|v| *v == 0.0)
                    && res.impulse.iter().all(|v| *v == 0.0);
            }
            Err(_) => fixed = false,
        }
    }
    Check::new(
        failures == 0
            && ke_gain <= 0.0
            && h_err <= momentum_tol
            && stick <= 1e-9
            && relabel_err <= 1e-9
            && fixed,
        format!(
            "max (KE⁺ − KE⁻)/KE⁻ {ke_gain:.2e}, max angular momentum error {h_err:.2e}, \
             max swing-foot speed after impact {stick:.2e}, relabel KE mismatch {relabel_err:.2e}, \
             zero-velocity fixed point {}, {failures} singular",
            if fixed { "exact" } else { "broken" }
        ),
    )
}

/// Random boundary data and free coefficients.
pub fn random_gait_inputs(r: &mut ChaCha8Rng) -> (FreeParams, BoundaryConditions) {
    let qi = random_configuration(r);
    let qf = random_configuration(r);
    let t: f64 = r.random_range(0.2..=1.5);
    let theta = FreeParams::from_fn(|j, _| r.random_range(-2.0..=2.0) / t.powi(1 + (j % 3) as i32));
    (theta, BoundaryConditions::new(qi, qf, t).unwrap())
}

/// Boundary interpolation of the embedding and derivative consistency of
/// gait evaluation.
pub fn embedding_suite(samples: usize, seed: u64, boundary_tol: f64, derivative_tol: f64) -> Check {
    let mut r = rng(seed);
    let (mut boundary, mut deriv) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let (theta, bc) = random_gait_inputs(&mut r);
        let gait = embed(&theta, &bc);
        let start = gait.eval(0.0).unwrap();
        let end = gait.eval(bc.duration).unwrap();
        boundary = boundary
            .max((start.q - bc.q_init).amax())
            .max((end.q - bc.q_final).amax());

        let h = 1e-2 * bc.duration;
        for t in [0.1, 0.37, 0.5, 0.81].map(|f| f * bc.duration) {
            let s = gait.eval(t).unwrap();
            for k in 0..5 {
                let (d1, d2) = five_point(|t| gait.eval_unchecked(t).q[k], t, h);
                let (dd1, _) = five_point(|t| gait.eval_unchecked(t).qd[k], t, h);
                let scale = 1.0 + s.qd[k].abs().max(s.qdd[k].abs());
                deriv = deriv
                    .max((s.qd[k] - d1).abs() / scale)
                    .max((s.qdd[k] - d2).abs() / scale)
                    .max((s.qdd[k] - dd1).abs() / scale);
            }
        }
    }
    Check::new(
        boundary <= boundary_tol && deriv <= derivative_tol,
        format!("max boundary residual {boundary:.2e}, max derivative mismatch {deriv:.2e}"),
    )
}

/// Random strictly convex QP with a planted solution and active set.
pub struct PlantedQp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub active: Vec<usize>,
}

pub fn planted_qp(
    r: &mut ChaCha8Rng,
    n: usize,
    m_eq: usize,
    m_in: usize,
    n_active: usize,
) -> PlantedQp {
    let rand_mat = |rows: usize, cols: usize, r: &mut ChaCha8Rng| {
        DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..=1.0))
    };
    let l = rand_mat(n, n, r);
    let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.5;
    let a = rand_mat(m_eq, n, r);
    let c = rand_mat(m_in, n, r);
    let x = DVector::from_fn(n, |_, _| r.random_range(-1.0..=1.0));
    let mu = DVector::from_fn(m_eq, |_, _| r.random_range(-1.0..=1.0));
    let active: Vec<usize> = (0..n_active).collect();
    let lambda = DVector::from_fn(m_in, |i, _| {
        if i < n_active {
            r.random_range(0.5..=2.0)
        } else {
            0.0
        }
    });
    let g = -(&h * &x) - a.transpose() * &mu - c.transpose() * &lambda;
    let b = &a * &x;
    let d = DVector::from_fn(m_in, |i, _| {
        let v = (c.row(i) * &x)[0];
        if i < n_active {
            v
        } else {
            v + r.random_range(0.1..=1.0)
        }
    });
    PlantedQp {
        h,
        g,
        a,
        b,
        c,
        d,
        active,
    }
}

/// Solution of the QP's KKT system with the given active set held as equalities.
pub fn kkt_direct(qp: &PlantedQp) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let n = qp.g.len();
    let (me, ma) = (qp.b.len(), qp.active.len());
    let k = n + me + ma;
    let mut kkt = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.h);
    rhs.rows_mut(0, n).copy_from(&(-&qp.g));
    for i in 0..me {
        kkt.view_mut((n + i, 0), (1, n)).copy_from(&qp.a.row(i));
        kkt.view_mut((0, n + i), (n, 1))
            .copy_from(&qp.a.row(i).transpose());
        rhs[n + i] = qp.b[i];
    }
    for (j, &i) in qp.active.iter().enumerate() {
        kkt.view_mut((n + me + j, 0), (1, n))
            .copy_from(&qp.c.row(i));
        kkt.view_mut((0, n + me + j), (n, 1))
            .copy_from(&qp.c.row(i).transpose());
        rhs[n + me + j] = qp.d[i];
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .expect("planted KKT system is nonsingular");
    let mut lambda = DVector::zeros(qp.d.len());
    for (j, &i) in qp.active.iter().enumerate() {
        lambda[i] = sol[n + me + j];
    }
    (
        sol.rows(0, n).into_owned(),
        sol.rows(n, me).into_owned(),
        lambda,
    )
}

/// QP solver against the direct KKT solve, with sign and complementarity checks.
pub fn qp_suite(samples: usize, seed: u64, tol: f64) -> Check {
    let mut r = rng(seed);
    let (mut x_err, mut mult_err, mut worst_sign, mut worst_comp, mut worst_stat) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for s in 0..samples {
        let n = 5 + s % 4;
        let qp = planted_qp(&mut r, n, 1 + s % 2, n + 2, 1 + s % 3);
        let sol = match qp_solve(&qp.h, &qp.g, (&qp.a, &qp.b), (&qp.c, &qp.d)) {
            Ok(s) => s,
            Err(e) => return Check::new(false, format!("instance {s}: {e:?}")),
        };
        let (x, mu, lambda) = kkt_direct(&qp);
        x_err = x_err.max((&sol.step - &x).amax());
        mult_err = mult_err
            .max((&sol.eq_multipliers - &mu).amax())
            .max((&sol.ineq_multipliers - &lambda).amax());
        let slack = &qp.c * &sol.step - &qp.d;
        for i in 0..qp.d.len() {
            worst_sign = worst_sign.max(-sol.ineq_multipliers[i]).max(slack[i]);
            worst_comp = worst_comp.max((sol.ineq_multipliers[i] * slack[i]).abs());
        }
        let stationarity = &qp.h * &sol.step
            + &qp.g
            + qp.a.transpose() * &sol.eq_multipliers
            + qp.c.transpose() * &sol.ineq_multipliers;
        worst_stat = worst_stat.max(stationarity.amax());
    }
    Check::new(
        x_err <= tol && mult_err <= tol && worst_sign <= tol && worst_comp <= tol && worst_stat <= tol,
        format!(
            "max |x − x_KKT| {x_err:.2e}, max multiplier error {mult_err:.2e}, \
             sign violation {worst_sign:.2e}, complementarity {worst_comp:.2e}, stationarity {worst_stat:.2e}"
        ),
    )
}

fn rosenbrock(x: f64, y: f64) -> f64 {
    (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
}

/// Minimizer of the Rosenbrock function over the unit disc by repeatedly
/// refined grid search.
pub fn rosenbrock_disc_grid() -> (f64, f64) {
    let (mut cx, mut cy, mut half) = (0.0, 0.0, 1.2);
    let n = 200;
    while half > 1e-8 {
        let mut best = (f64::INFINITY, cx, cy);
        for i in 0..=n {
            for j in 0..=n {
                let x = cx - half + 2.0 * half * i as f64 / n as f64;
                let y = cy - half + 2.0 * half * j as f64 / n as f64;
                if x * x + y * y <= 1.0 {
                    let f = rosenbrock(x, y);
                    if f < best.0 {
                        best = (f, x, y);
                    }
                }
            }
        }
        (cx, cy) = (best.1, best.2);
        half *= 0.1;
    }
    (cx, cy)
}

/// SQP on Rosenbrock restricted to the unit disc against the grid oracle.
pub fn rosenbrock_suite(tol: f64) -> Check {
    let problem = FnProblem::new(2, 0, 1, |x: &DVector<f64>| Evaluation {
        f: rosenbrock(x[0], x[1]),
        eq: DVector::zeros(0),
        ineq: DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - 1.0]),
    });
    let (gx, gy) = rosenbrock_disc_grid();
    let res = match minimize(
        &problem,
        &DVector::from_vec(vec![-0.5, 0.5]),
        &SqpOptions::default(),
    ) {
        Ok(r) => r,
        Err(e) => return Check::new(false, format!("solver error: {e}")),
    };
    let err = (res.x[0] - gx).abs().max((res.x[1] - gy).abs());
    Check::new(
        res.status == SqpStatus::Converged && err <= tol && res.ineq_multipliers[0] > 0.0,
        format!(
            "SQP ({:.6}, {:.6}) vs grid ({gx:.6}, {gy:.6}), error {err:.2e}, multiplier {:.4}, {:?} in {} iterations",
            res.x[0], res.x[1], res.ineq_multipliers[0], res.status, res.iterations
        ),
    )
}

/// Small problems with closed-form answers: an equality-constrained
/// quadratic and a bound.
pub fn closed_form_suite(tol: f64) -> Check {
    let n = 5;
    let sphere = FnProblem::new(n, 1, 0, |x: &DVector<f64>| Evaluation {
        f: x.norm_squared(),
        eq: DVector::from_vec(vec![x.sum() - 1.0]),
        ineq: DVector::zeros(0),
    });
    let a = match minimize(
        &sphere,
        &DVector::from_fn(n, |i, _| i as f64),
        &SqpOptions::default(),
    ) {
        Ok(r) => r,
        Err(e) => return Check::new(false, format!("solver error: {e}")),
    };
    let a_err =
        a.x.iter()
            .map(|v| (v - 1.0 / n as f64).abs())
            .fold(0.0, f64::max);
    let a_ok = a.status == SqpStatus::Converged && a.iterations <= 5 && a_err <= tol;

    let bound = FnProblem::new(1, 0, 1, |x: &DVector<f64>| Evaluation {
        f: x[0] * x[0],
        eq: DVector::zeros(0),
        ineq: DVector::from_vec(vec![1.0 - x[0]]),
    });
    let b = match minimize(
        &bound,
        &DVector::from_vec(vec![3.0]),
        &SqpOptions::default(),
    ) {
        Ok(r) => r,
        Err(e) => return Check::new(false, format!("solver error: {e}")),
    };
    let b_err = (b.x[0] - 1.0).abs();
    let mult_err = (b.ineq_multipliers[0] - 2.0).abs();
    let b_ok = b.status == SqpStatus::Converged && b_err <= tol && mult_err <= 1e-4;
    Check::new(
        a_ok,
        format!(
            "sum-constrained quadratic error {a_err:.2e} in {} iterations",
            a.iterations
        ),
    )
    .and(Check::new(
        b_ok,
        format!("bound error {b_err:.2e}, multiplier error {mult_err:.2e}"),
    ))
}

/// Finite-difference Jacobian against a hand-derived one.
pub fn fd_suite(tol: f64) -> Check {
    let f = |x: &DVector<f64>| -> stairgait_core::Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![
            x[0].sin() * x[1],
            (x[0] * x[1]).exp(),
            x[1].powi(3) - x[0],
        ]))
    };
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = DVector::from_fn(2, |_, _| r.random_range(-1.0..=1.0));
        let jac = fd_jacobian(f, &x, 1e-6).unwrap();
        let e = (x[0] * x[1]).exp();
        let exact = DMatrix::from_row_slice(
            3,
            2,
            &[
                x[0].cos() * x[1],
                x[0].sin(),
                x[1] * e,
                x[0] * e,
                -1.0,
                3.0 * x[1] * x[1],
            ],
        );
        worst = worst.max((jac - exact).amax());
    }
    Check::new(worst <= tol, format!("max FD Jacobian error {worst:.2e}"))
}

/// Consistency of the remaining dynamics outputs: torque split, contact
/// forces against Newton's law for the COM, COM and swing-foot Jacobians.
pub fn consistency_suite(samples: usize, seed: u64) -> Check {
    let model = RobotModel::rabbit();
    let mut r = rng(seed);
    let (mut split_err, mut force_err, mut com_err, mut jac_err, mut energy_err) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let q = random_configuration(&mut r);
        let qd = random_velocity(&mut r, 3.0);
        let qdd = random_velocity(&mut r, 20.0);

        let tau = inverse_dynamics(&model, &q, &qd, &qdd);
        let (u, tau_v) = split_torques(&model, &q, &qd, &qdd);
        let rebuilt = Vec5::new(tau_v, u[0], u[1], u[2], u[3]);
        split_err = split_err.max((rebuilt - tau).amax());

        // Ground force = m (a_com + g ŷ), with a_com from the quadratic path q(t).
        let path = |t: f64, axis: usize| {
            let qt = q + qd * t + qdd * (0.5 * t * t);
            let (coms, _) = positions(&model, &qt);
            (0..5)
                .map(|i| model.links[i].mass * coms[i][axis])
                .sum::<f64>()
        };
        let h = 1e-3;
        let fx = five_point(|t| path(t, 0), 0.0, h).1;
        let fy = five_point(|t| path(t, 1), 0.0, h).1 + model.total_mass() * model.gravity;
        let cf = contact_forces(&model, &q, &qd, &qdd);
        force_err = force_err.max((cf.horizontal - fx).abs().max((cf.vertical - fy).abs()));

        let (coms, foot) = positions(&model, &q);
        let brute = (0..5).fold(Vec2::zeros(), |acc, i| acc + coms[i] * model.links[i].mass)
            / model.total_mass();
        com_err = com_err.max((com(&model, &q).0 - brute).amax());

        let (p, j) = swing_foot(&model, &q);
        jac_err = jac_err
            .max((p - foot).amax())
            .max((j - jacobians(&model, &q).foot).amax());

        let ke = kinetic_energy(&model, &q, &qd);
        energy_err = energy_err
            .max((ke - floating_kinetic_energy(&model, &q, &qd, &Vec2::zeros())).abs())
            .max((potential_energy(&model, &q) - oracle_potential(&model, &q)).abs());

        let x = ExtendedState::pinned(&State::new(q, qd), Vec2::zeros());
        let h_core = angular_momentum_about(&model, &x, &foot);
        let h_oracle =
            floating_angular_momentum(&model, &q, &qd, &Vec2::zeros(), &Vec2::zeros(), &foot);
        energy_err = energy_err.max((h_core - h_oracle).abs());
    }
    Check::new(
        split_err <= 1e-12
            && force_err <= 1e-5
            && com_err <= 1e-12
            && jac_err <= 1e-12
            && energy_err <= 1e-9,
        format!(
            "split {split_err:.1e}, contact force {force_err:.1e} N, COM {com_err:.1e} m, \
             swing Jacobian {jac_err:.1e}, energy and momentum {energy_err:.1e}"
        ),
    )
}
