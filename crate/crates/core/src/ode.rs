//! Order-parameter ODEs and a fixed-step RK4 integrator.
//!
//! Both phases evolve the same nine student overlaps, packed as
//! `[Q1, R1_1, Q2, R2_2, Q12, R12_1, R12_2, R2_1, R1_2]`. The teacher-only
//! parameters (`T1_1`, `T2_2`, `T12_1`, `T12_2`, `q'`) are constant and read
//! from the initial state.

use serde::{Deserialize, Serialize};

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::order::OrderParamState;

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-3;
/// Default spacing of the returned samples.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.01;

pub const STATE_DIM: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// SGD on task 1.
    One,
    /// SGD on task 2.
    Two,
}

impl Phase {
    pub fn number(self) -> u8 {
        match self {
            Phase::One => 1,
            Phase::Two => 2,
        }
    }
}

/// The autonomous linear ODE of one training phase.
#[derive(Debug, Clone, Copy)]
pub struct OdeSystem {
    phase: Phase,
    gamma: f64,
    /// `(2r - 1) / r`, the share of an SGD step's noise landing on the common block.
    common_share: f64,
    /// `B1' I1 B2 = B1' I2 B2 = r q sigma_B1 sigma_B2`.
    cross: f64,
}

impl OdeSystem {
    pub fn new(phase: Phase, cfg: &ValidatedConfig) -> OdeSystem {
        let gamma = match phase {
            Phase::One => cfg.gamma1(),
            Phase::Two => cfg.gamma2(),
        };
        OdeSystem {
            phase,
            gamma,
            common_share: (2.0 * cfg.r() - 1.0) / cfg.r(),
            cross: cfg.r() * cfg.q() * cfg.sigma_b1() * cfg.sigma_b2(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn state_dim(&self) -> usize {
        STATE_DIM
    }

    /// Writes `dy/dt` for the packed state `y`; `fixed` supplies the teacher constants.
    pub fn rhs(&self, fixed: &OrderParamState, y: &[f64; STATE_DIM], dy: &mut [f64; STATE_DIM]) {
        let g = self.gamma;
        let [q1, r11, q2, r22, q12, r12_1, r12_2, r2_1, r1_2] = *y;
        match self.phase {
            Phase::One => {
                let gap1 = fixed.t1_1 - 2.0 * r11 + q1;
                let dq12 = 2.0 * g * (r12_1 - q12) + g * g * self.common_share * gap1;
                dy[0] = g * g * gap1 + 2.0 * g * (r11 - q1);
                dy[1] = g * (fixed.t1_1 - r11);
                dy[2] = dq12;
                dy[3] = g * (fixed.q_prime - r12_2);
                dy[4] = dq12;
                dy[5] = g * (fixed.t12_1 - r12_1);
                dy[6] = g * (fixed.q_prime - r12_2);
                dy[7] = g * (fixed.t12_1 - r12_1);
                dy[8] = g * (self.cross - r1_2);
            }
            Phase::Two => {
                let gap2 = fixed.t2_2 - 2.0 * r22 + q2;
                let dq12 = 2.0 * g * (r12_2 - q12) + g * g * self.common_share * gap2;
                dy[0] = dq12;
                dy[1] = g * (fixed.q_prime - r12_1);
                dy[2] = g * g * gap2 + 2.0 * g * (r22 - q2);
                dy[3] = g * (fixed.t2_2 - r22);
                dy[4] = dq12;
                dy[5] = g * (fixed.q_prime - r12_1);
                dy[6] = g * (fixed.t12_2 - r12_2);
                dy[7] = g * (self.cross - r2_1);
                dy[8] = g * (fixed.t12_2 - r12_2);
            }
        }
    }

    /// Rate of change of a full state; the teacher constants get zero.
    pub fn rate(&self, state: &OrderParamState) -> OrderParamState {
        let mut dy = [0.0; STATE_DIM];
        self.rhs(state, &pack(state), &mut dy);
        unpack(
            &dy,
            &OrderParamState::default(),
        )
    }
}

pub fn pack(s: &OrderParamState) -> [f64; STATE_DIM] {
    [s.q1, s.r1_1, s.q2, s.r2_2, s.q12, s.r12_1, s.r12_2, s.r2_1, s.r1_2]
}

/// Overwrite the integrated fields of `template` with `y`.
pub fn unpack(y: &[f64; STATE_DIM], template: &OrderParamState) -> OrderParamState {
    OrderParamState {
        q1: y[0],
        r1_1: y[1],
        q2: y[2],
        r2_2: y[3],
        q12: y[4],
        r12_1: y[5],
        r12_2: y[6],
        r2_1: y[7],
        r1_2: y[8],
        ..*template
    }
}

/// Phase-1 rate at `state`.
pub fn rhs_phase1(state: &OrderParamState, cfg: &ValidatedConfig) -> OrderParamState {
    OdeSystem::new(Phase::One, cfg).rate(state)
}

/// Phase-2 rate at `state`.
pub fn rhs_phase2(state: &OrderParamState, cfg: &ValidatedConfig) -> OrderParamState {
    OdeSystem::new(Phase::Two, cfg).rate(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSample {
    pub t: f64,
    pub state: OrderParamState,
}

/// Classical RK4 over `[0, t_end]`, sampled every `sample_interval`.
///
/// `dt` is an upper bound: the step actually taken is
/// `sample_interval / ceil(sample_interval / dt)` so that samples land on
/// step boundaries. Samples are returned at `k * sample_interval` for every
/// such time not exceeding `t_end` (with a `1e-9` relative slack).
pub fn integrate(
    system: &OdeSystem,
    init: &OrderParamState,
    t_end: f64,
    dt: f64,
    sample_interval: f64,
) -> Result<Vec<OdeSample>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be >= 0, got {t_end}")));
    }
    if !(sample_interval > 0.0 && sample_interval.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample interval must be > 0, got {sample_interval}"
        )));
    }
    let steps_per_sample = (sample_interval / dt * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let h = sample_interval / steps_per_sample as f64;
    let n_samples = (t_end / sample_interval * (1.0 + 1e-9)).floor() as u64;

    let fixed = *init;
    let mut y = pack(init);
    let mut out = Vec::with_capacity(n_samples as usize + 1);
    out.push(OdeSample { t: 0.0, state: *init });

    let mut step: u64 = 0;
    for sample in 1..=n_samples {
        for _ in 0..steps_per_sample {
            rk4_step(system, &fixed, &mut y, h);
            step += 1;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    phase: system.phase.number(),
                    step,
                });
            }
        }
        out.push(OdeSample {
            t: sample as f64 * sample_interval,
            state: unpack(&y, &fixed),
        });
    }
    Ok(out)
}

/// Integrate with classical RK4 and return the state at each of `times`.
///
/// `times` must be nondecreasing and nonnegative. Each gap is covered with
/// equal steps no longer than `dt`.
pub fn integrate_at(
    system: &OdeSystem,
    init: &OrderParamState,
    times: &[f64],
    dt: f64,
) -> Result<Vec<OrderParamState>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let fixed = *init;
    let mut y = pack(init);
    let mut now = 0.0;
    let mut step: u64 = 0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if !(target.is_finite() && target >= now) {
            return Err(Error::InvalidArgument(format!(
                "sample times must be finite and nondecreasing from 0, got {target} after {now}"
            )));
        }
        let gap = target - now;
        let n_steps = (gap / dt * (1.0 - 1e-12)).ceil() as u64;
        if n_steps > 0 {
            let h = gap / n_steps as f64;
            for _ in 0..n_steps {
                rk4_step(system, &fixed, &mut y, h);
                step += 1;
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        phase: system.phase.number(),
                        step,
                    });
                }
            }
        }
        now = target;
        out.push(unpack(&y, &fixed));
    }
    Ok(out)
}

fn rk4_step(system: &OdeSystem, fixed: &OrderParamState, y: &mut [f64; STATE_DIM], h: f64) {
    let (mut k1, mut k2, mut k3, mut k4) = ([0.0; STATE_DIM], [0.0; STATE_DIM], [0.0; STATE_DIM], [0.0; STATE_DIM]);
    let mut tmp = [0.0; STATE_DIM];
    system.rhs(fixed, y, &mut k1);
    for i in 0..STATE_DIM {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    system.rhs(fixed, &tmp, &mut k2);
    for i in 0..STATE_DIM {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    system.rhs(fixed, &tmp, &mut k3);
    for i in 0..STATE_DIM {
        tmp[i] = y[i] + h * k3[i];
    }
    system.rhs(fixed, &tmp, &mut k4);
    for i in 0..STATE_DIM {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, ContinualConfig, T1Mode, Time};
    use crate::theory::Theory;

    fn config(q: f64, sigma_j: f64, sigma_sq: f64) -> ValidatedConfig {
        validate(&ContinualConfig {
            n: 3000,
            r: 0.8,
            q,
            eta: 1.0,
            sigma1_sq: sigma_sq,
            sigma2_sq: sigma_sq,
            sigma_b1: 1.0,
            sigma_b2: 1.0,
            sigma_j,
            seed: 0,
            t1_mode: T1Mode::ExactCopy,
            divergence_study: false,
            exact_similarity: false,
        })
        .unwrap()
    }

    fn fig3a() -> ValidatedConfig {
        config(0.3, 1.0, 0.8)
    }

    fn fig3b_text() -> ValidatedConfig {
        config(0.7, 2.0, 1.7)
    }

    /// Sup-norm over samples and integrated components against the closed forms.
    fn deviation(cfg: &ValidatedConfig, phase: Phase, dt: f64, t_end: f64) -> f64 {
        let th = Theory::new(cfg);
        let (init, exact): (OrderParamState, Box<dyn Fn(f64) -> OrderParamState>) = match phase {
            Phase::One => (th.phase1_state(Time::ZERO), Box::new(move |t| th.phase1_state(Time::new(t)))),
            Phase::Two => (
                th.phase2_initial_state(),
                Box::new(move |t| th.phase2_order_params(Time::new(t))),
            ),
        };
        let traj = integrate(&OdeSystem::new(phase, cfg), &init, t_end, dt, 0.1).unwrap();
        traj.iter()
            .map(|s| {
                let want = pack(&exact(s.t));
                let got = pack(&s.state);
                want.iter().zip(got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn phase1_matches_closed_form() {
        assert!(deviation(&fig3a(), Phase::One, 1e-3, 5.0) < 1e-8);
        assert!(deviation(&fig3b_text(), Phase::One, 1e-3, 5.0) < 1e-8);
    }

    #[test]
    fn phase2_matches_closed_form() {
        assert!(deviation(&fig3a(), Phase::Two, 1e-3, 10.0) < 1e-8);
        assert!(deviation(&fig3b_text(), Phase::Two, 1e-3, 10.0) < 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        for cfg in [fig3a(), fig3b_text()] {
            for phase in [Phase::One, Phase::Two] {
                let coarse = deviation(&cfg, phase, 0.1, 10.0);
                let fine = deviation(&cfg, phase, 0.05, 10.0);
                assert!(coarse / fine >= 8.0, "{phase:?}: ratio {}", coarse / fine);
                let order = (coarse / fine).log2();
                assert!(order >= 3.9, "{phase:?}: order {order}");
            }
        }
    }

    #[test]
    fn reconstructed_eg1_matches_theory() {
        for cfg in [fig3a(), fig3b_text()] {
            let th = Theory::new(&cfg);
            let traj = integrate(
                &OdeSystem::new(Phase::Two, &cfg),
                &th.phase2_initial_state(),
                10.0,
                1e-3,
                DEFAULT_SAMPLE_INTERVAL,
            )
            .unwrap();
            assert_eq!(traj.len(), 1001);
            for s in &traj {
                let gap = (s.state.eg1(cfg.sigma1_sq()) - th.eg1_phase2(Time::new(s.t))).abs();
                assert!(gap < 1e-8, "t={} gap={gap}", s.t);
            }
        }
    }

    #[test]
    fn phase1_fixed_point() {
        let cfg = fig3a();
        let th = Theory::new(&cfg);
        let fp = th.phase1_state(Time::new(1e4));
        let rate = rhs_phase1(&fp, &cfg);
        assert!(rate.to_array().iter().all(|v| v.abs() < 1e-10), "{rate:?}");
        // Q1 = R1_1 = T1_1 alone is enough for the task-1 components
        let s = OrderParamState {
            q1: fp.t1_1,
            r1_1: fp.t1_1,
            ..fp
        };
        let rate = rhs_phase1(&s, &cfg);
        assert_eq!((rate.q1, rate.r1_1), (0.0, 0.0));
    }

    #[test]
    fn phase1_initial_rate() {
        let cfg = fig3a();
        let rate = rhs_phase1(&Theory::new(&cfg).phase1_state(Time::ZERO), &cfg);
        assert!((rate.r1_1 - 0.512).abs() < 1e-15);
    }

    #[test]
    fn no_input_variance_no_learning() {
        let mut c = fig3a().config().clone();
        c.sigma1_sq = 1e-300;
        c.sigma2_sq = 1e-300;
        let cfg = validate(&c).unwrap();
        let th = Theory::new(&cfg);
        for s in [th.phase1_state(Time::new(0.5)), th.phase2_order_params(Time::new(0.5))] {
            for rate in [rhs_phase1(&s, &cfg), rhs_phase2(&s, &cfg)] {
                assert!(rate.to_array().iter().all(|v| v.abs() < 1e-290));
            }
        }
    }

    #[test]
    fn phase2_fixed_point() {
        let cfg = fig3a();
        let th = Theory::new(&cfg);
        let init = th.phase2_initial_state();
        let fp = OrderParamState {
            r12_1: init.q_prime,
            r12_2: init.t12_2,
            q12: init.t12_2,
            r2_2: init.t2_2,
            q2: init.t2_2,
            r2_1: cfg.r() * cfg.q() * cfg.sigma_b1() * cfg.sigma_b2(),
            ..init
        };
        let rate = rhs_phase2(&fp, &cfg);
        assert!(pack(&rate).iter().all(|v| *v == 0.0), "{rate:?}");

        let limit = th.phase2_order_params(Time::new(1e4));
        let rate = rhs_phase2(&limit, &cfg);
        assert!(pack(&rate).iter().all(|v| v.abs() < 1e-10));
        let long = integrate(&OdeSystem::new(Phase::Two, &cfg), &init, 60.0, 1e-2, 60.0).unwrap();
        assert!(pack(&long[1].state)
            .iter()
            .zip(pack(&limit))
            .all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn phase2_initial_rate() {
        let cfg = fig3a();
        let rate = rhs_phase2(&Theory::new(&cfg).phase2_initial_state(), &cfg);
        assert!((rate.r2_2 - 0.3968).abs() < 1e-15);
    }

    #[test]
    fn disjoint_tasks_do_not_interact() {
        let mut c = fig3a().config().clone();
        c.q = 0.0;
        c.r = 0.5;
        let cfg = validate(&c).unwrap();
        let th = Theory::new(&cfg);
        let traj = integrate(
            &OdeSystem::new(Phase::Two, &cfg),
            &th.phase2_initial_state(),
            5.0,
            1e-3,
            0.5,
        )
        .unwrap();
        for s in &traj {
            assert_eq!(rhs_phase2(&s.state, &cfg).r1_1, 0.0);
            assert_eq!(s.state.r1_1, th.phase2_initial_state().r1_1);
        }
    }

    #[test]
    fn identical_tasks_keep_zero_error() {
        let mut c = fig3a().config().clone();
        c.q = 1.0;
        c.r = 1.0;
        let cfg = validate(&c).unwrap();
        let th = Theory::new(&cfg);
        let traj = integrate(
            &OdeSystem::new(Phase::Two, &cfg),
            &th.phase2_initial_state(),
            10.0,
            1e-3,
            0.1,
        )
        .unwrap();
        for s in traj {
            assert!(s.state.eg1(cfg.sigma1_sq()).abs() < 1e-10);
        }
    }

    #[test]
    fn divergent_system_reports_non_finite() {
        let mut c = fig3a().config().clone();
        c.r = 1.0;
        c.sigma2_sq = 2.5;
        c.divergence_study = true;
        let cfg = validate(&c).unwrap();
        let th = Theory::new(&cfg);
        let err = integrate(
            &OdeSystem::new(Phase::Two, &cfg),
            &th.phase2_initial_state(),
            1000.0,
            1e-2,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { phase: 2, .. }));
    }

    #[test]
    fn sampling_grid_and_bad_arguments() {
        let cfg = fig3a();
        let th = Theory::new(&cfg);
        let sys = OdeSystem::new(Phase::One, &cfg);
        let init = th.phase1_state(Time::ZERO);
        let traj = integrate(&sys, &init, 1.0, 0.03, 0.1).unwrap();
        assert_eq!(traj.len(), 11);
        assert!((traj[10].t - 1.0).abs() < 1e-15);
        assert_eq!(integrate(&sys, &init, 0.0, 1e-3, 0.1).unwrap().len(), 1);
        assert!(integrate(&sys, &init, 1.0, 0.0, 0.1).is_err());
        assert!(integrate(&sys, &init, -1.0, 1e-3, 0.1).is_err());
        assert!(integrate(&sys, &init, 1.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn arbitrary_sample_times() {
        let cfg = fig3b_text();
        let th = Theory::new(&cfg);
        let sys = OdeSystem::new(Phase::Two, &cfg);
        let init = th.phase2_initial_state();
        let times = [0.0, 0.0, 0.37, 1.0, 2.5, 2.5, 5.0];
        let states = integrate_at(&sys, &init, &times, 1e-3).unwrap();
        assert_eq!(states.len(), times.len());
        assert_eq!(states[0], init);
        assert_eq!(states[1], init);
        for (t, s) in times.iter().zip(&states) {
            let exact = pack(&th.phase2_order_params(Time::new(*t)));
            let got = pack(s);
            let gap = got.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-10, "t = {t}: {gap}");
        }
        let grid = integrate(&sys, &init, 5.0, 1e-3, 0.1).unwrap();
        let at_grid = integrate_at(&sys, &init, &[1.0, 5.0], 1e-3).unwrap();
        assert!(at_grid[1].max_abs_diff(&grid[50].state) < 1e-12);
        assert!(integrate_at(&sys, &init, &[1.0, 0.5], 1e-3).is_err());
        assert!(integrate_at(&sys, &init, &[-1.0], 1e-3).is_err());
        assert!(integrate_at(&sys, &init, &[1.0], 0.0).is_err());
    }

    /// Closed forms satisfy the ODEs pointwise: central differences of the
    /// closed forms against the right-hand side on t = 0, 0.1, ..., 10.
    #[test]
    fn closed_forms_satisfy_odes() {
        let h = 1e-6;
        for cfg in [fig3a(), fig3b_text()] {
            let th = Theory::new(&cfg);
            for phase in [Phase::One, Phase::Two] {
                let sys = OdeSystem::new(phase, &cfg);
                let at = |t: f64| match phase {
                    Phase::One => th.phase1_state(Time::new(t)),
                    Phase::Two => th.phase2_order_params(Time::new(t)),
                };
                for i in 0..=100 {
                    // one-sided at 0 would lose an order; shift the first node by h
                    let t = (i as f64 * 0.1).max(h);
                    let (plus, minus) = (pack(&at(t + h)), pack(&at(t - h)));
                    let rate = pack(&sys.rate(&at(t)));
                    for c in 0..STATE_DIM {
                        let fd = (plus[c] - minus[c]) / (2.0 * h);
                        assert!(
                            (fd - rate[c]).abs() < 1e-9,
                            "{phase:?} component {c} at t={t}: fd {fd} vs rhs {}",
                            rate[c]
                        );
                    }
                }
            }
        }
    }
}
