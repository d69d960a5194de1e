//! Intelligent (iP, iPI, iPD, iPID, iGPI) and classic (PID, PI²D) control laws.
//!
//! Intelligent laws follow the minus convention
//! `u = −(F − y*^(ν) + 𝔠(e)) / α` with `e = y − y*`, so that substituting
//! them into `y^(ν) = F + αu` leaves `e^(ν) + 𝔠(e) = 0`. Classic laws are
//! `u = k_p e + k_i ∫e + k_ii ∫∫e + k_d ė` and are fed `e = y* − y` by the
//! simulation loop.
//!
//! No anti-windup and no saturation anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::Order;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntelligentGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub kii: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl IntelligentGains {
    pub fn ip(alpha: f64, kp: f64) -> Self {
        Self { kp, alpha, ..Default::default() }
    }

    pub fn ipi(alpha: f64, kp: f64, ki: f64) -> Self {
        Self { kp, ki, alpha, ..Default::default() }
    }

    pub fn ipd(alpha: f64, kp: f64, kd: f64) -> Self {
        Self { kp, kd, alpha, ..Default::default() }
    }

    pub fn ipid(alpha: f64, kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd, alpha, ..Default::default() }
    }

    pub fn igpi(alpha: f64, beta: f64, kp: f64, ki: f64, kii: f64) -> Self {
        Self { kp, ki, kii, alpha, beta, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassicGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub kii: f64,
    /// Derivative low-pass time constant in seconds, 0 for none.
    pub deriv_filter_tau: f64,
}

impl ClassicGains {
    pub fn pid(kp: f64, ki: f64, kd: f64, deriv_filter_tau: f64) -> Self {
        Self { kp, ki, kd, kii: 0.0, deriv_filter_tau }
    }
}

/// Accumulators and derivative-filter memory, advanced once per sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub int_e: f64,
    pub int_int_e: f64,
    pub int_u: f64,
    pub prev_e: f64,
    pub prev_filtered_de: f64,
}

impl ControllerState {
    /// Rectangle step of both error integrals and one update of the filtered
    /// backward difference of `e`. Returns the filtered derivative.
    pub fn advance(&mut self, e: f64, te: f64, deriv_filter_tau: f64) -> f64 {
        self.int_e += e * te;
        self.int_int_e += self.int_e * te;
        let raw = (e - self.prev_e) / te;
        self.prev_filtered_de = if deriv_filter_tau > 0.0 {
            self.prev_filtered_de + te / (deriv_filter_tau + te) * (raw - self.prev_filtered_de)
        } else {
            raw
        };
        self.prev_e = e;
        self.prev_filtered_de
    }

    pub fn accumulate_input(&mut self, u: f64, te: f64) {
        self.int_u += u * te;
    }
}

/// iP: `u = −(F − ẏ* + K_P e)/α`.
pub fn ip(f: f64, dystar: f64, e: f64, g: &IntelligentGains) -> f64 {
    -(f - dystar + g.kp * e) / g.alpha
}

/// iPI: `u = −(F − ẏ* + K_P e + K_I ∫e)/α`.
pub fn ipi(f: f64, dystar: f64, e: f64, int_e: f64, g: &IntelligentGains) -> f64 {
    -(f - dystar + g.kp * e + g.ki * int_e) / g.alpha
}

/// iPD: `u = −(F − ÿ* + K_P e + K_D ė)/α`.
pub fn ipd(f: f64, ddystar: f64, e: f64, de: f64, g: &IntelligentGains) -> f64 {
    -(f - ddystar + g.kp * e + g.kd * de) / g.alpha
}

/// iPID: `u = −(F − ÿ* + K_P e + K_I ∫e + K_D ė)/α`.
pub fn ipid(f: f64, ddystar: f64, e: f64, de: f64, int_e: f64, g: &IntelligentGains) -> f64 {
    -(f - ddystar + g.kp * e + g.ki * int_e + g.kd * de) / g.alpha
}

/// iGPI for `ẏ = F + αu + β∫u`:
/// `u = −(F + β∫u − ẏ* + K_P e + K_I ∫e + K_II ∫∫e)/α`.
pub fn igpi(
    f: f64,
    dystar: f64,
    e: f64,
    int_e: f64,
    int_int_e: f64,
    int_u: f64,
    g: &IntelligentGains,
) -> f64 {
    -(f + g.beta * int_u - dystar + g.kp * e + g.ki * int_e + g.kii * int_int_e) / g.alpha
}

/// Classic PID. Advances `state` by one sample of `e`.
pub fn classic_pid(e: f64, state: &mut ControllerState, g: &ClassicGains, te: f64) -> f64 {
    let de = state.advance(e, te, g.deriv_filter_tau);
    g.kp * e + g.ki * state.int_e + g.kd * de
}

/// Classic PI²D: PID plus a double-integral term. Advances `state`.
pub fn classic_pi2d(e: f64, state: &mut ControllerState, g: &ClassicGains, te: f64) -> f64 {
    let de = state.advance(e, te, g.deriv_filter_tau);
    g.kp * e + g.ki * state.int_e + g.kii * state.int_int_e + g.kd * de
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Characteristic polynomial of the error dynamics, highest power first.
    pub coefficients: Vec<f64>,
    pub hurwitz: bool,
}

/// Routh–Hurwitz test: every root of `coeffs` (highest power first) has a
/// strictly negative real part.
pub fn is_hurwitz(coeffs: &[f64]) -> bool {
    let coeffs: Vec<f64> = coeffs.iter().copied().skip_while(|&c| c == 0.0).collect();
    if coeffs.is_empty() {
        return false;
    }
    let lead = coeffs[0];
    let c: Vec<f64> = coeffs.iter().map(|&x| x / lead).collect();
    if c.iter().any(|&x| !(x > 0.0)) {
        return false;
    }
    let n = c.len();
    if n <= 2 {
        return true;
    }
    let mut prev: Vec<f64> = c.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = c.iter().skip(1).step_by(2).copied().collect();
    for _ in 2..n {
        if !(cur[0] > 0.0) {
            return false;
        }
        let next: Vec<f64> = (0..prev.len().saturating_sub(1))
            .map(|i| {
                let a = prev.get(i + 1).copied().unwrap_or(0.0);
                let b = cur.get(i + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        if next.is_empty() {
            break;
        }
        prev = cur;
        cur = next;
    }
    cur.first().is_some_and(|&x| x > 0.0)
}

/// Characteristic polynomial of the closed error dynamics and its Hurwitz
/// status.
///
/// `ν = 1`: `s + K_P`, `s² + K_P s + K_I`, or `s³ + K_P s² + K_I s + K_II`
/// depending on which integral gains are active. `ν = 2`: `s² + K_D s + K_P`
/// or `s³ + K_D s² + K_P s + K_I`.
pub fn validate_error_dynamics(g: &IntelligentGains, nu: Order) -> StabilityReport {
    let coefficients = match nu {
        Order::First => {
            if g.kii != 0.0 {
                vec![1.0, g.kp, g.ki, g.kii]
            } else if g.ki != 0.0 {
                vec![1.0, g.kp, g.ki]
            } else {
                vec![1.0, g.kp]
            }
        }
        Order::Second => {
            if g.ki != 0.0 {
                vec![1.0, g.kd, g.kp, g.ki]
            } else {
                vec![1.0, g.kd, g.kp]
            }
        }
    };
    let hurwitz = is_hurwitz(&coefficients);
    StabilityReport { coefficients, hurwitz }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntelligentKind {
    P,
    PI,
    PD,
    PID,
    GPI,
}

impl IntelligentKind {
    pub fn order(self) -> Order {
        match self {
            IntelligentKind::P | IntelligentKind::PI | IntelligentKind::GPI => Order::First,
            IntelligentKind::PD | IntelligentKind::PID => Order::Second,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassicKind {
    PID,
    PI2D,
}

/// Which controller closes the loop, with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControllerSpec {
    Intelligent { kind: IntelligentKind, gains: IntelligentGains, deriv_filter_tau: f64 },
    Classic { kind: ClassicKind, gains: ClassicGains },
}

impl ControllerSpec {
    pub fn intelligent(kind: IntelligentKind, gains: IntelligentGains) -> Self {
        ControllerSpec::Intelligent { kind, gains, deriv_filter_tau: 0.05 }
    }

    pub fn classic_pid(gains: ClassicGains) -> Self {
        ControllerSpec::Classic { kind: ClassicKind::PID, gains }
    }

    pub fn is_intelligent(&self) -> bool {
        matches!(self, ControllerSpec::Intelligent { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControllerSpec::Intelligent { gains, deriv_filter_tau, .. } => {
                if gains.alpha == 0.0 || !gains.alpha.is_finite() {
                    return Err(Error::config("intelligent controller needs a nonzero alpha"));
                }
                if !(*deriv_filter_tau >= 0.0) {
                    return Err(Error::config("derivative filter time constant must be >= 0"));
                }
            }
            ControllerSpec::Classic { gains, .. } => {
                if !(gains.deriv_filter_tau >= 0.0) {
                    return Err(Error::config("derivative filter time constant must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// Reference values at the current sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub ystar: f64,
    pub dystar: f64,
    pub ddystar: f64,
}

/// A controller spec together with its running state.
#[derive(Debug, Clone)]
pub struct Controller {
    spec: ControllerSpec,
    state: ControllerState,
}

impl Controller {
    pub fn new(spec: ControllerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, state: ControllerState::default() })
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    /// Tracking error in the convention this controller expects.
    pub fn error(&self, y: f64, ystar: f64) -> f64 {
        match self.spec {
            ControllerSpec::Intelligent { .. } => y - ystar,
            ControllerSpec::Classic { .. } => ystar - y,
        }
    }

    /// Control for one sample. `int_u` in the state still covers inputs up
    /// to the previous sample; call [`Controller::commit`] with the final
    /// commanded input afterwards.
    pub fn control(&mut self, f: f64, r: RefSample, y: f64, te: f64) -> f64 {
        let e = self.error(y, r.ystar);
        match self.spec {
            ControllerSpec::Intelligent { kind, gains, deriv_filter_tau } => {
                let de = self.state.advance(e, te, deriv_filter_tau);
                let s = &self.state;
                match kind {
                    IntelligentKind::P => ip(f, r.dystar, e, &gains),
                    IntelligentKind::PI => ipi(f, r.dystar, e, s.int_e, &gains),
                    IntelligentKind::PD => ipd(f, r.ddystar, e, de, &gains),
                    IntelligentKind::PID => ipid(f, r.ddystar, e, de, s.int_e, &gains),
                    IntelligentKind::GPI => {
                        igpi(f, r.dystar, e, s.int_e, s.int_int_e, s.int_u, &gains)
                    }
                }
            }
            ControllerSpec::Classic { kind, gains } => match kind {
                ClassicKind::PID => classic_pid(e, &mut self.state, &gains, te),
                ClassicKind::PI2D => classic_pi2d(e, &mut self.state, &gains, te),
            },
        }
    }

    pub fn commit(&mut self, u: f64, te: f64) {
        self.state.accumulate_input(u, te);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ip_examples() {
        let g = IntelligentGains::ip(1.0, 2.0);
        assert_eq!(ip(0.0, 0.0, 0.0, &g), 0.0);
        assert_eq!(ip(1.0, 2.0, 0.5, &g), 0.0);
        let heat = IntelligentGains::ip(10.0, 10.0);
        assert!((ip(0.0, 1.0, 0.0, &heat) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ipi_example() {
        let g = IntelligentGains::ipi(1.0, 16.0, 25.0);
        assert_eq!(ipi(0.0, 0.0, 0.0, 0.0, &g), 0.0);
        assert!((ipi(0.0, 0.0, 0.1, 0.01, &g) + 1.85).abs() < 1e-12);
    }

    #[test]
    fn ipid_example() {
        let g = IntelligentGains::ipid(2.0, 1.375, 1.6875, 2.25);
        assert_eq!(ipid(0.0, 0.0, 0.0, 0.0, 0.0, &g), 0.0);
        assert_eq!(ipid(1.0, 0.0, 0.0, 0.0, 0.0, &g), -0.5);
    }

    #[test]
    fn igpi_example() {
        let g = IntelligentGains::igpi(10.0, -10.0, 3.0, 5.0, 5.0);
        assert_eq!(igpi(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, &g), 0.0);
        assert!((igpi(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, &g) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn classic_pid_step_response() {
        let g = ClassicGains::pid(1.8177, 0.7755, 0.1766, 0.05);
        let te = 0.01;
        let mut s = ControllerState::default();
        let mut u = 0.0;
        for _ in 0..100 {
            u = classic_pid(1.0, &mut s, &g, te);
        }
        assert!((s.int_e - 1.0).abs() < 1e-12);
        assert!((u - 2.5932).abs() < 1e-4, "u = {u}");

        let mut zero = ControllerState::default();
        for _ in 0..50 {
            assert_eq!(classic_pid(0.0, &mut zero, &g, te), 0.0);
        }
    }

    #[test]
    fn pi2d_double_integral() {
        let g = ClassicGains { kii: 3.0, ..Default::default() };
        let te = 0.01;
        let mut s = ControllerState::default();
        let n = 200;
        let mut u = 0.0;
        for _ in 0..n {
            u = classic_pi2d(1.0, &mut s, &g, te);
        }
        let t = n as f64 * te;
        // right Riemann sums: ∫∫1 = te² n(n+1)/2 = t²/2 + t·te/2
        assert!((u - 3.0 * t * t / 2.0).abs() <= 3.0 * t * te, "u = {u}");
    }

    #[test]
    fn hurwitz_examples() {
        let r = validate_error_dynamics(&IntelligentGains::ipi(1.0, 16.0, 25.0), Order::First);
        assert_eq!(r.coefficients, vec![1.0, 16.0, 25.0]);
        assert!(r.hurwitz);
        let zero = IntelligentGains { alpha: 1.0, ..Default::default() };
        assert!(!validate_error_dynamics(&zero, Order::Second).hurwitz);
        assert!(!validate_error_dynamics(&zero, Order::First).hurwitz);
        // (s + p)³ = s³ + 3p s² + 3p² s + p³
        for p in [0.1, 1.5, 7.0] {
            let g = IntelligentGains::ipid(1.0, 3.0 * p * p, p * p * p, 3.0 * p);
            assert!(validate_error_dynamics(&g, Order::Second).hurwitz);
        }
        let gpi = IntelligentGains::igpi(10.0, -10.0, 3.0, 5.0, 5.0);
        assert!(validate_error_dynamics(&gpi, Order::First).hurwitz);
        // s³ + s² + s + 5: 1·1 < 5
        assert!(!is_hurwitz(&[1.0, 1.0, 1.0, 5.0]));
        // (s+1)(s+2)(s+3)(s+4)
        assert!(is_hurwitz(&[1.0, 10.0, 35.0, 50.0, 24.0]));
        // (s−1)(s+2)(s+3)(s+4) has a sign change
        assert!(!is_hurwitz(&[1.0, 8.0, 17.0, 2.0, -24.0]));
        // s⁴ + s³ + 3s² + 3s + 1: b₁ row hits zero
        assert!(!is_hurwitz(&[1.0, 1.0, 3.0, 3.0, 1.0]));
    }

    #[test]
    fn ipid_cancels_f_in_second_order_model() {
        // ÿ = F + αu with the iPID gives ë = ÿ* ... − K_P e − K_I∫e − K_D ė − ÿ*
        let g = IntelligentGains::ipid(2.0, 1.375, 1.6875, 2.25);
        for &(f, ddy, e, de, ie) in &[
            (3.0, 0.5, 0.2, -0.1, 0.05),
            (-7.0, 0.0, -1.0, 2.0, 0.0),
            (1e3, -4.0, 0.001, 0.3, -2.0),
        ] {
            let u = ipid(f, ddy, e, de, ie, &g);
            let yddot = f + g.alpha * u;
            let eddot = yddot - ddy;
            let residual = eddot + g.kd * de + g.kp * e + g.ki * ie;
            assert!(residual.abs() < 1e-9 * (1.0 + f.abs()), "residual {residual}");
        }
    }

    proptest! {
        #[test]
        fn degeneracy_lattice(
            f in -10.0..10.0f64, r in -5.0..5.0f64, e in -2.0..2.0f64,
            de in -3.0..3.0f64, ie in -1.0..1.0f64, iie in -1.0..1.0f64, iu in -1.0..1.0f64,
            kp in 0.0..20.0f64, ki in 0.0..20.0f64, kd in 0.0..5.0f64,
            alpha in 0.1..10.0f64,
        ) {
            let g = IntelligentGains::ipid(alpha, kp, ki, kd);
            let no_i = IntelligentGains { ki: 0.0, ..g };
            prop_assert_eq!(ipid(f, r, e, de, 0.0, &g), ipd(f, r, e, de, &g));
            prop_assert_eq!(ipid(f, r, e, de, ie, &no_i), ipd(f, r, e, de, &no_i));
            prop_assert_eq!(ipi(f, r, e, ie, &no_i), ip(f, r, e, &no_i));
            let plain = IntelligentGains { beta: 0.0, kii: 0.0, ..g };
            prop_assert_eq!(igpi(f, r, e, ie, iie, iu, &plain), ipi(f, r, e, ie, &plain));

            let cg = ClassicGains { kp, ki, kd, kii: 0.0, deriv_filter_tau: 0.05 };
            let mut a = ControllerState::default();
            let mut b = ControllerState::default();
            for x in [e, de, ie, iie] {
                prop_assert_eq!(classic_pi2d(x, &mut a, &cg, 0.01), classic_pid(x, &mut b, &cg, 0.01));
            }
            let p_only = ClassicGains { ki: 0.0, kd: 0.0, ..cg };
            let mut s = ControllerState::default();
            prop_assert_eq!(classic_pid(e, &mut s, &p_only, 0.01), kp * e);
        }
    }

    #[test]
    fn controller_error_conventions() {
        let c = Controller::new(ControllerSpec::intelligent(
            IntelligentKind::P,
            IntelligentGains::ip(1.0, 1.0),
        ))
        .unwrap();
        assert_eq!(c.error(2.0, 0.5), 1.5);
        let p = Controller::new(ControllerSpec::classic_pid(ClassicGains::pid(1.0, 0.0, 0.0, 0.0)))
            .unwrap();
        assert_eq!(p.error(2.0, 0.5), -1.5);
        assert!(Controller::new(ControllerSpec::intelligent(
            IntelligentKind::P,
            IntelligentGains::ip(0.0, 1.0)
        ))
        .is_err());
    }
}
