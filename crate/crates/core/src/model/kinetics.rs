//! Right-hand sides of the six cell models.
//!
//! Every model advances a state vector whose first entry is the
//! dimensionless voltage `u`. Positive `du/dt` always depolarizes: the
//! three-current models (FK, BOCF, BBOCF) negate their summed currents.

use super::{BrugadaTauForm, ModelId, ModelOptions};

/// A cell model with `N` state variables, `u` first.
pub(crate) trait Cell<const N: usize>: Sync {
    fn rest(&self) -> [f64; N];
    fn derivative(&self, s: &[f64; N], i_stim: f64) -> [f64; N];
}

#[inline(always)]
fn sigmoid_step(k: f64, x: f64) -> f64 {
    0.5 * (1.0 + (k * x).tanh())
}

/// Modified FitzHugh-Nagumo, state `[u, v]`.
#[derive(Debug, Clone)]
pub(crate) struct Mfhn {
    alpha: f64,
    beta: f64,
    epsilon: f64,
    mu: f64,
    gamma: f64,
    theta: f64,
    delta: f64,
}

impl Mfhn {
    pub fn new(p: &[f64]) -> Self {
        Self {
            alpha: p[0],
            beta: p[1],
            epsilon: p[2],
            mu: p[3],
            gamma: p[4],
            theta: p[5],
            delta: p[6],
        }
    }
}

impl Cell<2> for Mfhn {
    fn rest(&self) -> [f64; 2] {
        [0.0, 0.0]
    }

    #[inline(always)]
    fn derivative(&self, s: &[f64; 2], i_stim: f64) -> [f64; 2] {
        let [u, v] = *s;
        let i_tot = self.mu * u * (1.0 - u) * (u - self.alpha) - u * v;
        let dv = self.epsilon * ((self.beta - u) * (u - self.gamma) - self.delta * v - self.theta);
        [i_tot + i_stim, dv]
    }
}

/// Mitchell-Schaeffer and its modified variant, state `[u, h]`.
#[derive(Debug, Clone)]
pub(crate) struct MitchellSchaeffer {
    pub(crate) inv_tau_in: f64,
    pub(crate) inv_tau_out: f64,
    pub(crate) inv_tau_close: f64,
    pub(crate) inv_tau_open: f64,
    pub(crate) v_gate: f64,
    pub(crate) modified: bool,
}

impl MitchellSchaeffer {
    pub fn new(p: &[f64], modified: bool) -> Self {
        Self {
            inv_tau_in: p[0].recip(),
            inv_tau_out: p[1].recip(),
            inv_tau_close: p[2].recip(),
            inv_tau_open: p[3].recip(),
            v_gate: p[4],
            modified,
        }
    }
}

impl Cell<2> for MitchellSchaeffer {
    fn rest(&self) -> [f64; 2] {
        [0.0, 1.0]
    }

    #[inline(always)]
    fn derivative(&self, s: &[f64; 2], i_stim: f64) -> [f64; 2] {
        let [u, h] = *s;
        let dh = if u < self.v_gate {
            (1.0 - h) * self.inv_tau_open
        } else {
            -h * self.inv_tau_close
        };
        let (i_in, i_out) = if self.modified {
            (
                h * u * (u - self.v_gate) * (1.0 - u) * self.inv_tau_in,
                -(1.0 - h) * u * self.inv_tau_out,
            )
        } else {
            (
                h * u * u * (1.0 - u) * self.inv_tau_in,
                -u * self.inv_tau_out,
            )
        };
        [i_in + i_out + i_stim, dh]
    }
}

/// Fenton-Karma three-variable model, state `[u, v, w]`.
#[derive(Debug, Clone)]
pub(crate) struct FentonKarma {
    tau_r: f64,
    tau_si: f64,
    tau_w_plus: f64,
    tau_d: f64,
    tau_v_plus: f64,
    tau_v1_minus: f64,
    tau_v2_minus: f64,
    tau_w_minus: f64,
    tau_o: f64,
    k: f64,
    u_c_si: f64,
    u_c: f64,
    u_v: f64,
}

impl FentonKarma {
    pub fn new(p: &[f64]) -> Self {
        Self {
            tau_r: p[0],
            tau_si: p[1],
            tau_w_plus: p[2],
            tau_d: p[3],
            tau_v_plus: p[4],
            tau_v1_minus: p[5],
            tau_v2_minus: p[6],
            tau_w_minus: p[7],
            tau_o: p[8],
            k: p[9],
            u_c_si: p[10],
            u_c: p[11],
            u_v: p[12],
        }
    }

    /// The three currents `(I_fi, I_so, I_si)` before the sum is negated.
    pub fn currents(&self, s: &[f64; 3]) -> (f64, f64, f64) {
        let [u, v, w] = *s;
        let i_si = -w / (2.0 * self.tau_si) * (1.0 + (self.k * (u - self.u_c_si)).tanh());
        if u < self.u_c {
            (0.0, u / self.tau_o, i_si)
        } else {
            (
                -v / self.tau_d * (1.0 - u) * (u - self.u_c),
                1.0 / self.tau_r,
                i_si,
            )
        }
    }
}

impl Cell<3> for FentonKarma {
    fn rest(&self) -> [f64; 3] {
        [0.0, 1.0, 1.0]
    }

    #[inline(always)]
    fn derivative(&self, s: &[f64; 3], i_stim: f64) -> [f64; 3] {
        let [u, v, w] = *s;
        let (i_fi, i_so, i_si) = self.currents(s);
        let (dv, dw) = if u < self.u_c {
            let tau_v_minus = if u < self.u_v {
                self.tau_v2_minus
            } else {
                self.tau_v1_minus
            };
            ((1.0 - v) / tau_v_minus, (1.0 - w) / self.tau_w_minus)
        } else {
            (-v / self.tau_v_plus, -w / self.tau_w_plus)
        };
        [-(i_fi + i_so + i_si) + i_stim, dv, dw]
    }
}

/// A time constant that is either fixed or a sigmoid of a gate value:
/// `tau1 + (tau2 ± tau1) * (1 + tanh(k (x - x_c))) / 2`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum GateTau {
    Constant(f64),
    Sigmoid {
        tau1: f64,
        span: f64,
        k: f64,
        center: f64,
    },
}

impl GateTau {
    fn sigmoid(tau1: f64, tau2: f64, k: f64, center: f64, form: BrugadaTauForm) -> Self {
        let span = match form {
            BrugadaTauForm::Sum => tau2 + tau1,
            BrugadaTauForm::Difference => tau2 - tau1,
        };
        GateTau::Sigmoid {
            tau1,
            span,
            k,
            center,
        }
    }

    #[inline(always)]
    fn at(&self, x: f64) -> f64 {
        match *self {
            GateTau::Constant(tau) => tau,
            GateTau::Sigmoid {
                tau1,
                span,
                k,
                center,
            } => tau1 + span * sigmoid_step(k, x - center),
        }
    }
}

/// Bueno-Orovio-Cherry-Fenton four-variable model and its Brugada variant,
/// state `[u, v, w, s]`.
///
/// The plain model shares thresholds between several Heaviside switches;
/// the Brugada variant gives each switch its own threshold and makes
/// `tau_w_plus` and `tau_si` sigmoid functions of `w` and `s`.
#[derive(Debug, Clone)]
pub(crate) struct BuenoOrovio {
    theta_v: f64,
    theta_w: f64,
    theta_v_minus: f64,
    theta_o: f64,
    theta_v_inf: f64,
    theta_w_inf: f64,
    theta_so: f64,
    theta_si: f64,
    theta_s: f64,
    tau_v1_minus: f64,
    tau_v2_minus: f64,
    tau_v_plus: f64,
    tau_w1_minus: f64,
    tau_w2_minus: f64,
    k_w_minus: f64,
    u_w_minus: f64,
    tau_w_plus: GateTau,
    tau_fi: f64,
    tau_o1: f64,
    tau_o2: f64,
    tau_so1: f64,
    tau_so2: f64,
    k_so: f64,
    u_so: f64,
    tau_s1: f64,
    tau_s2: f64,
    k_s: f64,
    u_s: f64,
    tau_si: GateTau,
    tau_w_inf: f64,
    w_inf_star: f64,
    u_o: f64,
    u_u: f64,
}

impl BuenoOrovio {
    pub fn bocf(p: &[f64]) -> Self {
        let theta_w = p[20];
        let theta_v_minus = p[21];
        let theta_o = p[22];
        Self {
            theta_v: p[0],
            tau_v1_minus: p[1],
            tau_v2_minus: p[2],
            tau_v_plus: p[3],
            u_w_minus: p[4],
            tau_so1: p[5],
            k_so: p[6],
            tau_s1: p[7],
            tau_s2: p[8],
            k_s: p[9],
            tau_w1_minus: p[10],
            tau_w2_minus: p[11],
            tau_w_plus: GateTau::Constant(p[12]),
            tau_fi: p[13],
            tau_o1: p[14],
            tau_o2: p[15],
            tau_so2: p[16],
            u_so: p[17],
            u_s: p[18],
            tau_si: GateTau::Constant(p[19]),
            theta_w,
            theta_v_minus,
            theta_o,
            k_w_minus: p[23],
            tau_w_inf: p[24],
            w_inf_star: p[25],
            u_u: p[26],
            u_o: 0.0,
            theta_v_inf: theta_v_minus,
            theta_w_inf: theta_o,
            theta_so: theta_w,
            theta_si: theta_w,
            theta_s: theta_w,
        }
    }

    pub fn bbocf(p: &[f64], form: BrugadaTauForm) -> Self {
        Self {
            tau_v_plus: p[0],
            tau_v1_minus: p[1],
            tau_v2_minus: p[2],
            tau_w_plus: GateTau::sigmoid(p[3], p[4], p[26], p[37], form),
            tau_w1_minus: p[5],
            tau_w2_minus: p[6],
            tau_s1: p[7],
            tau_s2: p[8],
            tau_fi: p[9],
            tau_o1: p[10],
            tau_o2: p[11],
            tau_so1: p[12],
            tau_so2: p[13],
            tau_si: GateTau::sigmoid(p[14], p[15], p[30], p[36], form),
            tau_w_inf: p[16],
            theta_v: p[17],
            theta_v_minus: p[18],
            theta_v_inf: p[19],
            theta_w: p[20],
            theta_w_inf: p[21],
            theta_so: p[22],
            theta_si: p[23],
            theta_o: p[24],
            theta_s: p[25],
            k_w_minus: p[27],
            k_s: p[28],
            k_so: p[29],
            u_w_minus: p[31],
            u_s: p[32],
            u_o: p[33],
            u_u: p[34],
            u_so: p[35],
            w_inf_star: p[38],
        }
    }

    /// The three currents `(I_fi, I_so, I_si)` before the sum is negated.
    pub fn currents(&self, s: &[f64; 4]) -> (f64, f64, f64) {
        let [u, v, w, gate_s] = *s;
        let i_fi = if u < self.theta_v {
            0.0
        } else {
            -v * (u - self.theta_v) * (self.u_u - u) / self.tau_fi
        };
        let i_so = if u < self.theta_so {
            let tau_o = if u < self.theta_o {
                self.tau_o1
            } else {
                self.tau_o2
            };
            (u - self.u_o) / tau_o
        } else {
            let tau_so = self.tau_so1
                + (self.tau_so2 - self.tau_so1) * sigmoid_step(self.k_so, u - self.u_so);
            1.0 / tau_so
        };
        let i_si = if u < self.theta_si {
            0.0
        } else {
            -w * gate_s / self.tau_si.at(gate_s)
        };
        (i_fi, i_so, i_si)
    }
}

impl Cell<4> for BuenoOrovio {
    fn rest(&self) -> [f64; 4] {
        [0.0, 1.0, 1.0, 0.0]
    }

    #[inline(always)]
    fn derivative(&self, st: &[f64; 4], i_stim: f64) -> [f64; 4] {
        let [u, v, w, s] = *st;
        let (i_fi, i_so, i_si) = self.currents(st);

        let dv = if u < self.theta_v {
            let v_inf = if u < self.theta_v_inf { 1.0 } else { 0.0 };
            let tau_v_minus = if u < self.theta_v_minus {
                self.tau_v1_minus
            } else {
                self.tau_v2_minus
            };
            (v_inf - v) / tau_v_minus
        } else {
            -v / self.tau_v_plus
        };

        let dw = if u < self.theta_w {
            let w_inf = if u < self.theta_w_inf {
                1.0 - u / self.tau_w_inf
            } else {
                self.w_inf_star
            };
            let tau_w_minus = self.tau_w1_minus
                + (self.tau_w2_minus - self.tau_w1_minus)
                    * sigmoid_step(self.k_w_minus, u - self.u_w_minus);
            (w_inf - w) / tau_w_minus
        } else {
            -w / self.tau_w_plus.at(w)
        };

        let tau_s = if u < self.theta_s {
            self.tau_s1
        } else {
            self.tau_s2
        };
        let ds = (sigmoid_step(self.k_s, u - self.u_s) - s) / tau_s;

        [-(i_fi + i_so + i_si) + i_stim, dv, dw, ds]
    }
}

/// A parameterized cell, ready to integrate.
#[derive(Debug, Clone)]
pub(crate) enum Kinetics {
    Mfhn(Mfhn),
    Ms(MitchellSchaeffer),
    Fk(FentonKarma),
    Bocf(BuenoOrovio),
}

impl Kinetics {
    pub fn new(id: ModelId, values: &[f64], options: &ModelOptions) -> Self {
        match id {
            ModelId::Mfhn => Kinetics::Mfhn(Mfhn::new(values)),
            ModelId::Ms => Kinetics::Ms(MitchellSchaeffer::new(values, false)),
            ModelId::Mms => Kinetics::Ms(MitchellSchaeffer::new(values, true)),
            ModelId::Fk => Kinetics::Fk(FentonKarma::new(values)),
            ModelId::Bocf => Kinetics::Bocf(BuenoOrovio::bocf(values)),
            ModelId::Bbocf => Kinetics::Bocf(BuenoOrovio::bbocf(values, options.brugada_tau_form)),
        }
    }

    pub fn rest(&self) -> Vec<f64> {
        match self {
            Kinetics::Mfhn(c) => c.rest().to_vec(),
            Kinetics::Ms(c) => c.rest().to_vec(),
            Kinetics::Fk(c) => c.rest().to_vec(),
            Kinetics::Bocf(c) => c.rest().to_vec(),
        }
    }

    /// Derivative of a dynamically sized state; `state.len()` must match the model.
    pub fn derivative(&self, state: &[f64], i_stim: f64) -> Vec<f64> {
        fn eval<const N: usize, C: Cell<N>>(c: &C, state: &[f64], i: f64) -> Vec<f64> {
            let s: [f64; N] = state.try_into().expect("state length matches model");
            c.derivative(&s, i).to_vec()
        }
        match self {
            Kinetics::Mfhn(c) => eval(c, state, i_stim),
            Kinetics::Ms(c) => eval(c, state, i_stim),
            Kinetics::Fk(c) => eval(c, state, i_stim),
            Kinetics::Bocf(c) => eval(c, state, i_stim),
        }
    }
}
