//! Static parameter catalogs for the six supported cell models.
//!
//! Each row carries the ASCII name used in exports and on the command line,
//! the display symbol used by the browser front end, and the default box
//! constraint. Rows with `min == max` are held fixed by default.

/// One row of a model's parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub symbol: &'static str,
    pub min: f64,
    pub max: f64,
}

const fn row(name: &'static str, symbol: &'static str, min: f64, max: f64) -> ParamInfo {
    ParamInfo {
        name,
        symbol,
        min,
        max,
    }
}

pub(crate) const MFHN: &[ParamInfo] = &[
    row("alpha", "α", 0.05, 0.6),
    row("beta", "β", 0.2, 2.0),
    row("epsilon", "ε", 0.001, 1.0),
    row("mu", "μ", 0.2, 2.0),
    row("gamma", "γ", 0.01, 1.0),
    row("theta", "θ", -0.1, 0.1),
    row("delta", "δ", 0.5, 1.5),
];

pub(crate) const MS: &[ParamInfo] = &[
    row("tau_in", "τ_in", 0.15, 0.6),
    row("tau_out", "τ_out", 3.0, 12.0),
    row("tau_close", "τ_close", 75.0, 300.0),
    row("tau_open", "τ_open", 60.0, 240.0),
    row("v_gate", "v_gate", 0.065, 0.26),
];

pub(crate) const MMS: &[ParamInfo] = &[
    row("tau_in", "τ_in", 0.05, 0.6),
    row("tau_out", "τ_out", 0.5, 12.0),
    row("tau_close", "τ_close", 60.0, 300.0),
    row("tau_open", "τ_open", 60.0, 240.0),
    row("v_gate", "v_gate", 0.065, 0.26),
];

pub(crate) const FK: &[ParamInfo] = &[
    row("tau_r", "τ_r", 25.0, 200.0),
    row("tau_si", "τ_si", 10.0, 300.0),
    row("tau_w_plus", "τ_w⁺", 50.0, 900.0),
    row("tau_d", "τ_d", 0.15, 0.4),
    row("tau_v_plus", "τ_v⁺", 1.0, 20.0),
    row("tau_v1_minus", "τ_v1⁻", 10.0, 50.0),
    row("tau_v2_minus", "τ_v2⁻", 500.0, 1500.0),
    row("tau_w_minus", "τ_w⁻", 5.0, 100.0),
    row("tau_o", "τ_o", 5.0, 50.0),
    row("k", "k", 1.0, 15.0),
    row("u_c_si", "u_c^si", 0.2, 0.9),
    row("u_c", "u_c", 0.05, 0.3),
    row("u_v", "u_v", 0.005, 0.06),
];

pub(crate) const BOCF: &[ParamInfo] = &[
    row("theta_v", "θ_v", 0.1, 0.35),
    row("tau_v1_minus", "τ_v1⁻", 0.5, 300.0),
    row("tau_v2_minus", "τ_v2⁻", 1.0, 1500.0),
    row("tau_v_plus", "τ_v⁺", 1.0, 15.0),
    row("u_w_minus", "u_w⁻", 0.01, 0.04),
    row("tau_so1", "τ_so1", 15.0, 100.0),
    row("k_so", "k_so", 1.8, 2.2),
    row("tau_s1", "τ_s1", 2.0, 3.0),
    row("tau_s2", "τ_s2", 1.0, 20.0),
    row("k_s", "k_s", 1.5, 3.0),
    row("tau_w1_minus", "τ_w1⁻", 5.0, 150.0),
    row("tau_w2_minus", "τ_w2⁻", 5.0, 150.0),
    row("tau_w1_plus", "τ_w1⁺", 100.0, 1000.0),
    row("tau_fi", "τ_fi", 0.05, 0.5),
    row("tau_o1", "τ_o1", 5.0, 500.0),
    row("tau_o2", "τ_o2", 5.0, 10.0),
    row("tau_so2", "τ_so2", 0.1, 1.5),
    row("u_so", "u_so", 0.6, 0.7),
    row("u_s", "u_s", 0.8, 1.0),
    row("tau_si1", "τ_si1", 1.0, 4.0),
    row("theta_w", "θ_w", 0.1, 0.15),
    row("theta_v_minus", "θ_v⁻", 0.005, 0.25),
    row("theta_o", "θ_o", 0.004, 0.008),
    row("k_w_minus", "k_w⁻", 50.0, 250.0),
    row("tau_w_inf", "τ_w∞", 0.01, 0.2),
    row("w_inf_star", "w_∞*", 0.4, 1.0),
    row("u_u", "u_u", 1.45, 1.61),
];

pub(crate) const BBOCF: &[ParamInfo] = &[
    row("tau_v1_plus", "τ_v1⁺", 5.0, 10.0),
    row("tau_v1_minus", "τ_v1⁻", 60.0, 60.0),
    row("tau_v2_minus", "τ_v2⁻", 50.0, 50.0),
    row("tau_w1_plus", "τ_w1⁺", 40.0, 80.0),
    row("tau_w2_plus", "τ_w2⁺", 150.0, 300.0),
    row("tau_w1_minus", "τ_w1⁻", 10.0, 500.0),
    row("tau_w2_minus", "τ_w2⁻", 20.0, 40.0),
    row("tau_s1", "τ_s1", 5.0, 15.0),
    row("tau_s2", "τ_s2", 50.0, 90.0),
    row("tau_fi", "τ_fi", 0.05, 0.1),
    row("tau_o1", "τ_o1", 400.0, 500.0),
    row("tau_o2", "τ_o2", 20.0, 35.0),
    row("tau_so1", "τ_so1", 150.0, 200.0),
    row("tau_so2", "τ_so2", 1.0, 3.0),
    row("tau_si1", "τ_si1", 10.0, 20.0),
    row("tau_si2", "τ_si2", 2.0, 10.0),
    row("tau_w_inf", "τ_w∞", 0.12, 0.12),
    row("theta_v", "θ_v", 0.13, 0.13),
    row("theta_v_minus", "θ_v⁻", 0.006, 0.006),
    row("theta_v_inf", "θ_v∞", 2.0, 2.0),
    row("theta_w", "θ_w", 0.13, 0.13),
    row("theta_w_inf", "θ_w∞", 0.12, 0.12),
    row("theta_so", "θ_so", 0.2, 0.2),
    row("theta_si", "θ_si", 0.13, 0.13),
    row("theta_o", "θ_o", 0.006, 0.006),
    row("theta_s", "θ_s", 0.36, 0.36),
    row("k_w_plus", "k_w⁺", 5.0, 10.0),
    row("k_w_minus", "k_w⁻", 100.0, 150.0),
    row("k_s", "k_s", 5.0, 25.0),
    row("k_so", "k_so", 1.5, 4.0),
    row("k_si", "k_si", 10.0, 70.0),
    row("u_w_minus", "u_w⁻", 0.02, 0.12),
    row("u_s", "u_s", 0.25, 0.4),
    row("u_o", "u_o", 0.0, 0.0),
    row("u_u", "u_u", 1.0, 1.0),
    row("u_so", "u_so", 0.3, 0.75),
    row("s_c", "s_c", 0.6, 0.9),
    row("w_c_plus", "w_c⁺", 0.2, 0.3),
    row("w_inf_star", "w_∞*", 0.94, 0.94),
];
