//! Plain-text reports for the command-line tool.

use crate::cavity::{self, CavityError, CavityParams, SpinRelaxationParams};
use crate::dipole::{self, DipoleError, IonPairConfig};
use crate::exec::Execution;
use crate::gates::{self, GateError, GateKind, GateParams, Method};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityRow {
    pub kind: GateKind,
    pub gate_time: f64,
    pub gamma_eff: f64,
    pub closed_form: f64,
    pub out_of_range: bool,
    pub exact: Option<f64>,
}

/// Closed-form (and optionally exact) fidelities for every gate.
pub fn fidelity_rows(
    params: &GateParams,
    exact: bool,
    exec: Execution,
) -> Result<Vec<FidelityRow>, GateError> {
    exec.map_slice(&GateKind::ALL, |&kind| {
        let c = gates::closed_form_fidelity(kind, params)?;
        let exact = if exact {
            Some(gates::simulated_fidelity(kind, params, Method::Exact)?)
        } else {
            None
        };
        Ok(FidelityRow {
            kind,
            gate_time: c.gate_time,
            gamma_eff: c.gamma_eff,
            closed_form: c.fidelity,
            out_of_range: c.out_of_range,
            exact,
        })
    })
    .into_iter()
    .collect()
}

pub fn fidelity_report(params: &GateParams, exact: bool, exec: Execution) -> Result<String, GateError> {
    let rows = fidelity_rows(params, exact, exec)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Δν = 2π×{:.4} kHz, Ω = 2π×{:.4} kHz, ε = {:.6} rad, ξ = {}",
        params.delta_nu / (2e3 * std::f64::consts::PI),
        params.omega / (2e3 * std::f64::consts::PI),
        params.epsilon,
        params.xi
    );
    let mut header = format!("{:<8} {:>10} {:>14} {:>10}", "gate", "T [µs]", "Γ [rad/s]", "F closed");
    if exact {
        let _ = write!(header, " {:>10} {:>10}", "F exact", "Δ");
    }
    let _ = writeln!(out, "{header}");
    for r in &rows {
        let mut line = format!(
            "{:<8} {:>10.2} {:>14.3} {:>10.4}",
            r.kind.name(),
            r.gate_time * 1e6,
            r.gamma_eff,
            r.closed_form
        );
        if let Some(e) = r.exact {
            let _ = write!(line, " {:>10.4} {:>10.1e}", e, e - r.closed_form);
        }
        if r.out_of_range {
            line.push_str("  (first-order expression outside [0, 1], clamped)");
        }
        let _ = writeln!(out, "{line}");
    }
    Ok(out)
}

pub fn dipole_report(pair: &IonPairConfig) -> Result<String, DipoleError> {
    let stark = dipole::stark_shift(pair)?;
    let magnetic = dipole::magnetic_shift(pair)?;
    let mut out = String::new();
    let _ = writeln!(out, "separation            {:.4} nm", pair.separation_r * 1e9);
    let _ = writeln!(out, "orientation factor    {:.6}", pair.orientation_factor());
    let _ = writeln!(out, "electric shift Δν     {:.6e} Hz", stark);
    let _ = writeln!(out, "magnetic shift        {:.6e} Hz", magnetic);
    if magnetic != 0.0 {
        let _ = writeln!(out, "electric / magnetic   {:.4}", stark / magnetic);
    }
    if stark != 0.0 {
        let drive = dipole::conditional_drive(stark.abs())?;
        let _ = writeln!(out, "Rabi frequency Ω      2π×{:.6e} Hz", drive.omega_hz);
        let _ = writeln!(out, "T_CNOT                {:.4} µs", drive.t_cnot * 1e6);
        let _ = writeln!(out, "T_ST                  {:.4} µs", drive.t_st * 1e6);
    }
    Ok(out)
}

pub fn cavity_report(
    cav: &CavityParams,
    relax: &SpinRelaxationParams,
) -> Result<String, CavityError> {
    let qe = cavity::quantum_efficiency(cav)?;
    let mut out = String::new();
    match cav.effective_purcell() {
        Some(p) => {
            let _ = writeln!(out, "Purcell factor P        {p}");
        }
        None => {
            let _ = writeln!(out, "Purcell factor P        none (free space)");
        }
    }
    let _ = writeln!(out, "radiative efficiency η  {:.4}", qe.eta);
    let _ = writeln!(out, "cavity emission p       {:.4}", qe.p);
    let _ = writeln!(out, "T₁ / T₂                 {:.4} ms / {:.4} ms", cav.t1() * 1e3, cav.t2_opt * 1e3);
    if cav.effective_purcell().is_some() {
        let i1 = cavity::indistinguishability(cav)?;
        let profile = cavity::photon_profile(cav)?;
        let _ = writeln!(out, "indistinguishability I₁ {:.4}", i1);
        let _ = writeln!(out, "photon bandwidth        {:.4} Hz", profile.bandwidth_hz);
        let _ = writeln!(out, "photon duration         {:.4} µs", profile.duration_s * 1e6);
    }
    let r = cavity::spin_relaxation_rate(relax)?;
    let _ = writeln!(
        out,
        "spin relaxation R       {:.4} 1/s (T₁,spin = {:.4} ms at {} T, {} K)",
        r,
        1e3 / r,
        relax.field_b,
        relax.temperature
    );
    Ok(out)
}
