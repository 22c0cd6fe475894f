//! One-off two-period gate synthesis.

use serde::Serialize;

use super::config::{GateConfig, GatePlatform, Numerics};
use super::export::{Format, Provenance};
use super::{Check, OutputFile, RunOutput, VerificationReport};
use crate::error::{Error, Result};
use crate::fields::{josephson_schedule, nmr_conditional_schedule, FieldSchedule, JosephsonParams, NmrParams};
use crate::gates::{synthesize_double_loop, GateReport, ReversalRule};
use crate::phases::{cyclic_pair_josephson, cyclic_pair_nmr, CyclicPair};

pub fn platform_schedule(platform: &GatePlatform) -> Result<(FieldSchedule, CyclicPair)> {
    match *platform {
        GatePlatform::Nmr {
            omega0,
            omega1,
            omega,
            coupling,
            delta,
        } => {
            let p = NmrParams {
                omega0,
                omega1,
                omega,
                coupling,
                delta,
            };
            Ok((nmr_conditional_schedule(&p)?, cyclic_pair_nmr(&p)?))
        }
        GatePlatform::Josephson {
            e1,
            e2,
            ech,
            chi0,
            omega,
        } => {
            let p = JosephsonParams {
                e1,
                e2,
                ech,
                ei: 0.0,
                chi0,
                omega,
                nxc: 0.0,
                delta: 0,
            };
            Ok((josephson_schedule(&p)?, cyclic_pair_josephson(&p)?))
        }
    }
}

pub fn gate_checks(rule: ReversalRule, r: &GateReport) -> VerificationReport {
    let dyn_sum = r.protocol.iter().map(|p| p.dynamical_sum.abs()).fold(0.0, f64::max);
    let defect = r.protocol.iter().map(|p| p.cyclicity_defect).fold(0.0, f64::max);
    let mut checks = vec![Check::bool(
        "pair stays cyclic over both periods",
        r.cyclic,
        defect,
        0.0,
    )];
    if rule == ReversalRule::Literal {
        checks.push(Check::at_most(
            "dynamical phases of the two periods cancel",
            dyn_sum,
            1e-6,
        ));
    } else {
        checks.push(Check::info("dynamical phase sum over both periods", dyn_sum, 0.0));
    }
    checks.push(Check::info("fidelity to doubled-phase target", r.target_fidelity, 1.0));
    checks.push(Check::info("fidelity to identity", r.identity_fidelity, 1.0));
    checks.push(Check::info(
        "second period vs inverse of the first",
        r.inverse_defect,
        0.0,
    ));
    VerificationReport::new("gate", checks)
}

#[derive(Serialize)]
struct GateDocument<'a> {
    provenance: &'a Provenance,
    report: &'a GateReport,
    checks: &'a VerificationReport,
}

#[derive(Serialize)]
struct GateCsvRow<'a> {
    quantity: &'a str,
    value: f64,
}

pub fn run_gate(cfg: &GateConfig, numerics: &Numerics, format: Format) -> Result<RunOutput> {
    let (s, pair) = platform_schedule(&cfg.platform)?;
    let report = synthesize_double_loop(&s, &pair, &numerics.phase_config(), cfg.rule)?;
    let checks = gate_checks(cfg.rule, &report);
    let prov = Provenance::new("gate", &serde_json::json!({ "gate": cfg, "numerics": numerics }))?;
    let contents = match format {
        Format::Json => serde_json::to_string_pretty(&GateDocument {
            provenance: &prov,
            report: &report,
            checks: &checks,
        })
        .map_err(|e| Error::Export(e.to_string()))?,
        Format::Csv => {
            let mut rows = vec![
                GateCsvRow {
                    quantity: "chi",
                    value: report.spec.chi,
                },
                GateCsvRow {
                    quantity: "gamma_target",
                    value: report.spec.gamma,
                },
                GateCsvRow {
                    quantity: "gamma_one_loop_plus",
                    value: report.one_loop[0].geometric,
                },
                GateCsvRow {
                    quantity: "gamma_one_loop_minus",
                    value: report.one_loop[1].geometric,
                },
                GateCsvRow {
                    quantity: "dynamical_sum_plus",
                    value: report.protocol[0].dynamical_sum,
                },
                GateCsvRow {
                    quantity: "dynamical_sum_minus",
                    value: report.protocol[1].dynamical_sum,
                },
                GateCsvRow {
                    quantity: "geometric_two_period_plus",
                    value: report.protocol[0].geometric,
                },
                GateCsvRow {
                    quantity: "geometric_two_period_minus",
                    value: report.protocol[1].geometric,
                },
                GateCsvRow {
                    quantity: "target_fidelity",
                    value: report.target_fidelity,
                },
                GateCsvRow {
                    quantity: "identity_fidelity",
                    value: report.identity_fidelity,
                },
                GateCsvRow {
                    quantity: "inverse_defect",
                    value: report.inverse_defect,
                },
            ];
            let names = ["u00", "u01", "u10", "u11"];
            let mut owned = Vec::new();
            for (k, name) in names.iter().enumerate() {
                let [re, im] = report.matrix.0[k / 2][k % 2];
                owned.push((format!("{name}_re"), re));
                owned.push((format!("{name}_im"), im));
            }
            rows.extend(owned.iter().map(|(q, v)| GateCsvRow { quantity: q, value: *v }));
            super::export::render_csv(&prov, &rows)?
        }
    };
    Ok(RunOutput {
        files: vec![OutputFile::new(format!("gate.{}", format.extension()), contents)],
        report: Some(checks),
    })
}
