use std::path::Path;

use gcss::autocorr::{compare_states, StateKind, TraceSet};
use gcss::io::{
    write_file, write_histogram_csv, write_json, write_labeled_density_csv, write_labeled_traces_csv,
    write_labeled_wigner_csv, write_shots_csv, write_wigner_csv,
};
use gcss::qspec::run_qspec;
use gcss::shg::{
    build_hamiltonian, energy_scale, evolve, initial_state, second_harmonic_state, tune_interaction_time, InputKind,
};
use gcss::states::gcss_point_normalized;
use gcss::wigner::{wigner_analytic, wigner_extrema, wigner_fock, PhaseGrid, WignerField};
use gcss::{Error, Result};
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;

fn log(msg: impl AsRef<str>) {
    eprintln!("[gcss] {}", msg.as_ref());
}

fn metrics_json(sets: &[TraceSet]) -> Value {
    let mut m = Map::new();
    for s in sets {
        m.insert(s.kind.name().into(), serde_json::to_value(s.metrics).expect("metrics serialize"));
    }
    Value::Object(m)
}

pub fn trace(cfg: &ExperimentConfig) -> Result<Value> {
    let p = cfg.state.gcss();
    log(format!("trace: |alpha| = {}, |delta_alpha| = {}", cfg.state.alpha, cfg.state.delta_alpha));
    let sets = compare_states(&p, &StateKind::ALL, &cfg.trace.settings(), &cfg.trace.processing(), &cfg.trace.windows())?;
    let raw: Vec<(&str, _)> = sets.iter().map(|s| (s.kind.name(), &s.raw)).collect();
    let iac: Vec<(&str, _)> = sets.iter().map(|s| (s.kind.name(), &s.iac)).collect();
    write_file(&cfg.out.join("trace_raw.csv"), |w| write_labeled_traces_csv(w, "state", &raw))?;
    write_file(&cfg.out.join("trace_iac.csv"), |w| write_labeled_traces_csv(w, "state", &iac))?;

    // GCSS at τ = 0, t = 0 on a grid centered at α
    let grid = PhaseGrid::around_amplitude(p.alpha, cfg.wigner.half_width, cfg.wigner.points)?;
    let field = wigner_analytic(&gcss_point_normalized(&p, 0.0)?, &grid)?;
    let ext = wigner_extrema(&field);
    write_file(&cfg.out.join("wigner_gcss.csv"), |w| write_wigner_csv(w, &field))?;

    let metrics = json!({
        "experiment": cfg.experiment,
        "alpha": cfg.state.alpha,
        "delta_alpha": cfg.state.delta_alpha,
        "model": cfg.trace.model,
        "weighting": cfg.trace.weighting,
        "states": metrics_json(&sets),
        "wigner_gcss": ext,
    });
    write_json(&cfg.out.join("metrics.json"), &metrics)?;
    let brief: Map<String, Value> = sets
        .iter()
        .map(|s| (s.kind.name().to_string(), json!({ "s_zero": s.metrics.s_zero, "m": s.metrics.m_depth })))
        .collect();
    Ok(json!({ "out": cfg.out, "metrics": brief, "wigner_gcss_min": ext.min }))
}

struct SweepRow {
    alpha: f64,
    delta_alpha: f64,
    state: &'static str,
    s_zero: f64,
    m: f64,
    deviates: bool,
    note: &'static str,
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Value> {
    let mut rows = Vec::new();
    let settings = cfg.trace.settings();
    let thr = cfg.sweep.threshold;
    for &alpha in &cfg.sweep.alphas {
        for &d in &cfg.sweep.delta_alphas {
            if d == 0.0 {
                log(format!("sweep: |alpha| = {alpha}, |delta_alpha| = 0 is the coherent limit, no conditioned state"));
                for state in ["gcss", "mixture"] {
                    rows.push(SweepRow { alpha, delta_alpha: 0.0, state, s_zero: 1.0, m: 0.0, deviates: false, note: "coherent_limit" });
                }
                continue;
            }
            log(format!("sweep: |alpha| = {alpha}, |delta_alpha| = {d}"));
            let p = cfg.state.params(alpha, d);
            let sets = compare_states(
                &p,
                &[StateKind::Gcss, StateKind::Mixture],
                &settings,
                &cfg.trace.processing(),
                &cfg.trace.windows(),
            )?;
            for s in &sets {
                let m = s.metrics;
                rows.push(SweepRow {
                    alpha,
                    delta_alpha: d,
                    state: s.kind.name(),
                    s_zero: m.s_zero,
                    m: m.m_depth,
                    deviates: (1.0 - m.s_zero).abs() > thr || m.m_depth > thr,
                    note: "",
                });
            }
        }
    }
    write_file(&cfg.out.join("sweep.csv"), |w| {
        writeln!(w, "alpha,delta_alpha,state,s_zero,m,deviates,note").map_err(|e| Error::Io(e.to_string()))?;
        for r in &rows {
            writeln!(w, "{},{},{},{},{},{},{}", r.alpha, r.delta_alpha, r.state, r.s_zero, r.m, r.deviates, r.note)
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        Ok(())
    })?;
    // largest |δα| at which the GCSS still deviates from the coherent reference
    let mut onset = Map::new();
    for &alpha in &cfg.sweep.alphas {
        let edge = rows
            .iter()
            .filter(|r| r.alpha == alpha && r.state == "gcss" && r.deviates)
            .map(|r| r.delta_alpha)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
        onset.insert(alpha.to_string(), json!(edge));
    }
    Ok(json!({ "out": cfg.out, "rows": rows.len(), "max_deviating_delta_alpha": onset }))
}

pub fn shg(cfg: &ExperimentConfig) -> Result<Value> {
    let s = &cfg.shg;
    let p = cfg.state.params(s.alpha, s.delta_alpha);
    let base = s.system(s.t_final.unwrap_or(0.0));
    let h = build_hamiltonian(&base)?;
    let (t_final, tuned) = match s.t_final {
        Some(t) => (t, false),
        None => {
            log(format!("shg: tuning interaction time to <n_2w> = {} on the coherent input", s.target_n2w));
            let psi = initial_state(InputKind::Coherent, &p, &base)?;
            (tune_interaction_time(&h, &psi, &base, s.target_n2w, s.tol)?, true)
        }
    };
    let sys = s.system(t_final);
    let grid = PhaseGrid::centered((0.0, 0.0), s.wigner_half_width, s.wigner_points)?;
    let mut inputs = Vec::new();
    let mut rhos = Vec::new();
    let mut fields: Vec<WignerField> = Vec::new();
    for (kind, name) in [(InputKind::Coherent, "coherent"), (InputKind::Gcss, "gcss")] {
        log(format!("shg: evolving {name} input to chi t = {}", s.chi * t_final));
        let psi0 = initial_state(kind, &p, &sys)?;
        let traj = evolve(&h, &psi0, &sys, s.snapshots, s.tol)?;
        let rho = second_harmonic_state(&traj)?;
        let field = wigner_fock(&rho, &grid)?;
        let ext = wigner_extrema(&field);
        inputs.push(json!({
            "input": name,
            "min_w_2w": ext.min,
            "wigner_2w": ext,
            "n_2w_final": traj.n_2w.last(),
            "conserved_drift": traj.conserved_drift(),
            "energy_drift": traj.energy_drift(energy_scale(&h, &psi0)?),
            "norm_drift": traj.norm_drift(),
            "trajectory": traj,
        }));
        rhos.push((name, rho));
        fields.push(field);
    }
    let out = json!({ "chi": s.chi, "t_final": t_final, "tuned": tuned, "system": sys, "inputs": inputs });
    write_json(&cfg.out.join("trajectory.json"), &out)?;
    let rho_refs: Vec<(&str, _)> = rhos.iter().map(|(n, r)| (*n, r)).collect();
    write_file(&cfg.out.join("rho_2w.csv"), |w| write_labeled_density_csv(w, "input", &rho_refs))?;
    let field_refs: Vec<(&str, _)> = rhos.iter().map(|(n, _)| *n).zip(fields.iter()).collect();
    write_file(&cfg.out.join("wigner_2w.csv"), |w| write_labeled_wigner_csv(w, "input", &field_refs))?;
    let mins: Map<String, Value> =
        out["inputs"].as_array().unwrap().iter().map(|i| (i["input"].as_str().unwrap().to_string(), i["min_w_2w"].clone())).collect();
    Ok(json!({ "out": cfg.out, "t_final": t_final, "min_w_2w": mins }))
}

fn truthless(mut report: Value) -> Value {
    if let Some(m) = report.as_object_mut() {
        for k in ["event_fraction_all", "event_fraction_selected", "enrichment"] {
            m.remove(k);
        }
    }
    report
}

pub fn qspec(cfg: &ExperimentConfig, with_truth: bool) -> Result<Value> {
    log(format!("qspec: {} shots, seed {}", cfg.qspec.n_shots, cfg.seed));
    let run = run_qspec(&cfg.qspec, &cfg.selection, cfg.seed)?;
    let out: &Path = &cfg.out;
    write_file(&out.join("shots.csv"), |w| write_shots_csv(w, &run.shots, with_truth))?;
    let selected = run.selection.selected(&run.balanced);
    write_file(&out.join("selected.csv"), |w| write_shots_csv(w, &selected, with_truth))?;
    write_file(&out.join("pn_hist.csv"), |w| write_histogram_csv(w, &run.histogram))?;
    let mut report = serde_json::to_value(&run.report).map_err(|e| Error::Io(e.to_string()))?;
    if !with_truth {
        report = truthless(report);
    }
    write_json(&out.join("report.json"), &report)?;
    let r = &run.report;
    let mut summary = json!({
        "out": cfg.out,
        "retained_fraction": r.retained_fraction,
        "peak_spacings": r.peak_spacings,
        "expected_spacing": r.expected_spacing,
    });
    if with_truth {
        summary["enrichment"] = json!(r.enrichment);
    }
    Ok(summary)
}
