use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use npc_lab::InequalityMargin;

use crate::error::CliError;
use crate::run::{RunReport, Summary};

fn write(dir: &Path, name: &str, contents: &str, manifest: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    manifest.push(path);
    Ok(())
}

pub fn margins_csv(margins: &[InequalityMargin]) -> String {
    let mut s = String::from(InequalityMargin::csv_header());
    s.push('\n');
    for m in margins {
        s.push_str(&m.csv_row());
        s.push('\n');
    }
    s
}

/// Human-readable digest of a run.
pub fn summary_text(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "scenario {} (seed {})", s.name, s.seed);
    let _ = writeln!(
        t,
        "domain {:?}, resolution {}, {} vertices, h = {:.4e}",
        s.domain, s.resolution, s.vertices, s.mesh_size
    );
    let _ = writeln!(t, "target {}", s.target);
    if s.solver.solved {
        let _ = writeln!(
            t,
            "solver: {} after {} sweeps, energy {:.10e}, last decrease {:.3e}",
            if s.solver.converged { "converged" } else { "NOT converged" },
            s.solver.sweeps,
            s.solver.energy,
            s.solver.last_decrease
        );
    } else {
        let _ = writeln!(t, "map prescribed, energy {:.10e}", s.solver.energy);
    }
    for (name, c) in &s.checks {
        let _ = writeln!(t, "{name:<22} {:>5}/{:<5} pass", c.passed, c.rows);
    }
    if let Some(b) = &s.bochner {
        let _ = write!(
            t,
            "bochner at σ = {:.4e}: {} eligible, {} excluded, NPC pass {:.4}",
            b.sigma, b.eligible, b.excluded, b.npc_pass_fraction
        );
        if let Some(f) = b.cat1_pass_fraction {
            let _ = write!(t, ", CAT(-1) pass {f:.4}");
        }
        let _ = writeln!(t, " (required {})", b.required_fraction);
    }
    for (q, slope) in &s.ladder_slopes {
        let _ = writeln!(t, "mean σ² slope of {q}: {slope:.6e}");
    }
    if let Some(c) = &s.conformal {
        let _ = writeln!(
            t,
            "conformal factor in [{:.6}, {:.6}], anisotropy {:.3e}",
            c.min_lambda, c.max_lambda, c.max_anisotropy
        );
    }
    if let Some(l) = &s.lipschitz {
        let _ = writeln!(
            t,
            "lipschitz at depth {}: {:.6} (√E/depth = {:.6})",
            l.depth, l.constant, l.comparison
        );
    }
    if let Some(c) = &s.comparison {
        let _ = writeln!(t, "comparison: {} triangles, {} NPC failures", c.triangles, c.npc_failures);
    }
    for k in &s.skipped {
        let at = k.vertex.map_or(String::new(), |v| format!(" at vertex {v}"));
        let _ = writeln!(t, "skipped {}{at}: {}", k.check, k.reason);
    }
    let _ = writeln!(t, "failing: {}", s.failing);
    t
}

/// Writes every report file into `dir` and returns them in order.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut manifest = Vec::new();
    let m = &mut manifest;
    if !report.margins.is_empty() {
        write(dir, "margins.csv", &margins_csv(&report.margins), m)?;
    }
    if let Some(b) = &report.bochner {
        write(dir, "bochner.csv", &b.to_csv(), m)?;
    }
    if !report.series.is_empty() {
        let mut s = String::from("series,basepoint,sigma,value\n");
        for p in &report.series {
            let _ = writeln!(s, "{},{},{:.17e},{:.17e}", p.series, p.basepoint, p.sigma, p.value);
        }
        write(dir, "series.csv", &s, m)?;
    }
    write(dir, "convergence.csv", &report.log.to_csv(), m)?;
    write(dir, "mesh.json", &report.mesh.to_json()?, m)?;
    write(dir, "map.json", &report.map.to_json()?, m)?;
    if let Some(w) = &report.witnesses {
        write(dir, "witnesses.json", &serde_json::to_string_pretty(w).map_err(npc_lab::LabError::from)?, m)?;
    }
    let json = serde_json::to_string_pretty(&report.summary).map_err(npc_lab::LabError::from)?;
    write(dir, "summary.json", &json, m)?;
    write(dir, "summary.txt", &summary_text(&report.summary), m)?;
    Ok(manifest)
}
