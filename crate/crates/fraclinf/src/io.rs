//! CSV and JSON exports. Every file opens with a `# config_hash=<hex>` line
//! so outputs can always be traced back to the exact configuration that
//! produced them. Floats are written in shortest round-trip form, which
//! preserves full double precision and keeps reruns byte-identical.

use crate::config::RunConfig;
use crate::dual::{self, DualField};
use crate::error::Result;
use crate::grid::Grid;
use crate::report::{Report, StageRow};
use crate::solver::{ContinuationResult, Problem, StageResult};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn coord_header(dim: usize) -> &'static str {
    if dim == 1 {
        "x"
    } else {
        "x,y"
    }
}

fn push_coords(line: &mut String, grid: &Grid, i: usize) {
    let c = grid.coord(i);
    for (k, ck) in c[..grid.dim()].iter().enumerate() {
        if k > 0 {
            line.push(',');
        }
        let _ = write!(line, "{ck}");
    }
}

/// One scalar field: coordinates then the value column.
pub fn field_csv(grid: &Grid, name: &str, values: &[f64], hash: &str) -> String {
    assert_eq!(values.len(), grid.node_count(), "field/grid size mismatch");
    let mut out = format!(
        "# config_hash={hash}\n{},{name}\n",
        coord_header(grid.dim())
    );
    for (i, v) in values.iter().enumerate() {
        let mut line = String::new();
        push_coords(&mut line, grid, i);
        let _ = write!(line, ",{v}");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Dual field export: coordinates, density, sign, and zero-band flag.
pub fn dual_csv(grid: &Grid, dual: &DualField, hash: &str) -> String {
    let mut out = format!(
        "# config_hash={hash}\n{},f,sign,zero_band\n",
        coord_header(grid.dim())
    );
    for i in 0..grid.node_count() {
        let mut line = String::new();
        push_coords(&mut line, grid, i);
        let _ = write!(
            line,
            ",{},{},{}",
            dual.field[i],
            dual.sign[i],
            u8::from(dual.zero_band[i])
        );
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Continuation trajectory: one row per stage.
pub fn trajectory_csv(stages: &[StageResult], hash: &str) -> String {
    let mut out = format!("# config_hash={hash}\np,e_p,gradient_norm,iterations\n");
    for st in stages {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            st.p, st.e_p, st.grad_dual_norm, st.iterations
        );
    }
    out
}

/// Sweep summary: stage diagnostics side by side.
pub fn sweep_csv(rows: &[StageRow], hash: &str) -> String {
    let mut out = format!("# config_hash={hash}\np,e_p,mass,duality_gap_rel,saturation_excl\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.p,
            r.e_p,
            opt(r.mass),
            opt(r.duality_gap_rel),
            opt(r.saturation_excl)
        );
    }
    out
}

/// File name for a stage's dual export; p prints without a trailing `.0`.
pub fn dual_file_name(p: f64) -> String {
    format!("f_p{p}.csv")
}

/// Writes the full run directory:
///   config.json, trajectory.csv, report.json,
///   fields/{u,exterior_data,operator_image}.csv, duals/f_p<p>.csv.
/// Degenerate runs have no dual fields; the duals directory stays empty.
pub fn write_run_dir(
    dir: &Path,
    cfg: &RunConfig,
    prob: &Problem,
    result: &ContinuationResult,
    report: &Report,
) -> Result<()> {
    let hash = cfg.config_hash();
    let grid = &prob.domain.grid;
    fs::create_dir_all(dir.join("fields"))?;
    fs::create_dir_all(dir.join("duals"))?;

    let mut config_json = serde_json::to_string_pretty(cfg)?;
    config_json.push('\n');
    fs::write(dir.join("config.json"), config_json)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    fs::write(
        dir.join("trajectory.csv"),
        trajectory_csv(&result.stages, &hash),
    )?;

    fs::write(
        dir.join("fields").join("exterior_data.csv"),
        field_csv(grid, "g", &prob.exterior, &hash),
    )?;
    if let Some(last) = result.stages.last() {
        fs::write(
            dir.join("fields").join("u.csv"),
            field_csv(grid, "u", &last.u, &hash),
        )?;
        let au = prob.op.apply_values(&last.u)?;
        fs::write(
            dir.join("fields").join("operator_image.csv"),
            field_csv(grid, "slap_u", &au, &hash),
        )?;
    }
    if !result.degenerate {
        for st in &result.stages {
            let d = dual::build(prob, &st.u, st.p)?;
            fs::write(
                dir.join("duals").join(dual_file_name(st.p)),
                dual_csv(grid, &d, &hash),
            )?;
        }
    }
    Ok(())
}
