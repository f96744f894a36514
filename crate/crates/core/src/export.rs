//! CSV export for series data. Floats are written with 17 significant
//! digits so that parsing them back reproduces the exact bit pattern,
//! which is what makes byte-identical regression comparisons meaningful.

use std::io::{self, Write};

use crate::bernstein::TransformGrid;
use crate::equilibrium::EquilibriumTable;
use crate::integrator::Trajectory;

/// 17 significant digits: the shortest count that round-trips every f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns: `t, m0, m1, m2, gel_mass, rho_1..rho_K`.
pub fn write_trajectory_csv(
    traj: &Trajectory,
    density_columns: usize,
    out: &mut impl Write,
) -> io::Result<()> {
    write!(out, "t,m0,m1,m2,gel_mass")?;
    for l in 1..=density_columns {
        write!(out, ",rho_{l}")?;
    }
    writeln!(out)?;
    for i in 0..traj.len() {
        let m = traj.moments(i);
        let snap = traj.snapshot(i);
        write!(
            out,
            "{},{},{},{},{}",
            format_f64(traj.time(i)),
            format_f64(m.m0),
            format_f64(m.m1),
            format_f64(m.m2),
            format_f64(snap.gel_mass())
        )?;
        for l in 1..=density_columns.min(snap.truncation_n()) {
            write!(out, ",{}", format_f64(snap.density(l)))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Columns: `node, value`, with an optional constant `time` column.
pub fn write_grid_csv(
    grid: &TransformGrid,
    time: Option<f64>,
    out: &mut impl Write,
) -> io::Result<()> {
    match time {
        Some(t) => {
            writeln!(out, "node,value,time")?;
            for (&x, &v) in grid.nodes().iter().zip(grid.values()) {
                writeln!(out, "{},{},{}", format_f64(x), format_f64(v), format_f64(t))?;
            }
        }
        None => {
            writeln!(out, "node,value")?;
            for (&x, &v) in grid.nodes().iter().zip(grid.values()) {
                writeln!(out, "{},{}", format_f64(x), format_f64(v))?;
            }
        }
    }
    Ok(())
}

/// Columns: `t, value` for generic time series (weak-form residuals etc).
pub fn write_series_csv(
    series: &[(f64, f64)],
    value_name: &str,
    out: &mut impl Write,
) -> io::Result<()> {
    writeln!(out, "t,{value_name}")?;
    for &(t, v) in series {
        writeln!(out, "{},{}", format_f64(t), format_f64(v))?;
    }
    Ok(())
}

/// Columns: `l, rho_tilde`.
pub fn write_table_csv(table: &EquilibriumTable, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "l,rho_tilde")?;
    for l in 1..=table.len() {
        writeln!(out, "{l},{}", format_f64(table.value(l)))?;
    }
    Ok(())
}
