//! CSV writers. Every number is printed with 17 significant digits so that
//! parsing the output recovers the exact `f64`.

use std::io::{self, Write};

use nalgebra::Vector2;

use crate::degree::{AttainableSample, DeviationReport, SweepEntry, WindingResult};
use crate::integrator::Trajectory;
use crate::shooting::{DirichletSolution, ShotResult};

pub const TRAJECTORY_HEADER_1D: &str = "t,x1,v1,segment";
pub const TRAJECTORY_HEADER_2D: &str = "t,x1,x2,v1,v2,segment";
pub const IMPACTS_HEADER_1D: &str = "t,point1,vin1,vout1,side";
pub const IMPACTS_HEADER_2D: &str = "t,point1,point2,vin1,vin2,vout1,vout2,side";
pub const SHOTS_HEADER: &str = "v,endpoint,impact_count,status";
pub const SOLUTIONS_HEADER: &str = "v,residual,impact_count,impact_times";
pub const NORMAL_RAYS_HEADER: &str = "v1,v2,residual,impact_count,impact_times";
pub const ATTAINABLE_HEADER: &str = "theta,d,y1,y2,status";
pub const WINDING_HEADER: &str = "d,winding,min_dist,samples_used";
pub const SWEEP_HEADER: &str = "d,winding,min_dist,flag";
pub const DEVIATION_HEADER: &str = "theta,first_impact,until_first_impact,full_horizon,status";

/// `x` with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn vec_cols(v: &Vector2<f64>, dim: usize) -> String {
    if dim == 1 {
        num(v.x)
    } else {
        format!("{},{}", num(v.x), num(v.y))
    }
}

fn joined_times(times: &[f64]) -> String {
    times.iter().map(|&t| num(t)).collect::<Vec<_>>().join(";")
}

/// One row per dense-output step node, plus both ends of every segment.
/// Impact instants appear twice: as the last row of one segment (incoming
/// velocity) and the first row of the next (outgoing velocity).
pub fn write_trajectory<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    let dim = traj.dim;
    writeln!(
        out,
        "{}",
        if dim == 1 {
            TRAJECTORY_HEADER_1D
        } else {
            TRAJECTORY_HEADER_2D
        }
    )?;
    for (k, seg) in traj.segments.iter().enumerate() {
        let mut row = |t: f64, y: nalgebra::Vector4<f64>| {
            let x = Vector2::new(y[0], y[1]);
            let v = Vector2::new(y[2], y[3]);
            writeln!(
                out,
                "{},{},{},{k}",
                num(t),
                vec_cols(&x, dim),
                vec_cols(&v, dim)
            )
        };
        for step in &seg.steps {
            row(step.t0, step.eval(step.t0))?;
        }
        if let Some(last) = seg.steps.last() {
            row(last.t1(), last.eval(last.t1()))?;
        }
    }
    Ok(())
}

pub fn write_impacts<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    let dim = traj.dim;
    writeln!(
        out,
        "{}",
        if dim == 1 {
            IMPACTS_HEADER_1D
        } else {
            IMPACTS_HEADER_2D
        }
    )?;
    for imp in &traj.impacts {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(imp.t),
            vec_cols(&imp.point, dim),
            vec_cols(&imp.v_in, dim),
            vec_cols(&imp.v_out, dim),
            imp.side
        )?;
    }
    Ok(())
}

/// Endpoint-map samples of a one-dimensional problem.
pub fn write_shots<W: Write>(out: &mut W, shots: &[ShotResult]) -> io::Result<()> {
    writeln!(out, "{SHOTS_HEADER}")?;
    for s in shots {
        writeln!(
            out,
            "{},{},{},{}",
            num(s.v.x),
            num(s.endpoint.x),
            s.impact_count,
            s.status.label()
        )?;
    }
    Ok(())
}

/// Solutions of a one-dimensional problem.
pub fn write_solutions<W: Write>(out: &mut W, solutions: &[DirichletSolution]) -> io::Result<()> {
    writeln!(out, "{SOLUTIONS_HEADER}")?;
    for s in solutions {
        writeln!(
            out,
            "{},{},{},{}",
            num(s.v.x),
            num(s.residual),
            s.impact_count(),
            joined_times(&s.trajectory.impact_times())
        )?;
    }
    Ok(())
}

pub fn write_normal_rays<W: Write>(out: &mut W, solutions: &[DirichletSolution]) -> io::Result<()> {
    writeln!(out, "{NORMAL_RAYS_HEADER}")?;
    for s in solutions {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(s.v.x),
            num(s.v.y),
            num(s.residual),
            s.impact_count(),
            joined_times(&s.trajectory.impact_times())
        )?;
    }
    Ok(())
}

pub fn write_attainable<W: Write>(out: &mut W, samples: &[AttainableSample]) -> io::Result<()> {
    writeln!(out, "{ATTAINABLE_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(s.theta),
            num(s.d),
            num(s.endpoint.x),
            num(s.endpoint.y),
            s.status.label()
        )?;
    }
    Ok(())
}

pub fn write_winding<W: Write>(out: &mut W, w: &WindingResult) -> io::Result<()> {
    writeln!(out, "{WINDING_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{}",
        num(w.d),
        w.winding,
        num(w.min_dist_to_origin),
        w.samples_used
    )
}

/// Flags are `;`-joined, `none` when empty; the winding column is empty
/// when it could not be computed.
pub fn write_sweep<W: Write>(out: &mut W, entries: &[SweepEntry]) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for e in entries {
        let flag = if e.flags.is_empty() {
            "none".to_string()
        } else {
            e.flags
                .iter()
                .map(|f| f.label())
                .collect::<Vec<_>>()
                .join(";")
        };
        let winding = e.winding.map(|w| w.to_string()).unwrap_or_default();
        writeln!(out, "{},{winding},{},{flag}", num(e.d), num(e.min_dist))?;
    }
    Ok(())
}

pub fn write_deviation<W: Write>(out: &mut W, report: &DeviationReport) -> io::Result<()> {
    writeln!(out, "{DEVIATION_HEADER}")?;
    for d in &report.directions {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(d.theta),
            d.first_impact.map(num).unwrap_or_default(),
            num(d.until_first_impact),
            num(d.full_horizon),
            d.status.label()
        )?;
    }
    Ok(())
}
