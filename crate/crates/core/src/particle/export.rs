//! CSV export of trajectories.

use std::io::Write;

use super::process::Trajectory;
use crate::topo::Configuration;
use crate::Result;

fn state_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "particle".to_string()];
    if dim == 1 {
        h.push("x".into());
        h.push("v".into());
    } else {
        h.extend((1..=dim).map(|k| format!("x{k}")));
        h.extend((1..=dim).map(|k| format!("v{k}")));
    }
    h
}

fn write_state<W: Write>(out: &mut csv::Writer<W>, t: f64, c: &Configuration) -> Result<()> {
    for i in 0..c.len() {
        let mut row = vec![t.to_string(), i.to_string()];
        row.extend(c.position(i).iter().map(f64::to_string));
        row.extend(c.velocity(i).iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    Ok(())
}

/// Columns `t, particle, x.., v..`; every snapshot followed by the final state.
pub fn write_snapshots_csv<W: Write>(trajectory: &Trajectory, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(state_header(trajectory.final_state.dim()))?;
    for s in &trajectory.snapshots {
        write_state(&mut out, s.time, &s.state)?;
    }
    if trajectory.snapshots.last().is_none_or(|s| s.time < trajectory.horizon) {
        write_state(&mut out, trajectory.horizon, &trajectory.final_state)?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `t, i, j`.
pub fn write_events_csv<W: Write>(trajectory: &Trajectory, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["t", "i", "j"])?;
    for e in &trajectory.events {
        out.write_record(&[e.time.to_string(), e.focal.to_string(), e.partner.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particle::process::{simulate, ProcessParams};
    use crate::topo::Linear;
    use std::sync::Arc;

    #[test]
    fn csv_shapes() {
        let c = Configuration::line(&[0.0, 0.3, 0.6], &[0.1, -0.1, 0.2]).unwrap();
        let mut p = ProcessParams::new(Arc::new(Linear), 3, 1.0, 4);
        p.snapshot_times = vec![0.0, 0.5];
        let traj = simulate(&p, &c).unwrap();
        let mut buf = Vec::new();
        write_snapshots_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,particle,x,v");
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        let mut buf = Vec::new();
        write_events_csv(&traj, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + traj.events.len());
    }
}
