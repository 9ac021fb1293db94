//! Binary trajectory files. See FORMATS.md for the byte layout.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FlowTrajectory, Snapshot, Solution};
use crate::geometry::{ConformalMetric, GridSpec, ScalarField};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"RHLTRAJ1";

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Writes `trajectory` with a UTF-8 echo of the configuration that produced it.
pub fn write_trajectory(path: &Path, trajectory: &FlowTrajectory, config_echo: &str) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode(&mut w, trajectory, config_echo)?;
    w.flush()
}

/// Reads a trajectory file, returning the trajectory and the config echo.
pub fn read_trajectory(path: &Path) -> io::Result<(FlowTrajectory, String)> {
    decode(&mut BufReader::new(File::open(path)?))
}

fn encode(w: &mut impl Write, traj: &FlowTrajectory, config_echo: &str) -> io::Result<()> {
    let spec = traj.spec();
    w.write_all(TRAJECTORY_MAGIC)?;
    for v in [spec.nx as u64, spec.ny as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [spec.lx, spec.ly, traj.dt] {
        w.write_all(&v.to_le_bytes())?;
    }
    let kind: u64 = match traj.solution {
        Solution::Heat => 0,
        Solution::Conjugate => 1,
    };
    for v in [traj.stride as u64, kind, traj.snapshots.len() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for text in [traj.name.as_str(), config_echo] {
        w.write_all(&(text.len() as u64).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
    }
    for snap in &traj.snapshots {
        w.write_all(&snap.t.to_le_bytes())?;
        for v in snap.metric.exponent().values().iter().chain(snap.u.values()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> io::Result<String> {
    let len = read_u64(r)? as usize;
    if len > 1 << 30 {
        return Err(invalid("string length out of range"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| invalid("string is not UTF-8"))
}

fn read_field(r: &mut impl Read, spec: GridSpec) -> io::Result<ScalarField> {
    let values = (0..spec.len()).map(|_| read_f64(r)).collect::<io::Result<Vec<_>>>()?;
    ScalarField::from_values(spec, values).map_err(|e| invalid(e.to_string()))
}

fn decode(r: &mut impl Read) -> io::Result<(FlowTrajectory, String)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TRAJECTORY_MAGIC {
        return Err(invalid("not a trajectory file"));
    }
    let nx = read_u64(r)? as usize;
    let ny = read_u64(r)? as usize;
    let lx = read_f64(r)?;
    let ly = read_f64(r)?;
    let spec = GridSpec::new(nx, ny, lx, ly).map_err(|e| invalid(e.to_string()))?;
    let dt = read_f64(r)?;
    let stride = read_u64(r)? as usize;
    let solution = match read_u64(r)? {
        0 => Solution::Heat,
        1 => Solution::Conjugate,
        other => return Err(invalid(format!("unknown solution kind {other}"))),
    };
    let count = read_u64(r)? as usize;
    if count == 0 {
        return Err(invalid("trajectory has no snapshots"));
    }
    let name = read_string(r)?;
    let echo = read_string(r)?;
    let mut snapshots = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let t = read_f64(r)?;
        let f = read_field(r, spec)?;
        let u = read_field(r, spec)?;
        let metric = ConformalMetric::new(f, t).map_err(|e| invalid(e.to_string()))?;
        snapshots.push(Snapshot { t, metric, u });
    }
    let traj = FlowTrajectory {
        name,
        dt,
        stride,
        solution,
        snapshots,
        max_principle: None,
    };
    Ok((traj, echo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{cfl_limit, run_coupled_flow, RunConfig};

    #[test]
    fn round_trip_preserves_every_bit() {
        let spec = GridSpec::new(8, 12, 3.0, 4.5).unwrap();
        let f0 = ScalarField::from_fn(spec, |x, y| 0.05 * (2.0 * x).sin() * y.cos());
        let u0 = ScalarField::from_fn(spec, |x, _| 1.0 + x.cos());
        let dt = 0.5 * cfl_limit(&ConformalMetric::new(f0.clone(), 0.0).unwrap());
        let traj = run_coupled_flow(&RunConfig::new("rt", f0, u0, dt, 10.0 * dt).with_stride(3)).unwrap();
        let mut bytes = Vec::new();
        encode(&mut bytes, &traj, "name = \"rt\"\n").unwrap();
        let (back, echo) = decode(&mut bytes.as_slice()).unwrap();
        assert_eq!(echo, "name = \"rt\"\n");
        assert_eq!(back.name, "rt");
        assert_eq!(back.stride, 3);
        assert_eq!(back.snapshots, traj.snapshots);
        let header = 8 + 8 * 8 + 8 + 2 + 8 + echo.len();
        assert_eq!(bytes.len(), header + traj.len() * 8 * (1 + 2 * spec.len()));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let bytes = b"NOTATRAJ........".to_vec();
        assert!(decode(&mut bytes.as_slice()).is_err());
    }
}
