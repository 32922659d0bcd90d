//! CSV import/export for point clouds, schedules, and trajectories, plus the
//! float formatting used for replay-exact reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::samplers::Trajectory;
use crate::schedules::NoiseSchedule;

/// 17 significant digits; parses back to the identical f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One point per row, comma-separated plain decimals, no header.
pub fn save_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for p in cloud.points() {
        let row: Vec<String> = p.iter().map(|c| format!("{c:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Dimension is inferred from the first row and enforced thereafter.
pub fn load_point_cloud(path: &Path, skip_header: bool) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: {e}: {f:?}", lineno + 1))
                })
            })
            .collect();
        points.push(row?);
    }
    PointCloud::new(points)
}

pub fn schedule_csv(schedule: &NoiseSchedule) -> String {
    let mut out = String::from("t,sigma,beta\n");
    let n = schedule.num_steps();
    for t in (0..=n).rev() {
        let beta = if t >= 1 { fmt_f64(schedule.beta(t)) } else { String::new() };
        out.push_str(&format!("{t},{},{beta}\n", fmt_f64(schedule.sigma(t))));
    }
    out
}

/// Per-step records; the state columns are included only when `include_x`.
pub fn trajectory_csv(traj: &Trajectory, include_x: bool) -> String {
    let mut out = String::from("t,sigma,distance,rel_proj_error,ratio");
    if include_x {
        let dim = traj.records.first().map_or(0, |r| r.x.len());
        for i in 0..dim {
            out.push_str(&format!(",x{i}"));
        }
    }
    out.push('\n');
    for rec in &traj.records {
        out.push_str(&format!(
            "{},{},{},{},{}",
            rec.t,
            fmt_f64(rec.sigma),
            fmt_f64(rec.distance),
            fmt_f64(rec.rel_proj_error),
            fmt_f64(rec.ratio)
        ));
        if include_x {
            for c in &rec.x {
                out.push(',');
                out.push_str(&fmt_f64(*c));
            }
        }
        out.push('\n');
    }
    out
}

/// Full-state dump for replay: per-record x and epsilon at 17 significant
/// digits in a line-oriented text form.
pub fn trajectory_dump(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(&format!("evaluations {}\n", traj.evaluations));
    let fx: Vec<String> = traj.final_x0.iter().map(|c| fmt_f64(*c)).collect();
    out.push_str(&format!("final_x0 {}\n", fx.join(" ")));
    for rec in &traj.records {
        let xs: Vec<String> = rec.x.iter().map(|c| fmt_f64(*c)).collect();
        let es: Vec<String> = rec.epsilon.iter().map(|c| fmt_f64(*c)).collect();
        out.push_str(&format!(
            "t {} sigma {} x {} eps {}\n",
            rec.t,
            fmt_f64(rec.sigma),
            xs.join(" "),
            es.join(" ")
        ));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::Denoiser;
    use crate::geometry::TargetSet;
    use crate::rng::seeded;
    use crate::samplers::{run, SamplerSpec};

    #[test]
    fn fmt_round_trips_exactly() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 7.25e300, -0.0, 2.0_f64.powi(-52)] {
            let back: f64 = fmt_f64(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v}");
        }
    }

    #[test]
    fn point_cloud_save_load_round_trip() {
        let dir = std::env::temp_dir().join("distdiff-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        let cloud =
            PointCloud::new(vec![vec![0.5, -1.25, 3.0], vec![1.0 / 3.0, 2e-10, -7.5]]).unwrap();
        save_point_cloud(&path, &cloud).unwrap();
        let back = load_point_cloud(&path, false).unwrap();
        assert_eq!(back.points(), cloud.points());
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let dir = std::env::temp_dir().join("distdiff-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ragged.csv");
        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(load_point_cloud(&path, false).is_err());
    }

    #[test]
    fn load_skips_header_when_asked() {
        let dir = std::env::temp_dir().join("distdiff-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("header.csv");
        std::fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
        assert!(load_point_cloud(&path, false).is_err());
        let cloud = load_point_cloud(&path, true).unwrap();
        assert_eq!(cloud.len(), 1);
    }

    #[test]
    fn schedule_csv_shape() {
        let s = NoiseSchedule::loglinear(8.0, 1.0, 3).unwrap();
        let csv = schedule_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5); // header + 4 rows
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "3");
        let sigma_top: f64 = fields[1].parse().unwrap();
        assert!((sigma_top - 8.0).abs() < 1e-12);
        assert!(lines[4].ends_with(",")); // no beta at t = 0
    }

    #[test]
    fn trajectory_csv_is_deterministic() {
        let set = TargetSet::Cloud(PointCloud::new(vec![vec![0.0, 0.0]]).unwrap());
        let schedule = NoiseSchedule::loglinear(1.0, 0.1, 4).unwrap();
        let denoiser = Denoiser::ExactProjection(set.clone());
        let mk = || {
            run(&SamplerSpec::ddim(), &schedule, &denoiser, &set, vec![1.0, 1.0], &mut seeded(5))
                .unwrap()
        };
        let a = trajectory_csv(&mk(), true);
        let b = trajectory_csv(&mk(), true);
        assert_eq!(a, b);
        assert!(a.lines().count() == 6);
        assert!(a.starts_with("t,sigma,distance,rel_proj_error,ratio,x0,x1\n"));
    }
}
