//! Plot-ready export: the trajectory columns verbatim plus a pose path
//! (position and unit quaternion) for every group factor.

use bundle_interp::algebra::FactorKind;
use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::trajectory_file::{infer_factors, Part, TrajectoryFile};
use crate::CliError;

/// Unit quaternion `(w, x, y, z)` of a rotation matrix, sign fixed by `w ≥ 0`.
pub fn quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

pub fn plotdata(file: &TrajectoryFile) -> Result<String, CliError> {
    let cols = file.columns()?;
    let factors = infer_factors(cols.matrix, cols.group).ok_or_else(|| {
        CliError::Input(format!(
            "{} matrix entries do not match a product of SO(3)/SE(3) factors of dimension {}",
            cols.matrix, cols.group
        ))
    })?;
    let keep = 1 + 2 * cols.base + cols.group;
    let mut header: Vec<String> = file.header[..keep].to_vec();
    for (f, kind) in factors.iter().enumerate() {
        if *kind == FactorKind::Se3 {
            header.extend(["px", "py", "pz"].iter().map(|c| format!("g{f}_{c}")));
        }
        header.extend(["qw", "qx", "qy", "qz"].iter().map(|c| format!("g{f}_{c}")));
    }
    let mut out = header.join(",");
    out.push('\n');
    let gr = file.column_range(&cols, Part::G);
    for (row, cells) in file.rows.iter().zip(&file.cells) {
        let mut line: Vec<String> = cells[..keep].to_vec();
        let g = &row[gr.clone()];
        let mut off = 0;
        for kind in &factors {
            let d = kind.matrix_dim();
            let block = &g[off..off + d * d];
            off += d * d;
            let r = Matrix3::from_fn(|i, j| block[i * d + j]);
            if *kind == FactorKind::Se3 {
                line.extend((0..3).map(|i| crate::trajectory_file::fmt(block[i * d + 3])));
            }
            line.extend(quaternion(&r).iter().map(|&v| crate::trajectory_file::fmt(v)));
        }
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}
