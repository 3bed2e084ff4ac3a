//! CSV trajectory files: header, one row per grid node, `#key=value` trailers.

use bundle_interp::algebra::{log_group, Algebra, FactorKind, GroupElement};
use bundle_interp::geometry::{BasePoint, BundleSpec};
use bundle_interp::interpolator::Trajectory;

use crate::CliError;

/// 17 significant digits: enough to round-trip every `f64`.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column layout implied by a bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Columns {
    pub base: usize,
    pub group: usize,
    pub matrix: usize,
}

impl Columns {
    pub fn of(spec: &BundleSpec) -> Self {
        Self {
            base: spec.base_dim(),
            group: spec.group().dim(),
            matrix: matrix_entries(spec.group()),
        }
    }

    pub fn total(&self) -> usize {
        1 + 2 * self.base + self.group + self.matrix
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..self.base).map(|i| format!("x{i}")));
        h.extend((0..self.base).map(|i| format!("xdot{i}")));
        h.extend((0..self.group).map(|i| format!("xi{i}")));
        h.extend((0..self.matrix).map(|i| format!("g{i}")));
        h
    }
}

pub fn matrix_entries(alg: Algebra) -> usize {
    alg.factors().iter().map(|k| k.matrix_dim() * k.matrix_dim()).sum()
}

/// Coordinates written for a base point: the vector, or rotation vectors.
fn base_coords(x: &BasePoint) -> Result<Vec<f64>, CliError> {
    match x {
        BasePoint::Euclidean(v) => Ok(v.iter().copied().collect()),
        BasePoint::Group(g) => {
            let mut out = Vec::new();
            for f in g.factors() {
                let single = GroupElement::new(vec![*f]).map_err(CliError::core)?;
                out.extend(log_group(&single).map_err(CliError::core)?.coords().iter());
            }
            Ok(out)
        }
    }
}

pub fn write(trajectory: &Trajectory) -> Result<String, CliError> {
    let Some(g0) = trajectory.g.first() else {
        return Err(CliError::Input("empty trajectory".into()));
    };
    let base = trajectory.xdot[0].len();
    let cols = Columns {
        base,
        group: trajectory.xi[0].dim(),
        matrix: matrix_entries(g0.algebra()),
    };
    let mut out = cols.header().join(",");
    out.push('\n');
    for i in 0..trajectory.times.len() {
        let mut row = vec![trajectory.times[i]];
        row.extend(base_coords(&trajectory.x[i])?);
        row.extend(trajectory.xdot[i].iter());
        row.extend(trajectory.xi[i].coords().iter());
        row.extend(trajectory.g[i].to_row_major());
        let row: Vec<String> = row.into_iter().map(fmt).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.push_str(&format!("#J={}\n", fmt(trajectory.cost)));
    out.push_str(&format!("#residual={}\n", fmt(trajectory.residual_norm)));
    out.push_str(&format!("#converged={}\n", trajectory.converged));
    Ok(out)
}

/// A trajectory file read back from disk. `cells` keeps the original text.
#[derive(Clone, Debug)]
pub struct TrajectoryFile {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub cells: Vec<Vec<String>>,
    pub cost: Option<f64>,
    pub residual: Option<f64>,
    pub converged: Option<bool>,
}

impl TrajectoryFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Err(CliError::Input("trajectory file is empty".into()));
        };
        let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(CliError::Input("line 1: header must start with column `t`".into()));
        }
        let mut file = Self {
            header,
            rows: Vec::new(),
            cells: Vec::new(),
            cost: None,
            residual: None,
            converged: None,
        };
        for (i, line) in lines {
            let lineno = i + 1;
            if let Some(meta) = line.strip_prefix('#') {
                let (key, value) = meta
                    .split_once('=')
                    .ok_or_else(|| CliError::Input(format!("line {lineno}: malformed metadata `{line}`")))?;
                let bad = || CliError::Input(format!("line {lineno}: bad value for {key}"));
                match key.trim() {
                    "J" => file.cost = Some(value.trim().parse().map_err(|_| bad())?),
                    "residual" => file.residual = Some(value.trim().parse().map_err(|_| bad())?),
                    "converged" => file.converged = Some(value.trim().parse().map_err(|_| bad())?),
                    _ => {}
                }
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if cells.len() != file.header.len() {
                return Err(CliError::Input(format!(
                    "line {lineno}: {} columns, header has {}",
                    cells.len(),
                    file.header.len()
                )));
            }
            let row = cells
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    s.parse::<f64>().map_err(|_| {
                        CliError::Input(format!("line {lineno}, column {}: `{s}` is not a number", file.header[c]))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(prev) = file.rows.last() {
                if row[0] <= prev[0] {
                    return Err(CliError::Input(format!("line {lineno}: t is not strictly increasing")));
                }
            }
            file.rows.push(row);
            file.cells.push(cells);
        }
        if file.rows.is_empty() {
            return Err(CliError::Input("trajectory has no rows".into()));
        }
        Ok(file)
    }

    /// Column layout from the header names.
    pub fn columns(&self) -> Result<Columns, CliError> {
        let count = |prefix: &str| {
            self.header
                .iter()
                .filter(|h| h.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok()))
                .count()
        };
        let cols = Columns {
            base: count("x"),
            group: count("xi"),
            matrix: count("g"),
        };
        let expected = Columns::header(&cols);
        if expected != self.header {
            return Err(CliError::Input("header does not follow the t, x*, xdot*, xi*, g* layout".into()));
        }
        Ok(cols)
    }

    pub fn column_range(&self, cols: &Columns, part: Part) -> std::ops::Range<usize> {
        let start = match part {
            Part::X => 1,
            Part::Xdot => 1 + cols.base,
            Part::Xi => 1 + 2 * cols.base,
            Part::G => 1 + 2 * cols.base + cols.group,
        };
        let len = match part {
            Part::X | Part::Xdot => cols.base,
            Part::Xi => cols.group,
            Part::G => cols.matrix,
        };
        start..start + len
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Part {
    X,
    Xdot,
    Xi,
    G,
}

/// Guesses the group factors from the number of matrix entries and the
/// algebra dimension (used when no problem file is available).
pub fn infer_factors(matrix: usize, group: usize) -> Option<Vec<FactorKind>> {
    // n3 SO(3) and n4 SE(3) factors: 9 n3 + 16 n4 = matrix, 3 n3 + 6 n4 = group.
    for n4 in 0..=matrix / 16 {
        let rest = matrix - 16 * n4;
        if rest.is_multiple_of(9) && 3 * (rest / 9) + 6 * n4 == group {
            let mut f = vec![FactorKind::So3; rest / 9];
            f.extend(std::iter::repeat_n(FactorKind::Se3, n4));
            return Some(f);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn parse_rejects_malformed_files() {
        assert!(TrajectoryFile::parse("").is_err());
        assert!(TrajectoryFile::parse("t,x0\n").is_err());
        assert!(TrajectoryFile::parse("t,x0\n0,1\n0,2\n").is_err());
        assert!(TrajectoryFile::parse("t,x0\n0,1,2\n").is_err());
        let f = TrajectoryFile::parse("t,x0\n0,1\n1,2\n#J=0.5\n#converged=true\n").unwrap();
        assert_eq!(f.rows.len(), 2);
        assert_eq!(f.cost, Some(0.5));
        assert_eq!(f.converged, Some(true));
    }

    #[test]
    fn factor_inference() {
        assert_eq!(infer_factors(9, 3), Some(vec![FactorKind::So3]));
        assert_eq!(infer_factors(16, 6), Some(vec![FactorKind::Se3]));
        assert_eq!(infer_factors(25, 9), Some(vec![FactorKind::So3, FactorKind::Se3]));
        assert_eq!(infer_factors(10, 3), None);
    }
}
