//! Import of externally measured Wigner grids.
//!
//! ```text
//! 81 4
//! w(0,0) w(0,1) ... w(0,80)
//! ...
//! ```
//!
//! The first line declares the side and optionally the extent (default as
//! for simulated grids). The remaining side² numbers are read in row-major
//! order, rows along p and columns along x, separated by whitespace or commas.
//! Blank lines and lines starting with `#` are skipped.

use std::f64::consts::FRAC_2_PI;
use std::path::Path;

use super::sampling::select_pixels;
use super::{DataImage, GridSpec, Shots};
use crate::error::{Error, Result};

/// Tolerance beyond ±2/π for measured values.
pub const EXTERNAL_RANGE_SLACK: f64 = 0.05;

/// Parses a full external grid into its spec and values.
pub fn parse_external_grid(text: &str, origin: &str) -> Result<(GridSpec, Vec<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (n0, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, "empty grid file"))?;
    let loc = |n: usize| format!("{origin}:{}", n + 1);
    let head: Vec<&str> = header.split_whitespace().collect();
    let side: usize = head
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(loc(n0), "first line must declare the grid side"))?;
    let grid = match head.get(1) {
        Some(t) => {
            let extent: f64 = t.parse().map_err(|_| Error::parse(loc(n0), "bad extent"))?;
            GridSpec::new(side, extent)
        }
        None => GridSpec::with_default_extent(side),
    }
    .map_err(|e| Error::parse(loc(n0), e.to_string()))?;
    if head.len() > 2 {
        return Err(Error::parse(loc(n0), "header has extra fields"));
    }

    let limit = FRAC_2_PI + EXTERNAL_RANGE_SLACK;
    let mut values = Vec::with_capacity(grid.pixels());
    for (n, line) in lines {
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(loc(n), format!("bad number `{tok}`")))?;
            if !v.is_finite() || v.abs() > limit {
                return Err(Error::parse(
                    loc(n),
                    format!(
                        "value {v} at pixel {} outside [-{limit:.4}, {limit:.4}]",
                        values.len()
                    ),
                ));
            }
            values.push(v);
            if values.len() > grid.pixels() {
                return Err(Error::parse(
                    loc(n),
                    format!("more than {side}x{side} values"),
                ));
            }
        }
    }
    if values.len() != grid.pixels() {
        return Err(Error::parse(
            origin,
            format!("expected {} values for side {side}, found {}", grid.pixels(), values.len()),
        ));
    }
    Ok((grid, values))
}

/// Subsamples a parsed external grid. Present values are copied verbatim.
pub fn subsample_external(
    grid: &GridSpec,
    values: &[f64],
    fraction: f64,
    seed: u64,
    descriptor: &str,
) -> Result<DataImage> {
    if values.len() != grid.pixels() {
        return Err(Error::invalid("value count does not match the grid"));
    }
    let mut mask = vec![false; grid.pixels()];
    let mut estimates = vec![0.0; grid.pixels()];
    for i in select_pixels(grid, fraction, seed)? {
        mask[i] = true;
        estimates[i] = values[i];
    }
    Ok(DataImage {
        grid: *grid,
        mask,
        estimates,
        shots: Shots::External,
        fraction,
        seed,
        descriptor: descriptor.to_string(),
        affine: None,
    })
}

/// Loads a grid file and keeps `round(fraction·side²)` random pixels.
pub fn ingest_external_grid(path: &Path, fraction: f64, seed: u64) -> Result<DataImage> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let (grid, values) = parse_external_grid(&text, &origin)?;
    let name = path
        .file_name()
        .map(|n| format!("external:{}", n.to_string_lossy()))
        .unwrap_or_else(|| "external".into());
    subsample_external(&grid, &values, fraction, seed, &name)
}

/// Renders values in the import format.
pub fn write_external_grid(grid: &GridSpec, values: &[f64]) -> String {
    let mut s = format!("{} {}\n", grid.side, grid.extent);
    for row in values.chunks(grid.side) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(side: usize) -> String {
        let grid = GridSpec::with_default_extent(side).unwrap();
        let values: Vec<f64> = (0..grid.pixels()).map(|i| 0.5 * ((i as f64) * 0.37).sin()).collect();
        write_external_grid(&grid, &values)
    }

    #[test]
    fn counts_for_81_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.txt");
        std::fs::write(&path, synthetic(81)).unwrap();
        let full = ingest_external_grid(&path, 1.0, 0).unwrap();
        assert_eq!(full.present_count(), 6561);
        assert_eq!(full.shots, Shots::External);
        let five = ingest_external_grid(&path, 0.05, 4).unwrap();
        assert_eq!(five.present_count(), 328);
        let again = ingest_external_grid(&path, 0.05, 4).unwrap();
        assert_eq!(five.mask, again.mask);
        assert_eq!(five, again);
    }

    #[test]
    fn values_are_copied_row_major() {
        let text = "# lab run 7\n2 1\n0.1, 0.2\n# row 2\n0.3 -0.4\n";
        let (grid, values) = parse_external_grid(text, "t").unwrap();
        assert_eq!(grid.extent, 1.0);
        assert_eq!(values, vec![0.1, 0.2, 0.3, -0.4]);
        let img = subsample_external(&grid, &values, 1.0, 0, "x").unwrap();
        assert_eq!(img.estimates, values);
    }

    #[test]
    fn malformed_files_name_the_location() {
        let err = parse_external_grid("2\n0.1 0.2\n0.3 zz\n", "g").unwrap_err();
        assert!(err.to_string().contains("g:3"), "{err}");
        let err = parse_external_grid("2\n0.1 0.2\n0.3\n", "g").unwrap_err();
        assert!(err.to_string().contains("expected 4"), "{err}");
        let err = parse_external_grid("2\n0.1 0.2\n0.3 0.4 0.5\n", "g").unwrap_err();
        assert!(err.to_string().contains("more than"), "{err}");
        let err = parse_external_grid("2\n0.1 0.2\n0.3 0.9\n", "g").unwrap_err();
        assert!(err.to_string().contains("pixel 3"), "{err}");
        assert!(parse_external_grid("", "g").is_err());
        assert!(parse_external_grid("x\n", "g").is_err());
    }
}
