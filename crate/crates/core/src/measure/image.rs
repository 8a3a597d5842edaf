//! Partially-sampled Wigner images and their text format.
//!
//! ```text
//! # cvverify data-image
//! format_version = 1
//! side = 32
//! extent = 3
//! fraction = 0.75
//! shots = 300                 (or `external`)
//! seed = 1234
//! state = cat2(1.5+0i)
//! affine = none               (or `phi dx dp zeta`)
//! present = 768
//! pixel_index, x, p, estimate
//! 17, -2.0624999999999998e0, -2.9062500000000000e0, 1.2732395447351627e-1
//! ...
//! ```
//!
//! Header keys appear in exactly this order. Records list present pixels in
//! increasing index order; floats carry 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AffineParams, GridSpec};
use crate::error::{Error, Result};

pub const IMAGE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shots {
    Count(u32),
    /// Values imported from an external grid; repetition count unknown.
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataImage {
    pub grid: GridSpec,
    pub mask: Vec<bool>,
    /// Zero where the mask is false.
    pub estimates: Vec<f64>,
    pub shots: Shots,
    pub fraction: f64,
    pub seed: u64,
    pub descriptor: String,
    pub affine: Option<AffineParams>,
}

impl DataImage {
    pub fn side(&self) -> usize {
        self.grid.side
    }

    pub fn present_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn present_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let shots = match self.shots {
            Shots::Count(n) => n.to_string(),
            Shots::External => "external".to_string(),
        };
        let affine = match &self.affine {
            None => "none".to_string(),
            Some(a) => format!("{} {} {} {}", a.phi, a.dx, a.dp, a.zeta),
        };
        s.push_str("# cvverify data-image\n");
        let _ = writeln!(s, "format_version = {IMAGE_FORMAT_VERSION}");
        let _ = writeln!(s, "side = {}", self.grid.side);
        let _ = writeln!(s, "extent = {}", self.grid.extent);
        let _ = writeln!(s, "fraction = {}", self.fraction);
        let _ = writeln!(s, "shots = {shots}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "state = {}", self.descriptor);
        let _ = writeln!(s, "affine = {affine}");
        let _ = writeln!(s, "present = {}", self.present_count());
        s.push_str("pixel_index, x, p, estimate\n");
        for i in self.present_indices() {
            let (x, p) = self.grid.coords(i);
            let _ = writeln!(s, "{i}, {x:.16e}, {p:.16e}, {:.16e}", self.estimates[i]);
        }
        s
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let loc = |line: usize| format!("{origin}:{}", line + 1);
        match lines.next() {
            Some((_, "# cvverify data-image")) => {}
            _ => return Err(Error::parse(loc(0), "missing data-image banner")),
        }
        let keys = [
            "format_version",
            "side",
            "extent",
            "fraction",
            "shots",
            "seed",
            "state",
            "affine",
            "present",
        ];
        let mut values = Vec::with_capacity(keys.len());
        for key in keys {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(origin, format!("missing header key `{key}`")))?;
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::parse(loc(n), "expected `key = value`"))?;
            if k != key {
                return Err(Error::parse(loc(n), format!("expected key `{key}`, found `{k}`")));
            }
            values.push((n, v.to_string()));
        }
        fn num<T: std::str::FromStr>(v: &(usize, String), origin: &str) -> Result<T> {
            v.1.parse()
                .map_err(|_| Error::parse(format!("{origin}:{}", v.0 + 1), format!("bad value `{}`", v.1)))
        }
        let version: u32 = num(&values[0], origin)?;
        if version != IMAGE_FORMAT_VERSION {
            return Err(Error::parse(loc(values[0].0), format!("unsupported format version {version}")));
        }
        let grid = GridSpec::new(num(&values[1], origin)?, num(&values[2], origin)?)
            .map_err(|e| Error::parse(loc(values[1].0), e.to_string()))?;
        let fraction: f64 = num(&values[3], origin)?;
        let shots = if values[4].1 == "external" {
            Shots::External
        } else {
            Shots::Count(num(&values[4], origin)?)
        };
        let seed: u64 = num(&values[5], origin)?;
        let descriptor = values[6].1.clone();
        let affine = if values[7].1 == "none" {
            None
        } else {
            let parts: Vec<f64> = values[7]
                .1
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(loc(values[7].0), "bad affine parameters"))?;
            if parts.len() != 4 {
                return Err(Error::parse(loc(values[7].0), "affine needs 4 numbers"));
            }
            Some(AffineParams {
                phi: parts[0],
                dx: parts[1],
                dp: parts[2],
                zeta: parts[3],
            })
        };
        let present: usize = num(&values[8], origin)?;
        match lines.next() {
            Some((_, "pixel_index, x, p, estimate")) => {}
            Some((n, _)) => return Err(Error::parse(loc(n), "missing record header")),
            None => return Err(Error::parse(origin, "missing record header")),
        }

        let mut mask = vec![false; grid.pixels()];
        let mut estimates = vec![0.0; grid.pixels()];
        let mut count = 0;
        let mut last: Option<usize> = None;
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::parse(loc(n), "record needs 4 fields"));
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(loc(n), "bad pixel index"))?;
            if idx >= grid.pixels() || last.is_some_and(|l| idx <= l) {
                return Err(Error::parse(loc(n), format!("pixel index {idx} out of range or order")));
            }
            let est: f64 = fields[3]
                .parse()
                .map_err(|_| Error::parse(loc(n), "bad estimate"))?;
            if !est.is_finite() {
                return Err(Error::parse(loc(n), "non-finite estimate"));
            }
            mask[idx] = true;
            estimates[idx] = est;
            last = Some(idx);
            count += 1;
        }
        if count != present {
            return Err(Error::parse(
                origin,
                format!("header declares {present} pixels, found {count}"),
            ));
        }
        Ok(Self {
            grid,
            mask,
            estimates,
            shots,
            fraction,
            seed,
            descriptor,
            affine,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}
