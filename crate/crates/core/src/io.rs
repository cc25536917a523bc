//! Text format for sampled fields.
//!
//! ```text
//! # domain=whole
//! # dim=1
//! # alpha=2
//! # rho=1
//! # theta=0
//! # M=3000
//! # rmax=15
//! r,re,im
//! 2.5000000000000000e-3,1.4142091298519563e0,0.0000000000000000e0
//! ...
//! ```
//!
//! Extra `# key=value` lines (for instance `gamma` and `omega` of a path
//! point) are preserved in [`FieldFile::extra`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexRadialField, RealRadialField};
use crate::grid::RadialGrid;
use crate::params::{DomainKind, ProblemParams};

const STANDARD_KEYS: [&str; 7] = ["domain", "dim", "alpha", "rho", "theta", "M", "rmax"];

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub params: ProblemParams,
    pub grid: RadialGrid,
    pub field: ComplexRadialField,
    pub extra: BTreeMap<String, String>,
}

impl FieldFile {
    pub fn new(params: ProblemParams, grid: RadialGrid, field: ComplexRadialField) -> Result<Self> {
        if field.grid_key() != grid.key() {
            return Err(Error::FieldGridMismatch);
        }
        Ok(FieldFile {
            params,
            grid,
            field,
            extra: BTreeMap::new(),
        })
    }

    pub fn from_real(params: ProblemParams, grid: RadialGrid, field: &RealRadialField) -> Result<Self> {
        Self::new(params, grid, field.to_complex())
    }

    pub fn with_extra(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn extra_f64(&self, key: &str) -> Result<Option<f64>> {
        self.extra
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value for {key}: {v}")))
            })
            .transpose()
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "# domain={}", p.domain);
        let _ = writeln!(s, "# dim={}", p.dim);
        let _ = writeln!(s, "# alpha={}", p.alpha);
        let _ = writeln!(s, "# rho={}", p.rho);
        let _ = writeln!(s, "# theta={}", p.theta);
        let _ = writeln!(s, "# M={}", self.grid.points());
        let _ = writeln!(s, "# rmax={}", self.grid.rmax());
        for (k, v) in &self.extra {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("r,re,im\n");
        for (r, z) in self.grid.nodes().iter().zip(self.field.values()) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r, z.re, z.im);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", lineno + 1)))?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            if line.starts_with('r') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected r,re,im", lineno + 1)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", lineno + 1)))
            };
            rows.push((num(cols[0])?, num(cols[1])?, num(cols[2])?));
        }
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Parse(format!("missing header field {k}")))
        };
        let float = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Parse(format!("bad header value for {k}")))
        };
        let domain: DomainKind = get("domain")?.parse()?;
        let dim: usize = get("dim")?
            .parse()
            .map_err(|_| Error::Parse("bad header value for dim".into()))?;
        let points: usize = get("M")?
            .parse()
            .map_err(|_| Error::Parse("bad header value for M".into()))?;
        let alpha = float("alpha")?;
        let mut params = ProblemParams {
            domain,
            dim,
            alpha,
            rho: float("rho")?,
            theta: float("theta")?,
            allow_small_alpha: alpha < 1.0,
        };
        params.validate()?;
        params.allow_small_alpha = alpha < 1.0;
        let grid = RadialGrid::new(domain, dim, points, float("rmax")?)?;
        if rows.len() != points {
            return Err(Error::Parse(format!(
                "header says M={points} but the file has {} rows",
                rows.len()
            )));
        }
        let tol = 1e-9 * grid.spacing();
        for (i, ((r, _, _), node)) in rows.iter().zip(grid.nodes()).enumerate() {
            if (r - node).abs() > tol {
                return Err(Error::Parse(format!(
                    "row {}: radius {r} does not match grid node {node}",
                    i + 1
                )));
            }
        }
        let field = ComplexRadialField::new(
            &grid,
            rows.iter().map(|&(_, a, b)| Complex64::new(a, b)).collect(),
        )?;
        let extra = meta
            .into_iter()
            .filter(|(k, _)| !STANDARD_KEYS.contains(&k.as_str()))
            .collect();
        Ok(FieldFile {
            params,
            grid,
            field,
            extra,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
