use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::fmt17;
use crate::cayley::{Ball, GroupSpec};
use crate::error::{invalid, Error, Result};
use crate::kernel::{riesz_kernel, spectral_decompose};

use super::{maximize, Family, Problem, SolveConfig};

pub const SWEEP_HEADER: &str = "family,N,alpha,p,radius,K_hat,lambda,residual,status,label";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub family: Family,
    pub group: GroupSpec,
    pub p_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub radii: Vec<u32>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.p_values.len() * self.alpha_values.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: Family,
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
    pub radius: u32,
    pub k_hat: f64,
    pub lambda: f64,
    pub residual: f64,
    /// A solver status, or `Failed`.
    pub status: String,
    pub label: String,
    pub error: Option<String>,
}

/// How `K_hat` moves with the radius at one `(p, alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTrend {
    pub alpha: f64,
    pub p: f64,
    pub label: String,
    pub radii: Vec<u32>,
    pub k_hat: Vec<f64>,
    /// Relative growth from the smallest to the largest radius.
    pub relative_growth: f64,
    pub grows: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub rows: Vec<SweepRow>,
    pub trends: Vec<SweepTrend>,
}

/// One [`maximize`] run per grid point, rows ordered by `(p, alpha, radius)`.
///
/// Out-of-theorem points run with their label; a failing run becomes a
/// `Failed` row and the sweep continues.
pub fn sweep(grid: &SweepGrid, config: &SolveConfig) -> Result<SweepResult> {
    if grid.is_empty() {
        return invalid("sweep grid is empty");
    }
    config.validate()?;
    let n = grid.group.homogeneous_dimension();
    let mut radii = grid.radii.clone();
    radii.sort_unstable();
    radii.dedup();
    let mut by_key: BTreeMap<(usize, usize, u32), SweepRow> = BTreeMap::new();
    for &radius in &radii {
        let points: Vec<(usize, usize)> = (0..grid.p_values.len())
            .flat_map(|i| (0..grid.alpha_values.len()).map(move |j| (i, j)))
            .collect();
        let setup = Ball::centered(grid.group, radius).and_then(|b| spectral_decompose(&b));
        let rows: Vec<SweepRow> = points
            .par_iter()
            .map(|&(i, j)| {
                let (p, alpha) = (grid.p_values[i], grid.alpha_values[j]);
                let base = SweepRow {
                    family: grid.family,
                    n,
                    alpha,
                    p,
                    radius,
                    k_hat: f64::NAN,
                    lambda: f64::NAN,
                    residual: f64::NAN,
                    status: "Failed".into(),
                    label: grid.family.admissibility(n, alpha, p).label().into(),
                    error: None,
                };
                let run = || -> Result<SweepRow> {
                    let spectral = setup.as_ref().map_err(|e| Error::Numerical(format!("radius {radius}: {e}")))?;
                    let kernel = Arc::new(riesz_kernel(spectral, alpha)?);
                    let problem = Problem::labeled(grid.family, kernel, p)?;
                    let r = maximize(&problem, config)?;
                    Ok(SweepRow {
                        k_hat: r.k_hat,
                        lambda: r.lambda,
                        residual: r.residual,
                        status: format!("{:?}", r.status),
                        label: problem.label().into(),
                        ..base.clone()
                    })
                };
                run().unwrap_or_else(|e| SweepRow { error: Some(e.to_string()), ..base.clone() })
            })
            .collect();
        for (&(i, j), row) in points.iter().zip(rows) {
            by_key.insert((i, j, radius), row);
        }
    }
    // Rows follow the caller's grid order.
    let mut rows = Vec::with_capacity(grid.len());
    for i in 0..grid.p_values.len() {
        for j in 0..grid.alpha_values.len() {
            for &radius in &grid.radii {
                rows.push(by_key[&(i, j, radius)].clone());
            }
        }
    }
    let mut trends = Vec::new();
    for i in 0..grid.p_values.len() {
        for j in 0..grid.alpha_values.len() {
            let pts: Vec<&SweepRow> = radii.iter().map(|r| &by_key[&(i, j, *r)]).filter(|r| r.error.is_none()).collect();
            if pts.len() < 2 {
                continue;
            }
            let (first, last) = (pts[0].k_hat, pts[pts.len() - 1].k_hat);
            let relative_growth = (last - first) / first.abs();
            trends.push(SweepTrend {
                alpha: grid.alpha_values[j],
                p: grid.p_values[i],
                label: pts[0].label.clone(),
                radii: pts.iter().map(|r| r.radius).collect(),
                k_hat: pts.iter().map(|r| r.k_hat).collect(),
                relative_growth,
                grows: relative_growth > 1e-9,
            });
        }
    }
    Ok(SweepResult { grid: grid.clone(), rows, trends })
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.family,
                r.n,
                r.alpha,
                r.p,
                r.radius,
                fmt17(r.k_hat),
                fmt17(r.lambda),
                fmt17(r.residual),
                r.status,
                r.label
            )?;
        }
        Ok(())
    }

    /// Write `{stem}.csv` and a JSON sidecar with trends and per-row errors.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&csv)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, serde_json::to_string_pretty(self)?)?;
        Ok(vec![csv, json])
    }
}
