//! Residual and orthogonality measurements over the generated test classes.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csd::{csd, Branch, CsdOptions};
use crate::error::{Error, Result};
use crate::isometry::stability_report;
use crate::testgen::{TestCase, TestClass};

/// Sizes `nint(30 * 2^(j/2))` for `j = 0..count`.
pub fn default_sizes(count: usize) -> Vec<usize> {
    (0..count)
        .map(|j| (30.0 * 2f64.powf(j as f64 / 2.0)).round() as usize)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub classes: Vec<TestClass>,
    /// Run the perturbed variant of each class instead of the exact one.
    pub noisy: bool,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub options: CsdOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            classes: TestClass::ALL.to_vec(),
            noisy: false,
            sizes: default_sizes(5),
            seeds: vec![1, 2, 3],
            options: CsdOptions::default(),
        }
    }
}

impl BenchConfig {
    pub fn cases(&self) -> Result<Vec<TestCase>> {
        let mut out = Vec::new();
        for &class in &self.classes {
            for &n in &self.sizes {
                for &seed in &self.seeds {
                    out.push(TestCase::new(class, self.noisy, n, seed)?);
                }
            }
        }
        Ok(out)
    }
}

/// One measured test matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub class: u8,
    pub noisy: bool,
    pub n: usize,
    pub seed: u64,
    pub k: usize,
    pub branch: Branch,
    pub d_of_a: f64,
    pub residual: f64,
    pub scaled_residual: f64,
    pub orth_u1: f64,
    pub orth_u2: f64,
    pub orth_v1: f64,
    pub cs_identity_err: f64,
    pub seconds: f64,
}

impl BenchRow {
    /// `1`, `2'`, ...
    pub fn label(&self) -> String {
        format!("{}{}", self.class, if self.noisy { "'" } else { "" })
    }
}

pub fn run_case(case: &TestCase, opts: &CsdOptions) -> Result<BenchRow> {
    let a = case.generate()?;
    let start = Instant::now();
    let r = csd(&a, case.n, opts)?;
    let seconds = start.elapsed().as_secs_f64();
    let rep = stability_report(&a, &r)?;
    Ok(BenchRow {
        class: case.class.id(),
        noisy: case.noisy,
        n: case.n,
        seed: case.seed,
        k: r.k(),
        branch: r.branch,
        d_of_a: rep.d_of_a,
        residual: rep.residual_2norm,
        scaled_residual: rep.scaled_residual,
        orth_u1: rep.orth_u1,
        orth_u2: rep.orth_u2,
        orth_v1: rep.orth_v1,
        cs_identity_err: rep.cs_identity_err,
        seconds,
    })
}

/// Rows ordered by (class, n, seed), computed concurrently.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.seeds.is_empty() || cfg.classes.is_empty() {
        return Err(Error::InvalidArgument("empty benchmark grid".into()));
    }
    cfg.options.validate()?;
    cfg.cases()?
        .par_iter()
        .map(|case| run_case(case, &cfg.options))
        .collect()
}

pub const TABLE_HEADER: [&str; 11] = [
    "class", "n", "seed", "k", "d(A)", "res/d(A)", "orthU1/u", "orthU2/u", "orthV1/u", "residual", "time(s)",
];

fn cells(r: &BenchRow) -> [String; 11] {
    [
        r.label(),
        r.n.to_string(),
        r.seed.to_string(),
        r.k.to_string(),
        format!("{:.2e}", r.d_of_a),
        format!("{:.2e}", r.scaled_residual),
        format!("{:.2e}", r.orth_u1),
        format!("{:.2e}", r.orth_u2),
        format!("{:.2e}", r.orth_v1),
        format!("{:.2e}", r.residual),
        format!("{:.3}", r.seconds),
    ]
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let body: Vec<[String; 11]> = rows.iter().map(cells).collect();
    let widths: Vec<usize> = (0..11)
        .map(|c| body.iter().map(|r| r[c].len()).chain([TABLE_HEADER[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cols: &[&str]| {
        cols.iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(&TABLE_HEADER);
    out.push('\n');
    for r in &body {
        out.push_str(&line(&r.iter().map(String::as_str).collect::<Vec<_>>()));
        out.push('\n');
    }
    out
}

pub fn format_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("class,noisy,n,seed,k,branch,d_of_a,scaled_residual,orth_u1,orth_u2,orth_v1,residual,cs_identity_err,seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.class,
            r.noisy,
            r.n,
            r.seed,
            r.k,
            r.branch,
            r.d_of_a,
            r.scaled_residual,
            r.orth_u1,
            r.orth_u2,
            r.orth_v1,
            r.residual,
            r.cs_identity_err,
            r.seconds
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_sizes() {
        assert_eq!(default_sizes(5), vec![30, 42, 60, 85, 120]);
    }

    #[test]
    fn single_row() {
        let cfg = BenchConfig {
            classes: vec![TestClass::Haar],
            sizes: vec![8],
            seeds: vec![1],
            ..BenchConfig::default()
        };
        let rows = run_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].orth_u1 <= 50.0 * 8.0);
        assert!(format_table(&rows).lines().count() == 2);
        assert!(format_csv(&rows).lines().count() == 2);
    }
}
