//! Paired runs of one problem under loose inner tolerances and under iterative
//! exact inner solves, compared by outer and inner iteration counts.

use std::fmt::Write as _;
use std::time::Instant;

use crate::driver::{solve, InnerMode, SolveStatus, SolverConfig};
use crate::error::Result;
use crate::sparse::SparseMatrix;

/// Loose tolerances compared against the iterative exact run.
pub const MIMIC_EPS: [f64; 2] = [1e-3, 1e-4];

#[derive(Clone, Debug)]
pub struct ModeRun {
    pub label: String,
    pub config: SolverConfig,
    pub outer: usize,
    pub inner: usize,
    pub capped: usize,
    pub secs: f64,
    pub status: SolveStatus,
    pub thetas: Vec<f64>,
}

/// Runs in the order of [`MIMIC_EPS`], then the iterative exact run.
#[derive(Clone, Debug)]
pub struct MimicReport {
    pub runs: Vec<ModeRun>,
}

/// The outer-count tolerance: `|I_out - I_out_exact| <= max(3, 0.15 I_out_exact)`.
pub fn outer_counts_agree(inexact: usize, exact: usize) -> bool {
    (inexact as f64 - exact as f64).abs() <= (0.15 * exact as f64).max(3.0)
}

impl MimicReport {
    pub fn exact(&self) -> &ModeRun {
        self.runs.last().expect("report holds the exact run")
    }

    pub fn inexact(&self) -> &[ModeRun] {
        &self.runs[..self.runs.len() - 1]
    }

    /// `I_in(inexact) / I_in(exact)` per loose tolerance.
    pub fn inner_ratios(&self) -> Vec<f64> {
        let e = self.exact().inner.max(1) as f64;
        self.inexact().iter().map(|r| r.inner as f64 / e).collect()
    }

    pub fn outer_agreement(&self) -> Vec<bool> {
        let e = self.exact().outer;
        self.inexact().iter().map(|r| outer_counts_agree(r.outer, e)).collect()
    }

    /// Plain-text comparison table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>7} {:>9} {:>7} {:>9} {:>10} {:>12}",
            "mode", "I_out", "I_in", "capped", "secs", "in_ratio", "status"
        );
        let e = self.exact().inner.max(1) as f64;
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:<12} {:>7} {:>9} {:>7} {:>9.3} {:>10.3} {:>12}",
                r.label,
                r.outer,
                r.inner,
                r.capped,
                r.secs,
                r.inner as f64 / e,
                format!("{:?}", r.status)
            );
        }
        s
    }
}

fn run_mode(a: &SparseMatrix, config: SolverConfig, label: String) -> Result<ModeRun> {
    let t = Instant::now();
    let sol = solve(a, &config)?;
    Ok(ModeRun {
        label,
        outer: sol.outer_iterations(),
        inner: sol.inner_iterations(),
        capped: sol.history.capped_solves(),
        secs: t.elapsed().as_secs_f64(),
        status: sol.status,
        thetas: sol.triplets.iter().map(|t| t.theta).collect(),
        config,
    })
}

fn mode_configs(base: &SolverConfig) -> Vec<(SolverConfig, String)> {
    let mut out: Vec<(SolverConfig, String)> = MIMIC_EPS
        .iter()
        .map(|&e| {
            let c = SolverConfig {
                eps_tilde: e,
                inner_mode: InnerMode::Inexact,
                ..base.clone()
            };
            (c, format!("eps={e:e}"))
        })
        .collect();
    out.push((
        SolverConfig {
            inner_mode: InnerMode::IterExact,
            ..base.clone()
        },
        "iter-exact".to_string(),
    ));
    out
}

/// Solves the problem of `base` in every mode. With `concurrent`, the modes run on
/// scoped threads sharing `a`.
pub fn mimic(a: &SparseMatrix, base: &SolverConfig, concurrent: bool) -> Result<MimicReport> {
    base.validate()?;
    let configs = mode_configs(base);
    let runs = if concurrent {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .into_iter()
                .map(|(c, l)| scope.spawn(move || run_mode(a, c, l)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("mode thread panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        configs
            .into_iter()
            .map(|(c, l)| run_mode(a, c, l))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(MimicReport { runs })
}
