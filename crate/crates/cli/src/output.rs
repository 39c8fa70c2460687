//! CSV artifacts. Floats use Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use queue_pricing::controller::Trajectory;
use queue_pricing::queue::CycleRecord;
use queue_pricing::regret::{Checkpoint, Decomposition, RegretReport, SweepRow};

use crate::Failure;

pub const TRAJECTORY: [&str; 9] = [
    "cycle", "mu", "p", "h_mu", "h_p", "D_k", "T_k", "cost", "M_k",
];
pub const TRACE: [&str; 7] = [
    "cycle",
    "n",
    "wait",
    "busy_age",
    "service",
    "interarrival",
    "price_paid",
];
pub const REGRET: [&str; 5] = [
    "checkpoint",
    "M_L",
    "regret_mean",
    "regret_se",
    "sqrt_regret",
];
pub const SUMMARY: [&str; 4] = ["c", "d", "r2", "replications"];
pub const DECOMPOSITION: [&str; 6] = ["checkpoint", "M_L", "r1_mean", "r1_se", "r2_mean", "r2_se"];
pub const SWEEP: [&str; 4] = ["n", "p_n", "mu_n_over_n", "rho_n"];

pub struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record(header)?;
        Ok(Self { path, writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), Failure> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, Failure> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

macro_rules! fields {
    ($($v:expr),* $(,)?) => { [$($v.to_string()),*] };
}

/// Per-cycle averages across replications.
pub fn write_trajectory(dir: &Path, runs: &[Trajectory]) -> Result<PathBuf, Failure> {
    let mut t = Table::create(dir, "trajectory.csv", &TRAJECTORY)?;
    let n = runs.len() as f64;
    let mean = |k: usize, f: &dyn Fn(&queue_pricing::controller::CycleSummary) -> f64| {
        runs.iter().map(|r| f(&r.cycles[k])).sum::<f64>() / n
    };
    for (k, first) in runs[0].cycles.iter().enumerate() {
        t.row(&fields![
            first.cycle,
            mean(k, &|c| c.policy.mu),
            mean(k, &|c| c.policy.p),
            mean(k, &|c| c.gradient.h_mu),
            mean(k, &|c| c.gradient.h_p),
            first.d_k,
            mean(k, &|c| c.t_k),
            mean(k, &|c| c.cost),
            first.served,
        ])?;
    }
    t.finish()
}

pub struct TraceWriter {
    table: Table,
}

impl TraceWriter {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        Ok(Self {
            table: Table::create(dir, "trace.csv", &TRACE)?,
        })
    }

    pub fn cycle(&mut self, cycle: usize, rec: &CycleRecord) -> Result<(), Failure> {
        for n in 1..=rec.d_k {
            self.table.row(&fields![
                cycle,
                n,
                rec.waits[n - 1],
                rec.busy_ages[n - 1],
                rec.services[n - 1],
                rec.interarrivals[n - 1],
                rec.price_paid(n),
            ])?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, Failure> {
        self.table.finish()
    }
}

pub fn write_regret(dir: &Path, report: &RegretReport) -> Result<Vec<PathBuf>, Failure> {
    let mut t = Table::create(dir, "regret.csv", &REGRET)?;
    for c in &report.checkpoints {
        t.row(&fields![c.cycle, c.m_l, c.mean, c.se, c.sqrt_regret()])?;
    }
    let mut s = Table::create(dir, "regret_summary.csv", &SUMMARY)?;
    s.row(&fields![
        report.fit.slope,
        report.fit.intercept,
        report.fit.r2,
        report.replications
    ])?;
    Ok(vec![t.finish()?, s.finish()?])
}

pub fn write_decomposition(dir: &Path, d: &Decomposition) -> Result<PathBuf, Failure> {
    let mut t = Table::create(dir, "decomposition.csv", &DECOMPOSITION)?;
    for (a, b) in d.r1.iter().zip(&d.r2) {
        let Checkpoint { cycle, m_l, .. } = *a;
        t.row(&fields![cycle, m_l, a.mean, a.se, b.mean, b.se])?;
    }
    t.finish()
}

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<PathBuf, Failure> {
    let mut t = Table::create(dir, "sweep.csv", &SWEEP)?;
    for r in rows {
        t.row(&fields![r.n, r.p_n, r.mu_n_over_n, r.rho_n])?;
    }
    t.finish()
}
