//! Cross-run reporting: aligned, smoothed learning curves with mean and
//! sample standard deviation across seeds, plateau markers, final-return
//! comparisons and ignorance matrices. Everything is written as CSV or
//! plain text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{GslError, Result};
use crate::metrics::read_metrics;
use crate::orchestrator::{method_name, return_curve, RunDir, RunReport};
use crate::plateau::smooth_returns;

/// One run directory as seen by the reporter.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub report: RunReport,
    /// Metrics file stem to its smoothed return curve and sample counts.
    pub curves: BTreeMap<String, (Vec<f64>, Vec<u64>)>,
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self> {
        let rd = RunDir::open(dir)?;
        let config = ExperimentConfig::from_toml(&fs::read_to_string(rd.config())?)?;
        let report = RunReport::load(&rd.report())?;
        let mut curves = BTreeMap::new();
        let mdir = dir.join("metrics");
        if mdir.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&mdir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            for f in files {
                let rows = read_metrics(&f)?;
                let stem = f.file_stem().expect("csv file").to_string_lossy().into_owned();
                let smoothed = smooth_returns(&return_curve(&rows), config.plateau.kernel);
                let samples = rows.iter().map(|r| r.total_samples).collect();
                curves.insert(stem, (smoothed, samples));
            }
        }
        Ok(RunData {
            dir: dir.to_path_buf(),
            config,
            report,
            curves,
        })
    }

    /// `kind/method`, the key runs are grouped by.
    pub fn group(&self) -> String {
        format!("{}-{}", self.report.kind, method_name(self.report.method))
    }

    /// Final evaluation return: after consolidation when present, else
    /// after phase I.
    pub fn final_return(&self) -> Option<f64> {
        self.report
            .after
            .as_ref()
            .or(self.report.before.as_ref())
            .map(|r| r.mean_return())
    }

    pub fn final_success(&self) -> Option<f64> {
        self.report
            .after
            .as_ref()
            .or(self.report.before.as_ref())
            .map(|r| r.success_rate())
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One aligned series: row `i` aggregates epoch `i` of every run that has it.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub epoch: usize,
    /// Mean position on the x axis as a percentage of the total budget.
    pub x_percent: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn aligned_series(curves: &[(&[f64], &[u64], u64)]) -> Vec<SeriesPoint> {
    let len = curves.iter().map(|c| c.0.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let here: Vec<_> = curves.iter().filter(|c| i < c.0.len()).collect();
            let ys: Vec<f64> = here.iter().map(|c| c.0[i]).collect();
            let xs: Vec<f64> = here.iter().map(|c| 100.0 * c.1[i] as f64 / c.2.max(1) as f64).collect();
            let (mean, std) = mean_std(&ys);
            SeriesPoint {
                epoch: i,
                x_percent: xs.iter().sum::<f64>() / xs.len() as f64,
                mean,
                std,
                n: ys.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: String,
    pub runs: usize,
    pub final_mean: f64,
    pub final_std: f64,
    pub success_mean: f64,
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub groups: Vec<GroupSummary>,
    /// `(group, metrics stem)` to its aligned series.
    pub series: BTreeMap<(String, String), Vec<SeriesPoint>>,
    pub files: Vec<PathBuf>,
}

/// Aggregate `dirs` into `out`. Runs on different environments are refused.
pub fn report(dirs: &[PathBuf], out: &Path) -> Result<ReportOutput> {
    if dirs.is_empty() {
        return Err(GslError::config("report needs at least one run directory"));
    }
    let runs: Vec<RunData> = dirs.iter().map(|d| RunData::load(d)).collect::<Result<_>>()?;
    let env = &runs[0].report.env;
    if let Some(other) = runs.iter().find(|r| &r.report.env != env) {
        return Err(GslError::config(format!(
            "cannot aggregate runs on different environments ('{env}' and '{}')",
            other.report.env
        )));
    }
    fs::create_dir_all(out)?;
    let mut files = Vec::new();

    let mut groups: BTreeMap<String, Vec<&RunData>> = BTreeMap::new();
    for r in &runs {
        groups.entry(r.group()).or_default().push(r);
    }

    let mut series = BTreeMap::new();
    for (g, members) in &groups {
        let mut stems: Vec<&String> = members.iter().flat_map(|r| r.curves.keys()).collect();
        stems.sort();
        stems.dedup();
        for stem in stems {
            let curves: Vec<(&[f64], &[u64], u64)> = members
                .iter()
                .filter_map(|r| {
                    r.curves
                        .get(stem)
                        .map(|(y, x)| (y.as_slice(), x.as_slice(), r.config.gsl.total_steps))
                })
                .collect();
            let s = aligned_series(&curves);
            let path = out.join(format!("series_{g}_{stem}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["epoch", "x_percent", "mean_return", "std_return", "n"])?;
            for p in &s {
                w.write_record([
                    p.epoch.to_string(),
                    p.x_percent.to_string(),
                    p.mean.to_string(),
                    p.std.to_string(),
                    p.n.to_string(),
                ])?;
            }
            w.flush()?;
            files.push(path);
            series.insert((g.clone(), stem.clone()), s);
        }
    }

    let runs_path = out.join("runs.csv");
    let mut w = csv::Writer::from_path(&runs_path)?;
    w.write_record([
        "dir",
        "group",
        "seed",
        "trigger_epoch",
        "trigger_percent",
        "total_steps",
        "final_return",
        "final_success",
    ])?;
    for r in &runs {
        let per_epoch = r.report.samples_per_epoch as f64;
        let trigger_pct = r
            .report
            .trigger_epoch
            .map(|t| 100.0 * (t + 1) as f64 * per_epoch / r.config.gsl.total_steps.max(1) as f64);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            r.dir.display().to_string(),
            r.group(),
            r.report.seed.to_string(),
            r.report.trigger_epoch.map(|t| t.to_string()).unwrap_or_default(),
            opt(trigger_pct),
            r.report.total_steps.to_string(),
            opt(r.final_return()),
            opt(r.final_success()),
        ])?;
    }
    w.flush()?;
    files.push(runs_path);

    let mut summaries = Vec::new();
    let cmp_path = out.join("comparison.csv");
    let mut w = csv::Writer::from_path(&cmp_path)?;
    w.write_record([
        "group",
        "runs",
        "final_return_mean",
        "final_return_std",
        "final_success_mean",
    ])?;
    for (g, members) in &groups {
        let finals: Vec<f64> = members.iter().filter_map(|r| r.final_return()).collect();
        let succ: Vec<f64> = members.iter().filter_map(|r| r.final_success()).collect();
        if finals.is_empty() {
            continue;
        }
        let (m, s) = mean_std(&finals);
        let summary = GroupSummary {
            group: g.clone(),
            runs: members.len(),
            final_mean: m,
            final_std: s,
            success_mean: mean_std(&succ).0,
        };
        w.write_record([
            g.clone(),
            summary.runs.to_string(),
            m.to_string(),
            s.to_string(),
            summary.success_mean.to_string(),
        ])?;
        summaries.push(summary);
    }
    w.flush()?;
    files.push(cmp_path);

    let mut text = String::new();
    for r in &runs {
        for (label, ign) in [
            ("after phase I", &r.report.ignorance_before),
            ("final", &r.report.ignorance_after),
        ] {
            if let Some(ign) = ign {
                let _ = writeln!(text, "{} ({label})", r.dir.display());
                text.push_str(&ign.render());
                text.push('\n');
            }
        }
    }
    if !text.is_empty() {
        let p = out.join("ignorance.txt");
        fs::write(&p, text)?;
        files.push(p);
    }

    Ok(ReportOutput {
        groups: summaries,
        series,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_of_three_curves() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 4.0, 6.0];
        let c = [3.0, 6.0];
        let x = [10u64, 20, 30];
        let s = aligned_series(&[(&a, &x, 100), (&b, &x, 100), (&c, &x[..2], 100)]);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].mean, 2.0);
        assert_eq!(s[0].std, 1.0);
        assert_eq!(s[1].std, 2.0);
        assert_eq!(s[2].n, 2);
        assert!((s[2].std - (4.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(s[1].x_percent, 20.0);
    }
}
