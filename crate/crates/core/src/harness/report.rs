//! Run metrics, trace files and the comparison report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ControllerKind, HarnessError, LogRow, RunLog, RunMeta};

/// Nominal frequency added for display.
pub const NOMINAL_HZ: f64 = 60.0;

/// Plain decimal with 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.11e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    let (int, frac) = if exp >= 0 {
        let e = exp as usize + 1;
        if e >= digits.len() {
            (format!("{digits}{}", "0".repeat(e - digits.len())), String::new())
        } else {
            (digits[..e].to_string(), digits[e..].to_string())
        }
    } else {
        ("0".to_string(), format!("{}{digits}", "0".repeat((-exp - 1) as usize)))
    };
    let frac = frac.trim_end_matches('0');
    let sign = if x < 0.0 { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn trapezoid(rows: &[LogRow], f: impl Fn(&LogRow) -> f64) -> f64 {
    rows.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (f(&w[0]) + f(&w[1]))).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub controller: ControllerKind,
    pub steps: usize,
    /// ∫|u_i| dt per bus of I_u.
    pub input_abs_integral: Vec<f64>,
    /// ∫ Σ_{I_u} u_i dt.
    pub input_total_integral: f64,
    pub injection_deviation_integral: f64,
    /// Σ c_i ∫ u_i² dt.
    pub control_cost: f64,
    /// Extremes per bus of I_ω.
    pub omega_min: Vec<f64>,
    pub omega_max: Vec<f64>,
    /// Log points outside the safe interval, per bus of I_ω.
    pub violations: Vec<usize>,
    /// First log time at or after the enable time inside the safe interval,
    /// per bus of I_ω.
    pub first_entry: Vec<Option<f64>>,
    /// Transitions from inside to outside after the first entry.
    pub exits_after_entry: Vec<usize>,
    /// Steps with u_i ≠ 0 while ω_i is strictly inside the threshold band.
    pub band_violations: usize,
    /// Steps with ω_i u_i > 0 outside the band.
    pub sign_violations: usize,
    /// Last log time with a nonzero input.
    pub last_active: Option<f64>,
    /// ‖ω(t_end) − ω^∞ 1‖_∞.
    pub final_residual: f64,
}

impl RunSummary {
    pub fn compute(log: &RunLog) -> Self {
        let meta = &log.meta;
        let rows = &log.rows;
        let nf = meta.freq_constrained.len();
        let mut omega_min = vec![f64::INFINITY; nf];
        let mut omega_max = vec![f64::NEG_INFINITY; nf];
        let mut violations = vec![0; nf];
        let mut first_entry = vec![None; nf];
        let mut exits = vec![0; nf];
        let mut inside_prev = vec![false; nf];
        let (mut band, mut sign) = (0, 0);
        let mut last_active = None;
        let enabled_from = meta.enable_time - 1e-9 * meta.period;
        for r in rows {
            for (s, (&i, &(lo, hi))) in meta.freq_constrained.iter().zip(&meta.bounds).enumerate() {
                let w = r.omega[i];
                omega_min[s] = omega_min[s].min(w);
                omega_max[s] = omega_max[s].max(w);
                let inside = lo <= w && w <= hi;
                if !inside {
                    violations[s] += 1;
                    if first_entry[s].is_some() && inside_prev[s] {
                        exits[s] += 1;
                    }
                } else if first_entry[s].is_none() && r.t >= enabled_from {
                    first_entry[s] = Some(r.t);
                }
                inside_prev[s] = inside;
            }
            for (&i, &(lo, hi)) in meta.controlled.iter().zip(&meta.thresholds) {
                let (w, u) = (r.omega[i], r.u[i]);
                if lo < w && w < hi {
                    band += usize::from(u != 0.0);
                } else {
                    sign += usize::from(w * u > 0.0);
                }
            }
            if r.u.iter().any(|&x| x != 0.0) {
                last_active = Some(r.t);
            }
        }
        let last = rows.last();
        Self {
            label: meta.label.clone(),
            controller: meta.controller,
            steps: rows.len(),
            input_abs_integral: meta.controlled.iter().map(|&i| trapezoid(rows, |r| r.u[i].abs())).collect(),
            input_total_integral: trapezoid(rows, |r| meta.controlled.iter().map(|&i| r.u[i]).sum()),
            injection_deviation_integral: meta.injection_deviation_integral,
            control_cost: meta
                .controlled
                .iter()
                .zip(&meta.input_weights)
                .map(|(&i, &c)| c * trapezoid(rows, |r| r.u[i] * r.u[i]))
                .sum(),
            omega_min,
            omega_max,
            violations,
            first_entry,
            exits_after_entry: exits,
            band_violations: band,
            sign_violations: sign,
            last_active,
            final_residual: last.map_or(0.0, |r| r.omega.iter().map(|w| (w - meta.sync_freq).abs()).fold(0.0, f64::max)),
        }
    }

    /// Fixed-width summary block.
    pub fn table(&self, meta: &RunMeta) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "run {} ({})", self.label, self.controller.name());
        let _ = writeln!(s, "  steps                {}", self.steps);
        let _ = writeln!(s, "  int u_total dt       {}", fmt_sig(self.input_total_integral));
        let _ = writeln!(s, "  int dp_total dt      {}", fmt_sig(self.injection_deviation_integral));
        let _ = writeln!(s, "  sum c int u^2 dt     {}", fmt_sig(self.control_cost));
        let _ = writeln!(s, "  band violations      {}", self.band_violations);
        let _ = writeln!(s, "  sign violations      {}", self.sign_violations);
        let _ = writeln!(s, "  last nonzero input   {}", self.last_active.map_or("never".into(), fmt_sig));
        let _ = writeln!(s, "  final residual       {}", fmt_sig(self.final_residual));
        let _ = writeln!(s, "  {:>6} {:>16} {:>16} {:>16} {:>10} {:>12} {:>6}", "bus", "int |u| dt", "min f (Hz)", "max f (Hz)", "violations", "first entry", "exits");
        for &i in &meta.controlled {
            let id = meta.bus_ids[i];
            let ui = meta.controlled.iter().position(|&b| b == i).map_or(0.0, |c| self.input_abs_integral[c]);
            match meta.freq_constrained.iter().position(|&b| b == i) {
                Some(f) => {
                    let _ = writeln!(
                        s,
                        "  {:>6} {:>16} {:>16} {:>16} {:>10} {:>12} {:>6}",
                        id,
                        fmt_sig(ui),
                        fmt_sig(NOMINAL_HZ + self.omega_min[f]),
                        fmt_sig(NOMINAL_HZ + self.omega_max[f]),
                        self.violations[f],
                        self.first_entry[f].map_or("never".into(), fmt_sig),
                        self.exits_after_entry[f],
                    );
                }
                None => {
                    let _ = writeln!(s, "  {:>6} {:>16} {:>16} {:>16} {:>10} {:>12} {:>6}", id, fmt_sig(ui), "-", "-", "-", "-", "-");
                }
            }
        }
        s
    }
}

const TRACE: &str = "trace.csv";
const SUMMARY: &str = "summary.txt";
const META: &str = "run.toml";

impl RunLog {
    pub fn trace_header(&self) -> String {
        let m = self.meta.line_ids.len();
        let n = self.meta.bus_ids.len();
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=m).map(|k| format!("lambda_{k}")));
        cols.extend((1..=n).map(|i| format!("omega_{i}")));
        cols.extend((1..=n).map(|i| format!("u_{i}")));
        cols.push("V".into());
        cols.join(",")
    }

    pub fn trace_csv(&self) -> String {
        let mut out = self.trace_header();
        out.push('\n');
        for r in &self.rows {
            let mut fields = Vec::with_capacity(2 + r.lambda.len() + 2 * r.omega.len());
            fields.push(fmt_sig(r.t));
            fields.extend(r.lambda.iter().chain(&r.omega).chain(&r.u).map(|&x| fmt_sig(x)));
            fields.push(fmt_sig(r.energy));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes `trace.csv`, `summary.txt` and the run metadata into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join(TRACE), self.trace_csv()).map_err(io)?;
        std::fs::write(dir.join(SUMMARY), self.summary().table(&self.meta)).map_err(io)?;
        let meta = toml::to_string(&self.meta).map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(dir.join(META), meta).map_err(io)
    }

    /// Reads a run back from its directory or its `trace.csv`.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let dir: PathBuf = if path.is_dir() { path.to_path_buf() } else { path.parent().unwrap_or(Path::new(".")).to_path_buf() };
        let trace_path = if path.is_dir() { dir.join(TRACE) } else { path.to_path_buf() };
        let err = |p: &Path, msg: String| HarnessError::Trace { path: p.display().to_string(), msg };
        let meta_text = std::fs::read_to_string(dir.join(META)).map_err(|e| err(&dir.join(META), e.to_string()))?;
        let meta: RunMeta = toml::from_str(&meta_text).map_err(|e| err(&dir.join(META), e.to_string()))?;
        let text = std::fs::read_to_string(&trace_path).map_err(|e| err(&trace_path, e.to_string()))?;
        let mut lines = text.lines();
        let log = RunLog { meta, rows: Vec::new() };
        if lines.next() != Some(log.trace_header().as_str()) {
            return Err(err(&trace_path, "header does not match the run metadata".into()));
        }
        let (m, n) = (log.meta.line_ids.len(), log.meta.bus_ids.len());
        let mut rows = Vec::new();
        for (no, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(&trace_path, format!("row {}: {e}", no + 1)))?;
            if vals.len() != 2 + m + 2 * n {
                return Err(err(&trace_path, format!("row {} has {} fields", no + 1, vals.len())));
            }
            rows.push(LogRow {
                t: vals[0],
                lambda: vals[1..1 + m].to_vec(),
                omega: vals[1 + m..1 + m + n].to_vec(),
                u: vals[1 + m + n..1 + m + 2 * n].to_vec(),
                energy: vals[1 + m + 2 * n],
            });
        }
        Ok(RunLog { rows, ..log })
    }
}

/// Summary table over one or more runs, plus orderings across runs.
pub fn report(logs: &[RunLog]) -> Result<String, HarnessError> {
    if let Some(first) = logs.first() {
        for l in &logs[1..] {
            let same = l.rows.len() == first.rows.len() && l.rows.iter().zip(&first.rows).all(|(a, b)| (a.t - b.t).abs() <= 1e-9);
            if !same {
                return Err(HarnessError::GridMismatch(format!("{} vs {}", first.meta.label, l.meta.label)));
            }
        }
    }
    let sums: Vec<RunSummary> = logs.iter().map(RunLog::summary).collect();
    let mut out = String::new();
    for (log, s) in logs.iter().zip(&sums) {
        out.push_str(&s.table(&log.meta));
        out.push('\n');
    }
    if logs.len() > 1 {
        let _ = writeln!(out, "{:<24} {:<20} {:>10} {:>16} {:>16}", "run", "controller", "bound", "int u_total dt", "sum c int u^2");
        for (log, s) in logs.iter().zip(&sums) {
            let _ = writeln!(
                out,
                "{:<24} {:<20} {:>10} {:>16} {:>16}",
                s.label,
                s.controller.name(),
                half_width(&log.meta).map_or("-".into(), fmt_sig),
                fmt_sig(s.input_total_integral),
                fmt_sig(s.control_cost)
            );
        }
        let mut by_width: Vec<(f64, f64)> = logs.iter().zip(&sums).filter_map(|(l, s)| half_width(&l.meta).map(|w| (w, s.input_total_integral))).collect();
        by_width.sort_by(|a, b| a.0.total_cmp(&b.0));
        by_width.dedup_by(|a, b| a.0 == b.0);
        if by_width.len() > 1 {
            let holds = by_width.windows(2).all(|w| w[0].1 > w[1].1);
            let chain: Vec<String> = by_width.iter().map(|(w, v)| format!("{} Hz: {}", fmt_sig(*w), fmt_sig(*v))).collect();
            let _ = writeln!(out, "int u_total by bound ({}): {}", chain.join(" > "), if holds { "strictly decreasing" } else { "NOT strictly decreasing" });
        }
        let mut by_cost: Vec<&RunSummary> = sums.iter().collect();
        by_cost.sort_by(|a, b| a.control_cost.total_cmp(&b.control_cost));
        let chain: Vec<String> = by_cost.iter().map(|s| format!("{} {}", s.label, fmt_sig(s.control_cost))).collect();
        let _ = writeln!(out, "control cost ascending: {}", chain.join(" <= "));
    }
    Ok(out)
}

/// Common ω̄ of a run when all of I_ω shares one symmetric bound.
fn half_width(meta: &RunMeta) -> Option<f64> {
    let (lo, hi) = *meta.bounds.first()?;
    (meta.bounds.iter().all(|&b| b == (lo, hi)) && (lo + hi).abs() <= 1e-12).then_some(hi)
}
