//! Review-latency metrics for the three-way A/B setup: set assignment,
//! size trimming, per-repo balance, per-set and per-size statistics.
//!
//! The report pipeline is trim, then balance, then statistics.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::SizeClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetLabel {
    #[serde(rename = "control-1")]
    Control1,
    #[serde(rename = "control-2")]
    Control2,
    #[serde(rename = "test")]
    Test,
}

impl SetLabel {
    pub const ALL: [SetLabel; 3] = [SetLabel::Control1, SetLabel::Control2, SetLabel::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::Control1 => "control-1",
            SetLabel::Control2 => "control-2",
            SetLabel::Test => "test",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            SetLabel::Control1 => "CS1",
            SetLabel::Control2 => "CS2",
            SetLabel::Test => "TS",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetLabel {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "control-1" | "control1" | "cs1" => Ok(SetLabel::Control1),
            "control-2" | "control2" | "cs2" => Ok(SetLabel::Control2),
            "test" | "ts" => Ok(SetLabel::Test),
            _ => Err(AnalyticsError::UnknownSet(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrRecord {
    pub repo_id: String,
    pub pr_number: u64,
    pub changed_loc: u64,
    pub review_time_hours: f64,
    pub set_label: SetLabel,
}

impl PrRecord {
    pub fn new(repo_id: impl Into<String>, pr_number: u64, changed_loc: u64, review_time_hours: f64, set_label: SetLabel) -> Self {
        Self {
            repo_id: repo_id.into(),
            pr_number,
            changed_loc,
            review_time_hours,
            set_label,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("no records")]
    Empty,
    #[error("{repo_id}#{pr_number} has zero changed lines")]
    ZeroLoc { repo_id: String, pr_number: u64 },
    #[error("{repo_id}#{pr_number} has a non-finite or negative review time")]
    BadReviewTime { repo_id: String, pr_number: u64 },
    #[error("unknown set label {0:?}")]
    UnknownSet(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    pub n: usize,
    pub avg_loc: f64,
    pub avg_review_hours: f64,
    pub avg_review_hours_per_loc: f64,
    pub median_review_hours: f64,
}

/// Deterministic three-way split: sha256 of `repo_id`, NUL and the decimal
/// PR number, first 8 bytes big-endian, mod 3.
pub fn assign_set(repo_id: &str, pr_number: u64) -> SetLabel {
    let mut h = Sha256::new();
    h.update(repo_id.as_bytes());
    h.update([0]);
    h.update(pr_number.to_string().as_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    SetLabel::ALL[(u64::from_be_bytes(head) % 3) as usize]
}

fn validate(records: &[PrRecord]) -> Result<(), AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    for r in records {
        if !r.review_time_hours.is_finite() || r.review_time_hours < 0.0 {
            return Err(AnalyticsError::BadReviewTime {
                repo_id: r.repo_id.clone(),
                pr_number: r.pr_number,
            });
        }
    }
    Ok(())
}

/// Mean review time per PR.
pub fn avg_review_time(records: &[PrRecord]) -> Result<f64, AnalyticsError> {
    validate(records)?;
    Ok(records.iter().map(|r| r.review_time_hours).sum::<f64>() / records.len() as f64)
}

/// Mean over PRs of review time divided by changed lines. This is a mean of
/// ratios, not total time over total lines.
pub fn avg_review_time_per_loc(records: &[PrRecord]) -> Result<f64, AnalyticsError> {
    validate(records)?;
    let mut sum = 0.0;
    for r in records {
        if r.changed_loc == 0 {
            return Err(AnalyticsError::ZeroLoc {
                repo_id: r.repo_id.clone(),
                pr_number: r.pr_number,
            });
        }
        sum += r.review_time_hours / r.changed_loc as f64;
    }
    Ok(sum / records.len() as f64)
}

/// Middle value, or the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub fn median_review_time(records: &[PrRecord]) -> Result<f64, AnalyticsError> {
    validate(records)?;
    let times: Vec<f64> = records.iter().map(|r| r.review_time_hours).collect();
    Ok(median(&times).expect("validated non-empty"))
}

pub fn set_stats(records: &[PrRecord]) -> Result<SetStats, AnalyticsError> {
    Ok(SetStats {
        n: records.len(),
        avg_loc: records.iter().map(|r| r.changed_loc as f64).sum::<f64>() / records.len().max(1) as f64,
        avg_review_hours: avg_review_time(records)?,
        avg_review_hours_per_loc: avg_review_time_per_loc(records)?,
        median_review_hours: median_review_time(records)?,
    })
}

/// Percentage change of `test` relative to `control`.
pub fn delta_pct(test: f64, control: f64) -> f64 {
    (test - control) / control * 100.0
}

pub const TRIM_LOWER: f64 = 0.10;
pub const TRIM_UPPER: f64 = 0.75;

/// Drops the smallest 10% and largest 25% of PRs by changed lines, using
/// nearest-rank percentiles over the sorted sizes: with `k = floor(0.1 n)`
/// and `m = ceil(0.75 n)` a record survives iff its size is above the k-th
/// smallest (when k >= 1) and at most the m-th smallest. Ties are therefore
/// kept or dropped together. Survivors keep their input order.
///
/// Meant to be applied once; trimming the output again trims further.
pub fn trim_outliers(records: &[PrRecord]) -> Vec<PrRecord> {
    let n = records.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sizes: Vec<u64> = records.iter().map(|r| r.changed_loc).collect();
    sizes.sort_unstable();
    let k = (TRIM_LOWER * n as f64).floor() as usize;
    let m = ((TRIM_UPPER * n as f64).ceil() as usize).clamp(1, n);
    let low = (k >= 1).then(|| sizes[k - 1]);
    let high = sizes[m - 1];
    records
        .iter()
        .filter(|r| low.is_none_or(|l| r.changed_loc > l) && r.changed_loc <= high)
        .cloned()
        .collect()
}

/// A repo's sets are balanced when every set has at least 10 PRs or all
/// three have the same count.
pub fn balance_keeps(counts: [usize; 3]) -> bool {
    counts.iter().all(|&c| c >= 10) || (counts[0] == counts[1] && counts[1] == counts[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceOutcome {
    pub records: Vec<PrRecord>,
    pub kept_repos: Vec<String>,
    pub dropped_repos: Vec<String>,
}

pub fn set_counts(records: &[PrRecord]) -> BTreeMap<String, [usize; 3]> {
    let mut counts: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for r in records {
        counts.entry(r.repo_id.clone()).or_default()[r.set_label.index()] += 1;
    }
    counts
}

/// Keeps the records of repos whose per-set counts pass [`balance_keeps`].
pub fn balance_filter(records: &[PrRecord]) -> BalanceOutcome {
    let counts = set_counts(records);
    let (kept, dropped): (Vec<_>, Vec<_>) = counts.iter().partition(|(_, c)| balance_keeps(**c));
    let kept_repos: Vec<String> = kept.into_iter().map(|(r, _)| r.clone()).collect();
    BalanceOutcome {
        records: records
            .iter()
            .filter(|r| kept_repos.binary_search(&r.repo_id).is_ok())
            .cloned()
            .collect(),
        kept_repos,
        dropped_repos: dropped.into_iter().map(|(r, _)| r.clone()).collect(),
    }
}

/// Per-set statistics for every size class that has records. Sets with no
/// records in a class are absent from that class's map.
pub fn bucket_report(records: &[PrRecord]) -> Result<BTreeMap<SizeClass, BTreeMap<SetLabel, SetStats>>, AnalyticsError> {
    let mut groups: BTreeMap<SizeClass, BTreeMap<SetLabel, Vec<PrRecord>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(SizeClass::from_loc(r.changed_loc as usize))
            .or_default()
            .entry(r.set_label)
            .or_default()
            .push(r.clone());
    }
    groups
        .into_iter()
        .map(|(class, sets)| {
            let stats = sets
                .into_iter()
                .map(|(label, rs)| set_stats(&rs).map(|s| (label, s)))
                .collect::<Result<BTreeMap<_, _>, _>>()?;
            Ok((class, stats))
        })
        .collect()
}

/// Pearson correlation; `None` with fewer than two points or zero variance.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub avg_review_hours: f64,
    pub avg_review_hours_per_loc: f64,
    pub median_review_hours: f64,
}

impl DeltaRow {
    pub fn between(test: &SetStats, control: &SetStats) -> Self {
        Self {
            avg_review_hours: delta_pct(test.avg_review_hours, control.avg_review_hours),
            avg_review_hours_per_loc: delta_pct(test.avg_review_hours_per_loc, control.avg_review_hours_per_loc),
            median_review_hours: delta_pct(test.median_review_hours, control.median_review_hours),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub size_class: SizeClass,
    pub range: String,
    pub pr_count: usize,
    /// Average review hours per changed line, per set.
    pub per_loc: BTreeMap<SetLabel, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_vs_cs1_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_vs_cs2_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub input_records: usize,
    pub after_trim: usize,
    pub after_balance: usize,
    pub kept_repos: Vec<String>,
    pub dropped_repos: Vec<String>,
    pub sets: BTreeMap<SetLabel, SetStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_vs_cs1: Option<DeltaRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts_vs_cs2: Option<DeltaRow>,
    pub buckets: Vec<BucketRow>,
    /// Pearson correlation of changed lines and review time, per set.
    pub loc_time_correlation: BTreeMap<SetLabel, Option<f64>>,
}

/// Trim, balance, then per-set and per-size statistics.
pub fn build_report(records: &[PrRecord]) -> Result<AnalyticsReport, AnalyticsError> {
    validate(records)?;
    let trimmed = trim_outliers(records);
    let balanced = balance_filter(&trimmed);
    let rs = &balanced.records;

    let mut by_set: BTreeMap<SetLabel, Vec<PrRecord>> = BTreeMap::new();
    for r in rs {
        by_set.entry(r.set_label).or_default().push(r.clone());
    }
    let sets = by_set
        .iter()
        .map(|(l, v)| set_stats(v).map(|s| (*l, s)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let delta = |control: SetLabel| Some(DeltaRow::between(sets.get(&SetLabel::Test)?, sets.get(&control)?));
    let loc_time_correlation = by_set
        .iter()
        .map(|(l, v)| {
            let xs: Vec<f64> = v.iter().map(|r| r.changed_loc as f64).collect();
            let ys: Vec<f64> = v.iter().map(|r| r.review_time_hours).collect();
            (*l, correlation(&xs, &ys))
        })
        .collect();

    let buckets = bucket_report(rs)?
        .into_iter()
        .map(|(class, stats)| {
            let per_loc: BTreeMap<SetLabel, f64> = stats.iter().map(|(l, s)| (*l, s.avg_review_hours_per_loc)).collect();
            let d = |control: SetLabel| Some(delta_pct(*per_loc.get(&SetLabel::Test)?, *per_loc.get(&control)?));
            BucketRow {
                size_class: class,
                range: class.range_label().to_string(),
                pr_count: stats.values().map(|s| s.n).sum(),
                ts_vs_cs1_pct: d(SetLabel::Control1),
                ts_vs_cs2_pct: d(SetLabel::Control2),
                per_loc,
            }
        })
        .collect();

    Ok(AnalyticsReport {
        input_records: records.len(),
        after_trim: trimmed.len(),
        after_balance: rs.len(),
        kept_repos: balanced.kept_repos,
        dropped_repos: balanced.dropped_repos,
        ts_vs_cs1: delta(SetLabel::Control1),
        ts_vs_cs2: delta(SetLabel::Control2),
        sets,
        buckets,
        loc_time_correlation,
    })
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl AnalyticsReport {
    /// Aligned text tables: one row per set plus the two delta rows, then
    /// one row per size class.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Records: {} read, {} after size trim, {} after balance ({} repos kept, {} dropped)\n\n",
            self.input_records,
            self.after_trim,
            self.after_balance,
            self.kept_repos.len(),
            self.dropped_repos.len()
        );
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>10} {:>16} {:>18} {:>14} {:>12}",
            "Set", "PRs", "Avg LOC", "Avg review (h)", "Avg per LOC (h)", "Median (h)", "Corr"
        );
        for (l, s) in &self.sets {
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>10.0} {:>16.2} {:>18.2} {:>14.2} {:>12}",
                l.short(),
                s.n,
                s.avg_loc,
                s.avg_review_hours,
                s.avg_review_hours_per_loc,
                s.median_review_hours,
                num(self.loc_time_correlation.get(l).copied().flatten())
            );
        }
        for (name, row) in [("TS vs CS1 (%)", &self.ts_vs_cs1), ("TS vs CS2 (%)", &self.ts_vs_cs2)] {
            if let Some(d) = row {
                let _ = writeln!(
                    out,
                    "{:<14} {:>8} {:>10} {:>16.2} {:>18.2} {:>14.2}",
                    name, "-", "-", d.avg_review_hours, d.avg_review_hours_per_loc, d.median_review_hours
                );
            }
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>8} {:>8} {:>14} {:>14} {:>9}",
            "Size (LOC)", "CS1", "CS2", "TS", "TS vs CS1 (%)", "TS vs CS2 (%)", "PRs"
        );
        for b in &self.buckets {
            let g = |l| num(b.per_loc.get(&l).copied());
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>8} {:>8} {:>14} {:>14} {:>9}",
                b.range,
                g(SetLabel::Control1),
                g(SetLabel::Control2),
                g(SetLabel::Test),
                num(b.ts_vs_cs1_pct),
                num(b.ts_vs_cs2_pct),
                b.pr_count
            );
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    repo_id: String,
    pr_number: u64,
    changed_loc: u64,
    #[serde(default)]
    review_time_hours: Option<f64>,
    #[serde(default)]
    set_label: Option<String>,
    #[serde(default)]
    ready_at: Option<String>,
    #[serde(default)]
    approved_at: Option<String>,
}

fn parse_ts(s: &str, line: u64) -> Result<DateTime<Utc>, AnalyticsError> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| AnalyticsError::Parse {
            line,
            message: format!("bad timestamp {s:?}: {e}"),
        })
}

/// Reads records from a header-led CSV (comma or tab separated).
///
/// Columns: `repo_id, pr_number, changed_loc, review_time_hours, set_label,
/// ready_at, approved_at`. An empty review time is computed from the two
/// timestamps; an empty set label falls back to [`assign_set`].
pub fn read_records<R: Read>(mut input: R) -> Result<Vec<PrRecord>, AnalyticsError> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| AnalyticsError::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<RawRow>() {
        let row = row.map_err(|e| AnalyticsError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        let review_time_hours = match (row.review_time_hours, row.ready_at.as_deref(), row.approved_at.as_deref()) {
            (Some(h), _, _) => h,
            (None, Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
                (parse_ts(b, line)? - parse_ts(a, line)?).num_seconds() as f64 / 3600.0
            }
            _ => {
                return Err(AnalyticsError::Parse {
                    line,
                    message: "no review time and no ready/approved timestamps".into(),
                })
            }
        };
        let set_label = match row.set_label.as_deref().map(str::trim) {
            Some(s) if !s.is_empty() => s.parse()?,
            _ => assign_set(&row.repo_id, row.pr_number),
        };
        let rec = PrRecord::new(row.repo_id, row.pr_number, row.changed_loc, review_time_hours, set_label);
        if rec.changed_loc == 0 {
            return Err(AnalyticsError::ZeroLoc {
                repo_id: rec.repo_id,
                pr_number: rec.pr_number,
            });
        }
        if !rec.review_time_hours.is_finite() || rec.review_time_hours < 0.0 {
            return Err(AnalyticsError::BadReviewTime {
                repo_id: rec.repo_id,
                pr_number: rec.pr_number,
            });
        }
        out.push(rec);
    }
    Ok(out)
}
