//! Figure emission from sweep reports and trial records.
//!
//! All figures are self-contained SVG files carrying the config hash of
//! their source data. Re-running a plot command on the same input yields
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use shepherding_core::{
    CellStats, Policy, SweepReport, Vec2, misjudgement_correlation, threshold_scatter,
};

use crate::files::RunRecord;
use crate::svg::{MARKERS, Marker, Scale, Svg, fmt};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 62.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;

pub fn policy_color(policy: Policy) -> &'static str {
    match policy {
        Policy::Fat => "#1f77b4",
        Policy::Static => "#d62728",
        Policy::Dynamic => "#ff7f0e",
    }
}

struct Chart {
    svg: Svg,
    x: Scale,
    y: Scale,
}

impl Chart {
    fn new(title: &str, config_hash: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Chart {
        let mut svg = Svg::new(WIDTH, HEIGHT);
        svg.comment(&format!("config-hash: {config_hash}"));
        svg.text(WIDTH / 2.0, 24.0, 14.0, "middle", title);
        let x = Scale {
            lo: x_range.0,
            hi: x_range.1,
            px_lo: MARGIN_LEFT,
            px_hi: WIDTH - MARGIN_RIGHT,
        };
        let y = Scale {
            lo: y_range.0,
            hi: y_range.1,
            px_lo: HEIGHT - MARGIN_BOTTOM,
            px_hi: MARGIN_TOP,
        };
        Chart { svg, x, y }
    }

    fn axes(&mut self, x_label: &str, y_label: &str, x_ticks: &[f64], y_tick_count: usize) {
        let x0 = self.x.px_lo;
        let x1 = self.x.px_hi;
        let y0 = self.y.px_lo;
        let y1 = self.y.px_hi;
        self.svg.line(x0, y0, x1, y0, "#333333", 1.0);
        self.svg.line(x0, y0, x0, y1, "#333333", 1.0);
        for &t in x_ticks {
            let px = self.x.map(t);
            self.svg.line(px, y0, px, y0 + 4.0, "#333333", 1.0);
            self.svg.text(px, y0 + 16.0, 10.0, "middle", &trim_number(t));
        }
        for t in self.y.ticks(y_tick_count) {
            let py = self.y.map(t);
            self.svg.line(x0 - 4.0, py, x0, py, "#333333", 1.0);
            self.svg.text(x0 - 7.0, py + 3.0, 10.0, "end", &trim_number(t));
            self.svg.line(x0, py, x1, py, "#eeeeee", 0.5);
        }
        self.svg.text((x0 + x1) / 2.0, HEIGHT - 14.0, 11.0, "middle", x_label);
        // Vertical-ish y label: keep it horizontal above the axis to stay simple.
        self.svg.text(x0 - 44.0, y1 - 10.0, 11.0, "start", y_label);
    }

    fn legend_entry(&mut self, slot: usize, marker: Option<Marker>, color: &str, label: &str) {
        let x = WIDTH - MARGIN_RIGHT + 18.0;
        let y = MARGIN_TOP + 10.0 + slot as f64 * 16.0;
        match marker {
            Some(m) => self.svg.marker(m, x, y - 3.0, 4.0, color),
            None => self.svg.line(x - 5.0, y - 3.0, x + 5.0, y - 3.0, color, 2.5),
        }
        self.svg.text(x + 10.0, y, 10.0, "start", label);
    }
}

fn trim_number(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        fmt(v)
    }
}

fn write(path: PathBuf, svg: Svg) -> Result<PathBuf> {
    fs::write(&path, svg.finish()).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn sorted_m_values(report: &SweepReport) -> Vec<usize> {
    let mut m: Vec<usize> = report.spec.m_values.clone();
    m.sort_unstable();
    m.dedup();
    m
}

fn force_count_groups(report: &SweepReport) -> Vec<(usize, Vec<shepherding_core::ForceMask>)> {
    let mut groups: Vec<(usize, Vec<shepherding_core::ForceMask>)> = Vec::new();
    for count in 1..=3 {
        let masks: Vec<_> = report
            .spec
            .alpha_set
            .iter()
            .copied()
            .filter(|mask| mask.force_count() == count)
            .collect();
        if !masks.is_empty() {
            groups.push((count, masks));
        }
    }
    groups
}

fn cell(
    report: &SweepReport,
    mask: shepherding_core::ForceMask,
    m: usize,
    policy: Policy,
) -> Option<&CellStats> {
    report.cells.iter().find(|c| c.alpha == mask && c.m == m && c.policy == policy)
}

/// One line chart per force-count group: the metric against the variant
/// count, one line per (variant mask, policy).
fn lines_by_m(
    report: &SweepReport,
    out_dir: &Path,
    stem: &str,
    title: &str,
    y_label: &str,
    metric: impl Fn(&CellStats) -> f64,
    y_range: Option<(f64, f64)>,
) -> Result<Vec<PathBuf>> {
    let m_values = sorted_m_values(report);
    let x_range = (*m_values.first().unwrap() as f64, *m_values.last().unwrap() as f64);
    let mut files = Vec::new();
    for (count, masks) in force_count_groups(report) {
        let y_range = y_range.unwrap_or_else(|| {
            let max = report
                .cells
                .iter()
                .filter(|c| masks.contains(&c.alpha))
                .map(&metric)
                .fold(1.0f64, f64::max);
            (0.0, max * 1.05)
        });
        let mut chart = Chart::new(
            &format!("{title} — variants receive {count} force{}", if count == 1 { "" } else { "s" }),
            &report.provenance.config_hash,
            x_range,
            y_range,
        );
        chart.axes("number of variant sheep M", y_label, &m_values.iter().map(|&m| m as f64).collect::<Vec<_>>(), 5);
        let mut slot = 0;
        for policy in &report.spec.policies {
            chart.legend_entry(slot, None, policy_color(*policy), policy.label());
            slot += 1;
        }
        for (mi, mask) in masks.iter().enumerate() {
            let marker = MARKERS[mi % MARKERS.len()];
            chart.legend_entry(slot, Some(marker), "#555555", &format!("alpha {}", mask.label()));
            slot += 1;
            for policy in &report.spec.policies {
                let color = policy_color(*policy);
                let points: Vec<(f64, f64)> = m_values
                    .iter()
                    .filter_map(|&m| {
                        cell(report, *mask, m, *policy)
                            .map(|c| (chart.x.map(m as f64), chart.y.map(metric(c))))
                    })
                    .collect();
                chart.svg.polyline(&points, color, 1.5);
                for &(px, py) in &points {
                    chart.svg.marker(marker, px, py, 3.5, color);
                }
            }
        }
        files.push(write(out_dir.join(format!("{stem}_{count}force.svg")), chart.svg)?);
    }
    Ok(files)
}

pub fn emit_success_vs_m(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    lines_by_m(
        report,
        out_dir,
        "success_vs_m",
        "Guidance success rate",
        "success rate (%)",
        |c| c.success_rate,
        Some((0.0, 100.0)),
    )
}

pub fn emit_time_vs_m(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    lines_by_m(
        report,
        out_dir,
        "time_vs_m",
        "Average execution time",
        "mean steps",
        |c| c.mean_steps,
        None,
    )
}

/// One scatter per variant count: mean threshold at flag events against
/// the success rate, one point per (mask, threshold mode).
pub fn emit_threshold_scatter(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let points = threshold_scatter(&report.cells);
    let mut files = Vec::new();
    for &m in &sorted_m_values(report) {
        let panel: Vec<_> = points.iter().filter(|p| p.m == m).collect();
        if panel.is_empty() {
            continue;
        }
        let defined: Vec<f64> = panel.iter().filter_map(|p| p.threshold).collect();
        let hi = defined.iter().fold(6.0f64, |a, &b| a.max(b));
        let mut chart = Chart::new(
            &format!("Threshold vs success rate — M = {m}"),
            &report.provenance.config_hash,
            (0.0, hi * 1.1),
            (0.0, 100.0),
        );
        let x_ticks = chart.x.ticks(5);
        chart.axes("mean threshold at flag events", "success rate (%)", &x_ticks, 5);
        chart.legend_entry(0, Some(Marker::Circle), policy_color(Policy::Static), "static");
        chart.legend_entry(1, Some(Marker::Triangle), policy_color(Policy::Dynamic), "dynamic");
        let mut undefined = Vec::new();
        let mut plotted = 0;
        for p in &panel {
            match p.threshold {
                Some(t) => {
                    let (marker, color) = match p.policy {
                        Policy::Static => (Marker::Circle, policy_color(Policy::Static)),
                        _ => (Marker::Triangle, policy_color(Policy::Dynamic)),
                    };
                    chart.svg.marker(marker, chart.x.map(t), chart.y.map(p.success_rate), 4.0, color);
                    plotted += 1;
                }
                None => undefined.push(format!("{} {}", p.policy.label(), p.alpha.label())),
            }
        }
        chart.svg.text(
            MARGIN_LEFT,
            HEIGHT - 28.0,
            9.0,
            "start",
            &format!("{plotted} points; threshold-undefined cells: {}", if undefined.is_empty() { "none".to_string() } else { undefined.join(", ") }),
        );
        files.push(write(out_dir.join(format!("threshold_scatter_m{m}.svg")), chart.svg)?);
    }
    Ok(files)
}

/// Success rate against misjudgement count per cell, with the
/// product-moment correlation per threshold mode.
pub fn emit_misjudgement_scatter(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let y_max = report
        .cells
        .iter()
        .filter(|c| c.policy.discriminates())
        .map(|c| c.mean_misjudgements)
        .fold(1.0f64, f64::max);
    let mut chart = Chart::new(
        "Success rate vs misjudgements of normal sheep",
        &report.provenance.config_hash,
        (0.0, 100.0),
        (0.0, y_max * 1.05),
    );
    let x_ticks = chart.x.ticks(5);
    chart.axes("success rate (%)", "mean misjudgements per trial", &x_ticks, 5);
    let mut slot = 0;
    for policy in [Policy::Static, Policy::Dynamic] {
        if !report.spec.policies.contains(&policy) {
            continue;
        }
        let (points, r) = misjudgement_correlation(&report.cells, policy);
        let marker = if policy == Policy::Static { Marker::Circle } else { Marker::Triangle };
        let color = policy_color(policy);
        for (success, misjudgements) in &points {
            chart.svg.marker(marker, chart.x.map(*success), chart.y.map(*misjudgements), 4.0, color);
        }
        let label = match r {
            Some(r) => format!("{} (r = {r:.3})", policy.label()),
            None => format!("{} (r undefined)", policy.label()),
        };
        chart.legend_entry(slot, Some(marker), color, &label);
        slot += 1;
    }
    Ok(vec![write(out_dir.join("misjudgement_scatter.svg"), chart.svg)?])
}

/// One SVG per recorded frame, all sharing the same world-to-canvas
/// mapping so frames are visually comparable.
pub fn emit_trajectory_frames(record: &RunRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let frames = record
        .result
        .trajectory
        .as_ref()
        .context("record has no trajectory; rerun with --record-trajectory")?;
    anyhow::ensure!(!frames.is_empty(), "trajectory is empty");

    let goal = record.config.goal_center;
    let goal_radius = record.config.goal_radius;
    let mut lo = Vec2::new(goal.x - goal_radius, goal.y - goal_radius);
    let mut hi = Vec2::new(goal.x + goal_radius, goal.y + goal_radius);
    let mut grow = |p: Vec2| {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    };
    for frame in frames {
        grow(frame.shepherd);
        for &p in &frame.positions {
            grow(p);
        }
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1.0) * 1.08;
    let center = Vec2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);

    let size = 560.0;
    let n_normal = record.config.n_sheep - record.config.n_variant;
    let to_px = |p: Vec2| -> (f64, f64) {
        (
            size / 2.0 + (p.x - center.x) / span * size,
            // Flip y so the field reads in standard orientation.
            size / 2.0 - (p.y - center.y) / span * size,
        )
    };

    let mut files = Vec::new();
    for frame in frames {
        let mut svg = Svg::new(size, size);
        svg.comment(&format!("config-hash: {}", record.config_hash));
        svg.text(12.0, 20.0, 12.0, "start", &format!("step {}", frame.step));

        let (gx, gy) = to_px(goal);
        svg.dashed_circle(gx, gy, goal_radius / span * size, "#1f77b4");
        svg.text(gx, gy + 4.0, 9.0, "middle", "goal");

        for (i, &p) in frame.positions.iter().enumerate() {
            let (px, py) = to_px(p);
            let is_target = frame.target == Some(i);
            let fill = if is_target { "#9fd8ff" } else if i < n_normal { "white" } else { "#444444" };
            if i < n_normal {
                svg.circle(px, py, 3.2, fill, "#222222");
            } else {
                svg.polygon(
                    &[(px, py - 4.0), (px - 3.6, py + 3.0), (px + 3.6, py + 3.0)],
                    fill,
                    "#222222",
                );
            }
        }
        let (sx, sy) = to_px(frame.shepherd);
        svg.circle(sx, sy, 4.0, "#d62728", "#7f1010");

        // Legend strip.
        let ly = size - 14.0;
        svg.circle(14.0, ly, 3.2, "white", "#222222");
        svg.text(22.0, ly + 3.0, 9.0, "start", "normal");
        svg.polygon(&[(74.0, ly - 4.0), (70.4, ly + 3.0), (77.6, ly + 3.0)], "#444444", "#222222");
        svg.text(84.0, ly + 3.0, 9.0, "start", "variant");
        svg.circle(136.0, ly, 3.2, "#9fd8ff", "#222222");
        svg.text(144.0, ly + 3.0, 9.0, "start", "target");
        svg.circle(190.0, ly, 4.0, "#d62728", "#7f1010");
        svg.text(198.0, ly + 3.0, 9.0, "start", "shepherd");

        files.push(write(out_dir.join(format!("frame_{:06}.svg", frame.step)), svg)?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use shepherding_core::{ForceMask, SweepSpec, TrialConfig, run_sweep, run_trial};

    fn tiny_report() -> shepherding_core::SweepOutcome {
        let spec = SweepSpec {
            alpha_set: vec![ForceMask::new(true, false, false, false)],
            m_values: vec![1, 4],
            policies: vec![Policy::Fat, Policy::Static, Policy::Dynamic],
            trials_per_cell: 1,
            master_seed: 5,
            base: TrialConfig { max_steps: 50, ..TrialConfig::default() },
        };
        run_sweep(&spec).unwrap()
    }

    #[test]
    fn line_chart_cardinality_matches_m_values() {
        let outcome = tiny_report();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_success_vs_m(&outcome.report, dir.path()).unwrap();
        assert_eq!(files.len(), 1); // single force-count group
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert!(svg.contains(&outcome.report.provenance.config_hash));
        // One polyline per policy with two points each.
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    #[test]
    fn plots_are_byte_identical_across_runs() {
        let outcome = tiny_report();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for emit in [emit_success_vs_m, emit_time_vs_m, emit_threshold_scatter, emit_misjudgement_scatter] {
            let fa = emit(&outcome.report, dir_a.path()).unwrap();
            let fb = emit(&outcome.report, dir_b.path()).unwrap();
            for (a, b) in fa.iter().zip(&fb) {
                assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
            }
        }
    }

    #[test]
    fn frames_mark_every_agent() {
        let cfg = TrialConfig {
            n_sheep: 6,
            n_variant: 2,
            alpha: ForceMask::new(true, false, false, false),
            record_trajectory: true,
            max_steps: 25,
            seed: 3,
            ..TrialConfig::default()
        };
        let record = RunRecord::new(cfg.clone(), run_trial(cfg).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let files = emit_trajectory_frames(&record, dir.path()).unwrap();
        assert!(files.len() >= 2);
        let first = std::fs::read_to_string(&files[0]).unwrap();
        // 4 normals as circles (+1 shepherd, +2 legend circles, +1 target ring == circles count varies);
        // triangles: 2 variants + 1 legend glyph.
        assert_eq!(first.matches("<polygon").count(), 3);
        assert!(first.contains("step 0"));
    }
}
