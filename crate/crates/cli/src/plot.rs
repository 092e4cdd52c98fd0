//! Deterministic SVG rendering of saved reports.
//!
//! One row of three panels per agent group: judgments against model
//! predictions with the unit diagonal, the Markov pair (IV vs V), and the
//! explaining-away slope (VI vs VIII). Solid marks are observed means,
//! dashed ones the fitted model — which, being a collider model, always
//! draws a flat Markov pair. The output is a pure function of the report:
//! coordinates are printed with fixed precision and nothing else varies, so
//! identical reports give identical bytes.

use collider_core::report::{AgentReport, Report};
use collider_core::tasks::TaskId;
use std::fmt::Write;

const PANEL_W: f64 = 310.0;
const PANEL_H: f64 = 250.0;
const MARGIN_LEFT: f64 = 42.0;
const MARGIN_RIGHT: f64 = 14.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 30.0;
const ROW_HEADER: f64 = 26.0;
const ROW_H: f64 = ROW_HEADER + PANEL_H + 14.0;
const WIDTH: f64 = PANEL_W * 3.0 + 20.0;

const OBSERVED: &str = "#1f6fb4";
const MODEL: &str = "#999999";
const GRID: &str = "#cccccc";
const INK: &str = "#222222";

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// y pixel inside a panel for a value on the [0,1] judgment scale.
fn y_px(value: f64) -> f64 {
    let inner = PANEL_H - MARGIN_TOP - MARGIN_BOTTOM;
    MARGIN_TOP + (1.0 - value.clamp(0.0, 1.0)) * inner
}

fn panel_frame(svg: &mut String, x0: f64, y0: f64, title: &str) {
    let left = x0 + MARGIN_LEFT;
    let right = x0 + PANEL_W - MARGIN_RIGHT;
    let _ = write!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{INK}" font-weight="bold">{}</text>"#,
        left,
        y0 + 16.0,
        esc(title)
    );
    for tick in [0.0, 0.5, 1.0] {
        let y = y0 + y_px(tick);
        let _ = write!(
            svg,
            r#"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="{GRID}" stroke-width="1"/><text x="{:.2}" y="{:.2}" font-size="10" fill="{INK}" text-anchor="end">{tick}</text>"#,
            left - 5.0,
            y + 3.5,
        );
    }
}

fn scatter_panel(svg: &mut String, x0: f64, y0: f64, report: &AgentReport) {
    panel_frame(svg, x0, y0, "judgments vs model");
    let left = x0 + MARGIN_LEFT;
    let right = x0 + PANEL_W - MARGIN_RIGHT;
    let inner = right - left;
    // Unit diagonal: perfect model agreement.
    let _ = write!(
        svg,
        r#"<line x1="{left:.2}" y1="{:.2}" x2="{right:.2}" y2="{:.2}" stroke="{MODEL}" stroke-width="1" stroke-dasharray="4 3"/>"#,
        y0 + y_px(0.0),
        y0 + y_px(1.0),
    );
    for task in &report.tasks {
        let cx = left + task.prediction.clamp(0.0, 1.0) * inner;
        let cy = y0 + y_px(task.mean);
        let _ = write!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="4" fill="{OBSERVED}" fill-opacity="0.85"><title>{}: mean {} vs model {}</title></circle>"#,
            task.task, task.mean, task.prediction,
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{INK}" text-anchor="middle">model prediction</text>"#,
        (left + right) / 2.0,
        y0 + PANEL_H - 8.0,
    );
}

/// Two-task panel: observed means joined solid, model predictions dashed.
fn pair_panel(
    svg: &mut String,
    x0: f64,
    y0: f64,
    report: &AgentReport,
    title: &str,
    tasks: [TaskId; 2],
    annotation: &str,
) {
    panel_frame(svg, x0, y0, title);
    let left = x0 + MARGIN_LEFT;
    let right = x0 + PANEL_W - MARGIN_RIGHT;
    let xs = [left + 0.3 * (right - left), left + 0.7 * (right - left)];

    for (pass, color, dash, label) in [
        (false, MODEL, r#" stroke-dasharray="4 3""#, "model"),
        (true, OBSERVED, "", "judged"),
    ] {
        let values = tasks.map(|t| {
            let row = &report.tasks[t.index()];
            if pass {
                row.mean
            } else {
                row.prediction
            }
        });
        let ys = values.map(|v| y0 + y_px(v));
        let _ = write!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            xs[0], ys[0], xs[1], ys[1],
        );
        for i in 0..2 {
            let _ = write!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"><title>{} {}: {}</title></circle>"#,
                xs[i], ys[i], label, tasks[i], values[i],
            );
        }
        // Value labels for the observed pass only, to keep the panel quiet.
        if pass {
            for i in 0..2 {
                let _ = write!(
                    svg,
                    r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}" text-anchor="middle">{}</text>"#,
                    xs[i],
                    ys[i] - 8.0,
                    values[i],
                );
            }
        }
    }
    for (i, task) in tasks.iter().enumerate() {
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{INK}" text-anchor="middle">{task}</text>"#,
            xs[i],
            y0 + PANEL_H - 8.0,
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{INK}" text-anchor="end">{}</text>"#,
        right,
        y0 + 16.0,
        esc(annotation),
    );
}

fn agent_row(svg: &mut String, y0: f64, report: &AgentReport) {
    let header = format!(
        "{} · {} · {} — {} fit, rss={}, loocv R²={}",
        report.agent_id,
        report.prompt_style,
        report.content_domain,
        report.fit.variant,
        report.fit.rss,
        report.consistency.loocv_r2,
    );
    let _ = write!(
        svg,
        r#"<text x="10" y="{:.2}" font-size="13" fill="{INK}" font-weight="bold">{}</text>"#,
        y0 + 14.0,
        esc(&header),
    );
    let sig = &report.signatures;
    let mv_note = if sig.mv_flag {
        format!("MV {} (flagged)", sig.mv_magnitude)
    } else {
        format!("MV {}", sig.mv_magnitude)
    };
    let y_panel = y0 + ROW_HEADER;
    scatter_panel(svg, 10.0, y_panel, report);
    pair_panel(
        svg,
        10.0 + PANEL_W,
        y_panel,
        report,
        "Markov pair",
        [TaskId::IV, TaskId::V],
        &mv_note,
    );
    pair_panel(
        svg,
        10.0 + PANEL_W * 2.0,
        y_panel,
        report,
        "explaining away",
        [TaskId::VI, TaskId::VIII],
        &format!("EA {}", sig.ea),
    );
}

/// Renders any saved report to a standalone SVG document.
pub fn render_svg(report: &Report) -> String {
    let (rows, banner): (Vec<&AgentReport>, String) = match report {
        Report::Agents { groups } => (groups.iter().collect(), format!("{} agent group(s)", groups.len())),
        Report::Compare(c) => (
            vec![&c.agent_a, &c.agent_b],
            format!(
                "{} vs {} — spearman ρ = {}",
                c.agent_a.agent_id, c.agent_b.agent_id, c.spearman
            ),
        ),
    };
    let height = 34.0 + ROW_H * rows.len() as f64;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="Helvetica, Arial, sans-serif"><rect width="{WIDTH:.0}" height="{height:.0}" fill="#ffffff"/>"##,
    );
    let _ = write!(
        svg,
        r#"<text x="10" y="20" font-size="14" fill="{INK}" font-weight="bold">collider battery — {}</text>"#,
        esc(&banner),
    );
    for (i, row) in rows.iter().enumerate() {
        agent_row(&mut svg, 34.0 + ROW_H * i as f64, row);
    }
    svg.push_str("</svg>\n");
    svg
}
