//! Dependency-free SVG box plot: one box per group, whiskers at the extremes
//! of the non-outlier points, outlier markers above.

use std::fmt::Write as _;

use crate::ingest::FitnessGroup;
use crate::stats::BoxStats;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 40.0;

struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn y(&self, v: f64) -> f64 {
        let span = (self.hi - self.lo).max(1.0);
        let frac = (v - self.lo) / span;
        MARGIN_TOP + (1.0 - frac) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Renders the box plot. Output is deterministic for identical inputs.
pub fn boxplot_svg(stats: &[(FitnessGroup, BoxStats)]) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, b) in stats {
        lo = lo.min(b.min);
        hi = hi.max(b.max);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let pad = ((hi - lo) * 0.08).max(1.0);
    let floor = if lo >= 0.0 { 0.0 } else { f64::NEG_INFINITY };
    let scale = Scale { lo: (lo - pad).max(floor), hi: hi + pad };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" fill=\"#ffffff\"/>");

    // Y axis with min/mid/max tick labels.
    let x_axis = MARGIN_LEFT - 8.0;
    let _ = writeln!(
        svg,
        "  <line x1=\"{x_axis:.1}\" y1=\"{:.1}\" x2=\"{x_axis:.1}\" y2=\"{:.1}\" stroke=\"#222222\" stroke-width=\"1\"/>",
        scale.y(scale.hi),
        scale.y(scale.lo)
    );
    for tick in [scale.lo, (scale.lo + scale.hi) / 2.0, scale.hi] {
        let y = scale.y(tick);
        let _ = writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\" fill=\"#222222\">{:.0}</text>",
            x_axis - 4.0,
            y + 3.0,
            tick
        );
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{x_axis:.1}\" y2=\"{y:.1}\" stroke=\"#222222\" stroke-width=\"1\"/>",
            x_axis - 3.0
        );
    }

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let slot_w = plot_w / stats.len().max(1) as f64;
    let box_w = (slot_w * 0.4).min(60.0);
    for (i, (group, b)) in stats.iter().enumerate() {
        let cx = MARGIN_LEFT + slot_w * (i as f64 + 0.5);
        let x0 = cx - box_w / 2.0;
        let x1 = cx + box_w / 2.0;
        let whisker_lo = b.min;
        let whisker_hi = b.whisker_hi;
        // Whisker stems and caps.
        for (a, bv) in [(whisker_lo, b.q1), (b.q3, whisker_hi)] {
            let _ = writeln!(
                svg,
                "  <line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"#333333\" stroke-width=\"1\"/>",
                scale.y(a),
                scale.y(bv)
            );
        }
        for v in [whisker_lo, whisker_hi] {
            let _ = writeln!(
                svg,
                "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333333\" stroke-width=\"1\"/>",
                cx - box_w / 4.0,
                scale.y(v),
                cx + box_w / 4.0,
                scale.y(v)
            );
        }
        // Interquartile box and median line.
        let _ = writeln!(
            svg,
            "  <rect x=\"{x0:.1}\" y=\"{:.1}\" width=\"{box_w:.1}\" height=\"{:.1}\" fill=\"#9ecae1\" stroke=\"#333333\" stroke-width=\"1\"/>",
            scale.y(b.q3),
            (scale.y(b.q1) - scale.y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            svg,
            "  <line x1=\"{x0:.1}\" y1=\"{:.1}\" x2=\"{x1:.1}\" y2=\"{:.1}\" stroke=\"#08306b\" stroke-width=\"2\"/>",
            scale.y(b.median),
            scale.y(b.median)
        );
        for v in &b.outliers {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{cx:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"none\" stroke=\"#a63603\" stroke-width=\"1\"/>",
                scale.y(*v)
            );
        }
        let _ = writeln!(
            svg,
            "  <text x=\"{cx:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#222222\">{group}</text>",
            HEIGHT - MARGIN_BOTTOM + 16.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stats() -> Vec<(FitnessGroup, BoxStats)> {
        vec![
            (
                FitnessGroup::Fit,
                BoxStats::from_data(&[120.0, 140.0, 150.0, 200.0, 320.0], 3.0).unwrap(),
            ),
            (
                FitnessGroup::Unfit,
                BoxStats::from_data(&[100.0, 150.0, 200.0, 250.0, 900.0], 3.0).unwrap(),
            ),
        ]
    }

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let stats = sample_stats();
        let a = boxplot_svg(&stats);
        let b = boxplot_svg(&stats);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<rect").count(), 3, "background + one box per group");
        assert_eq!(a.matches("<circle").count(), 1, "one outlier marker");
        assert!(a.contains(">fit<"));
        assert!(a.contains(">unfit<"));
    }

    #[test]
    fn constant_group_renders_zero_height_box() {
        let stats = vec![(
            FitnessGroup::CondFit,
            BoxStats::from_data(&[250.0, 250.0, 250.0], 3.0).unwrap(),
        )];
        let svg = boxplot_svg(&stats);
        assert!(svg.contains("height=\"0.5\""), "degenerate box clamps to hairline");
    }
}
