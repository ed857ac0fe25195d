//! Scheme visualization: one row per denoiser call, one column per time step.
//!
//! Cell markers follow the usual masked-video convention: dark cells are
//! steps already available (observed or generated by an earlier call), a
//! distinct marker/color shows the conditioning positions of the current
//! call, another the steps it generates.

use std::collections::BTreeSet;

use super::InferenceScheme;

const CELL: i64 = 14;
const ROW_H: i64 = 18;

/// ASCII rendering. `C` conditioning, `G` generated this call, `#` available,
/// `.` unknown; the `|` gutter marks the present (t = 0).
pub fn render_text(scheme: &InferenceScheme) -> String {
    let t_min = scheme.min_window_index().min(-1);
    let t_max = scheme.horizon;
    let width = (t_max - t_min + 1) as usize;

    let mut out = String::new();
    out.push_str(&format!(
        "rows: one call each (template id in brackets); t = {t_min}..{t_max}, '|' marks t = 0\n"
    ));
    out.push_str("C = conditioning   G = generated   # = available   . = unknown\n");

    let mut axis = String::new();
    for t in t_min..=t_max {
        axis.push(if t == 0 {
            '0'
        } else if t % 10 == 0 {
            '+'
        } else {
            ' '
        });
    }
    out.push_str(&format!("          {axis}\n"));

    let mut available: BTreeSet<i64> = (t_min..=0).collect();
    for i in 0..scheme.actions.len() {
        let cond: BTreeSet<i64> = scheme.conditioned(i).into_iter().collect();
        let gen: BTreeSet<i64> = scheme.generated(i).into_iter().collect();
        let mut row = String::with_capacity(width + 2);
        for t in t_min..=t_max {
            if t == 1 {
                row.push('|');
            }
            row.push(if cond.contains(&t) {
                'C'
            } else if gen.contains(&t) {
                'G'
            } else if available.contains(&t) {
                '#'
            } else {
                '.'
            });
        }
        out.push_str(&format!(
            "{:>3} [{:>2}]  {}\n",
            i + 1,
            scheme.actions[i].template_id,
            row
        ));
        available.extend(gen);
    }
    out
}

/// Standalone SVG rendering with the same row/column layout.
pub fn render_svg(scheme: &InferenceScheme) -> String {
    let t_min = scheme.min_window_index().min(-1);
    let t_max = scheme.horizon;
    let cols = t_max - t_min + 1;
    let rows = scheme.actions.len() as i64;
    let width = cols * CELL + 60;
    let height = rows * ROW_H + 30;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"10\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let x_of = |t: i64| 40 + (t - t_min) * CELL;
    // Present marker.
    svg.push_str(&format!(
        "<line x1=\"{x}\" y1=\"4\" x2=\"{x}\" y2=\"{h}\" stroke=\"black\" stroke-dasharray=\"3,2\"/>\n",
        x = x_of(0) + CELL,
        h = rows * ROW_H + 8
    ));

    let mut available: BTreeSet<i64> = (t_min..=0).collect();
    for i in 0..scheme.actions.len() {
        let cond: BTreeSet<i64> = scheme.conditioned(i).into_iter().collect();
        let gen: BTreeSet<i64> = scheme.generated(i).into_iter().collect();
        let y = 8 + i as i64 * ROW_H;
        svg.push_str(&format!(
            "<text x=\"4\" y=\"{}\">{} [{}]</text>\n",
            y + 11,
            i + 1,
            scheme.actions[i].template_id
        ));
        for t in t_min..=t_max {
            let fill = if cond.contains(&t) {
                "#d62728"
            } else if gen.contains(&t) {
                "#1f77b4"
            } else if available.contains(&t) {
                "#555555"
            } else {
                "#eeeeee"
            };
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"{fill}\" stroke=\"white\"/>\n",
                x_of(t),
                w = CELL,
                h = ROW_H - 4
            ));
        }
        available.extend(gen);
    }
    svg.push_str(&format!(
        "<text x=\"40\" y=\"{}\">t = {t_min}..{t_max}, dashed line after t = 0</text>\n",
        rows * ROW_H + 22
    ));
    svg.push_str("</svg>\n");
    svg
}
