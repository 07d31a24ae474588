//! Report emission: the success-matrix CSV schema, the SVG heatmap, angle
//! traces, and the per-step trajectory dump.

use std::fmt::Write as _;

use crate::harness::{AngleTrace, SuccessMatrix};
use crate::sac::Trajectory;

/// Exact CSV schema: header `env,policy,joint_i,joint_j,trials,successes,rate`,
/// one row per matrix cell, UTF-8, LF line endings.
pub fn success_matrix_csv(matrix: &SuccessMatrix) -> String {
    let mut out = String::from("env,policy,joint_i,joint_j,trials,successes,rate\n");
    for i in 0..matrix.n {
        for j in 0..matrix.n {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                matrix.env_id,
                matrix.policy_id,
                i,
                j,
                matrix.trials_per_cell,
                matrix.successes(i, j),
                matrix.rate(i, j)
            );
        }
    }
    out
}

fn heat_color(rate: f64) -> String {
    // Fixed [0, 1] scale: dark red through pale yellow to dark green.
    let stops = [(165u8, 0u8, 38u8), (255, 255, 190), (0, 104, 55)];
    let t = rate.clamp(0.0, 1.0) * 2.0;
    let (a, b, frac) = if t <= 1.0 {
        (stops[0], stops[1], t)
    } else {
        (stops[1], stops[2], t - 1.0)
    };
    let lerp = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * frac).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

/// Simple vector heatmap. Diagonal cells hold single-damage cases; cell
/// (i, j) holds the case where both i and j are damaged.
pub fn heatmap_svg(matrix: &SuccessMatrix) -> String {
    let cell = 42;
    let margin = 46;
    let n = matrix.n;
    let side = margin + n * cell + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{}\" font-family=\"monospace\" font-size=\"11\">",
        side + 24
    );
    let _ = writeln!(
        out,
        "<text x=\"{margin}\" y=\"16\">success rate: {} / {} (diagonal = single damage)</text>",
        matrix.env_id, matrix.policy_id
    );
    for i in 0..n {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            margin + i * cell + cell / 2,
            margin - 8,
            i
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            margin - 8,
            margin + i * cell + cell / 2 + 4,
            i
        );
    }
    for i in 0..n {
        for j in 0..n {
            let rate = matrix.rate(i, j);
            let x = margin + j * cell;
            let y = margin + i * cell;
            let _ = writeln!(
                out,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"#444\"/>",
                heat_color(rate)
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.1}</text>",
                x + cell / 2,
                y + cell / 2 + 4,
                rate
            );
        }
    }
    let _ = writeln!(
        out,
        "<text x=\"{margin}\" y=\"{}\">mean={:.3} min_diag={:.3}</text>",
        margin + n * cell + 18,
        matrix.mean(),
        matrix.diagonal_min()
    );
    out.push_str("</svg>\n");
    out
}

/// Long-form trace CSV: `case,t,value`; the undamaged reference uses the
/// empty case label.
pub fn traces_csv(traces: &[AngleTrace]) -> String {
    let mut out = String::from("case,t,value\n");
    for trace in traces {
        for (t, v) in trace.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", trace.label, t, v);
        }
    }
    out
}

/// Per-step trajectory dump: one structured text line per step.
pub fn trajectory_dump(episode_id: usize, q_label: &str, trajectory: &Trajectory) -> String {
    let mut out = String::new();
    for (t, tr) in trajectory.transitions.iter().enumerate() {
        let action = tr
            .action
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(
            out,
            "episode={episode_id}\tt={t}\tq={q_label}\taction={action}\treward={}\tsuccess={}",
            tr.reward, trajectory.success_trace[t]
        );
    }
    out
}
