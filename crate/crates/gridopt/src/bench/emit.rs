//! CSV and SVG emission for run records and profile curves. Output bytes
//! are deterministic for fixed input.

use std::io::Write;
use std::path::Path;

use super::{BenchError, ProfileCurve, RunRecord};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// runs.csv: solver_id, problem_id, success, time_s, iters, memory_bytes,
/// objective (empty when absent).
pub fn emit_records(records: &[RunRecord], out: &mut dyn Write) -> Result<(), BenchError> {
    if records.is_empty() {
        return Err(BenchError::EmptyRecordSet);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver_id", "problem_id", "success", "time_s", "iters", "memory_bytes", "objective"])
        .map_err(|e| BenchError::Csv(e.to_string()))?;
    for r in records {
        w.write_record([
            r.solver_id.as_str(),
            r.problem_id.as_str(),
            if r.success { "true" } else { "false" },
            &format!("{:.6e}", r.time_s),
            &r.iters.to_string(),
            &r.memory_bytes.to_string(),
            &r.objective.map(|f| format!("{f:.10e}")).unwrap_or_default(),
        ])
        .map_err(|e| BenchError::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, BenchError> {
    let mut reader =
        csv::Reader::from_path(path.as_ref()).map_err(|e| BenchError::Csv(e.to_string()))?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| BenchError::Csv(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("").to_string();
        let parse_f = |i: usize| -> Result<f64, BenchError> {
            row.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| BenchError::Csv(format!("bad number in column {i}: {row:?}")))
        };
        let objective = match row.get(6).unwrap_or("") {
            "" => None,
            text => Some(text.parse().map_err(|_| BenchError::Csv(format!("bad objective: {text}")))?),
        };
        records.push(RunRecord {
            solver_id: field(0),
            problem_id: field(1),
            success: row.get(2) == Some("true"),
            time_s: parse_f(3)?,
            iters: parse_f(4)? as usize,
            memory_bytes: parse_f(5)? as usize,
            objective,
        });
    }
    if records.is_empty() {
        return Err(BenchError::EmptyRecordSet);
    }
    Ok(records)
}

/// profile.csv: solver_id, alpha, p.
pub fn emit_profile_csv(curves: &[ProfileCurve], out: &mut dyn Write) -> Result<(), BenchError> {
    if curves.is_empty() {
        return Err(BenchError::EmptyRecordSet);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver_id", "alpha", "p"])
        .map_err(|e| BenchError::Csv(e.to_string()))?;
    for curve in curves {
        for (&alpha, &p) in curve.alphas.iter().zip(&curve.values) {
            w.write_record([curve.solver_id.as_str(), &format!("{alpha:.6e}"), &format!("{p:.6}")])
                .map_err(|e| BenchError::Csv(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Step plot of p_m(alpha) on a log-alpha axis, one polyline per solver.
pub fn emit_profile_svg(
    curves: &[ProfileCurve],
    title: &str,
    out: &mut dyn Write,
) -> Result<(), BenchError> {
    if curves.is_empty() || curves.iter().any(|c| c.alphas.is_empty()) {
        return Err(BenchError::EmptyRecordSet);
    }
    let (width, height) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (64.0, 24.0, 40.0, 48.0);
    let (pw, ph) = (width - ml - mr, height - mt - mb);
    let a_min = curves[0].alphas.first().copied().unwrap();
    let a_max = curves
        .iter()
        .flat_map(|c| c.alphas.last().copied())
        .fold(a_min, f64::max);
    let (l0, l1) = (a_min.ln(), a_max.ln().max(a_min.ln() + 1e-9));
    let x = |alpha: f64| ml + pw * (alpha.ln() - l0) / (l1 - l0);
    let y = |p: f64| mt + ph * (1.0 - p);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        xml_escape(title)
    ));

    // frame and horizontal grid lines at p = 0, 0.25, ..., 1
    for i in 0..=4 {
        let p = i as f64 / 4.0;
        let yy = y(p);
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" stroke=\"#dddddd\"/>\n",
            ml + pw
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{p:.2}</text>\n",
            ml - 6.0,
            yy + 4.0
        ));
    }
    // alpha ticks at 1, 2, 5, 10, ...
    let mut tick = 1.0f64;
    while tick <= a_max * 1.0001 {
        for mult in [1.0, 2.0, 5.0] {
            let a = tick * mult;
            if a >= a_min * 0.9999 && a <= a_max * 1.0001 {
                let xx = x(a);
                svg.push_str(&format!(
                    "<line x1=\"{xx:.2}\" y1=\"{:.2}\" x2=\"{xx:.2}\" y2=\"{:.2}\" stroke=\"#bbbbbb\"/>\n",
                    mt + ph,
                    mt + ph + 5.0
                ));
                svg.push_str(&format!(
                    "<text x=\"{xx:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{a}</text>\n",
                    mt + ph + 18.0
                ));
            }
        }
        tick *= 10.0;
    }
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">alpha</text>\n",
        ml + pw / 2.0,
        height - 10.0
    ));

    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        let mut prev_p: Option<f64> = None;
        for (&alpha, &p) in curve.alphas.iter().zip(&curve.values) {
            let xx = x(alpha);
            if let Some(pp) = prev_p {
                // horizontal run to the new alpha, then the step up
                points.push_str(&format!("{xx:.2},{:.2} ", y(pp)));
            }
            points.push_str(&format!("{xx:.2},{:.2} ", y(p)));
            prev_p = Some(p);
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            points.trim_end()
        ));
        let ly = mt + 16.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            ml + 10.0,
            ml + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            ml + 40.0,
            ly + 4.0,
            xml_escape(&curve.solver_id)
        ));
    }
    svg.push_str("</svg>\n");
    out.write_all(svg.as_bytes())?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<RunRecord> {
        vec![
            RunRecord {
                solver_id: "a".into(),
                problem_id: "p1".into(),
                success: true,
                time_s: 0.125,
                iters: 12,
                memory_bytes: 4096,
                objective: Some(1868511.761),
            },
            RunRecord {
                solver_id: "a".into(),
                problem_id: "p2".into(),
                success: false,
                time_s: 2.0,
                iters: 500,
                memory_bytes: 8192,
                objective: None,
            },
        ]
    }

    #[test]
    fn records_csv_round_trip() {
        let records = sample_records();
        let mut buf = Vec::new();
        emit_records(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("solver_id,problem_id,success,time_s,iters,memory_bytes,objective\n"));
        assert_eq!(text.lines().count(), 3);

        let dir = std::env::temp_dir().join("gridopt_emit_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("runs.csv");
        std::fs::write(&path, &buf).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].solver_id, "a");
        assert!(back[0].success);
        assert_eq!(back[0].iters, 12);
        assert!((back[0].objective.unwrap() - 1868511.761).abs() < 1e-4);
        assert!(back[1].objective.is_none());
    }

    #[test]
    fn deterministic_bytes() {
        let records = sample_records();
        let mut a = Vec::new();
        let mut b = Vec::new();
        emit_records(&records, &mut a).unwrap();
        emit_records(&records, &mut b).unwrap();
        assert_eq!(a, b);

        let curves = vec![ProfileCurve {
            solver_id: "a".into(),
            alphas: vec![1.0, 2.0, 4.0],
            values: vec![0.5, 0.75, 1.0],
        }];
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        emit_profile_svg(&curves, "profile", &mut s1).unwrap();
        emit_profile_svg(&curves, "profile", &mut s2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn profile_csv_matches_curves() {
        let curves = vec![ProfileCurve {
            solver_id: "m2".into(),
            alphas: vec![1.0, 8.0],
            values: vec![1.0 / 3.0, 1.0],
        }];
        let mut buf = Vec::new();
        emit_profile_csv(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("solver_id,alpha,p"));
        assert_eq!(lines.next(), Some("m2,1.000000e0,0.333333"));
        assert_eq!(lines.next(), Some("m2,8.000000e0,1.000000"));
    }

    #[test]
    fn svg_has_one_polyline_per_solver() {
        let curves = vec![
            ProfileCurve { solver_id: "a".into(), alphas: vec![1.0, 2.0], values: vec![0.5, 1.0] },
            ProfileCurve { solver_id: "b".into(), alphas: vec![1.0, 2.0], values: vec![0.25, 0.5] },
        ];
        let mut buf = Vec::new();
        emit_profile_svg(&curves, "test", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("<polyline").count(), 2);
        assert!(text.contains(">a</text>"));
        assert!(text.contains(">b</text>"));
    }

    #[test]
    fn empty_inputs_rejected_without_output() {
        let mut buf = Vec::new();
        assert!(matches!(emit_records(&[], &mut buf), Err(BenchError::EmptyRecordSet)));
        assert!(buf.is_empty());
        assert!(matches!(
            emit_profile_svg(&[], "x", &mut buf),
            Err(BenchError::EmptyRecordSet)
        ));
        assert!(buf.is_empty());
    }
}
