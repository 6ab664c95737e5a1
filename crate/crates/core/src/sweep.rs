//! ε sweeps over held-out contexts: acceptance ratio, ℓ1 error against the
//! true continuation, and work counters for each threshold.

use crate::ar::Sequence;
use crate::bundle::ModelBundle;
use crate::data::SinusoidDataset;
use crate::engine::{generate_nara, GenerationConfig};
use crate::error::{NaraError, Result};
use crate::rng::derive_seed;
use std::fmt::Write as _;
use std::time::Instant;

pub const CSV_HEADER: &str = "epsilon,acceptance_ratio_pct,mean_l1,sequential_rounds,draft_passes,wall_ms";

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || NaraError::Invalid(format!("bad epsilon grid {spec:?}"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || !(stop >= start) {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // round away accumulated binary error so 0.1 steps print as 0.3, not 0.30000000000000004
        (0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(NaraError::Invalid(format!("epsilon grid {spec:?} must be non-empty and inside [0, 1]")));
    }
    Ok(grid)
}

/// A context and its true continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCase {
    pub context: Sequence,
    pub future: Vec<f64>,
}

/// The first `o` samples of each validation sequence as context, the next
/// `horizon` as ground truth.
pub fn sweep_cases(data: &SinusoidDataset, o: usize, horizon: usize) -> Result<Vec<SweepCase>> {
    let cases = data
        .validation
        .iter()
        .filter(|s| s.len() >= o + horizon)
        .map(|s| {
            let x = s.samples();
            Ok(SweepCase {
                context: Sequence::new(x[..o].to_vec())?,
                future: x[o..o + horizon].to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if cases.is_empty() {
        return Err(NaraError::Invalid(format!(
            "no validation sequence holds o + H = {} samples",
            o + horizon
        )));
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub acceptance_ratio_pct: f64,
    pub mean_l1: f64,
    pub sequential_rounds: usize,
    pub draft_passes: usize,
    pub wall_ms: f64,
}

/// One row per ε, in grid order. Case `i` is generated with seed
/// `derive_seed(seed, i)` at every ε.
pub fn run_sweep(bundle: &ModelBundle, cases: &[SweepCase], grid: &[f64], seed: u64) -> Result<Vec<SweepRow>> {
    if !bundle.trained.confidence {
        return Err(NaraError::Untrained("confidence predictor"));
    }
    if cases.is_empty() {
        return Err(NaraError::Empty("sweep cases"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &eps in grid {
        let t0 = Instant::now();
        let (mut accepted, mut total, mut l1, mut rounds, mut passes) = (0usize, 0usize, 0.0, 0usize, 0usize);
        for (i, case) in cases.iter().enumerate() {
            let cfg = GenerationConfig::new(eps, case.future.len(), derive_seed(seed, i as u64))?;
            let t = generate_nara(bundle, &case.context, &cfg)?;
            accepted += t.accepted_total;
            total += t.len();
            l1 += t.generated.iter().zip(&case.future).map(|(g, f)| (g - f).abs()).sum::<f64>();
            rounds += t.sequential_rounds;
            passes += t.draft_passes;
        }
        rows.push(SweepRow {
            epsilon: eps,
            acceptance_ratio_pct: if total == 0 { 0.0 } else { 100.0 * accepted as f64 / total as f64 },
            mean_l1: if total == 0 { 0.0 } else { l1 / total as f64 },
            sequential_rounds: rounds,
            draft_passes: passes,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(rows)
}

fn row_fields(r: &SweepRow) -> String {
    format!(
        "{:?},{:.6},{:.8},{},{}",
        r.epsilon, r.acceptance_ratio_pct, r.mean_l1, r.sequential_rounds, r.draft_passes
    )
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.3}", row_fields(r), r.wall_ms);
    }
    s
}

/// The CSV with the wall-clock column dropped, for reproducibility checks.
pub fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Line plot of mean ℓ1 (left axis) and acceptance ratio (right axis)
/// against ε, as a standalone SVG document.
pub fn to_svg(rows: &[SweepRow]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 570.0, 30.0, 340.0);
    let max_l1 = rows.iter().map(|r| r.mean_l1).fold(0.0f64, f64::max).max(1e-12) * 1.1;
    let x = |e: f64| left + e * (right - left);
    let y_l1 = |v: f64| bottom - v / max_l1 * (bottom - top);
    let y_acc = |v: f64| bottom - v / 100.0 * (bottom - top);
    let path = |f: &dyn Fn(&SweepRow) -> f64| {
        rows.iter()
            .enumerate()
            .map(|(i, r)| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, x(r.epsilon), f(r)))
            .collect::<String>()
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom} L{right},{top}" fill="none" stroke="black"/>"#
    );
    for k in 0..=10 {
        let e = k as f64 / 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{e:.1}</text>"#,
            x(e),
            bottom + 18.0
        );
    }
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let yy = bottom - f * (bottom - top);
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{:.1}" text-anchor="end" fill="#1f4fbf">{:.3}</text>"##,
            left - 6.0,
            yy + 4.0,
            f * max_l1
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{:.1}" fill="#c0392b">{:.0}%</text>"##,
            right + 6.0,
            yy + 4.0,
            f * 100.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">epsilon</text>"#, (left + right) / 2.0, h - 20.0);
    let _ = writeln!(s, r##"<text x="{left}" y="18" fill="#1f4fbf">mean l1 error</text>"##);
    let _ = writeln!(s, r##"<text x="{right}" y="18" text-anchor="end" fill="#c0392b">acceptance ratio</text>"##);
    if !rows.is_empty() {
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#1f4fbf" stroke-width="2"/>"##,
            path(&|r| y_l1(r.mean_l1))
        );
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#c0392b" stroke-width="2"/>"##,
            path(&|r| y_acc(r.acceptance_ratio_pct))
        );
    }
    s.push_str("</svg>\n");
    s
}
