//! CSV reports. Floats are written with Rust's shortest round-trip
//! formatting, so reruns give byte-identical files.

use advframe_core::adversary::EpochLog;
use advframe_core::clustering::RestartLog;
use advframe_core::metrics::{Evaluation, FactorRow, Level, PRCurve};

use crate::error::Result;

fn to_csv<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `level,delta,precision,recall,f1`, one row per level.
pub fn eval_csv(e: &Evaluation) -> Result<String> {
    curve_csv(&PRCurve { points: vec![e.clone()] })
}

/// The whole curve: one row per level and grid point.
pub fn curve_csv(curve: &PRCurve) -> Result<String> {
    let rows = Level::ALL.iter().flat_map(|&l| {
        curve.level(l).into_iter().map(move |(d, p, r, f)| {
            [l.as_str().to_string(), d.to_string(), p.to_string(), r.to_string(), f.to_string()]
        })
    });
    to_csv(["level", "delta", "precision", "recall", "f1"], rows)
}

/// `target_fmax=.. target_delta=.. frame_fmax=.. ...` on one line.
pub fn fmax_summary(curve: &PRCurve) -> String {
    let parts: Vec<String> = Level::ALL
        .iter()
        .map(|&l| {
            let (d, f) = curve.fmax(l);
            format!("{0}_fmax={f} {0}_delta={d}", l.as_str())
        })
        .collect();
    format!("{}\n", parts.join(" "))
}

/// `factor,instances,tp,fp,fn,precision,recall,f1,flag`; `flag` is `empty`
/// for rows nothing fell into.
pub fn breakdown_csv(rows: &[FactorRow]) -> Result<String> {
    let rows = rows.iter().map(|r| {
        let c = &r.counts;
        [
            r.factor.clone(),
            r.instances.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.precision().to_string(),
            c.recall().to_string(),
            c.f1().to_string(),
            if r.is_empty() { "empty".into() } else { String::new() },
        ]
    });
    to_csv(["factor", "instances", "tp", "fp", "fn", "precision", "recall", "f1", "flag"], rows)
}

/// `epoch,lambda,loss_frame,loss_adv,train_f1`; absent values are blank.
pub fn train_log_csv(log: &[EpochLog]) -> Result<String> {
    let rows = log.iter().map(|e| {
        [e.epoch.to_string(), e.lambda.to_string(), e.loss_frame.to_string(), opt(e.loss_adv), opt(e.train_f1)]
    });
    to_csv(["epoch", "lambda", "loss_frame", "loss_adv", "train_f1"], rows)
}

/// `restart,seed,inertia,iterations,converged`.
pub fn restart_log_csv(logs: &[RestartLog]) -> Result<String> {
    let rows = logs.iter().map(|l| {
        [l.restart.to_string(), l.seed.to_string(), l.inertia.to_string(), l.iterations.to_string(), l.converged.to_string()]
    });
    to_csv(["restart", "seed", "inertia", "iterations", "converged"], rows)
}
