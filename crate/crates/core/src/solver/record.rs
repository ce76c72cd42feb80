use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TspError};

/// Index chosen at one step: one member for spatial families, one per slice otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chosen {
    None,
    Single(usize),
    PerSlice(Vec<usize>),
}

impl Chosen {
    fn to_field(&self) -> String {
        match self {
            Chosen::None => String::new(),
            Chosen::Single(i) => i.to_string(),
            Chosen::PerSlice(v) => v.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Chosen::None);
        }
        let parse = |v: &str| v.parse::<usize>().map_err(|e| TspError::Parse(format!("chosen_index `{v}`: {e}")));
        if s.contains(';') {
            Ok(Chosen::PerSlice(s.split(';').map(parse).collect::<Result<_>>()?))
        } else {
            Ok(Chosen::Single(parse(s)?))
        }
    }
}

/// One logged iteration. Row `t` describes the iterate X^t and the step that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// ‖X^t − X★‖_F/‖X★‖_F, or ‖A∗X^t − B‖_F/‖B‖_F when X★ is unknown.
    pub epsilon: f64,
    pub chosen: Chosen,
    /// max_i f_i(X^{t−1}) and Σ_i f_i(X^{t−1}) when all losses were available.
    pub loss_max: Option<f64>,
    pub loss_sum: Option<f64>,
    /// Loss of the member(s) actually used, i.e. the predicted decrease of the weighted error.
    pub step_loss: Option<f64>,
    /// Cumulative seconds spent inside the iteration steps.
    pub seconds: f64,
    /// ‖X^t − X★‖²_{F(Q)} of the (possibly complex) Fourier iterate.
    pub q_error: Option<f64>,
    /// ‖Im ifft(X̂^t)‖_F / ‖Re ifft(X̂^t)‖_F, tracked for the real-field variants.
    pub imag_residue: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Tolerance,
    ZeroLoss,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub iterations: usize,
    pub stop: StopReason,
    pub precompute_seconds: f64,
    /// Largest recursion-vs-direct residual deviation seen by periodic audits.
    pub max_audit_deviation: Option<f64>,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::MaxIterations
    }

    pub fn final_epsilon(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.epsilon)
    }

    pub fn seconds(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.seconds)
    }

    pub fn q_errors(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.q_error).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_trace_csv(w, &self.rows)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Writes the columns `t, epsilon, chosen_index, loss_max, loss_sum, seconds`.
pub fn write_trace_csv<W: Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "epsilon", "chosen_index", "loss_max", "loss_sum", "seconds"])?;
    for r in rows {
        out.write_record([
            r.t.to_string(),
            format!("{:e}", r.epsilon),
            r.chosen.to_field(),
            opt(r.loss_max),
            opt(r.loss_sum),
            format!("{:e}", r.seconds),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]; columns absent from the file stay `None`.
pub fn read_trace_csv<R: std::io::Read>(r: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ct, ce) = (
        col("t").ok_or_else(|| TspError::Parse("trace lacks column t".into()))?,
        col("epsilon").ok_or_else(|| TspError::Parse("trace lacks column epsilon".into()))?,
    );
    let (cc, cm, cs, csec) = (col("chosen_index"), col("loss_max"), col("loss_sum"), col("seconds"));
    let num = |s: &str| -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>().map(Some).map_err(|e| TspError::Parse(format!("`{s}`: {e}")))
        }
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("");
        rows.push(TraceRow {
            t: get(Some(ct)).trim().parse().map_err(|e| TspError::Parse(format!("t: {e}")))?,
            epsilon: num(get(Some(ce)))?.ok_or_else(|| TspError::Parse("empty epsilon".into()))?,
            chosen: Chosen::parse(get(cc))?,
            loss_max: num(get(cm))?,
            loss_sum: num(get(cs))?,
            step_loss: None,
            seconds: num(get(csec))?.unwrap_or(0.0),
            q_error: None,
            imag_residue: None,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            TraceRow {
                t: 0,
                epsilon: 1.0,
                chosen: Chosen::None,
                loss_max: None,
                loss_sum: None,
                step_loss: None,
                seconds: 0.0,
                q_error: Some(2.0),
                imag_residue: None,
            },
            TraceRow {
                t: 1,
                epsilon: 0.5,
                chosen: Chosen::PerSlice(vec![3, 0, 2]),
                loss_max: Some(0.25),
                loss_sum: Some(0.75),
                step_loss: Some(0.1),
                seconds: 1e-6,
                q_error: None,
                imag_residue: None,
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,epsilon,chosen_index,loss_max,loss_sum,seconds\n"));
        assert!(text.contains(",3;0;2,"));
        let back = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(back[1].chosen, rows[1].chosen);
        assert_eq!(back[1].loss_sum, Some(0.75));
        assert_eq!(back[0].loss_max, None);
        assert_eq!(back[1].epsilon, 0.5);
    }
}
