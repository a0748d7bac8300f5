//! Walk log: one row per control sample plus per-step summary records.
//! CSV schema v1 (column order is part of the format):
//! t, phase, q_T, q_1R, q_1L, q_2R, q_2L, p_Hx, p_Hy,
//! dq_T, dq_1R, dq_1L, dq_2R, dq_2L, dp_Hx, dp_Hy,
//! u1, u2, u3, u4, F_th, lam_T1, lam_N1, lam_T2, lam_N2,
//! w, r, V, Gamma, qp_status

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 30] = [
    "t", "phase", "q_T", "q_1R", "q_1L", "q_2R", "q_2L", "p_Hx", "p_Hy", "dq_T", "dq_1R",
    "dq_1L", "dq_2R", "dq_2L", "dp_Hx", "dp_Hy", "u1", "u2", "u3", "u4", "F_th", "lam_T1",
    "lam_N1", "lam_T2", "lam_N2", "w", "r", "V", "Gamma", "qp_status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Ss,
    Impact,
    Ds,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Ss => "SS",
            Phase::Impact => "IMPACT",
            Phase::Ds => "DS",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "SS" => Some(Phase::Ss),
            "IMPACT" => Some(Phase::Impact),
            "DS" => Some(Phase::Ds),
            _ => None,
        }
    }
}

/// One logged control sample, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub phase: Phase,
    pub q: [f64; 7],
    pub dq: [f64; 7],
    pub u: [f64; 4],
    pub f_th: f64,
    /// `[lam_T1, lam_N1, lam_T2, lam_N2]`; foot 1 is the right-labeled
    /// (stance/front) foot. Zero for the swing foot during single support.
    pub lambda: [f64; 4],
    pub w: f64,
    pub r: f64,
    pub v_lyap: f64,
    pub gamma: f64,
    /// "-" during single support, QP status during double support.
    pub qp_status: String,
}

/// Per-step summary, written to the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t_touchdown: f64,
    pub t_ds_end: f64,
    /// Inf-norm deviations of the post-impact (swapped) state from `x_s0`.
    pub post_impact_residual_q: f64,
    pub post_impact_residual_dq: f64,
    /// Inf-norm deviations of the double-support exit state from `x_s0`.
    pub ds_exit_residual_q: f64,
    pub ds_exit_residual_dq: f64,
    /// Smallest normal force over the DS phase (inner samples included).
    pub min_lambda_n: f64,
    /// Largest |lambda_T / lambda_N| over the DS phase.
    pub max_friction_ratio: f64,
    pub erg_saturations: usize,
    pub qp_fallbacks: usize,
    pub impact_impulse: [f64; 4],
    pub mean_thrust: f64,
    /// Largest foot-position drift over the double-support phase (m).
    pub ds_foot_drift: f64,
    /// Peak output norm during single support after the arming window.
    pub max_output_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    Fell { step: usize, t: f64, reason: String },
}

/// Full run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitLog {
    pub rows: Vec<LogRow>,
    pub steps: Vec<StepRecord>,
    pub outcome: RunOutcome,
    pub seed: u64,
    pub n_steps_requested: usize,
}

impl GaitLog {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, RunOutcome::Completed)
    }

    /// Serialize the sample rows as CSV (schema v1).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields: Vec<String> = Vec::with_capacity(30);
            fields.push(format!("{}", row.t));
            fields.push(row.phase.as_str().to_string());
            for v in row.q.iter().chain(row.dq.iter()) {
                fields.push(format!("{v}"));
            }
            for v in &row.u {
                fields.push(format!("{v}"));
            }
            fields.push(format!("{}", row.f_th));
            for v in &row.lambda {
                fields.push(format!("{v}"));
            }
            fields.push(format!("{}", row.w));
            fields.push(format!("{}", row.r));
            fields.push(format!("{}", row.v_lyap));
            fields.push(format!("{}", row.gamma));
            fields.push(row.qp_status.clone());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parse rows back from CSV; errors carry the 1-based line number.
    pub fn rows_from_csv(text: &str) -> Result<Vec<LogRow>> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::LogParse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let headers: Vec<&str> = header.split(',').collect();
        if headers != CSV_COLUMNS {
            return Err(Error::LogParse {
                line: 1,
                msg: format!("unexpected header: {header}"),
            });
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != CSV_COLUMNS.len() {
                return Err(Error::LogParse {
                    line: lineno,
                    msg: format!("expected {} fields, got {}", CSV_COLUMNS.len(), fields.len()),
                });
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse::<f64>().map_err(|e| Error::LogParse {
                    line: lineno,
                    msg: format!("column {}: {e}", CSV_COLUMNS[i]),
                })
            };
            let phase = Phase::parse(fields[1]).ok_or_else(|| Error::LogParse {
                line: lineno,
                msg: format!("unknown phase {}", fields[1]),
            })?;
            let mut q = [0.0; 7];
            let mut dq = [0.0; 7];
            for i in 0..7 {
                q[i] = num(2 + i)?;
                dq[i] = num(9 + i)?;
            }
            let mut u = [0.0; 4];
            for i in 0..4 {
                u[i] = num(16 + i)?;
            }
            let mut lambda = [0.0; 4];
            for i in 0..4 {
                lambda[i] = num(21 + i)?;
            }
            rows.push(LogRow {
                t: num(0)?,
                phase,
                q,
                dq,
                u,
                f_th: num(20)?,
                lambda,
                w: num(25)?,
                r: num(26)?,
                v_lyap: num(27)?,
                gamma: num(28)?,
                qp_status: fields[29].to_string(),
            });
        }
        Ok(rows)
    }

    /// JSON summary: outcome plus the per-step records.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            outcome: &'a RunOutcome,
            seed: u64,
            n_steps_requested: usize,
            n_steps_completed: usize,
            steps: &'a [StepRecord],
        }
        serde_json::to_string_pretty(&Summary {
            outcome: &self.outcome,
            seed: self.seed,
            n_steps_requested: self.n_steps_requested,
            n_steps_completed: self.steps.len(),
            steps: &self.steps,
        })
        .expect("summary serializes")
    }
}
