//! Metrics derived from a rollout log: stage success table, head histograms
//! and score calibration. Everything here is a pure function of the log, so
//! reports can be regenerated without running any policy.

use crate::artifact::{text_header, CalibrationRecord, RolloutLog};

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    pub label: String,
    pub episodes: usize,
    pub successes: usize,
    /// Episodes that completed each phase.
    pub stages: Vec<usize>,
}

impl StrategyRow {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episodes.max(1) as f64
    }

    pub fn stage_rate(&self, phase: usize) -> f64 {
        self.stages[phase] as f64 / self.episodes.max(1) as f64
    }
}

/// Selected-head counts per phase, `counts[phase][head]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadHistogram {
    pub label: String,
    pub counts: Vec<Vec<usize>>,
}

impl HeadHistogram {
    /// The most selected head of `phase` and the fraction of that phase's
    /// steps it covers; `None` if no head was recorded in the phase.
    pub fn modal(&self, phase: usize) -> Option<(usize, f64)> {
        let row = &self.counts[phase];
        let total: usize = row.iter().sum();
        if total == 0 {
            return None;
        }
        // first maximum wins ties
        let (head, &n) = row
            .iter()
            .enumerate()
            .fold((0, &row[0]), |best, (i, n)| if *n > *best.1 { (i, n) } else { best });
        Some((head, n as f64 / total as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub config_hash: String,
    pub task: String,
    pub algo: String,
    pub k: usize,
    pub eval_seed: u64,
    pub phases: Vec<String>,
    pub rows: Vec<StrategyRow>,
    pub histograms: Vec<HeadHistogram>,
    pub calibration: Option<CalibrationRecord>,
}

impl MetricsReport {
    pub fn from_log(log: &RolloutLog) -> Self {
        let h = &log.header;
        let nphase = h.phases.len();
        let mut rows: Vec<StrategyRow> = Vec::new();
        let mut histograms: Vec<HeadHistogram> = Vec::new();
        for e in &log.episodes {
            let i = match rows.iter().position(|r| r.label == e.label) {
                Some(i) => i,
                None => {
                    rows.push(StrategyRow {
                        label: e.label.clone(),
                        episodes: 0,
                        successes: 0,
                        stages: vec![0; nphase],
                    });
                    histograms.push(HeadHistogram {
                        label: e.label.clone(),
                        counts: vec![vec![0; h.k]; nphase],
                    });
                    rows.len() - 1
                }
            };
            let row = &mut rows[i];
            row.episodes += 1;
            row.successes += usize::from(e.success);
            for (s, &done) in row.stages.iter_mut().zip(&e.stages) {
                *s += usize::from(done);
            }
            for (&p, head) in e.phases.iter().zip(&e.heads) {
                if let Some(k) = head {
                    histograms[i].counts[p][*k] += 1;
                }
            }
        }
        Self {
            config_hash: h.config_hash.clone(),
            task: h.task.clone(),
            algo: h.algo.clone(),
            k: h.k,
            eval_seed: h.eval_seed,
            phases: h.phases.clone(),
            rows,
            histograms,
            calibration: log.calibration,
        }
    }

    pub fn row(&self, label: &str) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn histogram(&self, label: &str) -> Option<&HeadHistogram> {
        self.histograms.iter().find(|h| h.label == label)
    }

    /// One row per strategy: episodes, successes and per-phase completions.
    pub fn table_csv(&self) -> String {
        let mut s = text_header(&self.config_hash);
        s.push_str("strategy,episodes,success");
        for p in &self.phases {
            s.push(',');
            s.push_str(p);
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{},{},{}", r.label, r.episodes, r.successes));
            for n in &r.stages {
                s.push_str(&format!(",{n}"));
            }
            s.push('\n');
        }
        s
    }

    /// Long format: one line per (strategy, phase, head) count.
    pub fn heads_csv(&self) -> String {
        let mut s = text_header(&self.config_hash);
        s.push_str("strategy,phase,head,steps\n");
        for h in &self.histograms {
            for (p, row) in h.counts.iter().enumerate() {
                for (k, n) in row.iter().enumerate() {
                    s.push_str(&format!("{},{},{k},{n}\n", h.label, self.phases[p]));
                }
            }
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = text_header(&self.config_hash);
        s.push_str(&format!("task {}\nalgo {}\nk {}\neval_seed {}\n", self.task, self.algo, self.k, self.eval_seed));
        for (r, h) in self.rows.iter().zip(&self.histograms) {
            s.push_str(&format!("\nstrategy {}\n", r.label));
            s.push_str(&format!("  success {}/{}\n", r.successes, r.episodes));
            for (p, name) in self.phases.iter().enumerate() {
                s.push_str(&format!("  stage {name} {}/{}", r.stages[p], r.episodes));
                if let Some((head, frac)) = h.modal(p) {
                    let counts: Vec<String> = h.counts[p].iter().map(|n| n.to_string()).collect();
                    s.push_str(&format!("  heads [{}] modal {head} ({frac:.4})", counts.join(" ")));
                }
                s.push('\n');
            }
        }
        if let Some(c) = self.calibration {
            s.push_str(&format!("\ncalibration spearman {:.6} over {} pairs\n", c.spearman, c.pairs));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{EpisodeLog, RolloutLogHeader};
    use crate::config::SCHEMA_VERSION;

    fn episode(label: &str, success: bool, phases: Vec<usize>, heads: Vec<Option<usize>>) -> EpisodeLog {
        EpisodeLog {
            label: label.into(),
            episode: 0,
            success,
            reason: None,
            stages: vec![true, success],
            phases,
            heads,
        }
    }

    fn log() -> RolloutLog {
        RolloutLog {
            header: RolloutLogHeader {
                schema_version: SCHEMA_VERSION,
                config_hash: "h".into(),
                task: "fork".into(),
                algo: "choice".into(),
                k: 3,
                phases: vec!["a".into(), "b".into()],
                eval_seed: 0,
                eval_episodes: 2,
            },
            episodes: vec![
                episode("score", true, vec![0, 0, 1], vec![Some(2), Some(2), Some(1)]),
                episode("score", false, vec![0, 1, 1], vec![Some(0), Some(1), Some(1)]),
                episode("mean", false, vec![0, 1], vec![None, None]),
            ],
            calibration: None,
        }
    }

    #[test]
    fn counts_and_histograms() {
        let r = MetricsReport::from_log(&log());
        let score = r.row("score").unwrap();
        assert_eq!((score.episodes, score.successes, score.stages.clone()), (2, 1, vec![2, 1]));
        let h = r.histogram("score").unwrap();
        assert_eq!(h.counts, vec![vec![1, 0, 2], vec![0, 3, 0]]);
        assert_eq!(h.modal(0), Some((2, 2.0 / 3.0)));
        assert_eq!(h.modal(1), Some((1, 1.0)));
        let total: usize = h.counts.iter().flatten().sum();
        assert_eq!(total, 6);
        assert_eq!(r.histogram("mean").unwrap().modal(0), None);
        assert_eq!(r.rows.len(), 2);
    }

    #[test]
    fn csv_layout() {
        let r = MetricsReport::from_log(&log());
        let table = r.table_csv();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[1], "strategy,episodes,success,a,b");
        assert_eq!(lines[2], "score,2,1,2,1");
        assert_eq!(lines[3], "mean,1,0,1,0");
        assert_eq!(r.heads_csv().lines().count(), 2 + 2 * 2 * 3);
    }
}
