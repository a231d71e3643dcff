use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Metrics;
use crate::error::{HyveError, Result};
use crate::wroi::WroiSnapshot;

/// One `epoch,split,metric,value` record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

/// Per-epoch losses, accuracies and WROI snapshots of a training run.
///
/// Epoch 0 describes the model before any update. For later epochs the
/// training loss and accuracy are running averages over that epoch's
/// mini-batches; test metrics are measured after the epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
    pub wroi: Vec<WroiSnapshot>,
    pub final_train: Option<Metrics>,
    pub final_test: Option<Metrics>,
}

impl TrainHistory {
    fn push(&mut self, epoch: usize, split: &str, metric: &str, value: f64) {
        self.rows.push(HistoryRow {
            epoch,
            split: split.into(),
            metric: metric.into(),
            value,
        });
    }

    fn push_test(&mut self, epoch: usize, test: Option<&Metrics>) {
        if let Some(m) = test {
            self.push(epoch, "test", "oa", m.oa);
            self.push(epoch, "test", "aa", m.aa);
            self.push(epoch, "test", "kappa", m.kappa);
        }
    }

    pub(crate) fn record_epoch(
        &mut self,
        epoch: usize,
        loss: f64,
        train: &Metrics,
        test: Option<&Metrics>,
        wroi: Option<Vec<WroiSnapshot>>,
    ) {
        self.push(epoch, "train", "loss", loss);
        self.push(epoch, "train", "oa", train.oa);
        self.push_test(epoch, test);
        self.wroi.extend(wroi.into_iter().flatten());
    }

    pub(crate) fn record_running_epoch(
        &mut self,
        epoch: usize,
        loss: f64,
        accuracy: f64,
        test: Option<&Metrics>,
        wroi: Option<Vec<WroiSnapshot>>,
    ) {
        self.push(epoch, "train", "loss", loss);
        self.push(epoch, "train", "oa", accuracy);
        self.push_test(epoch, test);
        self.wroi.extend(wroi.into_iter().flatten());
    }

    pub fn metric(&self, epoch: usize, split: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.epoch == epoch && r.split == split && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn loss(&self, epoch: usize) -> Option<f64> {
        self.metric(epoch, "train", "loss")
    }

    pub fn epochs(&self) -> usize {
        self.rows.iter().map(|r| r.epoch).max().unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,split,metric,value\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{}", r.epoch, r.split, r.metric, r.value)
                .expect("writing to a String");
        }
        s
    }

    pub fn trajectory_csv(&self) -> String {
        trajectory_to_csv(&self.wroi)
    }
}

pub fn trajectory_to_csv(rows: &[WroiSnapshot]) -> String {
    let mut s = String::from("epoch,wroi,mean_nm,variance_nm2\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.epoch, r.wroi, r.mean_nm, r.variance_nm2)
            .expect("writing to a String");
    }
    s
}

/// Parses the output of [`trajectory_to_csv`].
pub fn trajectory_from_csv(text: &str) -> Result<Vec<WroiSnapshot>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "epoch,wroi,mean_nm,variance_nm2")) => {}
        _ => {
            return Err(HyveError::format(
                "line 1",
                "expected header 'epoch,wroi,mean_nm,variance_nm2'",
            ))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| {
            HyveError::format(format!("line {}", i + 1), format!("{what} in '{line}'"))
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        out.push(WroiSnapshot {
            epoch: fields[0].parse().map_err(|_| bad("bad epoch"))?,
            wroi: fields[1].parse().map_err(|_| bad("bad wroi index"))?,
            mean_nm: fields[2].parse().map_err(|_| bad("bad mean"))?,
            variance_nm2: fields[3].parse().map_err(|_| bad("bad variance"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let rows = vec![
            WroiSnapshot {
                epoch: 0,
                wroi: 0,
                mean_nm: 397.66,
                variance_nm2: 14_689.1 / 3.0,
            },
            WroiSnapshot {
                epoch: 1,
                wroi: 0,
                mean_nm: 398.0 + 1e-9,
                variance_nm2: 1.0 / 7.0,
            },
        ];
        let text = trajectory_to_csv(&rows);
        assert_eq!(trajectory_from_csv(&text).unwrap(), rows);
        assert!(matches!(
            trajectory_from_csv("epoch,x\n"),
            Err(HyveError::Format { .. })
        ));
        let broken = text.replace("398", "abc");
        match trajectory_from_csv(&broken) {
            Err(HyveError::Format { position, .. }) => assert_eq!(position, "line 3"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
