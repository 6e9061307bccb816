use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::prepare;
use crate::error::{Result, StageExt};
use crate::mapprops::tailor_input;
use crate::sysid::{evaluate_fit_window, fit_arx_structure};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub order: usize,
    pub fit_train: Option<f64>,
    pub fit_test: Option<f64>,
    pub condition_number: Option<f64>,
    /// Why the row has no fit.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Order prescribed by the relative-degree analysis.
    pub algorithm_order: usize,
    /// Relative degree held fixed across the sweep.
    pub map_reldeg: usize,
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

impl SweepTable {
    pub fn row(&self, order: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.order == order)
    }

    /// Tidy CSV: `order,metric,value`; missing values are omitted.
    pub fn to_tidy_csv(&self) -> String {
        let mut out = String::from("order,metric,value\n");
        for r in &self.rows {
            for (metric, v) in [
                ("fit_train", r.fit_train),
                ("fit_test", r.fit_test),
                ("condition_number", r.condition_number),
            ] {
                if let Some(v) = v {
                    out.push_str(&format!("{},{metric},{v:.16e}\n", r.order));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes") + "\n"
    }
}

/// Identifies the map at each order with the relative degree fixed, scoring
/// the free-run fit on training and held-out data. Failures are recorded in
/// the row and the sweep continues. Orders are fitted concurrently.
pub fn order_sweep(cfg: &ExperimentConfig, orders: &[usize]) -> Result<SweepTable> {
    let mut base = cfg.clone();
    base.identification.order_override = None;
    let prep = prepare(&base)?;
    let props = &prep.props;
    let mut warnings = prep.warnings.clone();

    let mut unique = Vec::new();
    for &o in orders {
        if unique.contains(&o) {
            warnings.push(format!("order {o} listed more than once; fitted once"));
        } else {
            unique.push(o);
        }
    }

    let u_train = tailor_input(&prep.train.y_s, props, None).stage("tailor")?;
    let u_test = tailor_input(&prep.test.y_s, props, None).stage("tailor")?;
    let reldeg = props.map_reldeg;
    let ridge = cfg.identification.ridge;
    let fit_one = |order: usize| -> SweepRow {
        let mut row = SweepRow { order, fit_train: None, fit_test: None, condition_number: None, error: None };
        let fit = match fit_arx_structure(&u_train, &prep.train.y_t, order, reldeg, ridge) {
            Ok(f) => f,
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        };
        row.fit_train = Some(fit.report.fit_percent);
        row.condition_number = Some(fit.condition_number);
        match fit
            .model
            .simulate(&u_test)
            .and_then(|y| evaluate_fit_window(&prep.test.y_t, &y, 0, u_test.shift()))
        {
            Ok(r) => row.fit_test = Some(r.fit_percent),
            Err(e) => row.error = Some(format!("test: {e}")),
        }
        row
    };
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = unique.iter().map(|&o| s.spawn(move || fit_one(o))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    Ok(SweepTable { algorithm_order: props.map_order, map_reldeg: reldeg, rows, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::demo_config;

    #[test]
    fn sweep_shape_on_demo_pair() {
        let mut cfg = demo_config(1);
        cfg.noise_std = 0.0;
        cfg.train_duration = 30.0;
        cfg.test_duration = 30.0;
        let t = order_sweep(&cfg, &[1, 3, 2, 3]).unwrap();
        assert_eq!(t.algorithm_order, 3);
        assert_eq!(t.rows.iter().map(|r| r.order).collect::<Vec<_>>(), vec![1, 3, 2]);
        assert_eq!(t.warnings.iter().filter(|w| w.contains("more than once")).count(), 1);
        let fit = |o| t.row(o).unwrap().fit_train.unwrap();
        assert!(fit(1) < fit(2) && fit(2) <= fit(3) && fit(3) > 99.9);
        let csv = t.to_tidy_csv();
        assert!(csv.starts_with("order,metric,value\n1,fit_train,"));
    }

    #[test]
    fn failing_order_is_recorded_in_row() {
        let mut cfg = demo_config(1);
        cfg.noise_std = 0.0;
        cfg.train_duration = 2.0;
        cfg.test_duration = 2.0;
        let t = order_sweep(&cfg, &[1, 40]).unwrap();
        assert!(t.row(1).unwrap().fit_train.is_some());
        assert!(t.row(40).unwrap().error.is_some());
    }
}
