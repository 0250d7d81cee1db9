use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, ExperimentResult, RunRecord, Summary};
use crate::error::{BanditError, Result};
use crate::rng::replicate_seed;

pub fn runs_header(num_constraints: usize) -> Vec<String> {
    let mut h = vec![
        "round".to_string(),
        "replicate".into(),
        "policy_expected_reward".into(),
    ];
    h.extend((1..=num_constraints).map(|i| format!("policy_expected_cost_{i}")));
    h.push("cumulative_regret".into());
    h
}

/// `round` followed by a `mean_`/`std_` pair for every series of the runs file.
pub fn summary_header(num_constraints: usize) -> Vec<String> {
    let mut h = vec!["round".to_string()];
    for name in runs_header(num_constraints).into_iter().skip(2) {
        h.push(format!("mean_{name}"));
        h.push(format!("std_{name}"));
    }
    h
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| BanditError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> BanditError + '_ {
    move |source| BanditError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// One row per `(round, replicate)`, rounds 1-based, ordered by round then
/// replicate.
pub fn write_runs_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let m = records.first().map_or(0, RunRecord::num_constraints);
    let t = records.first().map_or(0, RunRecord::rounds);
    if let Some(r) = records
        .iter()
        .find(|r| r.rounds() != t || r.num_constraints() != m)
    {
        return Err(BanditError::LengthMismatch(format!(
            "replicate {} does not match the shape of replicate {}",
            r.replicate_id, records[0].replicate_id
        )));
    }
    let err = csv_err(path);
    let mut w = writer(path)?;
    w.write_record(runs_header(m)).map_err(&err)?;
    for round in 0..t {
        for r in records {
            let mut row = vec![(round + 1).to_string(), r.replicate_id.to_string()];
            row.push(r.policy_expected_reward[round].to_string());
            row.extend(r.policy_expected_cost[round].iter().map(f64::to_string));
            row.push(r.cumulative_regret[round].to_string());
            w.write_record(&row).map_err(&err)?;
        }
    }
    w.flush().map_err(|e| BanditError::io(path, e))
}

pub fn write_summary_csv(summary: &Summary, path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = writer(path)?;
    w.write_record(summary_header(summary.cost.len()))
        .map_err(&err)?;
    for t in 0..summary.rounds() {
        let mut row = vec![(t + 1).to_string()];
        let series = std::iter::once(&summary.reward)
            .chain(&summary.cost)
            .chain(std::iter::once(&summary.regret));
        for s in series {
            row.push(s.mean[t].to_string());
            row.push(s.std[t].to_string());
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| BanditError::io(path, e))
}

/// Parses a runs file back into records ordered by replicate. Seeds are
/// not stored in the file and are rederived from `base_seed`.
pub fn read_runs_csv(path: &Path, base_seed: u64) -> Result<Vec<RunRecord>> {
    let err = csv_err(path);
    let mut rdr = csv::Reader::from_path(path).map_err(&err)?;
    let header = rdr.headers().map_err(&err)?.clone();
    let m = header.len().checked_sub(4).ok_or_else(|| {
        BanditError::InvalidInstance(format!(
            "{}: runs header has {} columns",
            path.display(),
            header.len()
        ))
    })?;
    if header.iter().ne(runs_header(m).iter().map(String::as_str)) {
        return Err(BanditError::InvalidInstance(format!(
            "{}: unexpected runs header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let bad = |line: u64, what: &str| {
        BanditError::InvalidInstance(format!("{}: line {line}: {what}", path.display()))
    };
    let mut records: Vec<RunRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(&err)?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|_| bad(line, "malformed number"))
        };
        let round: usize = row[0].parse().map_err(|_| bad(line, "malformed round"))?;
        let rep: u64 = row[1]
            .parse()
            .map_err(|_| bad(line, "malformed replicate"))?;
        let idx = match records.iter().position(|r| r.replicate_id == rep) {
            Some(i) => i,
            None => {
                records.push(RunRecord {
                    replicate_id: rep,
                    seed: replicate_seed(base_seed, rep),
                    policy_expected_reward: Vec::new(),
                    policy_expected_cost: Vec::new(),
                    cumulative_regret: Vec::new(),
                    exploration: None,
                    safe_cost_estimate: None,
                });
                records.len() - 1
            }
        };
        let r = &mut records[idx];
        if round != r.rounds() + 1 {
            return Err(bad(line, "rounds out of order"));
        }
        r.policy_expected_reward.push(num(2)?);
        r.policy_expected_cost
            .push((0..m).map(|i| num(3 + i)).collect::<Result<_>>()?);
        r.cumulative_regret.push(num(3 + m)?);
    }
    records.sort_by_key(|r| r.replicate_id);
    Ok(records)
}

/// `<out>/<algo>_tau<t1>_<t2>...`.
pub fn experiment_dir(out: &Path, config: &ExperimentConfig) -> PathBuf {
    let taus: Vec<String> = config
        .environment
        .thresholds()
        .iter()
        .map(f64::to_string)
        .collect();
    out.join(format!(
        "{}_tau{}",
        config.environment.algorithm_name(),
        taus.join("_")
    ))
}

/// Writes `runs.csv`, `summary.csv` and `config.json`; returns the directory.
pub fn write_experiment(
    out: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
) -> Result<PathBuf> {
    let dir = experiment_dir(out, config);
    fs::create_dir_all(&dir).map_err(|e| BanditError::io(&dir, e))?;
    write_runs_csv(&result.records, &dir.join("runs.csv"))?;
    write_summary_csv(&result.summary, &dir.join("summary.csv"))?;
    let cfg_path = dir.join("config.json");
    let mut json = serde_json::to_string_pretty(config)?;
    json.push('\n');
    fs::write(&cfg_path, json).map_err(|e| BanditError::io(&cfg_path, e))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{figure_instance, run_experiment, Environment};

    fn config(horizon: u64, replicates: u64) -> ExperimentConfig {
        ExperimentConfig::new(
            Environment::Opb(figure_instance(0.5).unwrap()),
            horizon,
            replicates,
            11,
        )
    }

    #[test]
    fn one_replicate_two_rounds_is_three_lines() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&config(2, 1)).unwrap();
        let path = dir.path().join("runs.csv");
        write_runs_csv(&res.records, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(!text.contains('\r'));
        assert!(text.starts_with(
            "round,replicate,policy_expected_reward,policy_expected_cost_1,cumulative_regret\n"
        ));
    }

    #[test]
    fn rerun_writes_identical_bytes() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = config(200, 3);
        let da = write_experiment(a.path(), &cfg, &run_experiment(&cfg).unwrap()).unwrap();
        let db = write_experiment(b.path(), &cfg, &run_experiment(&cfg).unwrap()).unwrap();
        for f in ["runs.csv", "summary.csv", "config.json"] {
            assert_eq!(
                fs::read(da.join(f)).unwrap(),
                fs::read(db.join(f)).unwrap(),
                "{f}"
            );
        }
        assert_eq!(da.file_name().unwrap(), "opb_tau0.5");
    }

    #[test]
    fn runs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(150, 4);
        let res = run_experiment(&cfg).unwrap();
        let path = dir.path().join("runs.csv");
        write_runs_csv(&res.records, &path).unwrap();
        assert_eq!(read_runs_csv(&path, cfg.base_seed).unwrap(), res.records);
    }

    #[test]
    fn summary_has_mean_and_std_columns() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_experiment(&config(5, 2)).unwrap();
        let path = dir.path().join("summary.csv");
        write_summary_csv(&res.summary, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 7);
        assert_eq!(header, summary_header(1).join(","));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn io_errors_name_the_path() {
        let res = run_experiment(&config(2, 1)).unwrap();
        let path = Path::new("/nonexistent-dir/runs.csv");
        let e = write_runs_csv(&res.records, path).unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/runs.csv"), "{e}");
    }
}
