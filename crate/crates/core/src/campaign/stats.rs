use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::mutate::Strategy;

/// A stats row key: a mutation strategy, seed execution, or trimming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatKey {
    Trim,
    Strategy(Strategy),
}

impl StatKey {
    pub fn name(self) -> &'static str {
        match self {
            StatKey::Trim => "trim",
            StatKey::Strategy(s) => s.name(),
        }
    }
}

impl fmt::Display for StatKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatKey {
    type Err = crate::mutate::UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "trim" {
            Ok(StatKey::Trim)
        } else {
            s.parse().map(StatKey::Strategy)
        }
    }
}

impl From<Strategy> for StatKey {
    fn from(s: Strategy) -> Self {
        StatKey::Strategy(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatRow {
    /// Executions.
    pub generated: u64,
    /// Executions admitted to the queue.
    pub interesting: u64,
    /// Batches produced.
    pub applications: u64,
    pub parse: Duration,
    pub mutate: Duration,
    pub exec: Duration,
}

impl StatRow {
    fn add(&mut self, o: &StatRow) {
        self.generated += o.generated;
        self.interesting += o.interesting;
        self.applications += o.applications;
        self.parse += o.parse;
        self.mutate += o.mutate;
        self.exec += o.exec;
    }
}

/// Per-cycle, per-key counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsTable {
    rows: BTreeMap<(u64, StatKey), StatRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    cycle: u64,
    strategy: String,
    generated: u64,
    interesting: u64,
    applications: u64,
    parse_ms: f64,
    mutate_ms: f64,
    exec_ms: f64,
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

impl StatsTable {
    pub fn row_mut(&mut self, cycle: u64, key: impl Into<StatKey>) -> &mut StatRow {
        self.rows.entry((cycle, key.into())).or_default()
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, StatKey, &StatRow)> {
        self.rows.iter().map(|((c, k), r)| (*c, *k, r))
    }

    /// Totals per key over all cycles.
    pub fn totals(&self) -> BTreeMap<StatKey, StatRow> {
        let mut out: BTreeMap<StatKey, StatRow> = BTreeMap::new();
        for ((_, k), r) in &self.rows {
            out.entry(*k).or_default().add(r);
        }
        out
    }

    pub fn total(&self, key: impl Into<StatKey>) -> StatRow {
        self.totals().get(&key.into()).copied().unwrap_or_default()
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for ((cycle, key), r) in &self.rows {
            wr.serialize(CsvRow {
                cycle: *cycle,
                strategy: key.name().to_string(),
                generated: r.generated,
                interesting: r.interesting,
                applications: r.applications,
                parse_ms: ms(r.parse),
                mutate_ms: ms(r.mutate),
                exec_ms: ms(r.exec),
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, StatsError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut t = StatsTable::default();
        for (i, row) in rd.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| StatsError(format!("row {}: {e}", i + 1)))?;
            let key: StatKey = row.strategy.parse().map_err(|e| StatsError(format!("row {}: {e}", i + 1)))?;
            let dur = |v: f64| {
                if v.is_finite() && v >= 0.0 {
                    Ok(Duration::from_secs_f64(v / 1e3))
                } else {
                    Err(StatsError(format!("row {}: bad duration {v}", i + 1)))
                }
            };
            if row.interesting > row.generated {
                return Err(StatsError(format!("row {}: interesting exceeds generated", i + 1)));
            }
            let r = t.row_mut(row.cycle, key);
            r.generated += row.generated;
            r.interesting += row.interesting;
            r.applications += row.applications;
            r.parse += dur(row.parse_ms)?;
            r.mutate += dur(row.mutate_ms)?;
            r.exec += dur(row.exec_ms)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("stats: {0}")]
pub struct StatsError(pub String);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = StatsTable::default();
        let r = t.row_mut(1, Strategy::Tree);
        r.generated = 10;
        r.interesting = 2;
        r.applications = 1;
        r.exec = Duration::from_micros(1500);
        t.row_mut(0, StatKey::Trim).generated = 4;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("cycle,strategy,generated,interesting,applications,parse_ms,mutate_ms,exec_ms\n"));
        assert!(text.contains("1,tree,10,2,1,0.0,0.0,1.5"));
        assert_eq!(StatsTable::read_csv(&buf[..]).unwrap(), t);
        assert!(StatsTable::read_csv(&b"cycle,strategy\n1,nope\n"[..]).is_err());
    }
}
